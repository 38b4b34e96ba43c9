//! Evaluation harness: metrics, privacy-parameter sweeps, per-layer
//! variance-injection tables, feature-correlation matrices, and the
//! empirical indistinguishability game.

pub mod game;
pub mod metrics;
pub mod sweep;

pub use game::{
    Adversary, GameScheme, GameTranscript, LogisticDistinguisher, MaskOnlyScheme,
    ModelScheme, NearestNeighbor, RandomGuess, run_distinguisher_game,
};
pub use metrics::{accuracy, auc, pearson, spearman};
pub use sweep::{
    default_grid, evaluate_mechanism, evaluate_point, feature_correlation_matrix,
    per_layer_table, CorrelationMatrix, DpSweepMechanism, LayerRow, Mechanism,
    ModelSweepMechanism, NoopMechanism, SweepReport, UtilityReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 values, got {got}")]
    TooFewValues { got: usize },
    #[error("correlation undefined for zero-variance input")]
    ZeroVariance,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("record {index} has no label")]
    MissingLabel { index: usize },
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: u64, got: u64 },
    #[error("candidate pool needs at least {min} records, got {got}")]
    SmallPool { min: usize, got: usize },
    #[error("adversary returned {got}, expected a bit")]
    NonBitGuess { got: u8 },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("grid values must be strictly increasing")]
    GridNotIncreasing,
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Gan(#[from] crate::gan::GanError),
    #[error(transparent)]
    Dp(#[from] crate::dp::DpError),
    #[error(transparent)]
    Target(#[from] crate::target::TargetError),
    #[error(transparent)]
    Mask(#[from] crate::mask::MaskError),
}
