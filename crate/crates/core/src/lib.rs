//! Privacy-preserving anonymization of tabular medical records.
//!
//! The crate trains an adversarial encoder that rewrites a record into a
//! synthetic one whose score under a frozen black-box target classifier
//! matches the original, ships a per-feature Laplace mechanism as the
//! differential-privacy baseline, and provides the evaluation harness
//! (correlation/accuracy/AUC sweeps, per-layer variance-injection tables,
//! and an empirical indistinguishability game) used to compare the two.

pub mod container;
pub mod data;
pub mod dp;
pub mod eval;
pub mod gan;
pub mod mask;
pub mod nn;
pub mod target;

pub use data::{Dataset, FeatureKind, FeatureSpec, Record, SchemaKind};
pub use gan::{AnomiModel, FusionMode, InjectionPolicy, PrivacyConfig};
pub use mask::MaskMode;
pub use target::{TargetKind, TargetModel};
