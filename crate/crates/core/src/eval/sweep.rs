//! Privacy-parameter sweeps, the per-layer injection table, and the
//! feature-correlation matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{metrics, EvalError};
use crate::data::Dataset;
use crate::dp::{DpConfig, DpMechanism};
use crate::gan::{AnomiModel, AnonymizeSession, InjectionPolicy};
use crate::target::TargetModel;

/// Averaged utility metrics for one mechanism at one parameter point.
/// `accuracy` scores anonymized records against true labels,
/// `accuracy_vs_original` against the target's own predictions on the
/// originals; both are reported.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UtilityReport {
    pub mechanism: String,
    pub param: f64,
    pub correlation: f64,
    pub accuracy: f64,
    pub accuracy_vs_original: f64,
    pub auc: f64,
    pub n_cases: usize,
}

/// One row of the per-layer injection table; `layer` of `None` is the
/// injection-off control row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: Option<usize>,
    pub correlation: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub trials: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major n*n Pearson values; undefined pairs hold NaN.
    pub values: Vec<f64>,
    /// Indices of constant features whose rows/columns are undefined.
    pub undefined: Vec<usize>,
}

/// Everything the evaluation emits, ready for CSV serialization.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: Vec<f64>,
    pub reports: Vec<UtilityReport>,
    pub per_layer: Vec<LayerRow>,
    pub feature_correlation: Option<CorrelationMatrix>,
}

/// An anonymization mechanism under evaluation.
pub trait Mechanism {
    fn tag(&self) -> &'static str;
    fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError>;
}

/// Passes records through untouched; the sweep-calibration control.
pub struct NoopMechanism;

impl Mechanism for NoopMechanism {
    fn tag(&self) -> &'static str {
        "noop"
    }

    fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(x.to_vec())
    }
}

pub struct DpSweepMechanism {
    inner: DpMechanism,
}

impl DpSweepMechanism {
    pub fn new(cfg: DpConfig) -> Self {
        Self {
            inner: DpMechanism::new(cfg),
        }
    }
}

impl Mechanism for DpSweepMechanism {
    fn tag(&self) -> &'static str {
        "dp"
    }

    fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.inner.anonymize(x)?)
    }
}

pub struct ModelSweepMechanism<'a> {
    session: AnonymizeSession<'a>,
}

impl<'a> ModelSweepMechanism<'a> {
    pub fn new(model: &'a AnomiModel, session_seed: u64) -> Self {
        Self {
            session: AnonymizeSession::new(model, session_seed),
        }
    }

    pub fn with_delta(model: &'a AnomiModel, session_seed: u64, delta: f64) -> Self {
        Self {
            session: AnonymizeSession::new(model, session_seed).with_delta(delta),
        }
    }
}

impl Mechanism for ModelSweepMechanism<'_> {
    fn tag(&self) -> &'static str {
        "anomigan"
    }

    fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.session.anonymize(x)?)
    }
}

/// The sweeps' default parameter grid: 0.1 through 1.0 in steps of 0.1.
pub fn default_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// Evaluate one mechanism at one parameter point: sample `n_cases` test
/// records with replacement, anonymize each, and average per-record Pearson
/// correlation plus the target's accuracy/AUC on the anonymized records.
pub fn evaluate_point(
    mechanism: &mut dyn Mechanism,
    ds: &Dataset,
    target: &TargetModel,
    param: f64,
    n_cases: usize,
    seed: u64,
) -> Result<UtilityReport, EvalError> {
    if ds.test.is_empty() {
        return Err(EvalError::SmallPool { min: 1, got: 0 });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut correlations = Vec::with_capacity(n_cases);
    let mut scores = Vec::with_capacity(n_cases);
    let mut labels = Vec::with_capacity(n_cases);
    let mut original_predictions = Vec::with_capacity(n_cases);
    for _ in 0..n_cases {
        let idx = rng.gen_range(0..ds.test.len());
        let record = &ds.test[idx];
        let label = record.label.ok_or(EvalError::MissingLabel { index: idx })?;
        let x = &record.features;
        let x_hat = mechanism.anonymize(x)?;
        correlations.push(metrics::pearson(x, &x_hat)?);
        let score = target.score(&x_hat)?;
        let original = target.score(x)?;
        scores.push(score);
        labels.push(label);
        original_predictions.push(u8::from(original >= target.threshold));
    }
    let correlation = correlations.iter().sum::<f64>() / correlations.len() as f64;
    // A degenerate resample can hold a single class; report the chance
    // level rather than failing the whole sweep.
    let auc = match metrics::auc(&scores, &labels) {
        Ok(v) => v,
        Err(EvalError::SingleClass) => 0.5,
        Err(e) => return Err(e),
    };
    Ok(UtilityReport {
        mechanism: mechanism.tag().to_string(),
        param,
        correlation,
        accuracy: metrics::accuracy(&scores, &labels, target.threshold)?,
        accuracy_vs_original: metrics::accuracy(&scores, &original_predictions, target.threshold)?,
        auc,
        n_cases,
    })
}

/// Run the sweep across a grid, building a fresh mechanism per point via
/// `factory` (which may train, reseed, or reconfigure as the parameter
/// demands).
pub fn evaluate_mechanism<'m>(
    mut factory: impl FnMut(f64) -> Result<Box<dyn Mechanism + 'm>, EvalError>,
    grid: &[f64],
    ds: &Dataset,
    target: &TargetModel,
    n_cases: usize,
    seed: u64,
) -> Result<Vec<UtilityReport>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::GridNotIncreasing);
    }
    let mut reports = Vec::with_capacity(grid.len());
    for (i, &param) in grid.iter().enumerate() {
        let mut mechanism = factory(param)?;
        let point_seed = seed.wrapping_add(i as u64);
        reports.push(evaluate_point(
            mechanism.as_mut(),
            ds,
            target,
            param,
            n_cases,
            point_seed,
        )?);
    }
    Ok(reports)
}

/// Fix injection to each encoder block in turn and average metrics over
/// `trials` passes of the full test set; the first row is the deterministic
/// injection-off control.
pub fn per_layer_table(
    model: &AnomiModel,
    ds: &Dataset,
    target: &TargetModel,
    trials: u64,
    seed: u64,
) -> Result<Vec<LayerRow>, EvalError> {
    if model.variance_store.is_empty() {
        return Err(EvalError::Gan(crate::gan::GanError::EmptyVarianceStore));
    }
    if ds.test.is_empty() {
        return Err(EvalError::SmallPool { min: 1, got: 0 });
    }
    let labels: Vec<u8> = ds
        .test
        .iter()
        .enumerate()
        .map(|(i, r)| r.label.ok_or(EvalError::MissingLabel { index: i }))
        .collect::<Result<_, _>>()?;

    let run_pass = |policy: InjectionPolicy, pass_seed: u64| -> Result<(f64, f64, f64), EvalError> {
        let mut session = AnonymizeSession::new(model, pass_seed).with_injection(policy);
        let mut correlations = Vec::with_capacity(ds.test.len());
        let mut scores = Vec::with_capacity(ds.test.len());
        for record in &ds.test {
            let x_hat = session.anonymize(&record.features)?;
            correlations.push(metrics::pearson(&record.features, &x_hat)?);
            scores.push(target.score(&x_hat)?);
        }
        let cc = correlations.iter().sum::<f64>() / correlations.len() as f64;
        let acc = metrics::accuracy(&scores, &labels, target.threshold)?;
        let auc = metrics::auc(&scores, &labels)?;
        Ok((cc, acc, auc))
    };

    let mut rows = Vec::with_capacity(crate::gan::INJECTABLE_SITES + 1);
    let (cc, acc, auc) = run_pass(InjectionPolicy::Off, seed)?;
    rows.push(LayerRow {
        layer: None,
        correlation: cc,
        accuracy: acc,
        auc,
        trials: 1,
    });
    for site in 1..=crate::gan::INJECTABLE_SITES {
        let mut sums = (0.0, 0.0, 0.0);
        for t in 0..trials {
            let pass_seed = seed
                .wrapping_add(site as u64 * 0x1_0000)
                .wrapping_add(t + 1);
            let (cc, acc, auc) = run_pass(InjectionPolicy::Layer(site), pass_seed)?;
            sums.0 += cc;
            sums.1 += acc;
            sums.2 += auc;
        }
        let tf = trials as f64;
        rows.push(LayerRow {
            layer: Some(site),
            correlation: sums.0 / tf,
            accuracy: sums.1 / tf,
            auc: sums.2 / tf,
            trials,
        });
    }
    Ok(rows)
}

/// Pairwise Pearson over the train split: symmetric, unit diagonal, NaN on
/// rows/columns of constant features (listed in `undefined`).
pub fn feature_correlation_matrix(ds: &Dataset) -> Result<CorrelationMatrix, EvalError> {
    let n = ds.n;
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|f| ds.train.iter().map(|r| r.features[f]).collect())
        .collect();
    let undefined: Vec<usize> = (0..n)
        .filter(|f| columns[*f].windows(2).all(|w| w[0] == w[1]))
        .collect();
    let mut values = vec![f64::NAN; n * n];
    for i in 0..n {
        if !undefined.contains(&i) {
            values[i * n + i] = 1.0;
        }
        for j in i + 1..n {
            if undefined.contains(&i) || undefined.contains(&j) {
                continue;
            }
            let r = metrics::pearson(&columns[i], &columns[j])?;
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: ds.specs.iter().map(|s| s.name.clone()).collect(),
        values,
        undefined,
    })
}
