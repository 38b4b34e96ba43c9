//! The black-box disease classifier whose prediction the anonymizer must
//! preserve. Trained locally, then frozen; the anonymizer only ever sees
//! scores (and score gradients) through this module's interface.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::eval::metrics;
use crate::nn::{Activation, AdamState, Dense, Layer, Network, NnError, Tensor2};

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("training labels are degenerate: need both classes present")]
    DegenerateLabels,
    #[error("record {index} has no label")]
    MissingLabel { index: usize },
    #[error("dataset must be normalized before training")]
    NotNormalized,
    #[error("training diverged at step {step}: non-finite loss")]
    Diverged { step: u64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metric(#[from] Box<crate::eval::EvalError>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Logistic,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMeta {
    pub dataset: String,
    pub seed: u64,
    pub test_accuracy: f64,
    pub test_auc: f64,
}

/// A frozen scoring model: `score(x)` is the probability of the positive
/// class and never mutates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub kind: TargetKind,
    pub net: Network,
    pub threshold: f64,
    pub meta: TargetMeta,
}

fn build_net(kind: TargetKind, n: usize) -> Network {
    match kind {
        TargetKind::Logistic => Network::new(vec![
            Layer::Dense(Dense::new(n, 1)),
            Layer::Activation(Activation::Sigmoid),
        ]),
        TargetKind::Mlp => Network::new(vec![
            Layer::Dense(Dense::new(n, 16)),
            Layer::Activation(Activation::Tanh),
            Layer::Dense(Dense::new(16, 8)),
            Layer::Activation(Activation::Tanh),
            Layer::Dense(Dense::new(8, 1)),
            Layer::Activation(Activation::Sigmoid),
        ]),
    }
}

const EPOCHS: usize = 300;
const BATCH: usize = 32;
const WEIGHT_DECAY: f64 = 2e-3;

/// Train on the train split only; held-out metrics land in the metadata.
pub fn train_target(ds: &Dataset, kind: TargetKind, seed: u64) -> Result<TargetModel, TargetError> {
    if !ds.normalized {
        return Err(TargetError::NotNormalized);
    }
    let labels: Vec<f64> = ds
        .train
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.label
                .map(f64::from)
                .ok_or(TargetError::MissingLabel { index: i })
        })
        .collect::<Result<_, _>>()?;
    if labels.iter().all(|l| *l == 0.0) || labels.iter().all(|l| *l == 1.0) {
        return Err(TargetError::DegenerateLabels);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut net = build_net(kind, ds.n);
    net.init_glorot(&mut rng);
    let mut adam = AdamState::new(0.001, 0.9, &net);

    let features = ds.train_matrix();
    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut step = 0u64;
    for _ in 0..EPOCHS {
        order.shuffle(&mut rng);
        for chunk in order.chunks(BATCH) {
            step += 1;
            let mut x = Tensor2::zeros(chunk.len(), ds.n);
            let mut y = Vec::with_capacity(chunk.len());
            for (b, &idx) in chunk.iter().enumerate() {
                x.row_mut(b).copy_from_slice(features.row(idx));
                y.push(labels[idx]);
            }
            let (out, cache) = net.forward_train(&x, None)?;
            let (loss, upstream) = bce_loss_and_grad(&out, &y);
            if !loss.is_finite() {
                return Err(TargetError::Diverged { step });
            }
            let (mut grads, _) = net.backward(&cache, &upstream)?;
            // L2 weight decay keeps the classifier from overfitting the
            // small train splits.
            for (slice, params) in grads.slices.iter_mut().zip(net.param_slices()) {
                for (g, w) in slice.iter_mut().zip(params) {
                    *g += WEIGHT_DECAY * w;
                }
            }
            adam.step(&mut net, &grads)?;
        }
    }

    let mut model = TargetModel {
        kind,
        net,
        threshold: 0.5,
        meta: TargetMeta {
            dataset: ds.id(),
            seed,
            test_accuracy: 0.0,
            test_auc: 0.0,
        },
    };
    let test_scores = model.score_batch(&ds.test_matrix())?;
    let test_labels: Vec<u8> = ds
        .test
        .iter()
        .enumerate()
        .map(|(i, r)| r.label.ok_or(TargetError::MissingLabel { index: i }))
        .collect::<Result<_, _>>()?;
    model.meta.test_accuracy = metrics::accuracy(&test_scores, &test_labels, model.threshold)
        .map_err(Box::new)?;
    model.meta.test_auc = metrics::auc(&test_scores, &test_labels).map_err(Box::new)?;
    Ok(model)
}

/// Mean binary cross entropy against targets in [0,1], plus d(loss)/d(out).
/// Log arguments clamp at 1e-7 so a perfect match at a hard target stays an
/// exact zero.
pub(crate) fn bce_loss_and_grad(out: &Tensor2, targets: &[f64]) -> (f64, Tensor2) {
    let batch = out.rows() as f64;
    let mut grad = Tensor2::zeros(out.rows(), 1);
    let mut loss = 0.0;
    for b in 0..out.rows() {
        let p = out.row(b)[0];
        let y = targets[b];
        let p_pos = p.max(1e-7);
        let p_neg = (1.0 - p).max(1e-7);
        loss += -y * p_pos.ln() - (1.0 - y) * p_neg.ln();
        grad.row_mut(b)[0] = (-y / p_pos + (1.0 - y) / p_neg) / batch;
    }
    (loss / batch, grad)
}

impl TargetModel {
    pub fn input_width(&self) -> usize {
        match &self.net.layers[0] {
            Layer::Dense(d) => d.w.rows(),
            _ => unreachable!("target networks start with a dense layer"),
        }
    }

    /// Deterministic probability of the positive class.
    pub fn score(&self, x: &[f64]) -> Result<f64, TargetError> {
        let t = Tensor2::from_vec(1, x.len(), x.to_vec());
        Ok(self.net.forward_infer(&t)?.row(0)[0])
    }

    pub fn score_batch(&self, x: &Tensor2) -> Result<Vec<f64>, TargetError> {
        let out = self.net.forward_infer(x)?;
        Ok((0..out.rows()).map(|b| out.row(b)[0]).collect())
    }

    /// Binary cross entropy between `score(x_hat)` and the reference score
    /// of the original record.
    pub fn target_loss(&self, x_hat: &[f64], y_ref: f64) -> Result<f64, TargetError> {
        let t = Tensor2::from_vec(1, x_hat.len(), x_hat.to_vec());
        Ok(self.loss_batch_with_grad(&t, &[y_ref])?.0)
    }

    /// Batch-mean loss plus its gradient w.r.t. `x_hat`. The model's own
    /// parameters are read-only here; only the input gradient escapes.
    pub fn loss_batch_with_grad(
        &self,
        x_hat: &Tensor2,
        y_ref: &[f64],
    ) -> Result<(f64, Tensor2), TargetError> {
        let mut frozen = self.net.clone();
        let (out, cache) = frozen.forward_train(x_hat, None)?;
        let (loss, upstream) = bce_loss_and_grad(&out, y_ref);
        let (_, input_grad) = frozen.backward(&cache, &upstream)?;
        Ok((loss, input_grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, FeatureSpec, Record};

    fn toy_dataset(n: usize, rows: usize, seed: u64) -> Dataset {
        // Linearly separable-ish synthetic data in [0,1].
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        use rand::Rng;
        let make = |rng: &mut ChaCha20Rng, count: usize| {
            (0..count)
                .map(|_| {
                    let label = u8::from(rng.gen_bool(0.5));
                    let features: Vec<f64> = (0..n)
                        .map(|f| {
                            let center = if label == 1 { 0.75 } else { 0.25 };
                            let jitter: f64 = rng.gen_range(-0.2..0.2);
                            (center + jitter * ((f % 3) as f64 + 1.0) / 3.0).clamp(0.0, 1.0)
                        })
                        .collect();
                    Record {
                        features,
                        label: Some(label),
                    }
                })
                .collect::<Vec<_>>()
        };
        let train = make(&mut rng, rows);
        let test = make(&mut rng, rows / 5);
        Dataset {
            schema: "toy".to_string(),
            specs: (0..n)
                .map(|i| FeatureSpec {
                    name: format!("f{i}"),
                    kind: FeatureKind::Numeric,
                    categories: Vec::new(),
                    observed_min: Some(0.0),
                    observed_max: Some(1.0),
                })
                .collect(),
            train,
            test,
            n,
            seed,
            normalized: true,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn learns_a_separable_problem() {
        let ds = toy_dataset(6, 200, 5);
        let model = train_target(&ds, TargetKind::Logistic, 9).unwrap();
        assert!(model.meta.test_accuracy >= 0.9, "{}", model.meta.test_accuracy);
    }

    #[test]
    fn scoring_is_deterministic_and_bounded() {
        let ds = toy_dataset(4, 120, 2);
        let model = train_target(&ds, TargetKind::Mlp, 3).unwrap();
        let x = &ds.test[0].features;
        let a = model.score(x).unwrap();
        let b = model.score(x).unwrap();
        assert_eq!(a, b);
        for r in &ds.test {
            let s = model.score(&r.features).unwrap();
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn zero_weights_score_half() {
        let model = TargetModel {
            kind: TargetKind::Logistic,
            net: build_net(TargetKind::Logistic, 3),
            threshold: 0.5,
            meta: TargetMeta {
                dataset: "zero".to_string(),
                seed: 0,
                test_accuracy: 0.0,
                test_auc: 0.0,
            },
        };
        assert_eq!(model.score(&[0.4, 0.6, 0.1]).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let mut ds = toy_dataset(3, 50, 1);
        for r in &mut ds.train {
            r.label = Some(1);
        }
        assert!(matches!(
            train_target(&ds, TargetKind::Logistic, 0),
            Err(TargetError::DegenerateLabels)
        ));
    }

    #[test]
    fn loss_at_matching_half_score_is_ln2() {
        let model = TargetModel {
            kind: TargetKind::Logistic,
            net: build_net(TargetKind::Logistic, 2),
            threshold: 0.5,
            meta: TargetMeta {
                dataset: "zero".to_string(),
                seed: 0,
                test_accuracy: 0.0,
                test_auc: 0.0,
            },
        };
        // Zero weights score exactly 0.5.
        let loss = model.target_loss(&[0.2, 0.8], 0.5).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn loss_is_zero_at_exactly_reproduced_hard_score() {
        let (loss, _) = {
            let out = Tensor2::from_vec(1, 1, vec![1.0]);
            bce_loss_and_grad(&out, &[1.0])
        };
        assert_eq!(loss, 0.0);
        let (loss0, _) = {
            let out = Tensor2::from_vec(1, 1, vec![0.0]);
            bce_loss_and_grad(&out, &[0.0])
        };
        assert_eq!(loss0, 0.0);
    }

    #[test]
    fn loss_is_minimized_at_the_reference_score() {
        let ds = toy_dataset(5, 150, 8);
        let model = train_target(&ds, TargetKind::Mlp, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        use rand::Rng;
        for r in ds.test.iter().take(5) {
            let x = &r.features;
            let y_ref = model.score(x).unwrap();
            let base = model.target_loss(x, y_ref).unwrap();
            // 1-D line search along random directions never goes below the
            // loss at the original record.
            for _ in 0..10 {
                let dir: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for t in [-0.2, -0.05, 0.05, 0.2] {
                    let probe: Vec<f64> = x
                        .iter()
                        .zip(&dir)
                        .map(|(v, d)| (v + t * d).clamp(0.0, 1.0))
                        .collect();
                    let loss = model.target_loss(&probe, y_ref).unwrap();
                    assert!(loss + 1e-9 >= base);
                }
            }
        }
    }
}
