//! Differential-privacy baseline: per-feature unbounded Laplace noise with
//! configurable sensitivity and privacy parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("privacy parameter delta must be positive and finite, got {got}")]
    BadDelta { got: f64 },
    #[error("sensitivity must be finite and >= 0, got {got} for feature {index}")]
    BadSensitivity { index: usize, got: f64 },
    #[error("record width {got} does not match sensitivity vector length {expected}")]
    Width { expected: usize, got: usize },
}

/// Laplace-mechanism parameters: noise scale for feature `i` is
/// `sensitivity[i] / delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub delta: f64,
    pub sensitivity: Vec<f64>,
    pub seed: u64,
}

impl DpConfig {
    pub fn new(delta: f64, sensitivity: Vec<f64>, seed: u64) -> Result<Self, DpError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(DpError::BadDelta { got: delta });
        }
        for (index, s) in sensitivity.iter().enumerate() {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(DpError::BadSensitivity { index, got: *s });
            }
        }
        Ok(Self {
            delta,
            sensitivity,
            seed,
        })
    }
}

/// Per-feature sensitivity as the observed train-split range: 1 for a
/// non-constant min-max-normalized feature, 0 for a constant one.
pub fn estimate_sensitivity(ds: &Dataset) -> Vec<f64> {
    (0..ds.n)
        .map(|f| {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for r in &ds.train {
                let v = r.features[f];
                if v.is_nan() {
                    continue;
                }
                min = min.min(v);
                max = max.max(v);
            }
            if min.is_finite() && max > min {
                max - min
            } else {
                0.0
            }
        })
        .collect()
}

/// One Laplace(0, b) draw by inverse CDF on a uniform; b = 0 yields exactly
/// 0 without consuming randomness.
pub fn laplace_noise(b: f64, rng: &mut impl Rng) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.gen::<f64>() - 0.5;
    let arg = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -b * u.signum() * arg.ln()
}

/// Stateful mechanism: consecutive records get fresh noise from a seeded
/// stream.
#[derive(Clone, Debug)]
pub struct DpMechanism {
    cfg: DpConfig,
    rng: ChaCha20Rng,
}

impl DpMechanism {
    pub fn new(cfg: DpConfig) -> Self {
        let rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        Self { cfg, rng }
    }

    /// `x_hat_i = x_i + Laplace(0, S_i / delta)`, unclamped.
    pub fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, DpError> {
        if x.len() != self.cfg.sensitivity.len() {
            return Err(DpError::Width {
                expected: self.cfg.sensitivity.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.cfg.sensitivity)
            .map(|(v, s)| v + laplace_noise(s / self.cfg.delta, &mut self.rng))
            .collect())
    }
}

/// One-shot anonymization with a fresh stream from the config seed.
pub fn dp_anonymize(x: &[f64], cfg: &DpConfig) -> Result<Vec<f64>, DpError> {
    DpMechanism::new(cfg.clone()).anonymize(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scale_is_exactly_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(laplace_noise(0.0, &mut rng), 0.0);
    }

    #[test]
    fn moments_match_laplace() {
        let mut rng = ChaCha20Rng::seed_from_u64(12345);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let v = laplace_noise(1.0, &mut rng);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 2.0).abs() < 0.04, "variance {var}");
    }

    #[test]
    fn fixed_seed_reproduces_the_sequence() {
        let draw = || {
            let mut rng = ChaCha20Rng::seed_from_u64(9);
            (0..16).map(|_| laplace_noise(0.7, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn huge_delta_leaves_records_nearly_unchanged() {
        let cfg = DpConfig::new(1e9, vec![1.0; 4], 3).unwrap();
        let x = vec![0.1, 0.4, 0.6, 0.9];
        let x_hat = dp_anonymize(&x, &cfg).unwrap();
        for (a, b) in x.iter().zip(&x_hat) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn smaller_delta_perturbs_more() {
        let x = vec![0.5; 30];
        let mean_abs = |delta: f64| {
            let cfg = DpConfig::new(delta, vec![1.0; 30], 11).unwrap();
            let mut mech = DpMechanism::new(cfg);
            let mut total = 0.0;
            for _ in 0..2000 {
                let x_hat = mech.anonymize(&x).unwrap();
                total += x
                    .iter()
                    .zip(&x_hat)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
            }
            total / (2000.0 * 30.0)
        };
        assert!(mean_abs(0.1) > mean_abs(1.0));
    }

    #[test]
    fn constant_feature_passes_through_unperturbed() {
        let cfg = DpConfig::new(0.5, vec![0.0, 1.0], 7).unwrap();
        let x = vec![0.25, 0.25];
        let x_hat = dp_anonymize(&x, &cfg).unwrap();
        assert_eq!(x_hat[0], 0.25);
        assert_ne!(x_hat[1], 0.25);
    }

    #[test]
    fn width_and_delta_are_validated() {
        assert!(DpConfig::new(0.0, vec![1.0], 0).is_err());
        assert!(DpConfig::new(-1.0, vec![1.0], 0).is_err());
        let cfg = DpConfig::new(1.0, vec![1.0, 1.0], 0).unwrap();
        assert!(dp_anonymize(&[0.5], &cfg).is_err());
    }
}
