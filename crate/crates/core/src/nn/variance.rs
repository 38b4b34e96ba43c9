use serde::{Deserialize, Serialize};

/// Running per-channel statistics of the activation variances seen during
/// training, one entry per activation layer.
///
/// Each recorded sample is a batch's per-channel activation variance; the
/// store keeps a Welford aggregate of those samples. `stored_variance`
/// (the mean of the recorded batch variances) parameterizes the Gaussian
/// noise injected at inference.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VarianceStore {
    layers: Vec<LayerVariance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LayerVariance {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarianceStore {
    /// Welford-update layer `layer` with one batch's per-channel variances.
    pub fn record(&mut self, layer: usize, batch_var: &[f64]) {
        while self.layers.len() <= layer {
            self.layers.push(LayerVariance {
                count: 0,
                mean: Vec::new(),
                m2: Vec::new(),
            });
        }
        let entry = &mut self.layers[layer];
        if entry.count == 0 {
            entry.mean = vec![0.0; batch_var.len()];
            entry.m2 = vec![0.0; batch_var.len()];
        }
        assert_eq!(entry.mean.len(), batch_var.len(), "channel count changed");
        entry.count += 1;
        let n = entry.count as f64;
        for (ch, &sample) in batch_var.iter().enumerate() {
            let delta = sample - entry.mean[ch];
            entry.mean[ch] += delta / n;
            entry.m2[ch] += delta * (sample - entry.mean[ch]);
        }
    }

    /// Number of layers with recorded statistics.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty() || self.layers.iter().all(|l| l.count == 0)
    }

    /// Recorded training steps for a layer.
    pub fn count(&self, layer: usize) -> u64 {
        self.layers.get(layer).map_or(0, |l| l.count)
    }

    /// Mean of the recorded batch variances per channel: the variance used
    /// for inference-time injection.
    pub fn stored_variance(&self, layer: usize) -> Option<&[f64]> {
        self.layers
            .get(layer)
            .filter(|l| l.count > 0)
            .map(|l| l.mean.as_slice())
    }

    /// Population variance of the recorded batch-variance sequence per
    /// channel.
    pub fn sample_spread(&self, layer: usize) -> Option<Vec<f64>> {
        self.layers.get(layer).filter(|l| l.count > 0).map(|l| {
            l.m2.iter().map(|m2| m2 / l.count as f64).collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass_variance() {
        // Synthetic sequence of "batch variances" for one channel.
        let samples: Vec<f64> = (0..200)
            .map(|k| 0.5 + 0.3 * ((k as f64) * 0.71).sin().powi(2))
            .collect();
        let mut store = VarianceStore::default();
        for s in &samples {
            store.record(0, &[*s]);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
            / samples.len() as f64;
        assert!((store.stored_variance(0).unwrap()[0] - mean).abs() < 1e-9);
        assert!((store.sample_spread(0).unwrap()[0] - var).abs() < 1e-9);
        assert_eq!(store.count(0), 200);
    }

    #[test]
    fn variances_are_nonnegative() {
        let mut store = VarianceStore::default();
        store.record(0, &[0.0, 1.0]);
        store.record(0, &[2.0, 3.0]);
        for v in store.stored_variance(0).unwrap() {
            assert!(*v >= 0.0);
        }
        for v in store.sample_spread(0).unwrap() {
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn empty_store_reports_empty() {
        let store = VarianceStore::default();
        assert!(store.is_empty());
        assert!(store.stored_variance(0).is_none());
    }
}
