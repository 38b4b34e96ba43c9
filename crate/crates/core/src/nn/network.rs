use serde::{Deserialize, Serialize};

use super::layer::{batch_channel_stats, BnUpdate, LayerCache};
use super::{Layer, NnError, Tensor2, VarianceStore};

/// An ordered stack of layers trained and evaluated as one unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Everything `backward` needs from the matching forward pass.
pub struct ForwardCache {
    caches: Vec<LayerCache>,
    pub output: Tensor2,
}

/// Parameter gradients in the network's `param_slices` order.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub slices: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn add(&mut self, other: &Gradients) {
        assert_eq!(self.slices.len(), other.slices.len());
        for (a, b) in self.slices.iter_mut().zip(&other.slices) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for slice in &mut self.slices {
            for v in slice.iter_mut() {
                *v *= s;
            }
        }
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    fn site(&self, idx: usize) -> String {
        format!("layer {} ({})", idx, self.layers[idx].kind_name())
    }

    /// All parameter slices, layer by layer.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::param_slices).collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(Layer::param_slices_mut)
            .collect()
    }

    /// Number of `Activation` layers; these are the recording/injection
    /// points, indexed from 0 in forward order.
    pub fn activation_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::Activation(_)))
            .count()
    }

    /// Training-mode forward pass. Updates batch-norm running statistics,
    /// optionally records per-channel activation variances into `store`,
    /// and returns the cache for `backward`.
    pub fn forward_train(
        &mut self,
        x: &Tensor2,
        mut store: Option<&mut VarianceStore>,
    ) -> Result<(Tensor2, ForwardCache), NnError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        let mut channels = 1usize;
        let mut act_idx = 0usize;
        for idx in 0..self.layers.len() {
            let site = self.site(idx);
            let (out, cache, update) = self.layers[idx].forward(&cur, true, &site)?;
            out.check_finite(&site)?;
            if let (Layer::BatchNorm(bn), Some(BnUpdate { mean, var })) =
                (&mut self.layers[idx], update)
            {
                for ch in 0..bn.channels {
                    bn.running_mean[ch] =
                        bn.momentum * bn.running_mean[ch] + (1.0 - bn.momentum) * mean[ch];
                    bn.running_var[ch] =
                        bn.momentum * bn.running_var[ch] + (1.0 - bn.momentum) * var[ch];
                }
            }
            channels = self.layers[idx].out_channels(channels);
            if matches!(self.layers[idx], Layer::Activation(_)) {
                if let Some(store) = store.as_deref_mut() {
                    let len = out.cols() / channels;
                    let (_, var) = batch_channel_stats(&out, channels, len);
                    store.record(act_idx, &var);
                }
                act_idx += 1;
            }
            caches.push(cache);
            cur = out;
        }
        Ok((
            cur.clone(),
            ForwardCache {
                caches,
                output: cur,
            },
        ))
    }

    /// Inference-mode forward pass: pure in the parameters.
    pub fn forward_infer(&self, x: &Tensor2) -> Result<Tensor2, NnError> {
        self.forward_infer_hooked(x, |_, _, _| Ok(()))
    }

    /// Inference with a post-activation hook. The hook receives the
    /// activation index, the channel count at that point, and the mutable
    /// activations; it is how inference-time noise injection is applied.
    pub fn forward_infer_hooked(
        &self,
        x: &Tensor2,
        mut hook: impl FnMut(usize, usize, &mut Tensor2) -> Result<(), NnError>,
    ) -> Result<Tensor2, NnError> {
        let mut cur = x.clone();
        let mut channels = 1usize;
        let mut act_idx = 0usize;
        for idx in 0..self.layers.len() {
            let site = self.site(idx);
            let (mut out, _, _) = self.layers[idx].forward(&cur, false, &site)?;
            out.check_finite(&site)?;
            channels = self.layers[idx].out_channels(channels);
            if matches!(self.layers[idx], Layer::Activation(_)) {
                hook(act_idx, channels, &mut out)?;
                act_idx += 1;
            }
            cur = out;
        }
        Ok(cur)
    }

    /// Reverse-mode pass. Returns parameter gradients (aligned with
    /// `param_slices`) and the gradient w.r.t. the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Tensor2,
    ) -> Result<(Gradients, Tensor2), NnError> {
        if cache.caches.len() != self.layers.len() {
            return Err(NnError::ShapeMismatch {
                layer: "network".to_string(),
            });
        }
        let mut grad = upstream.clone();
        let mut per_layer: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        for idx in (0..self.layers.len()).rev() {
            let site = self.site(idx);
            let (param_grads, din) = self.layers[idx].backward(&cache.caches[idx], &grad, &site)?;
            per_layer.push(param_grads);
            grad = din;
        }
        per_layer.reverse();
        Ok((
            Gradients {
                slices: per_layer.into_iter().flatten().collect(),
            },
            grad,
        ))
    }

    /// Glorot-uniform initialization of dense and convolution weights.
    pub fn init_glorot(&mut self, rng: &mut impl rand::Rng) {
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    let bound = (6.0 / (d.w.rows() + d.w.cols()) as f64).sqrt();
                    for w in d.w.data_mut() {
                        *w = rng.gen_range(-bound..bound);
                    }
                    for b in &mut d.b {
                        *b = 0.0;
                    }
                }
                Layer::Conv1d(c) => {
                    let fan_in = c.in_channels * c.kernel;
                    let fan_out = c.out_channels * c.kernel;
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for w in &mut c.weight {
                        *w = rng.gen_range(-bound..bound);
                    }
                    for b in &mut c.bias {
                        *b = 0.0;
                    }
                }
                Layer::BatchNorm(_) | Layer::Activation(_) => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small_net() -> Network {
        let mut net = Network::new(vec![
            Layer::Dense(Dense::new(3, 4)),
            Layer::Activation(Activation::Tanh),
            Layer::Dense(Dense::new(4, 2)),
            Layer::Activation(Activation::Sigmoid),
        ]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        net.init_glorot(&mut rng);
        net
    }

    #[test]
    fn infer_is_pure_and_deterministic() {
        let net = small_net();
        let x = Tensor2::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.1, 0.0, 0.9]);
        let a = net.forward_infer(&x).unwrap();
        let b = net.forward_infer(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn width_mismatch_is_reported_with_layer() {
        let net = small_net();
        let x = Tensor2::from_vec(1, 5, vec![0.0; 5]);
        let err = net.forward_infer(&x).unwrap_err();
        assert!(err.to_string().contains("layer 0 (dense)"));
    }

    #[test]
    fn variance_store_gets_one_entry_per_activation() {
        let mut net = small_net();
        let mut store = VarianceStore::default();
        let x = Tensor2::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.1, 0.0, 0.9]);
        net.forward_train(&x, Some(&mut store)).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.count(0), 1);
    }
}
