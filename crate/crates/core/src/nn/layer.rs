use serde::{Deserialize, Serialize};

use super::{NnError, Tensor2};

/// Pointwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }

    /// Derivative expressed through the activation's own output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Fully connected layer: `out = x · w + b`, weights stored input-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Tensor2,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn new(input: usize, output: usize) -> Self {
        Self {
            w: Tensor2::zeros(input, output),
            b: vec![0.0; output],
        }
    }
}

/// Stride-1, zero same-padded 1-D convolution over a channel-major row
/// layout: a row of width `in_channels * len` holds channel 0's positions,
/// then channel 1's, and so on. Output width is `out_channels * len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// Flat `[out_channels][in_channels][kernel]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        assert!(kernel >= 1, "filter length must be >= 1");
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * in_channels * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    fn pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

/// Per-channel batch normalization with running statistics for inference.
/// `momentum` is the fraction of the old running statistic kept per update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.9,
            eps: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    BatchNorm(BatchNorm),
    Activation(Activation),
}

/// Intermediates kept by `forward` for the matching `backward`.
#[derive(Clone, Debug)]
pub enum LayerCache {
    Dense {
        input: Tensor2,
    },
    Conv1d {
        input: Tensor2,
        len: usize,
    },
    BatchNorm {
        normalized: Tensor2,
        inv_std: Vec<f64>,
        len: usize,
        train: bool,
    },
    Activation {
        output: Tensor2,
    },
}

/// Batch statistics the training loop folds into running mean/variance.
#[derive(Clone, Debug)]
pub struct BnUpdate {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv1d(_) => "conv1d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Activation(Activation::Tanh) => "tanh",
            Layer::Activation(Activation::Relu) => "relu",
            Layer::Activation(Activation::Sigmoid) => "sigmoid",
        }
    }

    /// Output width for a given input width, or the width error the input
    /// would trigger.
    pub fn out_width(&self, in_width: usize, site: &str) -> Result<usize, NnError> {
        match self {
            Layer::Dense(d) => {
                if in_width != d.w.rows() {
                    Err(NnError::WidthMismatch {
                        layer: site.to_string(),
                        expected: d.w.rows(),
                        got: in_width,
                    })
                } else {
                    Ok(d.w.cols())
                }
            }
            Layer::Conv1d(c) => {
                if in_width == 0 || in_width % c.in_channels != 0 {
                    Err(NnError::ChannelMismatch {
                        layer: site.to_string(),
                        width: in_width,
                        channels: c.in_channels,
                    })
                } else {
                    Ok(c.out_channels * (in_width / c.in_channels))
                }
            }
            Layer::BatchNorm(bn) => {
                if in_width == 0 || in_width % bn.channels != 0 {
                    Err(NnError::ChannelMismatch {
                        layer: site.to_string(),
                        width: in_width,
                        channels: bn.channels,
                    })
                } else {
                    Ok(in_width)
                }
            }
            Layer::Activation(_) => Ok(in_width),
        }
    }

    /// Channel count of the layer's output given the input channel count.
    pub fn out_channels(&self, in_channels: usize) -> usize {
        match self {
            Layer::Dense(d) => d.w.cols(),
            Layer::Conv1d(c) => c.out_channels,
            Layer::BatchNorm(bn) => bn.channels,
            Layer::Activation(_) => in_channels,
        }
    }

    /// Parameter slices in a fixed order (weights then bias, gamma then
    /// beta); activations have none.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(d) => vec![d.w.data(), &d.b],
            Layer::Conv1d(c) => vec![&c.weight, &c.bias],
            Layer::BatchNorm(bn) => vec![&bn.gamma, &bn.beta],
            Layer::Activation(_) => Vec::new(),
        }
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(d) => vec![d.w.data_mut(), &mut d.b],
            Layer::Conv1d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::BatchNorm(bn) => vec![&mut bn.gamma, &mut bn.beta],
            Layer::Activation(_) => Vec::new(),
        }
    }

    pub fn forward(
        &self,
        x: &Tensor2,
        train: bool,
        site: &str,
    ) -> Result<(Tensor2, LayerCache, Option<BnUpdate>), NnError> {
        self.out_width(x.cols(), site)?;
        match self {
            Layer::Dense(d) => {
                let (rows, input, output) = (x.rows(), d.w.rows(), d.w.cols());
                let mut out = Tensor2::zeros(rows, output);
                for b in 0..rows {
                    let xr = x.row(b);
                    let or = out.row_mut(b);
                    or.copy_from_slice(&d.b);
                    for i in 0..input {
                        let xv = xr[i];
                        if xv != 0.0 {
                            let wr = d.w.row(i);
                            for (o, w) in or.iter_mut().zip(wr) {
                                *o += xv * w;
                            }
                        }
                    }
                }
                Ok((out, LayerCache::Dense { input: x.clone() }, None))
            }
            Layer::Conv1d(c) => {
                let len = x.cols() / c.in_channels;
                let pad = c.pad_left() as isize;
                let mut out = Tensor2::zeros(x.rows(), c.out_channels * len);
                for b in 0..x.rows() {
                    let xr = x.row(b);
                    let or = out.row_mut(b);
                    for oc in 0..c.out_channels {
                        let oslice = &mut or[oc * len..(oc + 1) * len];
                        oslice.fill(c.bias[oc]);
                        for ic in 0..c.in_channels {
                            let islice = &xr[ic * len..(ic + 1) * len];
                            for j in 0..c.kernel {
                                let w = c.weight[(oc * c.in_channels + ic) * c.kernel + j];
                                if w == 0.0 {
                                    continue;
                                }
                                let shift = j as isize - pad;
                                let p0 = (-shift).max(0) as usize;
                                let p1 = (len as isize - shift).clamp(0, len as isize) as usize;
                                for p in p0..p1 {
                                    oslice[p] += w * islice[(p as isize + shift) as usize];
                                }
                            }
                        }
                    }
                }
                Ok((
                    out,
                    LayerCache::Conv1d {
                        input: x.clone(),
                        len,
                    },
                    None,
                ))
            }
            Layer::BatchNorm(bn) => {
                let len = x.cols() / bn.channels;
                if train {
                    if x.rows() < 2 {
                        return Err(NnError::SmallBatch { got: x.rows() });
                    }
                    let (mean, var) = batch_channel_stats(x, bn.channels, len);
                    let inv_std: Vec<f64> =
                        var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
                    let mut normalized = Tensor2::zeros(x.rows(), x.cols());
                    let mut out = Tensor2::zeros(x.rows(), x.cols());
                    for b in 0..x.rows() {
                        let xr = x.row(b);
                        for ch in 0..bn.channels {
                            let (m, s) = (mean[ch], inv_std[ch]);
                            let (g, bt) = (bn.gamma[ch], bn.beta[ch]);
                            for p in 0..len {
                                let idx = ch * len + p;
                                let nv = (xr[idx] - m) * s;
                                normalized.row_mut(b)[idx] = nv;
                                out.row_mut(b)[idx] = g * nv + bt;
                            }
                        }
                    }
                    Ok((
                        out,
                        LayerCache::BatchNorm {
                            normalized,
                            inv_std,
                            len,
                            train: true,
                        },
                        Some(BnUpdate { mean, var }),
                    ))
                } else {
                    let inv_std: Vec<f64> = bn
                        .running_var
                        .iter()
                        .map(|v| 1.0 / (v + bn.eps).sqrt())
                        .collect();
                    let mut normalized = Tensor2::zeros(x.rows(), x.cols());
                    let mut out = Tensor2::zeros(x.rows(), x.cols());
                    for b in 0..x.rows() {
                        let xr = x.row(b);
                        for ch in 0..bn.channels {
                            let (m, s) = (bn.running_mean[ch], inv_std[ch]);
                            let (g, bt) = (bn.gamma[ch], bn.beta[ch]);
                            for p in 0..len {
                                let idx = ch * len + p;
                                let nv = (xr[idx] - m) * s;
                                normalized.row_mut(b)[idx] = nv;
                                out.row_mut(b)[idx] = g * nv + bt;
                            }
                        }
                    }
                    Ok((
                        out,
                        LayerCache::BatchNorm {
                            normalized,
                            inv_std,
                            len,
                            train: false,
                        },
                        None,
                    ))
                }
            }
            Layer::Activation(a) => {
                let mut out = x.clone();
                for v in out.data_mut() {
                    *v = a.apply(*v);
                }
                Ok((
                    out.clone(),
                    LayerCache::Activation { output: out },
                    None,
                ))
            }
        }
    }

    /// Gradients w.r.t. parameters (same order as `param_slices`) and input.
    pub fn backward(
        &self,
        cache: &LayerCache,
        dout: &Tensor2,
        site: &str,
    ) -> Result<(Vec<Vec<f64>>, Tensor2), NnError> {
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Dense { input }) => {
                let (rows, inw, outw) = (input.rows(), d.w.rows(), d.w.cols());
                if dout.rows() != rows || dout.cols() != outw {
                    return Err(NnError::ShapeMismatch {
                        layer: site.to_string(),
                    });
                }
                let mut dw = vec![0.0; inw * outw];
                let mut db = vec![0.0; outw];
                let mut din = Tensor2::zeros(rows, inw);
                for b in 0..rows {
                    let xr = input.row(b);
                    let gr = dout.row(b);
                    for (dbv, g) in db.iter_mut().zip(gr) {
                        *dbv += g;
                    }
                    let dr = din.row_mut(b);
                    for i in 0..inw {
                        let wr = d.w.row(i);
                        let dwr = &mut dw[i * outw..(i + 1) * outw];
                        let xv = xr[i];
                        let mut acc = 0.0;
                        for o in 0..outw {
                            dwr[o] += xv * gr[o];
                            acc += wr[o] * gr[o];
                        }
                        dr[i] = acc;
                    }
                }
                Ok((vec![dw, db], din))
            }
            (Layer::Conv1d(c), LayerCache::Conv1d { input, len }) => {
                let len = *len;
                if dout.rows() != input.rows() || dout.cols() != c.out_channels * len {
                    return Err(NnError::ShapeMismatch {
                        layer: site.to_string(),
                    });
                }
                let pad = c.pad_left() as isize;
                let mut dw = vec![0.0; c.weight.len()];
                let mut db = vec![0.0; c.out_channels];
                let mut din = Tensor2::zeros(input.rows(), input.cols());
                for b in 0..input.rows() {
                    let xr = input.row(b);
                    let gr = dout.row(b);
                    let dr = din.row_mut(b);
                    for oc in 0..c.out_channels {
                        let gslice = &gr[oc * len..(oc + 1) * len];
                        db[oc] += gslice.iter().sum::<f64>();
                        for ic in 0..c.in_channels {
                            let islice = &xr[ic * len..(ic + 1) * len];
                            let dslice = &mut dr[ic * len..(ic + 1) * len];
                            for j in 0..c.kernel {
                                let widx = (oc * c.in_channels + ic) * c.kernel + j;
                                let w = c.weight[widx];
                                let shift = j as isize - pad;
                                let p0 = (-shift).max(0) as usize;
                                let p1 = (len as isize - shift).clamp(0, len as isize) as usize;
                                let mut wacc = 0.0;
                                for p in p0..p1 {
                                    let q = (p as isize + shift) as usize;
                                    wacc += gslice[p] * islice[q];
                                    dslice[q] += w * gslice[p];
                                }
                                dw[widx] += wacc;
                            }
                        }
                    }
                }
                Ok((vec![dw, db], din))
            }
            (
                Layer::BatchNorm(bn),
                LayerCache::BatchNorm {
                    normalized,
                    inv_std,
                    len,
                    train,
                },
            ) => {
                let len = *len;
                if dout.rows() != normalized.rows() || dout.cols() != normalized.cols() {
                    return Err(NnError::ShapeMismatch {
                        layer: site.to_string(),
                    });
                }
                let rows = normalized.rows();
                let m = (rows * len) as f64;
                let mut dgamma = vec![0.0; bn.channels];
                let mut dbeta = vec![0.0; bn.channels];
                let mut din = Tensor2::zeros(rows, normalized.cols());
                for ch in 0..bn.channels {
                    let mut sum_dy = 0.0;
                    let mut sum_dy_xhat = 0.0;
                    for b in 0..rows {
                        let gr = dout.row(b);
                        let nr = normalized.row(b);
                        for p in 0..len {
                            let idx = ch * len + p;
                            sum_dy += gr[idx];
                            sum_dy_xhat += gr[idx] * nr[idx];
                        }
                    }
                    dgamma[ch] = sum_dy_xhat;
                    dbeta[ch] = sum_dy;
                    let g = bn.gamma[ch];
                    let s = inv_std[ch];
                    for b in 0..rows {
                        let gr = dout.row(b);
                        let nr = normalized.row(b);
                        let dr = din.row_mut(b);
                        for p in 0..len {
                            let idx = ch * len + p;
                            dr[idx] = if *train {
                                g * s / m * (m * gr[idx] - sum_dy - nr[idx] * sum_dy_xhat)
                            } else {
                                g * s * gr[idx]
                            };
                        }
                    }
                }
                Ok((vec![dgamma, dbeta], din))
            }
            (Layer::Activation(a), LayerCache::Activation { output }) => {
                if dout.rows() != output.rows() || dout.cols() != output.cols() {
                    return Err(NnError::ShapeMismatch {
                        layer: site.to_string(),
                    });
                }
                let mut din = dout.clone();
                for (d, y) in din.data_mut().iter_mut().zip(output.data()) {
                    *d *= a.derivative_from_output(*y);
                }
                Ok((Vec::new(), din))
            }
            _ => Err(NnError::ShapeMismatch {
                layer: site.to_string(),
            }),
        }
    }
}

/// Per-channel mean and population variance over batch and positions.
pub(crate) fn batch_channel_stats(
    x: &Tensor2,
    channels: usize,
    len: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = (x.rows() * len) as f64;
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for b in 0..x.rows() {
        let xr = x.row(b);
        for ch in 0..channels {
            for p in 0..len {
                mean[ch] += xr[ch * len + p];
            }
        }
    }
    for mv in &mut mean {
        *mv /= m;
    }
    for b in 0..x.rows() {
        let xr = x.row(b);
        for ch in 0..channels {
            for p in 0..len {
                let d = xr[ch * len + p] - mean[ch];
                var[ch] += d * d;
            }
        }
    }
    for vv in &mut var {
        *vv /= m;
    }
    (mean, var)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_of_zero_is_half() {
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    }

    #[test]
    fn relu_clamps_negatives() {
        let got: Vec<f64> = [-3.0, 0.0, 2.0]
            .iter()
            .map(|v| Activation::Relu.apply(*v))
            .collect();
        assert_eq!(got, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn tanh_backward_at_zero_is_identity() {
        let layer = Layer::Activation(Activation::Tanh);
        let x = Tensor2::from_vec(1, 1, vec![0.0]);
        let (_, cache, _) = layer.forward(&x, false, "t").unwrap();
        let up = Tensor2::from_vec(1, 1, vec![1.0]);
        let (_, din) = layer.backward(&cache, &up, "t").unwrap();
        assert_eq!(din.data(), &[1.0]);
    }

    #[test]
    fn identity_kernel_conv_is_identity() {
        let mut c = Conv1d::new(1, 1, 1);
        c.weight[0] = 1.0;
        let layer = Layer::Conv1d(c);
        let x = Tensor2::from_vec(1, 5, vec![0.5, -1.0, 2.0, 0.0, 3.5]);
        let (out, _, _) = layer.forward(&x, false, "c").unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn dense_zero_upstream_gives_zero_grads() {
        let mut d = Dense::new(3, 2);
        d.w.data_mut().copy_from_slice(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let layer = Layer::Dense(d);
        let x = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (_, cache, _) = layer.forward(&x, false, "d").unwrap();
        let up = Tensor2::zeros(2, 2);
        let (grads, din) = layer.backward(&cache, &up, "d").unwrap();
        assert!(grads[0].iter().all(|g| *g == 0.0));
        assert!(grads[1].iter().all(|g| *g == 0.0));
        assert!(din.data().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn batchnorm_train_mode_matches_definition() {
        let bn = BatchNorm::new(2);
        let layer = Layer::BatchNorm(bn);
        let x = Tensor2::from_vec(4, 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]);
        let (out, _, update) = layer.forward(&x, true, "bn").unwrap();
        let update = update.unwrap();
        assert!((update.mean[0] - 2.5).abs() < 1e-12);
        assert!((update.mean[1] - 25.0).abs() < 1e-12);
        // Per-channel output mean ~ beta (0) and std ~ |gamma| (1).
        for ch in 0..2 {
            let vals: Vec<f64> = (0..4).map(|b| out.row(b)[ch]).collect();
            let mean = vals.iter().sum::<f64>() / 4.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-6);
            assert!((var.sqrt() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn batchnorm_rejects_batch_of_one_in_train_mode() {
        let layer = Layer::BatchNorm(BatchNorm::new(1));
        let x = Tensor2::from_vec(1, 1, vec![1.0]);
        assert!(matches!(
            layer.forward(&x, true, "bn"),
            Err(NnError::SmallBatch { got: 1 })
        ));
    }

    #[test]
    fn batchnorm_identity_on_standardized_batch() {
        let layer = Layer::BatchNorm(BatchNorm::new(1));
        // Mean 0, population variance 1.
        let x = Tensor2::from_vec(2, 1, vec![1.0, -1.0]);
        let (out, _, _) = layer.forward(&x, true, "bn").unwrap();
        assert!((out.row(0)[0] - 1.0).abs() < 1e-5);
        assert!((out.row(1)[0] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn batchnorm_infer_is_deterministic() {
        let layer = Layer::BatchNorm(BatchNorm::new(2));
        let x = Tensor2::from_vec(1, 2, vec![0.3, -0.7]);
        let (a, _, _) = layer.forward(&x, false, "bn").unwrap();
        let (b, _, _) = layer.forward(&x, false, "bn").unwrap();
        assert_eq!(a.data(), b.data());
    }
}
