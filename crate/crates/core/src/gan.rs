//! The adversarial anonymizer: mask fusion, encoder and discriminator
//! networks, composite losses, the alternating training loop with per-layer
//! activation-variance recording, and stochastic variance-injected
//! inference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::mask::{mask_combine, MaskError, MaskMode, MaskStream};
use crate::nn::{
    Activation, AdamState, BatchNorm, Conv1d, Dense, Gradients, Layer, Network, NnError,
    Tensor2, VarianceStore,
};
use crate::target::{TargetError, TargetModel};

/// Number of injectable encoder blocks (the tanh convolution stack).
pub const INJECTABLE_SITES: usize = 7;

/// The delta at which injected noise uses the stored standard deviation
/// unscaled; other deltas scale the noise proportionally.
pub const REFERENCE_DELTA: f64 = 0.3;

const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum GanError {
    #[error("invalid privacy config: {0}")]
    Config(String),
    #[error("width mismatch: expected {expected}, got {got}")]
    Width { expected: usize, got: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("numeric failure at step {step}: {source}")]
    Numeric { step: u64, source: NnError },
    #[error("variance store is empty: train with variance recording before injecting")]
    EmptyVarianceStore,
    #[error("injection site {site} out of range 1..={max}")]
    BadInjectionSite { site: usize, max: usize },
    #[error("target model changed during training")]
    TargetMutated,
    #[error("dataset must be normalized before training")]
    NotNormalized,
    #[error("dataset has no training records")]
    EmptyDataset,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// How the record and its mask are fed to the encoder: concatenated as a
/// width-2n input, or pre-combined into a width-n input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Concat,
    Premask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionPolicy {
    Off,
    RandomLayer,
    /// 1-based encoder block index.
    Layer(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    /// Weight on the reconstruction distance; higher keeps records closer
    /// to the original.
    pub lambda_e: f64,
    /// Weight on the adversarial and score-preservation terms.
    pub lambda_d: f64,
    /// Confidence knob: scales the inference-time injected noise and enters
    /// the encoder loss as an additive term.
    pub delta: f64,
    pub mask_mode: MaskMode,
    pub fusion: FusionMode,
    pub injection: InjectionPolicy,
    pub seed: u64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            lambda_e: 0.5,
            lambda_d: 0.5,
            delta: REFERENCE_DELTA,
            mask_mode: MaskMode::UniformAdditive,
            fusion: FusionMode::Concat,
            injection: InjectionPolicy::RandomLayer,
            seed: 0,
        }
    }
}

impl PrivacyConfig {
    pub fn validate(&self) -> Result<(), GanError> {
        if !(self.lambda_e >= 0.0 && self.lambda_d >= 0.0) {
            return Err(GanError::Config("lambda weights must be >= 0".to_string()));
        }
        if self.lambda_e + self.lambda_d <= 0.0 {
            return Err(GanError::Config(
                "lambda_e + lambda_d must be positive".to_string(),
            ));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(GanError::Config("delta must be finite and >= 0".to_string()));
        }
        if let InjectionPolicy::Layer(site) = self.injection {
            if site == 0 || site > INJECTABLE_SITES {
                return Err(GanError::BadInjectionSite {
                    site,
                    max: INJECTABLE_SITES,
                });
            }
        }
        Ok(())
    }
}

/// Per-step loss components. `loss_d1` is the encoder-side adversarial term
/// (label "real" on the synthetic record); `disc_loss` is the
/// discriminator's own loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: u64,
    pub loss_encoder: f64,
    pub loss_d1: f64,
    pub loss_d2: f64,
    pub distance: f64,
    pub disc_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomiModel {
    pub encoder: Network,
    pub discriminator: Network,
    pub variance_store: VarianceStore,
    pub config: PrivacyConfig,
    pub n: usize,
    #[serde(skip)]
    pub training_log: Vec<TrainLogEntry>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainOptions {
    pub steps: u64,
    pub batch: usize,
    pub learning_rate: f64,
    pub beta1: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 50_000,
            batch: 10,
            learning_rate: 0.001,
            beta1: 0.5,
        }
    }
}

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

/// Convolutional encoder: a 64/32/16/8 filter stack mirrored back up to 64,
/// batch-normalized tanh blocks throughout, then a dense projection to the
/// record width with a final ReLU.
pub fn build_encoder(n: usize, fusion: FusionMode) -> Network {
    let len = match fusion {
        FusionMode::Concat => 2 * n,
        FusionMode::Premask => n,
    };
    let blocks: [(usize, usize, usize); 7] = [
        (1, 64, 4),
        (64, 32, 2),
        (32, 16, 2),
        (16, 8, 2),
        (8, 16, 2),
        (16, 32, 2),
        (32, 64, 4),
    ];
    let mut layers = Vec::new();
    for (in_ch, out_ch, k) in blocks {
        layers.push(Layer::Conv1d(Conv1d::new(in_ch, out_ch, k)));
        layers.push(Layer::BatchNorm(BatchNorm::new(out_ch)));
        layers.push(Layer::Activation(Activation::Tanh));
    }
    layers.push(Layer::Dense(Dense::new(64 * len, n)));
    layers.push(Layer::Activation(Activation::Relu));
    Network::new(layers)
}

/// Dense discriminator scoring real-vs-synthetic through a sigmoid.
pub fn build_discriminator(n: usize) -> Network {
    Network::new(vec![
        Layer::Dense(Dense::new(n, 32)),
        Layer::Activation(Activation::Tanh),
        Layer::Dense(Dense::new(32, 16)),
        Layer::Activation(Activation::Tanh),
        Layer::Dense(Dense::new(16, 1)),
        Layer::Activation(Activation::Sigmoid),
    ])
}

/// Build the encoder input row for one record and mask.
pub fn encoder_input(
    fusion: FusionMode,
    mask_mode: MaskMode,
    x: &[f64],
    r: &[f64],
) -> Result<Vec<f64>, MaskError> {
    match fusion {
        FusionMode::Concat => {
            if x.len() != r.len() {
                return Err(MaskError::LengthMismatch {
                    mask: r.len(),
                    record: x.len(),
                });
            }
            let mut row = Vec::with_capacity(2 * x.len());
            row.extend_from_slice(x);
            row.extend_from_slice(r);
            Ok(row)
        }
        FusionMode::Premask => mask_combine(x, r, mask_mode),
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Encoder objective: `lambda_e * (||x - x_hat|| + delta) + lambda_d *
/// (L_D1 + L_D2)`, with the adversarial term asking the discriminator to
/// call the synthetic record real.
pub fn loss_encoder(
    x: &[f64],
    x_hat: &[f64],
    d1_on_xhat: f64,
    d2_loss: f64,
    cfg: &PrivacyConfig,
) -> f64 {
    let fool = -clamp_prob(d1_on_xhat).ln();
    cfg.lambda_e * (euclid(x, x_hat) + cfg.delta) + cfg.lambda_d * (fool + d2_loss)
}

/// Discriminator objective: cross entropy with label 1 on the real record
/// and 0 on the synthetic one. Probabilities clamp to [1e-7, 1-1e-7].
pub fn loss_discriminator(d1_on_x: f64, d1_on_xhat: f64) -> f64 {
    -clamp_prob(d1_on_x).ln() - (1.0 - clamp_prob(d1_on_xhat)).ln()
}

fn d_neg_log(p: f64) -> f64 {
    // d/dp of -ln(clamp(p)); zero in the clamped flats.
    if p <= PROB_EPS || p >= 1.0 - PROB_EPS {
        0.0
    } else {
        -1.0 / p
    }
}

fn d_neg_log_one_minus(p: f64) -> f64 {
    // d/dp of -ln(1 - clamp(p)).
    if p <= PROB_EPS || p >= 1.0 - PROB_EPS {
        0.0
    } else {
        1.0 / (1.0 - p)
    }
}

fn clamp01(t: &Tensor2) -> Tensor2 {
    let mut out = t.clone();
    for v in out.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// One encoder forward/backward against a batch: loss components, the
/// clamped synthetic records, and the encoder parameter gradients.
pub struct EncoderStep {
    pub loss: f64,
    pub fool: f64,
    pub d2: f64,
    pub distance: f64,
    pub x_hat: Tensor2,
    pub grads: Gradients,
}

/// Assemble the encoder objective on a batch and backpropagate it through
/// the frozen discriminator and target into the encoder parameters.
pub fn encoder_loss_with_grads(
    encoder: &mut Network,
    discriminator: &mut Network,
    target: &TargetModel,
    x: &Tensor2,
    enc_in: &Tensor2,
    cfg: &PrivacyConfig,
    store: Option<&mut VarianceStore>,
) -> Result<EncoderStep, GanError> {
    let batch = x.rows();
    let bf = batch as f64;
    let n = x.cols();
    let (raw, enc_cache) = encoder.forward_train(enc_in, store)?;
    let x_hat = clamp01(&raw);

    let (d_fool, cache_fool) = discriminator.forward_train(&x_hat, None)?;
    let mut fool = 0.0;
    let mut up_fool = Tensor2::zeros(batch, 1);
    for b in 0..batch {
        let f = d_fool.row(b)[0];
        fool += -clamp_prob(f).ln();
        up_fool.row_mut(b)[0] = d_neg_log(f) / bf;
    }
    fool /= bf;
    let (_, d_xhat_fool) = discriminator.backward(&cache_fool, &up_fool)?;

    let y_ref = target.score_batch(x)?;
    let (d2, d_xhat_target) = target.loss_batch_with_grad(&x_hat, &y_ref)?;

    let mut distance = 0.0;
    let mut d_xhat = Tensor2::zeros(batch, n);
    for b in 0..batch {
        let dist = euclid(x.row(b), x_hat.row(b));
        distance += dist;
        if dist > 1e-12 {
            let scale = cfg.lambda_e / (dist * bf);
            let dr = d_xhat.row_mut(b);
            for (i, (xh, xv)) in x_hat.row(b).iter().zip(x.row(b)).enumerate() {
                dr[i] = scale * (xh - xv);
            }
        }
    }
    distance /= bf;
    for (out, (df, dt)) in d_xhat
        .data_mut()
        .iter_mut()
        .zip(d_xhat_fool.data().iter().zip(d_xhat_target.data()))
    {
        *out += cfg.lambda_d * (df + dt);
    }
    // Gradient through the [0,1] clamp: blocked where the raw output
    // exceeded 1 (ReLU already floors at 0).
    for (g, raw_v) in d_xhat.data_mut().iter_mut().zip(raw.data()) {
        if *raw_v > 1.0 {
            *g = 0.0;
        }
    }
    let loss = cfg.lambda_e * (distance + cfg.delta) + cfg.lambda_d * (fool + d2);
    let (grads, _) = encoder.backward(&enc_cache, &d_xhat)?;
    Ok(EncoderStep {
        loss,
        fool,
        d2,
        distance,
        x_hat,
        grads,
    })
}

/// Discriminator objective on a (real, synthetic) batch pair with parameter
/// gradients; the synthetic records are treated as constants.
pub fn discriminator_loss_with_grads(
    discriminator: &mut Network,
    x: &Tensor2,
    x_hat: &Tensor2,
) -> Result<(f64, Gradients), GanError> {
    let batch = x.rows();
    let bf = batch as f64;
    let (d_real, cache_real) = discriminator.forward_train(x, None)?;
    let (d_fake, cache_fake) = discriminator.forward_train(x_hat, None)?;
    let mut loss = 0.0;
    let mut up_real = Tensor2::zeros(batch, 1);
    let mut up_fake = Tensor2::zeros(batch, 1);
    for b in 0..batch {
        let a = d_real.row(b)[0];
        let f = d_fake.row(b)[0];
        loss += loss_discriminator(a, f);
        up_real.row_mut(b)[0] = d_neg_log(a) / bf;
        up_fake.row_mut(b)[0] = d_neg_log_one_minus(f) / bf;
    }
    loss /= bf;
    let (mut grads, _) = discriminator.backward(&cache_real, &up_real)?;
    let (fake_grads, _) = discriminator.backward(&cache_fake, &up_fake)?;
    grads.add(&fake_grads);
    Ok((loss, grads))
}

/// Alternating adversarial training: a discriminator Adam step then an
/// encoder Adam step per minibatch, a fresh mask per record per step, and
/// encoder activation variances recorded on every forward pass.
pub fn train(
    ds: &Dataset,
    target: &TargetModel,
    cfg: &PrivacyConfig,
    opts: &TrainOptions,
) -> Result<AnomiModel, GanError> {
    cfg.validate()?;
    if !ds.normalized {
        return Err(GanError::NotNormalized);
    }
    if ds.train.is_empty() {
        return Err(GanError::EmptyDataset);
    }
    let n = ds.n;
    if target.input_width() != n {
        return Err(GanError::Width {
            expected: n,
            got: target.input_width(),
        });
    }
    let target_fingerprint = serde_json::to_string(target).expect("target serializes");

    let mut init_rng = ChaCha20Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x494e4954));
    let mut batch_rng = ChaCha20Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x42415443));
    let mut masks = MaskStream::new(cfg.seed);

    let mut encoder = build_encoder(n, cfg.fusion);
    encoder.init_glorot(&mut init_rng);
    // Start the projection head near mid-range so the first synthetic
    // records have no dead ReLU coordinates; exact zeros would both hand
    // the discriminator a trivial tell and block distance gradients.
    if let Some(Layer::Dense(head)) = encoder
        .layers
        .iter_mut()
        .rev()
        .find(|l| matches!(l, Layer::Dense(_)))
    {
        for w in head.w.data_mut() {
            *w *= 0.2;
        }
        for b in &mut head.b {
            *b = 0.5;
        }
    }
    let mut discriminator = build_discriminator(n);
    discriminator.init_glorot(&mut init_rng);
    let mut adam_enc = AdamState::new(opts.learning_rate, opts.beta1, &encoder);
    let mut adam_disc = AdamState::new(opts.learning_rate, opts.beta1, &discriminator);
    let mut store = VarianceStore::default();
    let mut log = Vec::with_capacity(opts.steps as usize);

    let features = ds.train_matrix();
    let batch = opts.batch.max(2).min(ds.train.len().max(2));

    for step in 1..=opts.steps {
        let wrap_gan = |e: GanError| match e {
            GanError::Nn(source) => GanError::Numeric { step, source },
            other => other,
        };

        // Sample a minibatch and give every record a fresh mask.
        let mut x = Tensor2::zeros(batch, n);
        let mut enc_in_rows = Vec::with_capacity(batch);
        for b in 0..batch {
            let idx = batch_rng.gen_range(0..ds.train.len());
            x.row_mut(b).copy_from_slice(features.row(idx));
            let r = masks.next_mask(n, cfg.mask_mode);
            enc_in_rows.push(encoder_input(cfg.fusion, cfg.mask_mode, x.row(b), &r)?);
        }
        let enc_in = Tensor2::from_rows(&enc_in_rows);

        // Both gradient sets come from the same parameter snapshot; the
        // discriminator update lands first, then the encoder update.
        let enc_step = encoder_loss_with_grads(
            &mut encoder,
            &mut discriminator,
            target,
            &x,
            &enc_in,
            cfg,
            Some(&mut store),
        )
        .map_err(wrap_gan)?;
        let (disc_loss, mut disc_grads) =
            discriminator_loss_with_grads(&mut discriminator, &x, &enc_step.x_hat)
                .map_err(wrap_gan)?;
        if !disc_loss.is_finite() || !enc_step.loss.is_finite() {
            return Err(GanError::NonFiniteLoss { step });
        }
        let disc_decay: f64 = std::env::var("ANOMI_DISC_DECAY")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0.0);
        if disc_decay > 0.0 {
            for (slice, params) in disc_grads
                .slices
                .iter_mut()
                .zip(discriminator.param_slices())
            {
                for (g, w) in slice.iter_mut().zip(params) {
                    *g += disc_decay * w;
                }
            }
        }
        adam_disc
            .step(&mut discriminator, &disc_grads)
            .map_err(|source| GanError::Numeric { step, source })?;
        adam_enc
            .step(&mut encoder, &enc_step.grads)
            .map_err(|source| GanError::Numeric { step, source })?;

        log.push(TrainLogEntry {
            step,
            loss_encoder: enc_step.loss,
            loss_d1: enc_step.fool,
            loss_d2: enc_step.d2,
            distance: enc_step.distance,
            disc_loss,
        });
    }

    if serde_json::to_string(target).expect("target serializes") != target_fingerprint {
        return Err(GanError::TargetMutated);
    }

    Ok(AnomiModel {
        encoder,
        discriminator,
        variance_store: store,
        config: *cfg,
        n,
        training_log: log,
    })
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

impl AnomiModel {
    fn check_width(&self, got: usize) -> Result<(), GanError> {
        if got != self.n {
            Err(GanError::Width {
                expected: self.n,
                got,
            })
        } else {
            Ok(())
        }
    }
}

/// Deterministic encoder pass (no injection): the synthetic record for a
/// given record and mask, clamped to [0,1].
pub fn encoder_forward(model: &AnomiModel, x: &[f64], r: &[f64]) -> Result<Vec<f64>, GanError> {
    model.check_width(x.len())?;
    model.check_width(r.len())?;
    let row = encoder_input(model.config.fusion, model.config.mask_mode, x, r)?;
    let t = Tensor2::from_vec(1, row.len(), row);
    let out = model.encoder.forward_infer(&t)?;
    Ok(clamp01(&out).row(0).to_vec())
}

/// A stateful anonymization session: every call draws the next mask from
/// the session's stream and fresh injection noise, so repeated calls on the
/// same record yield different outputs whenever injection is on.
pub struct AnonymizeSession<'a> {
    model: &'a AnomiModel,
    masks: MaskStream,
    noise: ChaCha20Rng,
    delta: f64,
    injection: InjectionPolicy,
}

impl<'a> AnonymizeSession<'a> {
    pub fn new(model: &'a AnomiModel, session_seed: u64) -> Self {
        Self {
            model,
            masks: MaskStream::new(session_seed),
            noise: ChaCha20Rng::seed_from_u64(splitmix64(session_seed ^ 0x4e4f4953)),
            delta: model.config.delta,
            injection: model.config.injection,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_injection(mut self, injection: InjectionPolicy) -> Self {
        self.injection = injection;
        self
    }

    pub fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, GanError> {
        self.model.check_width(x.len())?;
        let cfg = &self.model.config;
        let r = self.masks.next_mask(self.model.n, cfg.mask_mode);
        let site = match self.injection {
            InjectionPolicy::Off => None,
            InjectionPolicy::Layer(site) => {
                if site == 0 || site > INJECTABLE_SITES {
                    return Err(GanError::BadInjectionSite {
                        site,
                        max: INJECTABLE_SITES,
                    });
                }
                Some(site)
            }
            InjectionPolicy::RandomLayer => {
                Some(self.noise.gen_range(1..=INJECTABLE_SITES))
            }
        };
        if site.is_some() && self.model.variance_store.is_empty() {
            return Err(GanError::EmptyVarianceStore);
        }
        let row = encoder_input(cfg.fusion, cfg.mask_mode, x, &r)?;
        let t = Tensor2::from_vec(1, row.len(), row);
        let scale = self.delta / REFERENCE_DELTA;
        let store = &self.model.variance_store;
        let noise = &mut self.noise;
        let out = self.model.encoder.forward_infer_hooked(&t, |act_idx, channels, acts| {
            if Some(act_idx + 1) != site {
                return Ok(());
            }
            let vars = store
                .stored_variance(act_idx)
                .ok_or(NnError::EmptyVarianceStore)?;
            if vars.len() != channels {
                return Err(NnError::ShapeMismatch {
                    layer: format!("injection site {}", act_idx + 1),
                });
            }
            let len = acts.cols() / channels;
            for b in 0..acts.rows() {
                let row = acts.row_mut(b);
                for ch in 0..channels {
                    let sigma = vars[ch].max(0.0).sqrt() * scale;
                    if sigma == 0.0 {
                        continue;
                    }
                    for p in 0..len {
                        let z: f64 = noise.sample(StandardNormal);
                        row[ch * len + p] += sigma * z;
                    }
                }
            }
            Ok(())
        })?;
        Ok(clamp01(&out).row(0).to_vec())
    }
}
