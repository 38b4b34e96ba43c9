//! Empirical indistinguishability game: the adversary picks two records,
//! the harness anonymizes one chosen by a fair hidden bit, and the adversary
//! guesses which. Advantage is `success rate - 1/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::Record;
use crate::gan::{AnomiModel, AnonymizeSession};
use crate::mask::{mask_combine, MaskMode, MaskStream};
use crate::nn::Tensor2;
use crate::target::bce_loss_and_grad;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameTranscript {
    pub trials: u64,
    pub successes: u64,
    pub adversary: String,
    pub epsilon_hat: f64,
}

/// The anonymization under attack. A fresh mask / noise draw per call is the
/// scheme's responsibility.
pub trait GameScheme {
    fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError>;
}

/// Mask combination alone, no model: the one-time-pad analogue.
pub struct MaskOnlyScheme {
    stream: MaskStream,
    mode: MaskMode,
}

impl MaskOnlyScheme {
    pub fn new(seed: u64, mode: MaskMode) -> Self {
        Self {
            stream: MaskStream::new(seed),
            mode,
        }
    }
}

impl GameScheme for MaskOnlyScheme {
    fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let r = self.stream.next_mask(x.len(), self.mode);
        Ok(mask_combine(x, &r, self.mode)?)
    }
}

/// The full trained mechanism.
pub struct ModelScheme<'a> {
    session: AnonymizeSession<'a>,
}

impl<'a> ModelScheme<'a> {
    pub fn new(model: &'a AnomiModel, session_seed: u64) -> Self {
        Self {
            session: AnonymizeSession::new(model, session_seed),
        }
    }
}

impl GameScheme for ModelScheme<'_> {
    fn anonymize(&mut self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.session.anonymize(x)?)
    }
}

/// Guessing strategy. `guess` must return a bit.
pub trait Adversary {
    fn name(&self) -> String;
    fn guess(&mut self, x0: &[f64], x1: &[f64], x_hat: &[f64]) -> u8;
}

pub struct RandomGuess {
    rng: ChaCha20Rng,
}

impl RandomGuess {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }
}

impl Adversary for RandomGuess {
    fn name(&self) -> String {
        "random_guess".to_string()
    }

    fn guess(&mut self, _x0: &[f64], _x1: &[f64], _x_hat: &[f64]) -> u8 {
        self.rng.gen_range(0..2)
    }
}

/// Picks the candidate closer to the anonymized record in Euclidean
/// distance.
pub struct NearestNeighbor;

impl Adversary for NearestNeighbor {
    fn name(&self) -> String {
        "nearest_neighbor".to_string()
    }

    fn guess(&mut self, x0: &[f64], x1: &[f64], x_hat: &[f64]) -> u8 {
        let dist = |a: &[f64]| -> f64 {
            a.iter()
                .zip(x_hat)
                .map(|(p, q)| (p - q) * (p - q))
                .sum()
        };
        u8::from(dist(x1) < dist(x0))
    }
}

/// Logistic regression over `[x0 || x1 || x_hat]`, trained on labeled
/// transcripts generated from a held-out pool.
pub struct LogisticDistinguisher {
    net: crate::nn::Network,
}

impl LogisticDistinguisher {
    /// Generate `transcripts` labeled games against `scheme` using records
    /// from `pool`, then fit by Adam.
    pub fn fit(
        scheme: &mut dyn GameScheme,
        pool: &[Record],
        transcripts: usize,
        seed: u64,
    ) -> Result<Self, EvalError> {
        if pool.len() < 2 {
            return Err(EvalError::SmallPool {
                min: 2,
                got: pool.len(),
            });
        }
        let n = pool[0].features.len();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(transcripts);
        let mut labels = Vec::with_capacity(transcripts);
        for _ in 0..transcripts {
            let (i, j) = distinct_pair(&mut rng, pool.len());
            let (x0, x1) = (&pool[i].features, &pool[j].features);
            let b: u8 = rng.gen_range(0..2);
            let x_hat = scheme.anonymize(if b == 0 { x0 } else { x1 })?;
            let mut row = Vec::with_capacity(3 * n);
            row.extend_from_slice(x0);
            row.extend_from_slice(x1);
            row.extend_from_slice(&x_hat);
            rows.push(row);
            labels.push(f64::from(b));
        }
        let x = Tensor2::from_rows(&rows);

        let mut net = crate::nn::Network::new(vec![
            crate::nn::Layer::Dense(crate::nn::Dense::new(3 * n, 1)),
            crate::nn::Layer::Activation(crate::nn::Activation::Sigmoid),
        ]);
        net.init_glorot(&mut rng);
        let mut adam = crate::nn::AdamState::new(0.01, 0.9, &net);
        for _ in 0..300 {
            let (out, cache) = net.forward_train(&x, None)?;
            let (_, upstream) = bce_loss_and_grad(&out, &labels);
            let (grads, _) = net.backward(&cache, &upstream)?;
            adam.step(&mut net, &grads)?;
        }
        Ok(Self { net })
    }
}

impl Adversary for LogisticDistinguisher {
    fn name(&self) -> String {
        "logistic".to_string()
    }

    fn guess(&mut self, x0: &[f64], x1: &[f64], x_hat: &[f64]) -> u8 {
        let mut row = Vec::with_capacity(x0.len() * 3);
        row.extend_from_slice(x0);
        row.extend_from_slice(x1);
        row.extend_from_slice(x_hat);
        let t = Tensor2::from_vec(1, row.len(), row);
        match self.net.forward_infer(&t) {
            Ok(out) => u8::from(out.row(0)[0] >= 0.5),
            Err(_) => 0,
        }
    }
}

fn distinct_pair(rng: &mut ChaCha20Rng, len: usize) -> (usize, usize) {
    let i = rng.gen_range(0..len);
    let mut j = rng.gen_range(0..len - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

pub const MIN_TRIALS: u64 = 1000;

/// Play `trials` rounds: pick a pair from the pool, flip a fair bit,
/// anonymize the chosen record with fresh randomness, and score the
/// adversary's guess.
pub fn run_distinguisher_game(
    scheme: &mut dyn GameScheme,
    adversary: &mut dyn Adversary,
    pool: &[Record],
    trials: u64,
    seed: u64,
) -> Result<GameTranscript, EvalError> {
    if trials < MIN_TRIALS {
        return Err(EvalError::TooFewTrials {
            min: MIN_TRIALS,
            got: trials,
        });
    }
    if pool.len() < 2 {
        return Err(EvalError::SmallPool {
            min: 2,
            got: pool.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut successes = 0u64;
    for _ in 0..trials {
        let (i, j) = distinct_pair(&mut rng, pool.len());
        let (x0, x1) = (&pool[i].features, &pool[j].features);
        let b: u8 = rng.gen_range(0..2);
        let x_hat = scheme.anonymize(if b == 0 { x0 } else { x1 })?;
        let guess = adversary.guess(x0, x1, &x_hat);
        if guess > 1 {
            return Err(EvalError::NonBitGuess { got: guess });
        }
        if guess == b {
            successes += 1;
        }
    }
    Ok(GameTranscript {
        trials,
        successes,
        adversary: adversary.name(),
        epsilon_hat: successes as f64 / trials as f64 - 0.5,
    })
}
