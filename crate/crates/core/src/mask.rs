//! Seeded mask generation and one-time-pad-style record masking.
//!
//! `uniform_additive` masks are lattice points `k / 2^32` for uniform `k`,
//! and mod-1 addition runs in u32 fixed point so that combining and removing
//! a mask round-trips exactly. `xor_bitwise` operates on features binarized
//! at 0.5.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask length {mask} does not match record length {record}")]
    LengthMismatch { mask: usize, record: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    XorBitwise,
    UniformAdditive,
}

const GRID: f64 = 4294967296.0; // 2^32

fn to_fixed(v: f64) -> u32 {
    let scaled = (v * GRID).round();
    if scaled <= 0.0 {
        0
    } else if scaled >= GRID - 1.0 {
        u32::MAX
    } else {
        scaled as u32
    }
}

fn from_fixed(k: u32) -> f64 {
    k as f64 / GRID
}

fn binarize(v: f64) -> u8 {
    u8::from(v >= 0.5)
}

/// Counter-addressed mask generator: every counter value names one mask, and
/// the stream never replays one.
#[derive(Clone, Debug)]
pub struct MaskStream {
    seed: u64,
    counter: u64,
}

impl MaskStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Next mask of length `n`; advances the counter.
    pub fn next_mask(&mut self, n: usize, mode: MaskMode) -> Vec<f64> {
        let mask = mask_at(self.seed, self.counter, n, mode);
        self.counter += 1;
        mask
    }
}

/// The mask a stream with this seed emits at `counter`.
pub fn mask_at(seed: u64, counter: u64, n: usize, mode: MaskMode) -> Vec<f64> {
    assert!(n >= 1, "mask length must be >= 1");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    match mode {
        MaskMode::XorBitwise => (0..n).map(|_| f64::from(rng.gen::<bool>())).collect(),
        MaskMode::UniformAdditive => (0..n).map(|_| from_fixed(rng.next_u32())).collect(),
    }
}

/// Combine a record with a mask: XOR on bits, mod-1 addition on the fixed
/// point lattice otherwise.
pub fn mask_combine(x: &[f64], r: &[f64], mode: MaskMode) -> Result<Vec<f64>, MaskError> {
    if x.len() != r.len() {
        return Err(MaskError::LengthMismatch {
            mask: r.len(),
            record: x.len(),
        });
    }
    Ok(match mode {
        MaskMode::XorBitwise => x
            .iter()
            .zip(r)
            .map(|(a, b)| f64::from(binarize(*a) ^ binarize(*b)))
            .collect(),
        MaskMode::UniformAdditive => x
            .iter()
            .zip(r)
            .map(|(a, b)| from_fixed(to_fixed(*a).wrapping_add(to_fixed(*b))))
            .collect(),
    })
}

/// Invert `mask_combine`: XOR is its own inverse, mod-1 addition inverts by
/// mod-1 subtraction.
pub fn mask_remove(combined: &[f64], r: &[f64], mode: MaskMode) -> Result<Vec<f64>, MaskError> {
    if combined.len() != r.len() {
        return Err(MaskError::LengthMismatch {
            mask: r.len(),
            record: combined.len(),
        });
    }
    Ok(match mode {
        MaskMode::XorBitwise => mask_combine(combined, r, mode)?,
        MaskMode::UniformAdditive => combined
            .iter()
            .zip(r)
            .map(|(a, b)| from_fixed(to_fixed(*a).wrapping_sub(to_fixed(*b))))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_counter_same_mask() {
        let a = mask_at(42, 7, 16, MaskMode::UniformAdditive);
        let b = mask_at(42, 7, 16, MaskMode::UniformAdditive);
        assert_eq!(a, b);
        let mut stream = MaskStream::new(42);
        for _ in 0..7 {
            stream.next_mask(16, MaskMode::UniformAdditive);
        }
        assert_eq!(stream.next_mask(16, MaskMode::UniformAdditive), a);
    }

    #[test]
    fn consecutive_masks_differ() {
        let mut stream = MaskStream::new(9);
        let mut prev = stream.next_mask(8, MaskMode::UniformAdditive);
        for _ in 0..10_000 {
            let next = stream.next_mask(8, MaskMode::UniformAdditive);
            assert_ne!(prev, next);
            prev = next;
        }
    }

    #[test]
    fn additive_draws_match_uniform_moments() {
        let mut stream = MaskStream::new(123);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n / 100 {
            for v in stream.next_mask(100, MaskMode::UniformAdditive) {
                sum += v;
                sum_sq += v * v;
            }
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.02 / 12.0, "variance {var}");
    }

    #[test]
    fn zero_mask_is_identity() {
        let x = vec![0.25, 0.5, 0.875];
        let r = vec![0.0; 3];
        assert_eq!(mask_combine(&x, &r, MaskMode::UniformAdditive).unwrap(), x);
        let bits = vec![1.0, 0.0, 1.0];
        assert_eq!(mask_combine(&bits, &r, MaskMode::XorBitwise).unwrap(), bits);
    }

    #[test]
    fn xor_round_trip_is_involution() {
        let x = vec![1.0, 0.0, 0.0, 1.0];
        let r = vec![1.0, 1.0, 0.0, 0.0];
        let c = mask_combine(&x, &r, MaskMode::XorBitwise).unwrap();
        assert_eq!(mask_combine(&c, &r, MaskMode::XorBitwise).unwrap(), x);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(mask_combine(&[0.1], &[0.1, 0.2], MaskMode::UniformAdditive).is_err());
    }
}
