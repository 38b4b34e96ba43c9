//! Mask security properties: exact round-trips, one-time-pad uniformity of
//! the masked marginal, and chance-level distinguisher success.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use anomigan_core::data::Record;
use anomigan_core::eval::{
    run_distinguisher_game, LogisticDistinguisher, MaskOnlyScheme, NearestNeighbor, RandomGuess,
};
use anomigan_core::mask::{mask_at, mask_combine, mask_remove, MaskMode, MaskStream};

/// Lattice value in [0,1): the additive pad's native domain.
fn grid_value(k: u32) -> f64 {
    k as f64 / 4294967296.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn additive_round_trip_is_exact(
        xs in prop::collection::vec(any::<u32>(), 1..64),
        seed in any::<u64>(),
    ) {
        let x: Vec<f64> = xs.iter().map(|k| grid_value(*k)).collect();
        let r = mask_at(seed, 0, x.len(), MaskMode::UniformAdditive);
        let combined = mask_combine(&x, &r, MaskMode::UniformAdditive).unwrap();
        let recovered = mask_remove(&combined, &r, MaskMode::UniformAdditive).unwrap();
        prop_assert_eq!(recovered, x);
    }

    #[test]
    fn xor_round_trip_is_exact(
        bits in prop::collection::vec(prop::bool::ANY, 1..64),
        seed in any::<u64>(),
    ) {
        let x: Vec<f64> = bits.iter().map(|b| f64::from(*b)).collect();
        let r = mask_at(seed, 0, x.len(), MaskMode::XorBitwise);
        let combined = mask_combine(&x, &r, MaskMode::XorBitwise).unwrap();
        let recovered = mask_remove(&combined, &r, MaskMode::XorBitwise).unwrap();
        prop_assert_eq!(recovered, x);
    }

    #[test]
    fn arbitrary_records_recover_to_quantization_precision(
        xs in prop::collection::vec(0.0f64..1.0, 1..32),
        seed in any::<u64>(),
    ) {
        let r = mask_at(seed, 1, xs.len(), MaskMode::UniformAdditive);
        let combined = mask_combine(&xs, &r, MaskMode::UniformAdditive).unwrap();
        let recovered = mask_remove(&combined, &r, MaskMode::UniformAdditive).unwrap();
        for (a, b) in xs.iter().zip(&recovered) {
            prop_assert!((a - b).abs() <= 1.0 / 4294967296.0 + 1e-15);
        }
    }
}

#[test]
fn round_trip_exact_on_ten_thousand_random_records() {
    let mut rng = ChaCha20Rng::seed_from_u64(808);
    let mut masks = MaskStream::new(909);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=40);
        let x: Vec<f64> = (0..n).map(|_| grid_value(rng.gen())).collect();
        let r = masks.next_mask(n, MaskMode::UniformAdditive);
        let combined = mask_combine(&x, &r, MaskMode::UniformAdditive).unwrap();
        assert_eq!(mask_remove(&combined, &r, MaskMode::UniformAdditive).unwrap(), x);

        let bits: Vec<f64> = (0..n).map(|_| f64::from(rng.gen::<bool>())).collect();
        let rb = masks.next_mask(n, MaskMode::XorBitwise);
        let cb = mask_combine(&bits, &rb, MaskMode::XorBitwise).unwrap();
        assert_eq!(mask_combine(&cb, &rb, MaskMode::XorBitwise).unwrap(), bits);
    }
}

/// Kolmogorov-Smirnov distance of the masked marginal against Uniform[0,1).
fn ks_against_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, v) in values.iter().enumerate() {
        let cdf = *v;
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    worst
}

#[test]
fn masked_marginal_is_uniform_for_any_fixed_record() {
    // One fixed record entry, 1e5 fresh masks: the combined value's
    // distribution must be indistinguishable from uniform.
    let x = [0.637_913_2f64];
    let mut stream = MaskStream::new(1234);
    let mut values = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let r = stream.next_mask(1, MaskMode::UniformAdditive);
        values.push(mask_combine(&x, &r, MaskMode::UniformAdditive).unwrap()[0]);
    }
    let ks = ks_against_uniform(&mut values);
    assert!(ks < 0.01, "KS statistic {ks}");
}

fn test_pool(n: usize, count: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Record {
            features: (0..n).map(|_| rng.gen()).collect(),
            label: Some(0),
        })
        .collect()
}

#[test]
fn no_adversary_beats_chance_against_mask_only() {
    let pool = test_pool(12, 40, 77);
    let trials = 10_000;

    let mut scheme = MaskOnlyScheme::new(3, MaskMode::UniformAdditive);
    let mut nn = NearestNeighbor;
    let t = run_distinguisher_game(&mut scheme, &mut nn, &pool, trials, 5).unwrap();
    let rate = t.successes as f64 / trials as f64;
    assert!((rate - 0.5).abs() < 0.02, "nearest neighbor rate {rate}");

    let mut scheme = MaskOnlyScheme::new(4, MaskMode::UniformAdditive);
    let mut rg = RandomGuess::new(6);
    let t = run_distinguisher_game(&mut scheme, &mut rg, &pool, trials, 7).unwrap();
    let rate = t.successes as f64 / trials as f64;
    assert!((rate - 0.5).abs() < 0.02, "random guess rate {rate}");

    let mut fit_scheme = MaskOnlyScheme::new(8, MaskMode::UniformAdditive);
    let mut logistic = LogisticDistinguisher::fit(&mut fit_scheme, &pool, 2000, 9).unwrap();
    let mut scheme = MaskOnlyScheme::new(10, MaskMode::UniformAdditive);
    let t = run_distinguisher_game(&mut scheme, &mut logistic, &pool, trials, 11).unwrap();
    let rate = t.successes as f64 / trials as f64;
    assert!((rate - 0.5).abs() < 0.02, "logistic rate {rate}");
}

#[test]
fn advantage_shrinks_with_trial_count() {
    // 3-sigma band: |epsilon_hat| <= 1.5 / sqrt(trials).
    let pool = test_pool(8, 30, 13);
    for (seed, trials) in [(21u64, 1_000u64), (22, 100_000)] {
        let mut scheme = MaskOnlyScheme::new(seed, MaskMode::UniformAdditive);
        let mut nn = NearestNeighbor;
        let t = run_distinguisher_game(&mut scheme, &mut nn, &pool, trials, seed).unwrap();
        let band = 1.5 / (trials as f64).sqrt();
        assert!(
            t.epsilon_hat.abs() <= band,
            "trials {trials}: advantage {} exceeds band {band}",
            t.epsilon_hat
        );
    }
}
