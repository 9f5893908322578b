//! Seeded random stake vectors for oracle cross-checks.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Produces `count` weight vectors of 1..=`max_len` entries. Roughly half use
/// small integers, which makes exact ties and exact-threshold sums common;
/// the rest are continuous, sometimes with zero holders mixed in.
pub fn weight_vectors(seed: u64, count: usize, max_len: usize) -> Vec<Vec<f64>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=max_len);
            let integral = rng.random_bool(0.5);
            let zeros = rng.random_bool(0.2);
            let mut v: Vec<f64> = (0..n)
                .map(|_| {
                    if zeros && rng.random_bool(0.3) {
                        0.0
                    } else if integral {
                        rng.random_range(1..=10) as f64
                    } else {
                        rng.random_range(0.001..1_000.0)
                    }
                })
                .collect();
            if v.iter().all(|w| *w == 0.0) {
                v[0] = 1.0;
            }
            v
        })
        .collect()
}

/// Entity ids matching [`weight_vectors`] positions, `e00`, `e01`, ...
pub fn labelled(weights: &[f64]) -> Vec<(String, f64)> {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| (format!("e{i:02}"), *w))
        .collect()
}
