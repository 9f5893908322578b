//! Reference implementations written straight from the definitions, without
//! sorting tricks or closed-form shortcuts. They are slow on purpose and
//! exist to be compared against the engine.

/// Smallest coalition whose weight strictly exceeds `threshold` of the
/// total, found by enumerating every subset. `None` for empty or all-zero
/// input. Limited to 20 holders.
pub fn nakamoto(weights: &[f64], threshold: f64) -> Option<usize> {
    let n = weights.len();
    assert!(n <= 20, "exhaustive search is limited to 20 holders");
    let total: f64 = weights.iter().sum();
    if n == 0 || total <= 0.0 {
        return None;
    }
    let bar = threshold * total;
    let mut best: Option<usize> = None;
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if best.is_some_and(|b| size >= b) {
            continue;
        }
        let sum: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| weights[i])
            .sum();
        if sum > bar {
            best = Some(size);
        }
    }
    best
}

/// Mean absolute difference over all ordered pairs, halved and divided by
/// the mean.
pub fn gini(weights: &[f64]) -> Option<f64> {
    let n = weights.len() as f64;
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return None;
    }
    let mean = total / n;
    let mut abs_diff = 0.0;
    for a in weights {
        for b in weights {
            abs_diff += (a - b).abs();
        }
    }
    Some(abs_diff / (2.0 * n * n * mean))
}

/// `(1/n) Σ (x/μ) ln(x/μ)`, with `0 ln 0 = 0`.
pub fn theil(weights: &[f64]) -> Option<f64> {
    let n = weights.len() as f64;
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return None;
    }
    let mean = total / n;
    let mut sum = 0.0;
    for x in weights {
        let r = x / mean;
        if r > 0.0 {
            sum += r * r.ln();
        }
    }
    Some(sum / n)
}

/// Two-thirds supermajority, boundary included.
pub fn quorum(voted_stake: f64, expected_stake: f64) -> bool {
    expected_stake > 0.0 && voted_stake * 3.0 >= expected_stake * 2.0
}
