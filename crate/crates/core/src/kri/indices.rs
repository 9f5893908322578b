//! Decentralisation indices over stake or node distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::KriError;
use crate::telemetry::{NodeDescriptor, StakeSnapshot};

/// Default control threshold: a coalition controls the network once its
/// share strictly exceeds one half.
pub const MAJORITY: f64 = 0.5;

/// Distributions whose index value is known in closed form. Returning the
/// analytic value avoids rounding residue at the extremes.
enum Degenerate {
    Equal,
    SingleHolder,
}

fn degenerate(weights: &[f64]) -> Option<Degenerate> {
    let first = weights[0];
    if weights.iter().all(|w| *w == first) {
        return Some(Degenerate::Equal);
    }
    if weights.iter().filter(|w| **w > 0.0).count() == 1 {
        return Some(Degenerate::SingleHolder);
    }
    None
}

fn check_weights(weights: &[f64]) -> Result<f64, KriError> {
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(KriError::EmptySnapshot);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(KriError::EmptySnapshot);
    }
    Ok(total)
}

/// Smallest number of entities whose combined weight strictly exceeds
/// `control_threshold` of the total. Entities are taken largest first,
/// ties by their order in `shares` (entity id order for snapshots).
pub fn nakamoto_coefficient_of(
    shares: &[(String, f64)],
    control_threshold: f64,
) -> Result<usize, KriError> {
    if !(control_threshold > 0.0 && control_threshold < 1.0) {
        return Err(KriError::InvalidThreshold(control_threshold));
    }
    let weights: Vec<f64> = shares.iter().map(|(_, w)| *w).collect();
    let total = check_weights(&weights)?;
    let mut order: Vec<usize> = (0..shares.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| shares[a].0.cmp(&shares[b].0))
    });
    // Compare raw cumulative weight to the scaled threshold so integral
    // stakes are decided exactly.
    let bar = control_threshold * total;
    let mut acc = 0.0;
    for (k, &i) in order.iter().enumerate() {
        acc += weights[i];
        if acc > bar {
            return Ok(k + 1);
        }
    }
    Ok(order.len())
}

pub fn nakamoto_coefficient(
    snapshot: &StakeSnapshot,
    control_threshold: f64,
) -> Result<usize, KriError> {
    nakamoto_coefficient_of(&snapshot.shares, control_threshold)
}

/// Nakamoto coefficient divided by the number of entities holding stake.
pub fn nakamoto_ratio(snapshot: &StakeSnapshot, control_threshold: f64) -> Result<f64, KriError> {
    let k = nakamoto_coefficient(snapshot, control_threshold)?;
    let holders = snapshot.shares.iter().filter(|(_, w)| *w > 0.0).count();
    Ok(k as f64 / holders as f64)
}

/// Gini coefficient via the sorted-rank identity
/// `G = 2 Σ i·x_(i) / (n Σ x) − (n + 1) / n` with 1-based ranks over
/// ascending values. Zero-weight entries count towards `n`.
pub fn gini_of(weights: &[f64]) -> Result<f64, KriError> {
    let total = check_weights(weights)?;
    let n = weights.len() as f64;
    match degenerate(weights) {
        Some(Degenerate::Equal) => return Ok(0.0),
        Some(Degenerate::SingleHolder) => return Ok((n - 1.0) / n),
        None => {}
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite weights"));
    let ranked: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i as f64 + 1.0) * x)
        .sum();
    let g = 2.0 * ranked / (n * total) - (n + 1.0) / n;
    Ok(g.clamp(0.0, 1.0))
}

pub fn gini(snapshot: &StakeSnapshot) -> Result<f64, KriError> {
    gini_of(&snapshot.weights())
}

/// Theil index in its entropy form `T = Σ s_i ln(n s_i)` over normalized
/// shares `s_i`; zero shares contribute nothing.
pub fn theil_of(weights: &[f64]) -> Result<f64, KriError> {
    let total = check_weights(weights)?;
    let n = weights.len() as f64;
    match degenerate(weights) {
        Some(Degenerate::Equal) => return Ok(0.0),
        Some(Degenerate::SingleHolder) => return Ok(n.ln()),
        None => {}
    }
    let t: f64 = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let s = w / total;
            s * (n * s).ln()
        })
        .sum();
    Ok(t.clamp(0.0, n.ln()))
}

pub fn theil(snapshot: &StakeSnapshot) -> Result<f64, KriError> {
    theil_of(&snapshot.weights())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Provider,
    Country,
    Entity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareWeight {
    NodeCount,
    Stake,
}

/// Largest share held by one provider, country or entity.
pub fn max_share_by(
    nodes: &[NodeDescriptor],
    key: GroupKey,
    weight: ShareWeight,
) -> Result<f64, KriError> {
    if nodes.is_empty() {
        return Err(KriError::EmptyNodeSet);
    }
    let mut groups: BTreeMap<&str, f64> = BTreeMap::new();
    for node in nodes {
        let label = match key {
            GroupKey::Provider => node.provider.as_str(),
            GroupKey::Country => node.country.as_str(),
            GroupKey::Entity => node.entity_id.as_str(),
        };
        let w = match weight {
            ShareWeight::NodeCount => 1.0,
            ShareWeight::Stake => node.stake,
        };
        *groups.entry(label).or_insert(0.0) += w;
    }
    let total: f64 = groups.values().sum();
    if total <= 0.0 {
        return Err(KriError::EmptyNodeSet);
    }
    let max = groups.values().cloned().fold(0.0, f64::max);
    Ok(max / total)
}
