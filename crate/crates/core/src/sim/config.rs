use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StakeTier {
    pub count: usize,
    pub weight: f64,
}

/// How `total_stake` is split across validators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StakeDistribution {
    Uniform,
    /// Weight of the validator at rank `k` (1-based) is `1 / k^s`.
    Zipf { s: f64 },
    /// Relative weight per validator, in validator index order.
    Explicit(Vec<f64>),
    /// Consecutive runs of validators sharing one relative weight.
    Tiers(Vec<StakeTier>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub label: String,
    pub fraction: f64,
}

impl Share {
    pub fn new(label: impl Into<String>, fraction: f64) -> Self {
        Self {
            label: label.into(),
            fraction,
        }
    }
}

/// Simulator parameters. Every field has a default so scenario files only
/// spell out overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub validator_count: usize,
    /// Number of distinct operators; validator `i` belongs to entity `i % entity_count`.
    /// `None` gives every validator its own entity.
    pub entity_count: Option<usize>,
    pub total_stake: f64,
    pub stake_distribution: StakeDistribution,
    /// Hosting providers, assigned to validators in contiguous index blocks.
    pub providers: Vec<Share>,
    pub countries: Vec<Share>,
    pub slots_per_epoch: u64,
    pub slot_duration_ms: u64,
    pub genesis_ms: i64,
    pub base_vote_probability: f64,
    /// Mean new transactions per slot (Poisson).
    pub base_tx_rate: f64,
    pub tx_sources: Vec<String>,
    pub sanctioned_tx_rate: f64,
    pub initial_price: f64,
    pub circulating_supply: f64,
    /// Per-slot standard deviation of the log-price random walk.
    pub price_volatility: f64,
    pub latest_client_version: String,
    pub cpu_baseline_pct: f64,
    pub cpu_jitter_pct: f64,
    pub vote_delay_mean_ms: f64,
    pub vote_delay_sd_ms: f64,
    /// Off-chain facts published at genesis (lawsuits, value secured, validator economics).
    pub external_facts: BTreeMap<String, f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let providers = [
            ("aws", 0.15),
            ("gcp", 0.15),
            ("azure", 0.14),
            ("ovh", 0.14),
            ("hetzner", 0.14),
            ("digitalocean", 0.14),
            ("equinix", 0.14),
        ];
        let countries = [
            ("US", 0.15),
            ("DE", 0.15),
            ("FR", 0.14),
            ("GB", 0.14),
            ("SG", 0.14),
            ("JP", 0.14),
            ("CA", 0.14),
        ];
        let external_facts = [
            ("pending_lawsuits", 0.0),
            ("value_secured", 5.0e9),
            ("validator_rewards_annual", 60_000.0),
            ("validator_costs_annual", 40_000.0),
        ];
        Self {
            seed: 42,
            validator_count: 100,
            entity_count: None,
            total_stake: 1.0e7,
            stake_distribution: StakeDistribution::Uniform,
            providers: providers.iter().map(|(l, f)| Share::new(*l, *f)).collect(),
            countries: countries.iter().map(|(l, f)| Share::new(*l, *f)).collect(),
            slots_per_epoch: 32,
            slot_duration_ms: 400,
            genesis_ms: 1_700_000_000_000,
            base_vote_probability: 0.998,
            base_tx_rate: 80.0,
            tx_sources: ["wallet-a", "wallet-b", "dex-router", "bridge", "exchange"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            sanctioned_tx_rate: 0.0,
            initial_price: 2000.0,
            circulating_supply: 1.2e8,
            price_volatility: 0.0002,
            latest_client_version: "1.4.0".into(),
            cpu_baseline_pct: 10.0,
            cpu_jitter_pct: 2.0,
            vote_delay_mean_ms: 350.0,
            vote_delay_sd_ms: 80.0,
            external_facts: external_facts
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

fn invalid(reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        reason: reason.into(),
    }
}

fn check_shares(name: &str, shares: &[Share]) -> Result<(), SimError> {
    if shares.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    if shares.iter().any(|s| !(0.0..=1.0).contains(&s.fraction)) {
        return Err(invalid(format!("{name} fractions must lie in [0,1]")));
    }
    let sum: f64 = shares.iter().map(|s| s.fraction).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{name} fractions sum to {sum}, expected 1")));
    }
    Ok(())
}

fn unit(name: &str, v: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} outside [0,1]")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.validator_count == 0 {
            return Err(invalid("validator_count must be >= 1"));
        }
        if let Some(e) = self.entity_count {
            if e == 0 || e > self.validator_count {
                return Err(invalid("entity_count must lie in 1..=validator_count"));
            }
        }
        if !(self.total_stake.is_finite() && self.total_stake > 0.0) {
            return Err(invalid("total_stake must be positive"));
        }
        match &self.stake_distribution {
            StakeDistribution::Uniform => {}
            StakeDistribution::Zipf { s } => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(invalid("zipf exponent must be positive"));
                }
            }
            StakeDistribution::Explicit(w) => {
                if w.len() != self.validator_count {
                    return Err(invalid("explicit weights must cover every validator"));
                }
                check_weights(w)?;
            }
            StakeDistribution::Tiers(tiers) => {
                let n: usize = tiers.iter().map(|t| t.count).sum();
                if n != self.validator_count {
                    return Err(invalid("stake tiers must cover every validator"));
                }
                check_weights(&tiers.iter().map(|t| t.weight).collect::<Vec<_>>())?;
            }
        }
        check_shares("providers", &self.providers)?;
        check_shares("countries", &self.countries)?;
        if self.slots_per_epoch == 0 {
            return Err(invalid("slots_per_epoch must be >= 1"));
        }
        if self.slot_duration_ms == 0 {
            return Err(invalid("slot_duration_ms must be >= 1"));
        }
        unit("base_vote_probability", self.base_vote_probability)?;
        unit("sanctioned_tx_rate", self.sanctioned_tx_rate)?;
        if !(self.base_tx_rate.is_finite() && self.base_tx_rate >= 0.0) {
            return Err(invalid("base_tx_rate must be >= 0"));
        }
        if self.tx_sources.is_empty() {
            return Err(invalid("tx_sources must not be empty"));
        }
        if !(self.initial_price.is_finite() && self.initial_price > 0.0) {
            return Err(invalid("initial_price must be positive"));
        }
        if !(self.circulating_supply.is_finite() && self.circulating_supply >= 0.0) {
            return Err(invalid("circulating_supply must be >= 0"));
        }
        if !(self.price_volatility.is_finite() && self.price_volatility >= 0.0) {
            return Err(invalid("price_volatility must be >= 0"));
        }
        if !(0.0..=100.0).contains(&self.cpu_baseline_pct) || self.cpu_jitter_pct < 0.0 {
            return Err(invalid("cpu baseline must lie in [0,100] with jitter >= 0"));
        }
        if self.vote_delay_mean_ms < 0.0 || self.vote_delay_sd_ms < 0.0 {
            return Err(invalid("vote delay parameters must be >= 0"));
        }
        semver::Version::parse(&self.latest_client_version)
            .map_err(|e| invalid(format!("latest_client_version: {e}")))?;
        Ok(())
    }

    /// Absolute stake per validator, in index order.
    pub fn stakes(&self) -> Vec<f64> {
        let n = self.validator_count;
        let relative: Vec<f64> = match &self.stake_distribution {
            StakeDistribution::Uniform => vec![1.0; n],
            StakeDistribution::Zipf { s } => (1..=n).map(|k| 1.0 / (k as f64).powf(*s)).collect(),
            StakeDistribution::Explicit(w) => w.clone(),
            StakeDistribution::Tiers(tiers) => tiers
                .iter()
                .flat_map(|t| std::iter::repeat_n(t.weight, t.count))
                .collect(),
        };
        let sum: f64 = relative.iter().sum();
        relative
            .iter()
            .map(|w| w / sum * self.total_stake)
            .collect()
    }
}

fn check_weights(w: &[f64]) -> Result<(), SimError> {
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("stake weights must be finite and >= 0"));
    }
    if !w.iter().any(|x| *x > 0.0) {
        return Err(invalid("stake weights need at least one positive entry"));
    }
    Ok(())
}

/// Largest-remainder apportionment of `n` items to `shares`, returned as
/// one label per index in contiguous blocks following declaration order.
pub fn apportion(shares: &[Share], n: usize) -> Vec<String> {
    let exact: Vec<f64> = shares.iter().map(|s| s.fraction * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    // Stable sort keeps declaration order among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    shares
        .iter()
        .zip(counts)
        .flat_map(|(s, c)| std::iter::repeat_n(s.label.clone(), c))
        .collect()
}
