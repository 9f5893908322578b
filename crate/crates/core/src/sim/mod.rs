//! Deterministic proof-of-stake network simulator with scripted faults.

mod config;
mod network;
mod scenario;

use thiserror::Error;

pub use config::{apportion, Share, SimConfig, StakeDistribution, StakeTier};
pub use network::{
    init_network, run, run_events, NetworkState, Simulation, ValidatorState,
    FACT_SLOTS_PER_EPOCH, FACT_SLOT_DURATION_MS, STALLED_VOTE_PROBABILITY,
};
pub use scenario::{validate_scenarios, Scenario, ScenarioFile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulator config: {reason}")]
    InvalidConfig { reason: String },
    #[error("invalid scenario: {reason}")]
    InvalidScenario { reason: String },
    #[error("scenarios {first} and {second} overlap with contradictory effects")]
    OverlappingContradictoryScenarios { first: String, second: String },
}

/// Scenario files shipped with the crate, by name.
pub mod bundled {
    use super::{ScenarioFile, SimError};

    pub const NAMES: &[&str] = &[
        "healthy",
        "hetzner_outage",
        "appendix_a",
        "upgrade_lag",
        "censorship",
        "market_shock",
    ];

    pub fn source(name: &str) -> Option<&'static str> {
        Some(match name {
            "healthy" => include_str!("../../../../fixtures/healthy.scenario"),
            "hetzner_outage" => include_str!("../../../../fixtures/hetzner_outage.scenario"),
            "appendix_a" => include_str!("../../../../fixtures/appendix_a.scenario"),
            "upgrade_lag" => include_str!("../../../../fixtures/upgrade_lag.scenario"),
            "censorship" => include_str!("../../../../fixtures/censorship.scenario"),
            "market_shock" => include_str!("../../../../fixtures/market_shock.scenario"),
            _ => return None,
        })
    }

    pub fn load(name: &str) -> Result<ScenarioFile, SimError> {
        let text = source(name).ok_or_else(|| SimError::InvalidScenario {
            reason: format!("no bundled scenario named `{name}`"),
        })?;
        ScenarioFile::from_json(text)
    }

    /// Accepts a bundled name (with or without `.scenario`) or a file path.
    pub fn resolve(name_or_path: &str) -> Result<ScenarioFile, SimError> {
        let stem = name_or_path.trim_end_matches(".scenario");
        if source(stem).is_some() && !std::path::Path::new(name_or_path).exists() {
            return load(stem);
        }
        ScenarioFile::load(std::path::Path::new(name_or_path))
    }
}
