//! Scripted fault injections and the scenario file format.

use serde::{Deserialize, Serialize};

use super::{SimConfig, SimError};

/// One fault. Windowed kinds are active on slots `start_slot..end_slot`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Scenario {
    /// Every validator hosted by `provider` goes offline.
    ProviderOutage {
        provider: String,
        start_slot: u64,
        end_slot: u64,
    },
    /// Votes stop counting towards quorum fast enough and CPU saturates.
    FinalityStall {
        start_slot: u64,
        end_slot: u64,
        cpu_spike_pct: f64,
    },
    /// From `start_slot` only `adoption_fraction` of validators run `new_version`.
    UpgradeLag {
        new_version: String,
        adoption_fraction: f64,
        start_slot: u64,
    },
    /// Block producers withhold transactions from `source_tag`.
    Censorship {
        source_tag: String,
        start_slot: u64,
        end_slot: u64,
    },
    /// Price jumps by `pct_change` percent at `slot`.
    MarketShock { slot: u64, pct_change: f64 },
    /// `fraction` of validators stop voting.
    VoteDegradation {
        fraction: f64,
        start_slot: u64,
        end_slot: u64,
    },
}

impl Scenario {
    /// Slot range over which the scenario is in effect (end exclusive).
    pub fn active_range(&self) -> (u64, u64) {
        match self {
            Scenario::ProviderOutage {
                start_slot,
                end_slot,
                ..
            }
            | Scenario::FinalityStall {
                start_slot,
                end_slot,
                ..
            }
            | Scenario::Censorship {
                start_slot,
                end_slot,
                ..
            }
            | Scenario::VoteDegradation {
                start_slot,
                end_slot,
                ..
            } => (*start_slot, *end_slot),
            Scenario::UpgradeLag { start_slot, .. } => (*start_slot, u64::MAX),
            Scenario::MarketShock { slot, .. } => (*slot, slot.saturating_add(1)),
        }
    }

    pub fn is_active(&self, slot: u64) -> bool {
        let (s, e) = self.active_range();
        s <= slot && slot < e
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ProviderOutage { .. } => "ProviderOutage",
            Scenario::FinalityStall { .. } => "FinalityStall",
            Scenario::UpgradeLag { .. } => "UpgradeLag",
            Scenario::Censorship { .. } => "Censorship",
            Scenario::MarketShock { .. } => "MarketShock",
            Scenario::VoteDegradation { .. } => "VoteDegradation",
        }
    }

    /// Moves every slot reference forward by `offset`.
    pub fn shifted(&self, offset: u64) -> Scenario {
        let mut s = self.clone();
        match &mut s {
            Scenario::ProviderOutage {
                start_slot,
                end_slot,
                ..
            }
            | Scenario::FinalityStall {
                start_slot,
                end_slot,
                ..
            }
            | Scenario::Censorship {
                start_slot,
                end_slot,
                ..
            }
            | Scenario::VoteDegradation {
                start_slot,
                end_slot,
                ..
            } => {
                *start_slot += offset;
                *end_slot += offset;
            }
            Scenario::UpgradeLag { start_slot, .. } => *start_slot += offset,
            Scenario::MarketShock { slot, .. } => *slot += offset,
        }
        s
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |reason: String| Err(SimError::InvalidScenario { reason });
        let (start, end) = self.active_range();
        if start > end {
            return bad(format!("{}: start_slot after end_slot", self.name()));
        }
        match self {
            Scenario::FinalityStall { cpu_spike_pct, .. }
                if !(0.0..=100.0).contains(cpu_spike_pct) =>
            {
                bad("FinalityStall: cpu_spike_pct outside [0,100]".into())
            }
            Scenario::UpgradeLag {
                adoption_fraction,
                new_version,
                ..
            } => {
                if !(0.0..=1.0).contains(adoption_fraction) {
                    return bad("UpgradeLag: adoption_fraction outside [0,1]".into());
                }
                if semver::Version::parse(new_version).is_err() {
                    return bad(format!("UpgradeLag: `{new_version}` is not a semantic version"));
                }
                Ok(())
            }
            Scenario::VoteDegradation { fraction, .. } if !(0.0..=1.0).contains(fraction) => {
                bad("VoteDegradation: fraction outside [0,1]".into())
            }
            Scenario::MarketShock { pct_change, .. }
                if !(pct_change.is_finite() && *pct_change > -100.0) =>
            {
                bad("MarketShock: pct_change must exceed -100".into())
            }
            _ => Ok(()),
        }
    }
}

fn overlaps(a: (u64, u64), b: (u64, u64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Validates each scenario and rejects pairs that would drive the same
/// effect to two different values at once.
pub fn validate_scenarios(scenarios: &[Scenario]) -> Result<(), SimError> {
    for s in scenarios {
        s.validate()?;
    }
    for (i, a) in scenarios.iter().enumerate() {
        for b in &scenarios[i + 1..] {
            let clash = match (a, b) {
                (
                    Scenario::FinalityStall { cpu_spike_pct: x, .. },
                    Scenario::FinalityStall { cpu_spike_pct: y, .. },
                ) => x != y && overlaps(a.active_range(), b.active_range()),
                (
                    Scenario::VoteDegradation { fraction: x, .. },
                    Scenario::VoteDegradation { fraction: y, .. },
                ) => x != y && overlaps(a.active_range(), b.active_range()),
                (
                    Scenario::UpgradeLag {
                        new_version: va,
                        adoption_fraction: fa,
                        start_slot: sa,
                    },
                    Scenario::UpgradeLag {
                        new_version: vb,
                        adoption_fraction: fb,
                        start_slot: sb,
                    },
                ) => sa == sb && (va != vb || fa != fb),
                (
                    Scenario::MarketShock { slot: sa, pct_change: pa },
                    Scenario::MarketShock { slot: sb, pct_change: pb },
                ) => sa == sb && pa != pb,
                _ => false,
            };
            if clash {
                return Err(SimError::OverlappingContradictoryScenarios {
                    first: a.name().into(),
                    second: b.name().into(),
                });
            }
        }
    }
    Ok(())
}

/// Scenario file: a name, simulator overrides and the fault script.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub config: SimConfig,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    /// Suggested run length.
    #[serde(default)]
    pub slots: Option<u64>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| SimError::InvalidScenario {
                reason: e.to_string(),
            })?;
        file.config.validate()?;
        validate_scenarios(&file.scenarios)?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::InvalidScenario {
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let s: Scenario = serde_json::from_str(
            r#"{"kind":"ProviderOutage","provider":"hetzner","start_slot":3,"end_slot":9}"#,
        )
        .unwrap();
        assert!(s.is_active(3) && s.is_active(8) && !s.is_active(9));
    }

    #[test]
    fn contradictory_overlap_is_rejected() {
        let a = Scenario::FinalityStall {
            start_slot: 0,
            end_slot: 10,
            cpu_spike_pct: 90.0,
        };
        let b = Scenario::FinalityStall {
            start_slot: 5,
            end_slot: 20,
            cpu_spike_pct: 50.0,
        };
        assert!(matches!(
            validate_scenarios(&[a.clone(), b.clone()]),
            Err(SimError::OverlappingContradictoryScenarios { .. })
        ));
        let later = b.shifted(5);
        validate_scenarios(&[a, later]).unwrap();
    }

    #[test]
    fn inverted_window_is_rejected() {
        let s = Scenario::Censorship {
            source_tag: "a".into(),
            start_slot: 9,
            end_slot: 3,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn partial_config_merges_with_defaults() {
        let f = ScenarioFile::from_json(r#"{"name":"x","config":{"seed":7}}"#).unwrap();
        assert_eq!(f.config.seed, 7);
        assert_eq!(f.config.validator_count, SimConfig::default().validator_count);
    }
}
