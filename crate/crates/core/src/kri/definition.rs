use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::KriError;
use crate::telemetry::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KriCategory {
    Centralisation,
    Reliability,
    Security,
    Financial,
    Regulatory,
}

impl KriCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            KriCategory::Centralisation => "centralisation",
            KriCategory::Reliability => "reliability",
            KriCategory::Security => "security",
            KriCategory::Financial => "financial",
            KriCategory::Regulatory => "regulatory",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HighIsRisky,
    LowIsRisky,
}

/// Trailing evaluation window, either in slots or wall-clock milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Slots(u64),
    Millis(u64),
}

impl Window {
    pub fn to_ms(self, slot_duration_ms: u64) -> u64 {
        match self {
            Window::Slots(n) => n * slot_duration_ms,
            Window::Millis(ms) => ms,
        }
    }

    pub fn is_positive(self) -> bool {
        match self {
            Window::Slots(n) | Window::Millis(n) => n > 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillMethod {
    CarryForward,
    LinearInterpolation,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPolicy {
    pub method: FillMethod,
    /// Longest gap, measured from the last real value, that may be filled.
    pub max_staleness_ms: u64,
}

impl GapPolicy {
    pub fn carry_forward(max_staleness_ms: u64) -> Self {
        Self {
            method: FillMethod::CarryForward,
            max_staleness_ms,
        }
    }

    pub fn validate(&self) -> Result<(), KriError> {
        if self.method != FillMethod::None && self.max_staleness_ms == 0 {
            return Err(KriError::InvalidDefinition {
                kri_id: String::new(),
                reason: "max_staleness_ms must be > 0 when filling".into(),
            });
        }
        Ok(())
    }
}

impl Default for GapPolicy {
    fn default() -> Self {
        GapPolicy::carry_forward(10_000)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KriDefinition {
    pub kri_id: String,
    pub category: KriCategory,
    pub window: Window,
    pub direction: Direction,
    #[serde(default)]
    pub gap_policy: GapPolicy,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Availability {
    #[serde(rename = "FRESH")]
    Fresh,
    #[serde(rename = "FILLED")]
    Filled,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

/// One evaluated KRI value. `UNKNOWN` samples carry no value; `FILLED`
/// samples name the method that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KriSample {
    pub kri_id: String,
    pub ts: Timestamp,
    pub value: Option<f64>,
    pub availability: Availability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill_method: Option<FillMethod>,
}

impl KriSample {
    pub fn fresh(kri_id: impl Into<String>, ts: Timestamp, value: f64) -> Self {
        Self {
            kri_id: kri_id.into(),
            ts,
            value: Some(value),
            availability: Availability::Fresh,
            fill_method: None,
        }
    }

    pub fn filled(kri_id: impl Into<String>, ts: Timestamp, value: f64, method: FillMethod) -> Self {
        Self {
            kri_id: kri_id.into(),
            ts,
            value: Some(value),
            availability: Availability::Filled,
            fill_method: Some(method),
        }
    }

    pub fn unknown(kri_id: impl Into<String>, ts: Timestamp) -> Self {
        Self {
            kri_id: kri_id.into(),
            ts,
            value: None,
            availability: Availability::Unknown,
            fill_method: None,
        }
    }

    /// The value if the sample is usable for rules and scoring.
    pub fn usable_value(&self) -> Option<f64> {
        match self.availability {
            Availability::Unknown => None,
            _ => self.value,
        }
    }
}

/// Immutable set of KRI definitions with unique ids, kept in id order.
#[derive(Clone, Debug, PartialEq)]
pub struct KriRegistry {
    definitions: Vec<KriDefinition>,
}

const DEFAULT_REGISTRY: &str = include_str!("../../../../config/registry.json");

impl KriRegistry {
    pub fn new(mut definitions: Vec<KriDefinition>) -> Result<Self, KriError> {
        definitions.sort_by(|a, b| a.kri_id.cmp(&b.kri_id));
        let mut seen = BTreeSet::new();
        for def in &definitions {
            if !seen.insert(def.kri_id.as_str()) {
                return Err(KriError::InvalidDefinition {
                    kri_id: def.kri_id.clone(),
                    reason: "duplicate kri_id".into(),
                });
            }
            if !def.window.is_positive() {
                return Err(KriError::InvalidDefinition {
                    kri_id: def.kri_id.clone(),
                    reason: "window must be > 0".into(),
                });
            }
            def.gap_policy.validate().map_err(|_| KriError::InvalidDefinition {
                kri_id: def.kri_id.clone(),
                reason: "max_staleness_ms must be > 0 when filling".into(),
            })?;
            if !super::catalog::is_known(&def.kri_id) {
                return Err(KriError::UnknownKri(def.kri_id.clone()));
            }
        }
        Ok(Self { definitions })
    }

    pub fn from_json(text: &str) -> Result<Self, KriError> {
        let defs: Vec<KriDefinition> =
            serde_json::from_str(text).map_err(|e| KriError::InvalidDefinition {
                kri_id: String::new(),
                reason: e.to_string(),
            })?;
        Self::new(defs)
    }

    /// Registry covering every KRI in the catalog.
    pub fn default_registry() -> Self {
        Self::from_json(DEFAULT_REGISTRY).expect("bundled registry is valid")
    }

    pub fn definitions(&self) -> &[KriDefinition] {
        &self.definitions
    }

    pub fn get(&self, kri_id: &str) -> Option<&KriDefinition> {
        self.definitions
            .binary_search_by(|d| d.kri_id.as_str().cmp(kri_id))
            .ok()
            .map(|i| &self.definitions[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.definitions).expect("definitions serialize")
    }
}
