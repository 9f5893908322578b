use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::AlertError;
use crate::kri::{Direction, KriRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Crucial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Lt => value < bound,
            Comparator::Le => value <= bound,
            Comparator::Gt => value > bound,
            Comparator::Ge => value >= bound,
            Comparator::Eq => value == bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "==",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    StaticThreshold {
        comparator: Comparator,
        bound: f64,
    },
    /// Fires when the value leaves `mean ± k·std` of the previous `window_n` samples.
    MovingAverageBand { window_n: usize, k: f64 },
    /// Least-squares slope per sample over the latest `window_n` samples.
    /// Without an explicit direction the KRI's risky direction is used.
    Trend {
        window_n: usize,
        slope_bound: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Direction>,
    },
    /// Fires when `|z| > z_bound` against the previous `window_n` samples.
    Anomaly { window_n: usize, z_bound: f64 },
    /// Both sub-conditions held, on their respective KRIs, within `within_ms`.
    Correlation {
        a: Box<Condition>,
        b: Box<Condition>,
        within_ms: u64,
    },
}

impl Condition {
    pub fn kind(&self) -> &'static str {
        match self {
            Condition::StaticThreshold { .. } => "static_threshold",
            Condition::MovingAverageBand { .. } => "moving_average_band",
            Condition::Trend { .. } => "trend",
            Condition::Anomaly { .. } => "anomaly",
            Condition::Correlation { .. } => "correlation",
        }
    }

    fn validate(&self, nested: bool) -> Result<(), String> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match self {
            Condition::StaticThreshold { bound, .. } => finite(*bound, "bound"),
            Condition::MovingAverageBand { window_n, k } => {
                if *window_n < 2 {
                    return Err("window_n must be >= 2".into());
                }
                finite(*k, "k")?;
                if *k < 0.0 {
                    return Err("k must be >= 0".into());
                }
                Ok(())
            }
            Condition::Trend {
                window_n,
                slope_bound,
                ..
            } => {
                if *window_n < 2 {
                    return Err("window_n must be >= 2".into());
                }
                finite(*slope_bound, "slope_bound")
            }
            Condition::Anomaly { window_n, z_bound } => {
                if *window_n < 2 {
                    return Err("window_n must be >= 2".into());
                }
                finite(*z_bound, "z_bound")?;
                if *z_bound <= 0.0 {
                    return Err("z_bound must be > 0".into());
                }
                Ok(())
            }
            Condition::Correlation { a, b, within_ms } => {
                if nested {
                    return Err("correlation conditions cannot be nested".into());
                }
                if *within_ms == 0 {
                    return Err("within_ms must be > 0".into());
                }
                a.validate(true)?;
                b.validate(true)
            }
        }
    }
}

/// The KRI a rule watches, or the ordered pair for a correlation rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KriTarget {
    Single(String),
    Pair([String; 2]),
}

impl KriTarget {
    pub fn ids(&self) -> Vec<&str> {
        match self {
            KriTarget::Single(id) => vec![id.as_str()],
            KriTarget::Pair([a, b]) => vec![a.as_str(), b.as_str()],
        }
    }

    pub fn label(&self) -> String {
        self.ids().join("+")
    }
}

fn default_hysteresis() -> u32 {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlertRule {
    pub rule_id: String,
    pub kri_id: KriTarget,
    pub severity: Severity,
    pub condition: Condition,
    /// Consecutive non-firing samples that auto-resolve an open alert.
    #[serde(default = "default_hysteresis")]
    pub hysteresis_clear_n: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl AlertRule {
    pub fn static_threshold(
        rule_id: impl Into<String>,
        kri_id: impl Into<String>,
        severity: Severity,
        comparator: Comparator,
        bound: f64,
    ) -> Self {
        Self {
            rule_id: rule_id.into(),
            kri_id: KriTarget::Single(kri_id.into()),
            severity,
            condition: Condition::StaticThreshold { comparator, bound },
            hysteresis_clear_n: default_hysteresis(),
            description: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), AlertError> {
        let invalid = |reason: String| AlertError::InvalidRule {
            rule_id: self.rule_id.clone(),
            reason,
        };
        if self.rule_id.trim().is_empty() {
            return Err(invalid("rule_id is empty".into()));
        }
        if self.hysteresis_clear_n == 0 {
            return Err(invalid("hysteresis_clear_n must be >= 1".into()));
        }
        match (&self.condition, &self.kri_id) {
            (Condition::Correlation { .. }, KriTarget::Single(_)) => {
                return Err(invalid("correlation rules need a pair of kri ids".into()))
            }
            (Condition::Correlation { .. }, KriTarget::Pair([a, b])) if a == b => {
                return Err(invalid("correlation needs two distinct kri ids".into()))
            }
            (c, KriTarget::Pair(_)) if !matches!(c, Condition::Correlation { .. }) => {
                return Err(invalid("only correlation rules take a kri id pair".into()))
            }
            _ => {}
        }
        self.condition.validate(false).map_err(invalid)
    }
}

/// Parses a ruleset file: a JSON list of rules.
pub fn parse_rules(text: &str) -> Result<Vec<AlertRule>, AlertError> {
    serde_json::from_str(text).map_err(|e| AlertError::InvalidRule {
        rule_id: String::new(),
        reason: e.to_string(),
    })
}

/// A validated, versioned ruleset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub version: u64,
    pub rules: Vec<AlertRule>,
}

const DEFAULT_RULES: &str = include_str!("../../../../config/default.rules");
const TABLE1_RULES: &str = include_str!("../../../../config/table1_defaults.rules");

impl RuleSet {
    pub fn new(rules: Vec<AlertRule>, version: u64) -> Result<Self, AlertError> {
        let mut seen = BTreeSet::new();
        for rule in &rules {
            rule.validate()?;
            if !seen.insert(rule.rule_id.as_str()) {
                return Err(AlertError::InvalidRule {
                    rule_id: rule.rule_id.clone(),
                    reason: "duplicate rule_id".into(),
                });
            }
        }
        Ok(Self { version, rules })
    }

    pub fn from_json(text: &str) -> Result<Self, AlertError> {
        Self::new(parse_rules(text)?, 1)
    }

    /// Indicator-table conditions plus finality and censorship rules.
    pub fn default_rules() -> Self {
        Self::from_json(DEFAULT_RULES).expect("bundled default rules are valid")
    }

    /// Exactly the indicator-table alerting conditions.
    pub fn table1() -> Self {
        Self::from_json(TABLE1_RULES).expect("bundled indicator-table rules are valid")
    }

    /// Rejects rules that reference KRIs missing from `registry`.
    pub fn check_against(&self, registry: &KriRegistry) -> Result<(), AlertError> {
        for rule in &self.rules {
            for id in rule.kri_id.ids() {
                if registry.get(id).is_none() {
                    return Err(AlertError::InvalidRule {
                        rule_id: rule.rule_id.clone(),
                        reason: format!("unknown kri_id `{id}`"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Successor ruleset with `rules` and the version bumped by one.
    pub fn replaced(&self, rules: Vec<AlertRule>) -> Result<Self, AlertError> {
        Self::new(rules, self.version + 1)
    }

    pub fn get(&self, rule_id: &str) -> Option<&AlertRule> {
        self.rules.iter().find(|r| r.rule_id == rule_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rules).expect("rules serialize")
    }
}
