//! Alert lifecycle: firing, hysteresis-based resolution, acknowledgment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::eval::ConditionState;
use super::rule::{AlertRule, Condition, KriTarget, RuleSet, Severity};
use super::AlertError;
use crate::kri::{Direction, KriRegistry, KriSample};
use crate::telemetry::Timestamp;

/// Prefix of the built-in rules raised when a KRI stays `UNKNOWN`.
pub const STALENESS_PREFIX: &str = "staleness.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertState {
    Active,
    Acknowledged,
    Resolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: String,
    pub rule_id: String,
    pub kri_id: String,
    pub severity: Severity,
    pub fired_at: Timestamp,
    /// Sample value that fired the rule; staleness alerts carry none.
    pub value: Option<f64>,
    pub state: AlertState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acknowledged_by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acknowledged_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_at: Option<Timestamp>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Alert {
    pub fn is_open(&self) -> bool {
        self.state != AlertState::Resolved
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AlertEvent {
    Fired(Alert),
    Acknowledged(Alert),
    Resolved(Alert),
}

impl AlertEvent {
    pub fn alert(&self) -> &Alert {
        match self {
            AlertEvent::Fired(a) | AlertEvent::Acknowledged(a) | AlertEvent::Resolved(a) => a,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct RuleState {
    condition: ConditionState,
    clear_run: u32,
}

#[derive(Clone, Debug, Default)]
struct Staleness {
    unknown_since: Option<Timestamp>,
}

/// Engine settings independent of any one rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlertConfig {
    /// Samples before `origin + warmup_ms` build history but never fire.
    pub warmup_ms: u64,
}

impl Default for AlertConfig {
    fn default() -> Self {
        // One default epoch: 32 slots of 400 ms.
        Self { warmup_ms: 12_800 }
    }
}

#[derive(Clone, Debug)]
pub struct AlertEngine {
    rules: RuleSet,
    config: AlertConfig,
    directions: BTreeMap<String, Direction>,
    max_staleness: BTreeMap<String, u64>,
    states: BTreeMap<String, RuleState>,
    staleness: BTreeMap<String, Staleness>,
    alerts: Vec<Alert>,
    open_by_rule: BTreeMap<String, usize>,
    next_seq: u64,
    origin: Option<Timestamp>,
}

impl AlertEngine {
    pub fn new(rules: RuleSet, registry: &KriRegistry, config: AlertConfig) -> Self {
        let directions = registry
            .definitions()
            .iter()
            .map(|d| (d.kri_id.clone(), d.direction))
            .collect();
        let max_staleness = registry
            .definitions()
            .iter()
            .map(|d| (d.kri_id.clone(), d.gap_policy.max_staleness_ms.max(1)))
            .collect();
        Self {
            rules,
            config,
            directions,
            max_staleness,
            states: BTreeMap::new(),
            staleness: BTreeMap::new(),
            alerts: Vec::new(),
            open_by_rule: BTreeMap::new(),
            next_seq: 1,
            origin: None,
        }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn config(&self) -> &AlertConfig {
        &self.config
    }

    /// Every alert ever raised, in firing order.
    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn get(&self, alert_id: &str) -> Option<&Alert> {
        self.find(alert_id).map(|i| &self.alerts[i])
    }

    pub fn open_alerts(&self) -> impl Iterator<Item = &Alert> {
        self.alerts.iter().filter(|a| a.is_open())
    }

    fn find(&self, alert_id: &str) -> Option<usize> {
        // Ids are assigned in order, so the numeric suffix is the position.
        let seq: usize = alert_id.strip_prefix("alert-")?.parse().ok()?;
        let i = seq.checked_sub(1)?;
        (self.alerts.get(i)?.alert_id == alert_id).then_some(i)
    }

    /// Swaps in a new ruleset. Rules whose definition is unchanged keep
    /// their history; open alerts of removed rules are resolved at `at`.
    pub fn set_rules(&mut self, rules: RuleSet, at: Timestamp) -> Vec<AlertEvent> {
        let mut events = Vec::new();
        let old = std::mem::replace(&mut self.rules, rules);
        for rule in &old.rules {
            match self.rules.get(&rule.rule_id) {
                Some(new) if new == rule => {}
                Some(_) => {
                    self.states.remove(&rule.rule_id);
                }
                None => {
                    self.states.remove(&rule.rule_id);
                    if let Some(i) = self.open_by_rule.remove(&rule.rule_id) {
                        let a = &mut self.alerts[i];
                        a.state = AlertState::Resolved;
                        a.resolution_at = Some(at);
                        a.notes.push("rule removed".into());
                        events.push(AlertEvent::Resolved(a.clone()));
                    }
                }
            }
        }
        events
    }

    fn fire(
        &mut self,
        rule_id: &str,
        kri_id: String,
        severity: Severity,
        at: Timestamp,
        value: Option<f64>,
    ) -> AlertEvent {
        let alert = Alert {
            alert_id: format!("alert-{:06}", self.next_seq),
            rule_id: rule_id.into(),
            kri_id,
            severity,
            fired_at: at,
            value,
            state: AlertState::Active,
            acknowledged_by: None,
            acknowledged_at: None,
            resolution_at: None,
            notes: Vec::new(),
        };
        self.next_seq += 1;
        self.open_by_rule.insert(rule_id.into(), self.alerts.len());
        self.alerts.push(alert.clone());
        AlertEvent::Fired(alert)
    }

    fn resolve_open(&mut self, rule_id: &str, at: Timestamp) -> Option<AlertEvent> {
        let i = self.open_by_rule.remove(rule_id)?;
        let a = &mut self.alerts[i];
        a.state = AlertState::Resolved;
        a.resolution_at = Some(at);
        Some(AlertEvent::Resolved(a.clone()))
    }

    /// Feeds one sample to every rule watching its KRI, in rule order.
    pub fn process(&mut self, sample: &KriSample) -> Vec<AlertEvent> {
        let origin = *self.origin.get_or_insert(sample.ts);
        let warm = sample.ts >= origin + self.config.warmup_ms as i64;
        let mut events = Vec::new();
        let risky = self
            .directions
            .get(&sample.kri_id)
            .copied()
            .unwrap_or(Direction::HighIsRisky);

        let watching: Vec<AlertRule> = self
            .rules
            .rules
            .iter()
            .filter(|r| r.kri_id.ids().contains(&sample.kri_id.as_str()))
            .cloned()
            .collect();
        if watching.is_empty() {
            return events;
        }
        self.track_staleness(sample, warm, &mut events);

        let Some(value) = sample.usable_value() else {
            return events;
        };
        for rule in &watching {
            let state = self.states.entry(rule.rule_id.clone()).or_default();
            let verdict = match (&rule.condition, &rule.kri_id) {
                (Condition::Correlation { a, b, within_ms }, KriTarget::Pair([first, _])) => {
                    let leg_is_a = *first == sample.kri_id;
                    state
                        .condition
                        .eval_correlation(a, b, *within_ms, leg_is_a, sample.ts, value, risky)
                }
                (cond, _) => state.condition.eval_value(cond, value, risky),
            };
            match verdict {
                Some(true) => state.clear_run = 0,
                Some(false) => state.clear_run += 1,
                None => {}
            }
            let clear_run = state.clear_run;
            match verdict {
                Some(true) if warm && !self.open_by_rule.contains_key(&rule.rule_id) => {
                    let label = rule.kri_id.label();
                    events.push(self.fire(&rule.rule_id, label, rule.severity, sample.ts, Some(value)));
                }
                Some(false) if clear_run >= rule.hysteresis_clear_n => {
                    events.extend(self.resolve_open(&rule.rule_id, sample.ts));
                }
                _ => {}
            }
        }
        events
    }

    fn track_staleness(&mut self, sample: &KriSample, warm: bool, events: &mut Vec<AlertEvent>) {
        let rule_id = format!("{STALENESS_PREFIX}{}", sample.kri_id);
        let limit = self.max_staleness.get(&sample.kri_id).copied().unwrap_or(u64::MAX);
        let st = self.staleness.entry(sample.kri_id.clone()).or_default();
        if sample.usable_value().is_some() {
            st.unknown_since = None;
            if let Some(ev) = self.resolve_open(&rule_id, sample.ts) {
                events.push(ev);
            }
            return;
        }
        let since = *st.unknown_since.get_or_insert(sample.ts);
        if warm && (sample.ts - since) as u64 > limit && !self.open_by_rule.contains_key(&rule_id) {
            let fired = self.fire(&rule_id, sample.kri_id.clone(), Severity::Warning, sample.ts, None);
            events.push(fired);
        }
    }

    pub fn process_all(&mut self, samples: &[KriSample]) -> Vec<AlertEvent> {
        samples.iter().flat_map(|s| self.process(s)).collect()
    }

    pub fn acknowledge(
        &mut self,
        alert_id: &str,
        actor: &str,
        note: &str,
        at: Timestamp,
    ) -> Result<Alert, AlertError> {
        if actor.trim().is_empty() {
            return Err(AlertError::EmptyActor);
        }
        let i = self
            .find(alert_id)
            .ok_or_else(|| AlertError::UnknownAlert(alert_id.into()))?;
        let a = &mut self.alerts[i];
        if a.state != AlertState::Active {
            return Err(AlertError::InvalidTransition {
                alert_id: alert_id.into(),
                from: a.state,
                to: AlertState::Acknowledged,
            });
        }
        a.state = AlertState::Acknowledged;
        a.acknowledged_by = Some(actor.into());
        a.acknowledged_at = Some(at);
        if !note.is_empty() {
            a.notes.push(note.into());
        }
        Ok(a.clone())
    }
}
