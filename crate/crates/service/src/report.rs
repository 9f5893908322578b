//! Compliance reports computed purely from audit entries.

use std::collections::BTreeMap;

use chainrisk_core::alert::Alert;
use chainrisk_core::kri::KriSample;
use chainrisk_core::scoring::RiskScore;
use chainrisk_core::telemetry::Timestamp;
use serde::{Deserialize, Serialize};

use crate::audit::{AuditEntry, AuditKind};
use crate::MitigationAction;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("report period must satisfy from < to (got {from}..{to})")]
    InvalidPeriod { from: Timestamp, to: Timestamp },
    #[error("audit entry {seq} has a malformed {kind:?} payload: {reason}")]
    MalformedEntry {
        seq: u64,
        kind: AuditKind,
        reason: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KriStats {
    pub samples: u64,
    pub usable: u64,
    pub availability_pct: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub seq: u64,
    pub ts: Timestamp,
    pub kind: AuditKind,
    pub alert_id: String,
    pub rule_id: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlertSummary {
    pub fired: u64,
    pub acknowledged: u64,
    pub resolved: u64,
    /// Over acknowledgments in the period, measured from the firing time.
    pub mean_time_to_ack_ms: Option<f64>,
    pub timeline: Vec<TimelineEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: u64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub last: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub from: Timestamp,
    pub to: Timestamp,
    pub entries: u64,
    pub kris: BTreeMap<String, KriStats>,
    pub alerts: AlertSummary,
    pub actions: Vec<MitigationAction>,
    pub rule_changes: u64,
    pub scenarios_injected: u64,
    pub score: ScoreSummary,
}

fn decode<T: serde::de::DeserializeOwned>(e: &AuditEntry) -> Result<T, ReportError> {
    serde_json::from_value(e.payload.clone()).map_err(|err| ReportError::MalformedEntry {
        seq: e.seq,
        kind: e.kind,
        reason: err.to_string(),
    })
}

#[derive(Default)]
struct Running {
    n: u64,
    sum: f64,
    min: Option<f64>,
    max: Option<f64>,
}

impl Running {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.min = Some(self.min.map_or(v, |m| m.min(v)));
        self.max = Some(self.max.map_or(v, |m| m.max(v)));
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Summarizes entries whose event time lies in `[from, to)`. An empty
/// period yields a zeroed report.
pub fn generate_report(
    entries: &[AuditEntry],
    from: Timestamp,
    to: Timestamp,
) -> Result<Report, ReportError> {
    if from >= to {
        return Err(ReportError::InvalidPeriod { from, to });
    }
    let mut kri_values: BTreeMap<String, (u64, Running)> = BTreeMap::new();
    let mut alerts = AlertSummary::default();
    let mut ack_delay = Running::default();
    let mut actions = Vec::new();
    let mut rule_changes = 0;
    let mut scenarios_injected = 0;
    let mut score = Running::default();
    let mut last_score = None;
    let mut count = 0;

    for e in entries.iter().filter(|e| e.ts >= from && e.ts < to) {
        count += 1;
        match e.kind {
            AuditKind::KriSample => {
                let s: KriSample = decode(e)?;
                let slot = kri_values.entry(s.kri_id.clone()).or_default();
                slot.0 += 1;
                if let Some(v) = s.usable_value() {
                    slot.1.push(v);
                }
            }
            AuditKind::AlertFired | AuditKind::AlertAcknowledged | AuditKind::AlertResolved => {
                let a: Alert = decode(e)?;
                match e.kind {
                    AuditKind::AlertFired => alerts.fired += 1,
                    AuditKind::AlertAcknowledged => {
                        alerts.acknowledged += 1;
                        if let Some(at) = a.acknowledged_at {
                            ack_delay.push((at - a.fired_at) as f64);
                        }
                    }
                    _ => alerts.resolved += 1,
                }
                alerts.timeline.push(TimelineEntry {
                    seq: e.seq,
                    ts: e.ts,
                    kind: e.kind,
                    alert_id: a.alert_id,
                    rule_id: a.rule_id,
                });
            }
            AuditKind::ActionRecorded => actions.push(decode(e)?),
            AuditKind::RuleChanged => rule_changes += 1,
            AuditKind::ScenarioInjected => scenarios_injected += 1,
            AuditKind::ScoreComputed => {
                let s: RiskScore = decode(e)?;
                score.push(s.total);
                last_score = Some(s.total);
            }
        }
    }
    alerts.mean_time_to_ack_ms = ack_delay.mean();

    let kris = kri_values
        .into_iter()
        .map(|(id, (samples, r))| {
            let stats = KriStats {
                samples,
                usable: r.n,
                availability_pct: r.n as f64 / samples as f64 * 100.0,
                min: r.min,
                max: r.max,
                mean: r.mean(),
            };
            (id, stats)
        })
        .collect();

    Ok(Report {
        from,
        to,
        entries: count,
        kris,
        alerts,
        actions,
        rule_changes,
        scenarios_injected,
        score: ScoreSummary {
            count: score.n,
            min: score.min,
            max: score.max,
            mean: score.mean(),
            last: last_score,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chainrisk_core::alert::{AlertState, Severity};

    fn alert(id: &str, state: AlertState, acked: Option<i64>) -> Alert {
        Alert {
            alert_id: id.into(),
            rule_id: "tps".into(),
            kri_id: "tps".into(),
            severity: Severity::Crucial,
            fired_at: 100,
            value: Some(70.0),
            state,
            acknowledged_by: acked.map(|_| "ops".into()),
            acknowledged_at: acked,
            resolution_at: None,
            notes: vec![],
        }
    }

    fn entry(seq: u64, ts: i64, kind: AuditKind, payload: &impl Serialize) -> AuditEntry {
        AuditEntry {
            seq,
            ts,
            kind,
            payload: serde_json::to_value(payload).unwrap(),
            actor: None,
            recorded_at: 0,
        }
    }

    #[test]
    fn counts_fired_and_acknowledged() {
        let mut log = Vec::new();
        for i in 0..3 {
            let a = alert(&format!("alert-{i}"), AlertState::Active, None);
            log.push(entry(i + 1, 100, AuditKind::AlertFired, &a));
        }
        log.push(entry(4, 300, AuditKind::AlertAcknowledged, &alert("alert-0", AlertState::Acknowledged, Some(300))));
        log.push(entry(5, 500, AuditKind::AlertAcknowledged, &alert("alert-1", AlertState::Acknowledged, Some(500))));
        let r = generate_report(&log, 0, 1_000).unwrap();
        assert_eq!((r.alerts.fired, r.alerts.acknowledged), (3, 2));
        assert_eq!(r.alerts.mean_time_to_ack_ms, Some(300.0));
        assert_eq!(r.alerts.timeline.len(), 5);
    }

    #[test]
    fn empty_period_is_zeroed() {
        let r = generate_report(&[], 0, 10).unwrap();
        assert_eq!(r.entries, 0);
        assert!(r.kris.is_empty() && r.actions.is_empty());
        assert_eq!(r.alerts, AlertSummary::default());
        assert_eq!(
            generate_report(&[], 10, 10),
            Err(ReportError::InvalidPeriod { from: 10, to: 10 })
        );
    }

    #[test]
    fn kri_stats_track_availability() {
        let log = vec![
            entry(1, 0, AuditKind::KriSample, &KriSample::fresh("tps", 0, 100.0)),
            entry(2, 1, AuditKind::KriSample, &KriSample::unknown("tps", 1)),
            entry(3, 2, AuditKind::KriSample, &KriSample::fresh("tps", 2, 50.0)),
        ];
        let s = &generate_report(&log, 0, 3).unwrap().kris["tps"];
        assert_eq!((s.samples, s.usable), (3, 2));
        assert_eq!(s.mean, Some(75.0));
        assert!((s.availability_pct - 200.0 / 3.0).abs() < 1e-12);
    }
}
