//! Streams a log through the KRI and alert engines the way the service does.

use std::collections::BTreeSet;

use chainrisk_core::alert::{AlertConfig, AlertEngine, AlertEvent, RuleSet};
use chainrisk_core::kri::{KriContext, KriEngine, KriRegistry, KriSample};
use chainrisk_core::telemetry::{TelemetryError, TelemetryEvent};

pub struct Replay {
    /// One entry per distinct timestamp.
    pub samples: Vec<Vec<KriSample>>,
    pub alert_events: Vec<AlertEvent>,
}

impl Replay {
    /// Rule ids that fired at least once.
    pub fn fired_rules(&self) -> BTreeSet<String> {
        self.alert_events
            .iter()
            .filter(|e| matches!(e, AlertEvent::Fired(_)))
            .map(|e| e.alert().rule_id.clone())
            .collect()
    }

    /// `(ts, value)` for `kri_id` at every tick where it was usable.
    pub fn series(&self, kri_id: &str) -> Vec<(i64, f64)> {
        self.samples
            .iter()
            .flatten()
            .filter(|s| s.kri_id == kri_id)
            .filter_map(|s| s.usable_value().map(|v| (s.ts, v)))
            .collect()
    }
}

pub fn replay(events: &[TelemetryEvent], rules: RuleSet) -> Result<Replay, TelemetryError> {
    let registry = KriRegistry::default_registry();
    let mut kri = KriEngine::new(registry.clone(), KriContext::default());
    let mut alerts = AlertEngine::new(rules, &registry, AlertConfig::default());
    let mut samples = Vec::new();
    let mut alert_events = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let ts = events[i].ts;
        while i < events.len() && events[i].ts == ts {
            kri.ingest(&events[i])?;
            i += 1;
        }
        let tick = kri.evaluate(ts);
        alert_events.extend(alerts.process_all(&tick));
        samples.push(tick);
    }
    Ok(Replay {
        samples,
        alert_events,
    })
}
