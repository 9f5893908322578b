//! The processing loop: telemetry source, KRI engine, alert engine, scorer
//! and audit log, owned by a single thread.
//!
//! [`Pipeline`] is the synchronous core and can be driven directly.
//! [`spawn`] moves it onto its own thread and returns a [`PipelineHandle`]
//! through which the API reads consistent snapshots and submits mutations.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};
use std::thread::JoinHandle;
use std::time::Duration;

use chainrisk_core::alert::{
    route, Alert, AlertConfig, AlertEngine, AlertError, AlertEvent, AlertRule, RetryPolicy,
    RuleSet, Sink,
};
use chainrisk_core::kri::{KriContext, KriDefinition, KriEngine, KriRegistry, KriSample};
use chainrisk_core::scoring::{NormSpec, RiskScore, RiskWeights, Scorer, ScoringError};
use chainrisk_core::sim::{Scenario, SimError, Simulation};
use chainrisk_core::telemetry::{TelemetryError, TelemetryEvent, Timestamp};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{broadcast, oneshot};

use crate::audit::{AuditEntry, AuditError, AuditKind, AuditLog};
use crate::MitigationAction;

/// Samples kept per KRI for series queries.
const SERIES_CAPACITY: usize = 100_000;
/// Ticks between state snapshots.
const SNAPSHOT_EVERY: u64 = 32;
pub const SYSTEM_ACTOR: &str = "system";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("scenario injection requires a simulated source")]
    NotSimulating,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("pipeline is not running")]
    Stopped,
}

pub enum Source {
    /// Live simulation, optionally bounded to a number of slots.
    Simulate {
        sim: Box<Simulation>,
        slots: Option<u64>,
    },
    Replay {
        events: Vec<TelemetryEvent>,
        pos: usize,
    },
}

impl Source {
    pub fn simulate(sim: Simulation, slots: Option<u64>) -> Self {
        Source::Simulate {
            sim: Box::new(sim),
            slots,
        }
    }

    pub fn replay(events: Vec<TelemetryEvent>) -> Self {
        Source::Replay { events, pos: 0 }
    }

    pub fn mode(&self) -> SourceMode {
        match self {
            Source::Simulate { .. } => SourceMode::Simulate,
            Source::Replay { .. } => SourceMode::Replay,
        }
    }

    /// Events sharing the next timestamp, or `None` once exhausted.
    fn next_tick(&mut self) -> Option<Vec<TelemetryEvent>> {
        match self {
            Source::Simulate { sim, slots } => {
                if slots.is_some_and(|n| sim.state().current_slot >= n) {
                    return None;
                }
                Some(sim.step())
            }
            Source::Replay { events, pos } => {
                let first = events.get(*pos)?;
                let ts = first.ts;
                let end = events[*pos..]
                    .iter()
                    .position(|e| e.ts != ts)
                    .map_or(events.len(), |n| *pos + n);
                let tick = events[*pos..end].to_vec();
                *pos = end;
                Some(tick)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Simulate,
    Replay,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub registry: KriRegistry,
    pub context: KriContext,
    pub rules: RuleSet,
    pub norms: Vec<NormSpec>,
    pub weights: RiskWeights,
    pub alert: AlertConfig,
    pub sinks: Vec<Sink>,
    pub retry: RetryPolicy,
    /// Where `state.json` snapshots go; none when unset.
    pub snapshot_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            registry: KriRegistry::default_registry(),
            context: KriContext::default(),
            rules: RuleSet::default_rules(),
            norms: chainrisk_core::scoring::default_norms(),
            weights: RiskWeights::equal(),
            alert: AlertConfig::default(),
            sinks: Vec::new(),
            retry: RetryPolicy::default(),
            snapshot_path: None,
        }
    }
}

/// One server-sent event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    /// `kri_sample`, `alert` or `score`.
    pub event: String,
    pub data: Value,
}

/// What API readers see. Replaced piecewise at the end of every tick and
/// command, always under one write lock.
#[derive(Clone, Debug, Serialize)]
pub struct QueryState {
    pub mode: SourceMode,
    pub now: Option<Timestamp>,
    pub ticks: u64,
    pub exhausted: bool,
    pub definitions: Vec<KriDefinition>,
    pub latest: BTreeMap<String, KriSample>,
    #[serde(skip)]
    pub series: BTreeMap<String, VecDeque<KriSample>>,
    pub alerts: Vec<Alert>,
    pub rules: RuleSet,
    pub score: Option<RiskScore>,
}

impl QueryState {
    pub fn series(&self, kri_id: &str, from: Option<Timestamp>, to: Option<Timestamp>) -> Vec<KriSample> {
        self.series
            .get(kri_id)
            .map(|s| {
                s.iter()
                    .filter(|x| from.is_none_or(|f| x.ts >= f) && to.is_none_or(|t| x.ts <= t))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Changes to the active ruleset. `rules`, when present, replaces the whole
/// set before `upsert` and `remove` are applied.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleUpdate {
    pub rules: Option<Vec<AlertRule>>,
    pub upsert: Vec<AlertRule>,
    pub remove: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub actor: String,
    #[serde(default)]
    pub alert_id: Option<String>,
    pub action_type: String,
    #[serde(default)]
    pub note: String,
}

/// Persisted between runs so rule edits survive a restart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub now: Option<Timestamp>,
    pub next_audit_seq: u64,
    pub rules: RuleSet,
    pub alerts: Vec<Alert>,
    pub score: Option<RiskScore>,
}

impl Snapshot {
    pub fn load(path: &Path) -> Option<Snapshot> {
        let text = std::fs::read_to_string(path).ok()?;
        serde_json::from_str(&text)
            .map_err(|e| tracing::warn!(path = %path.display(), "ignoring unreadable snapshot: {e}"))
            .ok()
    }
}

pub struct Pipeline {
    kri: KriEngine,
    alerts: AlertEngine,
    scorer: Scorer,
    registry: KriRegistry,
    source: Source,
    audit: Arc<RwLock<AuditLog>>,
    state: Arc<RwLock<QueryState>>,
    stream: broadcast::Sender<StreamEvent>,
    delivery: Option<mpsc::Sender<Alert>>,
    snapshot_path: Option<PathBuf>,
    now: Option<Timestamp>,
    ticks: u64,
    next_action: u64,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, source: Source, audit: AuditLog) -> Result<Self, PipelineError> {
        config.rules.check_against(&config.registry)?;
        let scorer = Scorer::with_registry(config.norms, config.weights, &config.registry)?;
        let alerts = AlertEngine::new(config.rules.clone(), &config.registry, config.alert);
        let kri = KriEngine::new(config.registry.clone(), config.context);
        let next_action = audit
            .entries()
            .iter()
            .filter(|e| e.kind == AuditKind::ActionRecorded)
            .count() as u64
            + 1;
        let state = QueryState {
            mode: source.mode(),
            now: None,
            ticks: 0,
            exhausted: false,
            definitions: config.registry.definitions().to_vec(),
            latest: BTreeMap::new(),
            series: BTreeMap::new(),
            alerts: Vec::new(),
            rules: config.rules.clone(),
            score: None,
        };
        let (stream, _) = broadcast::channel(4096);
        let delivery = (!config.sinks.is_empty()).then(|| spawn_delivery(config.sinks, config.retry));
        let mut p = Self {
            kri,
            alerts,
            scorer,
            registry: config.registry,
            source,
            audit: Arc::new(RwLock::new(audit)),
            state: Arc::new(RwLock::new(state)),
            stream,
            delivery,
            snapshot_path: config.snapshot_path,
            now: None,
            ticks: 0,
            next_action,
        };
        p.record(
            AuditKind::RuleChanged,
            rules_payload(&config.rules, "initial"),
            Some(SYSTEM_ACTOR),
        )?;
        p.audit.write().flush()?;
        Ok(p)
    }

    pub fn state(&self) -> Arc<RwLock<QueryState>> {
        self.state.clone()
    }

    pub fn audit(&self) -> Arc<RwLock<AuditLog>> {
        self.audit.clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.stream.subscribe()
    }

    pub fn now(&self) -> Option<Timestamp> {
        self.now
    }

    pub fn alerts(&self) -> &[Alert] {
        self.alerts.alerts()
    }

    pub fn rules(&self) -> &RuleSet {
        self.alerts.rules()
    }

    fn record(
        &mut self,
        kind: AuditKind,
        payload: Value,
        actor: Option<&str>,
    ) -> Result<AuditEntry, PipelineError> {
        let ts = self.now.unwrap_or(0);
        let entry = self.audit.write().append(ts, kind, payload, actor)?;
        let event = match kind {
            AuditKind::KriSample => Some("kri_sample"),
            AuditKind::AlertFired | AuditKind::AlertAcknowledged | AuditKind::AlertResolved => {
                Some("alert")
            }
            AuditKind::ScoreComputed => Some("score"),
            _ => None,
        };
        if let Some(event) = event {
            let data = match kind {
                AuditKind::KriSample | AuditKind::ScoreComputed => entry.payload.clone(),
                _ => json!({ "kind": kind, "alert": entry.payload }),
            };
            // No receivers is fine.
            let _ = self.stream.send(StreamEvent {
                seq: entry.seq,
                event: event.into(),
                data,
            });
        }
        Ok(entry)
    }

    fn record_alert_events(&mut self, events: &[AlertEvent]) -> Result<(), PipelineError> {
        for ev in events {
            let (kind, alert) = match ev {
                AlertEvent::Fired(a) => (AuditKind::AlertFired, a),
                AlertEvent::Acknowledged(a) => (AuditKind::AlertAcknowledged, a),
                AlertEvent::Resolved(a) => (AuditKind::AlertResolved, a),
            };
            let actor = alert.acknowledged_by.as_deref().filter(|_| kind == AuditKind::AlertAcknowledged);
            self.record(kind, to_value(alert), actor)?;
            if kind == AuditKind::AlertFired {
                if let Some(tx) = &self.delivery {
                    let _ = tx.send(alert.clone());
                }
            }
        }
        Ok(())
    }

    /// Processes the next tick. Returns `false` once the source is exhausted.
    pub fn step(&mut self) -> Result<bool, PipelineError> {
        let Some(events) = self.source.next_tick() else {
            let newly = !self.state.read().exhausted;
            if newly {
                tracing::info!(ticks = self.ticks, "telemetry source exhausted; still serving queries");
                self.state.write().exhausted = true;
                self.write_snapshot();
            }
            return Ok(false);
        };
        let Some(ts) = events.first().map(|e| e.ts) else {
            return Ok(true);
        };
        for e in &events {
            self.kri.ingest(e)?;
        }
        self.now = Some(ts);
        self.ticks += 1;
        let samples = self.kri.evaluate(ts);
        for s in &samples {
            self.record(AuditKind::KriSample, to_value(s), None)?;
        }
        let alert_events = self.alerts.process_all(&samples);
        self.record_alert_events(&alert_events)?;
        let score = match self.scorer.score(&samples, ts) {
            Ok(score) => {
                self.record(AuditKind::ScoreComputed, to_value(&score), None)?;
                Some(score)
            }
            Err(ScoringError::NoUsableInputs) => None,
            Err(e) => return Err(e.into()),
        };
        self.audit.write().flush()?;

        {
            let mut st = self.state.write();
            st.now = Some(ts);
            st.ticks = self.ticks;
            for s in samples {
                let series = st.series.entry(s.kri_id.clone()).or_default();
                if series.len() == SERIES_CAPACITY {
                    series.pop_front();
                }
                series.push_back(s.clone());
                st.latest.insert(s.kri_id.clone(), s);
            }
            if !alert_events.is_empty() {
                st.alerts = self.alerts.alerts().to_vec();
            }
            if score.is_some() {
                st.score = score;
            }
        }
        if self.ticks.is_multiple_of(SNAPSHOT_EVERY) {
            self.write_snapshot();
        }
        Ok(true)
    }

    /// Steps until the source is exhausted.
    pub fn run_to_end(&mut self) -> Result<u64, PipelineError> {
        while self.step()? {}
        Ok(self.ticks)
    }

    pub fn acknowledge(&mut self, alert_id: &str, actor: &str, note: &str) -> Result<Alert, PipelineError> {
        let alert = self
            .alerts
            .acknowledge(alert_id, actor, note, self.now.unwrap_or(0))?;
        self.record_alert_events(&[AlertEvent::Acknowledged(alert.clone())])?;
        self.audit.write().flush()?;
        self.state.write().alerts = self.alerts.alerts().to_vec();
        Ok(alert)
    }

    pub fn record_action(&mut self, req: ActionRequest) -> Result<AuditEntry, PipelineError> {
        if req.actor.trim().is_empty() {
            return Err(AlertError::EmptyActor.into());
        }
        if req.action_type.trim().is_empty() {
            return Err(PipelineError::InvalidRequest("action_type must not be empty".into()));
        }
        if let Some(id) = &req.alert_id {
            if self.alerts.get(id).is_none() {
                return Err(AlertError::UnknownAlert(id.clone()).into());
            }
        }
        let action = MitigationAction {
            action_id: format!("action-{:06}", self.next_action),
            ts: self.now.unwrap_or(0),
            actor: req.actor,
            alert_id: req.alert_id,
            action_type: req.action_type,
            note: req.note,
        };
        let entry = self.record(AuditKind::ActionRecorded, to_value(&action), Some(&action.actor))?;
        self.audit.write().flush()?;
        self.next_action += 1;
        Ok(entry)
    }

    pub fn update_rules(&mut self, update: RuleUpdate, actor: &str) -> Result<RuleSet, PipelineError> {
        if actor.trim().is_empty() {
            return Err(AlertError::EmptyActor.into());
        }
        let current = self.alerts.rules().clone();
        let mut rules = update.rules.unwrap_or(current.rules.clone());
        for id in &update.remove {
            let before = rules.len();
            rules.retain(|r| &r.rule_id != id);
            if rules.len() == before {
                return Err(AlertError::InvalidRule {
                    rule_id: id.clone(),
                    reason: "no such rule to remove".into(),
                }
                .into());
            }
        }
        for rule in update.upsert {
            match rules.iter_mut().find(|r| r.rule_id == rule.rule_id) {
                Some(slot) => *slot = rule,
                None => rules.push(rule),
            }
        }
        let next = current.replaced(rules)?;
        next.check_against(&self.registry)?;
        let events = self.alerts.set_rules(next.clone(), self.now.unwrap_or(0));
        self.record(AuditKind::RuleChanged, rules_payload(&next, "update"), Some(actor))?;
        self.record_alert_events(&events)?;
        self.audit.write().flush()?;
        {
            let mut st = self.state.write();
            st.rules = next.clone();
            st.alerts = self.alerts.alerts().to_vec();
        }
        self.write_snapshot();
        Ok(next)
    }

    /// Adds a fault to a live simulation. Slots are relative to the next
    /// simulated slot.
    pub fn inject(&mut self, scenario: Scenario, actor: &str) -> Result<Scenario, PipelineError> {
        if actor.trim().is_empty() {
            return Err(AlertError::EmptyActor.into());
        }
        let Source::Simulate { sim, .. } = &mut self.source else {
            return Err(PipelineError::NotSimulating);
        };
        let offset = sim.state().current_slot;
        let absolute = scenario.shifted(offset);
        sim.inject(absolute.clone())?;
        self.record(
            AuditKind::ScenarioInjected,
            json!({ "requested": scenario, "scenario": absolute, "at_slot": offset }),
            Some(actor),
        )?;
        self.audit.write().flush()?;
        Ok(absolute)
    }

    fn write_snapshot(&self) {
        let Some(path) = &self.snapshot_path else {
            return;
        };
        let snap = Snapshot {
            now: self.now,
            next_audit_seq: self.audit.read().next_seq(),
            rules: self.alerts.rules().clone(),
            alerts: self.alerts.alerts().to_vec(),
            score: self.state.read().score.clone(),
        };
        let tmp = path.with_extension("json.tmp");
        let res = serde_json::to_vec_pretty(&snap)
            .map_err(std::io::Error::other)
            .and_then(|bytes| std::fs::write(&tmp, bytes))
            .and_then(|_| std::fs::rename(&tmp, path));
        if let Err(e) = res {
            tracing::warn!(path = %path.display(), "snapshot write failed: {e}");
        }
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Acknowledge {
                alert_id,
                actor,
                note,
                reply,
            } => {
                let _ = reply.send(self.acknowledge(&alert_id, &actor, &note));
            }
            Command::RecordAction { request, reply } => {
                let _ = reply.send(self.record_action(request));
            }
            Command::UpdateRules {
                update,
                actor,
                reply,
            } => {
                let _ = reply.send(self.update_rules(update, &actor));
            }
            Command::Inject {
                scenario,
                actor,
                reply,
            } => {
                let _ = reply.send(self.inject(scenario, &actor));
            }
            Command::Shutdown => {}
        }
    }
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("audit payloads serialize")
}

fn rules_payload(rules: &RuleSet, change: &str) -> Value {
    json!({ "change": change, "version": rules.version, "rules": rules.rules })
}

fn spawn_delivery(sinks: Vec<Sink>, retry: RetryPolicy) -> mpsc::Sender<Alert> {
    let (tx, rx) = mpsc::channel::<Alert>();
    std::thread::Builder::new()
        .name("alert-delivery".into())
        .spawn(move || {
            for alert in rx {
                match route(&alert, &sinks, &retry) {
                    Ok(records) => {
                        for r in records.iter().filter(|r| !r.delivered) {
                            tracing::error!(alert = %r.alert_id, sink = %r.sink, "delivery failed after {} attempts", r.attempts);
                        }
                    }
                    Err(e) => tracing::error!("alert routing failed: {e}"),
                }
            }
        })
        .expect("spawn delivery thread");
    tx
}

pub enum Command {
    Acknowledge {
        alert_id: String,
        actor: String,
        note: String,
        reply: oneshot::Sender<Result<Alert, PipelineError>>,
    },
    RecordAction {
        request: ActionRequest,
        reply: oneshot::Sender<Result<AuditEntry, PipelineError>>,
    },
    UpdateRules {
        update: RuleUpdate,
        actor: String,
        reply: oneshot::Sender<Result<RuleSet, PipelineError>>,
    },
    Inject {
        scenario: Scenario,
        actor: String,
        reply: oneshot::Sender<Result<Scenario, PipelineError>>,
    },
    Shutdown,
}

/// Shared view of a running pipeline thread.
#[derive(Clone)]
pub struct PipelineHandle {
    commands: mpsc::Sender<Command>,
    pub state: Arc<RwLock<QueryState>>,
    pub audit: Arc<RwLock<AuditLog>>,
    stream: broadcast::Sender<StreamEvent>,
}

impl PipelineHandle {
    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.stream.subscribe()
    }

    pub async fn request<T>(
        &self,
        make: impl FnOnce(oneshot::Sender<Result<T, PipelineError>>) -> Command,
    ) -> Result<T, PipelineError> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(make(tx)).map_err(|_| PipelineError::Stopped)?;
        rx.await.map_err(|_| PipelineError::Stopped)?
    }

    pub fn shutdown(&self) {
        let _ = self.commands.send(Command::Shutdown);
    }
}

/// Runs `pipeline` on its own thread, waiting `pacing` between ticks.
/// Commands are applied between ticks, never in the middle of one.
pub fn spawn(mut pipeline: Pipeline, pacing: Duration) -> (PipelineHandle, JoinHandle<()>) {
    let (tx, rx) = mpsc::channel::<Command>();
    let handle = PipelineHandle {
        commands: tx,
        state: pipeline.state(),
        audit: pipeline.audit(),
        stream: pipeline.stream.clone(),
    };
    let join = std::thread::Builder::new()
        .name("pipeline".into())
        .spawn(move || {
            let mut running = true;
            loop {
                loop {
                    match rx.try_recv() {
                        Ok(Command::Shutdown) => return,
                        Ok(cmd) => pipeline.handle(cmd),
                        Err(mpsc::TryRecvError::Empty) => break,
                        Err(mpsc::TryRecvError::Disconnected) => return,
                    }
                }
                if running {
                    match pipeline.step() {
                        Ok(more) => running = more,
                        Err(e) => {
                            tracing::error!("pipeline stopped processing telemetry: {e}");
                            running = false;
                        }
                    }
                }
                let wait = if running { pacing } else { Duration::from_secs(3600) };
                match rx.recv_timeout(wait) {
                    Ok(Command::Shutdown) => return,
                    Ok(cmd) => pipeline.handle(cmd),
                    Err(mpsc::RecvTimeoutError::Timeout) => {}
                    Err(mpsc::RecvTimeoutError::Disconnected) => return,
                }
            }
        })
        .expect("spawn pipeline thread");
    (handle, join)
}
