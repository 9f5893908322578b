//! Telemetry event vocabulary, the newline-delimited event-log format and
//! node/stake snapshots derived from heartbeats.
//!
//! Every record is one JSON object per line:
//!
//! ```text
//! {"ts":1700000000000,"kind":"BlockProposed","payload":{"slot":0,"proposer":"val-007","success":true,"tx_count":81}}
//! ```
//!
//! Timestamps are integer milliseconds (UTC) and must be non-decreasing
//! within one log.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer milliseconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Debug, Error, PartialEq)]
pub enum TelemetryError {
    #[error("malformed record on line {line_number}: {reason}")]
    MalformedRecord { line_number: usize, reason: String },
    #[error("timestamp on line {line_number} precedes its predecessor")]
    NonMonotonicTimestamp { line_number: usize },
    #[error("unknown event kind `{kind}` on line {line_number}")]
    UnknownKind { line_number: usize, kind: String },
    #[error("transaction `{tx_id}` included twice (line {line_number})")]
    DuplicateInclusion { line_number: usize, tx_id: String },
    #[error("events are not timestamp-ordered at index {index}")]
    UnorderedInput { index: usize },
    #[error("no heartbeats at or before the snapshot time")]
    NoHeartbeats,
    #[error("snapshot carries no positive stake")]
    ZeroStake,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TelemetryError {
    fn from(err: std::io::Error) -> Self {
        TelemetryError::Io(err.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockProposed {
    pub slot: u64,
    pub proposer: String,
    pub success: bool,
    pub tx_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteCast {
    pub slot: u64,
    pub voter: String,
    /// Delay relative to the start of the voted slot.
    pub arrival_delay_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochFinalized {
    pub epoch_index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeHeartbeat {
    pub node_id: String,
    pub online: bool,
    pub cpu_pct: f64,
    pub client_version: String,
    pub provider: String,
    pub country: String,
    pub entity_id: String,
    pub stake: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MempoolTxSeen {
    pub tx_id: String,
    pub source_tag: String,
    pub sanctioned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTxIncluded {
    pub tx_id: String,
    pub slot: u64,
    pub sanctioned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketTick {
    pub price: f64,
    pub circulating_supply: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalFact {
    pub name: String,
    pub value: f64,
}

/// Kind-specific event body. Serialized adjacently tagged as
/// `"kind": ..., "payload": {...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventPayload {
    BlockProposed(BlockProposed),
    VoteCast(VoteCast),
    EpochFinalized(EpochFinalized),
    NodeHeartbeat(NodeHeartbeat),
    MempoolTxSeen(MempoolTxSeen),
    ChainTxIncluded(ChainTxIncluded),
    MarketTick(MarketTick),
    ExternalFact(ExternalFact),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    BlockProposed,
    VoteCast,
    EpochFinalized,
    NodeHeartbeat,
    MempoolTxSeen,
    ChainTxIncluded,
    MarketTick,
    ExternalFact,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::BlockProposed,
        EventKind::VoteCast,
        EventKind::EpochFinalized,
        EventKind::NodeHeartbeat,
        EventKind::MempoolTxSeen,
        EventKind::ChainTxIncluded,
        EventKind::MarketTick,
        EventKind::ExternalFact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::BlockProposed => "BlockProposed",
            EventKind::VoteCast => "VoteCast",
            EventKind::EpochFinalized => "EpochFinalized",
            EventKind::NodeHeartbeat => "NodeHeartbeat",
            EventKind::MempoolTxSeen => "MempoolTxSeen",
            EventKind::ChainTxIncluded => "ChainTxIncluded",
            EventKind::MarketTick => "MarketTick",
            EventKind::ExternalFact => "ExternalFact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::BlockProposed(_) => EventKind::BlockProposed,
            EventPayload::VoteCast(_) => EventKind::VoteCast,
            EventPayload::EpochFinalized(_) => EventKind::EpochFinalized,
            EventPayload::NodeHeartbeat(_) => EventKind::NodeHeartbeat,
            EventPayload::MempoolTxSeen(_) => EventKind::MempoolTxSeen,
            EventPayload::ChainTxIncluded(_) => EventKind::ChainTxIncluded,
            EventPayload::MarketTick(_) => EventKind::MarketTick,
            EventPayload::ExternalFact(_) => EventKind::ExternalFact,
        }
    }
}

/// One timestamped fact about the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub ts: Timestamp,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl TelemetryEvent {
    pub fn new(ts: Timestamp, payload: EventPayload) -> Self {
        Self { ts, payload }
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

#[derive(Deserialize)]
struct RawRecord {
    ts: Timestamp,
    kind: String,
    payload: serde_json::Value,
}

fn decode_payload(
    kind: EventKind,
    payload: serde_json::Value,
) -> Result<EventPayload, serde_json::Error> {
    use serde_json::from_value;
    Ok(match kind {
        EventKind::BlockProposed => EventPayload::BlockProposed(from_value(payload)?),
        EventKind::VoteCast => EventPayload::VoteCast(from_value(payload)?),
        EventKind::EpochFinalized => EventPayload::EpochFinalized(from_value(payload)?),
        EventKind::NodeHeartbeat => EventPayload::NodeHeartbeat(from_value(payload)?),
        EventKind::MempoolTxSeen => EventPayload::MempoolTxSeen(from_value(payload)?),
        EventKind::ChainTxIncluded => EventPayload::ChainTxIncluded(from_value(payload)?),
        EventKind::MarketTick => EventPayload::MarketTick(from_value(payload)?),
        EventKind::ExternalFact => EventPayload::ExternalFact(from_value(payload)?),
    })
}

fn check_ranges(payload: &EventPayload) -> Result<(), String> {
    match payload {
        EventPayload::NodeHeartbeat(hb) => {
            if !(0.0..=100.0).contains(&hb.cpu_pct) {
                return Err(format!("cpu_pct {} outside [0,100]", hb.cpu_pct));
            }
            if !(hb.stake.is_finite() && hb.stake >= 0.0) {
                return Err(format!("stake {} must be a finite value >= 0", hb.stake));
            }
        }
        EventPayload::MarketTick(t) => {
            if !(t.price.is_finite() && t.price >= 0.0) {
                return Err("price must be finite and >= 0".into());
            }
            if !(t.circulating_supply.is_finite() && t.circulating_supply >= 0.0) {
                return Err("circulating_supply must be finite and >= 0".into());
            }
        }
        EventPayload::ExternalFact(f) if !f.value.is_finite() => {
            return Err("fact value must be finite".into());
        }
        _ => {}
    }
    Ok(())
}

/// Parses one line. `line_number` is 1-based and only used for errors.
pub fn parse_record(line: &str, line_number: usize) -> Result<TelemetryEvent, TelemetryError> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| TelemetryError::MalformedRecord {
            line_number,
            reason: e.to_string(),
        })?;
    let kind = EventKind::parse(&raw.kind).ok_or_else(|| TelemetryError::UnknownKind {
        line_number,
        kind: raw.kind.clone(),
    })?;
    let payload =
        decode_payload(kind, raw.payload).map_err(|e| TelemetryError::MalformedRecord {
            line_number,
            reason: e.to_string(),
        })?;
    check_ranges(&payload)
        .map_err(|reason| TelemetryError::MalformedRecord { line_number, reason })?;
    Ok(TelemetryEvent::new(raw.ts, payload))
}

/// Parses a newline-delimited event log, verifying timestamp monotonicity
/// and single inclusion of every transaction.
pub fn parse_event_log<R: BufRead>(reader: R) -> Result<Vec<TelemetryEvent>, TelemetryError> {
    let mut events = Vec::new();
    let mut included: HashSet<String> = HashSet::new();
    let mut last_ts: Option<Timestamp> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_number = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = parse_record(&line, line_number)?;
        if let Some(prev) = last_ts {
            if event.ts < prev {
                return Err(TelemetryError::NonMonotonicTimestamp { line_number });
            }
        }
        if let EventPayload::ChainTxIncluded(tx) = &event.payload {
            if !included.insert(tx.tx_id.clone()) {
                return Err(TelemetryError::DuplicateInclusion {
                    line_number,
                    tx_id: tx.tx_id.clone(),
                });
            }
        }
        last_ts = Some(event.ts);
        events.push(event);
    }
    Ok(events)
}

pub fn parse_event_log_bytes(bytes: &[u8]) -> Result<Vec<TelemetryEvent>, TelemetryError> {
    parse_event_log(bytes)
}

/// Serializes one event as a single line without the trailing newline.
pub fn encode_record(event: &TelemetryEvent) -> String {
    // Serialization of these types cannot fail: no maps with non-string keys.
    serde_json::to_string(event).expect("telemetry events always serialize")
}

pub fn write_event_log_to<W: Write>(
    events: &[TelemetryEvent],
    mut out: W,
) -> Result<(), TelemetryError> {
    if let Some(index) = first_unordered(events) {
        return Err(TelemetryError::UnorderedInput { index });
    }
    for event in events {
        serde_json::to_writer(&mut out, event).map_err(|e| TelemetryError::Io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_event_log(events: &[TelemetryEvent]) -> Result<Vec<u8>, TelemetryError> {
    let mut buf = Vec::with_capacity(events.len() * 96);
    write_event_log_to(events, &mut buf)?;
    Ok(buf)
}

fn first_unordered(events: &[TelemetryEvent]) -> Option<usize> {
    events
        .windows(2)
        .position(|w| w[1].ts < w[0].ts)
        .map(|i| i + 1)
}

/// Static mapping of one node to its operator, hosting and stake.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub node_id: String,
    pub entity_id: String,
    pub provider: String,
    pub country: String,
    pub client_version: String,
    pub stake: f64,
    pub online: bool,
    pub cpu_pct: f64,
}

impl From<&NodeHeartbeat> for NodeDescriptor {
    fn from(hb: &NodeHeartbeat) -> Self {
        Self {
            node_id: hb.node_id.clone(),
            entity_id: hb.entity_id.clone(),
            provider: hb.provider.clone(),
            country: hb.country.clone(),
            client_version: hb.client_version.clone(),
            stake: hb.stake,
            online: hb.online,
            cpu_pct: hb.cpu_pct,
        }
    }
}

/// Stake per entity at a point in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StakeSnapshot {
    pub as_of: Timestamp,
    /// Sorted by entity id.
    pub shares: Vec<(String, f64)>,
}

impl StakeSnapshot {
    pub fn new(as_of: Timestamp, mut shares: Vec<(String, f64)>) -> Result<Self, TelemetryError> {
        if shares.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(TelemetryError::ZeroStake);
        }
        if !shares.iter().any(|(_, w)| *w > 0.0) {
            return Err(TelemetryError::ZeroStake);
        }
        shares.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self { as_of, shares })
    }

    pub fn total(&self) -> f64 {
        self.shares.iter().map(|(_, w)| w).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.shares.iter().map(|(_, w)| *w).collect()
    }
}

/// Latest-heartbeat-wins view of the node set. Ties on timestamp resolve to
/// the record observed last.
#[derive(Clone, Debug, Default)]
pub struct HeartbeatBook {
    latest: BTreeMap<String, (Timestamp, NodeHeartbeat)>,
}

impl HeartbeatBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, ts: Timestamp, hb: &NodeHeartbeat) {
        match self.latest.get_mut(&hb.node_id) {
            Some(entry) if entry.0 > ts => {}
            Some(entry) => *entry = (ts, hb.clone()),
            None => {
                self.latest.insert(hb.node_id.clone(), (ts, hb.clone()));
            }
        }
    }

    pub fn observe_event(&mut self, event: &TelemetryEvent) {
        if let EventPayload::NodeHeartbeat(hb) = &event.payload {
            self.observe(event.ts, hb);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_empty()
    }

    pub fn len(&self) -> usize {
        self.latest.len()
    }

    /// Nodes sorted by node id.
    pub fn nodes(&self) -> Vec<NodeDescriptor> {
        self.latest.values().map(|(_, hb)| hb.into()).collect()
    }

    pub fn stake_of(&self, node_id: &str) -> Option<f64> {
        self.latest.get(node_id).map(|(_, hb)| hb.stake)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodeHeartbeat> {
        self.latest.values().map(|(_, hb)| hb)
    }

    pub fn stake_snapshot(&self, as_of: Timestamp) -> Result<StakeSnapshot, TelemetryError> {
        if self.latest.is_empty() {
            return Err(TelemetryError::NoHeartbeats);
        }
        let mut per_entity: BTreeMap<&str, f64> = BTreeMap::new();
        for (_, hb) in self.latest.values() {
            *per_entity.entry(hb.entity_id.as_str()).or_insert(0.0) += hb.stake;
        }
        StakeSnapshot::new(
            as_of,
            per_entity
                .into_iter()
                .map(|(e, w)| (e.to_string(), w))
                .collect(),
        )
    }
}

/// Builds the node set and per-entity stake from the latest heartbeat of
/// every node at or before `as_of`.
pub fn snapshot_from_heartbeats(
    events: &[TelemetryEvent],
    as_of: Timestamp,
) -> Result<(Vec<NodeDescriptor>, StakeSnapshot), TelemetryError> {
    let mut book = HeartbeatBook::new();
    for event in events.iter().take_while(|e| e.ts <= as_of) {
        book.observe_event(event);
    }
    let snapshot = book.stake_snapshot(as_of)?;
    Ok((book.nodes(), snapshot))
}
