//! Streaming KRI evaluation.
//!
//! The engine ingests telemetry in timestamp order and, at each tick,
//! evaluates every registered KRI over its trailing window. The metric
//! arithmetic lives in [`compute_raw`], a pure function of the inputs
//! visible at the tick, so the batch path can evaluate ticks
//! independently and reach identical values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::catalog as id;
use super::indices::{self, GroupKey, ShareWeight};
use super::metrics::{self, Scope};
use super::window::{EventIndex, TimeWindow};
use super::{FillMethod, KriDefinition, KriError, KriRegistry, KriSample};
use crate::sim::{FACT_SLOTS_PER_EPOCH, FACT_SLOT_DURATION_MS};
use crate::telemetry::{
    EventKind, EventPayload, HeartbeatBook, NodeDescriptor, StakeSnapshot, TelemetryError,
    TelemetryEvent, Timestamp,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainParams {
    pub slots_per_epoch: u64,
    pub slot_duration_ms: u64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            slots_per_epoch: 32,
            slot_duration_ms: 400,
        }
    }
}

impl ChainParams {
    /// Chain timing published as external facts overrides the configured one.
    pub fn with_facts(self, facts: &BTreeMap<String, f64>) -> Self {
        let read = |name: &str, fallback: u64| {
            facts
                .get(name)
                .filter(|v| v.is_finite() && **v >= 1.0)
                .map_or(fallback, |v| *v as u64)
        };
        Self {
            slots_per_epoch: read(FACT_SLOTS_PER_EPOCH, self.slots_per_epoch),
            slot_duration_ms: read(FACT_SLOT_DURATION_MS, self.slot_duration_ms),
        }
    }
}

/// Evaluation settings that are not part of individual KRI definitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KriContext {
    pub chain: ChainParams,
    /// Validators counted by the `own_*` KRIs.
    pub own_validators: BTreeSet<String>,
    /// Slots a mempool transaction may wait before it counts as withheld.
    pub censorship_horizon_slots: u64,
    /// Restricts the censorship KRI to one transaction source.
    pub censorship_source: Option<String>,
    pub control_threshold: f64,
    /// Version treated as latest; defaults to the newest one observed.
    pub latest_version: Option<String>,
}

impl Default for KriContext {
    fn default() -> Self {
        Self {
            chain: ChainParams::default(),
            own_validators: ["val-000", "val-001", "val-002"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            censorship_horizon_slots: 4,
            censorship_source: None,
            control_threshold: indices::MAJORITY,
            latest_version: None,
        }
    }
}

/// Everything a KRI may read at one instant.
pub(crate) struct Inputs<'a> {
    pub index: &'a EventIndex,
    /// Latest heartbeat per node, sorted by node id.
    pub nodes: &'a [NodeDescriptor],
    pub facts: &'a BTreeMap<String, f64>,
    pub last_finalized: Option<u64>,
    pub origin: Timestamp,
}

fn entity_snapshot(nodes: &[NodeDescriptor], at: Timestamp) -> Result<StakeSnapshot, KriError> {
    if nodes.is_empty() {
        return Err(KriError::EmptyNodeSet);
    }
    let mut per_entity: BTreeMap<&str, f64> = BTreeMap::new();
    for n in nodes {
        *per_entity.entry(&n.entity_id).or_insert(0.0) += n.stake;
    }
    StakeSnapshot::new(at, per_entity.into_iter().map(|(e, w)| (e.to_string(), w)).collect())
        .map_err(|_| KriError::EmptySnapshot)
}

/// Raw value of every registered KRI at `at`, aligned with
/// `registry.definitions()`.
pub(crate) fn compute_raw(
    registry: &KriRegistry,
    ctx: &KriContext,
    inputs: &Inputs<'_>,
    at: Timestamp,
) -> Vec<Result<f64, KriError>> {
    let chain = ctx.chain.with_facts(inputs.facts);
    let stakes: BTreeMap<String, f64> = inputs
        .nodes
        .iter()
        .map(|n| (n.node_id.clone(), n.stake))
        .collect();
    let total_staked: f64 = inputs.nodes.iter().map(|n| n.stake).sum();
    registry
        .definitions()
        .iter()
        .map(|def| compute_one(def, ctx, chain, inputs, &stakes, total_staked, at))
        .collect()
}

fn compute_one(
    def: &KriDefinition,
    ctx: &KriContext,
    chain: ChainParams,
    inputs: &Inputs<'_>,
    stakes: &BTreeMap<String, f64>,
    total_staked: f64,
    at: Timestamp,
) -> Result<f64, KriError> {
    let slot_ms = chain.slot_duration_ms;
    let window = TimeWindow::trailing(at, def.window.to_ms(slot_ms), inputs.origin, slot_ms);
    let idx = inputs.index;
    let nodes = inputs.nodes;
    let consensus = |scope| {
        metrics::consensus_metrics(
            idx.slice(EventKind::BlockProposed, &window),
            idx.slice(EventKind::VoteCast, &window),
            stakes,
            scope,
        )
    };
    let own = Scope::Validators(&ctx.own_validators);
    let financial = || {
        metrics::financial_metrics(
            idx.slice(EventKind::MarketTick, &window),
            total_staked,
            inputs.facts,
        )
    };
    let compliance = || {
        metrics::compliance_metrics(
            idx.slice(EventKind::ChainTxIncluded, &window),
            idx.slice(EventKind::BlockProposed, &window),
            inputs.facts,
        )
    };
    let liveness = || {
        metrics::liveness_metrics(
            idx.slice(EventKind::ChainTxIncluded, &window),
            idx.slice(EventKind::BlockProposed, &window),
            window.duration_ms,
        )
    };

    match def.kri_id.as_str() {
        id::NAKAMOTO_COEFFICIENT => {
            let snap = entity_snapshot(nodes, at)?;
            indices::nakamoto_coefficient(&snap, ctx.control_threshold).map(|k| k as f64)
        }
        id::NAKAMOTO_RATIO => {
            indices::nakamoto_ratio(&entity_snapshot(nodes, at)?, ctx.control_threshold)
        }
        id::GINI => indices::gini(&entity_snapshot(nodes, at)?),
        id::THEIL => indices::theil(&entity_snapshot(nodes, at)?),
        id::MAX_PROVIDER_SHARE => {
            indices::max_share_by(nodes, GroupKey::Provider, ShareWeight::NodeCount)
        }
        id::MAX_PROVIDER_STAKE_SHARE => {
            indices::max_share_by(nodes, GroupKey::Provider, ShareWeight::Stake)
        }
        id::MAX_COUNTRY_SHARE => {
            indices::max_share_by(nodes, GroupKey::Country, ShareWeight::NodeCount)
        }
        id::MAX_ENTITY_STAKE_SHARE => {
            indices::max_share_by(nodes, GroupKey::Entity, ShareWeight::Stake)
        }
        id::CENSORSHIP_DISCREPANCY => {
            let cutoff = at - (ctx.censorship_horizon_slots * slot_ms) as i64;
            metrics::censorship_discrepancy(
                idx.slice(EventKind::MempoolTxSeen, &window),
                idx.slice(EventKind::ChainTxIncluded, &window),
                cutoff,
                ctx.censorship_source.as_deref(),
            )
            .ok_or(KriError::EmptyWindow)
        }
        id::NETWORK_VOTE_PCT => consensus(Scope::Network).map(|m| m.pct_successful_votes),
        id::NETWORK_CONSECUTIVE_MISSED => {
            consensus(Scope::Network).map(|m| m.consecutive_missed_proposals as f64)
        }
        id::NETWORK_MEAN_VOTE_DELAY_MS => consensus(Scope::Network)?
            .mean_vote_delay_ms
            .ok_or(KriError::EmptyWindow),
        id::OWN_VOTE_PCT => consensus(own).map(|m| m.pct_successful_votes),
        id::OWN_CONSECUTIVE_MISSED => consensus(own).map(|m| m.consecutive_missed_proposals as f64),
        id::OWN_MEAN_VOTE_DELAY_MS => consensus(own)?
            .mean_vote_delay_ms
            .ok_or(KriError::EmptyWindow),
        id::FINALITY_DISTANCE => {
            let epoch = metrics::epoch_at(at, inputs.origin, slot_ms, chain.slots_per_epoch);
            Ok(metrics::finality_distance_from(epoch, inputs.last_finalized) as f64)
        }
        id::TPS => liveness().map(|m| m.tps),
        id::BLOCKS_PER_SECOND => liveness().map(|m| m.blocks_per_second),
        id::UPGRADE_READINESS => {
            let latest = match &ctx.latest_version {
                Some(v) => v.clone(),
                None => metrics::latest_version(nodes).ok_or(KriError::EmptyNodeSet)?,
            };
            metrics::upgrade_readiness(nodes, &latest)
        }
        id::VALIDATOR_CPU_PCT => metrics::mean_cpu(nodes),
        id::TVS => {
            if nodes.is_empty() {
                return Err(KriError::EmptyNodeSet);
            }
            financial().tvs
        }
        id::SECURITY_RATIO => {
            if nodes.is_empty() {
                return Err(KriError::EmptyNodeSet);
            }
            financial().security_ratio
        }
        id::MARKET_CAP => financial().market_cap,
        id::HOURLY_MARKET_CAP_CHANGE_PCT => financial().hourly_market_cap_change_pct,
        id::VALIDATOR_ECONOMICS_PCT => financial().validator_economics_pct,
        id::OFAC_TX_PCT => compliance().ofac_tx_pct.ok_or(KriError::EmptyWindow),
        id::OFAC_BLOCK_PCT => compliance().ofac_block_pct.ok_or(KriError::EmptyWindow),
        id::PENDING_LAWSUITS => compliance()
            .pending_lawsuits
            .ok_or_else(|| KriError::MissingExternalFact(metrics::facts::PENDING_LAWSUITS.into())),
        other => Err(KriError::UnknownKri(other.into())),
    }
}

/// Turns raw values into samples, filling short outages from the last real
/// value. Only carry-forward is possible while streaming because the next
/// real value is not yet known.
#[derive(Clone, Debug, Default)]
pub(crate) struct LiveGapFiller {
    last_real: BTreeMap<String, (Timestamp, f64)>,
}

impl LiveGapFiller {
    pub fn sample(
        &mut self,
        def: &KriDefinition,
        at: Timestamp,
        raw: Result<f64, KriError>,
    ) -> KriSample {
        match raw {
            Ok(v) if v.is_finite() => {
                self.last_real.insert(def.kri_id.clone(), (at, v));
                KriSample::fresh(def.kri_id.clone(), at, v)
            }
            _ => {
                let policy = def.gap_policy;
                match self.last_real.get(&def.kri_id) {
                    Some((t0, v))
                        if policy.method != FillMethod::None
                            && (at - t0) as u64 <= policy.max_staleness_ms =>
                    {
                        KriSample::filled(def.kri_id.clone(), at, *v, FillMethod::CarryForward)
                    }
                    _ => KriSample::unknown(def.kri_id.clone(), at),
                }
            }
        }
    }
}

/// Incremental KRI evaluator owning the windowed event history.
#[derive(Clone, Debug)]
pub struct KriEngine {
    registry: KriRegistry,
    ctx: KriContext,
    index: EventIndex,
    book: HeartbeatBook,
    facts: BTreeMap<String, f64>,
    last_finalized: Option<u64>,
    origin: Option<Timestamp>,
    last_ts: Option<Timestamp>,
    ingested: usize,
    retention_ms: [Option<u64>; 8],
    filler: LiveGapFiller,
}

impl KriEngine {
    pub fn new(registry: KriRegistry, ctx: KriContext) -> Self {
        let mut engine = Self {
            registry,
            ctx,
            index: EventIndex::new(),
            book: HeartbeatBook::new(),
            facts: BTreeMap::new(),
            last_finalized: None,
            origin: None,
            last_ts: None,
            ingested: 0,
            retention_ms: [None; 8],
            filler: LiveGapFiller::default(),
        };
        engine.recompute_retention();
        engine
    }

    fn recompute_retention(&mut self) {
        let slot_ms = self.chain().slot_duration_ms;
        let mut retention = [None; 8];
        for def in self.registry.definitions() {
            for kind in id::windowed_kinds(&def.kri_id) {
                let slot: &mut Option<u64> = &mut retention[kind.index()];
                let span = def.window.to_ms(slot_ms);
                *slot = Some(slot.map_or(span, |s: u64| s.max(span)));
            }
        }
        self.retention_ms = retention;
    }

    pub fn registry(&self) -> &KriRegistry {
        &self.registry
    }

    pub fn context(&self) -> &KriContext {
        &self.ctx
    }

    /// Chain timing in effect, including any published as facts.
    pub fn chain(&self) -> ChainParams {
        self.ctx.chain.with_facts(&self.facts)
    }

    pub fn origin(&self) -> Option<Timestamp> {
        self.origin
    }

    pub fn nodes(&self) -> Vec<NodeDescriptor> {
        self.book.nodes()
    }

    pub fn facts(&self) -> &BTreeMap<String, f64> {
        &self.facts
    }

    pub fn ingest(&mut self, event: &TelemetryEvent) -> Result<(), TelemetryError> {
        if let Some(prev) = self.last_ts {
            if event.ts < prev {
                return Err(TelemetryError::UnorderedInput {
                    index: self.ingested,
                });
            }
        }
        self.last_ts = Some(event.ts);
        self.ingested += 1;
        self.origin.get_or_insert(event.ts);
        match &event.payload {
            EventPayload::NodeHeartbeat(hb) => self.book.observe(event.ts, hb),
            EventPayload::ExternalFact(f) => {
                let retime = f.name == FACT_SLOT_DURATION_MS;
                self.facts.insert(f.name.clone(), f.value);
                if retime {
                    self.recompute_retention();
                }
            }
            EventPayload::EpochFinalized(f) => {
                self.last_finalized = Some(self.last_finalized.map_or(f.epoch_index, |e| e.max(f.epoch_index)));
            }
            _ => {
                if self.retention_ms[event.kind().index()].is_some() {
                    self.index.push(event.clone());
                }
            }
        }
        Ok(())
    }

    /// Evaluates every registered KRI at `at`, then drops history no window
    /// can reach any more.
    pub fn evaluate(&mut self, at: Timestamp) -> Vec<KriSample> {
        let nodes = self.book.nodes();
        let inputs = Inputs {
            index: &self.index,
            nodes: &nodes,
            facts: &self.facts,
            last_finalized: self.last_finalized,
            origin: self.origin.unwrap_or(at),
        };
        let raw = compute_raw(&self.registry, &self.ctx, &inputs, at);
        let samples = self
            .registry
            .definitions()
            .iter()
            .zip(raw)
            .map(|(def, r)| self.filler.sample(def, at, r))
            .collect();
        for kind in EventKind::ALL {
            if let Some(span) = self.retention_ms[kind.index()] {
                self.index.prune(kind, at - span as i64);
            }
        }
        samples
    }
}
