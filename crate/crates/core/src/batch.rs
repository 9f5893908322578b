//! Whole-log evaluation, data-parallel over ticks when the `parallel`
//! feature is enabled.
//!
//! Every tick is computed from an as-of view of the full log, so ticks are
//! independent and can be mapped in any order. Gap filling, which carries
//! state from tick to tick, runs afterwards in a sequential pass. The
//! result equals what [`KriEngine`](crate::kri::KriEngine) produces
//! streaming over the same log.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::kri::engine_internals::{compute_raw, Inputs, LiveGapFiller};
use crate::kri::{EventIndex, KriContext, KriError, KriRegistry, KriSample};
use crate::telemetry::{EventPayload, NodeDescriptor, NodeHeartbeat, TelemetryEvent, Timestamp};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
        }
    }
}

/// Distinct event timestamps in log order; one evaluation tick each.
pub fn tick_times(events: &[TelemetryEvent]) -> Vec<Timestamp> {
    let mut ticks: Vec<Timestamp> = events.iter().map(|e| e.ts).collect();
    ticks.dedup();
    ticks
}

/// Full log with as-of lookups for the state the streaming engine
/// accumulates cumulatively.
pub struct LogArchive {
    index: EventIndex,
    heartbeats: BTreeMap<String, Vec<(Timestamp, NodeHeartbeat)>>,
    facts: Vec<(Timestamp, String, f64)>,
    /// `(ts, running max finalized epoch)`.
    finalized: Vec<(Timestamp, u64)>,
    origin: Timestamp,
}

impl LogArchive {
    pub fn new(events: &[TelemetryEvent]) -> Self {
        let mut index = EventIndex::new();
        let mut heartbeats: BTreeMap<String, Vec<(Timestamp, NodeHeartbeat)>> = BTreeMap::new();
        let mut facts = Vec::new();
        let mut finalized: Vec<(Timestamp, u64)> = Vec::new();
        for e in events {
            match &e.payload {
                EventPayload::NodeHeartbeat(hb) => {
                    heartbeats.entry(hb.node_id.clone()).or_default().push((e.ts, hb.clone()))
                }
                EventPayload::ExternalFact(f) => facts.push((e.ts, f.name.clone(), f.value)),
                EventPayload::EpochFinalized(f) => {
                    let best = finalized.last().map_or(f.epoch_index, |(_, m)| (*m).max(f.epoch_index));
                    finalized.push((e.ts, best));
                }
                _ => {
                    index.push(e.clone());
                }
            }
        }
        Self {
            index,
            heartbeats,
            facts,
            finalized,
            origin: events.first().map_or(0, |e| e.ts),
        }
    }

    pub fn nodes_at(&self, at: Timestamp) -> Vec<NodeDescriptor> {
        self.heartbeats
            .values()
            .filter_map(|hbs| {
                let n = hbs.partition_point(|(ts, _)| *ts <= at);
                n.checked_sub(1).map(|i| NodeDescriptor::from(&hbs[i].1))
            })
            .collect()
    }

    pub fn facts_at(&self, at: Timestamp) -> BTreeMap<String, f64> {
        self.facts
            .iter()
            .take_while(|(ts, _, _)| *ts <= at)
            .map(|(_, k, v)| (k.clone(), *v))
            .collect()
    }

    pub fn last_finalized_at(&self, at: Timestamp) -> Option<u64> {
        let n = self.finalized.partition_point(|(ts, _)| *ts <= at);
        n.checked_sub(1).map(|i| self.finalized[i].1)
    }

    pub fn raw_at(
        &self,
        registry: &KriRegistry,
        ctx: &KriContext,
        at: Timestamp,
    ) -> Vec<Result<f64, KriError>> {
        let nodes = self.nodes_at(at);
        let facts = self.facts_at(at);
        let inputs = Inputs {
            index: &self.index,
            nodes: &nodes,
            facts: &facts,
            last_finalized: self.last_finalized_at(at),
            origin: self.origin,
        };
        compute_raw(registry, ctx, &inputs, at)
    }
}

/// Samples for every registered KRI at every tick, grouped by tick.
pub fn kri_series(
    events: &[TelemetryEvent],
    registry: &KriRegistry,
    ctx: &KriContext,
    ticks: &[Timestamp],
    exec: Execution,
) -> Vec<Vec<KriSample>> {
    let archive = LogArchive::new(events);
    let raw = exec.map(ticks, |&at| archive.raw_at(registry, ctx, at));
    let mut filler = LiveGapFiller::default();
    ticks
        .iter()
        .zip(raw)
        .map(|(&at, values)| {
            registry
                .definitions()
                .iter()
                .zip(values)
                .map(|(def, r)| filler.sample(def, at, r))
                .collect()
        })
        .collect()
}
