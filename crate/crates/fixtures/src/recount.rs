//! Independent recounts of windowed metrics from a raw event log.
//!
//! A window ending at `at` with span `span_ms` covers `[at - span_ms + 1, at]`,
//! clipped to the first event of the log. Rates divide by the clipped span
//! plus one slot of resolution, capped at `span_ms`.

use std::collections::{BTreeMap, BTreeSet};

use chainrisk_core::telemetry::{EventPayload, TelemetryEvent, Timestamp};

#[derive(Clone, Copy, Debug)]
pub struct Span {
    pub at: Timestamp,
    pub span_ms: u64,
    pub slot_ms: u64,
}

impl Span {
    fn bounds(&self, log: &[TelemetryEvent]) -> (Timestamp, Timestamp, f64) {
        let origin = log.first().map_or(self.at, |e| e.ts);
        let from = (self.at - self.span_ms as i64 + 1).max(origin);
        let elapsed = (self.at - origin) as u64 + self.slot_ms;
        (from, self.at, self.span_ms.min(elapsed) as f64 / 1000.0)
    }
}

fn within(
    log: &[TelemetryEvent],
    from: Timestamp,
    to: Timestamp,
) -> impl Iterator<Item = &EventPayload> {
    log.iter()
        .filter(move |e| e.ts >= from && e.ts <= to)
        .map(|e| &e.payload)
}

pub fn tps(log: &[TelemetryEvent], span: Span) -> f64 {
    let (from, to, secs) = span.bounds(log);
    let n = within(log, from, to)
        .filter(|p| matches!(p, EventPayload::ChainTxIncluded(_)))
        .count();
    n as f64 / secs
}

/// Percentage of included transactions that are sanctioned.
pub fn ofac_tx_pct(log: &[TelemetryEvent], span: Span) -> Option<f64> {
    let (from, to, _) = span.bounds(log);
    let (mut all, mut bad) = (0usize, 0usize);
    for p in within(log, from, to) {
        if let EventPayload::ChainTxIncluded(t) = p {
            all += 1;
            bad += usize::from(t.sanctioned);
        }
    }
    (all > 0).then(|| 100.0 * bad as f64 / all as f64)
}

/// Percentage of successful blocks carrying at least one sanctioned
/// transaction.
pub fn ofac_block_pct(log: &[TelemetryEvent], span: Span) -> Option<f64> {
    let (from, to, _) = span.bounds(log);
    let payloads: Vec<&EventPayload> = within(log, from, to).collect();
    let mut blocks = 0usize;
    let mut tainted = 0usize;
    for p in &payloads {
        if let EventPayload::BlockProposed(b) = p {
            if !b.success {
                continue;
            }
            blocks += 1;
            let hit = payloads.iter().any(|q| {
                matches!(q, EventPayload::ChainTxIncluded(t) if t.slot == b.slot && t.sanctioned)
            });
            tainted += usize::from(hit);
        }
    }
    (blocks > 0).then(|| 100.0 * tainted as f64 / blocks as f64)
}

/// Share of mempool transactions old enough to have been included (seen at
/// least `horizon_ms` before `at`) that are absent from the chain.
pub fn censorship(
    log: &[TelemetryEvent],
    span: Span,
    horizon_ms: u64,
    source_tag: Option<&str>,
) -> Option<f64> {
    let (from, to, _) = span.bounds(log);
    let cutoff = span.at - horizon_ms as i64;
    let mut seen = BTreeSet::new();
    for e in log.iter().filter(|e| e.ts >= from && e.ts <= cutoff) {
        if let EventPayload::MempoolTxSeen(m) = &e.payload {
            if source_tag.is_none_or(|s| s == m.source_tag) {
                seen.insert(m.tx_id.clone());
            }
        }
    }
    let included: BTreeSet<String> = within(log, from, to)
        .filter_map(|p| match p {
            EventPayload::ChainTxIncluded(t) => Some(t.tx_id.clone()),
            _ => None,
        })
        .collect();
    if seen.is_empty() {
        return None;
    }
    Some(seen.difference(&included).count() as f64 / seen.len() as f64)
}

/// Latest heartbeat stake per node at or before `at`.
pub fn stakes_at(log: &[TelemetryEvent], at: Timestamp) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for e in log.iter().take_while(|e| e.ts <= at) {
        if let EventPayload::NodeHeartbeat(h) = &e.payload {
            out.insert(h.node_id.clone(), h.stake);
        }
    }
    out
}

/// Stake-weighted vote percentage of `scope` (all nodes when `None`) over
/// the slots proposed in the window.
pub fn vote_pct(log: &[TelemetryEvent], span: Span, scope: Option<&BTreeSet<String>>) -> Option<f64> {
    let (from, to, _) = span.bounds(log);
    let stakes = stakes_at(log, span.at);
    let in_scope = |id: &str| scope.is_none_or(|s| s.contains(id));
    let slots: BTreeSet<u64> = within(log, from, to)
        .filter_map(|p| match p {
            EventPayload::BlockProposed(b) => Some(b.slot),
            _ => None,
        })
        .collect();
    let scope_stake: f64 = stakes
        .iter()
        .filter(|(id, _)| in_scope(id))
        .map(|(_, s)| *s)
        .sum();
    if slots.is_empty() || scope_stake <= 0.0 {
        return None;
    }
    let mut voted = 0.0;
    for p in within(log, from, to) {
        if let EventPayload::VoteCast(v) = p {
            if in_scope(&v.voter) && slots.contains(&v.slot) {
                voted += stakes.get(&v.voter).copied().unwrap_or(0.0);
            }
        }
    }
    Some((100.0 * voted / (scope_stake * slots.len() as f64)).min(100.0))
}

/// Whether `epoch` gathered a two-thirds stake-weighted vote across all of
/// its slots.
pub fn epoch_quorum(log: &[TelemetryEvent], epoch: u64, slots_per_epoch: u64) -> bool {
    let stakes = stakes_at(log, Timestamp::MAX);
    let total: f64 = stakes.values().sum();
    let first = epoch * slots_per_epoch;
    let last = first + slots_per_epoch;
    let mut voted = 0.0;
    for e in log {
        if let EventPayload::VoteCast(v) = &e.payload {
            if v.slot >= first && v.slot < last {
                voted += stakes.get(&v.voter).copied().unwrap_or(0.0);
            }
        }
    }
    crate::oracle::quorum(voted, total * slots_per_epoch as f64)
}
