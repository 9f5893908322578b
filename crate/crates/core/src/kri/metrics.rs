//! Windowed metric computations. Each function is pure over the event
//! slices it is given, so recomputing over the same window of the same log
//! always yields the same value.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use semver::Version;

use super::KriError;
use crate::telemetry::{EventPayload, NodeDescriptor, TelemetryEvent};

/// Which validators a consensus metric covers.
#[derive(Clone, Copy, Debug)]
pub enum Scope<'a> {
    Network,
    Validators(&'a BTreeSet<String>),
}

impl Scope<'_> {
    fn contains(&self, node_id: &str) -> bool {
        match self {
            Scope::Network => true,
            Scope::Validators(set) => set.contains(node_id),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsensusMetrics {
    /// Stake-weighted votes cast over votes expected, in percent.
    pub pct_successful_votes: f64,
    /// Missed-proposal streak ending at the latest in-scope proposal.
    pub consecutive_missed_proposals: u64,
    /// `None` when no in-scope vote arrived in the window.
    pub mean_vote_delay_ms: Option<f64>,
}

/// Consensus performance over one window.
///
/// `proposals` and `votes` are the window's `BlockProposed` and `VoteCast`
/// events; every proposal marks one slot in which each in-scope validator
/// was expected to vote with its full stake from `stakes`.
pub fn consensus_metrics(
    proposals: &[TelemetryEvent],
    votes: &[TelemetryEvent],
    stakes: &BTreeMap<String, f64>,
    scope: Scope<'_>,
) -> Result<ConsensusMetrics, KriError> {
    let slots: BTreeSet<u64> = proposals
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::BlockProposed(b) => Some(b.slot),
            _ => None,
        })
        .collect();
    if slots.is_empty() {
        return Err(KriError::EmptyWindow);
    }
    let scope_stake: f64 = stakes
        .iter()
        .filter(|(id, _)| scope.contains(id))
        .map(|(_, s)| s)
        .sum();
    if scope_stake <= 0.0 {
        return Err(KriError::EmptyScope);
    }

    let mut voted = 0.0;
    let mut delay_sum = 0.0;
    let mut delay_n = 0u64;
    for e in votes {
        if let EventPayload::VoteCast(v) = &e.payload {
            if !scope.contains(&v.voter) || !slots.contains(&v.slot) {
                continue;
            }
            voted += stakes.get(&v.voter).copied().unwrap_or(0.0);
            delay_sum += v.arrival_delay_ms as f64;
            delay_n += 1;
        }
    }
    let expected = scope_stake * slots.len() as f64;
    let pct = (voted / expected * 100.0).clamp(0.0, 100.0);

    let mut streak = 0;
    for e in proposals.iter().rev() {
        if let EventPayload::BlockProposed(b) = &e.payload {
            if !scope.contains(&b.proposer) {
                continue;
            }
            if b.success {
                break;
            }
            streak += 1;
        }
    }

    Ok(ConsensusMetrics {
        pct_successful_votes: pct,
        consecutive_missed_proposals: streak,
        mean_vote_delay_ms: (delay_n > 0).then(|| delay_sum / delay_n as f64),
    })
}

/// Epoch containing `at` given the chain origin and timing.
pub fn epoch_at(at: i64, origin: i64, slot_duration_ms: u64, slots_per_epoch: u64) -> i64 {
    let slot = (at - origin).max(0) as u64 / slot_duration_ms;
    (slot / slots_per_epoch) as i64
}

/// Distance from `current_epoch` to the newest finalized epoch.
///
/// Before the first finalization event can exist (the first two epochs)
/// the chain is treated as finalized two epochs back, so a healthy chain
/// reads 2 from genesis onwards.
pub fn finality_distance_from(current_epoch: i64, last_finalized: Option<u64>) -> u64 {
    let sentinel = (current_epoch - 2).min(-1);
    let effective = last_finalized.map_or(sentinel, |e| (e as i64).max(sentinel));
    (current_epoch - effective).max(0) as u64
}

/// Finality distance at `at`, recomputed from the finalization events.
pub fn finality_distance(
    finalizations: &[TelemetryEvent],
    at: i64,
    origin: i64,
    slot_duration_ms: u64,
    slots_per_epoch: u64,
) -> u64 {
    let last = finalizations
        .iter()
        .filter(|e| e.ts <= at)
        .filter_map(|e| match &e.payload {
            EventPayload::EpochFinalized(f) => Some(f.epoch_index),
            _ => None,
        })
        .max();
    finality_distance_from(epoch_at(at, origin, slot_duration_ms, slots_per_epoch), last)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LivenessMetrics {
    pub tps: f64,
    pub blocks_per_second: f64,
}

/// Throughput over a window of `duration_ms`.
pub fn liveness_metrics(
    included: &[TelemetryEvent],
    proposals: &[TelemetryEvent],
    duration_ms: u64,
) -> Result<LivenessMetrics, KriError> {
    if duration_ms == 0 {
        return Err(KriError::EmptyWindow);
    }
    let secs = duration_ms as f64 / 1000.0;
    let txs = included
        .iter()
        .filter(|e| matches!(e.payload, EventPayload::ChainTxIncluded(_)))
        .count();
    let blocks = proposals
        .iter()
        .filter(|e| matches!(&e.payload, EventPayload::BlockProposed(b) if b.success))
        .count();
    Ok(LivenessMetrics {
        tps: txs as f64 / secs,
        blocks_per_second: blocks as f64 / secs,
    })
}

/// Newest semantic version among `nodes`; unparsable versions are ignored.
pub fn latest_version(nodes: &[NodeDescriptor]) -> Option<String> {
    nodes
        .iter()
        .filter_map(|n| Version::parse(&n.client_version).ok())
        .max()
        .map(|v| v.to_string())
}

/// Fraction of nodes running exactly `latest_version`.
pub fn upgrade_readiness(nodes: &[NodeDescriptor], latest_version: &str) -> Result<f64, KriError> {
    if nodes.is_empty() {
        return Err(KriError::EmptyNodeSet);
    }
    let current = nodes
        .iter()
        .filter(|n| n.client_version == latest_version)
        .count();
    Ok(current as f64 / nodes.len() as f64)
}

pub fn mean_cpu(nodes: &[NodeDescriptor]) -> Result<f64, KriError> {
    if nodes.is_empty() {
        return Err(KriError::EmptyNodeSet);
    }
    Ok(nodes.iter().map(|n| n.cpu_pct).sum::<f64>() / nodes.len() as f64)
}

/// Names of the off-chain facts the financial and legal KRIs consume.
pub mod facts {
    pub const VALUE_SECURED: &str = "value_secured";
    pub const VALIDATOR_REWARDS_ANNUAL: &str = "validator_rewards_annual";
    pub const VALIDATOR_COSTS_ANNUAL: &str = "validator_costs_annual";
    pub const PENDING_LAWSUITS: &str = "pending_lawsuits";
}

/// Financial KRIs. Each is `Err(MissingExternalFact)` or `Err(EmptyWindow)`
/// on its own, so one missing input does not hide the others.
#[derive(Clone, Debug, PartialEq)]
pub struct FinancialMetrics {
    pub market_cap: Result<f64, KriError>,
    pub hourly_market_cap_change_pct: Result<f64, KriError>,
    pub tvs: Result<f64, KriError>,
    pub security_ratio: Result<f64, KriError>,
    pub validator_economics_pct: Result<f64, KriError>,
}

fn tick(e: &TelemetryEvent) -> Option<(f64, f64)> {
    match &e.payload {
        EventPayload::MarketTick(m) => Some((m.price, m.circulating_supply)),
        _ => None,
    }
}

fn fact(facts: &BTreeMap<String, f64>, name: &str) -> Result<f64, KriError> {
    facts
        .get(name)
        .copied()
        .ok_or_else(|| KriError::MissingExternalFact(name.into()))
}

/// `hour_ticks` are the market ticks of the trailing change window; the
/// last one is the current price. `total_staked` is in tokens.
pub fn financial_metrics(
    hour_ticks: &[TelemetryEvent],
    total_staked: f64,
    facts: &BTreeMap<String, f64>,
) -> FinancialMetrics {
    let first = hour_ticks.iter().find_map(tick);
    let last = hour_ticks.iter().rev().find_map(tick);
    let market_cap = last.map(|(p, s)| p * s).ok_or(KriError::EmptyWindow);
    let change = match (first, last) {
        (Some((p0, s0)), Some((p1, s1))) if p0 * s0 > 0.0 => {
            Ok((p1 * s1 - p0 * s0) / (p0 * s0) * 100.0)
        }
        _ => Err(KriError::EmptyWindow),
    };
    let tvs = last.map(|(p, _)| p * total_staked).ok_or(KriError::EmptyWindow);
    let security_ratio = match (&tvs, fact(facts, facts::VALUE_SECURED)) {
        (Ok(t), Ok(v)) if *t > 0.0 => Ok(v / t),
        (Ok(_), Ok(_)) => Err(KriError::EmptyWindow),
        (Err(e), _) => Err(e.clone()),
        (_, Err(e)) => Err(e),
    };
    let economics = match (
        fact(facts, facts::VALIDATOR_REWARDS_ANNUAL),
        fact(facts, facts::VALIDATOR_COSTS_ANNUAL),
    ) {
        (Ok(r), Ok(c)) if c > 0.0 => Ok(r / c * 100.0),
        (Ok(_), Ok(_)) => Err(KriError::MissingExternalFact(facts::VALIDATOR_COSTS_ANNUAL.into())),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    FinancialMetrics {
        market_cap,
        hourly_market_cap_change_pct: change,
        tvs,
        security_ratio,
        validator_economics_pct: economics,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplianceMetrics {
    /// `None` when no transaction was included in the window.
    pub ofac_tx_pct: Option<f64>,
    /// `None` when no block was produced in the window.
    pub ofac_block_pct: Option<f64>,
    pub pending_lawsuits: Option<f64>,
}

/// Sanctioned-transaction and sanctioned-block percentages. Blocks are
/// counted unweighted.
pub fn compliance_metrics(
    included: &[TelemetryEvent],
    proposals: &[TelemetryEvent],
    facts: &BTreeMap<String, f64>,
) -> ComplianceMetrics {
    let mut total = 0u64;
    let mut sanctioned = 0u64;
    let mut tainted_slots = HashSet::new();
    for e in included {
        if let EventPayload::ChainTxIncluded(t) = &e.payload {
            total += 1;
            if t.sanctioned {
                sanctioned += 1;
                tainted_slots.insert(t.slot);
            }
        }
    }
    let mut blocks = 0u64;
    let mut tainted = 0u64;
    for e in proposals {
        if let EventPayload::BlockProposed(b) = &e.payload {
            if b.success {
                blocks += 1;
                if tainted_slots.contains(&b.slot) {
                    tainted += 1;
                }
            }
        }
    }
    ComplianceMetrics {
        ofac_tx_pct: (total > 0).then(|| sanctioned as f64 / total as f64 * 100.0),
        ofac_block_pct: (blocks > 0).then(|| tainted as f64 / blocks as f64 * 100.0),
        pending_lawsuits: facts.get(facts::PENDING_LAWSUITS).copied(),
    }
}

/// Fraction of mempool transactions seen at or before `cutoff` (the
/// evaluation instant minus the inclusion horizon) that never appear in
/// `included`. Returns `None` when no transaction qualifies.
pub fn censorship_discrepancy(
    seen: &[TelemetryEvent],
    included: &[TelemetryEvent],
    cutoff: i64,
    source_tag: Option<&str>,
) -> Option<f64> {
    let on_chain: HashSet<&str> = included
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::ChainTxIncluded(t) => Some(t.tx_id.as_str()),
            _ => None,
        })
        .collect();
    let mut old = 0u64;
    let mut missing = 0u64;
    for e in seen.iter().filter(|e| e.ts <= cutoff) {
        if let EventPayload::MempoolTxSeen(m) = &e.payload {
            if source_tag.is_some_and(|s| s != m.source_tag) {
                continue;
            }
            old += 1;
            if !on_chain.contains(m.tx_id.as_str()) {
                missing += 1;
            }
        }
    }
    (old > 0).then(|| missing as f64 / old as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{
        BlockProposed, ChainTxIncluded, EpochFinalized, MarketTick, MempoolTxSeen, VoteCast,
    };

    fn block(ts: i64, slot: u64, proposer: &str, success: bool) -> TelemetryEvent {
        TelemetryEvent::new(
            ts,
            EventPayload::BlockProposed(BlockProposed {
                slot,
                proposer: proposer.into(),
                success,
                tx_count: 0,
            }),
        )
    }

    fn vote(ts: i64, slot: u64, voter: &str) -> TelemetryEvent {
        TelemetryEvent::new(
            ts,
            EventPayload::VoteCast(VoteCast {
                slot,
                voter: voter.into(),
                arrival_delay_ms: 100,
            }),
        )
    }

    fn tx(ts: i64, id: &str, slot: u64, sanctioned: bool) -> TelemetryEvent {
        TelemetryEvent::new(
            ts,
            EventPayload::ChainTxIncluded(ChainTxIncluded {
                tx_id: id.into(),
                slot,
                sanctioned,
            }),
        )
    }

    fn stakes(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn full_participation_is_100_pct() {
        let st = stakes(&[("a", 1.0), ("b", 3.0)]);
        let props = [block(0, 0, "a", true), block(1, 1, "b", true)];
        let votes = [vote(0, 0, "a"), vote(0, 0, "b"), vote(1, 1, "a"), vote(1, 1, "b")];
        let m = consensus_metrics(&props, &votes, &st, Scope::Network).unwrap();
        assert_eq!(m.pct_successful_votes, 100.0);
        assert_eq!(m.consecutive_missed_proposals, 0);
        assert_eq!(m.mean_vote_delay_ms, Some(100.0));
    }

    #[test]
    fn streak_counts_trailing_misses() {
        let st = stakes(&[("a", 1.0)]);
        let props = [block(0, 0, "a", true), block(1, 1, "a", false), block(2, 2, "a", false)];
        let m = consensus_metrics(&props, &[], &st, Scope::Network).unwrap();
        assert_eq!(m.consecutive_missed_proposals, 2);
        assert_eq!(m.pct_successful_votes, 0.0);
        assert_eq!(m.mean_vote_delay_ms, None);
        assert_eq!(
            consensus_metrics(&[], &[], &st, Scope::Network),
            Err(KriError::EmptyWindow)
        );
    }

    #[test]
    fn vote_pct_is_stake_weighted() {
        // 40 small validators hold 20% of stake; all of them are silent.
        let mut pairs = Vec::new();
        for i in 0..60 {
            pairs.push((format!("big{i}"), 8.0));
        }
        for i in 0..40 {
            pairs.push((format!("small{i}"), 3.0));
        }
        let st: BTreeMap<String, f64> = pairs.into_iter().collect();
        let props = [block(0, 7, "big0", true)];
        let votes: Vec<_> = (0..60).map(|i| vote(0, 7, &format!("big{i}"))).collect();
        let m = consensus_metrics(&props, &votes, &st, Scope::Network).unwrap();
        assert!((m.pct_successful_votes - 80.0).abs() < 1e-9);
    }

    #[test]
    fn own_scope_filters_validators() {
        let st = stakes(&[("a", 1.0), ("b", 1.0)]);
        let own: BTreeSet<String> = ["a".to_string()].into();
        let props = [block(0, 0, "a", false), block(1, 1, "b", true)];
        let votes = [vote(0, 0, "b"), vote(1, 1, "b")];
        let m = consensus_metrics(&props, &votes, &st, Scope::Validators(&own)).unwrap();
        assert_eq!(m.pct_successful_votes, 0.0);
        assert_eq!(m.consecutive_missed_proposals, 1);
        let nobody: BTreeSet<String> = ["z".to_string()].into();
        assert_eq!(
            consensus_metrics(&props, &votes, &st, Scope::Validators(&nobody)),
            Err(KriError::EmptyScope)
        );
    }

    #[test]
    fn finality_distance_examples() {
        assert_eq!(finality_distance_from(0, None), 2);
        assert_eq!(finality_distance_from(1, None), 2);
        assert_eq!(finality_distance_from(7, Some(5)), 2);
        assert_eq!(finality_distance_from(196, Some(191)), 5);
        assert_eq!(finality_distance_from(3, None), 4);
        let fin = [TelemetryEvent::new(
            800,
            EventPayload::EpochFinalized(EpochFinalized { epoch_index: 0 }),
        )];
        // Slot 2 of a 1-slot-per-epoch chain, 400 ms slots.
        assert_eq!(finality_distance(&fin, 800, 0, 400, 1), 2);
        assert_eq!(finality_distance(&fin, 1200, 0, 400, 1), 3);
    }

    #[test]
    fn tps_over_window() {
        let txs: Vec<_> = (0..600).map(|i| tx(0, &format!("t{i}"), 0, false)).collect();
        let m = liveness_metrics(&txs, &[], 60_000).unwrap();
        assert_eq!(m.tps, 10.0);
        assert_eq!(liveness_metrics(&[], &[], 60_000).unwrap().tps, 0.0);
        assert_eq!(liveness_metrics(&[], &[], 0), Err(KriError::EmptyWindow));
    }

    #[test]
    fn readiness_against_latest() {
        let mk = |v: &str| NodeDescriptor {
            node_id: v.into(),
            entity_id: v.into(),
            provider: "p".into(),
            country: "c".into(),
            client_version: v.into(),
            stake: 1.0,
            online: true,
            cpu_pct: 0.0,
        };
        let mut nodes: Vec<_> = (0..4).map(|_| mk("1.5.0")).collect();
        nodes.extend((0..6).map(|_| mk("1.4.0")));
        let latest = latest_version(&nodes).unwrap();
        assert_eq!(latest, "1.5.0");
        assert_eq!(upgrade_readiness(&nodes, &latest).unwrap(), 0.4);
        assert_eq!(upgrade_readiness(&nodes, "2.0.0").unwrap(), 0.0);
        assert_eq!(upgrade_readiness(&[], "1.0.0"), Err(KriError::EmptyNodeSet));
    }

    #[test]
    fn financial_examples() {
        let t = |ts, price, supply| {
            TelemetryEvent::new(
                ts,
                EventPayload::MarketTick(MarketTick {
                    price,
                    circulating_supply: supply,
                }),
            )
        };
        let mut f = BTreeMap::new();
        f.insert(facts::VALUE_SECURED.to_string(), 5.0e9);
        f.insert(facts::VALIDATOR_REWARDS_ANNUAL.to_string(), 10_000.0);
        f.insert(facts::VALIDATOR_COSTS_ANNUAL.to_string(), 40_000.0);
        let m = financial_metrics(&[t(0, 2000.0, 1.0), t(1, 2000.0, 1.0)], 1.0e7, &f);
        assert_eq!(m.tvs, Ok(2.0e10));
        assert_eq!(m.security_ratio, Ok(0.25));
        assert_eq!(m.validator_economics_pct, Ok(25.0));
        let m = financial_metrics(&[t(0, 100.0, 1.0), t(1, 106.0, 1.0)], 1.0, &f);
        assert!((m.hourly_market_cap_change_pct.unwrap() - 6.0).abs() < 1e-12);
        let m = financial_metrics(&[t(0, 1.0, 1.0)], 1.0, &BTreeMap::new());
        assert!(matches!(m.security_ratio, Err(KriError::MissingExternalFact(_))));
        assert_eq!(m.market_cap, Ok(1.0));
    }

    #[test]
    fn ofac_percentages() {
        let mut txs: Vec<_> = (0..98).map(|i| tx(0, &format!("t{i}"), i % 10, false)).collect();
        txs.push(tx(0, "s1", 3, true));
        txs.push(tx(0, "s2", 3, true));
        let props: Vec<_> = (0..10).map(|s| block(0, s, "a", true)).collect();
        let mut f = BTreeMap::new();
        f.insert(facts::PENDING_LAWSUITS.to_string(), 1.0);
        let m = compliance_metrics(&txs, &props, &f);
        assert_eq!(m.ofac_tx_pct, Some(2.0));
        assert_eq!(m.ofac_block_pct, Some(10.0));
        assert_eq!(m.pending_lawsuits, Some(1.0));
        assert_eq!(compliance_metrics(&[], &[], &BTreeMap::new()).ofac_tx_pct, None);
    }

    #[test]
    fn censorship_by_source() {
        let seen = |i: u32, src: &str| {
            TelemetryEvent::new(
                0,
                EventPayload::MempoolTxSeen(MempoolTxSeen {
                    tx_id: format!("{src}{i}"),
                    source_tag: src.into(),
                    sanctioned: false,
                }),
            )
        };
        let mut mem: Vec<_> = (0..10).map(|i| seen(i, "A")).collect();
        mem.extend((0..10).map(|i| seen(i, "B")));
        let inc: Vec<_> = (0..10).map(|i| tx(1, &format!("B{i}"), 0, false)).collect();
        assert_eq!(censorship_discrepancy(&mem, &inc, 5, Some("A")), Some(1.0));
        assert_eq!(censorship_discrepancy(&mem, &inc, 5, Some("B")), Some(0.0));
        assert_eq!(censorship_discrepancy(&mem, &inc, 5, None), Some(0.5));
        assert_eq!(censorship_discrepancy(&mem, &inc, -1, None), None);
    }
}
