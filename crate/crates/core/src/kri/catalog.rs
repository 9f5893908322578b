//! Every KRI id the engine knows how to compute.

use crate::telemetry::EventKind;

pub const NAKAMOTO_COEFFICIENT: &str = "nakamoto_coefficient";
pub const NAKAMOTO_RATIO: &str = "nakamoto_ratio";
pub const GINI: &str = "gini";
pub const THEIL: &str = "theil";
pub const MAX_PROVIDER_SHARE: &str = "max_provider_share";
pub const MAX_PROVIDER_STAKE_SHARE: &str = "max_provider_stake_share";
pub const MAX_COUNTRY_SHARE: &str = "max_country_share";
pub const MAX_ENTITY_STAKE_SHARE: &str = "max_entity_stake_share";
pub const CENSORSHIP_DISCREPANCY: &str = "censorship_discrepancy";
pub const NETWORK_VOTE_PCT: &str = "network_vote_pct";
pub const NETWORK_CONSECUTIVE_MISSED: &str = "network_consecutive_missed";
pub const NETWORK_MEAN_VOTE_DELAY_MS: &str = "network_mean_vote_delay_ms";
pub const OWN_VOTE_PCT: &str = "own_vote_pct";
pub const OWN_CONSECUTIVE_MISSED: &str = "own_consecutive_missed";
pub const OWN_MEAN_VOTE_DELAY_MS: &str = "own_mean_vote_delay_ms";
pub const FINALITY_DISTANCE: &str = "finality_distance";
pub const TPS: &str = "tps";
pub const BLOCKS_PER_SECOND: &str = "blocks_per_second";
pub const UPGRADE_READINESS: &str = "upgrade_readiness";
pub const VALIDATOR_CPU_PCT: &str = "validator_cpu_pct";
pub const TVS: &str = "tvs";
pub const SECURITY_RATIO: &str = "security_ratio";
pub const MARKET_CAP: &str = "market_cap";
pub const HOURLY_MARKET_CAP_CHANGE_PCT: &str = "hourly_market_cap_change_pct";
pub const VALIDATOR_ECONOMICS_PCT: &str = "validator_economics_pct";
pub const OFAC_TX_PCT: &str = "ofac_tx_pct";
pub const OFAC_BLOCK_PCT: &str = "ofac_block_pct";
pub const PENDING_LAWSUITS: &str = "pending_lawsuits";

/// Sorted by id.
pub const ALL: &[&str] = &[
    BLOCKS_PER_SECOND,
    CENSORSHIP_DISCREPANCY,
    FINALITY_DISTANCE,
    GINI,
    HOURLY_MARKET_CAP_CHANGE_PCT,
    MARKET_CAP,
    MAX_COUNTRY_SHARE,
    MAX_ENTITY_STAKE_SHARE,
    MAX_PROVIDER_SHARE,
    MAX_PROVIDER_STAKE_SHARE,
    NAKAMOTO_COEFFICIENT,
    NAKAMOTO_RATIO,
    NETWORK_CONSECUTIVE_MISSED,
    NETWORK_MEAN_VOTE_DELAY_MS,
    NETWORK_VOTE_PCT,
    OFAC_BLOCK_PCT,
    OFAC_TX_PCT,
    OWN_CONSECUTIVE_MISSED,
    OWN_MEAN_VOTE_DELAY_MS,
    OWN_VOTE_PCT,
    PENDING_LAWSUITS,
    SECURITY_RATIO,
    THEIL,
    TPS,
    TVS,
    UPGRADE_READINESS,
    VALIDATOR_CPU_PCT,
    VALIDATOR_ECONOMICS_PCT,
];

pub fn is_known(kri_id: &str) -> bool {
    ALL.binary_search(&kri_id).is_ok()
}

/// Event kinds whose windowed history a KRI reads. Heartbeats, facts and
/// finalizations are tracked cumulatively and never need history.
pub fn windowed_kinds(kri_id: &str) -> &'static [EventKind] {
    match kri_id {
        NETWORK_VOTE_PCT | OWN_VOTE_PCT | NETWORK_MEAN_VOTE_DELAY_MS | OWN_MEAN_VOTE_DELAY_MS => {
            &[EventKind::VoteCast, EventKind::BlockProposed]
        }
        NETWORK_CONSECUTIVE_MISSED | OWN_CONSECUTIVE_MISSED | BLOCKS_PER_SECOND => {
            &[EventKind::BlockProposed]
        }
        TPS => &[EventKind::ChainTxIncluded],
        OFAC_TX_PCT | OFAC_BLOCK_PCT => &[EventKind::ChainTxIncluded, EventKind::BlockProposed],
        CENSORSHIP_DISCREPANCY => &[EventKind::MempoolTxSeen, EventKind::ChainTxIncluded],
        HOURLY_MARKET_CAP_CHANGE_PCT => &[EventKind::MarketTick],
        _ => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_sorted_and_unique() {
        assert!(ALL.windows(2).all(|w| w[0] < w[1]));
        assert!(is_known(TPS));
        assert!(!is_known("tvl"));
    }
}
