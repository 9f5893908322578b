//! Property tests for the telemetry codec and the scoring algebra.

use std::collections::BTreeMap;

use chainrisk_core::scoring::{score_category_weighted, score_kri_weighted, NormSpec};
use chainrisk_core::telemetry::*;
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,11}"
}

fn payload() -> impl Strategy<Value = EventPayload> {
    prop_oneof![
        (any::<u32>(), ident(), any::<bool>(), 0u64..10_000).prop_map(|(slot, proposer, success, tx_count)| {
            EventPayload::BlockProposed(BlockProposed { slot: slot.into(), proposer, success, tx_count })
        }),
        (any::<u32>(), ident(), 0u64..5_000).prop_map(|(slot, voter, arrival_delay_ms)| {
            EventPayload::VoteCast(VoteCast { slot: slot.into(), voter, arrival_delay_ms })
        }),
        any::<u32>().prop_map(|e| EventPayload::EpochFinalized(EpochFinalized { epoch_index: e.into() })),
        (ident(), any::<bool>(), 0.0..100.0f64, ident(), ident(), ident(), 0.0..1e9f64).prop_map(
            |(node_id, online, cpu_pct, provider, country, entity_id, stake)| {
                EventPayload::NodeHeartbeat(NodeHeartbeat {
                    node_id,
                    online,
                    cpu_pct,
                    client_version: "1.18.2".into(),
                    provider,
                    country,
                    entity_id,
                    stake,
                })
            }
        ),
        (ident(), ident(), any::<bool>()).prop_map(|(tx_id, source_tag, sanctioned)| {
            EventPayload::MempoolTxSeen(MempoolTxSeen { tx_id, source_tag, sanctioned })
        }),
        (0.01..1e5f64, 0.0..1e12f64).prop_map(|(price, circulating_supply)| {
            EventPayload::MarketTick(MarketTick { price, circulating_supply })
        }),
        (ident(), -1e9..1e9f64).prop_map(|(name, value)| EventPayload::ExternalFact(ExternalFact { name, value })),
    ]
}

fn events() -> impl Strategy<Value = Vec<TelemetryEvent>> {
    prop::collection::vec((0i64..5_000, payload()), 0..40).prop_map(|mut v| {
        v.sort_by_key(|(ts, _)| *ts);
        v.into_iter().map(|(ts, p)| TelemetryEvent::new(1_700_000_000_000 + ts, p)).collect()
    })
}

proptest! {
    #[test]
    fn record_round_trips(event in (0i64..i64::MAX / 2, payload()).prop_map(|(ts, p)| TelemetryEvent::new(ts, p))) {
        let line = encode_record(&event);
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(parse_record(&line, 1).unwrap(), event);
    }

    #[test]
    fn log_round_trips(log in events()) {
        let bytes = write_event_log(&log).unwrap();
        prop_assert_eq!(parse_event_log_bytes(&bytes).unwrap(), log);
    }

    #[test]
    fn normalization_is_clamped_and_monotone(
        healthy in -100.0..100.0f64,
        span in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64],
        a in -300.0..300.0f64,
        b in -300.0..300.0f64,
    ) {
        let spec = NormSpec { kri_id: "k".into(), healthy_anchor: healthy, alert_threshold: healthy + span };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (spec.apply(lo), spec.apply(hi));
        prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        // Moving toward the alert threshold never lowers the normalized value.
        if span > 0.0 { prop_assert!(x <= y) } else { prop_assert!(x >= y) }
        prop_assert_eq!(spec.apply(healthy), 0.0);
        prop_assert_eq!(spec.apply(healthy + span), 1.0);
    }

    #[test]
    fn score_is_bounded_and_monotone(
        raw in prop::collection::vec((0.01..1.0f64, prop::option::weighted(0.85, 0.0..=1.0f64)), 1..12),
        pick in any::<prop::sample::Index>(),
        bump in 0.0..=1.0f64,
    ) {
        prop_assume!(raw.iter().any(|(_, v)| v.is_some()));
        let sum: f64 = raw.iter().map(|(w, _)| w).sum();
        let weights: BTreeMap<String, f64> =
            raw.iter().enumerate().map(|(i, (w, _))| (format!("k{i:02}"), w / sum)).collect();
        let values: BTreeMap<String, Option<f64>> =
            raw.iter().enumerate().map(|(i, (_, v))| (format!("k{i:02}"), *v)).collect();
        let base = score_kri_weighted(&values, &weights).unwrap();
        prop_assert!((0.0..=1.0).contains(&base.total));

        let known: Vec<&String> = values.iter().filter(|(_, v)| v.is_some()).map(|(k, _)| k).collect();
        let key = known[pick.index(known.len())].clone();
        let x = values[&key].unwrap();
        let mut raised = values.clone();
        raised.insert(key, Some(x + bump * (1.0 - x)));
        prop_assert!(score_kri_weighted(&raised, &weights).unwrap().total >= base.total);

        // One category holding everything gives the same score bitwise.
        let template = BTreeMap::from([("all".to_string(), weights.clone())]);
        let cw = BTreeMap::from([("all".to_string(), 1.0)]);
        let cat = score_category_weighted(&values, &template, &cw).unwrap();
        prop_assert_eq!(cat.total.to_bits(), base.total.to_bits());
    }
}
