use chainrisk_core::alert::{AlertRule, AlertState, Comparator, RuleSet, Severity};
use chainrisk_core::sim::{bundled, Scenario, Simulation};
use chainrisk_fixtures::fixture_log;
use chainrisk_service::audit::{AuditKind, AuditLog};
use chainrisk_service::pipeline::{ActionRequest, Pipeline, PipelineConfig, PipelineError, RuleUpdate, Source};
use chainrisk_service::report::generate_report;

fn replay(name: &str, config: PipelineConfig) -> Pipeline {
    let log = fixture_log(name).unwrap();
    Pipeline::new(config, Source::replay(log.events), AuditLog::in_memory()).unwrap()
}

fn with_rules(rules: RuleSet) -> PipelineConfig {
    PipelineConfig {
        rules,
        ..PipelineConfig::default()
    }
}

#[test]
fn healthy_replay_fires_nothing_and_score_is_stable() {
    let mut p = replay("healthy", PipelineConfig::default());
    p.run_to_end().unwrap();
    assert!(p.alerts().is_empty());
    let audit = p.audit();
    let audit = audit.read();
    let scores: Vec<f64> = audit
        .entries()
        .iter()
        .filter(|e| e.kind == AuditKind::ScoreComputed)
        .map(|e| e.payload["total"].as_f64().unwrap())
        .collect();
    assert_eq!(scores.len(), 384);
    let after_warmup = &scores[32..];
    let spread = after_warmup.iter().cloned().fold(f64::MIN, f64::max)
        - after_warmup.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.05, "healthy score moved by {spread}");
}

#[test]
fn every_tick_audits_samples_and_score() {
    let mut p = replay("market_shock", PipelineConfig::default());
    let ticks = p.run_to_end().unwrap();
    let audit = p.audit();
    let audit = audit.read();
    let count = |k| audit.entries().iter().filter(|e| e.kind == k).count() as u64;
    assert_eq!(count(AuditKind::KriSample), ticks * 28);
    assert_eq!(count(AuditKind::ScoreComputed), ticks);
    assert_eq!(count(AuditKind::AlertFired), p.alerts().len() as u64);
    assert_eq!(count(AuditKind::RuleChanged), 1);
    assert!(audit.entries().windows(2).all(|w| w[0].seq < w[1].seq));
}

#[test]
fn finality_stall_raises_crucial_alert_within_an_epoch() {
    let mut p = replay("appendix_a", PipelineConfig::default());
    p.run_to_end().unwrap();
    let onset = 1_700_000_000_000 + 128 * 400;
    let a = p.alerts().iter().find(|a| a.rule_id == "finality_distance").unwrap();
    assert_eq!(a.severity, Severity::Crucial);
    assert!(a.fired_at > onset && a.fired_at <= onset + 32 * 400, "fired at {}", a.fired_at);
}

#[test]
fn hetzner_provider_alert_precedes_vote_alert() {
    let file = bundled::load("hetzner_outage").unwrap();
    let sim = Simulation::new(file.config, file.scenarios).unwrap();
    let mut p = Pipeline::new(
        with_rules(RuleSet::table1()),
        Source::simulate(sim, Some(256)),
        AuditLog::in_memory(),
    )
    .unwrap();
    p.run_to_end().unwrap();
    let at = |rule: &str| p.alerts().iter().find(|a| a.rule_id == rule).unwrap().fired_at;
    assert!(at("max_provider_share") < at("network_vote_pct"));
}

#[test]
fn actions_are_audited_and_reported() {
    let mut p = replay("low_throughput", PipelineConfig::default());
    p.run_to_end().unwrap();
    let alert_id = p.alerts()[0].alert_id.clone();
    let req = |actor: &str| ActionRequest {
        actor: actor.into(),
        alert_id: Some(alert_id.clone()),
        action_type: "halt trading".into(),
        note: "throughput below policy".into(),
    };
    assert!(matches!(
        p.record_action(req("  ")),
        Err(PipelineError::Alert(chainrisk_core::alert::AlertError::EmptyActor))
    ));
    let a = p.record_action(req("risk-desk")).unwrap();
    let b = p.record_action(req("risk-desk")).unwrap();
    assert!(b.seq > a.seq);
    let audit = p.audit();
    let report = generate_report(audit.read().entries(), i64::MIN, i64::MAX).unwrap();
    assert_eq!(report.actions.len(), 2);
    assert_eq!(report.actions[0].alert_id.as_deref(), Some(alert_id.as_str()));
    assert_eq!(report.actions[0].action_type, "halt trading");
}

#[test]
fn acknowledgment_is_audited_once() {
    let mut p = replay("low_throughput", PipelineConfig::default());
    for _ in 0..100 {
        p.step().unwrap();
    }
    let id = p.alerts().iter().find(|a| a.state == AlertState::Active).unwrap().alert_id.clone();
    let acked = p.acknowledge(&id, "ops", "looking").unwrap();
    assert_eq!(acked.state, AlertState::Acknowledged);
    assert!(p.acknowledge(&id, "ops", "again").is_err());
    let audit = p.audit();
    let acks: Vec<_> = audit
        .read()
        .entries()
        .iter()
        .filter(|e| e.kind == AuditKind::AlertAcknowledged)
        .cloned()
        .collect();
    assert_eq!(acks.len(), 1);
    assert_eq!(acks[0].actor.as_deref(), Some("ops"));
}

#[test]
fn lowered_tps_bound_stops_firing() {
    // Throughput here sits around 70 to 80 transactions per second.
    let mut p = replay("low_throughput", PipelineConfig::default());
    let update = RuleUpdate {
        upsert: vec![AlertRule::static_threshold("tps", "tps", Severity::Crucial, Comparator::Lt, 50.0)],
        ..RuleUpdate::default()
    };
    let v1 = p.rules().version;
    let next = p.update_rules(update.clone(), "ops").unwrap();
    assert_eq!(next.version, v1 + 1);
    assert_eq!(p.update_rules(update, "ops").unwrap().version, v1 + 2);
    p.run_to_end().unwrap();
    assert!(p.alerts().iter().all(|a| a.rule_id != "tps"));
    let tps = p.state().read().latest["tps"].value.unwrap();
    assert!(tps > 50.0 && tps < 100.0, "tps {tps}");
}

#[test]
fn removing_a_rule_resolves_its_alert() {
    let mut p = replay("low_throughput", PipelineConfig::default());
    for _ in 0..100 {
        p.step().unwrap();
    }
    assert!(p.alerts().iter().any(|a| a.rule_id == "tps" && a.is_open()));
    p.update_rules(
        RuleUpdate {
            remove: vec!["tps".into()],
            ..RuleUpdate::default()
        },
        "ops",
    )
    .unwrap();
    assert!(p.alerts().iter().all(|a| !(a.rule_id == "tps" && a.is_open())));
    assert!(p
        .update_rules(RuleUpdate { remove: vec!["tps".into()], ..RuleUpdate::default() }, "ops")
        .is_err());
}

#[test]
fn injection_requires_a_simulated_source() {
    let mut p = replay("healthy", PipelineConfig::default());
    let outage = Scenario::ProviderOutage {
        provider: "aws".into(),
        start_slot: 0,
        end_slot: 10,
    };
    assert!(matches!(p.inject(outage, "ops"), Err(PipelineError::NotSimulating)));
}

#[test]
fn injected_outage_is_relative_and_audited() {
    let file = bundled::load("healthy").unwrap();
    let sim = Simulation::new(file.config, file.scenarios).unwrap();
    let mut p = Pipeline::new(PipelineConfig::default(), Source::simulate(sim, Some(200)), AuditLog::in_memory()).unwrap();
    for _ in 0..64 {
        p.step().unwrap();
    }
    let before = p.state().read().latest["network_vote_pct"].value.unwrap();
    let absolute = p
        .inject(
            Scenario::VoteDegradation {
                fraction: 0.3,
                start_slot: 0,
                end_slot: 100,
            },
            "ops",
        )
        .unwrap();
    assert_eq!(absolute.active_range(), (64, 164));
    for _ in 0..40 {
        p.step().unwrap();
    }
    let after = p.state().read().latest["network_vote_pct"].value.unwrap();
    assert!(after < before - 10.0, "{before} -> {after}");
    let audit = p.audit();
    assert_eq!(
        audit.read().entries().iter().filter(|e| e.kind == AuditKind::ScenarioInjected).count(),
        1
    );
}

#[test]
fn state_snapshot_restores_rules() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("state.json");
    let config = PipelineConfig {
        snapshot_path: Some(snap.clone()),
        ..PipelineConfig::default()
    };
    let mut p = replay("healthy", config);
    p.update_rules(
        RuleUpdate {
            remove: vec!["tps".into()],
            ..RuleUpdate::default()
        },
        "ops",
    )
    .unwrap();
    let restored = chainrisk_service::pipeline::Snapshot::load(&snap).unwrap();
    assert_eq!(restored.rules, *p.rules());
    assert!(restored.rules.get("tps").is_none());
}
