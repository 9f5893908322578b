//! Discrete-slot proof-of-stake network.
//!
//! Randomness comes from a single `Xoshiro256PlusPlus` stream seeded with
//! `SimConfig::seed` via `seed_from_u64` (SplitMix64 expansion). Draw order
//! within a slot is fixed: transactions (count, then source and sanction
//! flag per transaction), proposer, votes in validator order, heartbeat CPU
//! jitter in validator order, then the price step.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::config::apportion;
use super::{validate_scenarios, Scenario, SimConfig, SimError};
use crate::telemetry::{
    write_event_log, BlockProposed, ChainTxIncluded, EpochFinalized, EventPayload, ExternalFact,
    MarketTick, MempoolTxSeen, NodeHeartbeat, TelemetryEvent, VoteCast,
};

/// Voting probability applied to every validator while a finality stall is active.
pub const STALLED_VOTE_PROBABILITY: f64 = 0.5;

/// Facts published at genesis so replay consumers can recover chain timing.
pub const FACT_SLOTS_PER_EPOCH: &str = "slots_per_epoch";
pub const FACT_SLOT_DURATION_MS: &str = "slot_duration_ms";

#[derive(Clone, Debug, PartialEq)]
pub struct ValidatorState {
    pub node_id: String,
    pub entity_id: String,
    pub provider: String,
    pub country: String,
    pub stake: f64,
    pub online: bool,
    pub voting_probability: f64,
    pub client_version: String,
    pub cpu_pct: f64,
}

#[derive(Clone, Debug)]
struct PendingTx {
    id: String,
    source: String,
    sanctioned: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Effects {
    censored_sources: BTreeSet<String>,
    cpu_target: Option<f64>,
    price_shock_pct: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Participation {
    voted: f64,
    expected: f64,
}

impl Participation {
    fn has_quorum(&self) -> bool {
        self.expected > 0.0 && 3.0 * self.voted >= 2.0 * self.expected
    }
}

#[derive(Clone, Debug)]
pub struct NetworkState {
    config: SimConfig,
    pub current_slot: u64,
    pub validators: Vec<ValidatorState>,
    /// Starts at `-2` so the healthy distance reads 2 from epoch 0.
    pub last_finalized_epoch: i64,
    pub price: f64,
    cumulative_stake: Vec<f64>,
    total_stake: f64,
    rng: Xoshiro256PlusPlus,
    pending: VecDeque<PendingTx>,
    next_tx: u64,
    participation: BTreeMap<i64, Participation>,
    effects: Effects,
}

impl PartialEq for NetworkState {
    fn eq(&self, other: &Self) -> bool {
        self.current_slot == other.current_slot
            && self.validators == other.validators
            && self.last_finalized_epoch == other.last_finalized_epoch
            && self.price == other.price
            && self.rng == other.rng
            && self.next_tx == other.next_tx
            && self.effects == other.effects
    }
}

pub fn init_network(config: SimConfig) -> Result<NetworkState, SimError> {
    config.validate()?;
    let n = config.validator_count;
    let stakes = config.stakes();
    let providers = apportion(&config.providers, n);
    let countries = apportion(&config.countries, n);
    let entity_count = config.entity_count.unwrap_or(n);
    let width = n.saturating_sub(1).to_string().len().max(3);
    let validators: Vec<ValidatorState> = (0..n)
        .map(|i| ValidatorState {
            node_id: format!("val-{i:0width$}"),
            entity_id: format!("ent-{:0width$}", i % entity_count),
            provider: providers[i].clone(),
            country: countries[i].clone(),
            stake: stakes[i],
            online: true,
            voting_probability: config.base_vote_probability,
            client_version: config.latest_client_version.clone(),
            cpu_pct: config.cpu_baseline_pct,
        })
        .collect();
    let mut cumulative_stake = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in &validators {
        acc += v.stake;
        cumulative_stake.push(acc);
    }
    Ok(NetworkState {
        rng: Xoshiro256PlusPlus::seed_from_u64(config.seed),
        price: config.initial_price,
        current_slot: 0,
        validators,
        last_finalized_epoch: -2,
        cumulative_stake,
        total_stake: acc,
        pending: VecDeque::new(),
        next_tx: 0,
        participation: BTreeMap::new(),
        effects: Effects::default(),
        config,
    })
}

impl NetworkState {
    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn total_stake(&self) -> f64 {
        self.validators.iter().map(|v| v.stake).sum()
    }

    pub fn current_epoch(&self) -> i64 {
        (self.current_slot / self.config.slots_per_epoch) as i64
    }

    pub fn finality_distance(&self) -> i64 {
        self.current_epoch() - self.last_finalized_epoch
    }

    fn slot_ts(&self, slot: u64) -> i64 {
        self.config.genesis_ms + (slot * self.config.slot_duration_ms) as i64
    }

    /// Recomputes scenario-driven validator state for `slot`. Effects of
    /// scenarios whose window has closed revert to the configured baseline.
    pub fn apply_scenarios(&mut self, scenarios: &[Scenario], slot: u64) {
        let n = self.validators.len();
        let active: Vec<&Scenario> = scenarios.iter().filter(|s| s.is_active(slot)).collect();

        let offline: BTreeSet<&str> = active
            .iter()
            .filter_map(|s| match s {
                Scenario::ProviderOutage { provider, .. } => Some(provider.as_str()),
                _ => None,
            })
            .collect();
        let stall_cpu = active.iter().find_map(|s| match s {
            Scenario::FinalityStall { cpu_spike_pct, .. } => Some(*cpu_spike_pct),
            _ => None,
        });
        // VoteDegradation silences the highest-indexed validators.
        let degraded_from = active
            .iter()
            .filter_map(|s| match s {
                Scenario::VoteDegradation { fraction, .. } => {
                    Some(n - (fraction * n as f64).round() as usize)
                }
                _ => None,
            })
            .min()
            .unwrap_or(n);
        // The most recently started upgrade determines versions; UpgradeLag never ends.
        let upgrade = scenarios
            .iter()
            .filter(|s| s.is_active(slot))
            .filter_map(|s| match s {
                Scenario::UpgradeLag {
                    new_version,
                    adoption_fraction,
                    start_slot,
                } => Some((*start_slot, new_version, *adoption_fraction)),
                _ => None,
            })
            .max_by_key(|(start, _, _)| *start);

        for (i, v) in self.validators.iter_mut().enumerate() {
            v.online = !offline.contains(v.provider.as_str());
            let mut p = self.config.base_vote_probability;
            if stall_cpu.is_some() {
                p = p.min(STALLED_VOTE_PROBABILITY);
            }
            if i >= degraded_from {
                p = 0.0;
            }
            v.voting_probability = p;
            v.client_version = match upgrade {
                Some((_, version, fraction)) if i < (fraction * n as f64).round() as usize => {
                    version.clone()
                }
                _ => self.config.latest_client_version.clone(),
            };
        }

        self.effects = Effects {
            censored_sources: active
                .iter()
                .filter_map(|s| match s {
                    Scenario::Censorship { source_tag, .. } => Some(source_tag.clone()),
                    _ => None,
                })
                .collect(),
            cpu_target: stall_cpu,
            price_shock_pct: active.iter().find_map(|s| match s {
                Scenario::MarketShock { pct_change, .. } => Some(*pct_change),
                _ => None,
            }),
        };
    }

    fn close_epoch_boundary(&mut self, slot: u64, ts: i64, out: &mut Vec<TelemetryEvent>) {
        let spe = self.config.slots_per_epoch;
        if slot == 0 || !slot.is_multiple_of(spe) {
            return;
        }
        let epoch = (slot / spe) as i64;
        let candidate = epoch - 2;
        // Pre-genesis epochs count as having reached quorum.
        let quorum = |e: i64| -> bool {
            e < 0
                || self
                    .participation
                    .get(&e)
                    .is_some_and(Participation::has_quorum)
        };
        if candidate > self.last_finalized_epoch && quorum(candidate) && quorum(candidate + 1) {
            self.last_finalized_epoch = candidate;
            if candidate >= 0 {
                out.push(TelemetryEvent::new(
                    ts,
                    EventPayload::EpochFinalized(EpochFinalized {
                        epoch_index: candidate as u64,
                    }),
                ));
            }
        }
        self.participation.retain(|e, _| *e >= epoch - 2);
    }

    fn pick_proposer(&mut self) -> usize {
        let target = self.rng.random::<f64>() * self.total_stake;
        let idx = self.cumulative_stake.partition_point(|c| *c <= target);
        idx.min(self.validators.len() - 1)
    }

    /// Advances the network by one slot and returns the telemetry it produced.
    pub fn step_slot(&mut self) -> Vec<TelemetryEvent> {
        let slot = self.current_slot;
        let ts = self.slot_ts(slot);
        let epoch = (slot / self.config.slots_per_epoch) as i64;
        let mut out = Vec::with_capacity(self.validators.len() * 2 + 200);

        self.close_epoch_boundary(slot, ts, &mut out);

        if slot == 0 {
            let mut facts = self.config.external_facts.clone();
            facts.insert(FACT_SLOTS_PER_EPOCH.into(), self.config.slots_per_epoch as f64);
            facts.insert(FACT_SLOT_DURATION_MS.into(), self.config.slot_duration_ms as f64);
            for (name, value) in facts {
                out.push(TelemetryEvent::new(
                    ts,
                    EventPayload::ExternalFact(ExternalFact { name, value }),
                ));
            }
        }

        // New transactions enter the mempool.
        let new_txs = if self.config.base_tx_rate > 0.0 {
            let pois = Poisson::new(self.config.base_tx_rate).expect("rate validated positive");
            pois.sample(&mut self.rng) as u64
        } else {
            0
        };
        for _ in 0..new_txs {
            let source_idx = self.rng.random_range(0..self.config.tx_sources.len());
            let sanctioned = self.rng.random_bool(self.config.sanctioned_tx_rate);
            let tx = PendingTx {
                id: format!("tx-{:08}", self.next_tx),
                source: self.config.tx_sources[source_idx].clone(),
                sanctioned,
            };
            self.next_tx += 1;
            out.push(TelemetryEvent::new(
                ts,
                EventPayload::MempoolTxSeen(MempoolTxSeen {
                    tx_id: tx.id.clone(),
                    source_tag: tx.source.clone(),
                    sanctioned,
                }),
            ));
            self.pending.push_back(tx);
        }

        // Proposal: stake-weighted draw over all validators; offline proposers miss.
        let proposer = self.pick_proposer();
        let success = self.validators[proposer].online;
        let mut included = Vec::new();
        if success {
            let censored = &self.effects.censored_sources;
            let mut kept = VecDeque::with_capacity(self.pending.len());
            for tx in self.pending.drain(..) {
                if censored.contains(&tx.source) {
                    kept.push_back(tx);
                } else {
                    included.push(tx);
                }
            }
            self.pending = kept;
        }
        out.push(TelemetryEvent::new(
            ts,
            EventPayload::BlockProposed(BlockProposed {
                slot,
                proposer: self.validators[proposer].node_id.clone(),
                success,
                tx_count: included.len() as u64,
            }),
        ));
        for tx in included {
            out.push(TelemetryEvent::new(
                ts,
                EventPayload::ChainTxIncluded(ChainTxIncluded {
                    tx_id: tx.id,
                    slot,
                    sanctioned: tx.sanctioned,
                }),
            ));
        }

        // Votes.
        let delay = Normal::new(self.config.vote_delay_mean_ms, self.config.vote_delay_sd_ms)
            .expect("vote delay validated");
        let mut voted = 0.0;
        for i in 0..self.validators.len() {
            let v = &self.validators[i];
            if !v.online {
                continue;
            }
            let p = v.voting_probability;
            if self.rng.random_bool(p) {
                let d: f64 = delay.sample(&mut self.rng);
                let v = &self.validators[i];
                voted += v.stake;
                out.push(TelemetryEvent::new(
                    ts,
                    EventPayload::VoteCast(VoteCast {
                        slot,
                        voter: v.node_id.clone(),
                        arrival_delay_ms: d.max(0.0).round() as u64,
                    }),
                ));
            }
        }
        let entry = self.participation.entry(epoch).or_default();
        entry.voted += voted;
        entry.expected += self.total_stake;

        // Heartbeats.
        let target = self.effects.cpu_target.unwrap_or(self.config.cpu_baseline_pct);
        let jitter = Normal::new(0.0, self.config.cpu_jitter_pct).expect("jitter validated");
        for i in 0..self.validators.len() {
            let noise: f64 = jitter.sample(&mut self.rng);
            let v = &mut self.validators[i];
            v.cpu_pct = ((target + noise).clamp(0.0, 100.0) * 100.0).round() / 100.0;
            out.push(TelemetryEvent::new(
                ts,
                EventPayload::NodeHeartbeat(NodeHeartbeat {
                    node_id: v.node_id.clone(),
                    online: v.online,
                    cpu_pct: v.cpu_pct,
                    client_version: v.client_version.clone(),
                    provider: v.provider.clone(),
                    country: v.country.clone(),
                    entity_id: v.entity_id.clone(),
                    stake: v.stake,
                }),
            ));
        }

        // Market.
        if let Some(pct) = self.effects.price_shock_pct.take() {
            self.price *= 1.0 + pct / 100.0;
        } else if slot > 0 && self.config.price_volatility > 0.0 {
            let step = Normal::new(0.0, self.config.price_volatility).expect("volatility validated");
            let z: f64 = step.sample(&mut self.rng);
            self.price *= z.exp();
        }
        out.push(TelemetryEvent::new(
            ts,
            EventPayload::MarketTick(MarketTick {
                price: self.price,
                circulating_supply: self.config.circulating_supply,
            }),
        ));

        self.current_slot += 1;
        out
    }
}

/// A network plus its fault script.
#[derive(Clone, Debug)]
pub struct Simulation {
    state: NetworkState,
    scenarios: Vec<Scenario>,
}

impl Simulation {
    pub fn new(config: SimConfig, scenarios: Vec<Scenario>) -> Result<Self, SimError> {
        validate_scenarios(&scenarios)?;
        Ok(Self {
            state: init_network(config)?,
            scenarios,
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    /// Adds a scenario to the running script.
    pub fn inject(&mut self, scenario: Scenario) -> Result<(), SimError> {
        let mut next = self.scenarios.clone();
        next.push(scenario);
        validate_scenarios(&next)?;
        self.scenarios = next;
        Ok(())
    }

    pub fn step(&mut self) -> Vec<TelemetryEvent> {
        let slot = self.state.current_slot;
        self.state.apply_scenarios(&self.scenarios, slot);
        self.state.step_slot()
    }

    pub fn run_events(&mut self, n_slots: u64) -> Vec<TelemetryEvent> {
        let mut events = Vec::new();
        for _ in 0..n_slots {
            events.extend(self.step());
        }
        events
    }
}

pub fn run_events(
    config: SimConfig,
    scenarios: &[Scenario],
    n_slots: u64,
) -> Result<Vec<TelemetryEvent>, SimError> {
    if n_slots == 0 {
        return Err(SimError::InvalidConfig {
            reason: "n_slots must be >= 1".into(),
        });
    }
    let mut sim = Simulation::new(config, scenarios.to_vec())?;
    Ok(sim.run_events(n_slots))
}

/// Runs the simulation and serializes the resulting event log.
pub fn run(config: SimConfig, scenarios: &[Scenario], n_slots: u64) -> Result<Vec<u8>, SimError> {
    let events = run_events(config, scenarios, n_slots)?;
    Ok(write_event_log(&events).expect("simulator emits ordered events"))
}
