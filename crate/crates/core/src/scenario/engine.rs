//! Epoch driver tying consensus, the fee market, economics, users, prices and
//! attacks together.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracing::{debug, info};

use super::attacks::{end_attack, inject_attack, AppliedAttack};
use super::config::{ExitBehavior, ScenarioConfig};
use super::metrics::{EventLog, MetricsRow, MetricsSeries, SimEvent};
use super::price::update_price;
use super::users::{generate_users, migrate_users, MigrationFlows, User};
use super::SimError;
use crate::consensus::{
    AttestationSummary, BeaconState, BehaviorPolicy, BlockPayload, ConsensusEvent, ConsensusParams, Digest,
    EpochReport, ValidatorId, ValidatorStatus,
};
use crate::economics::{expected_income_general, opportunity_cost, stay_decision};
use crate::gas_market::{base_fee_next, build_block, EthereumQuote, Platform, PlatformQuote, Transaction};
use crate::units::{gwei_to_eth, mix_words, Epoch, Gwei, DEPOSIT_GWEI, GWEI_PER_ETH, SLOTS_PER_EPOCH, WEI_PER_GWEI};

const STREAM_INIT: u64 = 1;
const STREAM_TX: u64 = 2;
const STREAM_ATTACK: u64 = 3;
const STREAM_MIGRATION: u64 = 4;

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_words(&[seed, tag]))
}

/// A running scenario. [`Simulation::step_epoch`] advances one epoch and
/// appends one metrics row.
pub struct Simulation {
    config: ScenarioConfig,
    state: BeaconState,
    users: Vec<User>,
    epoch: Epoch,
    impact: f64,
    theta: f64,
    sell_reference_eth: f64,
    execution_balance_wei: i128,
    next_tx_id: u64,
    applied: BTreeMap<usize, AppliedAttack>,
    stalled_since: Option<Epoch>,
    offline_above_third: bool,
    queue_saturated: bool,
    leaking: bool,
    last_flows: MigrationFlows,
    last_deposited: Gwei,
    rng_tx: ChaCha8Rng,
    rng_attack: ChaCha8Rng,
    rng_migration: ChaCha8Rng,
    series: MetricsSeries,
    log: EventLog,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let mut rng = stream(config.seed, STREAM_INIT);
        let policy = BehaviorPolicy::honest(config.econ_params.r_coeff, config.econ_params.w_coeff);
        let deposits: Vec<Gwei> = (0..config.validators.count)
            .map(|_| (config.validators.deposit_eth.sample(&mut rng) * GWEI_PER_ETH as f64).round() as Gwei)
            .collect();
        let params = ConsensusParams { churn_limit: config.churn_limit, ..ConsensusParams::default() };
        let state = BeaconState::genesis(
            params,
            config.seed,
            deposits.iter().map(|d| (*d, policy.clone())),
            config.gas_params.initial_base_fee_gwei,
        );
        let users = generate_users(&config.users, &mut rng);
        let holdings: f64 = users.iter().map(|u| u.holdings_eth).sum();
        let stake_eth = deposits.iter().map(|d| gwei_to_eth(*d as f64)).sum::<f64>();
        let execution_balance_wei = users.iter().map(|u| (u.holdings_eth * 1e18).round() as i128).sum();
        Ok(Self {
            theta: config.price_path.initial(),
            rng_tx: stream(config.seed, STREAM_TX),
            rng_attack: stream(config.seed, STREAM_ATTACK),
            rng_migration: stream(config.seed, STREAM_MIGRATION),
            config,
            state,
            users,
            epoch: 0,
            impact: 1.0,
            sell_reference_eth: holdings + stake_eth,
            execution_balance_wei,
            next_tx_id: 0,
            applied: BTreeMap::new(),
            stalled_since: None,
            offline_above_third: false,
            queue_saturated: false,
            leaking: false,
            last_flows: MigrationFlows::default(),
            last_deposited: 0,
            series: MetricsSeries::default(),
            log: EventLog::default(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &BeaconState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut BeaconState {
        &mut self.state
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    /// Next epoch to be simulated.
    pub fn epoch(&self) -> Epoch {
        self.epoch
    }

    /// ETH/USD rate of the last simulated epoch.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Cumulative multiplier applied to the exogenous path by sell pressure.
    pub fn price_impact(&self) -> f64 {
        self.impact
    }

    pub fn series(&self) -> &MetricsSeries {
        &self.series
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn last_flows(&self) -> &MigrationFlows {
        &self.last_flows
    }

    /// New validator deposits accepted during the last epoch.
    pub fn last_deposited(&self) -> Gwei {
        self.last_deposited
    }

    /// ETH held outside the consensus layer (users and fee recipients), wei.
    pub fn execution_balance_wei(&self) -> i128 {
        self.execution_balance_wei
    }

    /// Every tracked balance in wei: non-exited deposits, withdrawals and the
    /// execution-layer balance.
    pub fn tracked_supply_wei(&self) -> i128 {
        (self.state.total_deposits() as i128 + self.state.withdrawn_total() as i128) * WEI_PER_GWEI as i128
            + self.execution_balance_wei
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    pub fn competitor_quotes(&self, epoch: Epoch) -> Vec<PlatformQuote> {
        self.config
            .competitors
            .iter()
            .enumerate()
            .map(|(i, c)| PlatformQuote {
                platform: i,
                gas_price: c.gas_price.value_at(epoch),
                token_rate_usd: c.token_rate_usd.value_at(epoch),
                lock_in_externality_usd: c.lock_in_externality_usd,
            })
            .collect()
    }

    /// Base fee of a block built on `parent`.
    pub fn base_fee_after(&self, parent: Digest) -> f64 {
        let node = self.state.block_tree().get(parent).expect("parent is in the tree");
        if node.is_genesis() {
            self.config.gas_params.initial_base_fee_gwei
        } else {
            base_fee_next(node.base_fee_per_gas, node.gas_used, &self.config.gas_params)
        }
    }

    fn new_transactions(&mut self) -> Vec<Vec<Transaction>> {
        let rho = self.config.layer2_compression_rho;
        let per_user = self.config.users.txs_per_epoch * rho.powf(-self.config.users.demand_elasticity);
        let mut arrivals = vec![Vec::new(); SLOTS_PER_EPOCH as usize];
        for user in self.users.iter().filter(|u| u.platform == Platform::Ethereum) {
            let whole = per_user.floor();
            let extra = self.rng_tx.gen_bool((per_user - whole).clamp(0.0, 1.0));
            for _ in 0..whole as u64 + extra as u64 {
                let slot = self.rng_tx.gen_range(0..SLOTS_PER_EPOCH as usize);
                arrivals[slot].push(user.transaction(self.next_tx_id, rho));
                self.next_tx_id += 1;
            }
        }
        arrivals
    }

    fn run_slots(&mut self, theta: f64) -> Result<Vec<AttestationSummary>, SimError> {
        let mut arrivals = self.new_transactions();
        let mut mempool: Vec<Transaction> = Vec::new();
        let mut attestations = Vec::new();
        for pending in arrivals.iter_mut() {
            mempool.append(pending);
            let duty = self.state.begin_slot()?;
            let payload = if duty.proposer.is_some() && duty.proposer_online {
                let fee = self.base_fee_after(duty.parent);
                let built = build_block(&mempool, fee, theta, &self.config.gas_params);
                let mut keep = vec![true; mempool.len()];
                for &i in &built.included {
                    keep[i] = false;
                }
                let mut k = keep.iter();
                mempool.retain(|_| *k.next().expect("mask length"));
                self.execution_balance_wei -= built.burned as i128;
                Some(BlockPayload {
                    gas_used: built.gas_used,
                    base_fee_per_gas: fee,
                    priority_fee_total: built.priority_total,
                    burned: built.burned,
                })
            } else {
                None
            };
            attestations.extend(self.state.end_slot(payload)?);
        }
        Ok(attestations)
    }

    fn trigger_attacks(&mut self, epoch: Epoch, slot: u64) -> Vec<usize> {
        let mut triggered = Vec::new();
        for (i, attack) in self.config.attacks.iter().enumerate() {
            if attack.start_epoch == epoch {
                let applied = inject_attack(&mut self.state, attack, &mut self.rng_attack);
                info!(epoch, attack = i, victims = applied.victims.len(), "attack triggered");
                self.log.push(
                    epoch,
                    slot,
                    SimEvent::AttackTriggered {
                        attack: i,
                        attack_kind: attack.kind,
                        magnitude: attack.magnitude,
                        victims: applied.victims.clone(),
                    },
                );
                self.applied.insert(i, applied);
                triggered.push(i);
            }
            if attack.end_epoch() == Some(epoch) {
                if let Some(applied) = self.applied.remove(&i) {
                    end_attack(&mut self.state, &applied);
                    self.log.push(epoch, slot, SimEvent::AttackEnded { attack: i, attack_kind: attack.kind });
                }
            }
        }
        triggered
    }

    fn record_consensus(&mut self, epoch: Epoch, slot: u64, report: &EpochReport) {
        for ev in &report.events {
            let sim = match ev {
                ConsensusEvent::Slashed { validator, confiscated_gwei } => {
                    SimEvent::Slashed { validator: *validator, confiscated_gwei: *confiscated_gwei }
                }
                ConsensusEvent::Ejected { validator, deposit_gwei } => {
                    SimEvent::Ejected { validator: *validator, deposit_gwei: *deposit_gwei }
                }
                ConsensusEvent::Exited { validator, cause, withdrawn_gwei } => {
                    SimEvent::Exited { validator: *validator, cause: *cause, withdrawn_gwei: *withdrawn_gwei }
                }
                ConsensusEvent::Activated { validator } => SimEvent::Activated { validator: *validator },
                ConsensusEvent::Justified { .. }
                | ConsensusEvent::Finalized { .. }
                | ConsensusEvent::InactivityLeak { .. } => continue,
            };
            self.log.push(epoch, slot, sim);
        }

        let total = report.ledger.total_effective;
        let above = total > 0 && 3 * report.offline_weight > total;
        if above && !self.offline_above_third {
            self.log.push(
                epoch,
                slot,
                SimEvent::OfflineWeightAboveThird { offline_eth: report.offline_weight, total_eth: total },
            );
        }
        self.offline_above_third = above;

        if epoch > 0 {
            if !report.finalized {
                if self.stalled_since.is_none() {
                    self.stalled_since = Some(epoch);
                    let last = self.state.last_finalized().epoch;
                    info!(epoch, last_finalized = last, "finality stall");
                    self.log.push(epoch, slot, SimEvent::FinalityStall { last_finalized_epoch: last });
                }
            } else if let Some(since) = self.stalled_since.take() {
                let cp = self.state.last_finalized().epoch;
                info!(epoch, stalled = epoch - since, "finality resumed");
                self.log.push(epoch, slot, SimEvent::FinalityResumed { finalized_checkpoint: cp, stalled_epochs: epoch - since });
            }
        }

        let leaking = report.epochs_since_finality >= self.state.params.leak_after_epochs;
        if leaking && !self.leaking {
            self.log.push(
                epoch,
                slot,
                SimEvent::InactivityLeakStarted { epochs_since_finality: report.epochs_since_finality },
            );
        }
        self.leaking = leaking;
    }

    /// Stay decisions for active validators and join decisions for outside
    /// candidates. Returns the Gwei newly deposited.
    fn update_validator_set(&mut self, epoch: Epoch, slot: u64, theta: f64, report: &EpochReport) -> Gwei {
        let balances: Vec<f64> = self
            .state
            .registry()
            .values()
            .filter(|v| v.is_active() && v.effective_balance > 0)
            .map(|v| v.effective_balance as f64)
            .collect();
        if balances.is_empty() {
            return 0;
        }
        let alpha = opportunity_cost(theta, &self.config.alpha_policy);
        let leaving: Vec<ValidatorId> = self
            .state
            .registry()
            .values()
            .filter(|v| v.status == ValidatorStatus::Active && v.effective_balance > 0)
            .filter(|v| {
                let income = expected_income_general(
                    v.effective_balance as f64,
                    v.policy.r_coeff,
                    v.policy.w_coeff,
                    &balances,
                    &report.priority_by_slot,
                    theta,
                )
                .expect("balances are positive");
                !stay_decision(income, alpha)
            })
            .map(|v| v.id)
            .collect();
        for id in &leaving {
            self.state.request_exit(*id).expect("active validator can exit");
            if self.config.validators.exit_behavior == ExitBehavior::OfflineWhileQueued {
                let v = self.state.validator_mut(*id).expect("validator exists");
                v.policy.online.add_offline_window(epoch + 1, None);
            }
        }
        if !leaving.is_empty() {
            debug!(epoch, count = leaving.len(), "exits requested");
            self.log.push(epoch, slot, SimEvent::ExitsRequested { count: leaving.len() as u64, validators: leaving });
        }
        let queue = self.state.exit_queue().len() as u64;
        let saturated = queue > self.config.churn_limit;
        if saturated && !self.queue_saturated {
            self.log.push(epoch, slot, SimEvent::ExitQueueSaturated { queue_len: queue, churn_limit: self.config.churn_limit });
        }
        self.queue_saturated = saturated;

        let candidates = self.config.validators.join_candidates_per_epoch;
        if candidates == 0 {
            return 0;
        }
        let econ = self.config.econ_params;
        let mut with_candidate = balances;
        with_candidate.push((DEPOSIT_GWEI / GWEI_PER_ETH) as f64);
        let income = expected_income_general(
            (DEPOSIT_GWEI / GWEI_PER_ETH) as f64,
            econ.r_coeff,
            econ.w_coeff,
            &with_candidate,
            &report.priority_by_slot,
            theta,
        )
        .expect("balances are positive");
        if !stay_decision(income, alpha) {
            return 0;
        }
        for _ in 0..candidates {
            self.state.add_pending_validator(DEPOSIT_GWEI, BehaviorPolicy::honest(econ.r_coeff, econ.w_coeff));
        }
        self.log.push(epoch, slot, SimEvent::JoinsRequested { count: candidates });
        candidates * DEPOSIT_GWEI
    }

    /// Simulates the next epoch and returns its metrics row.
    pub fn step_epoch(&mut self) -> Result<&MetricsRow, SimError> {
        let epoch = self.epoch;
        let first_slot = epoch * SLOTS_PER_EPOCH;
        let last_slot = first_slot + SLOTS_PER_EPOCH - 1;
        let log_start = self.log.len();

        let attacks_triggered = self.trigger_attacks(epoch, first_slot);
        let theta = self.config.price_path.value_at(epoch) * self.impact;
        self.theta = theta;

        let attestations = self.run_slots(theta)?;
        let report = self.state.process_epoch(&attestations)?;
        self.record_consensus(epoch, last_slot, &report);
        self.last_deposited = self.update_validator_set(epoch, last_slot, theta, &report);

        let quotes = self.competitor_quotes(epoch);
        let eth = EthereumQuote { base_fee_gwei: self.base_fee_after(self.state.head()), theta_usd: theta };
        let rate = self.config.users.migration_rate;
        let rng = &mut self.rng_migration;
        let flows = migrate_users(&mut self.users, &eth, &quotes, self.config.layer2_compression_rho, |_| {
            rate >= 1.0 || rng.gen_bool(rate)
        });
        if !flows.is_empty() {
            self.log.push(
                epoch,
                last_slot,
                SimEvent::Migration {
                    left_ethereum: flows.left_ethereum,
                    returned_to_ethereum: flows.returned_to_ethereum,
                    between_competitors: flows.between_competitors,
                    eth_sold: flows.eth_sold,
                },
            );
        }

        let sold_eth = flows.eth_sold + gwei_to_eth(report.ledger.withdrawn as f64);
        if self.sell_reference_eth > 0.0 {
            self.impact = update_price(self.impact, sold_eth / self.sell_reference_eth, self.config.price_impact_lambda);
        }

        let mut users_by_competitor = vec![0u64; self.config.competitors.len()];
        let mut users_ethereum = 0;
        for u in &self.users {
            match u.platform {
                Platform::Ethereum => users_ethereum += 1,
                Platform::Competitor(i) => users_by_competitor[i] += 1,
            }
        }
        let mut events: Vec<String> = Vec::new();
        for r in &self.log.records[log_start..] {
            let k = r.event.kind();
            if !events.iter().any(|e| e == k) {
                events.push(k.to_string());
            }
        }
        let l = &report.ledger;
        let row = MetricsRow {
            epoch,
            theta_usd: theta,
            n_active: self.state.active_count(),
            total_effective_eth: self.state.total_active_effective(),
            justified: report.justified,
            finalized: report.finalized,
            epochs_since_finality: report.epochs_since_finality,
            base_fee_gwei_avg: if report.blocks_produced > 0 {
                report.base_fee_sum / report.blocks_produced as f64
            } else {
                0.0
            },
            burned_wei: l.burned,
            issued_gwei: l.issued,
            supply_delta_wei: l.supply_delta,
            confiscated_gwei: l.confiscated,
            users_ethereum,
            users_by_competitor,
            exit_queue: self.state.exit_queue().len() as u64,
            activation_queue: self.state.activation_queue().len() as u64,
            events,
            migrated_out: flows.left_ethereum,
            migrated_in: flows.returned_to_ethereum,
            n_processed: l.n_active,
            effective_processed_eth: l.total_effective,
            attacks_triggered,
        };
        self.last_flows = flows;
        self.series.rows.push(row);
        self.epoch += 1;
        Ok(self.series.rows.last().expect("row just pushed"))
    }

    /// Runs the remaining epochs.
    pub fn run(mut self) -> Result<(MetricsSeries, EventLog), SimError> {
        while !self.is_finished() {
            self.step_epoch()?;
        }
        Ok((self.series, self.log))
    }
}

/// Simulates `config.epochs` epochs from genesis.
pub fn run_scenario(config: &ScenarioConfig) -> Result<(MetricsSeries, EventLog), SimError> {
    Simulation::new(config.clone())?.run()
}
