//! Beacon state: slot progression, attestations and epoch processing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::block_tree::{block_digest, BlockNode, BlockTree, Digest};
use super::duties::{assign_committees, select_proposer, select_sync_committee, Committees, Registry};
use super::fork_choice::{fork_choice_head, LatestMessages};
use super::randao::{mix_randao, reveal_digest, Randao};
use super::validator::{
    eject_if_underfunded, BehaviorPolicy, ExitCause, ValidatorId, ValidatorRecord, ValidatorStatus,
};
use super::ConsensusError;
use crate::economics::EpochLedger;
use crate::units::{
    epoch_of, epoch_start_slot, mix64, Epoch, Gwei, Slot, Wei, INACTIVITY_LEAK_EPOCHS, SLASHING_GRACE_EPOCHS,
    SLOTS_PER_EPOCH, SYNC_COMMITTEE_MAX, SYNC_COMMITTEE_PERIOD_EPOCHS, WEI_PER_GWEI,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParams {
    /// Maximum activations and maximum exits per epoch.
    pub churn_limit: u64,
    pub leak_after_epochs: u64,
    pub slashing_grace_epochs: Epoch,
    /// Fraction of the per-slot opportunity reward paid to the proposer; the
    /// rest goes to the sync committee.
    pub proposer_share: f64,
    pub sync_committee_max: usize,
    pub sync_period_epochs: Epoch,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        Self {
            churn_limit: 4,
            leak_after_epochs: INACTIVITY_LEAK_EPOCHS,
            slashing_grace_epochs: SLASHING_GRACE_EPOCHS,
            proposer_share: 0.8,
            sync_committee_max: SYNC_COMMITTEE_MAX,
            sync_period_epochs: SYNC_COMMITTEE_PERIOD_EPOCHS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: Epoch,
    pub block: Digest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointState {
    pub epoch: Epoch,
    pub block: Digest,
    pub justified: bool,
    pub finalized: bool,
    pub attesting_weight: u64,
    pub justified_in: Option<Epoch>,
    pub finalized_in: Option<Epoch>,
}

impl CheckpointState {
    pub fn id(&self) -> Checkpoint {
        Checkpoint { epoch: self.epoch, block: self.block }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttestationSummary {
    pub epoch: Epoch,
    pub slot: Slot,
    pub validator: ValidatorId,
    pub source: Checkpoint,
    pub target: Checkpoint,
    pub head: Digest,
    pub inclusion_delay: u64,
}

/// Execution payload summary for a proposed block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockPayload {
    pub gas_used: u64,
    pub base_fee_per_gas: f64,
    pub priority_fee_total: Wei,
    pub burned: Wei,
}

/// Who proposes in the slot about to be simulated, and on top of what.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotDuty {
    pub slot: Slot,
    pub epoch: Epoch,
    pub proposer: Option<ValidatorId>,
    pub proposer_online: bool,
    pub parent: Digest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsensusEvent {
    Justified { checkpoint_epoch: Epoch },
    Finalized { checkpoint_epoch: Epoch },
    InactivityLeak { epochs_since_finality: u64 },
    Ejected { validator: ValidatorId, deposit_gwei: Gwei },
    Exited { validator: ValidatorId, cause: ExitCause, withdrawn_gwei: Gwei },
    Activated { validator: ValidatorId },
    Slashed { validator: ValidatorId, confiscated_gwei: Gwei },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub ledger: EpochLedger,
    pub justified: bool,
    pub finalized: bool,
    pub epochs_since_finality: u64,
    pub attesting_weight: u64,
    /// Effective balance of active validators that were offline this epoch.
    pub offline_weight: u64,
    /// Total priority fees per slot of the epoch, in Gwei (0 for empty slots).
    pub priority_by_slot: Vec<f64>,
    pub blocks_produced: u64,
    pub base_fee_sum: f64,
    pub events: Vec<ConsensusEvent>,
}

/// Per-epoch accumulators that are not derivable from the block tree.
#[derive(Clone, Debug, Default)]
struct EpochAccumulator {
    confiscated: Gwei,
    deposited: Gwei,
    events: Vec<ConsensusEvent>,
}

#[derive(Clone, Debug)]
pub struct BeaconState {
    pub params: ConsensusParams,
    seed: u64,
    current_slot: Slot,
    randao: Randao,
    epoch_randao: Randao,
    registry: Registry,
    block_tree: BlockTree,
    checkpoints: BTreeMap<Epoch, CheckpointState>,
    last_justified: Checkpoint,
    last_finalized: Checkpoint,
    epochs_since_finality: u64,
    activation_queue: VecDeque<ValidatorId>,
    exit_queue: VecDeque<ValidatorId>,
    total_active_effective: u64,
    latest_messages: LatestMessages,
    head: Digest,
    slot_history: Vec<Option<Digest>>,
    committees: Committees,
    sync_committee: Vec<ValidatorId>,
    withdrawn_total: Gwei,
    next_validator_id: u64,
    slot_proposer: Option<ValidatorId>,
    acc: EpochAccumulator,
}

impl BeaconState {
    /// Builds the genesis state: every supplied validator is active, and the
    /// genesis block at slot 0 is the justified and finalized epoch-0
    /// checkpoint.
    pub fn genesis(
        params: ConsensusParams,
        seed: u64,
        validators: impl IntoIterator<Item = (Gwei, BehaviorPolicy)>,
        initial_base_fee: f64,
    ) -> Self {
        let mut registry = Registry::new();
        for (i, (deposit, policy)) in validators.into_iter().enumerate() {
            let id = ValidatorId(i as u64);
            registry.insert(id, ValidatorRecord::new(id, deposit, ValidatorStatus::Active, policy, mix64(seed ^ id.0)));
        }
        let next_validator_id = registry.len() as u64;
        let genesis = BlockNode::genesis(block_digest(seed, 0, Digest(0), None), initial_base_fee);
        let g = genesis.digest;
        let cp = Checkpoint { epoch: 0, block: g };
        let mut checkpoints = BTreeMap::new();
        checkpoints.insert(
            0,
            CheckpointState {
                epoch: 0,
                block: g,
                justified: true,
                finalized: true,
                attesting_weight: 0,
                justified_in: Some(0),
                finalized_in: Some(0),
            },
        );
        let randao = Randao([seed, mix64(seed), mix64(seed ^ 1), mix64(seed ^ 2)]);
        let mut state = Self {
            params,
            seed,
            current_slot: 0,
            randao,
            epoch_randao: randao,
            registry,
            block_tree: BlockTree::new(genesis),
            checkpoints,
            last_justified: cp,
            last_finalized: cp,
            epochs_since_finality: 0,
            activation_queue: VecDeque::new(),
            exit_queue: VecDeque::new(),
            total_active_effective: 0,
            latest_messages: LatestMessages::new(),
            head: g,
            slot_history: Vec::new(),
            committees: Committees::default(),
            sync_committee: Vec::new(),
            withdrawn_total: 0,
            next_validator_id,
            slot_proposer: None,
            acc: EpochAccumulator::default(),
        };
        state.total_active_effective = state.recompute_total_active_effective();
        state
    }

    pub fn current_slot(&self) -> Slot {
        self.current_slot
    }

    pub fn current_epoch(&self) -> Epoch {
        epoch_of(self.current_slot)
    }

    pub fn randao(&self) -> Randao {
        self.randao
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn validator(&self, id: ValidatorId) -> Option<&ValidatorRecord> {
        self.registry.get(&id)
    }

    pub fn validator_mut(&mut self, id: ValidatorId) -> Option<&mut ValidatorRecord> {
        self.registry.get_mut(&id)
    }

    pub fn block_tree(&self) -> &BlockTree {
        &self.block_tree
    }

    pub fn checkpoints(&self) -> &BTreeMap<Epoch, CheckpointState> {
        &self.checkpoints
    }

    pub fn last_justified(&self) -> Checkpoint {
        self.last_justified
    }

    pub fn last_finalized(&self) -> Checkpoint {
        self.last_finalized
    }

    pub fn epochs_since_finality(&self) -> u64 {
        self.epochs_since_finality
    }

    pub fn activation_queue(&self) -> &VecDeque<ValidatorId> {
        &self.activation_queue
    }

    pub fn exit_queue(&self) -> &VecDeque<ValidatorId> {
        &self.exit_queue
    }

    pub fn latest_messages(&self) -> &LatestMessages {
        &self.latest_messages
    }

    pub fn head(&self) -> Digest {
        self.head
    }

    pub fn head_block(&self) -> &BlockNode {
        self.block_tree.get(self.head).expect("head is in the tree")
    }

    pub fn slot_history(&self) -> &[Option<Digest>] {
        &self.slot_history
    }

    pub fn committees(&self) -> &Committees {
        &self.committees
    }

    pub fn sync_committee(&self) -> &[ValidatorId] {
        &self.sync_committee
    }

    pub fn withdrawn_total(&self) -> Gwei {
        self.withdrawn_total
    }

    /// Cached sum of effective balances (ETH) of active validators.
    pub fn total_active_effective(&self) -> u64 {
        self.total_active_effective
    }

    pub fn recompute_total_active_effective(&self) -> u64 {
        self.registry.values().filter(|v| v.is_active()).map(|v| v.effective_balance).sum()
    }

    pub fn active_count(&self) -> u64 {
        self.registry.values().filter(|v| v.is_active()).count() as u64
    }

    /// Deposits held by validators that have not yet exited.
    pub fn total_deposits(&self) -> Gwei {
        self.registry.values().filter(|v| v.status != ValidatorStatus::Exited).map(|v| v.deposit).sum()
    }

    fn weight_of(&self, id: ValidatorId) -> u64 {
        self.registry.get(&id).filter(|v| v.is_active()).map_or(0, |v| v.effective_balance)
    }

    fn refresh_head(&mut self) -> Result<(), ConsensusError> {
        let registry = &self.registry;
        self.head = fork_choice_head(
            &self.block_tree,
            &self.latest_messages,
            |id| registry.get(&id).filter(|v| v.is_active()).map_or(0, |v| v.effective_balance),
            self.last_justified.block,
        )?;
        Ok(())
    }

    fn begin_epoch(&mut self) {
        let epoch = self.current_epoch();
        self.epoch_randao = self.randao;
        self.committees = assign_committees(self.epoch_randao, epoch, &self.registry);
        if epoch.is_multiple_of(self.params.sync_period_epochs) {
            self.sync_committee =
                select_sync_committee(self.epoch_randao, epoch, &self.registry, self.params.sync_committee_max);
        }
    }

    /// Starts the next slot: runs fork choice and selects the proposer. Slot 0
    /// holds the genesis block and has no proposer; an empty registry leaves
    /// every slot without one.
    pub fn begin_slot(&mut self) -> Result<SlotDuty, ConsensusError> {
        let slot = self.current_slot;
        let epoch = epoch_of(slot);
        if slot.is_multiple_of(SLOTS_PER_EPOCH) {
            self.begin_epoch();
        }
        self.refresh_head()?;
        let proposer = if slot == 0 {
            None
        } else {
            match select_proposer(self.epoch_randao, epoch, slot, &self.registry) {
                Ok(p) => Some(p),
                Err(ConsensusError::RegistryEmpty) => None,
                Err(e) => return Err(e),
            }
        };
        self.slot_proposer = proposer;
        let proposer_online = proposer.and_then(|p| self.registry.get(&p)).is_some_and(|v| v.is_online(epoch));
        Ok(SlotDuty { slot, epoch, proposer, proposer_online, parent: self.head })
    }

    /// Completes the current slot. `block` is the payload built by the
    /// proposer (`None` for an empty slot). Returns the attestations cast by
    /// the slot's committee.
    pub fn end_slot(&mut self, block: Option<BlockPayload>) -> Result<Vec<AttestationSummary>, ConsensusError> {
        let slot = self.current_slot;
        let epoch = epoch_of(slot);
        if slot == 0 {
            self.slot_history.push(Some(self.block_tree.genesis().digest));
        } else if let Some(payload) = block {
            let proposer = self.slot_proposer.take().ok_or(ConsensusError::NoProposer(slot))?;
            let digest = block_digest(self.seed, slot, self.head, Some(proposer));
            self.block_tree.insert(BlockNode {
                digest,
                parent: self.head,
                slot,
                height: 0,
                proposer: Some(proposer),
                gas_used: payload.gas_used,
                base_fee_per_gas: payload.base_fee_per_gas,
                priority_fee_total: payload.priority_fee_total,
                burned: payload.burned,
                attestation_weight: 0,
            })?;
            let reveal_seed = self.registry[&proposer].reveal_seed;
            self.randao = mix_randao(self.randao, reveal_digest(epoch, reveal_seed));
            self.head = digest;
            self.slot_history.push(Some(digest));
        } else {
            self.slot_history.push(None);
        }

        if slot.is_multiple_of(SLOTS_PER_EPOCH) && epoch > 0 {
            let block = self.block_tree.ancestor_at_slot(self.head, slot).expect("genesis is an ancestor");
            self.checkpoints.insert(
                epoch,
                CheckpointState {
                    epoch,
                    block,
                    justified: false,
                    finalized: false,
                    attesting_weight: 0,
                    justified_in: None,
                    finalized_in: None,
                },
            );
        }

        let atts = self.attest(slot, epoch);
        self.slot_proposer = None;
        self.current_slot += 1;
        Ok(atts)
    }

    fn attest(&mut self, slot: Slot, epoch: Epoch) -> Vec<AttestationSummary> {
        let target_state = &self.checkpoints[&epoch];
        let target = target_state.id();
        let head = self.head;
        let source = if epoch == 0 { target } else { self.last_justified };
        let mut out = Vec::new();
        for &id in self.committees.for_slot(slot) {
            let Some(v) = self.registry.get(&id) else { continue };
            if !v.is_active() || !v.is_online(epoch) {
                continue;
            }
            // A dishonest vote names a target that conflicts with the majority.
            let target = if v.policy.attests_honestly {
                target
            } else {
                Checkpoint { epoch, block: Digest(!target.block.0) }
            };
            out.push(AttestationSummary { epoch, slot, validator: id, source, target, head, inclusion_delay: 1 });
        }
        for a in &out {
            self.latest_messages.observe(a.validator, a.slot, a.head);
        }
        let weight: u64 = out.iter().map(|a| self.weight_of(a.validator)).sum();
        if let Some(b) = self.block_tree.get_mut(head) {
            b.attestation_weight += weight;
        }
        out
    }

    /// Adds a validator that deposited `deposit` to the activation queue.
    pub fn add_pending_validator(&mut self, deposit: Gwei, policy: BehaviorPolicy) -> ValidatorId {
        let id = ValidatorId(self.next_validator_id);
        self.next_validator_id += 1;
        let record = ValidatorRecord::new(id, deposit, ValidatorStatus::Pending, policy, mix64(self.seed ^ id.0));
        self.registry.insert(id, record);
        self.activation_queue.push_back(id);
        self.acc.deposited += deposit;
        id
    }

    /// Queues a voluntary exit.
    pub fn request_exit(&mut self, id: ValidatorId) -> Result<(), ConsensusError> {
        let v = self.registry.get_mut(&id).ok_or(ConsensusError::UnknownValidator(id))?;
        if v.status != ValidatorStatus::Active {
            return Err(ConsensusError::NotActive { id, status: v.status });
        }
        v.status = ValidatorStatus::ExitQueued;
        v.exit_cause = Some(ExitCause::Voluntary);
        self.exit_queue.push_back(id);
        Ok(())
    }

    /// Slashes an active validator: confiscates `deposit / 32` times the
    /// correlation multiplier (the number of concurrent slashings, at least 1)
    /// and schedules its exit after the grace period. Returns the confiscated
    /// amount.
    pub fn slash(&mut self, id: ValidatorId, concurrent_slashings: u64) -> Result<Gwei, ConsensusError> {
        let epoch = self.current_epoch();
        let v = self.registry.get_mut(&id).ok_or(ConsensusError::UnknownValidator(id))?;
        if v.status != ValidatorStatus::Active {
            return Err(ConsensusError::NotActive { id, status: v.status });
        }
        let penalty = (v.deposit / 32).saturating_mul(concurrent_slashings.max(1)).min(v.deposit);
        v.deposit -= penalty;
        v.status = ValidatorStatus::Slashed;
        v.slashed_at_epoch = Some(epoch);
        v.exit_cause = Some(ExitCause::Slashed);
        v.refresh_effective_balance();
        self.latest_messages.remove(id);
        self.acc.confiscated += penalty;
        self.acc.events.push(ConsensusEvent::Slashed { validator: id, confiscated_gwei: penalty });
        self.total_active_effective = self.recompute_total_active_effective();
        Ok(penalty)
    }

    /// Epoch in which a slashed validator is forced out.
    pub fn slashing_exit_epoch(&self, id: ValidatorId) -> Option<Epoch> {
        self.registry.get(&id)?.slashed_at_epoch.map(|e| e + self.params.slashing_grace_epochs)
    }

    /// Finishes the epoch whose 32 slots have just been simulated:
    /// justification and finalization, rewards and penalties (including the
    /// inactivity leak), effective balances, ejections and churn-limited
    /// queues.
    pub fn process_epoch(&mut self, attestations: &[AttestationSummary]) -> Result<EpochReport, ConsensusError> {
        if self.current_slot == 0 || !self.current_slot.is_multiple_of(SLOTS_PER_EPOCH) {
            return Err(ConsensusError::EpochNotComplete { epoch: self.current_epoch(), slot: self.current_slot });
        }
        let epoch = self.current_epoch() - 1;
        debug_assert_eq!(self.total_active_effective, self.recompute_total_active_effective());
        let total = self.total_active_effective;
        let mut events = std::mem::take(&mut self.acc.events);

        // FFG tally.
        let target = self.checkpoints[&epoch].id();
        let source = if epoch == 0 { target } else { self.last_justified };
        let mut attesters = BTreeSet::new();
        for a in attestations {
            if a.epoch != epoch || a.source != source || a.target != target || a.inclusion_delay < 1 {
                continue;
            }
            if self.registry.get(&a.validator).is_some_and(|v| v.is_active()) {
                attesters.insert(a.validator);
            }
        }
        let attesting_weight: u64 = attesters.iter().map(|id| self.weight_of(*id)).sum();
        self.checkpoints.get_mut(&epoch).expect("checkpoint recorded").attesting_weight = attesting_weight;

        let mut justified = false;
        let mut finalized = false;
        if epoch == 0 {
            justified = true;
        } else if total > 0 && 3 * attesting_weight >= 2 * total {
            justified = true;
            let cp = self.checkpoints.get_mut(&epoch).expect("checkpoint recorded");
            cp.justified = true;
            cp.justified_in = Some(epoch);
            events.push(ConsensusEvent::Justified { checkpoint_epoch: epoch });
            if self.last_justified.epoch + 1 == epoch {
                let src = self.checkpoints.get_mut(&self.last_justified.epoch).expect("source checkpoint");
                src.finalized = true;
                src.finalized_in.get_or_insert(epoch);
                self.last_finalized = self.last_justified;
                finalized = true;
                events.push(ConsensusEvent::Finalized { checkpoint_epoch: self.last_justified.epoch });
            }
            self.last_justified = target;
        }
        if finalized || epoch == 0 {
            self.epochs_since_finality = 0;
        } else {
            self.epochs_since_finality += 1;
        }
        let esf = self.epochs_since_finality;
        let leaking = esf >= self.params.leak_after_epochs;
        if leaking {
            events.push(ConsensusEvent::InactivityLeak { epochs_since_finality: esf });
        }

        // Rewards and penalties, in real Gwei before apportionment.
        let n_active = self.active_count();
        let sqrt_total = (total as f64).sqrt();
        let mut rewards: BTreeMap<ValidatorId, f64> = BTreeMap::new();
        let mut penalties: BTreeMap<ValidatorId, f64> = BTreeMap::new();
        let mut offline_weight = 0u64;
        if total > 0 {
            for v in self.registry.values().filter(|v| v.is_active()) {
                if !v.is_online(epoch) {
                    offline_weight += v.effective_balance;
                }
                let base = v.policy.r_coeff * v.effective_balance as f64 / sqrt_total;
                if attesters.contains(&v.id) {
                    *rewards.entry(v.id).or_default() += base;
                } else {
                    let mut p = base;
                    if leaking {
                        p += base * (esf - self.params.leak_after_epochs + 1) as f64;
                    }
                    *penalties.entry(v.id).or_default() += p;
                }
            }

            let first = epoch_start_slot(epoch);
            for slot in first..first + SLOTS_PER_EPOCH {
                let Some(Some(d)) = self.slot_history.get(slot as usize) else { continue };
                let Some(p) = self.block_tree.get(*d).and_then(|b| b.proposer) else { continue };
                let Some(v) = self.registry.get(&p).filter(|v| v.is_active()) else { continue };
                let amount = self.params.proposer_share
                    * n_active as f64
                    * v.policy.w_coeff
                    * v.effective_balance as f64
                    / sqrt_total;
                *rewards.entry(p).or_default() += amount;
            }

            let members: Vec<&ValidatorRecord> =
                self.sync_committee.iter().filter_map(|id| self.registry.get(id)).filter(|v| v.is_active()).collect();
            if !members.is_empty() {
                let scale = (1.0 - self.params.proposer_share) * n_active as f64 / members.len() as f64;
                for v in members {
                    let per_slot = scale * v.policy.w_coeff * v.effective_balance as f64 / sqrt_total;
                    let amount = per_slot * SLOTS_PER_EPOCH as f64;
                    if v.is_online(epoch) {
                        *rewards.entry(v.id).or_default() += amount;
                    } else {
                        *penalties.entry(v.id).or_default() += amount;
                    }
                }
            }
        }

        let reward_units = apportion(&rewards);
        let penalty_units = apportion(&penalties);
        let mut issued: Gwei = 0;
        let mut confiscated: Gwei = std::mem::take(&mut self.acc.confiscated);
        for (id, r) in &reward_units {
            let v = self.registry.get_mut(id).expect("rewarded validator exists");
            v.deposit += r;
            issued += r;
        }
        for (id, p) in &penalty_units {
            let v = self.registry.get_mut(id).expect("penalised validator exists");
            let p = (*p).min(v.deposit);
            v.deposit -= p;
            confiscated += p;
        }

        // Effective balances and ejections.
        for v in self.registry.values_mut() {
            if matches!(v.status, ValidatorStatus::Exited) {
                continue;
            }
            v.refresh_effective_balance();
            if eject_if_underfunded(v) {
                events.push(ConsensusEvent::Ejected { validator: v.id, deposit_gwei: v.deposit });
                self.exit_queue.push_back(v.id);
            }
        }

        // Slashed validators leave once the grace period is over.
        let mut withdrawn: Gwei = 0;
        let grace = self.params.slashing_grace_epochs;
        let due: Vec<ValidatorId> = self
            .registry
            .values()
            .filter(|v| v.status == ValidatorStatus::Slashed && v.slashed_at_epoch.is_some_and(|s| s + grace <= epoch))
            .map(|v| v.id)
            .collect();
        for id in due {
            withdrawn += self.exit_validator(id, &mut events);
        }

        // Churn-limited queues.
        for _ in 0..self.params.churn_limit {
            let Some(id) = self.exit_queue.pop_front() else { break };
            withdrawn += self.exit_validator(id, &mut events);
        }
        for _ in 0..self.params.churn_limit {
            let Some(id) = self.activation_queue.pop_front() else { break };
            let v = self.registry.get_mut(&id).expect("queued validator exists");
            debug_assert!(v.status.can_transition_to(ValidatorStatus::Active));
            v.status = ValidatorStatus::Active;
            events.push(ConsensusEvent::Activated { validator: id });
        }
        self.total_active_effective = self.recompute_total_active_effective();

        let first = epoch_start_slot(epoch);
        let mut burned: Wei = 0;
        let mut priority: Wei = 0;
        let mut priority_by_slot = vec![0.0; SLOTS_PER_EPOCH as usize];
        let mut blocks_produced = 0;
        let mut base_fee_sum = 0.0;
        for (i, slot) in (first..first + SLOTS_PER_EPOCH).enumerate() {
            let Some(Some(d)) = self.slot_history.get(slot as usize) else { continue };
            let b = self.block_tree.get(*d).expect("history block exists");
            if b.is_genesis() {
                continue;
            }
            burned += b.burned;
            priority += b.priority_fee_total;
            priority_by_slot[i] = b.priority_fee_total as f64 / WEI_PER_GWEI as f64;
            blocks_produced += 1;
            base_fee_sum += b.base_fee_per_gas;
        }

        let deposited = std::mem::take(&mut self.acc.deposited);
        let ledger = EpochLedger {
            epoch,
            issued,
            burned,
            confiscated,
            priority_transferred: priority,
            supply_delta: issued as i128 * WEI_PER_GWEI as i128 - burned as i128,
            deposited,
            withdrawn,
            finalized,
            n_active,
            total_effective: total,
        };
        Ok(EpochReport {
            ledger,
            justified,
            finalized,
            epochs_since_finality: esf,
            attesting_weight,
            offline_weight,
            priority_by_slot,
            blocks_produced,
            base_fee_sum,
            events,
        })
    }

    fn exit_validator(&mut self, id: ValidatorId, events: &mut Vec<ConsensusEvent>) -> Gwei {
        let v = self.registry.get_mut(&id).expect("exiting validator exists");
        debug_assert!(v.status.can_transition_to(ValidatorStatus::Exited), "{:?} cannot exit", v.status);
        let amount = v.deposit;
        v.deposit = 0;
        v.effective_balance = 0;
        v.status = ValidatorStatus::Exited;
        let cause = v.exit_cause.unwrap_or(ExitCause::Voluntary);
        self.withdrawn_total += amount;
        self.latest_messages.remove(id);
        events.push(ConsensusEvent::Exited { validator: id, cause, withdrawn_gwei: amount });
        amount
    }
}

/// Rounds real-valued entitlements to whole Gwei so that the sum equals the
/// rounded real total (largest-remainder method; ties go to the lower id).
pub fn apportion(entitlements: &BTreeMap<ValidatorId, f64>) -> BTreeMap<ValidatorId, Gwei> {
    let total: f64 = entitlements.values().sum();
    let target = total.round() as u64;
    let mut out = BTreeMap::new();
    let mut remainders = Vec::with_capacity(entitlements.len());
    let mut assigned = 0u64;
    for (id, &x) in entitlements {
        let x = x.max(0.0);
        let floor = x.floor() as u64;
        assigned += floor;
        out.insert(*id, floor);
        remainders.push((x - floor as f64, *id));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = target.saturating_sub(assigned);
    for (_, id) in remainders {
        if left == 0 {
            break;
        }
        *out.get_mut(&id).expect("present") += 1;
        left -= 1;
    }
    out
}
