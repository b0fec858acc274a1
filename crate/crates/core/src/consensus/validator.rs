use serde::{Deserialize, Serialize};

use crate::units::{Epoch, Gwei, EJECTION_BALANCE_GWEI, GWEI_PER_ETH, MAX_EFFECTIVE_BALANCE_ETH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatorId(pub u64);

impl std::fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatorStatus {
    Pending,
    Active,
    ExitQueued,
    Slashed,
    Exited,
}

impl ValidatorStatus {
    /// Whether a transition `self -> next` is allowed by the lifecycle
    /// `pending -> active -> {exit_queued, slashed} -> exited`.
    pub fn can_transition_to(self, next: ValidatorStatus) -> bool {
        use ValidatorStatus::*;
        matches!(
            (self, next),
            (Pending, Active)
                | (Active, ExitQueued)
                | (Active, Slashed)
                | (ExitQueued, Exited)
                | (Slashed, Exited)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitCause {
    Voluntary,
    Ejected,
    Slashed,
}

/// Epoch ranges during which a validator does not perform its duties.
///
/// Windows are half-open `[start, end)`; `end = None` means "until the end of
/// the run".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineSchedule {
    offline: Vec<(Epoch, Option<Epoch>)>,
}

impl OnlineSchedule {
    pub fn always() -> Self {
        Self::default()
    }

    pub fn is_online(&self, epoch: Epoch) -> bool {
        !self
            .offline
            .iter()
            .any(|&(start, end)| epoch >= start && end.is_none_or(|end| epoch < end))
    }

    pub fn add_offline_window(&mut self, start: Epoch, end: Option<Epoch>) {
        self.offline.push((start, end));
    }
}

/// How a validator behaves and how strongly it is rewarded.
///
/// `r_coeff` scales the per-epoch attestation reward, `w_coeff` the per-slot
/// proposer and sync-committee opportunities. Both carry Gwei/sqrt(ETH) units so
/// that `coeff * b / sqrt(sum b)` is a Gwei amount.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicy {
    pub r_coeff: f64,
    pub w_coeff: f64,
    pub online: OnlineSchedule,
    pub attests_honestly: bool,
}

impl BehaviorPolicy {
    pub fn honest(r_coeff: f64, w_coeff: f64) -> Self {
        debug_assert!(r_coeff >= 0.0 && w_coeff >= 0.0);
        Self {
            r_coeff,
            w_coeff,
            online: OnlineSchedule::always(),
            attests_honestly: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatorRecord {
    pub id: ValidatorId,
    pub deposit: Gwei,
    pub effective_balance: u64,
    pub status: ValidatorStatus,
    pub policy: BehaviorPolicy,
    pub slashed_at_epoch: Option<Epoch>,
    pub exit_cause: Option<ExitCause>,
    /// Per-validator seed feeding its RANDAO reveals.
    pub reveal_seed: u64,
}

impl ValidatorRecord {
    pub fn new(id: ValidatorId, deposit: Gwei, status: ValidatorStatus, policy: BehaviorPolicy, reveal_seed: u64) -> Self {
        Self {
            id,
            deposit,
            effective_balance: compute_effective_balance(deposit),
            status,
            policy,
            slashed_at_epoch: None,
            exit_cause: None,
            reveal_seed,
        }
    }

    /// Active validators carry attestation weight; exit-queued validators keep
    /// their duties until the churn releases them.
    pub fn is_active(&self) -> bool {
        matches!(self.status, ValidatorStatus::Active | ValidatorStatus::ExitQueued)
    }

    pub fn is_online(&self, epoch: Epoch) -> bool {
        self.policy.online.is_online(epoch)
    }

    pub fn refresh_effective_balance(&mut self) {
        self.effective_balance = compute_effective_balance(self.deposit);
    }
}

/// Whole-ETH effective balance, rounded down and capped at 32.
pub fn compute_effective_balance(deposit: Gwei) -> u64 {
    (deposit / GWEI_PER_ETH).min(MAX_EFFECTIVE_BALANCE_ETH)
}

/// Queues an active validator for exit when its deposit is strictly below
/// 16 ETH. Returns whether the status changed.
pub fn eject_if_underfunded(record: &mut ValidatorRecord) -> bool {
    if record.status != ValidatorStatus::Active || record.deposit >= EJECTION_BALANCE_GWEI {
        return false;
    }
    record.status = ValidatorStatus::ExitQueued;
    record.exit_cause = Some(ExitCause::Ejected);
    true
}
