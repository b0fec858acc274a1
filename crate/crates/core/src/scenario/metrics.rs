//! Per-epoch metrics and the ordered event log.

use serde::{Deserialize, Serialize};

use super::config::AttackKind;
use crate::consensus::{ExitCause, ValidatorId};
use crate::units::{Epoch, Gwei, Slot, Wei};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: Epoch,
    pub theta_usd: f64,
    /// Active validators after the epoch's churn.
    pub n_active: u64,
    pub total_effective_eth: u64,
    pub justified: bool,
    pub finalized: bool,
    pub epochs_since_finality: u64,
    pub base_fee_gwei_avg: f64,
    pub burned_wei: Wei,
    pub issued_gwei: Gwei,
    /// issued - burned, in wei.
    pub supply_delta_wei: i128,
    pub confiscated_gwei: Gwei,
    pub users_ethereum: u64,
    pub users_by_competitor: Vec<u64>,
    pub exit_queue: u64,
    pub activation_queue: u64,
    pub events: Vec<String>,
    pub migrated_out: u64,
    pub migrated_in: u64,
    /// Active validators and their effective balance when the epoch was processed.
    pub n_processed: u64,
    pub effective_processed_eth: u64,
    pub attacks_triggered: Vec<usize>,
}

impl MetricsRow {
    pub fn users_competitors(&self) -> u64 {
        self.users_by_competitor.iter().sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub rows: Vec<MetricsRow>,
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SimEvent {
    AttackTriggered { attack: usize, attack_kind: AttackKind, magnitude: f64, victims: Vec<ValidatorId> },
    AttackEnded { attack: usize, attack_kind: AttackKind },
    Slashed { validator: ValidatorId, confiscated_gwei: Gwei },
    Ejected { validator: ValidatorId, deposit_gwei: Gwei },
    Exited { validator: ValidatorId, cause: ExitCause, withdrawn_gwei: Gwei },
    Activated { validator: ValidatorId },
    OfflineWeightAboveThird { offline_eth: u64, total_eth: u64 },
    FinalityStall { last_finalized_epoch: Epoch },
    FinalityResumed { finalized_checkpoint: Epoch, stalled_epochs: u64 },
    InactivityLeakStarted { epochs_since_finality: u64 },
    ExitsRequested { count: u64, validators: Vec<ValidatorId> },
    ExitQueueSaturated { queue_len: u64, churn_limit: u64 },
    JoinsRequested { count: u64 },
    Migration { left_ethereum: u64, returned_to_ethereum: u64, between_competitors: u64, eth_sold: f64 },
}

impl SimEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SimEvent::AttackTriggered { .. } => "attack_triggered",
            SimEvent::AttackEnded { .. } => "attack_ended",
            SimEvent::Slashed { .. } => "slashed",
            SimEvent::Ejected { .. } => "ejected",
            SimEvent::Exited { .. } => "exited",
            SimEvent::Activated { .. } => "activated",
            SimEvent::OfflineWeightAboveThird { .. } => "offline_weight_above_third",
            SimEvent::FinalityStall { .. } => "finality_stall",
            SimEvent::FinalityResumed { .. } => "finality_resumed",
            SimEvent::InactivityLeakStarted { .. } => "inactivity_leak_started",
            SimEvent::ExitsRequested { .. } => "exits_requested",
            SimEvent::ExitQueueSaturated { .. } => "exit_queue_saturated",
            SimEvent::JoinsRequested { .. } => "joins_requested",
            SimEvent::Migration { .. } => "migration",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub epoch: Epoch,
    pub slot: Slot,
    #[serde(flatten)]
    pub event: SimEvent,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn push(&mut self, epoch: Epoch, slot: Slot, event: SimEvent) {
        self.records.push(EventRecord { epoch, slot, event });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventRecord> {
        self.records.iter()
    }

    /// Index of the first record of `kind`, if any.
    pub fn first_index(&self, kind: &str) -> Option<usize> {
        self.records.iter().position(|r| r.event.kind() == kind)
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.records.iter().filter(move |r| r.event.kind() == kind)
    }
}
