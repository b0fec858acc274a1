//! Proof-of-stake state machine.

pub mod block_tree;
pub mod duties;
pub mod fork_choice;
pub mod randao;
pub mod state;
pub mod validator;

pub use block_tree::{block_schedule, BlockNode, BlockTree, Digest};
pub use duties::{assign_committees, select_proposer, Committees, Registry};
pub use fork_choice::{fork_choice_head, LatestMessages};
pub use randao::{mix_randao, reveal_digest, Randao};
pub use state::{
    AttestationSummary, BeaconState, BlockPayload, Checkpoint, CheckpointState, ConsensusEvent, ConsensusParams,
    EpochReport, SlotDuty,
};
pub use validator::{
    compute_effective_balance, eject_if_underfunded, BehaviorPolicy, ExitCause, OnlineSchedule, ValidatorId,
    ValidatorRecord, ValidatorStatus,
};

use crate::units::Slot;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConsensusError {
    #[error("registry empty: no active validators")]
    RegistryEmpty,
    #[error("digest collision on {0}")]
    DigestCollision(Digest),
    #[error("unknown block {0}")]
    UnknownBlock(Digest),
    #[error("child slot {child} is not after parent slot {parent}")]
    NonIncreasingSlot { parent: Slot, child: Slot },
    #[error("slot {0} has not been simulated yet")]
    FutureSlot(Slot),
    #[error("slot offset {0} is outside the epoch")]
    SlotOutOfRange(Slot),
    #[error("unknown validator {0}")]
    UnknownValidator(ValidatorId),
    #[error("validator {id} is {status:?}, expected active")]
    NotActive { id: ValidatorId, status: ValidatorStatus },
    #[error("epoch {epoch} cannot be processed at slot {slot}")]
    EpochNotComplete { epoch: u64, slot: Slot },
    #[error("a block was supplied for slot {0} but it has no proposer")]
    NoProposer(Slot),
}
