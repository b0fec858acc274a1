use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::validator::ValidatorId;
use super::ConsensusError;
use crate::units::{mix_words, Epoch, Slot, Wei, SLOTS_PER_EPOCH};

/// Synthetic 64-bit block identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(pub u64);

impl std::fmt::Display for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Digest of a block from its position and author, keyed by the run seed.
pub fn block_digest(run_seed: u64, slot: Slot, parent: Digest, proposer: Option<ValidatorId>) -> Digest {
    let proposer = proposer.map_or(u64::MAX, |p| p.0);
    Digest(mix_words(&[run_seed, slot, parent.0, proposer]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockNode {
    pub digest: Digest,
    /// Genesis is its own parent.
    pub parent: Digest,
    pub slot: Slot,
    pub height: u64,
    pub proposer: Option<ValidatorId>,
    pub gas_used: u64,
    pub base_fee_per_gas: f64,
    pub priority_fee_total: Wei,
    pub burned: Wei,
    pub attestation_weight: u64,
}

impl BlockNode {
    pub fn genesis(digest: Digest, base_fee_per_gas: f64) -> Self {
        Self {
            digest,
            parent: digest,
            slot: 0,
            height: 0,
            proposer: None,
            gas_used: 0,
            base_fee_per_gas,
            priority_fee_total: 0,
            burned: 0,
            attestation_weight: 0,
        }
    }

    pub fn is_genesis(&self) -> bool {
        self.parent == self.digest
    }
}

/// Append-only block tree. Blocks are stored in insertion order, which is also
/// non-decreasing slot order, so every descendant has a larger index than its
/// ancestors.
#[derive(Clone, Debug, Default)]
pub struct BlockTree {
    nodes: Vec<BlockNode>,
    parents: Vec<usize>,
    children: Vec<Vec<usize>>,
    index: HashMap<Digest, usize>,
}

impl BlockTree {
    pub fn new(genesis: BlockNode) -> Self {
        let mut tree = Self::default();
        tree.index.insert(genesis.digest, 0);
        tree.nodes.push(genesis);
        tree.parents.push(0);
        tree.children.push(Vec::new());
        tree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn genesis(&self) -> &BlockNode {
        &self.nodes[0]
    }

    pub fn get(&self, digest: Digest) -> Option<&BlockNode> {
        self.index.get(&digest).map(|&i| &self.nodes[i])
    }

    pub fn get_mut(&mut self, digest: Digest) -> Option<&mut BlockNode> {
        self.index.get(&digest).map(|&i| &mut self.nodes[i])
    }

    pub fn contains(&self, digest: Digest) -> bool {
        self.index.contains_key(&digest)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BlockNode> {
        self.nodes.iter()
    }

    pub(crate) fn index_of(&self, digest: Digest) -> Option<usize> {
        self.index.get(&digest).copied()
    }

    pub(crate) fn node_at(&self, idx: usize) -> &BlockNode {
        &self.nodes[idx]
    }

    pub(crate) fn parent_index(&self, idx: usize) -> usize {
        self.parents[idx]
    }

    pub(crate) fn children_of(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    /// Inserts a block whose parent is already known. The height is derived
    /// from the parent; the caller's value is ignored.
    pub fn insert(&mut self, mut node: BlockNode) -> Result<Digest, ConsensusError> {
        if self.index.contains_key(&node.digest) {
            return Err(ConsensusError::DigestCollision(node.digest));
        }
        let parent_idx = self.index_of(node.parent).ok_or(ConsensusError::UnknownBlock(node.parent))?;
        let parent = &self.nodes[parent_idx];
        if parent.slot >= node.slot {
            return Err(ConsensusError::NonIncreasingSlot { parent: parent.slot, child: node.slot });
        }
        if let Some(last) = self.nodes.last() {
            debug_assert!(last.slot <= node.slot, "blocks must be appended in slot order");
        }
        node.height = parent.height + 1;
        let idx = self.nodes.len();
        let digest = node.digest;
        self.index.insert(digest, idx);
        self.nodes.push(node);
        self.parents.push(parent_idx);
        self.children.push(Vec::new());
        self.children[parent_idx].push(idx);
        Ok(digest)
    }

    /// Whether `ancestor` is `descendant` or one of its ancestors.
    pub fn is_ancestor(&self, ancestor: Digest, descendant: Digest) -> bool {
        let (Some(a), Some(mut d)) = (self.index_of(ancestor), self.index_of(descendant)) else {
            return false;
        };
        loop {
            if d == a {
                return true;
            }
            if d < a || d == 0 {
                return false;
            }
            d = self.parents[d];
        }
    }

    /// Latest block at or before `slot` on the chain ending at `head`.
    pub fn ancestor_at_slot(&self, head: Digest, slot: Slot) -> Option<Digest> {
        let mut idx = self.index_of(head)?;
        while self.nodes[idx].slot > slot {
            if idx == 0 {
                return None;
            }
            idx = self.parents[idx];
        }
        Some(self.nodes[idx].digest)
    }
}

/// Maps `(epoch, slot offset)` to the height of the block produced there, or
/// `None` for an empty slot. `history[s]` holds the digest produced at global
/// slot `s`; slots beyond the history have not been simulated yet.
pub fn block_schedule(epoch: Epoch, slot: Slot, history: &[Option<Digest>], tree: &BlockTree) -> Result<Option<u64>, ConsensusError> {
    if slot >= SLOTS_PER_EPOCH {
        return Err(ConsensusError::SlotOutOfRange(slot));
    }
    let global = epoch * SLOTS_PER_EPOCH + slot;
    let entry = history.get(global as usize).ok_or(ConsensusError::FutureSlot(global))?;
    Ok(entry.and_then(|d| tree.get(d)).map(|b| b.height))
}
