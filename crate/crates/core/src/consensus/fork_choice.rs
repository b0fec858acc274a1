//! Latest-message-driven greedy heaviest-subtree fork choice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::block_tree::{BlockTree, Digest};
use super::validator::ValidatorId;
use super::ConsensusError;
use crate::units::Slot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatestMessage {
    pub slot: Slot,
    pub block: Digest,
}

/// The newest head vote of every validator. Older votes are discarded on
/// arrival, so only one message per validator is ever counted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LatestMessages {
    messages: BTreeMap<ValidatorId, LatestMessage>,
}

impl LatestMessages {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a vote; returns false if it was not newer than the stored one.
    pub fn observe(&mut self, validator: ValidatorId, slot: Slot, block: Digest) -> bool {
        match self.messages.get(&validator) {
            Some(prev) if prev.slot >= slot => false,
            _ => {
                self.messages.insert(validator, LatestMessage { slot, block });
                true
            }
        }
    }

    pub fn get(&self, validator: ValidatorId) -> Option<&LatestMessage> {
        self.messages.get(&validator)
    }

    pub fn remove(&mut self, validator: ValidatorId) {
        self.messages.remove(&validator);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ValidatorId, &LatestMessage)> {
        self.messages.iter()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Descends from `justified` to the child whose subtree carries the most
/// latest-message weight, until a leaf is reached. Equal weights go to the
/// numerically smaller digest. `weight_of` gives a validator's effective
/// balance; validators it maps to zero do not count.
pub fn fork_choice_head(
    tree: &BlockTree,
    latest: &LatestMessages,
    weight_of: impl Fn(ValidatorId) -> u64,
    justified: Digest,
) -> Result<Digest, ConsensusError> {
    let root = tree.index_of(justified).ok_or(ConsensusError::UnknownBlock(justified))?;

    // Descendants of `root` all sit at larger indices, so one reverse sweep
    // accumulates subtree weights.
    let span = tree.len() - root;
    let mut weights = vec![0u64; span];
    for (validator, msg) in latest.iter() {
        let Some(idx) = tree.index_of(msg.block) else { continue };
        if idx >= root {
            weights[idx - root] += weight_of(*validator);
        }
    }
    for idx in (root + 1..tree.len()).rev() {
        let parent = tree.parent_index(idx);
        if parent >= root {
            weights[parent - root] += weights[idx - root];
        }
    }

    let mut head = root;
    loop {
        let best = tree.children_of(head).iter().copied().max_by(|&a, &b| {
            weights[a - root]
                .cmp(&weights[b - root])
                .then_with(|| tree.node_at(b).digest.cmp(&tree.node_at(a).digest))
        });
        match best {
            Some(child) => head = child,
            None => return Ok(tree.node_at(head).digest),
        }
    }
}

/// Latest-message weight of every block in `root`'s subtree (including
/// itself), keyed by digest.
pub fn subtree_weights(
    tree: &BlockTree,
    latest: &LatestMessages,
    weight_of: impl Fn(ValidatorId) -> u64,
    root: Digest,
) -> BTreeMap<Digest, u64> {
    let Some(root_idx) = tree.index_of(root) else { return BTreeMap::new() };
    let mut out = BTreeMap::new();
    let mut in_subtree = vec![false; tree.len() - root_idx];
    in_subtree[0] = true;
    for idx in root_idx + 1..tree.len() {
        let p = tree.parent_index(idx);
        in_subtree[idx - root_idx] = p >= root_idx && in_subtree[p - root_idx];
    }
    for (i, inside) in in_subtree.iter().enumerate() {
        if *inside {
            out.insert(tree.node_at(root_idx + i).digest, 0);
        }
    }
    for (v, msg) in latest.iter() {
        let w = weight_of(*v);
        let Some(mut idx) = tree.index_of(msg.block) else { continue };
        while idx >= root_idx && in_subtree[idx - root_idx] {
            *out.get_mut(&tree.node_at(idx).digest).expect("subtree node") += w;
            if idx == root_idx {
                break;
            }
            idx = tree.parent_index(idx);
        }
    }
    out
}
