//! Proposer, committee and sync-committee selection.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::randao::Randao;
use super::validator::{ValidatorId, ValidatorRecord};
use super::ConsensusError;
use crate::units::{mix_words, Epoch, Slot, SLOTS_PER_EPOCH};

pub type Registry = BTreeMap<ValidatorId, ValidatorRecord>;

const DOMAIN_PROPOSER: u64 = 0x5052_4f50;
const DOMAIN_COMMITTEE: u64 = 0x434f_4d4d;
const DOMAIN_SYNC: u64 = 0x5359_4e43;

fn seeded(randao: Randao, domain: u64, epoch: Epoch, slot: Slot) -> ChaCha8Rng {
    let r = randao.0;
    ChaCha8Rng::seed_from_u64(mix_words(&[domain, r[0], r[1], r[2], r[3], epoch, slot]))
}

pub fn active_ids(registry: &Registry) -> Vec<ValidatorId> {
    registry.values().filter(|v| v.is_active()).map(|v| v.id).collect()
}

/// Picks the proposer of `slot` uniformly among active validators.
pub fn select_proposer(randao: Randao, epoch: Epoch, slot: Slot, registry: &Registry) -> Result<ValidatorId, ConsensusError> {
    let active = active_ids(registry);
    if active.is_empty() {
        return Err(ConsensusError::RegistryEmpty);
    }
    let mut rng = seeded(randao, DOMAIN_PROPOSER, epoch, slot);
    Ok(active[rng.gen_range(0..active.len())])
}

/// Beacon committees for one epoch, indexed by slot offset within the epoch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Committees {
    pub epoch: Epoch,
    pub by_slot: Vec<Vec<ValidatorId>>,
}

impl Committees {
    pub fn for_slot(&self, slot: Slot) -> &[ValidatorId] {
        &self.by_slot[(slot % SLOTS_PER_EPOCH) as usize]
    }
}

/// Shuffles the active set and cuts it into 32 near-equal committees. The
/// first `n % 32` slots receive one extra member.
pub fn assign_committees(randao: Randao, epoch: Epoch, registry: &Registry) -> Committees {
    let mut ids = active_ids(registry);
    let mut rng = seeded(randao, DOMAIN_COMMITTEE, epoch, 0);
    ids.shuffle(&mut rng);

    let parts = SLOTS_PER_EPOCH as usize;
    let base = ids.len() / parts;
    let extra = ids.len() % parts;
    let mut by_slot = Vec::with_capacity(parts);
    let mut cursor = 0;
    for i in 0..parts {
        let size = base + usize::from(i < extra);
        by_slot.push(ids[cursor..cursor + size].to_vec());
        cursor += size;
    }
    Committees { epoch, by_slot }
}

/// Draws `min(max_size, n)` distinct active validators for a sync period.
pub fn select_sync_committee(randao: Randao, period_start: Epoch, registry: &Registry, max_size: usize) -> Vec<ValidatorId> {
    let mut ids = active_ids(registry);
    let mut rng = seeded(randao, DOMAIN_SYNC, period_start, 0);
    ids.shuffle(&mut rng);
    ids.truncate(max_size.min(ids.len()));
    ids.sort();
    ids
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::consensus::randao::reveal_digest;
    use crate::consensus::validator::{BehaviorPolicy, ValidatorStatus};
    use crate::units::DEPOSIT_GWEI;

    fn registry(n: u64) -> Registry {
        (0..n)
            .map(|i| {
                let id = ValidatorId(i);
                (id, ValidatorRecord::new(id, DEPOSIT_GWEI, ValidatorStatus::Active, BehaviorPolicy::honest(1.0, 1.0), i))
            })
            .collect()
    }

    #[test]
    fn single_validator_always_proposes() {
        let reg = registry(1);
        for slot in 0..64 {
            assert_eq!(select_proposer(reveal_digest(0, slot), 0, slot, &reg).unwrap(), ValidatorId(0));
        }
    }

    #[test]
    fn empty_registry_is_an_error() {
        let mut reg = registry(2);
        for v in reg.values_mut() {
            v.status = ValidatorStatus::Pending;
        }
        assert_eq!(select_proposer(Randao::ZERO, 0, 0, &reg), Err(ConsensusError::RegistryEmpty));
    }

    #[test]
    fn proposer_is_deterministic() {
        let reg = registry(50);
        let r = reveal_digest(9, 4);
        assert_eq!(select_proposer(r, 3, 100, &reg), select_proposer(r, 3, 100, &reg));
    }

    #[test]
    fn proposer_draws_pass_chi_square() {
        // 15 degrees of freedom, p = 0.01 critical value.
        const CRITICAL: f64 = 30.578;
        let reg = registry(16);
        let mut counts = [0u64; 16];
        let draws = 10_000u64;
        for slot in 0..draws {
            let epoch = slot / SLOTS_PER_EPOCH;
            let id = select_proposer(reveal_digest(epoch, 7), epoch, slot, &reg).unwrap();
            counts[id.0 as usize] += 1;
        }
        let expected = draws as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < CRITICAL, "chi2 = {chi2}");
    }

    #[test]
    fn thirty_two_validators_one_per_slot() {
        let c = assign_committees(reveal_digest(1, 1), 1, &registry(32));
        assert!(c.by_slot.iter().all(|m| m.len() == 1));
    }

    #[test]
    fn remainder_goes_to_lowest_slots() {
        let c = assign_committees(reveal_digest(1, 1), 1, &registry(33));
        assert_eq!(c.by_slot[0].len(), 2);
        assert!(c.by_slot[1..].iter().all(|m| m.len() == 1));

        let c = assign_committees(reveal_digest(1, 1), 1, &registry(70));
        let sizes: Vec<usize> = c.by_slot.iter().map(Vec::len).collect();
        assert_eq!(&sizes[..6], &[3; 6]);
        assert!(sizes[6..].iter().all(|&s| s == 2));
    }

    #[test]
    fn committees_partition_active_set() {
        for n in [1, 5, 31, 32, 33, 100, 257] {
            let reg = registry(n);
            let c = assign_committees(reveal_digest(2, n), 2, &reg);
            let mut seen = BTreeSet::new();
            for m in &c.by_slot {
                for id in m {
                    assert!(seen.insert(*id), "duplicate {id}");
                }
            }
            assert_eq!(seen.into_iter().collect::<Vec<_>>(), active_ids(&reg));
        }
    }

    #[test]
    fn committees_reshuffle_each_epoch() {
        let reg = registry(64);
        let a = assign_committees(reveal_digest(1, 1), 1, &reg);
        let b = assign_committees(reveal_digest(1, 1), 2, &reg);
        assert_ne!(a.by_slot, b.by_slot);
    }

    #[test]
    fn sync_committee_scaled_to_registry() {
        let reg = registry(20);
        let s = select_sync_committee(Randao::ZERO, 0, &reg, 512);
        assert_eq!(s.len(), 20);
        let s = select_sync_committee(Randao::ZERO, 0, &reg, 8);
        assert_eq!(s.len(), 8);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
