//! Attack injection: offline validators and reward haircuts.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{AttackEvent, AttackKind};
use crate::consensus::{BeaconState, ValidatorId, ValidatorStatus};

/// State needed to undo an attack when it ends.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AppliedAttack {
    pub victims: Vec<ValidatorId>,
    /// Original `(r, w)` of haircut victims.
    pub saved_coeffs: Vec<(ValidatorId, f64, f64)>,
}

fn pick_victims<R: Rng + ?Sized>(state: &BeaconState, fraction: f64, rng: &mut R) -> Vec<ValidatorId> {
    let mut pool: Vec<ValidatorId> =
        state.registry().values().filter(|v| v.status == ValidatorStatus::Active).map(|v| v.id).collect();
    let k = ((fraction * pool.len() as f64).ceil() as usize).min(pool.len());
    pool.shuffle(rng);
    pool.truncate(k);
    pool.sort();
    pool
}

/// Applies `event` to the current registry. Offline attacks give the victims
/// an offline window covering the attack; a haircut scales their reward
/// coefficients by `1 - magnitude`.
pub fn inject_attack<R: Rng + ?Sized>(state: &mut BeaconState, event: &AttackEvent, rng: &mut R) -> AppliedAttack {
    let mut applied = AppliedAttack::default();
    if event.magnitude == 0.0 {
        return applied;
    }
    match event.kind {
        AttackKind::OfflineFraction | AttackKind::RightsPurchaseOffline => {
            applied.victims = pick_victims(state, event.magnitude, rng);
            for id in &applied.victims {
                let v = state.validator_mut(*id).expect("victim exists");
                v.policy.online.add_offline_window(event.start_epoch, event.end_epoch());
            }
        }
        AttackKind::DiscouragementHaircut => {
            applied.victims = pick_victims(state, event.target_fraction.unwrap_or(1.0), rng);
            let keep = 1.0 - event.magnitude;
            for id in &applied.victims {
                let v = state.validator_mut(*id).expect("victim exists");
                applied.saved_coeffs.push((*id, v.policy.r_coeff, v.policy.w_coeff));
                v.policy.r_coeff *= keep;
                v.policy.w_coeff *= keep;
            }
        }
    }
    applied
}

/// Undoes what [`inject_attack`] changed that does not expire by itself.
pub fn end_attack(state: &mut BeaconState, applied: &AppliedAttack) {
    for &(id, r, w) in &applied.saved_coeffs {
        if let Some(v) = state.validator_mut(id) {
            v.policy.r_coeff = r;
            v.policy.w_coeff = w;
        }
    }
}
