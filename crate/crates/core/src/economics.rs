//! Validator income, participation and supply-change formulas.
//!
//! Reward coefficients carry Gwei/sqrt(ETH) units: with balances in ETH, every
//! closed form below yields Gwei per epoch. USD figures are obtained by
//! converting Gwei to ETH and multiplying by the ETH/USD rate.

use serde::{Deserialize, Serialize};

use crate::units::{gwei_to_eth, Epoch, Gwei, Wei, EPOCHS_PER_YEAR, GWEI_PER_ETH, MAX_EFFECTIVE_BALANCE_ETH, SLOTS_PER_EPOCH};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EconError {
    #[error("balance list is empty")]
    EmptyBalances,
    #[error("balances must be positive, got {0}")]
    NonPositiveBalance(f64),
}

/// Uniform-validator reward parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconParams {
    /// Behaviour-only reward coefficient.
    pub r_coeff: f64,
    /// Per-slot opportunity (proposal, sync committee) coefficient.
    pub w_coeff: f64,
    /// Average priority fee per slot, Gwei.
    pub p_avg_gwei: f64,
}

/// APR targeted by the default calibration.
pub const DEFAULT_TARGET_APR: f64 = 0.04;
/// Validator count at which the default calibration is pinned.
pub const DEFAULT_CALIBRATION_N: u64 = 10_000;
/// Share of issuance going to per-slot opportunities (proposals plus sync
/// committee), mirroring the 10/64 split of the beacon-chain weights.
pub const DEFAULT_OPPORTUNITY_SHARE: f64 = 10.0 / 64.0;

impl EconParams {
    /// Solves for `(R, W)` such that the issuance APR at `n` validators equals
    /// `target_apr`, with `opportunity_share` of issuance on the `W` channel.
    pub fn calibrate(target_apr: f64, n: u64, opportunity_share: f64) -> Self {
        let per_epoch_gwei = target_apr * (MAX_EFFECTIVE_BALANCE_ETH * GWEI_PER_ETH) as f64 / EPOCHS_PER_YEAR as f64;
        // per-validator issuance = sqrt(32 n) (R + 32 W) / n
        let combined = per_epoch_gwei * n as f64 / sqrt_total_uniform(n);
        Self {
            r_coeff: combined * (1.0 - opportunity_share),
            w_coeff: combined * opportunity_share / SLOTS_PER_EPOCH as f64,
            p_avg_gwei: 0.0,
        }
    }
}

impl Default for EconParams {
    fn default() -> Self {
        Self::calibrate(DEFAULT_TARGET_APR, DEFAULT_CALIBRATION_N, DEFAULT_OPPORTUNITY_SHARE)
    }
}

/// sqrt(sum of balances) with `n` validators at 32 ETH, i.e. 4 sqrt(2n).
fn sqrt_total_uniform(n: u64) -> f64 {
    4.0 * (2.0 * n as f64).sqrt()
}

/// Expected income of one validator in Gwei per epoch, from its own balance
/// and coefficients, every active balance and the 32 per-slot priority-fee
/// totals (Gwei).
pub fn expected_income_general_gwei(
    balance: f64,
    r_coeff: f64,
    w_coeff: f64,
    balances: &[f64],
    priority_by_slot: &[f64],
) -> Result<f64, EconError> {
    if balances.is_empty() {
        return Err(EconError::EmptyBalances);
    }
    if let Some(&b) = balances.iter().find(|b| **b <= 0.0) {
        return Err(EconError::NonPositiveBalance(b));
    }
    let n = balances.len() as f64;
    let sqrt_total = balances.iter().sum::<f64>().sqrt();
    let behaviour = r_coeff * balance / sqrt_total;
    let opportunity = n * w_coeff * balance / sqrt_total;
    let slots: f64 = (0..SLOTS_PER_EPOCH as usize)
        .map(|s| priority_by_slot.get(s).copied().unwrap_or(0.0) + opportunity)
        .sum();
    Ok(behaviour + slots / n)
}

/// [`expected_income_general_gwei`] converted to USD at `theta_usd` per ETH.
pub fn expected_income_general(
    balance: f64,
    r_coeff: f64,
    w_coeff: f64,
    balances: &[f64],
    priority_by_slot: &[f64],
    theta_usd: f64,
) -> Result<f64, EconError> {
    Ok(gwei_to_eth(expected_income_general_gwei(balance, r_coeff, w_coeff, balances, priority_by_slot)?) * theta_usd)
}

/// Issuance part of the uniform-validator income: (4R sqrt(2n) + 128 W sqrt(2n)) / n Gwei.
pub fn issuance_per_validator_gwei(n: u64, params: &EconParams) -> f64 {
    let root = sqrt_total_uniform(n);
    (params.r_coeff * root + SLOTS_PER_EPOCH as f64 * params.w_coeff * root) / n as f64
}

/// (4R sqrt(2n) + 32 (P + 4W sqrt(2n))) / n, in Gwei per epoch.
pub fn expected_income_simplified_gwei(n: u64, params: &EconParams) -> f64 {
    let root = sqrt_total_uniform(n);
    (params.r_coeff * root + SLOTS_PER_EPOCH as f64 * (params.p_avg_gwei + params.w_coeff * root)) / n as f64
}

pub fn expected_income_simplified(n: u64, params: &EconParams, theta_usd: f64) -> f64 {
    gwei_to_eth(expected_income_simplified_gwei(n, params)) * theta_usd
}

/// Stay (or join) iff income covers the per-epoch cost.
pub fn stay_decision(income_usd: f64, alpha_usd: f64) -> bool {
    income_usd >= alpha_usd
}

/// Net new ETH per epoch in Gwei: 4 sqrt(2n) (R + 32 W) minus the burned base
/// fees. Priority fees are transfers and do not appear.
pub fn supply_delta(n: u64, params: &EconParams, burned_gwei: f64) -> f64 {
    sqrt_total_uniform(n) * (params.r_coeff + SLOTS_PER_EPOCH as f64 * params.w_coeff) - burned_gwei
}

/// Annualised issuance yield of a 32 ETH validator.
pub fn apr_estimate(n: u64, params: &EconParams) -> f64 {
    issuance_per_validator_gwei(n, params) / (MAX_EFFECTIVE_BALANCE_ETH * GWEI_PER_ETH) as f64
        * EPOCHS_PER_YEAR as f64
}

/// Linear per-epoch cost model: a fixed USD amount plus a per-epoch rate on
/// the USD value of the 32 ETH deposit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaPolicy {
    #[serde(default)]
    pub fixed_usd: f64,
    #[serde(default)]
    pub rate_per_epoch: f64,
}

pub fn opportunity_cost(theta_usd: f64, policy: &AlphaPolicy) -> f64 {
    policy.fixed_usd + policy.rate_per_epoch * MAX_EFFECTIVE_BALANCE_ETH as f64 * theta_usd
}

/// Per-epoch supply accounting.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLedger {
    pub epoch: Epoch,
    pub issued: Gwei,
    pub burned: Wei,
    pub confiscated: Gwei,
    pub priority_transferred: Wei,
    /// issued - burned, in wei.
    pub supply_delta: i128,
    /// New validator deposits received this epoch.
    pub deposited: Gwei,
    /// Balances released to exiting validators this epoch.
    pub withdrawn: Gwei,
    pub finalized: bool,
    pub n_active: u64,
    pub total_effective: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn general_zero_case() {
        let v = expected_income_general_gwei(32.0, 0.0, 0.0, &[32.0; 5], &[0.0; 32]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn general_single_validator() {
        let r = 32f64.sqrt();
        let v = expected_income_general_gwei(32.0, r, 0.0, &[32.0], &[0.0; 32]).unwrap();
        assert!(rel(v, 32.0) < 1e-12);
    }

    #[test]
    fn general_opportunity_term_identity() {
        let w = 3.0;
        let v = expected_income_general_gwei(32.0, 0.0, w, &[32.0, 32.0], &[0.0; 32]).unwrap();
        assert!(rel(v, 32.0 * w * 32.0 / 64f64.sqrt()) < 1e-12);
    }

    #[test]
    fn general_rejects_bad_balances() {
        assert_eq!(expected_income_general_gwei(32.0, 1.0, 1.0, &[], &[]), Err(EconError::EmptyBalances));
        assert_eq!(expected_income_general_gwei(32.0, 1.0, 1.0, &[32.0, 0.0], &[]), Err(EconError::NonPositiveBalance(0.0)));
    }

    #[test]
    fn simplified_examples() {
        let p = EconParams { r_coeff: 64.0, w_coeff: 2.0, p_avg_gwei: 0.0 };
        assert!(rel(expected_income_simplified_gwei(2, &p), 512.0) < 1e-12);
        let p = EconParams { r_coeff: 1.0, w_coeff: 0.0, p_avg_gwei: 0.0 };
        assert!(rel(expected_income_simplified_gwei(8, &p), 2.0) < 1e-12);
        let p = EconParams { r_coeff: 0.0, w_coeff: 0.0, p_avg_gwei: 10.0 };
        // 160 Gwei at 2 USD/ETH.
        assert!(rel(expected_income_simplified(2, &p, 2.0) * GWEI_PER_ETH as f64, 320.0) < 1e-12);
    }

    #[test]
    fn stay_is_weak_inequality() {
        assert!(stay_decision(5.0, 4.0));
        assert!(!stay_decision(5.0, 6.0));
        assert!(stay_decision(5.0, 5.0));
    }

    #[test]
    fn supply_delta_examples() {
        let p = EconParams { r_coeff: 1.0, w_coeff: 0.0, p_avg_gwei: 0.0 };
        assert!(rel(supply_delta(8, &p, 0.0), 16.0) < 1e-12);
        assert!(rel(supply_delta(8, &p, 20.0), -4.0) < 1e-12);
        let p = EconParams { r_coeff: 64.0, w_coeff: 1.0, p_avg_gwei: 0.0 };
        assert!(rel(supply_delta(2, &p, 0.0), 768.0) < 1e-12);
    }

    #[test]
    fn apr_is_definitional() {
        // Per-validator issuance of 32 ETH / 82125 epochs gives APR 1.
        let target = 32.0 * GWEI_PER_ETH as f64 / EPOCHS_PER_YEAR as f64;
        let n = 50;
        let r = target * n as f64 / sqrt_total_uniform(n);
        let p = EconParams { r_coeff: r, w_coeff: 0.0, p_avg_gwei: 0.0 };
        assert!(rel(apr_estimate(n, &p), 1.0) < 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        let p = EconParams::default();
        assert!(rel(apr_estimate(DEFAULT_CALIBRATION_N, &p), DEFAULT_TARGET_APR) < 1e-12);
        let w_share = SLOTS_PER_EPOCH as f64 * p.w_coeff / (p.r_coeff + SLOTS_PER_EPOCH as f64 * p.w_coeff);
        assert!(rel(w_share, DEFAULT_OPPORTUNITY_SHARE) < 1e-12);
    }

    #[test]
    fn quadrupling_n_halves_apr() {
        let p = EconParams::default();
        for n in [10, 1_000, 123_456] {
            let direct = |n: u64| sqrt_total_uniform(n) * (p.r_coeff + 32.0 * p.w_coeff) / n as f64;
            assert!(rel(direct(4 * n) / direct(n), 0.5) < 1e-12);
            assert!(rel(apr_estimate(4 * n, &p), apr_estimate(n, &p) / 2.0) < 1e-12);
        }
    }

    #[test]
    fn opportunity_cost_examples() {
        assert_eq!(opportunity_cost(2000.0, &AlphaPolicy::default()), 0.0);
        assert_eq!(opportunity_cost(2000.0, &AlphaPolicy { fixed_usd: 1.0, rate_per_epoch: 0.0 }), 1.0);
        let a = opportunity_cost(2000.0, &AlphaPolicy { fixed_usd: 0.5, rate_per_epoch: 1e-5 });
        assert!(rel(a, 0.5 + 0.64) < 1e-12);
    }
}
