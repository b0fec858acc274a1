//! Fee market: base-fee dynamics, user rationality, platform choice and block
//! building.
//!
//! Gas prices are in Gwei per gas (competitor prices in 1e-9 native token per
//! gas), exchange rates in USD per whole token. Fee totals that move balances
//! are settled in wei, with the per-gas price rounded to the nearest wei.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::units::{Wei, GWEI_PER_ETH, WEI_PER_GWEI};

/// Lowest base fee: one wei per gas.
pub const MIN_BASE_FEE_GWEI: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasParams {
    /// Block gas cap `G`.
    pub block_gas_limit: u64,
    pub max_change_rate: f64,
    pub initial_base_fee_gwei: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self { block_gas_limit: 30_000_000, max_change_rate: 0.125, initial_base_fee_gwei: 1.0 }
    }
}

impl GasParams {
    pub fn target(&self) -> f64 {
        self.block_gas_limit as f64 / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Ethereum,
    Competitor(usize),
}

impl Platform {
    pub(crate) fn slot(self) -> usize {
        match self {
            Platform::Ethereum => 0,
            Platform::Competitor(i) => i + 1,
        }
    }
}

/// Utility of one transaction on each platform, USD. Index 0 is Ethereum,
/// index `i + 1` competitor `i`. Platforms without an entry reuse the
/// Ethereum value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatformUtilities(pub Arc<[f64]>);

impl PlatformUtilities {
    pub fn uniform(value: f64) -> Self {
        Self(Arc::from(vec![value]))
    }

    pub fn get(&self, platform: Platform) -> f64 {
        self.0.get(platform.slot()).copied().unwrap_or(self.0[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: u64,
    pub user: u64,
    pub gas: u64,
    pub utility_usd: PlatformUtilities,
    pub max_priority_fee_gwei: f64,
}

impl Transaction {
    pub fn priority_wei_per_gas(&self) -> Wei {
        gwei_price_to_wei(self.max_priority_fee_gwei.max(0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatformQuote {
    pub platform: usize,
    pub gas_price: f64,
    pub token_rate_usd: f64,
    pub lock_in_externality_usd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EthereumQuote {
    pub base_fee_gwei: f64,
    pub theta_usd: f64,
}

fn gwei_price_to_wei(gwei: f64) -> Wei {
    (gwei * WEI_PER_GWEI as f64).round() as Wei
}

/// Next block's base fee: the parent's fee moved linearly with the parent's
/// gas deviation from target, by at most `max_change_rate`.
pub fn base_fee_next(prev_fee: f64, prev_gas_used: u64, params: &GasParams) -> f64 {
    let target = params.target();
    let deviation = (prev_gas_used as f64 - target) / target;
    (prev_fee * (1.0 + params.max_change_rate * deviation)).max(MIN_BASE_FEE_GWEI)
}

/// USD cost of `gas` at `price_gwei` per gas and `rate_usd` per token.
pub fn fee_usd(price_gwei: f64, gas: u64, rate_usd: f64) -> f64 {
    price_gwei * gas as f64 * rate_usd / GWEI_PER_ETH as f64
}

pub fn ethereum_net_utility(tx: &Transaction, quote: &EthereumQuote) -> f64 {
    tx.utility_usd.get(Platform::Ethereum)
        - fee_usd(quote.base_fee_gwei + tx.max_priority_fee_gwei, tx.gas, quote.theta_usd)
}

/// Net utility on a competitor before the lock-in term.
pub fn competitor_net_utility(tx: &Transaction, quote: &PlatformQuote) -> f64 {
    tx.utility_usd.get(Platform::Competitor(quote.platform)) - fee_usd(quote.gas_price, tx.gas, quote.token_rate_usd)
}

/// Competitor utility as compared against Ethereum: the lock-in externality
/// counts against leaving.
pub fn competitor_adjusted_utility(tx: &Transaction, quote: &PlatformQuote) -> f64 {
    competitor_net_utility(tx, quote) - quote.lock_in_externality_usd
}

/// Whether submitting `tx` on Ethereum is worth it at `base_fee`.
pub fn tx_rational(tx: &Transaction, base_fee_gwei: f64, theta_usd: f64) -> bool {
    ethereum_net_utility(tx, &EthereumQuote { base_fee_gwei, theta_usd }) >= 0.0
}

/// Ethereum if its net utility is at least every competitor's adjusted
/// utility; otherwise the best competitor (lowest index on ties). `None` when
/// the chosen platform does not leave a non-negative net utility.
pub fn choose_platform(tx: &Transaction, ethereum: &EthereumQuote, quotes: &[PlatformQuote]) -> Option<Platform> {
    let eth = ethereum_net_utility(tx, ethereum);
    let mut best: Option<(f64, &PlatformQuote)> = None;
    for q in quotes {
        let u = competitor_adjusted_utility(tx, q);
        if best.is_none_or(|(b, _)| u > b) {
            best = Some((u, q));
        }
    }
    match best {
        Some((u, q)) if u > eth => (competitor_net_utility(tx, q) >= 0.0).then_some(Platform::Competitor(q.platform)),
        _ => (eth >= 0.0).then_some(Platform::Ethereum),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuiltBlock {
    /// Indices into the mempool, in inclusion order.
    pub included: Vec<usize>,
    pub gas_used: u64,
    pub priority_total: Wei,
    pub burned: Wei,
}

/// Greedy block: highest priority fee first (ties by transaction id), skipping
/// transactions that are irrational at `base_fee_gwei` or do not fit.
pub fn build_block(mempool: &[Transaction], base_fee_gwei: f64, theta_usd: f64, params: &GasParams) -> BuiltBlock {
    let mut order: Vec<usize> = (0..mempool.len()).collect();
    order.sort_by(|&a, &b| {
        mempool[b]
            .max_priority_fee_gwei
            .total_cmp(&mempool[a].max_priority_fee_gwei)
            .then(mempool[a].id.cmp(&mempool[b].id))
    });
    let base_wei = gwei_price_to_wei(base_fee_gwei).max(1);
    let mut block = BuiltBlock::default();
    for i in order {
        let tx = &mempool[i];
        if tx.gas == 0 || block.gas_used + tx.gas > params.block_gas_limit {
            continue;
        }
        if !tx_rational(tx, base_fee_gwei, theta_usd) {
            continue;
        }
        block.gas_used += tx.gas;
        block.priority_total += tx.priority_wei_per_gas() * tx.gas as Wei;
        block.included.push(i);
    }
    block.burned = base_wei * block.gas_used as Wei;
    block
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn tx(id: u64, gas: u64, utility: f64, tip: f64) -> Transaction {
        Transaction { id, user: id, gas, utility_usd: PlatformUtilities::uniform(utility), max_priority_fee_gwei: tip }
    }

    #[test]
    fn base_fee_examples() {
        let p = GasParams::default();
        assert!((base_fee_next(100.0, 30_000_000, &p) - 112.5).abs() < 1e-12);
        assert_eq!(base_fee_next(100.0, 15_000_000, &p), 100.0);
        // Empty-block extreme: 100 * (1 - 0.125).
        let oracle = 100.0 * (1.0 - 0.125 * 1.0);
        assert!((base_fee_next(100.0, 0, &p) - oracle).abs() < 1e-12);
        assert_eq!(oracle, 87.5);
    }

    #[test]
    fn base_fee_floor_is_one_wei() {
        let p = GasParams::default();
        let mut f = 1e-8;
        for _ in 0..100 {
            f = base_fee_next(f, 0, &p);
        }
        assert_eq!(f, MIN_BASE_FEE_GWEI);
    }

    #[test]
    fn rationality_boundary() {
        // 50 Gwei/gas * 1e6 gas = 0.05 ETH = 100 USD at 2000 USD/ETH.
        let t = |u| tx(0, 1_000_000, u, 0.0);
        assert!(tx_rational(&t(100.0), 45.0, 2000.0));
        assert!(tx_rational(&t(100.0), 50.0, 2000.0));
        assert!(!tx_rational(&t(100.0), 55.0, 2000.0));
    }

    fn competitor(price: f64, rate: f64, ec: f64) -> PlatformQuote {
        PlatformQuote { platform: 0, gas_price: price, token_rate_usd: rate, lock_in_externality_usd: ec }
    }

    #[test]
    fn platform_choice_examples() {
        // Ethereum fee 10 USD, competitor fee 8 USD, both on 1e6 gas.
        let t = tx(0, 1_000_000, 50.0, 0.0);
        let eth = EthereumQuote { base_fee_gwei: 5.0, theta_usd: 2000.0 };
        assert_eq!(choose_platform(&t, &eth, &[competitor(8.0, 1000.0, 0.0)]), Some(Platform::Competitor(0)));
        assert_eq!(choose_platform(&t, &eth, &[competitor(8.0, 1000.0, 5.0)]), Some(Platform::Ethereum));
        assert_eq!(choose_platform(&t, &eth, &[competitor(8.0, 1000.0, -3.0)]), Some(Platform::Competitor(0)));
        // Indifference keeps Ethereum.
        assert_eq!(choose_platform(&t, &eth, &[competitor(10.0, 1000.0, 0.0)]), Some(Platform::Ethereum));
        assert_eq!(choose_platform(&t, &eth, &[]), Some(Platform::Ethereum));
    }

    #[test]
    fn platform_choice_requires_rationality() {
        let t = tx(0, 1_000_000, 5.0, 0.0);
        let eth = EthereumQuote { base_fee_gwei: 5.0, theta_usd: 2000.0 };
        assert_eq!(choose_platform(&t, &eth, &[competitor(8.0, 1000.0, 0.0)]), None);
        assert_eq!(choose_platform(&t, &eth, &[]), None);
    }

    #[test]
    fn block_fits_three_ten_million_gas_txs() {
        let pool: Vec<_> = (0..3).map(|i| tx(i, 10_000_000, 1e9, 1.0 + i as f64)).collect();
        let b = build_block(&pool, 1.0, 2000.0, &GasParams::default());
        assert_eq!(b.included.len(), 3);
        assert_eq!(b.gas_used, 30_000_000);
    }

    #[test]
    fn block_takes_top_three_by_tip() {
        let tips = [2.0, 5.0, 1.0, 3.0];
        let pool: Vec<_> = tips.iter().enumerate().map(|(i, &p)| tx(i as u64, 10_000_000, 1e9, p)).collect();
        let b = build_block(&pool, 1.0, 2000.0, &GasParams::default());
        assert_eq!(b.included, vec![1, 3, 0]);
        assert_eq!(b.priority_total, (5 + 3 + 2) as Wei * WEI_PER_GWEI * 10_000_000);
        assert_eq!(b.burned, WEI_PER_GWEI * 30_000_000);
    }

    #[test]
    fn block_skips_irrational_even_with_space() {
        let pool = vec![tx(0, 1_000_000, 100.0, 0.0), tx(1, 1_000_000, 1.0, 0.0)];
        let b = build_block(&pool, 50.0, 2000.0, &GasParams::default());
        assert_eq!(b.included, vec![0]);
    }

    #[test]
    fn consecutive_full_and_empty_blocks() {
        let p = GasParams::default();
        let (mut up, mut down) = (1.0, 1.0);
        for k in 1..=10 {
            up = base_fee_next(up, p.block_gas_limit, &p);
            down = base_fee_next(down, 0, &p);
            assert!(((up - 1.125f64.powi(k)) / 1.125f64.powi(k)).abs() <= 1e-12);
            assert!(((down - 0.875f64.powi(k)) / 0.875f64.powi(k)).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn built_blocks_respect_cap_and_rationality(
            specs in prop::collection::vec((1u64..12_000_000, 0.0f64..500.0, 0.0f64..20.0), 0..40),
            base in 0.1f64..80.0,
        ) {
            let params = GasParams::default();
            let pool: Vec<_> = specs.iter().enumerate().map(|(i, &(g, u, p))| tx(i as u64, g, u, p)).collect();
            let b = build_block(&pool, base, 2000.0, &params);
            prop_assert!(b.gas_used <= params.block_gas_limit);
            prop_assert_eq!(b.gas_used, b.included.iter().map(|&i| pool[i].gas).sum::<u64>());
            for &i in &b.included {
                prop_assert!(tx_rational(&pool[i], base, 2000.0));
            }
            let base_wei = gwei_price_to_wei(base).max(1);
            prop_assert_eq!(b.burned, base_wei * b.gas_used as Wei);
        }

        #[test]
        fn choice_only_depends_on_price_product(c in 0.01f64..100.0, price in 0.1f64..50.0, rate in 1.0f64..5000.0) {
            let t = tx(0, 250_000, 1_000.0, 1.5);
            let eth = EthereumQuote { base_fee_gwei: 7.0, theta_usd: 1800.0 };
            let a = choose_platform(&t, &eth, &[competitor(price, rate, 0.0)]);
            let b = choose_platform(&t, &eth, &[competitor(price * c, rate / c, 0.0)]);
            let margin = (fee_usd(price, t.gas, rate) - fee_usd(8.5, t.gas, 1800.0)).abs();
            // Away from the exact boundary the decisions agree.
            prop_assume!(margin > 1e-9);
            prop_assert_eq!(a, b);
        }
    }
}
