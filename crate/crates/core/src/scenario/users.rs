//! User population and platform migration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::UsersConfig;
use crate::gas_market::{
    choose_platform, competitor_adjusted_utility, competitor_net_utility, ethereum_net_utility, EthereumQuote,
    Platform, PlatformQuote, PlatformUtilities, Transaction,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: u64,
    pub platform: Platform,
    pub utility_usd: f64,
    /// Gas of one transaction before layer-2 compression.
    pub gas: u64,
    pub priority_fee_gwei: f64,
    pub holdings_eth: f64,
}

impl User {
    /// The user's representative transaction with gas scaled by `rho`.
    pub fn transaction(&self, id: u64, rho: f64) -> Transaction {
        Transaction {
            id,
            user: self.id,
            gas: ((self.gas as f64 * rho).round() as u64).max(1),
            utility_usd: PlatformUtilities::uniform(self.utility_usd),
            max_priority_fee_gwei: self.priority_fee_gwei,
        }
    }
}

pub fn generate_users<R: Rng + ?Sized>(cfg: &UsersConfig, rng: &mut R) -> Vec<User> {
    (0..cfg.count)
        .map(|id| User {
            id,
            platform: Platform::Ethereum,
            utility_usd: cfg.utility_usd.sample(rng),
            gas: cfg.gas.sample(rng).round().max(1.0) as u64,
            priority_fee_gwei: cfg.priority_fee_gwei.sample(rng),
            holdings_eth: cfg.holdings_eth.sample(rng),
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationFlows {
    pub left_ethereum: u64,
    pub returned_to_ethereum: u64,
    pub between_competitors: u64,
    /// ETH sold by users leaving Ethereum.
    pub eth_sold: f64,
}

impl MigrationFlows {
    pub fn is_empty(&self) -> bool {
        self.left_ethereum == 0 && self.returned_to_ethereum == 0 && self.between_competitors == 0
    }

    pub fn net_outflow(&self) -> i64 {
        self.left_ethereum as i64 - self.returned_to_ethereum as i64
    }
}

fn score(tx: &Transaction, platform: Platform, eth: &EthereumQuote, quotes: &[PlatformQuote]) -> Option<(f64, f64)> {
    match platform {
        Platform::Ethereum => {
            let u = ethereum_net_utility(tx, eth);
            Some((u, u))
        }
        Platform::Competitor(l) => {
            let q = quotes.iter().find(|q| q.platform == l)?;
            Some((competitor_adjusted_utility(tx, q), competitor_net_utility(tx, q)))
        }
    }
}

/// Where a user on `current` moves to. Ethereum users follow the platform
/// choice rule directly; others switch only to a strictly better platform on
/// which their transaction is still rational.
pub fn preferred_platform(
    current: Platform,
    tx: &Transaction,
    eth: &EthereumQuote,
    quotes: &[PlatformQuote],
) -> Platform {
    if current == Platform::Ethereum {
        return match choose_platform(tx, eth, quotes) {
            Some(p) => p,
            None => current,
        };
    }
    let mut best = current;
    let mut best_score = score(tx, current, eth, quotes).map_or(f64::NEG_INFINITY, |s| s.0);
    let candidates = std::iter::once(Platform::Ethereum).chain(quotes.iter().map(|q| Platform::Competitor(q.platform)));
    for p in candidates {
        let Some((s, net)) = score(tx, p, eth, quotes) else { continue };
        if s > best_score && net >= 0.0 {
            best = p;
            best_score = s;
        }
    }
    best
}

/// One round of platform choice. `reevaluates` decides which users look at
/// the quotes this round. Users leaving Ethereum sell their ETH.
pub fn migrate_users(
    users: &mut [User],
    eth: &EthereumQuote,
    quotes: &[PlatformQuote],
    rho: f64,
    mut reevaluates: impl FnMut(&User) -> bool,
) -> MigrationFlows {
    let mut flows = MigrationFlows::default();
    if quotes.is_empty() && users.iter().all(|u| u.platform == Platform::Ethereum) {
        return flows;
    }
    for user in users.iter_mut() {
        if !reevaluates(user) {
            continue;
        }
        let tx = user.transaction(0, rho);
        let next = preferred_platform(user.platform, &tx, eth, quotes);
        match (user.platform, next) {
            (a, b) if a == b => {}
            (Platform::Ethereum, _) => {
                flows.left_ethereum += 1;
                flows.eth_sold += user.holdings_eth;
                user.holdings_eth = 0.0;
            }
            (_, Platform::Ethereum) => flows.returned_to_ethereum += 1,
            _ => flows.between_competitors += 1,
        }
        user.platform = next;
    }
    flows
}
