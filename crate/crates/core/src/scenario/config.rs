//! Scenario configuration: strict JSON schema, defaults and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::price::PricePath;
use crate::economics::{AlphaPolicy, EconParams};
use crate::gas_market::GasParams;

/// A bounded scalar distribution.
///
/// JSON: `{"constant": 32}` or `{"uniform": {"min": 1, "max": 5}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Constant(f64),
    Uniform { min: f64, max: f64 },
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant(v) => v,
            Distribution::Uniform { min, max } if max > min => rng.gen_range(min..=max),
            Distribution::Uniform { min, .. } => min,
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            Distribution::Constant(v) => v,
            Distribution::Uniform { min, .. } => min,
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            Distribution::Constant(v) => v,
            Distribution::Uniform { max, .. } => max,
        }
    }

    fn check(&self, field: &str, lo: f64, errors: &mut Vec<FieldError>) {
        let (a, b) = (self.min(), self.max());
        if !a.is_finite() || !b.is_finite() {
            errors.push(FieldError::new(field, "bounds must be finite"));
        } else if a > b {
            errors.push(FieldError::new(field, "min exceeds max"));
        } else if a < lo {
            errors.push(FieldError::new(field, format!("values must be at least {lo}")));
        }
    }
}

/// What a validator does after requesting a voluntary exit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitBehavior {
    /// Stops attesting as soon as the exit is requested.
    #[default]
    OfflineWhileQueued,
    /// Keeps attesting until the churn limit lets it out.
    ValidateUntilExit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorsConfig {
    pub count: u64,
    #[serde(default = "default_deposit")]
    pub deposit_eth: Distribution,
    /// Outside candidates evaluating the stay condition each epoch.
    #[serde(default)]
    pub join_candidates_per_epoch: u64,
    #[serde(default)]
    pub exit_behavior: ExitBehavior,
}

fn default_deposit() -> Distribution {
    Distribution::Constant(32.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersConfig {
    pub count: u64,
    pub utility_usd: Distribution,
    pub gas: Distribution,
    pub priority_fee_gwei: Distribution,
    /// ETH each user holds and sells on leaving Ethereum.
    pub holdings_eth: Distribution,
    pub txs_per_epoch: f64,
    /// Transaction count scales by `rho^-elasticity`.
    pub demand_elasticity: f64,
    /// Probability that a user re-evaluates its platform in a given epoch.
    pub migration_rate: f64,
}

impl Default for UsersConfig {
    fn default() -> Self {
        Self {
            count: 100,
            utility_usd: Distribution::Uniform { min: 1.0, max: 100.0 },
            gas: Distribution::Uniform { min: 21_000.0, max: 500_000.0 },
            priority_fee_gwei: Distribution::Constant(1.0),
            holdings_eth: Distribution::Constant(10.0),
            txs_per_epoch: 4.0,
            demand_elasticity: 0.0,
            migration_rate: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitorConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Gas price in 1e-9 native tokens per gas.
    pub gas_price: PricePath,
    pub token_rate_usd: PricePath,
    #[serde(default)]
    pub lock_in_externality_usd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    OfflineFraction,
    RightsPurchaseOffline,
    DiscouragementHaircut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackEvent {
    pub kind: AttackKind,
    pub start_epoch: u64,
    /// Fraction of validators taken offline, or the reward haircut.
    pub magnitude: f64,
    /// Epochs the attack lasts; absent means until the end of the run.
    #[serde(default)]
    pub duration: Option<u64>,
    /// Fraction of validators hit by a haircut (default all).
    #[serde(default)]
    pub target_fraction: Option<f64>,
}

impl AttackEvent {
    pub fn end_epoch(&self) -> Option<u64> {
        self.duration.map(|d| self.start_epoch + d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub epochs: u64,
    #[serde(default)]
    pub seed: u64,
    pub validators: ValidatorsConfig,
    #[serde(default)]
    pub users: UsersConfig,
    #[serde(default)]
    pub gas_params: GasParams,
    #[serde(default)]
    pub econ_params: EconParams,
    #[serde(default)]
    pub alpha_policy: AlphaPolicy,
    pub price_path: PricePath,
    #[serde(default)]
    pub price_impact_lambda: f64,
    #[serde(default)]
    pub competitors: Vec<CompetitorConfig>,
    #[serde(default = "default_rho")]
    pub layer2_compression_rho: f64,
    #[serde(default)]
    pub attacks: Vec<AttackEvent>,
    #[serde(default = "default_churn")]
    pub churn_limit: u64,
}

fn default_rho() -> f64 {
    1.0
}

fn default_churn() -> u64 {
    4
}

/// Gas compression reported for zk-rollups.
pub const ZK_ROLLUP_RHO: f64 = 0.003;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema violation at {field}: {reason}")]
    Schema { field: String, reason: String },
    #[error("invalid config: {}", join_errors(.0))]
    Invalid(Vec<FieldError>),
}

fn join_errors(errors: &[FieldError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

impl ConfigError {
    /// Names of the offending fields.
    pub fn fields(&self) -> Vec<String> {
        match self {
            ConfigError::Io { .. } => Vec::new(),
            ConfigError::Schema { field, .. } => vec![field.clone()],
            ConfigError::Invalid(errs) => errs.iter().map(|e| e.field.clone()).collect(),
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::Schema { field, reason: e.into_inner().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rebuilds a config from a JSON value, e.g. after a sweep override.
    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::Schema { field, reason: e.into_inner().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut bad = |field: &str, reason: &str| errors.push(FieldError::new(field, reason));
        if self.epochs == 0 {
            bad("epochs", "must be at least 1");
        }
        if self.validators.count == 0 {
            bad("validators.count", "must be at least 1");
        }
        if self.churn_limit == 0 {
            bad("churn_limit", "must be at least 1");
        }
        let g = &self.gas_params;
        if g.block_gas_limit == 0 {
            bad("gas_params.block_gas_limit", "must be positive");
        }
        if !(g.max_change_rate > 0.0 && g.max_change_rate < 1.0) {
            bad("gas_params.max_change_rate", "must lie in (0, 1)");
        }
        if !(g.initial_base_fee_gwei.is_finite() && g.initial_base_fee_gwei > 0.0) {
            bad("gas_params.initial_base_fee_gwei", "must be positive");
        }
        let e = &self.econ_params;
        if !(e.r_coeff.is_finite() && e.r_coeff >= 0.0) {
            bad("econ_params.r_coeff", "must be finite and non-negative");
        }
        if !(e.w_coeff.is_finite() && e.w_coeff >= 0.0) {
            bad("econ_params.w_coeff", "must be finite and non-negative");
        }
        if !(e.p_avg_gwei.is_finite() && e.p_avg_gwei >= 0.0) {
            bad("econ_params.p_avg_gwei", "must be finite and non-negative");
        }
        if !self.alpha_policy.fixed_usd.is_finite() {
            bad("alpha_policy.fixed_usd", "must be finite");
        }
        if !self.alpha_policy.rate_per_epoch.is_finite() {
            bad("alpha_policy.rate_per_epoch", "must be finite");
        }
        if !(0.0..=1.0).contains(&self.price_impact_lambda) {
            bad("price_impact_lambda", "must lie in [0, 1]");
        }
        if !(self.layer2_compression_rho > 0.0 && self.layer2_compression_rho <= 1.0) {
            bad("layer2_compression_rho", "must lie in (0, 1]");
        }
        let u = &self.users;
        if !(u.txs_per_epoch.is_finite() && u.txs_per_epoch >= 0.0) {
            bad("users.txs_per_epoch", "must be finite and non-negative");
        }
        if !(u.demand_elasticity.is_finite() && u.demand_elasticity >= 0.0) {
            bad("users.demand_elasticity", "must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&u.migration_rate) {
            bad("users.migration_rate", "must lie in [0, 1]");
        }
        for (i, a) in self.attacks.iter().enumerate() {
            if !(0.0..=1.0).contains(&a.magnitude) {
                bad(&format!("attacks[{i}].magnitude"), "must lie in [0, 1]");
            }
            if a.target_fraction.is_some_and(|f| !(0.0..=1.0).contains(&f)) {
                bad(&format!("attacks[{i}].target_fraction"), "must lie in [0, 1]");
            }
            if a.start_epoch >= self.epochs {
                bad(&format!("attacks[{i}].start_epoch"), "must fall within the run");
            }
        }
        self.validators.deposit_eth.check("validators.deposit_eth", 1.0, &mut errors);
        u.utility_usd.check("users.utility_usd", 0.0, &mut errors);
        u.gas.check("users.gas", 1.0, &mut errors);
        u.priority_fee_gwei.check("users.priority_fee_gwei", 0.0, &mut errors);
        u.holdings_eth.check("users.holdings_eth", 0.0, &mut errors);
        if self.validators.deposit_eth.max() > 2048.0 {
            errors.push(FieldError::new("validators.deposit_eth", "values must not exceed 2048"));
        }
        self.price_path.check("price_path", &mut errors);
        for (i, c) in self.competitors.iter().enumerate() {
            c.gas_price.check(&format!("competitors[{i}].gas_price"), &mut errors);
            c.token_rate_usd.check(&format!("competitors[{i}].token_rate_usd"), &mut errors);
            if !c.lock_in_externality_usd.is_finite() {
                errors.push(FieldError::new(format!("competitors[{i}].lock_in_externality_usd"), "must be finite"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    ScenarioConfig::from_json(&text)
}
