//! Scenario driver: configuration, price paths, users, attacks and the epoch
//! loop.

pub mod attacks;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod price;
pub mod users;

pub use attacks::{end_attack, inject_attack, AppliedAttack};
pub use config::{
    parse_config, AttackEvent, AttackKind, CompetitorConfig, ConfigError, Distribution, ExitBehavior, FieldError,
    ScenarioConfig, UsersConfig, ValidatorsConfig, ZK_ROLLUP_RHO,
};
pub use engine::{run_scenario, Simulation};
pub use metrics::{EventLog, EventRecord, MetricsRow, MetricsSeries, SimEvent};
pub use price::{update_price, PricePath};
pub use users::{generate_users, migrate_users, preferred_platform, MigrationFlows, User};

use crate::consensus::ConsensusError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("consensus failure: {0}")]
    Consensus(#[from] ConsensusError),
}
