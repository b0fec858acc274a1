//! Deterministic proof-of-stake simulator with a validator-economics model.
//!
//! The crate is split along the lines of the system it simulates:
//!
//! * [`consensus`] - validator registry, duties, block tree, fork choice and
//!   epoch processing (justification, finalization, rewards, leak, churn).
//! * [`gas_market`] - base-fee dynamics, block building, user rationality and
//!   platform choice.
//! * [`economics`] - closed-form income, stay condition and supply change.
//! * [`scenario`] - configuration, price paths, users, attacks and the epoch
//!   driver that ties everything together.
//! * [`output`] / [`sweep`] - CSV/JSON emission, summaries and parameter sweeps.

pub mod consensus;
pub mod economics;
pub mod gas_market;
pub mod output;
pub mod scenario;
pub mod sweep;
pub mod units;

pub use scenario::{run_scenario, ScenarioConfig, Simulation};
