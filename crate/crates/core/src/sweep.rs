//! Single runs and parameter sweeps driven from a [`RunRequest`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;
use tracing::info;

use crate::output::{emit, Format, OutputError, SummaryReport};
use crate::scenario::{parse_config, run_scenario, ConfigError, ScenarioConfig, SimError};

/// Sweep parameter name that sets the starting ETH/USD price.
pub const THETA_ALIAS: &str = "theta";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Dotted path into the config (`users.count`, `attacks.0.magnitude`) or `theta`.
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRequest {
    pub config_path: PathBuf,
    pub seed: Option<u64>,
    pub epochs: Option<u64>,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => RunError::Config(c),
            other => RunError::Sim(other),
        }
    }
}

impl RunError {
    /// Machine-readable error class.
    pub fn category(&self) -> &'static str {
        match self {
            RunError::Config(ConfigError::Io { .. }) | RunError::Output(_) => "io",
            RunError::Config(_) => "config",
            RunError::Sim(_) => "simulation",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            _ => 4,
        }
    }
}

fn schema_error(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Schema { field: field.to_string(), reason: reason.into() }
}

/// Returns `config` with `param` set to `value`. The parameter must already
/// exist in the (defaulted) config.
pub fn apply_override(config: &ScenarioConfig, param: &str, value: &Value) -> Result<ScenarioConfig, ConfigError> {
    if value.as_f64().is_some_and(|v| !v.is_finite()) {
        return Err(schema_error(param, "sweep values must be finite"));
    }
    if param == THETA_ALIAS {
        let theta = value.as_f64().ok_or_else(|| schema_error(param, "expected a number"))?;
        let mut cfg = config.clone();
        cfg.price_path.set_initial(theta);
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut doc = serde_json::to_value(config).expect("config serializes");
    let mut node = &mut doc;
    for part in param.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| schema_error(param, "not a configuration parameter"))?;
    }
    *node = value.clone();
    ScenarioConfig::from_value(doc)
}

/// Runs one config and writes its files into `dir`.
pub fn run_one(config: &ScenarioConfig, formats: &[Format], dir: &Path) -> Result<SummaryReport, RunError> {
    let (series, log) = run_scenario(config)?;
    emit(&series, &log, formats, dir)?;
    Ok(SummaryReport::from_series(&series))
}

pub fn run_dir_name(index: usize) -> String {
    format!("run_{index:03}")
}

/// Runs every sweep value in parallel, run `i` with seed `base.seed + i`
/// into `out/run_{i:03}`, then writes `out/aggregate.csv`.
pub fn sweep(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    formats: &[Format],
    out: &Path,
) -> Result<Vec<SummaryReport>, RunError> {
    let configs = spec
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut cfg = apply_override(base, &spec.param, v)?;
            cfg.seed = base.seed.wrapping_add(i as u64);
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let summaries = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            info!(run = i, seed = cfg.seed, "sweep run");
            run_one(cfg, formats, &out.join(run_dir_name(i)))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    write_aggregate(out, spec, &configs, &summaries)?;
    Ok(summaries)
}

pub const AGGREGATE_HEADER: [&str; 13] = [
    "run",
    "param",
    "value",
    "seed",
    "epochs",
    "finality_uptime",
    "first_stall_epoch",
    "final_n_active",
    "final_theta_usd",
    "total_supply_change_gwei",
    "migrated_out",
    "migrated_in",
    "apr_realized",
];

fn write_aggregate(
    out: &Path,
    spec: &SweepSpec,
    configs: &[ScenarioConfig],
    summaries: &[SummaryReport],
) -> Result<(), OutputError> {
    let path = out.join(AGGREGATE_FILE);
    let csv_err = |source| OutputError::Csv { path: path.clone(), source };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for (i, ((cfg, s), v)) in configs.iter().zip(summaries).zip(&spec.values).enumerate() {
        w.write_record([
            run_dir_name(i),
            spec.param.clone(),
            v.to_string(),
            cfg.seed.to_string(),
            s.epochs.to_string(),
            format!("{:.6}", s.finality_uptime),
            s.first_stall_epoch.map(|e| e.to_string()).unwrap_or_default(),
            s.final_n_active.to_string(),
            format!("{:.6}", s.final_theta_usd),
            format!("{:.9}", s.total_supply_change_gwei),
            s.migrated_out.to_string(),
            s.migrated_in.to_string(),
            format!("{:.6}", s.apr_realized),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.clone(), source })
}

/// Loads the config, applies overrides and performs the run or sweep.
/// Returns the summaries in run order.
pub fn execute(req: &RunRequest) -> Result<Vec<SummaryReport>, RunError> {
    let mut config = parse_config(&req.config_path)?;
    if let Some(seed) = req.seed {
        config.seed = seed;
    }
    if let Some(epochs) = req.epochs {
        config.epochs = epochs;
        config.validate()?;
    }
    if req.formats.is_empty() {
        return Err(schema_error("format", "at least one output format is required").into());
    }
    match &req.sweep {
        Some(spec) => {
            if spec.values.is_empty() {
                return Err(schema_error("values", "at least one sweep value is required").into());
            }
            sweep(&config, spec, &req.formats, &req.out_dir)
        }
        None => Ok(vec![run_one(&config, &req.formats, &req.out_dir)?]),
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig::from_json(
            r#"{"epochs": 3, "seed": 40, "validators": {"count": 8}, "price_path": {"constant": {"value": 1000}},
                "users": {"count": 5}, "attacks": [{"kind": "offline_fraction", "start_epoch": 1, "magnitude": 0.1}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn overrides() {
        let b = base();
        assert_eq!(apply_override(&b, "theta", &json!(500)).unwrap().price_path.initial(), 500.0);
        assert_eq!(apply_override(&b, "churn_limit", &json!(9)).unwrap().churn_limit, 9);
        assert_eq!(apply_override(&b, "users.count", &json!(2)).unwrap().users.count, 2);
        assert_eq!(apply_override(&b, "attacks.0.magnitude", &json!(0.5)).unwrap().attacks[0].magnitude, 0.5);
        assert_eq!(apply_override(&b, "gas_params.max_change_rate", &json!(0.2)).unwrap().gas_params.max_change_rate, 0.2);
        assert!(apply_override(&b, "fee_rebate", &json!(1)).is_err());
        assert!(apply_override(&b, "attacks.3.magnitude", &json!(1)).is_err());
        let err = apply_override(&b, "churn_limit", &json!(-1)).unwrap_err();
        assert_eq!(err.fields(), vec!["churn_limit".to_string()]);
    }

    #[test]
    fn theta_sweep_layout() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec { param: "theta".into(), values: vec![json!(500), json!(1000), json!(2000)] };
        let s = sweep(&base(), &spec, &[Format::Csv, Format::Json], dir.path()).unwrap();
        assert_eq!(s.len(), 3);
        for i in 0..3 {
            assert!(dir.path().join(run_dir_name(i)).join("metrics.csv").exists());
        }
        let agg = std::fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap();
        assert_eq!(agg.lines().count(), 4);
        assert!(agg.lines().nth(2).unwrap().starts_with("run_001,theta,1000,41,"));
    }

    #[test]
    fn single_value_sweep_equals_single_run() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec { param: "churn_limit".into(), values: vec![json!(4)] };
        sweep(&base(), &spec, &[Format::Csv, Format::Json], dir.path()).unwrap();
        let single = dir.path().join("single");
        run_one(&base(), &[Format::Csv, Format::Json], &single).unwrap();
        for f in ["metrics.csv", "events.json", "summary.json"] {
            let a = std::fs::read(dir.path().join("run_000").join(f)).unwrap();
            let b = std::fs::read(single.join(f)).unwrap();
            assert_eq!(a, b, "{f}");
        }
    }

    #[test]
    fn categories() {
        let cfg_err = RunError::Config(schema_error("x", "y"));
        assert_eq!((cfg_err.category(), cfg_err.exit_code()), ("config", 2));
        let io = RunError::Config(ConfigError::Io { path: "p".into(), source: std::io::Error::other("x") });
        assert_eq!((io.category(), io.exit_code()), ("io", 3));
        let sim = RunError::Sim(SimError::Consensus(crate::consensus::ConsensusError::RegistryEmpty));
        assert_eq!((sim.category(), sim.exit_code()), ("simulation", 4));
    }
}
