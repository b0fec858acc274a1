//! File emission: metrics CSV, event and summary JSON.
//!
//! Number formats are fixed and locale independent:
//!
//! | column                         | format                              |
//! |--------------------------------|-------------------------------------|
//! | `theta_usd`                    | 6 decimals                          |
//! | `base_fee_gwei_avg`            | 9 decimals                          |
//! | `burned_gwei`, `supply_delta_gwei` | exact, 9 decimals (wei resolution) |
//! | counts, `issued_gwei`          | integers                            |
//! | `justified`, `finalized`       | `true` / `false`                    |
//! | `events`                       | event kinds joined by `;`           |
//!
//! Fractions in `summary.json` carry 6 decimals, USD and ETH amounts 6,
//! Gwei amounts 9.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::scenario::{EventLog, MetricsSeries};
use crate::units::{Epoch, EPOCHS_PER_YEAR, GWEI_PER_ETH};

pub const METRICS_HEADER: [&str; 16] = [
    "epoch",
    "theta_usd",
    "n_active",
    "total_effective_eth",
    "justified",
    "finalized",
    "epochs_since_finality",
    "base_fee_gwei_avg",
    "burned_gwei",
    "issued_gwei",
    "supply_delta_gwei",
    "users_ethereum",
    "users_competitors",
    "exit_queue",
    "activation_queue",
    "events",
];

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVENTS_FILE: &str = "events.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown output format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl OutputError {
    pub fn path(&self) -> &Path {
        match self {
            OutputError::Io { path, .. } | OutputError::Csv { path, .. } | OutputError::Json { path, .. } => path,
        }
    }
}

/// `wei` as a Gwei decimal with all nine fractional digits.
pub fn wei_as_gwei(wei: i128) -> String {
    let sign = if wei < 0 { "-" } else { "" };
    let abs = wei.unsigned_abs();
    format!("{sign}{}.{:09}", abs / 1_000_000_000, abs % 1_000_000_000)
}

fn fixed(v: f64, places: usize) -> String {
    if v == 0.0 {
        return format!("{:.places$}", 0.0);
    }
    format!("{v:.places$}")
}

pub fn metrics_csv(series: &MetricsSeries) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for r in &series.rows {
        w.write_record([
            r.epoch.to_string(),
            fixed(r.theta_usd, 6),
            r.n_active.to_string(),
            r.total_effective_eth.to_string(),
            r.justified.to_string(),
            r.finalized.to_string(),
            r.epochs_since_finality.to_string(),
            fixed(r.base_fee_gwei_avg, 9),
            wei_as_gwei(r.burned_wei as i128),
            r.issued_gwei.to_string(),
            wei_as_gwei(r.supply_delta_wei),
            r.users_ethereum.to_string(),
            r.users_competitors().to_string(),
            r.exit_queue.to_string(),
            r.activation_queue.to_string(),
            r.events.join(";"),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn serialize_fixed<S: Serializer>(v: f64, places: usize, s: S) -> Result<S::Ok, S::Error> {
    if !v.is_finite() {
        return s.serialize_none();
    }
    RawValue::from_string(fixed(v, places)).map_err(S::Error::custom)?.serialize(s)
}

fn fixed6<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    serialize_fixed(*v, 6, s)
}

fn fixed9<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    serialize_fixed(*v, 9, s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackOutcome {
    pub attack: usize,
    pub start_epoch: Epoch,
    /// Whether any epoch from the attack on failed to finalize.
    pub finality_lost: bool,
    pub stalled_epochs: u64,
    pub n_active_before: u64,
    pub n_active_min: u64,
    pub n_active_final: u64,
}

/// Run summary, computed from the metrics rows only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryReport {
    pub epochs: u64,
    #[serde(serialize_with = "fixed6")]
    pub finality_uptime: f64,
    pub first_stall_epoch: Option<Epoch>,
    pub final_n_active: u64,
    #[serde(serialize_with = "fixed6")]
    pub final_theta_usd: f64,
    pub total_issued_gwei: u64,
    #[serde(serialize_with = "fixed9")]
    pub total_burned_gwei: f64,
    #[serde(serialize_with = "fixed9")]
    pub total_supply_change_gwei: f64,
    pub migrated_out: u64,
    pub migrated_in: u64,
    pub final_users_ethereum: u64,
    pub final_users_competitors: u64,
    #[serde(serialize_with = "fixed6")]
    pub apr_realized: f64,
    pub attacks: Vec<AttackOutcome>,
}

impl SummaryReport {
    pub fn from_series(series: &MetricsSeries) -> Self {
        let rows = &series.rows;
        let last = rows.last();
        let finalized = rows.iter().filter(|r| r.finalized).count();
        let stake_gwei: f64 = rows.iter().map(|r| r.effective_processed_eth as f64 * GWEI_PER_ETH as f64).sum();
        let issued: u64 = rows.iter().map(|r| r.issued_gwei).sum();
        let burned_wei: u128 = rows.iter().map(|r| r.burned_wei).sum();
        let delta_wei: i128 = rows.iter().map(|r| r.supply_delta_wei).sum();
        let mut attacks = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for &attack in &r.attacks_triggered {
                let after = &rows[i..];
                let before = if i == 0 { r.n_active } else { rows[i - 1].n_active };
                attacks.push(AttackOutcome {
                    attack,
                    start_epoch: r.epoch,
                    finality_lost: after.iter().any(|r| !r.finalized),
                    stalled_epochs: after.iter().filter(|r| !r.finalized).count() as u64,
                    n_active_before: before,
                    n_active_min: after.iter().map(|r| r.n_active).min().unwrap_or(before),
                    n_active_final: last.map_or(before, |l| l.n_active),
                });
            }
        }
        Self {
            epochs: rows.len() as u64,
            finality_uptime: if rows.is_empty() { 0.0 } else { finalized as f64 / rows.len() as f64 },
            first_stall_epoch: rows.iter().find(|r| r.epoch > 0 && !r.finalized).map(|r| r.epoch),
            final_n_active: last.map_or(0, |r| r.n_active),
            final_theta_usd: last.map_or(0.0, |r| r.theta_usd),
            total_issued_gwei: issued,
            total_burned_gwei: burned_wei as f64 / 1e9,
            total_supply_change_gwei: delta_wei as f64 / 1e9,
            migrated_out: rows.iter().map(|r| r.migrated_out).sum(),
            migrated_in: rows.iter().map(|r| r.migrated_in).sum(),
            final_users_ethereum: last.map_or(0, |r| r.users_ethereum),
            final_users_competitors: last.map_or(0, |r| r.users_competitors()),
            apr_realized: if stake_gwei > 0.0 {
                issued as f64 / stake_gwei * EPOCHS_PER_YEAR as f64
            } else {
                0.0
            },
            attacks,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

fn write(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

/// Writes the requested formats into `dir` (created if missing) and returns
/// the paths written: `metrics.csv` for csv, `events.json` and
/// `summary.json` for json.
pub fn emit(series: &MetricsSeries, log: &EventLog, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        let path = dir.join(METRICS_FILE);
        let text = metrics_csv(series).map_err(|source| OutputError::Csv { path: path.clone(), source })?;
        write(&path, &text)?;
        written.push(path);
    }
    if formats.contains(&Format::Json) {
        let path = dir.join(EVENTS_FILE);
        let text = serde_json::to_string_pretty(log).map_err(|source| OutputError::Json { path: path.clone(), source })?;
        write(&path, &text)?;
        written.push(path);
        let path = dir.join(SUMMARY_FILE);
        write(&path, &SummaryReport::from_series(series).to_json())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{run_scenario, ScenarioConfig};

    fn config(epochs: u64) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{"epochs": {epochs}, "validators": {{"count": 8}}, "price_path": {{"constant": {{"value": 1500}}}},
                "users": {{"count": 10}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn wei_formatting() {
        assert_eq!(wei_as_gwei(0), "0.000000000");
        assert_eq!(wei_as_gwei(1), "0.000000001");
        assert_eq!(wei_as_gwei(-2_500_000_000), "-2.500000000");
        assert_eq!(wei_as_gwei(123_000_000_007), "123.000000007");
    }

    #[test]
    fn header_and_row_count() {
        let (series, _) = run_scenario(&config(7)).unwrap();
        let text = metrics_csv(&series).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[0], METRICS_HEADER.join(","));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for rec in rdr.records() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), 16);
            for field in rec.iter().take(15) {
                assert!(!field.contains(['e', 'E']) || field == "true" || field == "false", "{field}");
            }
        }
    }

    #[test]
    fn empty_log_still_written() {
        let dir = tempfile::tempdir().unwrap();
        let (series, _) = run_scenario(&config(2)).unwrap();
        let files = emit(&series, &EventLog::default(), &[Format::Json, Format::Csv], dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        assert_eq!(fs::read_to_string(dir.path().join(EVENTS_FILE)).unwrap(), "[]");
    }

    #[test]
    fn summary_numbers_are_fixed_decimal() {
        let (series, _) = run_scenario(&config(3)).unwrap();
        let json = SummaryReport::from_series(&series).to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(json.contains("\"finality_uptime\": 0.666667") || json.contains("\"finality_uptime\": 1.000000"), "{json}");
        assert!(v["apr_realized"].as_f64().unwrap() > 0.0);
        assert!(!json.contains("e-"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("CSV".parse::<Format>(), Ok(Format::Csv));
        assert!("xml".parse::<Format>().is_err());
    }

    #[test]
    fn unwritable_dir_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit(&MetricsSeries::default(), &EventLog::default(), &[Format::Csv], &blocker.join("sub")).unwrap_err();
        assert_eq!(err.path(), blocker.join("sub"));
    }
}
