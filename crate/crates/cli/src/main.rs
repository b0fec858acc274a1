use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use stakesim_core::output::Format;
use stakesim_core::sweep::{execute, RunError, RunRequest, SweepSpec};
use tracing_subscriber::EnvFilter;

/// Deterministic proof-of-stake and validator-economics simulator.
#[derive(Parser, Debug)]
#[command(name = "stakesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<u64>,
    },
    /// Run one scenario per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config path, or `theta` for the starting price.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "stakesim-out")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    format: Vec<Format>,
}

fn sweep_value(raw: &str) -> Value {
    serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()))
}

fn request(cli: Cli) -> RunRequest {
    match cli.command {
        Command::Run { common, seed, epochs } => RunRequest {
            config_path: common.config,
            seed,
            epochs,
            out_dir: common.out,
            formats: common.format,
            sweep: None,
        },
        Command::Sweep { common, param, values } => RunRequest {
            config_path: common.config,
            seed: None,
            epochs: None,
            out_dir: common.out,
            formats: common.format,
            sweep: Some(SweepSpec { param, values: values.iter().map(|v| sweep_value(v)).collect() }),
        },
    }
}

fn report_error(err: &RunError) -> ExitCode {
    let fields = match err {
        RunError::Config(c) => c.fields(),
        _ => Vec::new(),
    };
    let body = json!({ "error": err.category(), "message": err.to_string(), "fields": fields });
    eprintln!("{body}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let filter = EnvFilter::try_from_env("STAKESIM_LOG").unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let body = json!({ "error": "usage", "message": e.to_string().trim(), "fields": [] });
            eprintln!("{body}");
            return ExitCode::from(2);
        }
    };
    let req = request(cli);
    match execute(&req) {
        Ok(summaries) => {
            let out = json!({ "out": req.out_dir.display().to_string(), "runs": summaries.len() });
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e),
    }
}
