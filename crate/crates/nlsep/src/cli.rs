//! Command-line front end: `nlsep run <config> [--out DIR] [--list-experiments] [--validate-only]`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, warn};

use crate::config::{parse_config, RunConfig};
use crate::harness::run_all;
use crate::report::write_series;

#[derive(Debug, Parser)]
#[command(
    name = "nlsep",
    version,
    about = "Separability experiments for nonlinear quantum dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and run every experiment of a configuration file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    pub config: PathBuf,
    /// Output directory, overriding `output_dir` from the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the configured experiments and exit.
    #[arg(long)]
    pub list_experiments: bool,
    /// Validate the configuration and exit.
    #[arg(long)]
    pub validate_only: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Passed,
    /// Names of the failed verdicts.
    Failed(Vec<String>),
    Error(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub experiments: Vec<(String, Status)>,
    pub files: Vec<PathBuf>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.experiments.iter().all(|(_, s)| *s == Status::Passed)
    }
}

/// Runs all experiments and writes `<stem>.report.json` and `<stem>.series.csv`
/// for each one that completes.
pub fn execute(cfg: &RunConfig, out_dir: &Path) -> std::io::Result<Summary> {
    fs::create_dir_all(out_dir)?;
    let results = run_all(&cfg.experiments, &cfg.context());
    let mut summary = Summary::default();
    for (spec, result) in cfg.experiments.iter().zip(results) {
        let report = match result {
            Ok(r) => r,
            Err(e) => {
                error!("experiment `{}` aborted: {e}", spec.name);
                summary
                    .experiments
                    .push((spec.name.clone(), Status::Error(e.to_string())));
                continue;
            }
        };
        let json = out_dir.join(format!("{}.report.json", spec.stem()));
        serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), &report)?;
        let csv = out_dir.join(format!("{}.series.csv", spec.stem()));
        let all: Vec<_> = report
            .series
            .iter()
            .chain(&report.monitors)
            .cloned()
            .collect();
        write_series(BufWriter::new(File::create(&csv)?), &all)?;
        summary.files.extend([json, csv]);
        let status = if report.passed {
            Status::Passed
        } else {
            Status::Failed(report.failed().map(|v| v.name.clone()).collect())
        };
        summary.experiments.push((spec.name.clone(), status));
    }
    Ok(summary)
}

fn init_logging(cfg: &RunConfig) {
    let _ = env_logger::Builder::new()
        .filter_level(cfg.verbosity.level())
        .format_timestamp(None)
        .try_init();
}

pub fn run(args: &RunArgs) -> ExitCode {
    let cfg = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    init_logging(&cfg);
    if args.list_experiments {
        for e in &cfg.experiments {
            println!("{}\t{}", e.name, e.kind.as_str());
        }
        return ExitCode::SUCCESS;
    }
    if args.validate_only {
        println!(
            "{}: {} experiment(s) valid",
            args.config.display(),
            cfg.experiments.len()
        );
        return ExitCode::SUCCESS;
    }
    if cfg.experiments.is_empty() {
        warn!("{} configures no experiments", args.config.display());
        return ExitCode::SUCCESS;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let summary = match execute(&cfg, &out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: writing to {}: {e}", out.display());
            return ExitCode::from(2);
        }
    };
    for (name, status) in &summary.experiments {
        match status {
            Status::Passed => println!("PASS {name}"),
            Status::Failed(v) => println!("FAIL {name}: {}", v.join(", ")),
            Status::Error(e) => println!("FAIL {name}: {e}"),
        }
    }
    if summary.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

pub fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(&args),
    }
}
