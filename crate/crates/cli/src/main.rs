//! `powervar`: run active-learning experiments, build report data, check configs.

mod config;
mod report;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use powervar::Strategy;

use config::{apply_overrides, parse_seeds, parse_strategies, read_config, resolve, Overrides};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Invalid(Vec<String>),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Invalid(ms) => {
                write!(f, "config error:")?;
                for m in ms {
                    write!(f, "\n  - {m}")?;
                }
                Ok(())
            }
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "powervar",
    version,
    about = "Active learning for difficulty regression with PowerVariance acquisition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the strategy x seed grid and baselines, writing results.
    Run(GridArgs),
    /// Build figure-data CSVs (and optional SVG charts) from a results directory.
    Report {
        /// Results directory written by `run`.
        results: PathBuf,
        /// Where to write the report files (default: <results>/report).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render SVG line charts.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Check a config and print it fully resolved.
    Validate(GridArgs),
}

#[derive(Args)]
struct GridArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides POWERVAR_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated run seeds.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Comma-separated strategies: uniform, topk_variance, powervariance.
    #[arg(long, value_parser = parse_strategies)]
    strategies: Option<Strategies>,
    #[arg(long)]
    quiet: bool,
}

type Seeds = Vec<u64>;
type Strategies = Vec<Strategy>;

impl GridArgs {
    fn load(&self) -> Result<config::Resolved, CliError> {
        let mut cfg = read_config(&self.config)?;
        let overrides = Overrides {
            out: self.out.clone(),
            seeds: self.seeds.clone(),
            strategies: self.strategies.clone(),
        };
        apply_overrides(&mut cfg, &overrides)?;
        resolve(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let resolved = args.load()?;
            let dir = run::execute(&resolved, args.quiet)?;
            if !args.quiet {
                eprintln!("results written to {}", dir.display());
            }
        }
        Command::Report {
            results,
            out,
            svg,
            quiet,
        } => {
            let summary = report::execute(&results, out.as_deref(), svg)?;
            for g in &summary.gaps {
                eprintln!("warning: gap: {g}");
            }
            if !quiet {
                eprintln!("report written to {}", summary.dir.display());
            }
        }
        Command::Validate(args) => {
            let resolved = args.load()?;
            let lc = &resolved.config.loop_config;
            if !args.quiet {
                eprintln!(
                    "ok: {} train / {} val / {} test examples, dim {}, {} rounds of {} from {} to {} labels, seeds {:?}",
                    resolved.dataset.train.len(),
                    resolved.dataset.val.len(),
                    resolved.dataset.test.len(),
                    resolved.dataset.dim(),
                    lc.rounds(),
                    lc.acquisition.batch_k,
                    lc.initial_labeled,
                    lc.final_labeled,
                    resolved.seeds()
                );
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&resolved.config).expect("config serialises")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Bad flags are config errors; help and version are not errors.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
