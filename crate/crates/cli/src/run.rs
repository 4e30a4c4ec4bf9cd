//! `powervar run`: the strategy x seed grid plus baselines.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use powervar::experiment::{
    aggregate_csv_rows, aggregate_runs, curve_csv, run_al, run_baseline, write_acquisitions_jsonl,
    AGGREGATE_HEADER,
};
use powervar::{Baseline, LearningCurve, MetricsRow, Strategy};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Resolved};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "config.json";
pub const FAILED: &str = "FAILED";
pub const AGGREGATE: &str = "aggregate.csv";
pub const BASELINES: &str = "baselines.csv";
pub const BASELINE_HEADER: &str =
    "baseline,run_seed,labeled_size,discrete_rmse,rmse_l0,rmse_l1,rmse_l2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub status: Status,
    pub started_unix_s: f64,
    pub finished_unix_s: Option<f64>,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

pub fn run_file(strategy: Strategy, seed: u64) -> PathBuf {
    Path::new("runs").join(format!("{strategy}_seed{seed}.csv"))
}

pub fn acquisition_file(strategy: Strategy, seed: u64) -> PathBuf {
    Path::new("acquisitions").join(format!("{strategy}_seed{seed}.jsonl"))
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(manifest).map_err(|e| io_err(&path, e))?;
    write(&path, text + "\n")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn baseline_line(which: Baseline, seed: u64, row: &MetricsRow) -> String {
    format!(
        "{},{seed},{},{},{},{},{}\n",
        which.name(),
        row.labeled_size,
        row.discrete_rmse,
        opt(row.per_level_rmse[0]),
        opt(row.per_level_rmse[1]),
        opt(row.per_level_rmse[2])
    )
}

pub fn execute(resolved: &Resolved, quiet: bool) -> Result<PathBuf, CliError> {
    let cfg = &resolved.config;
    let dir = cfg.output_dir.clone();
    for sub in ["runs", "acquisitions"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }
    let _ = fs::remove_file(dir.join(FAILED));

    let seeds = resolved.seeds().to_vec();
    let mut artifacts = vec![PathBuf::from(RESOLVED_CONFIG)];
    for &s in &cfg.strategies {
        for &seed in &seeds {
            artifacts.push(run_file(s, seed));
            artifacts.push(acquisition_file(s, seed));
        }
    }
    artifacts.push(AGGREGATE.into());
    if !cfg.baselines.is_empty() {
        artifacts.push(BASELINES.into());
    }
    let mut manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: Status::Running,
        started_unix_s: now(),
        finished_unix_s: None,
        seeds: seeds.clone(),
        artifacts,
        config: cfg.clone(),
    };
    let resolved_text = serde_json::to_string_pretty(cfg).expect("config serialises") + "\n";
    write(&dir.join(RESOLVED_CONFIG), resolved_text)?;
    write_manifest(&dir, &manifest)?;

    let outcome = run_grid(resolved, &dir, &seeds, quiet);
    manifest.finished_unix_s = Some(now());
    match outcome {
        Ok(()) => {
            manifest.status = Status::Complete;
            write_manifest(&dir, &manifest)?;
            Ok(dir)
        }
        Err(e) => {
            manifest.status = Status::Failed;
            let _ = write_manifest(&dir, &manifest);
            let _ = fs::write(dir.join(FAILED), format!("{e}\n"));
            Err(e)
        }
    }
}

fn run_grid(resolved: &Resolved, dir: &Path, seeds: &[u64], quiet: bool) -> Result<(), CliError> {
    let cfg = &resolved.config;
    let ds = &resolved.dataset;
    let mut aggregate = String::from(AGGREGATE_HEADER);
    aggregate.push('\n');
    for &strategy in &cfg.strategies {
        let mut lc = cfg.loop_config.clone();
        lc.acquisition.strategy = strategy;
        let mut curves: Vec<LearningCurve> = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let t = Instant::now();
            let out = run_al(ds, &lc, seed)
                .map_err(|e| CliError::Runtime(format!("{strategy} seed {seed}: {e}")))?;
            write(&dir.join(run_file(strategy, seed)), curve_csv(&out.curve))?;
            let path = dir.join(acquisition_file(strategy, seed));
            let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            write_acquisitions_jsonl(&out.acquisitions, std::io::BufWriter::new(file))
                .map_err(|e| io_err(&path, e))?;
            if !quiet {
                eprintln!(
                    "{strategy} seed {seed}: final discrete RMSE {:.4} ({:.1}s)",
                    out.curve.final_rmse().unwrap_or(f64::NAN),
                    t.elapsed().as_secs_f64()
                );
            }
            curves.push(out.curve);
        }
        let agg =
            aggregate_runs(&curves).map_err(|e| CliError::Runtime(format!("{strategy}: {e}")))?;
        aggregate.push_str(&aggregate_csv_rows(strategy, &agg));
    }
    write(&dir.join(AGGREGATE), aggregate)?;

    if !cfg.baselines.is_empty() {
        let mut text = String::from(BASELINE_HEADER);
        text.push('\n');
        for &which in &cfg.baselines {
            for &seed in seeds {
                let row = run_baseline(ds, which, &cfg.loop_config, seed).map_err(|e| {
                    CliError::Runtime(format!("{} baseline seed {seed}: {e}", which.name()))
                })?;
                if !quiet {
                    eprintln!(
                        "{} baseline seed {seed}: discrete RMSE {:.4}",
                        which.name(),
                        row.discrete_rmse
                    );
                }
                text.push_str(&baseline_line(which, seed, &row));
            }
        }
        write(&dir.join(BASELINES), text)?;
    }
    Ok(())
}
