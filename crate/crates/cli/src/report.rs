//! `powervar report`: tidy figure-data CSVs computed only from the per-run
//! CSVs of a results directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use powervar::experiment::{aggregate_runs, parse_curve_csv, AggregateCurve, Stat};
use powervar::level::NUM_LEVELS;
use powervar::{LearningCurve, MetricsRow, Strategy};

use crate::run::{run_file, RunManifest, MANIFEST};
use crate::svg::{self, Series};
use crate::CliError;

pub const CURVES: &str = "learning_curves.csv";
pub const GAIN: &str = "active_gain.csv";
pub const LEVELS: &str = "level_distribution.csv";
pub const PER_LEVEL: &str = "per_level_rmse.csv";
pub const GAPS: &str = "gaps.csv";

struct Loaded {
    strategy: Strategy,
    runs: Vec<LearningCurve>,
    aggregate: Option<AggregateCurve>,
}

pub struct Summary {
    pub dir: PathBuf,
    pub gaps: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stat_cols(s: Option<Stat>) -> String {
    match s {
        Some(s) => format!("{},{}", s.mean, opt(s.se)),
        None => ",".into(),
    }
}

fn run_prefix(
    kind: &str,
    strategy: Strategy,
    seed: Option<u64>,
    runs: usize,
    row_round: usize,
    size: usize,
) -> String {
    let seed = seed.map(|s| s.to_string()).unwrap_or_default();
    format!("{kind},{strategy},{seed},{runs},{row_round},{size}")
}

const PREFIX: &str = "group,strategy,run_seed,runs,round,labeled_size";

pub fn execute(results: &Path, out: Option<&Path>, with_svg: bool) -> Result<Summary, CliError> {
    let manifest_path = results.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    let out = out.map_or_else(|| results.join("report"), Path::to_path_buf);
    fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;

    let mut gaps = Vec::new();
    let mut loaded = Vec::new();
    for &strategy in &manifest.config.strategies {
        let mut runs = Vec::new();
        for &seed in &manifest.seeds {
            let path = results.join(run_file(strategy, seed));
            match fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_curve_csv(&t).map_err(|e| e.to_string()))
            {
                Ok(rows) => runs.push(LearningCurve {
                    strategy,
                    run_seed: seed,
                    rows,
                    predictions: vec![],
                }),
                Err(e) => gaps.push(format!("{strategy},{seed},{}", e.replace(',', ";"))),
            }
        }
        let aggregate = match aggregate_runs(&runs) {
            Ok(a) => Some(a),
            Err(e) => {
                gaps.push(format!(
                    "{strategy},,no aggregate: {}",
                    e.to_string().replace(',', ";")
                ));
                None
            }
        };
        loaded.push(Loaded {
            strategy,
            runs,
            aggregate,
        });
    }

    let gains = active_gains(&loaded, &mut gaps);
    let write = |name: &str, body: String| -> Result<(), CliError> {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    };
    write(CURVES, curves_csv(&loaded))?;
    write(GAIN, gains_csv(&gains))?;
    write(LEVELS, levels_csv(&loaded))?;
    write(PER_LEVEL, per_level_csv(&loaded))?;
    let mut gap_text = String::from("strategy,run_seed,problem\n");
    for g in &gaps {
        let _ = writeln!(gap_text, "{g}");
    }
    write(GAPS, gap_text)?;

    if with_svg {
        let curves: Vec<Series> = loaded
            .iter()
            .filter_map(|l| {
                let agg = l.aggregate.as_ref()?;
                Some(Series {
                    name: l.strategy.to_string(),
                    points: agg
                        .rows
                        .iter()
                        .map(|r| (r.labeled_size as f64, r.discrete_rmse.mean))
                        .collect(),
                })
            })
            .collect();
        write(
            "learning_curves.svg",
            svg::line_chart("Discrete RMSE", "labeled examples", &curves),
        )?;
        let gain_series: Vec<Series> = gains
            .iter()
            .map(|g| Series {
                name: g.strategy.to_string(),
                points: g
                    .aggregate
                    .iter()
                    .map(|(size, s)| (*size as f64, s.mean))
                    .collect(),
            })
            .collect();
        write(
            "active_gain.svg",
            svg::line_chart("Active gain over uniform", "labeled examples", &gain_series),
        )?;
    }
    Ok(Summary { dir: out, gaps })
}

fn curves_csv(loaded: &[Loaded]) -> String {
    let mut s = format!("{PREFIX},discrete_rmse,discrete_rmse_se\n");
    for l in loaded {
        for run in &l.runs {
            for r in &run.rows {
                let p = run_prefix(
                    "run",
                    l.strategy,
                    Some(run.run_seed),
                    1,
                    r.round,
                    r.labeled_size,
                );
                let _ = writeln!(s, "{p},{},", r.discrete_rmse);
            }
        }
        if let Some(agg) = &l.aggregate {
            for r in &agg.rows {
                let p = run_prefix(
                    "aggregate",
                    l.strategy,
                    None,
                    r.runs,
                    r.round,
                    r.labeled_size,
                );
                let _ = writeln!(s, "{p},{}", stat_cols(Some(r.discrete_rmse)));
            }
        }
    }
    s
}

fn levels_csv(loaded: &[Loaded]) -> String {
    let mut s = format!("{PREFIX},dist_l0,dist_l1,dist_l2\n");
    for l in loaded {
        for run in &l.runs {
            for r in &run.rows {
                let p = run_prefix(
                    "run",
                    l.strategy,
                    Some(run.run_seed),
                    1,
                    r.round,
                    r.labeled_size,
                );
                let d = r.labeled_level_dist;
                let _ = writeln!(s, "{p},{},{},{}", d[0], d[1], d[2]);
            }
        }
        if let Some(agg) = &l.aggregate {
            for r in &agg.rows {
                let p = run_prefix(
                    "aggregate",
                    l.strategy,
                    None,
                    r.runs,
                    r.round,
                    r.labeled_size,
                );
                let d = r.labeled_level_dist.map(|x| x.mean);
                let _ = writeln!(s, "{p},{},{},{}", d[0], d[1], d[2]);
            }
        }
    }
    s
}

fn per_level_csv(loaded: &[Loaded]) -> String {
    let mut s = format!("{PREFIX},level,rmse,rmse_se\n");
    for l in loaded {
        for run in &l.runs {
            for r in &run.rows {
                let p = run_prefix(
                    "run",
                    l.strategy,
                    Some(run.run_seed),
                    1,
                    r.round,
                    r.labeled_size,
                );
                for k in 0..NUM_LEVELS {
                    let _ = writeln!(s, "{p},{k},{},", opt(r.per_level_rmse[k]));
                }
            }
        }
        if let Some(agg) = &l.aggregate {
            for r in &agg.rows {
                let p = run_prefix(
                    "aggregate",
                    l.strategy,
                    None,
                    r.runs,
                    r.round,
                    r.labeled_size,
                );
                for k in 0..NUM_LEVELS {
                    let _ = writeln!(s, "{p},{k},{}", stat_cols(r.per_level_rmse[k]));
                }
            }
        }
    }
    s
}

/// (round, labeled size, gain)
type GainRow = (usize, usize, f64);

struct Gains {
    strategy: Strategy,
    runs: Vec<(u64, Vec<GainRow>)>,
    aggregate: Vec<(usize, Stat)>,
    rounds: Vec<usize>,
}

fn gain_rows(run: &[MetricsRow], uniform: &[MetricsRow]) -> Option<Vec<GainRow>> {
    if run.len() != uniform.len()
        || run
            .iter()
            .zip(uniform)
            .any(|(a, b)| a.labeled_size != b.labeled_size)
    {
        return None;
    }
    Some(
        run.iter()
            .zip(uniform)
            .map(|(a, b)| (a.round, a.labeled_size, b.discrete_rmse - a.discrete_rmse))
            .collect(),
    )
}

/// Per-seed gains paired with the uniform run of the same seed.
fn active_gains(loaded: &[Loaded], gaps: &mut Vec<String>) -> Vec<Gains> {
    let Some(uniform) = loaded.iter().find(|l| l.strategy == Strategy::Uniform) else {
        gaps.push(",,no uniform runs; active gain unavailable".into());
        return Vec::new();
    };
    let mut out = Vec::new();
    for l in loaded {
        let mut runs = Vec::new();
        for run in &l.runs {
            let paired = uniform.runs.iter().find(|u| u.run_seed == run.run_seed);
            match paired.and_then(|u| gain_rows(&run.rows, &u.rows)) {
                Some(rows) => runs.push((run.run_seed, rows)),
                None => gaps.push(format!(
                    "{},{},no matching uniform run for active gain",
                    l.strategy, run.run_seed
                )),
            }
        }
        let n_rows = runs.first().map_or(0, |(_, r)| r.len());
        let aligned = runs.iter().all(|(_, r)| r.len() == n_rows);
        let aggregate = if aligned {
            (0..n_rows)
                .filter_map(|i| {
                    let vals: Vec<f64> = runs.iter().map(|(_, r)| r[i].2).collect();
                    Stat::of(&vals).map(|s| (runs[0].1[i].1, s))
                })
                .collect()
        } else {
            Vec::new()
        };
        let rounds = runs
            .first()
            .map(|(_, r)| r.iter().map(|x| x.0).collect())
            .unwrap_or_default();
        out.push(Gains {
            strategy: l.strategy,
            runs,
            aggregate,
            rounds,
        });
    }
    out
}

fn gains_csv(gains: &[Gains]) -> String {
    let mut s = format!("{PREFIX},gain,gain_se\n");
    for g in gains {
        for (seed, rows) in &g.runs {
            for &(round, size, gain) in rows {
                let _ = writeln!(
                    s,
                    "{},{gain},",
                    run_prefix("run", g.strategy, Some(*seed), 1, round, size)
                );
            }
        }
        for (i, (size, stat)) in g.aggregate.iter().enumerate() {
            let p = run_prefix(
                "aggregate",
                g.strategy,
                None,
                g.runs.len(),
                g.rounds[i],
                *size,
            );
            let _ = writeln!(s, "{p},{}", stat_cols(Some(*stat)));
        }
    }
    s
}
