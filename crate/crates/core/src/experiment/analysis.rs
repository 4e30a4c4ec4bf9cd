use serde::Serialize;

use super::{LearningCurve, MetricsRow};
use crate::error::{Error, Result};
use crate::level::NUM_LEVELS;

/// Per-round `uniform_rmse - strategy_rmse`; positive favours the strategy.
pub fn active_gain(curve: &LearningCurve, uniform: &LearningCurve) -> Result<Vec<f64>> {
    gain_rows(&curve.rows, &uniform.rows)
}

pub(crate) fn gain_rows(rows: &[MetricsRow], uniform: &[MetricsRow]) -> Result<Vec<f64>> {
    if rows.len() != uniform.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: uniform.len(),
        });
    }
    rows.iter()
        .zip(uniform)
        .map(|(s, u)| {
            if s.labeled_size != u.labeled_size {
                return Err(Error::Config(format!(
                    "labeled sizes differ: {} vs {}",
                    s.labeled_size, u.labeled_size
                )));
            }
            Ok(u.discrete_rmse - s.discrete_rmse)
        })
        .collect()
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// `None` with fewer than two observations.
    pub se: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Some(Stat { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub round: usize,
    pub labeled_size: usize,
    pub runs: usize,
    pub discrete_rmse: Stat,
    /// Over the runs in which the level occurs in the test split.
    pub per_level_rmse: [Option<Stat>; NUM_LEVELS],
    pub labeled_level_dist: [Stat; NUM_LEVELS],
    pub wall_time_s: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateCurve {
    pub rows: Vec<AggregateRow>,
}

/// Per-round mean and standard error (absent for a single run) across runs on the same labeled-size grid.
pub fn aggregate_runs(curves: &[LearningCurve]) -> Result<AggregateCurve> {
    let rows: Vec<&[MetricsRow]> = curves.iter().map(|c| c.rows.as_slice()).collect();
    aggregate_rows(&rows)
}

pub(crate) fn aggregate_rows(runs: &[&[MetricsRow]]) -> Result<AggregateCurve> {
    if runs.is_empty() {
        return Err(Error::NotEnough {
            requested: 1,
            available: runs.len(),
        });
    }
    let grid: Vec<usize> = runs[0].iter().map(|r| r.labeled_size).collect();
    for run in &runs[1..] {
        let other: Vec<usize> = run.iter().map(|r| r.labeled_size).collect();
        if other != grid {
            return Err(Error::Config(format!(
                "mismatched labeled-size grids: {grid:?} vs {other:?}"
            )));
        }
    }
    let column = |i: usize, f: &dyn Fn(&MetricsRow) -> Option<f64>| -> Vec<f64> {
        runs.iter().filter_map(|run| f(&run[i])).collect()
    };
    let rows = (0..grid.len())
        .map(|i| {
            let stat = |f: &dyn Fn(&MetricsRow) -> Option<f64>| Stat::of(&column(i, f));
            AggregateRow {
                round: runs[0][i].round,
                labeled_size: grid[i],
                runs: runs.len(),
                discrete_rmse: stat(&|r| Some(r.discrete_rmse)).expect("at least one run"),
                per_level_rmse: std::array::from_fn(|k| stat(&|r| r.per_level_rmse[k])),
                labeled_level_dist: std::array::from_fn(|k| {
                    stat(&|r| Some(r.labeled_level_dist[k])).expect("at least one run")
                }),
                wall_time_s: stat(&|r| Some(r.wall_time_s)).expect("at least one run"),
            }
        })
        .collect();
    Ok(AggregateCurve { rows })
}
