//! Result files: per-run learning-curve CSV, aggregate CSV, acquisition JSONL.
//!
//! Floats are written in Rust's shortest round-trip form so files are
//! byte-stable and re-parse to identical values. Missing per-level RMSE
//! values are empty fields.

use std::fmt::Write as _;
use std::io::Write;

use super::analysis::{AggregateCurve, Stat};
use super::{AcquisitionRecord, LearningCurve, MetricsRow};
use crate::acquisition::Strategy;
use crate::error::{Error, Result};
use crate::level::NUM_LEVELS;

pub const CURVE_HEADER: &str =
    "round,labeled_size,discrete_rmse,rmse_l0,rmse_l1,rmse_l2,dist_l0,dist_l1,dist_l2,wall_time_s";

pub const AGGREGATE_HEADER: &str = "strategy,round,labeled_size,runs,\
discrete_rmse_mean,discrete_rmse_se,\
rmse_l0_mean,rmse_l0_se,rmse_l1_mean,rmse_l1_se,rmse_l2_mean,rmse_l2_se,\
dist_l0_mean,dist_l0_se,dist_l1_mean,dist_l1_se,dist_l2_mean,dist_l2_se,\
wall_time_s_mean,wall_time_s_se";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stat(s: Option<Stat>) -> String {
    match s {
        Some(s) => format!("{},{}", s.mean, opt(s.se)),
        None => ",".into(),
    }
}

pub fn curve_csv(curve: &LearningCurve) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in &curve.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.round,
            r.labeled_size,
            r.discrete_rmse,
            opt(r.per_level_rmse[0]),
            opt(r.per_level_rmse[1]),
            opt(r.per_level_rmse[2]),
            r.labeled_level_dist[0],
            r.labeled_level_dist[1],
            r.labeled_level_dist[2],
            r.wall_time_s
        );
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CURVE_HEADER {
        return Err(Error::Config(format!(
            "unexpected curve header: {}",
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Config(format!("line {line}: bad {what}"));
        let f = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(CURVE_HEADER.split(',').nth(i).unwrap()))
        };
        let of = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        rows.push(MetricsRow {
            round: rec[0].parse().map_err(|_| bad("round"))?,
            labeled_size: rec[1].parse().map_err(|_| bad("labeled_size"))?,
            discrete_rmse: f(2)?,
            per_level_rmse: [of(3)?, of(4)?, of(5)?],
            labeled_level_dist: [f(6)?, f(7)?, f(8)?],
            wall_time_s: f(9)?,
        });
    }
    Ok(rows)
}

/// Aggregate CSV body rows (no header) for one strategy.
pub fn aggregate_csv_rows(strategy: Strategy, agg: &AggregateCurve) -> String {
    let mut out = String::new();
    for r in &agg.rows {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            strategy,
            r.round,
            r.labeled_size,
            r.runs,
            stat(Some(r.discrete_rmse))
        );
        for k in 0..NUM_LEVELS {
            let _ = write!(out, ",{}", stat(r.per_level_rmse[k]));
        }
        for k in 0..NUM_LEVELS {
            let _ = write!(out, ",{}", stat(Some(r.labeled_level_dist[k])));
        }
        let _ = writeln!(out, ",{}", stat(Some(r.wall_time_s)));
    }
    out
}

pub fn write_acquisitions_jsonl<W: Write>(records: &[AcquisitionRecord], mut w: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::aggregate_runs;
    use crate::level::DifficultyLevel;
    use proptest::prelude::*;
    use proptest::strategy::Strategy as _;

    use crate::acquisition::Strategy;

    fn row_strategy() -> impl proptest::strategy::Strategy<Value = MetricsRow> {
        (
            0usize..50,
            1usize..10_000,
            0.0f64..2.0,
            prop::array::uniform3(prop::option::of(0.0f64..2.0)),
            prop::array::uniform3(0.0f64..1.0),
            0.0f64..100.0,
        )
            .prop_map(|(round, labeled_size, rmse, per, dist, t)| MetricsRow {
                round,
                labeled_size,
                discrete_rmse: rmse,
                per_level_rmse: per,
                labeled_level_dist: dist,
                wall_time_s: t,
            })
    }

    proptest! {
        #[test]
        fn curve_csv_round_trips(rows in prop::collection::vec(row_strategy(), 0..6)) {
            let curve = LearningCurve { strategy: Strategy::Uniform, run_seed: 1, rows, predictions: vec![] };
            let text = curve_csv(&curve);
            prop_assert_eq!(parse_curve_csv(&text).unwrap(), curve.rows);
        }
    }

    #[test]
    fn missing_levels_are_empty_fields() {
        let curve = LearningCurve {
            strategy: Strategy::Uniform,
            run_seed: 1,
            rows: vec![MetricsRow {
                round: 0,
                labeled_size: 10,
                discrete_rmse: 0.5,
                per_level_rmse: [Some(1.0), None, Some(0.0)],
                labeled_level_dist: [0.2, 0.5, 0.3],
                wall_time_s: 0.0,
            }],
            predictions: vec![],
        };
        let text = curve_csv(&curve);
        assert_eq!(text.lines().nth(1).unwrap(), "0,10,0.5,1,,0,0.2,0.5,0.3,0");
        let agg = aggregate_runs(&[curve.clone(), curve]).unwrap();
        let line = aggregate_csv_rows(Strategy::Uniform, &agg);
        assert_eq!(
            line.trim_end().split(',').count(),
            AGGREGATE_HEADER.split(',').count()
        );
        assert!(line.contains(",,,"));
    }

    #[test]
    fn acquisition_log_lines() {
        let rec = AcquisitionRecord {
            round: 1,
            strategy: Strategy::PowerVariance,
            indices: vec![4, 2],
            s_var: Some(vec![0.5, 0.25]),
            levels: vec![
                DifficultyLevel::new(2).unwrap(),
                DifficultyLevel::new(0).unwrap(),
            ],
        };
        let mut buf = Vec::new();
        write_acquisitions_jsonl(std::slice::from_ref(&rec), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"round\":1,\"strategy\":\"powervariance\",\"indices\":[4,2],\"s_var\":[0.5,0.25],\"levels\":[2,0]}\n"
        );
        let back: AcquisitionRecord = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, rec);
    }
}
