//! Difficulty levels, thresholding of continuous predictions, and the
//! discrete RMSE family of metrics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of ordinal difficulty levels.
pub const NUM_LEVELS: usize = 3;

/// Ordinal difficulty level: 0 (middle school), 1 (high school), 2 (university).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct DifficultyLevel(u8);

impl DifficultyLevel {
    pub const ALL: [DifficultyLevel; NUM_LEVELS] =
        [DifficultyLevel(0), DifficultyLevel(1), DifficultyLevel(2)];

    pub fn new(value: u8) -> Result<Self> {
        if (value as usize) < NUM_LEVELS {
            Ok(Self(value))
        } else {
            Err(Error::InvalidLevel(value as i64))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The level as a regression target.
    pub fn as_target(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<i64> for DifficultyLevel {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        if (0..NUM_LEVELS as i64).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(Error::InvalidLevel(value))
        }
    }
}

impl From<DifficultyLevel> for i64 {
    fn from(level: DifficultyLevel) -> i64 {
        level.0 as i64
    }
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps a continuous prediction to the closest level.
///
/// Thresholds sit at the midpoints 0.5 and 1.5; intervals are half-open so a
/// value exactly on a threshold goes to the upper level.
pub fn discretize(y: f64) -> Result<DifficultyLevel> {
    if !y.is_finite() {
        return Err(Error::NonFinite(y));
    }
    let level = if y < 0.5 {
        0
    } else if y < 1.5 {
        1
    } else {
        2
    };
    Ok(DifficultyLevel(level))
}

pub fn discretize_all(ys: &[f64]) -> Result<Vec<DifficultyLevel>> {
    ys.iter().map(|&y| discretize(y)).collect()
}

fn check_pair(preds: &[DifficultyLevel], golds: &[DifficultyLevel]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    Ok(())
}

fn squared_error(p: DifficultyLevel, g: DifficultyLevel) -> f64 {
    let d = p.0 as f64 - g.0 as f64;
    d * d
}

/// Root mean squared error between integer level predictions and gold levels.
pub fn discrete_rmse(preds: &[DifficultyLevel], golds: &[DifficultyLevel]) -> Result<f64> {
    check_pair(preds, golds)?;
    let sse: f64 = preds
        .iter()
        .zip(golds)
        .map(|(&p, &g)| squared_error(p, g))
        .sum();
    Ok((sse / preds.len() as f64).sqrt())
}

/// Discrete RMSE restricted to each gold level. A level absent from `golds`
/// yields `None` rather than a misleading zero.
pub fn per_level_rmse(
    preds: &[DifficultyLevel],
    golds: &[DifficultyLevel],
) -> Result<[Option<f64>; NUM_LEVELS]> {
    check_pair(preds, golds)?;
    let mut sse = [0.0; NUM_LEVELS];
    let mut count = [0usize; NUM_LEVELS];
    for (&p, &g) in preds.iter().zip(golds) {
        sse[g.index()] += squared_error(p, g);
        count[g.index()] += 1;
    }
    let mut out = [None; NUM_LEVELS];
    for k in 0..NUM_LEVELS {
        if count[k] > 0 {
            out[k] = Some((sse[k] / count[k] as f64).sqrt());
        }
    }
    Ok(out)
}

/// Proportion of each level among `labels`.
pub fn level_proportions(labels: &[DifficultyLevel]) -> Result<[f64; NUM_LEVELS]> {
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let counts = level_counts(labels);
    let n = labels.len() as f64;
    Ok(counts.map(|c| c as f64 / n))
}

pub fn level_counts(labels: &[DifficultyLevel]) -> [usize; NUM_LEVELS] {
    let mut counts = [0usize; NUM_LEVELS];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(v: &[u8]) -> Vec<DifficultyLevel> {
        v.iter()
            .map(|&x| DifficultyLevel::new(x).unwrap())
            .collect()
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(0.74).unwrap().value(), 1);
        assert_eq!(discretize(-0.3).unwrap().value(), 0);
        assert_eq!(discretize(1.5).unwrap().value(), 2);
        assert_eq!(discretize(0.5).unwrap().value(), 1);
        assert_eq!(discretize(0.4999999).unwrap().value(), 0);
        assert_eq!(discretize(17.0).unwrap().value(), 2);
        assert!(discretize(f64::NAN).is_err());
        assert!(discretize(f64::INFINITY).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(
            discrete_rmse(&lv(&[0, 1, 2]), &lv(&[0, 1, 2])).unwrap(),
            0.0
        );
        assert_eq!(discrete_rmse(&lv(&[1, 1]), &lv(&[0, 2])).unwrap(), 1.0);
        assert!(discrete_rmse(&lv(&[1]), &lv(&[0, 2])).is_err());
        assert!(discrete_rmse(&[], &[]).is_err());
    }

    #[test]
    fn majority_rmse_on_imbalanced_distribution() {
        // 25/62/13 split predicted all-1: mean squared error is 0.25 + 0.13.
        let mut golds = vec![];
        golds.extend(lv(&[0]).repeat(25));
        golds.extend(lv(&[1]).repeat(62));
        golds.extend(lv(&[2]).repeat(13));
        let preds = lv(&[1]).repeat(100);
        let r = discrete_rmse(&preds, &golds).unwrap();
        assert!((r - 0.38f64.sqrt()).abs() < 1e-12);
        assert!((r - 0.6164).abs() < 1e-4);
    }

    #[test]
    fn per_level_examples() {
        let g = lv(&[0, 1, 2]);
        assert_eq!(
            per_level_rmse(&g, &g).unwrap(),
            [Some(0.0), Some(0.0), Some(0.0)]
        );

        let golds = lv(&[0, 0, 1, 1, 2, 2]);
        let preds = lv(&[1; 6]);
        assert_eq!(
            per_level_rmse(&preds, &golds).unwrap(),
            [Some(1.0), Some(0.0), Some(1.0)]
        );

        let r = per_level_rmse(&lv(&[2, 2]), &lv(&[0, 0])).unwrap();
        assert_eq!(r, [Some(2.0), None, None]);
    }

    #[test]
    fn proportions_examples() {
        assert_eq!(
            level_proportions(&lv(&[0, 1, 1, 2])).unwrap(),
            [0.25, 0.5, 0.25]
        );
        assert_eq!(level_proportions(&lv(&[1, 1, 1])).unwrap(), [0.0, 1.0, 0.0]);
        assert!(level_proportions(&[]).is_err());
    }

    #[test]
    fn serde_rejects_out_of_range() {
        assert!(serde_json::from_str::<DifficultyLevel>("3").is_err());
        assert_eq!(
            serde_json::from_str::<DifficultyLevel>("2")
                .unwrap()
                .value(),
            2
        );
    }

    fn levels(n: usize) -> impl Strategy<Value = Vec<DifficultyLevel>> {
        prop::collection::vec(0u8..3, n).prop_map(|v| lv(&v))
    }

    proptest! {
        #[test]
        fn discretize_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(discretize(lo).unwrap() <= discretize(hi).unwrap());
        }

        #[test]
        fn rmse_symmetric_and_zero_iff_equal(
            (p, g) in (1usize..60).prop_flat_map(|n| (levels(n), levels(n)))
        ) {
            let a = discrete_rmse(&p, &g).unwrap();
            let b = discrete_rmse(&g, &p).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(a == 0.0, p == g);
        }

        #[test]
        fn overall_mse_is_weighted_per_level_mse(
            (p, g) in (1usize..60).prop_flat_map(|n| (levels(n), levels(n)))
        ) {
            let overall = discrete_rmse(&p, &g).unwrap().powi(2);
            let per = per_level_rmse(&p, &g).unwrap();
            let props = level_proportions(&g).unwrap();
            let weighted: f64 = (0..NUM_LEVELS)
                .map(|k| per[k].map_or(0.0, |r| r * r) * props[k])
                .sum();
            prop_assert!((overall - weighted).abs() < 1e-12);
        }
    }
}
