//! The active-learning loop: stratified initial labeling, then repeated
//! train, evaluate, acquire, reveal and re-initialise rounds; plus the
//! Random / Majority / Supervised reference points.

mod analysis;
mod io;

use std::time::Instant;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::acquisition::{acquire, AcquisitionConfig, Strategy};
use crate::dataset::{level_distribution, levels_of, Dataset, Example, LabelState};
use crate::error::{Error, Result};
use crate::level::{discrete_rmse, discretize_all, per_level_rmse, DifficultyLevel, NUM_LEVELS};
use crate::model::{Regressor, RegressorConfig, TrainReport};
use crate::rng::{self, tag};

pub use analysis::{active_gain, aggregate_runs, AggregateCurve, AggregateRow, Stat};
pub use io::{
    aggregate_csv_rows, curve_csv, parse_curve_csv, write_acquisitions_jsonl, AGGREGATE_HEADER,
    CURVE_HEADER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub initial_labeled: usize,
    pub final_labeled: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// Record per-round wall-clock seconds. Off by default so result files
    /// are byte-reproducible; when off the column holds 0.
    pub record_wall_time: bool,
    pub acquisition: AcquisitionConfig,
    pub regressor: RegressorConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            initial_labeled: 200,
            final_labeled: 1000,
            runs: 5,
            base_seed: 0,
            record_wall_time: false,
            acquisition: AcquisitionConfig {
                batch_k: 50,
                ..AcquisitionConfig::default()
            },
            regressor: RegressorConfig {
                learning_rate: DESK_LEARNING_RATE,
                ..RegressorConfig::default()
            },
        }
    }
}

/// Learning rate of the desk-scale loop. Ten epochs over a few hundred labels
/// at 1e-3 leave a freshly initialised MLP close to the majority baseline.
pub const DESK_LEARNING_RATE: f64 = 1e-2;

impl LoopConfig {
    /// Checks that only depend on the config itself.
    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        self.regressor.validate()?;
        if self.initial_labeled < NUM_LEVELS {
            return Err(Error::Config(format!(
                "initial_labeled ({}) must be at least {NUM_LEVELS}",
                self.initial_labeled
            )));
        }
        if self.final_labeled < self.initial_labeled {
            return Err(Error::Config(format!(
                "final_labeled ({}) is below initial_labeled ({})",
                self.final_labeled, self.initial_labeled
            )));
        }
        let span = self.final_labeled - self.initial_labeled;
        if !span.is_multiple_of(self.acquisition.batch_k) {
            return Err(Error::Config(format!(
                "final_labeled - initial_labeled ({span}) is not divisible by batch_k ({})",
                self.acquisition.batch_k
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks against a concrete dataset, including stratification feasibility.
    pub fn validate_for(&self, dataset: &Dataset) -> Result<()> {
        self.validate()?;
        let n = dataset.train.len();
        if self.final_labeled > n {
            return Err(Error::Config(format!(
                "final_labeled ({}) exceeds the training split ({n})",
                self.final_labeled
            )));
        }
        stratified_quotas(&dataset.train_level_counts(), self.initial_labeled)?;
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        (self.final_labeled - self.initial_labeled) / self.acquisition.batch_k
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.runs as u64)
            .map(|i| self.base_seed.wrapping_add(i))
            .collect()
    }
}

/// Largest-remainder apportionment of `n` by the level counts. Remainder
/// ties go to the lower level.
pub fn stratified_quotas(counts: &[usize; NUM_LEVELS], n: usize) -> Result<[usize; NUM_LEVELS]> {
    let total: usize = counts.iter().sum();
    if n > total {
        return Err(Error::NotEnough {
            requested: n,
            available: total,
        });
    }
    let num = |k: usize| n as u128 * counts[k] as u128;
    let mut quotas: [usize; NUM_LEVELS] =
        std::array::from_fn(|k| (num(k) / total as u128) as usize);
    let mut order: Vec<usize> = (0..NUM_LEVELS).collect();
    order.sort_by(|&a, &b| {
        (num(b) % total as u128)
            .cmp(&(num(a) % total as u128))
            .then(a.cmp(&b))
    });
    let short = n - quotas.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        quotas[k] += 1;
    }
    for (k, (&q, &c)) in quotas.iter().zip(counts).enumerate() {
        if q > c {
            return Err(Error::Stratification {
                level: k as u8,
                available: c,
                quota: q,
            });
        }
    }
    Ok(quotas)
}

/// Stratified initial labeled set following the training level distribution.
pub fn init_labeled_set(dataset: &Dataset, n: usize, rng: &mut rng::Rng) -> Result<LabelState> {
    let counts = dataset.train_level_counts();
    let quotas = stratified_quotas(&counts, n)?;
    let mut chosen = Vec::with_capacity(n);
    for level in DifficultyLevel::ALL {
        let members: Vec<usize> = (0..dataset.train.len())
            .filter(|&i| dataset.train[i].gold_level == level)
            .collect();
        let picks = index::sample(rng, members.len(), quotas[level.index()]);
        chosen.extend(picks.into_iter().map(|j| members[j]));
    }
    chosen.sort_unstable();
    let mut state = LabelState::new(dataset.train.len());
    state.reveal(&chosen, &dataset.train)?;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: usize,
    pub labeled_size: usize,
    pub discrete_rmse: f64,
    pub per_level_rmse: [Option<f64>; NUM_LEVELS],
    pub labeled_level_dist: [f64; NUM_LEVELS],
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub strategy: Strategy,
    pub run_seed: u64,
    pub rows: Vec<MetricsRow>,
    /// Discretised test predictions behind each row.
    pub predictions: Vec<Vec<DifficultyLevel>>,
}

impl LearningCurve {
    pub fn labeled_sizes(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.labeled_size).collect()
    }

    pub fn final_rmse(&self) -> Option<f64> {
        self.rows.last().map(|r| r.discrete_rmse)
    }
}

/// One acquisition step as written to the per-run JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionRecord {
    /// Round whose training set first includes these points.
    pub round: usize,
    pub strategy: Strategy,
    pub indices: Vec<usize>,
    pub s_var: Option<Vec<f64>>,
    pub levels: Vec<DifficultyLevel>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub curve: LearningCurve,
    pub acquisitions: Vec<AcquisitionRecord>,
    pub train_reports: Vec<TrainReport>,
}

impl RunOutput {
    /// Levels of every acquired point (excluding the initial set).
    pub fn acquired_levels(&self) -> Vec<DifficultyLevel> {
        self.acquisitions
            .iter()
            .flat_map(|a| a.levels.iter().copied())
            .collect()
    }
}

fn evaluate(
    model: &Regressor,
    test: &[Example],
) -> Result<(Vec<DifficultyLevel>, f64, [Option<f64>; NUM_LEVELS])> {
    let preds = discretize_all(&model.predict(test)?)?;
    let golds = levels_of(test);
    let rmse = discrete_rmse(&preds, &golds)?;
    let per_level = per_level_rmse(&preds, &golds)?;
    Ok((preds, rmse, per_level))
}

fn regressor_for(dataset: &Dataset, config: &LoopConfig, seed: u64) -> Result<Regressor> {
    Regressor::new(RegressorConfig {
        input_dim: dataset.dim(),
        seed: rng::derive_seed(seed, &[tag::MODEL_INIT]),
        ..config.regressor.clone()
    })
}

/// One full active-learning run with a given seed.
///
/// The seed fixes the initial labeled set and the model initialisation, so
/// runs of different strategies with the same seed share both.
pub fn run_al(dataset: &Dataset, config: &LoopConfig, seed: u64) -> Result<RunOutput> {
    config.validate_for(dataset)?;
    let n_train = dataset.train.len();
    let strategy = config.acquisition.strategy;
    let mut model = regressor_for(dataset, config, seed)?;
    let mut state = init_labeled_set(
        dataset,
        config.initial_labeled,
        &mut rng::derived(seed, &[tag::INITIAL_SET]),
    )?;
    let clock = || config.record_wall_time.then(Instant::now);

    let mut rows = Vec::with_capacity(config.rounds() + 1);
    let mut predictions = Vec::with_capacity(config.rounds() + 1);
    let mut acquisitions = Vec::with_capacity(config.rounds());
    let mut train_reports = Vec::with_capacity(config.rounds() + 1);
    let mut started = clock();
    for round in 0..=config.rounds() {
        state.check_invariants(n_train)?;
        let labeled: Vec<&Example> = state.labeled().iter().map(|&i| &dataset.train[i]).collect();
        train_reports.push(model.train(&labeled, &dataset.val)?);
        let (preds, rmse, per_level) = evaluate(&model, &dataset.test)?;
        rows.push(MetricsRow {
            round,
            labeled_size: state.labeled().len(),
            discrete_rmse: rmse,
            per_level_rmse: per_level,
            labeled_level_dist: level_distribution(&state)?,
            wall_time_s: started.map_or(0.0, |t| t.elapsed().as_secs_f64()),
        });
        predictions.push(preds);
        if round == config.rounds() {
            break;
        }

        started = clock();
        let mut round_rng = rng::derived(seed, &[tag::POOL_SUBSET, round as u64]);
        let picked = acquire(
            &model,
            &state,
            &dataset.train,
            &config.acquisition,
            &mut round_rng,
        )?;
        state.reveal(&picked.indices, &dataset.train)?;
        acquisitions.push(AcquisitionRecord {
            round: round + 1,
            strategy,
            levels: picked
                .indices
                .iter()
                .map(|&i| state.label_of(i).expect("just revealed"))
                .collect(),
            indices: picked.indices,
            s_var: picked.s_var,
        });
        model.reinitialize();
    }
    state.check_invariants(n_train)?;

    Ok(RunOutput {
        curve: LearningCurve {
            strategy,
            run_seed: seed,
            rows,
            predictions,
        },
        acquisitions,
        train_reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Random,
    Majority,
    Supervised,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Random, Baseline::Majority, Baseline::Supervised];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Random => "random",
            Baseline::Majority => "majority",
            Baseline::Supervised => "supervised",
        }
    }
}

/// Most frequent training level, ties to the lower level.
pub fn majority_level(dataset: &Dataset) -> DifficultyLevel {
    let counts = dataset.train_level_counts();
    let best = (0..NUM_LEVELS).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
    DifficultyLevel::ALL[best]
}

/// Reference points on the test split. `labeled_size` is the number of
/// training labels the baseline consumes; the level distribution is that of
/// the training split.
pub fn run_baseline(
    dataset: &Dataset,
    which: Baseline,
    config: &LoopConfig,
    seed: u64,
) -> Result<MetricsRow> {
    let started = config.record_wall_time.then(Instant::now);
    let n = dataset.test.len();
    let (preds, labeled_size) = match which {
        Baseline::Random => {
            let mut r = rng::derived(seed, &[tag::BASELINE]);
            let preds = (0..n)
                .map(|_| DifficultyLevel::ALL[r.random_range(0..NUM_LEVELS)])
                .collect();
            (preds, 0)
        }
        Baseline::Majority => (vec![majority_level(dataset); n], 0),
        Baseline::Supervised => {
            config.regressor.validate()?;
            let mut model = regressor_for(dataset, config, seed)?;
            model.train(&dataset.train, &dataset.val)?;
            (evaluate(&model, &dataset.test)?.0, dataset.train.len())
        }
    };
    let golds = levels_of(&dataset.test);
    Ok(MetricsRow {
        round: 0,
        labeled_size,
        discrete_rmse: discrete_rmse(&preds, &golds)?,
        per_level_rmse: per_level_rmse(&preds, &golds)?,
        labeled_level_dist: dataset.level_distribution(),
        wall_time_s: started.map_or(0.0, |t| t.elapsed().as_secs_f64()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};

    fn tiny() -> (Dataset, LoopConfig) {
        let ds = gen_synthetic(&SyntheticConfig {
            n_train: 600,
            n_val: 60,
            n_test: 150,
            dim: 6,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let cfg = LoopConfig {
            initial_labeled: 60,
            final_labeled: 120,
            runs: 2,
            acquisition: AcquisitionConfig {
                batch_k: 20,
                pool_subset_m: 200,
                ..Default::default()
            },
            regressor: RegressorConfig {
                hidden_widths: vec![16],
                epochs: 5,
                ..Default::default()
            },
            ..Default::default()
        };
        (ds, cfg)
    }

    #[test]
    fn quotas_by_largest_remainder() {
        assert_eq!(
            stratified_quotas(&[2500, 6200, 1300], 500).unwrap(),
            [125, 310, 65]
        );
        assert_eq!(stratified_quotas(&[1, 1, 1], 2).unwrap(), [1, 1, 0]);
        assert_eq!(stratified_quotas(&[10, 20, 3], 33).unwrap(), [10, 20, 3]);
        let q = stratified_quotas(&[2013, 4987, 1000], 200).unwrap();
        assert_eq!(q.iter().sum::<usize>(), 200);
        assert!(stratified_quotas(&[1, 1, 1], 4).is_err());
    }

    #[test]
    fn initial_set_is_stratified_and_seeded() {
        let (ds, _) = tiny();
        let a = init_labeled_set(&ds, 60, &mut rng::seeded(1)).unwrap();
        let b = init_labeled_set(&ds, 60, &mut rng::seeded(1)).unwrap();
        assert_eq!(a, b);
        let quotas = stratified_quotas(&ds.train_level_counts(), 60).unwrap();
        assert_eq!(crate::level::level_counts(&a.labeled_levels()), quotas);
        a.check_invariants(ds.train.len()).unwrap();

        let all = init_labeled_set(&ds, ds.train.len(), &mut rng::seeded(2)).unwrap();
        assert!(all.pool().is_empty());
    }

    #[test]
    fn schedule_and_determinism() {
        let (ds, mut cfg) = tiny();
        for strategy in Strategy::ALL {
            cfg.acquisition.strategy = strategy;
            let out = run_al(&ds, &cfg, 7).unwrap();
            assert_eq!(out.curve.labeled_sizes(), vec![60, 80, 100, 120]);
            assert_eq!(out.acquisitions.len(), 3);
            for row in &out.curve.rows {
                assert!((row.labeled_level_dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for (row, preds) in out.curve.rows.iter().zip(&out.curve.predictions) {
                let golds = levels_of(&ds.test);
                assert_eq!(discrete_rmse(preds, &golds).unwrap(), row.discrete_rmse);
            }
            for rec in &out.acquisitions {
                for (i, l) in rec.indices.iter().zip(&rec.levels) {
                    assert_eq!(ds.train[*i].gold_level, *l);
                }
            }
            let again = run_al(&ds, &cfg, 7).unwrap();
            assert_eq!(again.curve, out.curve);
        }
    }

    #[test]
    fn config_checks() {
        let (ds, cfg) = tiny();
        let mut bad = cfg.clone();
        bad.final_labeled = 130;
        assert!(bad.validate().is_err());
        bad = cfg.clone();
        bad.final_labeled = 10_000;
        assert!(bad.validate_for(&ds).is_err());
        bad = cfg.clone();
        bad.initial_labeled = 2;
        assert!(bad.validate().is_err());
        assert_eq!(cfg.rounds(), 3);
        assert_eq!(cfg.run_seeds(), vec![0, 1]);
    }

    #[test]
    fn baselines() {
        let (ds, cfg) = tiny();
        let maj = run_baseline(&ds, Baseline::Majority, &cfg, 0).unwrap();
        assert_eq!(majority_level(&ds).value(), 1);
        assert_eq!(maj.per_level_rmse[1], Some(0.0));
        let r1 = run_baseline(&ds, Baseline::Random, &cfg, 0).unwrap();
        assert_eq!(r1, run_baseline(&ds, Baseline::Random, &cfg, 0).unwrap());
        let sup = run_baseline(&ds, Baseline::Supervised, &cfg, 0).unwrap();
        assert_eq!(sup.labeled_size, 600);
        assert!(sup.discrete_rmse < r1.discrete_rmse);
    }
}
