//! Batch acquisition: Uniform, top-K Variance and PowerVariance.
//!
//! PowerVariance perturbs `log s_var` with i.i.d. Gumbel noise of scale
//! `1 / beta` and keeps the top K. By the Gumbel-top-k identity this is the
//! same as drawing K candidates without replacement with probabilities
//! proportional to `s_var^beta`.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Example, LabelState};
use crate::error::{Error, Result};
use crate::model::{Regressor, SampleMatrix};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "topk_variance")]
    TopkVariance,
    #[serde(rename = "powervariance")]
    PowerVariance,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Uniform,
        Strategy::TopkVariance,
        Strategy::PowerVariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::TopkVariance => "topk_variance",
            Strategy::PowerVariance => "powervariance",
        }
    }

    pub fn uses_model(self) -> bool {
        !matches!(self, Strategy::Uniform)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = Strategy::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!(
                    "unknown strategy {s:?}; valid strategies: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub strategy: Strategy,
    pub batch_k: usize,
    pub beta: f64,
    pub mc_samples: usize,
    pub pool_subset_m: usize,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::PowerVariance,
            batch_k: 100,
            beta: 1.0,
            mc_samples: 10,
            pool_subset_m: 5000,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_k == 0 {
            return Err(Error::Config("batch_k must be at least 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta {} must be finite and >= 0",
                self.beta
            )));
        }
        if self.pool_subset_m < self.batch_k {
            return Err(Error::Config(format!(
                "pool_subset_m ({}) is smaller than batch_k ({})",
                self.pool_subset_m, self.batch_k
            )));
        }
        if self.strategy.uses_model() && self.mc_samples < 2 {
            return Err(Error::Config(format!(
                "{} needs at least 2 MC samples, got {}",
                self.strategy, self.mc_samples
            )));
        }
        Ok(())
    }
}

/// Per-candidate population variance across the MC passes (divides by `T`).
pub fn variance_score(samples: &SampleMatrix) -> Result<Vec<f64>> {
    let t = samples.passes();
    if t < 2 {
        return Err(Error::Config(format!(
            "variance needs at least 2 passes, got {t}"
        )));
    }
    Ok((0..samples.candidates())
        .map(|i| {
            // Shifting by the first pass keeps identical columns at exactly 0.
            let shift = samples.get(0, i);
            let mean = samples.column(i).map(|v| v - shift).sum::<f64>() / t as f64;
            samples
                .column(i)
                .map(|v| (v - shift - mean).powi(2))
                .sum::<f64>()
                / t as f64
        })
        .collect())
}

/// Gumbel(0, 1/beta) quantile at `u`.
pub fn gumbel_from_uniform(u: f64, beta: f64) -> f64 {
    -(-u.ln()).ln() / beta
}

fn open_unit(rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn sample_gumbel(rng: &mut Rng, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!(
            "Gumbel coldness must be positive, got {beta}"
        )));
    }
    Ok(gumbel_from_uniform(open_unit(rng), beta))
}

fn check_scores(s_var: &[f64]) -> Result<()> {
    for (index, &value) in s_var.iter().enumerate() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::NegativeScore { index, value });
        }
    }
    Ok(())
}

/// `log s_var[i] + noise[i]`; zero scores map to negative infinity.
pub fn power_perturb_with_noise(s_var: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    check_scores(s_var)?;
    if s_var.len() != noise.len() {
        return Err(Error::LengthMismatch {
            left: s_var.len(),
            right: noise.len(),
        });
    }
    Ok(s_var
        .iter()
        .zip(noise)
        .map(|(&s, &e)| {
            if s == 0.0 {
                f64::NEG_INFINITY
            } else {
                s.ln() + e
            }
        })
        .collect())
}

/// PowerVariance scores with a fresh Gumbel draw per candidate.
pub fn power_perturb(s_var: &[f64], beta: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    check_scores(s_var)?;
    let noise = s_var
        .iter()
        .map(|_| sample_gumbel(rng, beta))
        .collect::<Result<Vec<_>>>()?;
    power_perturb_with_noise(s_var, &noise)
}

/// Indices of the `k` largest scores in descending order, ties broken by the
/// lower index. Negative infinity is allowed, NaN is not.
pub fn select_topk(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::NotEnough {
            requested: k,
            available: scores.len(),
        });
    }
    if let Some(&x) = scores.iter().find(|x| x.is_nan()) {
        return Err(Error::NonFinite(x));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

fn uniform_without_replacement(rng: &mut Rng, n: usize, k: usize) -> Vec<usize> {
    index::sample(rng, n, k).into_vec()
}

/// Picks `k` of the candidates (positions into `s_var`) under `strategy`.
/// Uniform ignores the scores; PowerVariance with `beta == 0` is exactly
/// uniform. Zero-score candidates are only taken by PowerVariance when fewer
/// than `k` candidates have a positive score, and then uniformly at random.
pub fn select_from_scores(
    strategy: Strategy,
    s_var: &[f64],
    k: usize,
    beta: f64,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if k > s_var.len() {
        return Err(Error::NotEnough {
            requested: k,
            available: s_var.len(),
        });
    }
    match strategy {
        Strategy::Uniform => Ok(uniform_without_replacement(rng, s_var.len(), k)),
        Strategy::TopkVariance => {
            check_scores(s_var)?;
            select_topk(s_var, k)
        }
        Strategy::PowerVariance if beta == 0.0 => {
            check_scores(s_var)?;
            Ok(uniform_without_replacement(rng, s_var.len(), k))
        }
        Strategy::PowerVariance => {
            let perturbed = power_perturb(s_var, beta, rng)?;
            let finite = perturbed.iter().filter(|s| s.is_finite()).count();
            if finite >= k {
                return select_topk(&perturbed, k);
            }
            let mut chosen = select_topk(&perturbed, finite)?;
            let zeros: Vec<usize> = (0..s_var.len()).filter(|&i| s_var[i] == 0.0).collect();
            let fill = uniform_without_replacement(rng, zeros.len(), k - finite);
            chosen.extend(fill.into_iter().map(|j| zeros[j]));
            Ok(chosen)
        }
    }
}

/// Candidates considered in one acquisition round.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    /// Train indices of the pool subset.
    pub indices: Vec<usize>,
    pub s_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    /// Train indices to label, in selection order.
    pub indices: Vec<usize>,
    /// Variance scores of the chosen indices (variance strategies only).
    pub s_var: Option<Vec<f64>>,
    pub scored: Option<ScoredCandidates>,
}

/// One acquisition step: draw a uniform pool subset of size
/// `min(M, |pool|)`, score it if the strategy needs scores, and select K.
pub fn acquire<E: Borrow<Example>>(
    model: &Regressor,
    state: &LabelState,
    train: &[E],
    config: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<Acquisition> {
    config.validate()?;
    let pool = state.pool();
    let k = config.batch_k;
    if pool.len() < k {
        return Err(Error::NotEnough {
            requested: k,
            available: pool.len(),
        });
    }
    if config.strategy.uses_model() && !model.is_trained() {
        return Err(Error::Untrained);
    }
    let m = config.pool_subset_m.min(pool.len());
    let mut subset: Vec<usize> = uniform_without_replacement(rng, pool.len(), m)
        .into_iter()
        .map(|j| pool[j])
        .collect();
    subset.sort_unstable();

    if !config.strategy.uses_model() {
        let picks = uniform_without_replacement(rng, subset.len(), k);
        return Ok(Acquisition {
            indices: picks.into_iter().map(|j| subset[j]).collect(),
            s_var: None,
            scored: None,
        });
    }

    let candidates: Vec<&Example> = subset.iter().map(|&i| train[i].borrow()).collect();
    let samples = model.mc_predict(&candidates, config.mc_samples, rng)?;
    let s_var = variance_score(&samples)?;
    let picks = select_from_scores(config.strategy, &s_var, k, config.beta, rng)?;
    Ok(Acquisition {
        indices: picks.iter().map(|&j| subset[j]).collect(),
        s_var: Some(picks.iter().map(|&j| s_var[j]).collect()),
        scored: Some(ScoredCandidates {
            indices: subset,
            s_var,
        }),
    })
}
