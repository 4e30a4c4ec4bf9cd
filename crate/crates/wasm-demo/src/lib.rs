//! WebAssembly bindings for the static demo page in `www/`. Every export
//! returns a JSON string so the page needs no generated type glue.

use powervar::acquisition::{sample_gumbel, select_from_scores};
use powervar::data::{gen_synthetic, SyntheticConfig};
use powervar::experiment::run_al;
use powervar::rng::seeded;
use powervar::{AcquisitionConfig, LoopConfig, RegressorConfig, Strategy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest candidate set for which exact inclusion probabilities are enumerated.
pub const MAX_EXACT: usize = 10;

#[derive(Debug, Serialize)]
pub struct Inclusion {
    pub scores: Vec<f64>,
    pub k: usize,
    pub beta: f64,
    pub trials: usize,
    /// Fraction of trials in which each candidate was selected.
    pub empirical: Vec<f64>,
    /// Exact inclusion probability under sequential sampling with
    /// probability proportional to `score^beta`, when small enough to enumerate.
    pub exact: Option<Vec<f64>>,
}

fn exact_inclusion(weights: &[f64], k: usize) -> Vec<f64> {
    fn walk(w: &[f64], k: usize, taken: &mut Vec<usize>, p: f64, out: &mut [f64]) {
        if taken.len() == k || p == 0.0 {
            if taken.len() == k {
                taken.iter().for_each(|&i| out[i] += p);
            }
            return;
        }
        let rest: f64 = (0..w.len())
            .filter(|i| !taken.contains(i))
            .map(|i| w[i])
            .sum();
        for i in 0..w.len() {
            if !taken.contains(&i) && w[i] > 0.0 {
                taken.push(i);
                walk(w, k, taken, p * w[i] / rest, out);
                taken.pop();
            }
        }
    }
    let mut out = vec![0.0; weights.len()];
    walk(weights, k, &mut Vec::new(), 1.0, &mut out);
    out
}

pub fn inclusion(
    scores: &[f64],
    k: usize,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<Inclusion, String> {
    if trials == 0 {
        return Err("trials must be at least 1".into());
    }
    let mut rng = seeded(seed);
    let mut counts = vec![0usize; scores.len()];
    for _ in 0..trials {
        let picked = select_from_scores(Strategy::PowerVariance, scores, k, beta, &mut rng)
            .map_err(|e| e.to_string())?;
        picked.into_iter().for_each(|i| counts[i] += 1);
    }
    let positive = scores.iter().filter(|&&s| s > 0.0).count();
    let exact = (scores.len() <= MAX_EXACT && positive >= k).then(|| {
        let w: Vec<f64> = scores
            .iter()
            .map(|&s| if s > 0.0 { s.powf(beta) } else { 0.0 })
            .collect();
        exact_inclusion(&w, k)
    });
    Ok(Inclusion {
        scores: scores.to_vec(),
        k,
        beta,
        trials,
        empirical: counts.iter().map(|&c| c as f64 / trials as f64).collect(),
        exact,
    })
}

#[derive(Debug, Serialize)]
pub struct Histogram {
    pub beta: f64,
    pub edges: Vec<f64>,
    /// Empirical density per bin.
    pub density: Vec<f64>,
    /// Gumbel(0, 1/beta) density at the bin centres.
    pub expected: Vec<f64>,
    pub mean: f64,
}

pub fn gumbel_histogram(
    beta: f64,
    draws: usize,
    bins: usize,
    seed: u64,
) -> Result<Histogram, String> {
    if !(beta > 0.0 && beta.is_finite()) || draws == 0 || bins == 0 {
        return Err("need beta > 0, draws >= 1 and bins >= 1".into());
    }
    let mut rng = seeded(seed);
    let xs: Vec<f64> = (0..draws)
        .map(|_| sample_gumbel(&mut rng, beta))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    // Fixed window covering nearly all the mass.
    let (lo, hi) = (-2.5 / beta, 7.0 / beta);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &xs {
        if (lo..hi).contains(&x) {
            counts[((x - lo) / width) as usize] += 1;
        }
    }
    let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let density = counts
        .iter()
        .map(|&c| c as f64 / (draws as f64 * width))
        .collect();
    let expected = (0..bins)
        .map(|i| {
            let z = beta * (lo + (i as f64 + 0.5) * width);
            beta * (-(z + (-z).exp())).exp()
        })
        .collect();
    Ok(Histogram {
        beta,
        edges,
        density,
        expected,
        mean: xs.iter().sum::<f64>() / draws as f64,
    })
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub strategy: Strategy,
    pub labeled_size: Vec<usize>,
    pub discrete_rmse: Vec<f64>,
    /// Share of each level among the points acquired after the initial set.
    pub acquired_levels: [f64; 3],
}

/// A small active-learning run on synthetic data (1000 training examples,
/// 8 features, 100 to 300 labels in batches of 25).
pub fn simulate(strategy: Strategy, beta: f64, seed: u64) -> Result<Curve, String> {
    let dataset = gen_synthetic(&SyntheticConfig {
        n_train: 1000,
        n_val: 100,
        n_test: 300,
        dim: 8,
        seed,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let config = LoopConfig {
        initial_labeled: 100,
        final_labeled: 300,
        runs: 1,
        base_seed: seed,
        record_wall_time: false,
        acquisition: AcquisitionConfig {
            strategy,
            batch_k: 25,
            beta,
            pool_subset_m: 400,
            ..Default::default()
        },
        regressor: RegressorConfig {
            input_dim: 8,
            hidden_widths: vec![32, 32],
            learning_rate: 1e-2,
            ..Default::default()
        },
    };
    let out = run_al(&dataset, &config, seed).map_err(|e| e.to_string())?;
    let mut counts = [0.0; 3];
    let acquired = out.acquired_levels();
    acquired.iter().for_each(|l| counts[l.index()] += 1.0);
    let total = acquired.len().max(1) as f64;
    Ok(Curve {
        strategy,
        labeled_size: out.curve.labeled_sizes(),
        discrete_rmse: out.curve.rows.iter().map(|r| r.discrete_rmse).collect(),
        acquired_levels: counts.map(|c| c / total),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

#[wasm_bindgen(js_name = inclusion)]
pub fn inclusion_js(
    scores: Vec<f64>,
    k: usize,
    beta: f64,
    trials: usize,
    seed: u32,
) -> Result<String, JsError> {
    to_js(inclusion(&scores, k, beta, trials, seed.into()))
}

#[wasm_bindgen(js_name = gumbelHistogram)]
pub fn gumbel_histogram_js(
    beta: f64,
    draws: usize,
    bins: usize,
    seed: u32,
) -> Result<String, JsError> {
    to_js(gumbel_histogram(beta, draws, bins, seed.into()))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(strategy: &str, beta: f64, seed: u32) -> Result<String, JsError> {
    let strategy: Strategy = strategy
        .parse()
        .map_err(|e: powervar::Error| JsError::new(&e.to_string()))?;
    to_js(simulate(strategy, beta, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusion_matches_enumeration() {
        let r = inclusion(&[0.1, 0.4, 0.2, 0.8, 0.5], 2, 1.0, 40_000, 1).unwrap();
        let exact = r.exact.unwrap();
        assert!((exact.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        let tv: f64 = 0.5
            * r.empirical
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        assert!(tv < 0.02, "{tv}");
    }

    #[test]
    fn large_candidate_sets_skip_enumeration() {
        let scores: Vec<f64> = (1..=20).map(f64::from).collect();
        assert!(inclusion(&scores, 3, 1.0, 10, 0).unwrap().exact.is_none());
        assert!(inclusion(&[1.0], 2, 1.0, 10, 0).is_err());
    }

    #[test]
    fn histogram_tracks_the_density() {
        let h = gumbel_histogram(2.0, 100_000, 40, 3).unwrap();
        assert_eq!(h.edges.len(), 41);
        assert!((h.mean - 0.5772 / 2.0).abs() < 0.01, "{}", h.mean);
        let worst = h
            .density
            .iter()
            .zip(&h.expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "{worst}");
        assert!(gumbel_histogram(0.0, 10, 5, 0).is_err());
    }

    #[test]
    fn simulation_produces_a_curve() {
        let c = simulate(Strategy::PowerVariance, 1.0, 0).unwrap();
        assert_eq!(
            c.labeled_size,
            vec![100, 125, 150, 175, 200, 225, 250, 275, 300]
        );
        assert!((c.acquired_levels.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"strategy\":\"powervariance\""));
    }
}
