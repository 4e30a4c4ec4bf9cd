use powervar::data::{gen_synthetic, gen_synthetic_with_latent, SyntheticConfig};
use powervar::dataset::levels_of;
use powervar::level::{discrete_rmse, discretize_all, level_counts};
use powervar::{Regressor, RegressorConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn train_levels_follow_the_configured_proportions() {
    let cfg = SyntheticConfig::default();
    let ds = gen_synthetic(&cfg).unwrap();
    let counts = level_counts(&levels_of(&ds.train));
    let n = ds.train.len() as f64;
    let stat: f64 = counts
        .iter()
        .zip(cfg.level_proportions)
        .map(|(&c, p)| (c as f64 - n * p).powi(2) / (n * p))
        .sum();
    let p = ChiSquared::new(2.0).unwrap().sf(stat);
    assert!(p > 0.01, "counts {counts:?}, p {p}");
}

fn latent_level_spearman(noise_sd: f64) -> (f64, f64) {
    let cfg = SyntheticConfig {
        noise_sd,
        ..Default::default()
    };
    let (ds, latent) = gen_synthetic_with_latent(&cfg).unwrap();
    let levels: Vec<f64> = ds.train.iter().map(|e| e.gold_level.as_target()).collect();
    let rho = pearson(&ranks(&latent.train), &ranks(&levels));
    // Three tied level values cap rho at sqrt(1 - sum p^3), whatever the noise.
    let n = levels.len() as f64;
    let cubes: f64 = level_counts(&levels_of(&ds.train))
        .iter()
        .map(|&c| (c as f64 / n).powi(3))
        .sum();
    (rho, (1.0 - cubes).sqrt())
}

#[test]
fn latent_difficulty_tracks_the_level() {
    let (exact, ceiling) = latent_level_spearman(1e-9);
    assert!(
        (exact - ceiling).abs() < 1e-3,
        "near-noiseless {exact} vs ceiling {ceiling}"
    );
    let (rho, ceiling) = latent_level_spearman(SyntheticConfig::default().noise_sd);
    assert!(rho > 0.9 * ceiling, "spearman {rho}, ceiling {ceiling}");
}

#[test]
fn noiseless_data_is_linearly_recoverable() {
    let ds = gen_synthetic(&SyntheticConfig {
        n_train: 1000,
        n_val: 100,
        n_test: 300,
        dim: 8,
        noise_sd: 0.0,
        hardness_skew: 0.0,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let mut model = Regressor::new(RegressorConfig {
        input_dim: 8,
        hidden_widths: vec![],
        learning_rate: 5e-2,
        weight_decay: 0.0,
        epochs: 60,
        ..Default::default()
    })
    .unwrap();
    model.train(&ds.train, &ds.val).unwrap();
    let preds = discretize_all(&model.predict(&ds.test).unwrap()).unwrap();
    let rmse = discrete_rmse(&preds, &levels_of(&ds.test)).unwrap();
    assert_eq!(rmse, 0.0);
    assert!(model.mse(&ds.test).unwrap() < 1e-3);
}
