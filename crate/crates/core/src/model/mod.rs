//! Dropout MLP regressor with deterministic and Monte Carlo dropout prediction.

mod checkpoint;
mod network;
mod optim;

use std::borrow::Borrow;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub use network::{Dense, MaskMode, Masks, Network};
pub use optim::{warmup_linear, AdamW};

/// Learning rate used when fine-tuning a pretrained transformer. Too small to
/// train a randomly initialised MLP in ten epochs; kept as a named preset.
pub const FINE_TUNING_LR: f64 = 2e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_ratio: f64,
    pub mask_mode: MaskMode,
    pub seed: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            input_dim: 16,
            hidden_widths: vec![64, 64],
            dropout_rate: 0.1,
            learning_rate: 1e-3,
            weight_decay: 0.05,
            epochs: 10,
            batch_size: 64,
            warmup_ratio: 0.1,
            mask_mode: MaskMode::PerExample,
            seed: 0,
        }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.input_dim == 0 {
            return bad("input_dim must be positive".into());
        }
        if self.hidden_widths.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {} must be >= 0", self.weight_decay));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return bad(format!("warmup_ratio {} not in [0, 1]", self.warmup_ratio));
        }
        Ok(())
    }

    /// Parameter count of the network this config describes.
    pub fn param_count(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut total = 0;
        for &w in self.hidden_widths.iter().chain(std::iter::once(&1)) {
            total += fan_in * w + w;
            fan_in = w;
        }
        total
    }
}

/// `T x N` matrix of stochastic predictions: row `t` holds pass `t` over all
/// `N` candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: Vec<f64>,
    passes: usize,
    candidates: usize,
}

impl SampleMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let passes = rows.len();
        if passes == 0 {
            return Err(Error::Empty("sample rows"));
        }
        let candidates = rows[0].len();
        let mut values = Vec::with_capacity(passes * candidates);
        for row in rows {
            if row.len() != candidates {
                return Err(Error::LengthMismatch {
                    left: candidates,
                    right: row.len(),
                });
            }
            if let Some(&x) = row.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonFinite(x));
            }
            values.extend(row);
        }
        Ok(Self {
            values,
            passes,
            candidates,
        })
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn candidates(&self) -> usize {
        self.candidates
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.candidates..(t + 1) * self.candidates]
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.values[t * self.candidates + i]
    }

    /// The `T` samples for candidate `i`.
    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.passes).map(move |t| self.get(t, i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch, dropout on.
    pub train_loss: Vec<f64>,
    /// Validation MSE per epoch, dropout off.
    pub val_loss: Vec<f64>,
    /// 0-based epoch whose weights were kept.
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct Regressor {
    config: RegressorConfig,
    network: Network,
    initial: Network,
    train_rng: Rng,
    trained: bool,
}

impl Regressor {
    pub fn new(config: RegressorConfig) -> Result<Self> {
        config.validate()?;
        let network = Network::he(
            config.input_dim,
            &config.hidden_widths,
            &mut rng::derived(config.seed, &[rng::tag::MODEL_INIT]),
        );
        Ok(Self {
            train_rng: rng::derived(config.seed, &[rng::tag::TRAIN]),
            initial: network.clone(),
            network,
            config,
            trained: false,
        })
    }

    pub fn config(&self) -> &RegressorConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn initial_network(&self) -> &Network {
        &self.initial
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    pub fn summary(&self) -> String {
        format!(
            "mlp {} -> {:?} -> 1, {} params, dropout {}, lr {}, weight decay {}, {} epochs",
            self.config.input_dim,
            self.config.hidden_widths,
            self.param_count(),
            self.config.dropout_rate,
            self.config.learning_rate,
            self.config.weight_decay,
            self.config.epochs
        )
    }

    /// Restores the initial weights and training stream; clears trained state.
    pub fn reinitialize(&mut self) {
        self.network = self.initial.clone();
        self.train_rng = rng::derived(self.config.seed, &[rng::tag::TRAIN]);
        self.trained = false;
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Minibatch AdamW training with warmup, keeping the weights of the epoch
    /// with lowest validation MSE. With an empty `val` the final epoch is kept.
    pub fn train<E: Borrow<Example>>(
        &mut self,
        labeled: &[E],
        val: &[Example],
    ) -> Result<TrainReport> {
        if labeled.is_empty() {
            return Err(Error::Empty("labeled set"));
        }
        let xs: Vec<&[f64]> = labeled
            .iter()
            .map(|e| e.borrow().features.as_slice())
            .collect();
        let ys: Vec<f64> = labeled
            .iter()
            .map(|e| e.borrow().gold_level.as_target())
            .collect();
        let val_xs: Vec<&[f64]> = val.iter().map(|e| e.features.as_slice()).collect();
        let val_ys: Vec<f64> = val.iter().map(|e| e.gold_level.as_target()).collect();
        for x in xs.iter().chain(&val_xs) {
            self.check_dim(x)?;
        }

        let cfg = &self.config;
        let n = xs.len();
        let steps_per_epoch = n.div_ceil(cfg.batch_size);
        let total_steps = steps_per_epoch * cfg.epochs;
        let warmup = (cfg.warmup_ratio * total_steps as f64).ceil() as usize;
        let decay = self.network.decay_mask();
        let mut opt = AdamW::new(
            self.network.param_count(),
            cfg.learning_rate,
            cfg.weight_decay,
        );
        let mut params = self.network.params();
        let mut order: Vec<usize> = (0..n).collect();
        let mut report = TrainReport {
            train_loss: Vec::with_capacity(cfg.epochs),
            val_loss: Vec::with_capacity(cfg.epochs),
            best_epoch: cfg.epochs - 1,
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut step = 0;

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut self.train_rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i]).collect();
                let by: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
                let masks: Option<Vec<Masks>> = (cfg.dropout_rate > 0.0).then(|| {
                    batch
                        .iter()
                        .map(|_| {
                            self.network
                                .draw_masks(cfg.dropout_rate, &mut self.train_rng)
                                .expect("positive rate")
                        })
                        .collect()
                });
                let (loss, grad) = self.network.mse_and_gradient(&bx, &by, masks.as_deref());
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Diverged { epoch: epoch + 1 });
                }
                epoch_loss += loss * batch.len() as f64;
                opt.step(
                    &mut params,
                    &grad,
                    &decay,
                    warmup_linear(step, warmup, total_steps),
                );
                self.network.set_params(&params);
                step += 1;
            }
            report.train_loss.push(epoch_loss / n as f64);
            if !val_xs.is_empty() {
                let v = self.network.mse(&val_xs, &val_ys);
                if !v.is_finite() {
                    return Err(Error::Diverged { epoch: epoch + 1 });
                }
                report.val_loss.push(v);
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, params.clone()));
                    report.best_epoch = epoch;
                }
            }
        }
        if let Some((_, p)) = best {
            self.network.set_params(&p);
        }
        self.trained = true;
        Ok(report)
    }

    /// Deterministic predictions with dropout off.
    pub fn predict<E: Borrow<Example>>(&self, examples: &[E]) -> Result<Vec<f64>> {
        examples
            .iter()
            .map(|e| {
                let x = &e.borrow().features;
                self.check_dim(x)?;
                Ok(self.network.forward(x, None))
            })
            .collect()
    }

    pub fn mse<E: Borrow<Example>>(&self, examples: &[E]) -> Result<f64> {
        let preds = self.predict(examples)?;
        if preds.is_empty() {
            return Err(Error::Empty("examples"));
        }
        let sse: f64 = preds
            .iter()
            .zip(examples)
            .map(|(p, e)| (p - e.borrow().gold_level.as_target()).powi(2))
            .sum();
        Ok(sse / preds.len() as f64)
    }

    /// `passes` stochastic forward passes with dropout on.
    pub fn mc_predict<E: Borrow<Example>>(
        &self,
        examples: &[E],
        passes: usize,
        rng: &mut Rng,
    ) -> Result<SampleMatrix> {
        if passes == 0 {
            return Err(Error::Config("MC sample count must be at least 1".into()));
        }
        for e in examples {
            self.check_dim(&e.borrow().features)?;
        }
        let rate = self.config.dropout_rate;
        let rows = (0..passes)
            .map(|_| {
                let shared = match self.config.mask_mode {
                    MaskMode::PerPass => self.network.draw_masks(rate, rng),
                    MaskMode::PerExample => None,
                };
                examples
                    .iter()
                    .map(|e| {
                        let own = match self.config.mask_mode {
                            MaskMode::PerExample => self.network.draw_masks(rate, rng),
                            MaskMode::PerPass => None,
                        };
                        self.network
                            .forward(&e.borrow().features, own.as_ref().or(shared.as_ref()))
                    })
                    .collect()
            })
            .collect();
        SampleMatrix::from_rows(rows)
    }

    /// Serialises the current weights (see [`Regressor::load_weights`]).
    pub fn save_weights(&self) -> Vec<u8> {
        checkpoint::encode(&self.network)
    }

    /// Replaces the current weights with a checkpoint of identical shape.
    /// The initial snapshot is left untouched.
    pub fn load_weights(&mut self, bytes: &[u8]) -> Result<()> {
        let net = checkpoint::decode(bytes)?;
        let dims = |n: &Network| {
            n.layers
                .iter()
                .map(|l| (l.inputs, l.outputs))
                .collect::<Vec<_>>()
        };
        if dims(&net) != dims(&self.network) {
            return Err(Error::Checkpoint(
                "layer shapes differ from this model".into(),
            ));
        }
        self.network = net;
        Ok(())
    }
}
