//! Fully connected ReLU network with inverted dropout after every hidden layer
//! and a single linear output unit.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// He-normal weights (std `sqrt(2 / fan_in)`), zero bias.
    pub fn he(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive std");
        let weights = (0..inputs * outputs).map(|_| normal.sample(rng)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let dot: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
            out.push(dot + b);
        }
    }
}

/// How dropout masks are drawn during stochastic passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// A fresh mask for every example in every pass.
    #[default]
    PerExample,
    /// One mask per pass shared by every example in it.
    PerPass,
}

/// Per-hidden-layer multiplicative masks; each entry is 0 or `1 / (1 - p)`.
pub type Masks = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Dense>,
}

struct Trace {
    /// Input to each layer (post-activation, post-dropout of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    output: f64,
}

impl Network {
    pub fn he(input_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden {
            layers.push(Dense::he(fan_in, width, rng));
            fan_in = width;
        }
        layers.push(Dense::he(fan_in, 1, rng));
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.outputs)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter vector length");
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
    }

    /// `true` for parameters subject to weight decay (weights, not biases).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(std::iter::repeat_n(true, l.weights.len()));
            out.extend(std::iter::repeat_n(false, l.bias.len()));
        }
        out
    }

    /// Draws one set of dropout masks, or `None` when the rate is zero.
    pub fn draw_masks(&self, rate: f64, rng: &mut Rng) -> Option<Masks> {
        if rate <= 0.0 {
            return None;
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        Some(
            self.hidden_widths()
                .iter()
                .map(|&w| {
                    (0..w)
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                scale
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Forward pass; `masks` switches dropout on.
    pub fn forward(&self, x: &[f64], masks: Option<&Masks>) -> f64 {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if k < last {
                for (j, v) in next.iter_mut().enumerate() {
                    *v = v.max(0.0);
                    if let Some(m) = masks {
                        *v *= m[k][j];
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    fn forward_traced(&self, x: &[f64], masks: Option<&Masks>) -> Trace {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut cur = x.to_vec();
        let mut output = 0.0;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(&cur, &mut z);
            inputs.push(cur);
            if k < last {
                let mut a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
                if let Some(m) = masks {
                    a.iter_mut().zip(&m[k]).for_each(|(v, s)| *v *= s);
                }
                pre.push(z);
                cur = a;
            } else {
                output = z[0];
                cur = Vec::new();
            }
        }
        Trace {
            inputs,
            pre,
            output,
        }
    }

    /// Accumulates `scale * d(output)/d(params)` into `grad` for one example.
    fn backward(&self, trace: &Trace, masks: Option<&Masks>, scale: f64, grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        // Gradient w.r.t. the current layer's outputs.
        let mut delta = vec![scale];
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.inputs[k];
            let off = offsets[k];
            let (gw, rest) = grad[off..off + layer.param_count()].split_at_mut(layer.weights.len());
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                rest[o] += d;
            }
            if k == 0 {
                break;
            }
            // Back through layer k's weights, then dropout and ReLU of layer k-1.
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
            let z = &trace.pre[k - 1];
            for (j, p) in prev.iter_mut().enumerate() {
                if z[j] <= 0.0 {
                    *p = 0.0;
                } else if let Some(m) = masks {
                    *p *= m[k - 1][j];
                }
            }
            delta = prev;
        }
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.param_count();
        }
        offsets
    }

    /// Mean squared error over the batch and its gradient w.r.t. the flat
    /// parameter vector. `masks[i]` applies to example `i`.
    pub fn mse_and_gradient(
        &self,
        xs: &[&[f64]],
        ys: &[f64],
        masks: Option<&[Masks]>,
    ) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
            let m = masks.map(|ms| &ms[i]);
            let trace = self.forward_traced(x, m);
            let r = trace.output - y;
            loss += r * r;
            self.backward(&trace, m, 2.0 * r / n, &mut grad);
        }
        (loss / n, grad)
    }

    pub fn mse(&self, xs: &[&[f64]], ys: &[f64]) -> f64 {
        let sse: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (self.forward(x, None) - y).powi(2))
            .sum();
        sse / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }

    fn finite_difference_check(net: &Network, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let (_, grad) = net.mse_and_gradient(&refs, ys, None);
        let base = net.params();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..base.len() {
            let mut probe = net.clone();
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p);
            let up = probe.mse(&refs, ys);
            p[i] -= 2.0 * h;
            probe.set_params(&p);
            let down = probe.mse(&refs, ys);
            let fd = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(grad[i], fd));
        }
        worst
    }

    #[test]
    fn five_parameter_gradient_check() {
        // 2 inputs -> 1 hidden ReLU unit -> 1 output: 2+1 + 1+1 = 5 parameters.
        let mut net = Network::he(2, &[1], &mut seeded(3));
        net.set_params(&[0.7, -0.4, 0.3, 1.3, -0.2]);
        assert_eq!(net.param_count(), 5);
        let xs = vec![
            vec![1.0, 0.5],
            vec![0.2, -0.3],
            vec![-0.5, -1.0],
            vec![2.0, 1.0],
        ];
        let ys = [0.3, 1.2, -0.1, 2.0];
        let err = finite_difference_check(&net, &xs, &ys);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn deeper_gradient_check() {
        let net = Network::he(3, &[4, 3], &mut seeded(11));
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..3).map(|j| ((i * 3 + j) as f64 * 0.37).sin()).collect())
            .collect();
        let ys = [0.0, 1.0, 2.0, 1.0, 0.5, 1.5];
        let err = finite_difference_check(&net, &xs, &ys);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn dropout_gradient_matches_masked_forward() {
        let net = Network::he(3, &[5], &mut seeded(5));
        let masks = net.draw_masks(0.5, &mut seeded(9)).unwrap();
        let x = [0.4, -0.2, 0.9];
        let (_, grad) = net.mse_and_gradient(&[&x], &[1.0], Some(std::slice::from_ref(&masks)));
        let base = net.params();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut probe = net.clone();
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p);
            let up = (probe.forward(&x, Some(&masks)) - 1.0).powi(2);
            p[i] -= 2.0 * h;
            probe.set_params(&p);
            let down = (probe.forward(&x, Some(&masks)) - 1.0).powi(2);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() < 1e-6,
                "param {i}: {} vs {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn param_layout_round_trips() {
        let mut net = Network::he(16, &[64, 64], &mut seeded(1));
        assert_eq!(net.param_count(), 16 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
        let p: Vec<f64> = (0..net.param_count()).map(|i| i as f64).collect();
        net.set_params(&p);
        assert_eq!(net.params(), p);
        assert_eq!(
            net.decay_mask().iter().filter(|&&d| !d).count(),
            64 + 64 + 1
        );
    }
}
