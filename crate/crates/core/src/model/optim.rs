/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamW {
    pub fn new(n_params: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    /// One update with learning rate `lr * lr_scale`. Decay applies only where
    /// `decay[i]` is set.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], decay: &[bool], lr_scale: f64) {
        self.t += 1;
        let lr = self.lr * lr_scale;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            if decay[i] {
                params[i] -= lr * self.weight_decay * params[i];
            }
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Learning-rate multiplier for the 0-based `step`: linear ramp over the
/// warmup steps, then linear decay to zero at `total`.
pub fn warmup_linear(step: usize, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        (step + 1) as f64 / warmup as f64
    } else if total > warmup {
        ((total - step) as f64 / (total - warmup) as f64).max(0.0)
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        // 100 steps, 10 warmup.
        assert!((warmup_linear(0, 10, 100) - 0.1).abs() < 1e-12);
        assert_eq!(warmup_linear(9, 10, 100), 1.0);
        assert_eq!(warmup_linear(10, 10, 100), 1.0);
        assert!((warmup_linear(55, 10, 100) - 0.5).abs() < 1e-12);
        assert!(warmup_linear(99, 10, 100) > 0.0);
        assert_eq!(warmup_linear(3, 0, 0), 1.0);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // Bias-corrected first step is lr * sign(g) when eps is negligible.
        let mut opt = AdamW::new(2, 0.01, 0.0);
        let mut p = [1.0, -1.0];
        opt.step(&mut p, &[3.0, -0.5], &[true, true], 1.0);
        assert!((p[0] - 0.99).abs() < 1e-8);
        assert!((p[1] + 0.99).abs() < 1e-8);
    }

    #[test]
    fn decay_is_decoupled() {
        let mut opt = AdamW::new(2, 0.1, 0.5);
        let mut p = [2.0, 2.0];
        opt.step(&mut p, &[0.0, 0.0], &[true, false], 1.0);
        assert!((p[0] - 1.9).abs() < 1e-12);
        assert_eq!(p[1], 2.0);
    }
}
