use serde::{Deserialize, Serialize};

/// Adam moment coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam over a flat parameter vector with decoupled weight decay: each step
/// first shrinks parameters by `1 - lr * weight_decay`, then applies the
/// bias-corrected moment update.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64, weight_decay: f64, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            lr,
            weight_decay,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t);
        let bc2 = 1.0 - beta2.powi(self.t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] * decay - self.lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = vec![0.3, -1.2, 4.0];
        let before = p.clone();
        let mut opt = Adam::new(3, 1e-3, 0.0, AdamConfig::default());
        for _ in 0..10 {
            opt.step(&mut p, &[0.0; 3]);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut p = vec![0.3, -1.2];
        let before = p.clone();
        let mut opt = Adam::new(2, 0.0, 1e-5, AdamConfig::default());
        opt.step(&mut p, &[1.0, -2.0]);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // with bias correction the first update is lr * g / (|g| + eps)
        let mut p = vec![1.0, 1.0];
        let mut opt = Adam::new(2, 0.01, 0.0, AdamConfig::default());
        opt.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - (1.0 - 0.01 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
        assert!((p[1] - (1.0 + 0.01 * 0.5 / (0.5 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let mut p = vec![2.0];
        let mut opt = Adam::new(1, 0.1, 0.5, AdamConfig::default());
        opt.step(&mut p, &[0.0]);
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![5.0, -3.0];
        let mut opt = Adam::new(2, 0.05, 0.0, AdamConfig::default());
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 2.0)];
            opt.step(&mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 2.0).abs() < 1e-3);
    }
}
