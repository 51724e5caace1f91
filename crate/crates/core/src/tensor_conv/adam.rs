//! Adam with bias correction, per-epoch exponential learning-rate decay and an
//! L2 weight penalty `(lambda / 2) * sum(w^2)` folded into the gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate once per epoch.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty coefficient on decayed parameter groups.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2.5e-4,
            lr_decay: 0.995,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    /// Whether the L2 penalty applies to each group (weights yes, biases no).
    decayed: Vec<bool>,
    step: u64,
    epoch: usize,
}

impl AdamState {
    /// One moment buffer per parameter group; `groups` gives `(len, decayed)`.
    pub fn new(config: AdamConfig, groups: &[(usize, bool)]) -> Self {
        Self {
            config,
            first: groups.iter().map(|&(n, _)| vec![0.0; n]).collect(),
            second: groups.iter().map(|&(n, _)| vec![0.0; n]).collect(),
            decayed: groups.iter().map(|&(_, d)| d).collect(),
            step: 0,
            epoch: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Learning rate in effect for the current epoch.
    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate * self.config.lr_decay.powi(self.epoch as i32)
    }

    pub fn end_epoch(&mut self) {
        self.epoch += 1;
    }

    pub fn first_moment(&self, group: usize) -> &[f64] {
        &self.first[group]
    }

    /// Applies one update to every group in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer has {} groups, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.len() != p.len() {
                return Err(Error::ShapeMismatch(format!("group {i} length mismatch")));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let lr = self.learning_rate();
        for (gi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let decay = if self.decayed[gi] { c.weight_decay } else { 0.0 };
            let m = &mut self.first[gi];
            let v = &mut self.second[gi];
            for k in 0..p.len() {
                let grad = g[k] + decay * p[k];
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grad * grad;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                p[k] -= lr * mhat / (vhat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = AdamState::new(AdamConfig::default(), &[(3, true)]);
        let mut p = vec![0.5, -1.0, 2.0];
        let before = p.clone();
        for _ in 0..5 {
            s.step(&mut [&mut p], &[&[0.0; 3]]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(cfg, &[(3, false)]);
        let g = [0.3, -2.0, 1e-3];
        let mut p = vec![1.0, 1.0, 1.0];
        s.step(&mut [&mut p], &[&g]).unwrap();
        for k in 0..3 {
            let expected = 1.0 - cfg.learning_rate * g[k] / (g[k].abs() + cfg.eps);
            assert!((p[k] - expected).abs() < 1e-15, "{k}: {} vs {expected}", p[k]);
        }
    }

    #[test]
    fn learning_rate_decays_per_epoch() {
        let mut s = AdamState::new(AdamConfig::default(), &[(1, false)]);
        for _ in 0..10 {
            s.end_epoch();
        }
        assert!((s.learning_rate() - 2.5e-4 * 0.995f64.powi(10)).abs() < 1e-18);
    }

    #[test]
    fn weight_decay_only_on_decayed_groups() {
        let cfg = AdamConfig {
            weight_decay: 0.1,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(cfg, &[(1, true), (1, false)]);
        let mut w = vec![2.0];
        let mut b = vec![2.0];
        s.step(&mut [&mut w, &mut b], &[&[0.0], &[0.0]]).unwrap();
        assert!(w[0] < 2.0);
        assert_eq!(b[0], 2.0);
    }

    #[test]
    fn group_mismatch_is_an_error() {
        let mut s = AdamState::new(AdamConfig::default(), &[(2, true)]);
        let mut p = vec![0.0; 3];
        assert!(s.step(&mut [&mut p], &[&[0.0; 3]]).is_err());
    }
}
