//! Adaptive-moment optimizer.

use crate::params::ParameterSet;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParameterSet) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. `grads` must line up with `params`.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &[Tensor]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.tensors_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.shape(), g.shape(), "gradient shape");
            let (p, g, m, v) = (p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), v.as_mut_slice());
            for i in 0..p.len() {
                let gi = g[i];
                if gi == 0.0 && m[i] == 0.0 && v[i] == 0.0 {
                    // the update below would be exactly zero
                    continue;
                }
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> ParameterSet {
        let mut p = ParameterSet::new(0);
        p.add("w", Tensor::scalar(v));
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = one(0.7);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        opt.step(&mut p, &[Tensor::scalar(0.0)]);
        assert_eq!(p, one(0.7));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one(1.0);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        opt.step(&mut p, &[Tensor::scalar(3.0)]);
        let moved = 1.0 - p.tensors()[0].item();
        assert!((moved - 1e-3).abs() < 1e-9, "{moved}");
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = one(1.0);
            let mut opt = Adam::new(AdamConfig::default(), &p);
            for g in [0.5, -0.2] {
                opt.step(&mut p, &[Tensor::scalar(g)]);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
