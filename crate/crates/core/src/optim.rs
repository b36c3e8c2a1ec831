//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3.5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Moment estimates for a flat list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    /// `shapes[i]` is the length of the i-th parameter slice.
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(Adam {
            config,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        })
    }

    pub fn for_encoder(config: AdamConfig, encoder: &Encoder) -> Result<Self> {
        let shapes: Vec<usize> = encoder
            .layers()
            .iter()
            .flat_map(|l| [l.weight.as_slice().len(), l.bias.len()])
            .collect();
        Self::new(config, &shapes)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// `θ ← θ(1 − lr·wd)` then the bias-corrected Adam update.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {k}: expected length {}, got params {} grads {}",
                    self.m[k].len(),
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let decay = 1.0 - c.lr * c.weight_decay;
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] = p[i] * decay - c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }

    pub fn step_encoder(&mut self, encoder: &mut Encoder, grads: &Gradients) -> Result<()> {
        let flat: Vec<&[f64]> = grads
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect();
        let mut params = encoder.param_slices_mut();
        self.step(&mut params, &flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_decay() -> AdamConfig {
        AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_noop() {
        let mut opt = Adam::new(no_decay(), &[3]).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        opt.step(&mut [&mut p], &[&[0.0; 3]]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = no_decay();
        let mut opt = Adam::new(cfg, &[3]).unwrap();
        let mut p = vec![0.0; 3];
        opt.step(&mut [&mut p], &[&[2.0, -0.3, 1e-3]]).unwrap();
        for (v, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((v - s * cfg.lr).abs() < 1e-4 * cfg.lr, "{v}");
        }
    }

    #[test]
    fn decay_alone_shrinks_params() {
        let cfg = AdamConfig::default();
        let mut opt = Adam::new(cfg, &[2]).unwrap();
        let mut p = vec![2.0, -4.0];
        opt.step(&mut [&mut p], &[&[0.0, 0.0]]).unwrap();
        let f = 1.0 - cfg.lr * cfg.weight_decay;
        assert_eq!(p, vec![2.0 * f, -4.0 * f]);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let cfg = AdamConfig {
            lr: 0.05,
            ..no_decay()
        };
        let mut opt = Adam::new(cfg, &[2]).unwrap();
        let mut p = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            opt.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn rejects_shape_mismatch_and_bad_config() {
        let mut opt = Adam::new(AdamConfig::default(), &[2]).unwrap();
        let mut p = vec![0.0; 3];
        assert!(matches!(opt.step(&mut [&mut p], &[&[0.0; 3]]), Err(Error::ShapeMismatch(_))));
        assert_eq!(opt.steps_taken(), 0);
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(Adam::new(bad, &[1]).is_err());
    }
}
