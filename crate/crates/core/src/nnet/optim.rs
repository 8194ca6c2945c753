//! AdamW with the AMSGrad max-second-moment variant, plus the cosine
//! learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Optimizer hyperparameters. Weight decay is decoupled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Per-parameter moments for one block of tensors.
///
/// `vhat` is the elementwise running maximum of the second moment; it never
/// decreases, which is what AMSGrad adds over Adam.
#[derive(Debug, Clone)]
pub struct OptimizerState<F> {
    cfg: AdamConfig,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    vhat: Vec<Vec<F>>,
    step: u64,
}

impl<F: Real> OptimizerState<F> {
    /// Builds zeroed moments matching the given tensor list.
    pub fn new(cfg: AdamConfig, tensors: &[&[F]]) -> Self {
        let zeros: Vec<Vec<F>> = tensors.iter().map(|t| vec![F::zero(); t.len()]).collect();
        OptimizerState {
            cfg,
            m: zeros.clone(),
            v: zeros.clone(),
            vhat: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// Read-only view of the max second moments (for invariant tests).
    pub fn vhat(&self) -> &[Vec<F>] {
        &self.vhat
    }

    /// One AdamW/AMSGrad update of `params` given matching `grads`.
    ///
    /// Decoupled weight decay multiplies parameters by `1 - lr * wd` before
    /// the moment update is applied.
    pub fn adamw_step(
        &mut self,
        params: &mut [&mut [F]],
        grads: &[&[F]],
        lr: f64,
    ) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let beta1 = F::of(self.cfg.beta1);
        let beta2 = F::of(self.cfg.beta2);
        let eps = F::of(self.cfg.eps);
        let lr_f = F::of(lr);
        let decay = F::one() - lr_f * F::of(self.cfg.weight_decay);
        let bias1 = F::one() - beta1.powi(t);
        let bias2_sqrt = (F::one() - beta2.powi(t)).sqrt();

        for ((param, grad), ((m, v), vhat)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()).zip(self.vhat.iter_mut()))
        {
            assert_eq!(param.len(), m.len(), "tensor shape changed under optimizer");
            assert_eq!(grad.len(), m.len(), "gradient shape mismatch");
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (F::one() - beta1) * g;
                v[i] = beta2 * v[i] + (F::one() - beta2) * g * g;
                if v[i] > vhat[i] {
                    vhat[i] = v[i];
                }
                let m_hat = m[i] / bias1;
                let denom = vhat[i].sqrt() / bias2_sqrt + eps;
                let update = lr_f * m_hat / denom;
                let next = param[i] * decay - update;
                if !next.is_finite() {
                    return Err(Error::numerical(format!(
                        "non-finite parameter after AdamW step {t}"
                    )));
                }
                param[i] = next;
            }
        }
        Ok(())
    }
}

/// Plain gradient step `p -= lr * g`, used by the full-batch descent mode
/// where updates must match the block-gradient analysis exactly.
pub fn sgd_step<F: Real>(params: &mut [&mut [F]], grads: &[&[F]], lr: f64) -> Result<()> {
    let lr_f = F::of(lr);
    for (param, grad) in params.iter_mut().zip(grads) {
        assert_eq!(param.len(), grad.len(), "gradient shape mismatch");
        for (p, &g) in param.iter_mut().zip(grad.iter()) {
            let next = *p - lr_f * g;
            if !next.is_finite() {
                return Err(Error::numerical("non-finite parameter after SGD step"));
            }
            *p = next;
        }
    }
    Ok(())
}

/// Cosine decay: `lr0 * ((1 - alpha) + alpha * (1 + cos(pi t / t_total)) / 2)`.
///
/// Starts at `lr0`, ends at `(1 - alpha) * lr0`; `alpha` is the decaying
/// fraction of the rate.
pub fn cosine_lr(t: usize, t_total: usize, lr0: f64, alpha: f64) -> f64 {
    if t_total == 0 {
        return lr0;
    }
    let frac = (t.min(t_total) as f64) / (t_total as f64);
    lr0 * ((1.0 - alpha) + alpha * (1.0 + (std::f64::consts::PI * frac).cos()) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        let mut p = vec![1.0f64];
        let g = vec![1.0f64];
        let mut st = OptimizerState::new(AdamConfig::default(), &[&p]);
        st.adamw_step(&mut [&mut p], &[&g], 0.1).unwrap();
        // Bias-corrected m_hat = 1, v_hat-corrected denom = 1 + eps.
        assert!((p[0] - 0.9).abs() < 1e-6, "param {}", p[0]);
    }

    #[test]
    fn zero_gradient_zero_decay_is_identity() {
        let mut p = vec![0.3f64, -1.2, 4.0];
        let orig = p.clone();
        let g = vec![0.0f64; 3];
        let mut st = OptimizerState::new(AdamConfig::default(), &[&p]);
        for _ in 0..5 {
            st.adamw_step(&mut [&mut p], &[&g], 0.01).unwrap();
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn amsgrad_vhat_is_monotone() {
        let mut rng = crate::signal::RngSeed::new(8).rng();
        let mut p = vec![0.0f64; 4];
        let mut st = OptimizerState::new(AdamConfig::default(), &[&p]);
        let mut prev = vec![0.0f64; 4];
        for _ in 0..100 {
            let g: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            st.adamw_step(&mut [&mut p], &[&g], 0.001).unwrap();
            for (a, b) in st.vhat()[0].iter().zip(&prev) {
                assert!(a >= b, "vhat decreased");
            }
            prev = st.vhat()[0].clone();
        }
    }

    #[test]
    fn decoupled_weight_decay_shrinks_without_gradient() {
        let mut p = vec![2.0f64];
        let g = vec![0.0f64];
        let cfg = AdamConfig {
            weight_decay: 0.1,
            ..AdamConfig::default()
        };
        let mut st = OptimizerState::new(cfg, &[&p]);
        st.adamw_step(&mut [&mut p], &[&g], 0.5).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.5 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn cosine_schedule_endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 100, 0.001, 0.9), 0.001);
        assert!((cosine_lr(100, 100, 0.001, 0.9) - 0.0001).abs() < 1e-12);
        assert!((cosine_lr(50, 100, 0.001, 0.9) - 0.00055).abs() < 1e-12);
        // Clamped past the horizon; degenerate horizon returns lr0.
        assert!((cosine_lr(150, 100, 0.001, 0.9) - 0.0001).abs() < 1e-12);
        assert_eq!(cosine_lr(3, 0, 0.002, 0.9), 0.002);
    }
}
