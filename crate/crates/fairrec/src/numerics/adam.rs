use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adam hyperparameters; defaults follow the usual lr 0.001 / 0.9 / 0.999 /
/// 1e-8 setting.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper {
            lr,
            ..Default::default()
        }
    }
}

/// First/second moment accumulators for a fixed set of parameter blocks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    hyper: AdamHyper,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(hyper: AdamHyper, block_lens: &[usize]) -> Self {
        AdamState {
            hyper,
            step: 0,
            m: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update across all blocks. `names` is used
    /// only for error reporting on non-finite gradients.
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        names: &[&str],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam expects {} blocks, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (b, g) in grads.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                let name = names.get(b).copied().unwrap_or("<unnamed>");
                return Err(Error::NonFinite(format!("gradient block `{name}`")));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powf(t);
        let bc2 = 1.0 - h.beta2.powf(t);
        for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[b].len() {
                return Err(Error::Shape(format!("adam block {b} length mismatch")));
            }
            let (m, v) = (&mut self.m[b], &mut self.v[b]);
            for i in 0..p.len() {
                m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
                v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_recurrence() {
        // t=1, g=1: m_hat=1, v_hat=1, delta = -lr/(1+eps)
        let mut state = AdamState::new(AdamHyper::default(), &[1]);
        let mut p = vec![0.0];
        state.step(&mut [&mut p], &[&[1.0]], &["w"]).unwrap();
        let expected = -0.001 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-15, "{} vs {expected}", p[0]);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut state = AdamState::new(AdamHyper::default(), &[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        state.step(&mut [&mut p], &[&[0.0, 0.0, 0.0]], &["w"]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn identical_calls_are_deterministic() {
        let run = || {
            let mut state = AdamState::new(AdamHyper::default(), &[2]);
            let mut p = vec![0.3, -0.7];
            for _ in 0..5 {
                state.step(&mut [&mut p], &[&[0.1, -0.2]], &["w"]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut state = AdamState::new(AdamHyper::default(), &[1, 1]);
        let (mut a, mut b) = (vec![0.0], vec![0.0]);
        let err = state
            .step(&mut [&mut a, &mut b], &[&[0.0], &[f64::NAN]], &["enc", "dec"])
            .unwrap_err();
        assert!(err.to_string().contains("dec"), "{err}");
    }
}
