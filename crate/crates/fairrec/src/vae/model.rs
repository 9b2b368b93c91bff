use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{dropout_mask, Matrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Input row = one user's interactions over items.
    UserBased,
    /// Input row = one item's interactions over users.
    ItemBased,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeDims {
    pub input: usize,
    pub hidden: usize,
    pub latent: usize,
}

/// Encoder/decoder weights. Encoder: input -> tanh hidden -> linear mu and
/// log-variance heads. Decoder: latent -> tanh hidden -> input logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeParams {
    pub dims: VaeDims,
    pub enc_w1: Matrix,
    pub enc_b1: Vec<f64>,
    pub w_mu: Matrix,
    pub b_mu: Vec<f64>,
    pub w_logvar: Matrix,
    pub b_logvar: Vec<f64>,
    pub dec_w1: Matrix,
    pub dec_b1: Vec<f64>,
    pub dec_w2: Matrix,
    pub dec_b2: Vec<f64>,
}

pub(crate) const BLOCK_NAMES: [&str; 10] = [
    "enc_w1", "enc_b1", "w_mu", "b_mu", "w_logvar", "b_logvar", "dec_w1", "dec_b1", "dec_w2",
    "dec_b2",
];

impl VaeParams {
    pub fn zeros(dims: VaeDims) -> Self {
        let VaeDims {
            input,
            hidden,
            latent,
        } = dims;
        VaeParams {
            dims,
            enc_w1: Matrix::zeros(input, hidden),
            enc_b1: vec![0.0; hidden],
            w_mu: Matrix::zeros(hidden, latent),
            b_mu: vec![0.0; latent],
            w_logvar: Matrix::zeros(hidden, latent),
            b_logvar: vec![0.0; latent],
            dec_w1: Matrix::zeros(latent, hidden),
            dec_b1: vec![0.0; hidden],
            dec_w2: Matrix::zeros(hidden, input),
            dec_b2: vec![0.0; input],
        }
    }

    /// Symmetric uniform init scaled by 1/sqrt(fan-in); biases zero.
    pub fn init(dims: VaeDims, rng: &mut impl Rng) -> Self {
        let mut p = VaeParams::zeros(dims);
        for (w, fan_in) in [
            (&mut p.enc_w1, dims.input),
            (&mut p.w_mu, dims.hidden),
            (&mut p.w_logvar, dims.hidden),
            (&mut p.dec_w1, dims.latent),
            (&mut p.dec_w2, dims.hidden),
        ] {
            let scale = 1.0 / (fan_in as f64).sqrt();
            for v in w.data_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
        p
    }

    pub fn block_lens(&self) -> Vec<usize> {
        self.blocks().iter().map(|b| b.len()).collect()
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.enc_w1.data(),
            &self.enc_b1,
            self.w_mu.data(),
            &self.b_mu,
            self.w_logvar.data(),
            &self.b_logvar,
            self.dec_w1.data(),
            &self.dec_b1,
            self.dec_w2.data(),
            &self.dec_b2,
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.enc_w1.data_mut(),
            &mut self.enc_b1,
            self.w_mu.data_mut(),
            &mut self.b_mu,
            self.w_logvar.data_mut(),
            &mut self.b_logvar,
            self.dec_w1.data_mut(),
            &mut self.dec_b1,
            self.dec_w2.data_mut(),
            &mut self.dec_b2,
        ]
    }

    /// Element-wise accumulate (for chunked gradient reduction).
    pub fn add(&mut self, other: &VaeParams) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn from_flat(dims: VaeDims, flat: &[f64]) -> Result<Self> {
        let mut p = VaeParams::zeros(dims);
        let total: usize = p.block_lens().iter().sum();
        if flat.len() != total {
            return Err(Error::Shape(format!(
                "flat vector length {} != parameter count {total}",
                flat.len()
            )));
        }
        let mut off = 0;
        for b in p.blocks_mut() {
            b.copy_from_slice(&flat[off..off + b.len()]);
            off += b.len();
        }
        Ok(p)
    }
}

/// A trained VAE plus the hyperparameters it was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    pub orientation: Orientation,
    pub params: VaeParams,
    pub beta: f64,
    pub gamma: f64,
    pub dropout: f64,
}

impl VaeModel {
    /// Encoder pass: `(mu, logvar)`. In training mode a fresh dropout mask
    /// is drawn from `rng` and applied to the input.
    pub fn encode(
        &self,
        x: &[f64],
        rng: &mut impl Rng,
        training: bool,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.params.dims.input {
            return Err(Error::Shape(format!(
                "input length {} != model input dim {}",
                x.len(),
                self.params.dims.input
            )));
        }
        let mask = if training && self.dropout > 0.0 {
            Some(dropout_mask(x.len(), self.dropout, rng))
        } else {
            None
        };
        let cache = super::loss::forward_encoder(&self.params, x, mask.as_deref());
        Ok((cache.mu, cache.logvar))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::stream_rng;

    #[test]
    fn flat_round_trip() {
        let dims = VaeDims {
            input: 5,
            hidden: 3,
            latent: 2,
        };
        let mut rng = stream_rng(1, "vae-init", 0);
        let p = VaeParams::init(dims, &mut rng);
        let q = VaeParams::from_flat(dims, &p.flatten()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_params_encode_to_zero() {
        let model = VaeModel {
            orientation: Orientation::UserBased,
            params: VaeParams::zeros(VaeDims {
                input: 4,
                hidden: 3,
                latent: 2,
            }),
            beta: 1.0,
            gamma: 0.0,
            dropout: 0.0,
        };
        let mut rng = stream_rng(1, "enc", 0);
        let (mu, logvar) = model.encode(&[0.0; 4], &mut rng, false).unwrap();
        assert_eq!(mu, vec![0.0, 0.0]);
        assert_eq!(logvar, vec![0.0, 0.0]);
    }

    #[test]
    fn encode_rejects_wrong_length() {
        let model = VaeModel {
            orientation: Orientation::UserBased,
            params: VaeParams::zeros(VaeDims {
                input: 4,
                hidden: 3,
                latent: 2,
            }),
            beta: 1.0,
            gamma: 0.0,
            dropout: 0.0,
        };
        let mut rng = stream_rng(1, "enc", 1);
        assert!(model.encode(&[0.0; 5], &mut rng, false).is_err());
    }

    #[test]
    fn eval_encode_is_deterministic() {
        let dims = VaeDims {
            input: 6,
            hidden: 4,
            latent: 3,
        };
        let mut rng = stream_rng(2, "vae-init", 0);
        let model = VaeModel {
            orientation: Orientation::UserBased,
            params: VaeParams::init(dims, &mut rng),
            beta: 1.0,
            gamma: 0.0,
            dropout: 0.2,
        };
        let x = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let mut r1 = stream_rng(3, "a", 0);
        let mut r2 = stream_rng(4, "b", 9);
        assert_eq!(
            model.encode(&x, &mut r1, false).unwrap(),
            model.encode(&x, &mut r2, false).unwrap()
        );
    }
}
