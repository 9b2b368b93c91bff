//! Recommendation scoring.
//!
//! User-based: one forward pass per user yields a softmax over items.
//! Item-based: one forward pass per item yields a softmax over users; the
//! score of item `i` for user `u` is that distribution's coordinate `u`.
//! The item sweep is computed once, item-major, and reused for every user.

use super::loss::forward_encoder;
use super::model::{Orientation, VaeModel};
use crate::dataset::Interactions;
use crate::numerics::{log_softmax, Matrix};
use crate::{exec, Error, Result};

/// Deterministic eval-mode decode of one input row: softmax probabilities
/// over the output dimension, with `z = mu`.
fn decode_probs(model: &VaeModel, x: &[f64]) -> Vec<f64> {
    let p = &model.params;
    let dims = p.dims;
    let enc = forward_encoder(p, x, None);
    let z = enc.mu; // noise-free at inference
    let mut hd = p.dec_b1.clone();
    for l in 0..dims.latent {
        let zl = z[l];
        let w = p.dec_w1.row(l);
        for j in 0..dims.hidden {
            hd[j] += zl * w[j];
        }
    }
    for v in &mut hd {
        *v = v.tanh();
    }
    let mut logits = p.dec_b2.clone();
    for j in 0..dims.hidden {
        let hj = hd[j];
        let w = p.dec_w2.row(j);
        for i in 0..dims.input {
            logits[i] += hj * w[i];
        }
    }
    log_softmax(&logits).iter().map(|v| v.exp()).collect()
}

/// Cached item-based sweep over a subset of the catalog: row `k` holds the
/// softmax-over-users distribution of `items[k]`.
pub struct ItemScores {
    pub items: Vec<u32>,
    probs: Matrix,
}

impl ItemScores {
    /// `train_t` is the item-major (transposed) training matrix.
    pub fn compute(model: &VaeModel, items: &[u32], train_t: &Interactions) -> Result<ItemScores> {
        if model.orientation != Orientation::ItemBased {
            return Err(Error::Invalid("item sweep needs an item-based model".into()));
        }
        let n_users = train_t.n_items();
        if model.params.dims.input != n_users {
            return Err(Error::Shape(format!(
                "model input dim {} != n_users {n_users}",
                model.params.dims.input
            )));
        }
        let rows = exec::map_indices(items.len(), |k| {
            decode_probs(model, &train_t.dense_row(items[k] as usize))
        });
        let mut probs = Matrix::zeros(items.len(), n_users);
        for (k, row) in rows.into_iter().enumerate() {
            probs.row_mut(k).copy_from_slice(&row);
        }
        Ok(ItemScores {
            items: items.to_vec(),
            probs,
        })
    }

    pub fn score(&self, k: usize, user: usize) -> f64 {
        self.probs.get(k, user)
    }

    /// Items of this subset ranked for `user`, seen items excluded, ties
    /// broken toward the lower item index.
    pub fn ranked_for_user(&self, user: usize, train: &Interactions) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = self
            .items
            .iter()
            .enumerate()
            .filter(|(_, &item)| !train.contains(user, item))
            .map(|(k, &item)| (item, self.probs.get(k, user)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}

/// Per-item scores for one user. User-based: softmax over items from the
/// user's decoded row. Already-interacted items are masked to `-inf`.
pub fn score_items_for_user(
    model: &VaeModel,
    user: usize,
    train: &Interactions,
) -> Result<Vec<f64>> {
    if user >= train.n_users() {
        return Err(Error::Invalid(format!(
            "unknown user index {user} (n_users {})",
            train.n_users()
        )));
    }
    match model.orientation {
        Orientation::UserBased => {
            let mut scores = decode_probs(model, &train.dense_row(user));
            for &i in train.row(user) {
                scores[i as usize] = f64::NEG_INFINITY;
            }
            Ok(scores)
        }
        Orientation::ItemBased => {
            let all: Vec<u32> = (0..train.n_items() as u32).collect();
            let sweep = ItemScores::compute(model, &all, &train.transpose())?;
            let mut scores: Vec<f64> = (0..train.n_items())
                .map(|i| sweep.score(i, user))
                .collect();
            for &i in train.row(user) {
                scores[i as usize] = f64::NEG_INFINITY;
            }
            Ok(scores)
        }
    }
}

/// Top-k indices of a masked score vector, ties toward the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..scores.len() as u32)
        .filter(|&i| scores[i as usize].is_finite())
        .collect();
    idx.sort_by(|&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}
