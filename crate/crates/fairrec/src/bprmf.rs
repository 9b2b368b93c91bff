//! Bayesian personalized ranking matrix factorization.
//!
//! Pairwise SGD over (user, positive, negative) triplets minimizing
//! `-ln sigma(<u, i - j>)`. Instead of weight decay, after every batch each
//! factor matrix whose largest absolute entry exceeds 1 is divided by that
//! entry (max-norm normalization). Updates are sequential within a batch
//! for determinism.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Interactions;
use crate::numerics::{stream_rng, Matrix};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BprModel {
    pub user_factors: Matrix,
    pub item_factors: Matrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BprTrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl BprTrainConfig {
    /// Phase-1 defaults: dim 64, 10 epochs, batch 8192, lr 0.001.
    pub fn phase1(seed: u64) -> Self {
        BprTrainConfig {
            dim: 64,
            epochs: 10,
            batch_size: 8192,
            lr: 0.001,
            seed,
        }
    }

    /// Phase-2 keeps the baseline settings but dim 200.
    pub fn phase2(seed: u64) -> Self {
        BprTrainConfig {
            dim: 200,
            ..Self::phase1(seed)
        }
    }
}

impl BprModel {
    pub fn init(n_users: usize, n_items: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let mut user_factors = Matrix::zeros(n_users, dim);
        let mut item_factors = Matrix::zeros(n_items, dim);
        for v in user_factors.data_mut() {
            *v = rng.gen_range(-scale..scale);
        }
        for v in item_factors.data_mut() {
            *v = rng.gen_range(-scale..scale);
        }
        BprModel {
            user_factors,
            item_factors,
        }
    }

    pub fn score(&self, u: usize, i: usize) -> f64 {
        self.user_factors
            .row(u)
            .iter()
            .zip(self.item_factors.row(i))
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// u uniform over users, i uniform over u's row, j uniform over items not in
/// u's row (rejection sampling). A user interacting with every item is
/// skipped and resampled.
pub fn sample_triplet(train: &Interactions, rng: &mut impl Rng) -> (usize, u32, u32) {
    loop {
        let u = rng.gen_range(0..train.n_users());
        let row = train.row(u);
        if row.is_empty() || row.len() == train.n_items() {
            continue;
        }
        let i = row[rng.gen_range(0..row.len())];
        loop {
            let j = rng.gen_range(0..train.n_items()) as u32;
            if !train.contains(u, j) {
                return (u, i, j);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    // stable for large |x|
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigma(x)` computed via a numerically stable log-sigmoid.
pub fn bpr_loss(score_diff: f64) -> f64 {
    if score_diff >= 0.0 {
        (1.0 + (-score_diff).exp()).ln()
    } else {
        -score_diff + (1.0 + score_diff.exp()).ln()
    }
}

/// One batch of sequential SGD updates followed by the max-norm rule.
/// Returns the mean batch loss.
pub fn bpr_step(model: &mut BprModel, triplets: &[(usize, u32, u32)], lr: f64) -> Result<f64> {
    let dim = model.user_factors.cols();
    let mut loss_sum = 0.0;
    for &(u, i, j) in triplets {
        let (uf, it) = (&model.user_factors, &model.item_factors);
        let s: f64 = (0..dim)
            .map(|d| uf.row(u)[d] * (it.row(i as usize)[d] - it.row(j as usize)[d]))
            .sum();
        loss_sum += bpr_loss(s);
        let g = sigmoid(-s); // d(-ln sigma(s))/ds = -sigma(-s)
        let u_old: Vec<f64> = model.user_factors.row(u).to_vec();
        let diff: Vec<f64> = (0..dim)
            .map(|d| {
                model.item_factors.row(i as usize)[d] - model.item_factors.row(j as usize)[d]
            })
            .collect();
        {
            let ur = model.user_factors.row_mut(u);
            for d in 0..dim {
                ur[d] += lr * g * diff[d];
            }
        }
        {
            let ir = model.item_factors.row_mut(i as usize);
            for d in 0..dim {
                ir[d] += lr * g * u_old[d];
            }
        }
        {
            let jr = model.item_factors.row_mut(j as usize);
            for d in 0..dim {
                jr[d] -= lr * g * u_old[d];
            }
        }
    }
    for m in [&mut model.user_factors, &mut model.item_factors] {
        let max = m.max_abs();
        if !max.is_finite() {
            return Err(Error::NonFinite("bpr factor matrix".into()));
        }
        if max > 1.0 {
            m.scale(1.0 / max);
        }
    }
    Ok(loss_sum / triplets.len().max(1) as f64)
}

/// `epochs * max(1, n_interactions / batch)` batches of sampled triplets.
pub fn train_bpr(train: &Interactions, cfg: &BprTrainConfig) -> Result<BprModel> {
    if train.n_users() == 0 || train.n_interactions() == 0 {
        return Err(Error::Invalid("empty training set".into()));
    }
    let mut init_rng = stream_rng(cfg.seed, "bpr-init", 0);
    let mut model = BprModel::init(train.n_users(), train.n_items(), cfg.dim, &mut init_rng);
    let batches_per_epoch = (train.n_interactions() / cfg.batch_size).max(1);
    for epoch in 0..cfg.epochs {
        let mut rng = stream_rng(cfg.seed, "bpr-epoch", epoch as u64);
        for _ in 0..batches_per_epoch {
            let triplets: Vec<(usize, u32, u32)> = (0..cfg.batch_size)
                .map(|_| sample_triplet(train, &mut rng))
                .collect();
            bpr_step(&mut model, &triplets, cfg.lr)?;
        }
        debug_assert!(model.user_factors.max_abs() <= 1.0);
        debug_assert!(model.item_factors.max_abs() <= 1.0);
    }
    Ok(model)
}

/// Most probable unseen item for `u`; ties go to the lower index.
pub fn bpr_top1(model: &BprModel, u: usize, train: &Interactions) -> u32 {
    let mut best = None::<(f64, u32)>;
    for i in 0..train.n_items() {
        if train.contains(u, i as u32) {
            continue;
        }
        let s = model.score(u, i);
        match best {
            Some((bs, _)) if bs >= s => {}
            _ => best = Some((s, i as u32)),
        }
    }
    best.expect("user interacts with every item").1
}
