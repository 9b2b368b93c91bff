//! Leave-one-out fold splitting.

use rand::Rng;

use super::Interactions;
use crate::numerics::stream_rng;
use crate::{Error, Result};

/// One leave-one-out fold: exactly one held-out item per user, removed from
/// the training rows.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EvalSplit {
    pub fold_id: u32,
    /// Held-out item per user index.
    pub held_out: Vec<u32>,
    pub train: Interactions,
}

/// Masks one uniformly random item per user. Randomness comes from a stream
/// derived from `(seed, fold_id)`, so folds are independently reproducible.
pub fn leave_one_out_split(data: &Interactions, fold_id: u32, seed: u64) -> Result<EvalSplit> {
    let mut rng = stream_rng(seed, "loo-fold", fold_id as u64);
    split_with(data, fold_id, |len| rng.gen_range(0..len))
}

/// Deterministic core: `draw(len)` picks the within-row index to hold out.
pub fn split_with(
    data: &Interactions,
    fold_id: u32,
    mut draw: impl FnMut(usize) -> usize,
) -> Result<EvalSplit> {
    let mut held_out = Vec::with_capacity(data.n_users());
    let mut rows = Vec::with_capacity(data.n_users());
    for u in 0..data.n_users() {
        let row = data.row(u);
        if row.len() < 2 {
            return Err(Error::Invalid(format!(
                "user {u} has {} interactions; leave-one-out needs at least 2",
                row.len()
            )));
        }
        let k = draw(row.len());
        held_out.push(row[k]);
        let mut train_row = row.to_vec();
        train_row.remove(k);
        rows.push(train_row);
    }
    Ok(EvalSplit {
        fold_id,
        held_out,
        train: Interactions::new(data.n_users(), data.n_items(), rows)?,
    })
}
