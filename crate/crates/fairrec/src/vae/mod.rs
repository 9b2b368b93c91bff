//! Multinomial VAE for collaborative filtering, in user- or item-based
//! orientation, with beta-weighted KL, a group-fairness regularizer on the
//! per-row reconstruction terms, and per-popularity-group training.

mod loss;
mod model;
mod score;
mod train;

pub use loss::{
    batch_loss, elbo_loss, fairness_penalty, kl_to_standard_normal, multinomial_log_likelihood,
    regularized_loss, reparameterize, BatchLoss,
};
pub use model::{Orientation, VaeDims, VaeModel, VaeParams};
pub use score::{score_items_for_user, top_k, ItemScores};
pub use train::{
    train, train_grouped, EnsembleSweeps, EpochTrace, GroupModel, GroupedTrainConfig,
    GroupedVaeEnsemble, VaeTrainConfig,
};
