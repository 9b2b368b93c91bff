//! Mini-batch training and the per-popularity-group ensemble.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::batch_loss;
use super::model::{Orientation, VaeDims, VaeModel, VaeParams, BLOCK_NAMES};
use super::score::ItemScores;
use crate::dataset::Interactions;
use crate::grouping::Grouping;
use crate::numerics::{dropout_mask, stream_rng, AdamHyper, AdamState};
use crate::{Error, Result};

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeTrainConfig {
    pub hidden: usize,
    pub latent: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta: f64,
    pub gamma: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl VaeTrainConfig {
    /// Phase-1 defaults: hidden 300, latent 500, 5 epochs, batch 32,
    /// lr 0.001, dropout 0.2.
    pub fn phase1(seed: u64) -> Self {
        VaeTrainConfig {
            hidden: 300,
            latent: 500,
            epochs: 5,
            batch_size: 32,
            lr: 0.001,
            beta: 1.0,
            gamma: 0.0,
            dropout: 0.2,
            seed,
        }
    }

    /// Phase-2 defaults: latent 17, 2 epochs, beta 1e-4, gamma 3e-3.
    pub fn phase2(seed: u64) -> Self {
        VaeTrainConfig {
            hidden: 300,
            latent: 17,
            epochs: 2,
            batch_size: 32,
            lr: 0.001,
            beta: 1e-4,
            gamma: 3e-3,
            dropout: 0.2,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_kl: f64,
    pub mean_fairness: f64,
}

/// Trains one VAE over `examples` (each row is one input vector of width
/// `examples.n_items()`). `fairness` assigns each example row to the group
/// used by the fairness penalty; it is ignored when `gamma` is 0.
pub fn train(
    examples: &Interactions,
    orientation: Orientation,
    fairness: Option<&Grouping>,
    cfg: &VaeTrainConfig,
) -> Result<(VaeModel, Vec<EpochTrace>)> {
    let n = examples.n_users();
    if n == 0 {
        return Err(Error::Invalid("no training rows".into()));
    }
    if let Some(g) = fairness {
        if g.assignment.len() != n {
            return Err(Error::Shape(format!(
                "fairness grouping covers {} rows, training set has {n}",
                g.assignment.len()
            )));
        }
    }
    let dims = VaeDims {
        input: examples.n_items(),
        hidden: cfg.hidden,
        latent: cfg.latent,
    };
    let mut init_rng = stream_rng(cfg.seed, "vae-init", 0);
    let mut params = VaeParams::init(dims, &mut init_rng);
    let mut adam = AdamState::new(AdamHyper::with_lr(cfg.lr), &params.block_lens());

    let batch = cfg.batch_size.max(1);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(cfg.seed, "vae-shuffle", epoch as u64));
        let (mut loss_sum, mut kl_sum, mut fair_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for (b, chunk) in order.chunks(batch).enumerate() {
            let rows: Vec<Vec<f64>> = chunk.iter().map(|&r| examples.dense_row(r)).collect();
            let groups: Option<Vec<usize>> =
                fairness.map(|g| chunk.iter().map(|&r| g.assignment[r]).collect());
            let mut rng = stream_rng(cfg.seed, "vae-batch", (epoch * 1_000_003 + b) as u64);
            let noise: Vec<Vec<f64>> = (0..rows.len())
                .map(|_| {
                    (0..cfg.latent)
                        .map(|_| rng.sample(StandardNormal))
                        .collect()
                })
                .collect();
            let masks: Option<Vec<Vec<f64>>> = (cfg.dropout > 0.0).then(|| {
                rows.iter()
                    .map(|r| dropout_mask(r.len(), cfg.dropout, &mut rng))
                    .collect()
            });
            let out = batch_loss(
                &params,
                &rows,
                &noise,
                masks.as_deref(),
                cfg.beta,
                cfg.gamma,
                groups.as_deref(),
            )
            .map_err(|e| Error::Invalid(format!("epoch {epoch}, batch {b}: {e}")))?;
            adam.step(
                &mut params.blocks_mut(),
                &out.grads.blocks(),
                &BLOCK_NAMES,
            )?;
            loss_sum += out.loss;
            kl_sum += out.mean_kl;
            fair_sum += out.fairness;
            batches += 1;
        }
        trace.push(EpochTrace {
            epoch,
            mean_loss: loss_sum / batches as f64,
            mean_kl: kl_sum / batches as f64,
            mean_fairness: fair_sum / batches as f64,
        });
    }
    Ok((
        VaeModel {
            orientation,
            params,
            beta: cfg.beta,
            gamma: cfg.gamma,
            dropout: cfg.dropout,
        },
        trace,
    ))
}

/// One trained model together with the catalog items it covers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupModel {
    pub items: Vec<u32>,
    pub model: VaeModel,
    pub trace: Vec<EpochTrace>,
}

/// Four item-based VAEs partitioned by artist-popularity group (index 0 =
/// least popular) plus a dedicated model for the least popular track group.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupedVaeEnsemble {
    pub artist_models: Vec<GroupModel>,
    pub least_track_model: GroupModel,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupedTrainConfig {
    pub vae: VaeTrainConfig,
    /// Extra epochs for the least popular artist group (underfits otherwise).
    pub extra_epochs_group0: usize,
    /// Latent dimension of the least-popular-track model.
    pub least_track_latent: usize,
}

impl GroupedTrainConfig {
    pub fn phase2(seed: u64) -> Self {
        GroupedTrainConfig {
            vae: VaeTrainConfig::phase2(seed),
            extra_epochs_group0: 2,
            least_track_latent: 15,
        }
    }
}

/// Trains the per-artist-group ensemble and the least-popular-track model,
/// all item-based over `train` (user-major).
pub fn train_grouped(
    train_data: &Interactions,
    artist_grouping: &Grouping,
    track_grouping: &Grouping,
    cfg: &GroupedTrainConfig,
) -> Result<GroupedVaeEnsemble> {
    let n_items = train_data.n_items();
    if artist_grouping.assignment.len() != n_items || track_grouping.assignment.len() != n_items {
        return Err(Error::Shape("item grouping does not cover the catalog".into()));
    }
    let train_t = train_data.transpose();
    let artist_members = artist_grouping.members();

    let mut artist_models = Vec::with_capacity(artist_members.len());
    for (g, items) in artist_members.iter().enumerate() {
        if items.is_empty() {
            return Err(Error::Invalid(format!(
                "artist group {g} is empty; regenerate the dataset or rebin the grouping"
            )));
        }
        let rows = train_t.select_rows(items);
        let fairness = Grouping {
            name: track_grouping.name.clone(),
            labels: track_grouping.labels.clone(),
            assignment: items
                .iter()
                .map(|&i| track_grouping.assignment[i as usize])
                .collect(),
        };
        let mut vcfg = cfg.vae.clone();
        vcfg.seed = cfg.vae.seed.wrapping_add(1 + g as u64);
        if g == 0 {
            vcfg.epochs += cfg.extra_epochs_group0;
        }
        let (model, trace) = train(&rows, Orientation::ItemBased, Some(&fairness), &vcfg)?;
        artist_models.push(GroupModel {
            items: items.clone(),
            model,
            trace,
        });
    }

    let least_items = track_grouping.members()[0].clone();
    if least_items.is_empty() {
        return Err(Error::Invalid(
            "least popular track group is empty; regenerate the dataset or rebin".into(),
        ));
    }
    let rows = train_t.select_rows(&least_items);
    let mut vcfg = cfg.vae.clone();
    vcfg.seed = cfg.vae.seed.wrapping_add(101);
    vcfg.latent = cfg.least_track_latent;
    let (model, trace) = train(&rows, Orientation::ItemBased, None, &vcfg)?;

    Ok(GroupedVaeEnsemble {
        artist_models,
        least_track_model: GroupModel {
            items: least_items,
            model,
            trace,
        },
    })
}

/// Precomputed item-major score sweeps for every model of the ensemble.
pub struct EnsembleSweeps {
    pub artist: Vec<ItemScores>,
    pub least_track: ItemScores,
}

impl GroupedVaeEnsemble {
    pub fn compute_sweeps(&self, train_data: &Interactions) -> Result<EnsembleSweeps> {
        let train_t = train_data.transpose();
        let artist = self
            .artist_models
            .iter()
            .map(|gm| ItemScores::compute(&gm.model, &gm.items, &train_t))
            .collect::<Result<Vec<_>>>()?;
        let least_track = ItemScores::compute(
            &self.least_track_model.model,
            &self.least_track_model.items,
            &train_t,
        )?;
        Ok(EnsembleSweeps {
            artist,
            least_track,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticParams};
    use crate::grouping::{artist_popularity_grouping, track_popularity_grouping};

    fn toy_examples(seed: u64) -> Interactions {
        generate_synthetic(&SyntheticParams {
            n_users: 20,
            n_items: 15,
            n_artists: 4,
            mean_interactions: 6.0,
            popularity_exponent: 1.1,
            seed,
        })
        .unwrap()
        .interactions
    }

    fn small_cfg(seed: u64) -> VaeTrainConfig {
        VaeTrainConfig {
            hidden: 8,
            latent: 4,
            epochs: 2,
            batch_size: 8,
            lr: 0.01,
            beta: 1e-4,
            gamma: 0.0,
            dropout: 0.2,
            seed,
        }
    }

    #[test]
    fn loss_decreases_on_toy_set() {
        let data = toy_examples(1);
        let mut cfg = small_cfg(2);
        cfg.epochs = 4;
        let (_, trace) = train(&data, Orientation::UserBased, None, &cfg).unwrap();
        assert!(
            trace.last().unwrap().mean_loss < trace[0].mean_loss,
            "trace {trace:?}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_examples(3);
        let cfg = small_cfg(4);
        let (a, _) = train(&data, Orientation::UserBased, None, &cfg).unwrap();
        let (b, _) = train(&data, Orientation::UserBased, None, &cfg).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn phase_profiles_carry_stated_dims() {
        let p1 = VaeTrainConfig::phase1(0);
        assert_eq!((p1.hidden, p1.latent, p1.epochs), (300, 500, 5));
        let p2 = GroupedTrainConfig::phase2(0);
        assert_eq!(p2.vae.latent, 17);
        assert_eq!(p2.least_track_latent, 15);
        assert_eq!(p2.vae.epochs, 2);
        assert_eq!(p2.vae.beta, 1e-4);
        assert_eq!(p2.vae.gamma, 3e-3);
    }

    #[test]
    fn grouped_training_shapes_and_epochs() {
        let d = generate_synthetic(&SyntheticParams {
            n_users: 40,
            n_items: 60,
            n_artists: 10,
            mean_interactions: 10.0,
            popularity_exponent: 1.0,
            seed: 5,
        })
        .unwrap();
        let artist = artist_popularity_grouping(&d.catalog);
        let track = track_popularity_grouping(&d.catalog);
        // synthetic playcounts at this scale land everything in low bins;
        // force a spread so all 4 artist groups are nonempty
        let mut artist = artist;
        for (i, a) in artist.assignment.iter_mut().enumerate() {
            *a = i % 4;
        }
        let mut cfg = GroupedTrainConfig {
            vae: small_cfg(6),
            extra_epochs_group0: 2,
            least_track_latent: 3,
        };
        cfg.vae.epochs = 2;
        let ens = train_grouped(&d.interactions, &artist, &track, &cfg).unwrap();
        assert_eq!(ens.artist_models.len(), 4);
        // group 0 trains 2 + 2 epochs, others 2
        assert_eq!(ens.artist_models[0].trace.len(), 4);
        assert_eq!(ens.artist_models[1].trace.len(), 2);
        assert_eq!(ens.least_track_model.model.params.dims.latent, 3);
        // item subsets partition the catalog
        let mut all: Vec<u32> = ens
            .artist_models
            .iter()
            .flat_map(|g| g.items.iter().copied())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..60).collect::<Vec<u32>>());
    }

    #[test]
    fn empty_artist_group_is_an_error() {
        let d = generate_synthetic(&SyntheticParams {
            n_users: 10,
            n_items: 12,
            n_artists: 3,
            mean_interactions: 5.0,
            popularity_exponent: 1.0,
            seed: 7,
        })
        .unwrap();
        let artist = artist_popularity_grouping(&d.catalog); // tiny playcounts: upper bins empty
        let track = track_popularity_grouping(&d.catalog);
        let cfg = GroupedTrainConfig {
            vae: small_cfg(8),
            extra_epochs_group0: 2,
            least_track_latent: 3,
        };
        let err = train_grouped(&d.interactions, &artist, &track, &cfg).unwrap_err();
        assert!(err.to_string().contains("empty"), "{err}");
    }
}
