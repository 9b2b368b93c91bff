//! Run configuration. A single JSON file fully determines a run; the two
//! named profiles carry the published hyperparameter sets and every field
//! can be overridden.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bprmf::BprTrainConfig;
use crate::curation::CurationConfig;
use crate::dataset::{generate_synthetic, load_dataset, Dataset, SyntheticParams};
use crate::vae::GroupedTrainConfig;
use crate::{Error, Result};

/// Where the interaction data comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSource {
    Files {
        interactions: PathBuf,
        tracks: PathBuf,
        users: PathBuf,
    },
    Synthetic {
        params: SyntheticParams,
    },
}

/// Named hyperparameter sets: `phase1` is the large single-model setup,
/// `phase2` the grouped ensemble used for the final lists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Phase1,
    #[default]
    Phase2,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Profile> {
        match s {
            "phase1" => Ok(Profile::Phase1),
            "phase2" => Ok(Profile::Phase2),
            other => Err(Error::Config(format!(
                "unknown profile {other:?} (expected phase1 or phase2)"
            ))),
        }
    }
}

/// How items are binned into popularity groups for training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemBinning {
    /// Powers-of-ten playcount edges — matches the published groups, but
    /// leaves upper bins empty on small corpora.
    #[default]
    Pow10,
    /// Rank-based quartiles; always 4 nonempty groups. Use for synthetic
    /// or desk-scale data.
    Quartile,
}

fn default_folds() -> u32 {
    4
}

fn default_k() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: u32,
    /// Final recommendation list length.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub item_binning: ItemBinning,
    /// Overrides the profile's grouped-VAE hyperparameters when set.
    #[serde(default)]
    pub vae: Option<GroupedTrainConfig>,
    /// Overrides the profile's BPRMF hyperparameters when set.
    #[serde(default)]
    pub bpr: Option<BprTrainConfig>,
    /// Overrides the default list layout when set.
    #[serde(default)]
    pub curation: Option<CurationConfig>,
    /// Optional per-metric weights for the weighted aggregate score.
    #[serde(default)]
    pub weights: Option<BTreeMap<String, f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(Error::Config("folds must be at least 1".into()));
        }
        if self.k < 7 {
            return Err(Error::Config("k must be at least 7".into()));
        }
        self.curation_config().validate()?;
        if let Some(w) = &self.weights {
            if w.values().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::Config("weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Files {
                interactions,
                tracks,
                users,
            } => load_dataset(interactions, tracks, users),
            DatasetSource::Synthetic { params } => generate_synthetic(params),
        }
    }

    /// Grouped-VAE hyperparameters for this run (profile defaults unless
    /// overridden), seeded per fold.
    pub fn grouped_config(&self, fold_id: u32) -> GroupedTrainConfig {
        let mut cfg = match (&self.vae, self.profile) {
            (Some(c), _) => c.clone(),
            (None, Profile::Phase1) => {
                let mut c = GroupedTrainConfig::phase2(self.seed);
                c.vae = crate::vae::VaeTrainConfig::phase1(self.seed);
                c.least_track_latent = c.vae.latent;
                c
            }
            (None, Profile::Phase2) => GroupedTrainConfig::phase2(self.seed),
        };
        cfg.vae.seed = cfg
            .vae
            .seed
            .wrapping_add(10_007u64.wrapping_mul(fold_id as u64));
        cfg
    }

    pub fn bpr_config(&self, fold_id: u32) -> BprTrainConfig {
        let mut cfg = match (&self.bpr, self.profile) {
            (Some(c), _) => c.clone(),
            (None, Profile::Phase1) => BprTrainConfig::phase1(self.seed),
            (None, Profile::Phase2) => BprTrainConfig::phase2(self.seed),
        };
        cfg.seed = cfg
            .seed
            .wrapping_add(10_007u64.wrapping_mul(fold_id as u64))
            .wrapping_add(500_009);
        cfg
    }

    pub fn curation_config(&self) -> CurationConfig {
        match &self.curation {
            Some(c) => c.clone(),
            None if self.k == 100 => CurationConfig::default(),
            None => CurationConfig::small(self.k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_cfg() -> RunConfig {
        RunConfig {
            dataset: DatasetSource::Synthetic {
                params: SyntheticParams {
                    n_users: 30,
                    n_items: 40,
                    n_artists: 8,
                    mean_interactions: 8.0,
                    popularity_exponent: 1.1,
                    seed: 3,
                },
            },
            profile: Profile::Phase2,
            seed: 11,
            folds: 2,
            k: 20,
            item_binning: ItemBinning::Quartile,
            vae: None,
            bpr: None,
            curation: None,
            weights: None,
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = synthetic_cfg();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.seed, 11);
        assert_eq!(back.k, 20);
        assert_eq!(back.item_binning, ItemBinning::Quartile);
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"dataset":{"kind":"synthetic","params":{"n_users":10,"n_items":10,
            "n_artists":2,"mean_interactions":4.0,"popularity_exponent":1.0,"seed":1}},
            "bogus_field": 3}"#;
        let err = serde_json::from_str::<RunConfig>(json).unwrap_err();
        assert!(err.to_string().contains("bogus_field"), "{err}");
    }

    #[test]
    fn profile_defaults() {
        let mut cfg = synthetic_cfg();
        cfg.profile = Profile::Phase2;
        let g = cfg.grouped_config(0);
        assert_eq!(g.vae.latent, 17);
        assert_eq!(cfg.bpr_config(0).dim, 200);
        cfg.profile = Profile::Phase1;
        assert_eq!(cfg.grouped_config(0).vae.latent, 500);
        assert_eq!(cfg.bpr_config(0).dim, 64);
    }

    #[test]
    fn fold_seeds_differ() {
        let cfg = synthetic_cfg();
        assert_ne!(cfg.grouped_config(0).vae.seed, cfg.grouped_config(1).vae.seed);
        assert_ne!(cfg.bpr_config(0).seed, cfg.bpr_config(1).seed);
        // VAE and BPR streams stay apart within a fold
        assert_ne!(cfg.grouped_config(0).vae.seed, cfg.bpr_config(0).seed);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = synthetic_cfg();
        cfg.folds = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = synthetic_cfg();
        cfg.k = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = synthetic_cfg();
        cfg.weights = Some([("hit_rate".to_string(), -1.0)].into_iter().collect());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn profile_parse() {
        assert_eq!("phase1".parse::<Profile>().unwrap(), Profile::Phase1);
        assert!("phase3".parse::<Profile>().is_err());
    }
}
