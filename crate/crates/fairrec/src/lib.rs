//! Fairness-aware music recommender.
//!
//! Building blocks: a sparse implicit-feedback data model with synthetic
//! generation and leave-one-out splitting ([`dataset`]), popularity/demographic
//! groupings ([`grouping`]), a small dense-math substrate with hand-derived
//! backward passes ([`numerics`]), multinomial VAEs in user- or item-based
//! orientation with a group-fairness regularizer ([`vae`]), BPR matrix
//! factorization ([`bprmf`]), the ensemble list-curation procedure
//! ([`curation`]), and a metric suite with a multi-fold harness
//! ([`evaluation`], [`pipeline`]).

pub mod bprmf;
pub mod checkpoint;
pub mod config;
pub mod curation;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod grouping;
pub mod numerics;
pub mod pipeline;
pub mod vae;

pub use error::{Error, Result};
