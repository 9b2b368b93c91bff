//! Versioned JSON checkpoints.
//!
//! Tensors are shape-tagged (`Matrix` carries rows/cols) and `f64` values
//! survive a JSON round trip bit-exactly, so reload reproduces the model
//! exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    version: u32,
    kind: String,
    model: T,
}

pub fn save<T: Serialize>(path: &Path, kind: &str, model: &T) -> Result<()> {
    let env = Envelope {
        version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        model,
    };
    fs::write(path, serde_json::to_vec(&env)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| {
        Error::Invalid(format!("missing checkpoint {}: {e}", path.display()))
    })?;
    let env: Envelope<T> = serde_json::from_slice(&bytes)?;
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::Invalid(format!(
            "checkpoint {} has version {}, expected {}",
            path.display(),
            env.version,
            CHECKPOINT_VERSION
        )));
    }
    if env.kind != kind {
        return Err(Error::Invalid(format!(
            "checkpoint {} holds a `{}` model, expected `{kind}`",
            path.display(),
            env.kind
        )));
    }
    Ok(env.model)
}
