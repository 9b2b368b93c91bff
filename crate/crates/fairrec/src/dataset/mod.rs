//! Interaction/metadata data model, TSV ingestion, synthetic generation,
//! and leave-one-out fold splitting.

mod split;
mod synthetic;
mod tsv;

pub use split::{leave_one_out_split, EvalSplit};
pub use synthetic::{generate_synthetic, SyntheticParams};
pub use tsv::{load_dataset, write_dataset};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sparse binary user-by-item implicit-feedback matrix. Each row is the
/// sorted, deduplicated item list of one user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interactions {
    n_users: usize,
    n_items: usize,
    rows: Vec<Vec<u32>>,
}

impl Interactions {
    pub fn new(n_users: usize, n_items: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        if rows.len() != n_users {
            return Err(Error::Shape(format!(
                "{} rows for {n_users} users",
                rows.len()
            )));
        }
        for (u, row) in rows.iter().enumerate() {
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Invalid(format!(
                        "row {u} not strictly ascending at item {}",
                        w[1]
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last as usize >= n_items {
                    return Err(Error::Invalid(format!(
                        "row {u} references item {last} >= n_items {n_items}"
                    )));
                }
            }
        }
        Ok(Interactions {
            n_users,
            n_items,
            rows,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_interactions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, u: usize) -> &[u32] {
        &self.rows[u]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn contains(&self, u: usize, item: u32) -> bool {
        self.rows[u].binary_search(&item).is_ok()
    }

    /// Dense 0/1 vector for one row.
    pub fn dense_row(&self, u: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_items];
        for &i in &self.rows[u] {
            v[i as usize] = 1.0;
        }
        v
    }

    /// Item-major view: row `i` of the result lists the users of item `i`.
    pub fn transpose(&self) -> Interactions {
        let mut rows = vec![Vec::new(); self.n_items];
        for (u, row) in self.rows.iter().enumerate() {
            for &i in row {
                rows[i as usize].push(u as u32);
            }
        }
        Interactions {
            n_users: self.n_items,
            n_items: self.n_users,
            rows,
        }
    }

    /// Restriction to a subset of rows (row order follows `keep`).
    pub fn select_rows(&self, keep: &[u32]) -> Interactions {
        Interactions {
            n_users: keep.len(),
            n_items: self.n_items,
            rows: keep.iter().map(|&r| self.rows[r as usize].clone()).collect(),
        }
    }

    /// Per-item interaction counts.
    pub fn item_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_items];
        for row in &self.rows {
            for &i in row {
                counts[i as usize] += 1;
            }
        }
        counts
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub item_id: String,
    pub artist_id: String,
    pub track_playcount: u64,
    pub artist_playcount: u64,
}

/// Item-side metadata, indexed like `Interactions` items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub items: Vec<CatalogItem>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub fn parse(s: &str) -> Gender {
        match s {
            "m" | "M" => Gender::Male,
            "f" | "F" => Gender::Female,
            _ => Gender::Unknown,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Gender::Male => "m",
            Gender::Female => "f",
            Gender::Unknown => "n",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub gender: Gender,
    /// Lower-cased 2-letter code, or `None` when unknown.
    pub country: Option<String>,
    pub activity_playcount: u64,
}

/// User-side metadata, indexed like `Interactions` users.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserMeta {
    pub users: Vec<UserRecord>,
}

impl UserMeta {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// A loaded or generated dataset triple.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub interactions: Interactions,
    pub catalog: Catalog,
    pub users: UserMeta,
}
