//! Synthetic long-tail dataset generator.
//!
//! Item popularity follows a discrete power law (Zipf over item rank, item 0
//! most popular); per-user row lengths are Poisson around the configured
//! mean, clamped to at least 2 so leave-one-out always has a training item
//! left. Everything is drawn from named per-user RNG streams, so output is
//! byte-identical for a given seed regardless of thread count.

use rand::Rng;
use rand_distr::{Distribution, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use super::{Catalog, CatalogItem, Dataset, Gender, Interactions, UserMeta, UserRecord};
use crate::numerics::stream_rng;
use crate::{exec, Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub n_users: usize,
    pub n_items: usize,
    pub n_artists: usize,
    /// Mean interactions per user (Poisson, clamped to >= 2).
    pub mean_interactions: f64,
    /// Power-law exponent for item popularity; must be > 0.
    pub popularity_exponent: f64,
    pub seed: u64,
}

const COUNTRIES: [&str; 12] = [
    "us", "de", "gb", "br", "ru", "pl", "nl", "fi", "se", "es", "fr", "jp",
];

pub fn generate_synthetic(params: &SyntheticParams) -> Result<Dataset> {
    let &SyntheticParams {
        n_users,
        n_items,
        n_artists,
        mean_interactions,
        popularity_exponent,
        seed,
    } = params;
    if n_artists == 0 || n_items < n_artists {
        return Err(Error::Config("need n_items >= n_artists >= 1".into()));
    }
    if popularity_exponent <= 0.0 {
        return Err(Error::Config("popularity_exponent must be > 0".into()));
    }
    if n_users == 0 || n_items < 2 {
        return Err(Error::Config("need n_users >= 1 and n_items >= 2".into()));
    }
    let zipf = Zipf::new(n_items as u64, popularity_exponent)
        .map_err(|e| Error::Config(format!("zipf: {e}")))?;
    let poisson = Poisson::new(mean_interactions)
        .map_err(|e| Error::Config(format!("poisson: {e}")))?;

    // Each raw draw is one play; a row keeps only distinct items but every
    // play counts toward the track playcount, so playcounts keep the
    // configured power law even though rows are deduplicated.
    let sampled: Vec<(Vec<u32>, Vec<u64>)> = exec::map_indices(n_users, |u| {
        let mut rng = stream_rng(seed, "synth-user", u as u64);
        let len = (poisson.sample(&mut rng) as usize).clamp(2, n_items);
        let mut row: Vec<u32> = Vec::with_capacity(len);
        let mut plays = vec![0u64; n_items];
        let mut attempts = 0usize;
        while row.len() < len {
            // rank 1 = most popular = item 0
            let item = zipf.sample(&mut rng) as u32 - 1;
            plays[item as usize] += 1;
            if !row.contains(&item) {
                row.push(item);
            }
            attempts += 1;
            if attempts > 100 * len {
                // dense corner: fill with the lowest unused indices
                for i in 0..n_items as u32 {
                    if row.len() >= len {
                        break;
                    }
                    if !row.contains(&i) {
                        row.push(i);
                        plays[i as usize] += 1;
                    }
                }
            }
        }
        row.sort_unstable();
        (row, plays)
    });
    let mut counts = vec![0u64; n_items];
    let rows: Vec<Vec<u32>> = sampled
        .into_iter()
        .map(|(row, plays)| {
            for (i, p) in plays.into_iter().enumerate() {
                counts[i] += p;
            }
            row
        })
        .collect();
    let interactions = Interactions::new(n_users, n_items, rows)?;
    let mut artist_rng = stream_rng(seed, "synth-artist", 0);
    let artists: Vec<usize> = (0..n_items)
        .map(|_| artist_rng.gen_range(0..n_artists))
        .collect();
    let mut artist_totals = vec![0u64; n_artists];
    for (i, &a) in artists.iter().enumerate() {
        artist_totals[a] += counts[i];
    }
    let catalog = Catalog {
        items: (0..n_items)
            .map(|i| CatalogItem {
                item_id: format!("t{i}"),
                artist_id: format!("a{}", artists[i]),
                track_playcount: counts[i],
                artist_playcount: artist_totals[artists[i]],
            })
            .collect(),
    };

    let users = UserMeta {
        users: (0..n_users)
            .map(|u| {
                let mut rng = stream_rng(seed, "synth-meta", u as u64);
                let gender = match rng.gen::<f64>() {
                    g if g < 0.5 => Gender::Male,
                    g if g < 0.9 => Gender::Female,
                    _ => Gender::Unknown,
                };
                // geometric-ish skew over a fixed country list
                let mut c = 0usize;
                while c + 1 < COUNTRIES.len() && rng.gen::<f64>() < 0.65 {
                    c += 1;
                }
                UserRecord {
                    user_id: format!("u{u}"),
                    gender,
                    country: Some(COUNTRIES[COUNTRIES.len() - 1 - c].to_string()),
                    activity_playcount: interactions.row(u).len() as u64,
                }
            })
            .collect(),
    };

    Ok(Dataset {
        interactions,
        catalog,
        users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(exp: f64, seed: u64) -> SyntheticParams {
        SyntheticParams {
            n_users: 100,
            n_items: 200,
            n_artists: 20,
            mean_interactions: 30.0,
            popularity_exponent: exp,
            seed,
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_synthetic(&params(1.2, 7)).unwrap();
        let b = generate_synthetic(&params(1.2, 7)).unwrap();
        assert_eq!(a.interactions, b.interactions);
        assert_eq!(a.catalog, b.catalog);
        assert_eq!(a.users, b.users);
        let c = generate_synthetic(&params(1.2, 8)).unwrap();
        assert_ne!(a.interactions, c.interactions);
    }

    #[test]
    fn skewed_exponent_concentrates_top_decile() {
        let d = generate_synthetic(&params(1.2, 7)).unwrap();
        let counts: Vec<u64> = d.catalog.items.iter().map(|i| i.track_playcount).collect();
        let total: u64 = counts.iter().sum();
        let top_decile: u64 = counts.iter().take(counts.len() / 10).sum();
        assert!(
            top_decile * 2 > total,
            "top decile holds {top_decile} of {total}"
        );
    }

    #[test]
    fn tiny_exponent_is_near_uniform() {
        let mut p = params(0.01, 7);
        p.mean_interactions = 40.0;
        let d = generate_synthetic(&p).unwrap();
        let counts = d.interactions.item_counts();
        // quartile occupancy by item index; ranks are popularity order
        let q = counts.len() / 4;
        let occ: Vec<u64> = (0..4)
            .map(|k| counts[k * q..(k + 1) * q].iter().sum())
            .collect();
        let max = *occ.iter().max().unwrap() as f64;
        let min = *occ.iter().min().unwrap() as f64;
        assert!(max / min < 3.0, "occupancy ratio {}", max / min);
    }

    #[test]
    fn no_short_rows_and_valid_playcounts() {
        let d = generate_synthetic(&params(1.2, 3)).unwrap();
        for u in 0..d.interactions.n_users() {
            assert!(d.interactions.row(u).len() >= 2);
        }
        let counts = d.interactions.item_counts();
        for (i, it) in d.catalog.items.iter().enumerate() {
            // every play counts, so playcount >= distinct-listener count
            assert!(it.track_playcount >= counts[i]);
            assert!(it.artist_playcount >= it.track_playcount);
        }
        let plays: u64 = d.catalog.items.iter().map(|i| i.track_playcount).sum();
        assert!(plays >= d.interactions.n_interactions() as u64);
    }

    #[test]
    fn popularity_tracks_rank_order() {
        // item index is popularity rank: the head must clearly out-play
        // the tail
        let d = generate_synthetic(&params(1.2, 11)).unwrap();
        let counts: Vec<u64> = d.catalog.items.iter().map(|i| i.track_playcount).collect();
        let head: u64 = counts[..20].iter().sum();
        let tail: u64 = counts[counts.len() - 20..].iter().sum();
        assert!(head > 5 * tail, "head {head}, tail {tail}");
        assert_eq!(counts[0], *counts.iter().max().unwrap());
    }

    #[test]
    fn bad_params_rejected() {
        let mut p = params(0.0, 1);
        assert!(generate_synthetic(&p).is_err());
        p.popularity_exponent = 1.0;
        p.n_artists = 300;
        assert!(generate_synthetic(&p).is_err());
    }
}
