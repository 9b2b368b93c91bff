//! Group assignment for items and users.
//!
//! Items are grouped by track or artist playcount on right-open powers of
//! ten (group index 0 = least popular). Users are grouped by gender, by
//! top-9 countries + "other", and by activity quartiles of training-row
//! length.

use std::collections::HashMap;

use serde::Serialize;

use crate::dataset::{Catalog, Gender, Interactions, UserMeta};

pub const TRACK_POP_EDGES: [u64; 3] = [10, 100, 1000];
pub const ARTIST_POP_EDGES: [u64; 3] = [100, 1000, 10000];

/// A named partition of users or items into labeled groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    pub name: String,
    pub labels: Vec<String>,
    /// Per-entity group index into `labels`.
    pub assignment: Vec<usize>,
}

impl Grouping {
    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }

    pub fn group_of(&self, entity: usize) -> usize {
        self.assignment[entity]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.labels.len()];
        for &g in &self.assignment {
            sizes[g] += 1;
        }
        sizes
    }

    /// Entity indices per group.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.labels.len()];
        for (e, &g) in self.assignment.iter().enumerate() {
            out[g].push(e as u32);
        }
        out
    }

    /// label -> member count, for reports.
    pub fn census(&self) -> GroupingCensus {
        GroupingCensus {
            name: self.name.clone(),
            groups: self
                .labels
                .iter()
                .cloned()
                .zip(self.group_sizes())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupingCensus {
    pub name: String,
    pub groups: Vec<(String, usize)>,
}

fn playcount_group(playcount: u64, edges: &[u64]) -> usize {
    edges.iter().filter(|&&e| playcount >= e).count()
}

fn pow10_grouping(name: &str, edges: &[u64], playcounts: impl Iterator<Item = u64>) -> Grouping {
    let mut labels = vec!["1".to_string()];
    labels.extend(edges.iter().map(|e| e.to_string()));
    Grouping {
        name: name.to_string(),
        labels,
        assignment: playcounts.map(|p| playcount_group(p, edges)).collect(),
    }
}

/// Track-popularity groups "1"/"10"/"100"/"1000": group "1" holds playcounts
/// below 10, "10" holds [10,100), and so on.
pub fn track_popularity_grouping(catalog: &Catalog) -> Grouping {
    pow10_grouping(
        "track_pop",
        &TRACK_POP_EDGES,
        catalog.items.iter().map(|i| i.track_playcount),
    )
}

/// Artist-popularity groups "1"/"100"/"1000"/"10000" over artist playcount;
/// group index 0 is the least popular.
pub fn artist_popularity_grouping(catalog: &Catalog) -> Grouping {
    pow10_grouping(
        "artist_pop",
        &ARTIST_POP_EDGES,
        catalog.items.iter().map(|i| i.artist_playcount),
    )
}

/// Rank-based quartiles over arbitrary per-entity values (ties broken by
/// index). Always yields 4 near-equal nonempty groups when there are at
/// least 4 entities — the rebinning remedy when fixed playcount edges
/// leave a group empty on a small corpus.
pub fn quartile_grouping(name: &str, values: &[u64]) -> Grouping {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (values[i], i));
    let mut assignment = vec![0usize; n];
    for (rank, &i) in order.iter().enumerate() {
        assignment[i] = (rank * 4 / n.max(1)).min(3);
    }
    Grouping {
        name: name.to_string(),
        labels: vec!["q1".into(), "q2".into(), "q3".into(), "q4".into()],
        assignment,
    }
}

/// Gender, country (top-9 + "other"), and activity-quartile groupings.
pub fn user_groupings(users: &UserMeta, train: &Interactions) -> [Grouping; 3] {
    [
        gender_grouping(users),
        country_grouping(users),
        activity_grouping(train),
    ]
}

pub fn gender_grouping(users: &UserMeta) -> Grouping {
    Grouping {
        name: "gender".to_string(),
        labels: vec!["m".into(), "f".into(), "n".into()],
        assignment: users
            .users
            .iter()
            .map(|u| match u.gender {
                Gender::Male => 0,
                Gender::Female => 1,
                Gender::Unknown => 2,
            })
            .collect(),
    }
}

pub fn country_grouping(users: &UserMeta) -> Grouping {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for u in &users.users {
        if let Some(c) = &u.country {
            *counts.entry(c.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if ranked.len() <= 1 {
        // degenerate: everyone in one bucket; metric layer skips it
        return Grouping {
            name: "country".to_string(),
            labels: vec!["other".into()],
            assignment: vec![0; users.len()],
        };
    }
    let top: Vec<String> = ranked.iter().take(9).map(|(c, _)| c.to_string()).collect();
    let index: HashMap<&str, usize> = top.iter().map(|c| c.as_str()).zip(0..).collect();
    let other = top.len();
    let mut labels = top.clone();
    labels.push("other".to_string());
    Grouping {
        name: "country".to_string(),
        labels,
        assignment: users
            .users
            .iter()
            .map(|u| {
                u.country
                    .as_deref()
                    .and_then(|c| index.get(c).copied())
                    .unwrap_or(other)
            })
            .collect(),
    }
}

/// Quartiles of training-row length, assigned by rank with ties broken by
/// user index so the partition is always 4 near-equal groups.
pub fn activity_grouping(train: &Interactions) -> Grouping {
    let n = train.n_users();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&u| (train.row(u).len(), u));
    let mut assignment = vec![0usize; n];
    for (rank, &u) in order.iter().enumerate() {
        assignment[u] = (rank * 4 / n.max(1)).min(3);
    }
    Grouping {
        name: "activity".to_string(),
        labels: vec!["q1".into(), "q2".into(), "q3".into(), "q4".into()],
        assignment,
    }
}
