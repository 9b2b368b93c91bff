//! Final-list curation.
//!
//! Per user: 38/20/20/20 candidates from artist groups 0..3, laid out as
//! the BPRMF top-1 first, then the per-group top-5 blocks in group order
//! 2,1,3,0, then the remaining 15/15/15/33 in the same order, then one item
//! from the least-popular-track model at the end. Duplicates of the BPRMF
//! or least-track item are removed and backfilled from group 0's
//! next-ranked candidates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::bprmf::{bpr_top1, BprModel};
use crate::dataset::Interactions;
use crate::vae::EnsembleSweeps;
use crate::{exec, Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationConfig {
    /// Candidates per artist group, indexed by group (0 = least popular).
    pub counts: [usize; 4],
    /// Group layout order for the head and tail blocks.
    pub order: [usize; 4],
    /// Per-group size of the head block.
    pub head: usize,
    /// Final list length.
    pub k: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            counts: [38, 20, 20, 20],
            order: [2, 1, 3, 0],
            head: 5,
            k: 100,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        let mut sorted = self.order;
        sorted.sort_unstable();
        if sorted != [0, 1, 2, 3] {
            return Err(Error::Config("curation order must permute 0..3".into()));
        }
        if self.counts.iter().sum::<usize>() + 2 != self.k {
            return Err(Error::Config(format!(
                "curation counts {:?} + bpr + least-track item != k {}",
                self.counts, self.k
            )));
        }
        if self.counts.iter().any(|&c| c < self.head) {
            return Err(Error::Config("head block larger than a group quota".into()));
        }
        Ok(())
    }

    /// Scaled-down layout for desk-size corpora.
    pub fn small(k: usize) -> Self {
        // keep the 38/20/20/20 proportions roughly, order unchanged
        let body = k - 2;
        let per = body / 5;
        let g0 = body - 3 * per;
        CurationConfig {
            counts: [g0, per, per, per],
            order: [2, 1, 3, 0],
            head: (per / 4).max(1),
            k,
        }
    }
}

/// Where a recommended item came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Bpr,
    Group(u8),
    LeastTrack,
}

impl Source {
    pub fn code(&self) -> String {
        match self {
            Source::Bpr => "bpr".into(),
            Source::Group(g) => format!("g{g}"),
            Source::LeastTrack => "ltrack".into(),
        }
    }
}

/// Ranked candidate lists per artist group, plus group 0's overflow for
/// backfilling.
pub struct GroupCandidates {
    pub lists: [Vec<u32>; 4],
    pub shortfalls: [usize; 4],
    pub backfill: Vec<u32>,
}

/// Top `counts[g]` unseen items of each artist group, internally
/// score-ordered. Groups with too few unseen items return what they have
/// and record the shortfall.
pub fn per_group_candidates(
    sweeps: &EnsembleSweeps,
    user: usize,
    train: &Interactions,
    counts: &[usize; 4],
) -> GroupCandidates {
    let mut lists: [Vec<u32>; 4] = Default::default();
    let mut shortfalls = [0usize; 4];
    let mut backfill = Vec::new();
    for g in 0..4 {
        let ranked = sweeps.artist[g].ranked_for_user(user, train);
        let take = counts[g].min(ranked.len());
        shortfalls[g] = counts[g] - take;
        lists[g] = ranked[..take].iter().map(|&(i, _)| i).collect();
        if g == 0 {
            backfill = ranked[take..].iter().map(|&(i, _)| i).collect();
        }
    }
    GroupCandidates {
        lists,
        shortfalls,
        backfill,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecommendationList {
    pub user: u32,
    pub items: Vec<u32>,
    pub sources: Vec<Source>,
    /// Duplicates removed during assembly.
    pub deduped: usize,
    /// Items pulled from group 0's overflow to restore the length.
    pub backfilled: usize,
    /// True when the final slot is not the least-popular-track item.
    pub least_track_fallback: bool,
}

impl RecommendationList {
    pub fn check(&self, k: usize, train: &Interactions) -> Result<()> {
        if self.items.len() != k {
            return Err(Error::Invalid(format!(
                "user {}: list length {} != {k}",
                self.user,
                self.items.len()
            )));
        }
        let unique: HashSet<u32> = self.items.iter().copied().collect();
        if unique.len() != self.items.len() {
            return Err(Error::Invalid(format!("user {}: duplicates", self.user)));
        }
        for &i in &self.items {
            if train.contains(self.user as usize, i) {
                return Err(Error::Invalid(format!(
                    "user {}: item {i} is in the training row",
                    self.user
                )));
            }
        }
        Ok(())
    }
}

/// Assembles the final list from ranked candidates, the least-track item,
/// and the BPRMF top-1.
pub fn assemble_list(
    cands: &GroupCandidates,
    least_track_item: Option<u32>,
    bpr_item: u32,
    user: u32,
    cfg: &CurationConfig,
) -> Result<RecommendationList> {
    cfg.validate()?;
    let mut items: Vec<u32> = Vec::with_capacity(cfg.k);
    let mut sources: Vec<Source> = Vec::with_capacity(cfg.k);
    let mut seen: HashSet<u32> = HashSet::with_capacity(cfg.k * 2);
    let mut deduped = 0usize;
    let push = |item: u32,
                    source: Source,
                    items: &mut Vec<u32>,
                    sources: &mut Vec<Source>,
                    seen: &mut HashSet<u32>,
                    deduped: &mut usize| {
        if seen.insert(item) {
            items.push(item);
            sources.push(source);
        } else {
            *deduped += 1;
        }
    };

    push(bpr_item, Source::Bpr, &mut items, &mut sources, &mut seen, &mut deduped);
    for &g in &cfg.order {
        for &item in cands.lists[g].iter().take(cfg.head) {
            push(item, Source::Group(g as u8), &mut items, &mut sources, &mut seen, &mut deduped);
        }
    }
    for &g in &cfg.order {
        for &item in cands.lists[g].iter().skip(cfg.head) {
            push(item, Source::Group(g as u8), &mut items, &mut sources, &mut seen, &mut deduped);
        }
    }

    // restore length k-1 before the tail slot
    let mut backfilled = 0usize;
    let mut overflow = cands.backfill.iter().copied();
    while items.len() < cfg.k - 1 {
        match overflow.next() {
            Some(item) => {
                if seen.insert(item) {
                    items.push(item);
                    sources.push(Source::Group(0));
                    backfilled += 1;
                }
            }
            None => break,
        }
    }

    let mut least_track_fallback = false;
    match least_track_item {
        Some(lt) if !seen.contains(&lt) => {
            seen.insert(lt);
            items.push(lt);
            sources.push(Source::LeastTrack);
        }
        other => {
            if other.is_some() {
                deduped += 1;
            }
            least_track_fallback = true;
            for item in overflow.by_ref() {
                if seen.insert(item) {
                    items.push(item);
                    sources.push(Source::Group(0));
                    backfilled += 1;
                    break;
                }
            }
        }
    }

    if items.len() != cfg.k {
        return Err(Error::Invalid(format!(
            "user {user}: assembled {} items (need {}); shortfalls {:?}, deduped {deduped}, \
             backfill exhausted",
            items.len(),
            cfg.k,
            cands.shortfalls
        )));
    }
    Ok(RecommendationList {
        user,
        items,
        sources,
        deduped,
        backfilled,
        least_track_fallback,
    })
}

/// Full per-user curation from precomputed sweeps and a BPRMF model.
pub fn curate_user(
    sweeps: &EnsembleSweeps,
    bpr: &BprModel,
    user: usize,
    train: &Interactions,
    cfg: &CurationConfig,
) -> Result<RecommendationList> {
    let cands = per_group_candidates(sweeps, user, train, &cfg.counts);
    let least = sweeps
        .least_track
        .ranked_for_user(user, train)
        .first()
        .map(|&(i, _)| i);
    let bpr_item = bpr_top1(bpr, user, train);
    assemble_list(&cands, least, bpr_item, user as u32, cfg)
}

/// Curation for every user; embarrassingly parallel.
pub fn curate_all(
    sweeps: &EnsembleSweeps,
    bpr: &BprModel,
    train: &Interactions,
    cfg: &CurationConfig,
) -> Result<Vec<RecommendationList>> {
    exec::map_indices(train.n_users(), |u| curate_user(sweeps, bpr, u, train, cfg))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock_candidates(base: u32) -> GroupCandidates {
        // disjoint ranges per group
        let lists = [
            (base..base + 38).collect::<Vec<u32>>(),
            (base + 100..base + 120).collect(),
            (base + 200..base + 220).collect(),
            (base + 300..base + 320).collect(),
        ];
        GroupCandidates {
            lists,
            shortfalls: [0; 4],
            backfill: (base + 38..base + 60).collect(),
        }
    }

    #[test]
    fn default_counts_sum_to_98() {
        let cfg = CurationConfig::default();
        assert_eq!(cfg.counts.iter().sum::<usize>(), 98);
        cfg.validate().unwrap();
    }

    #[test]
    fn layout_positions() {
        let cfg = CurationConfig::default();
        let cands = mock_candidates(0);
        let list = assemble_list(&cands, Some(900), 901, 0, &cfg).unwrap();
        assert_eq!(list.items.len(), 100);
        assert_eq!(list.items[0], 901);
        assert_eq!(list.sources[0], Source::Bpr);
        // positions 1-5 come from artist group 2
        for p in 1..=5 {
            assert_eq!(list.sources[p], Source::Group(2));
            assert!(cands.lists[2].contains(&list.items[p]));
        }
        // next blocks: group 1, 3, 0 heads
        assert_eq!(list.sources[6], Source::Group(1));
        assert_eq!(list.sources[11], Source::Group(3));
        assert_eq!(list.sources[16], Source::Group(0));
        // tail block order 15/15/15/33 then least track last
        assert_eq!(list.sources[21], Source::Group(2));
        assert_eq!(*list.sources.last().unwrap(), Source::LeastTrack);
        assert_eq!(*list.items.last().unwrap(), 900);
        assert_eq!(list.deduped, 0);
        assert!(!list.least_track_fallback);
    }

    #[test]
    fn bpr_duplicate_deduped_and_backfilled() {
        let cfg = CurationConfig::default();
        let cands = mock_candidates(0);
        // bpr item is group 2's top candidate
        let bpr_item = cands.lists[2][0];
        let list = assemble_list(&cands, Some(900), bpr_item, 0, &cfg).unwrap();
        assert_eq!(list.items.len(), 100);
        assert_eq!(list.items[0], bpr_item);
        assert_eq!(list.items.iter().filter(|&&i| i == bpr_item).count(), 1);
        assert_eq!(list.deduped, 1);
        assert_eq!(list.backfilled, 1);
        // backfill comes from group 0 overflow
        assert!(list.items.contains(&38));
    }

    #[test]
    fn least_track_duplicate_flagged() {
        let cfg = CurationConfig::default();
        let cands = mock_candidates(0);
        // least-track item collides with a group-1 candidate
        let lt = cands.lists[1][3];
        let list = assemble_list(&cands, Some(lt), 901, 0, &cfg).unwrap();
        assert_eq!(list.items.len(), 100);
        assert!(list.least_track_fallback);
        assert_eq!(*list.sources.last().unwrap(), Source::Group(0));
    }

    #[test]
    fn group_shortfall_clamped() {
        let mut cands = mock_candidates(0);
        cands.lists[1].truncate(10);
        cands.shortfalls[1] = 10;
        let cfg = CurationConfig::default();
        let list = assemble_list(&cands, Some(900), 901, 0, &cfg).unwrap();
        assert_eq!(list.items.len(), 100);
        assert_eq!(list.backfilled, 10);
    }

    #[test]
    fn exhausted_backfill_is_an_error() {
        let mut cands = mock_candidates(0);
        cands.lists[0].truncate(5);
        cands.shortfalls[0] = 33;
        cands.backfill.clear();
        let cfg = CurationConfig::default();
        let err = assemble_list(&cands, Some(900), 901, 0, &cfg).unwrap_err();
        assert!(err.to_string().contains("backfill"), "{err}");
    }

    #[test]
    fn small_config_is_valid() {
        for k in [12, 20, 50, 100] {
            CurationConfig::small(k).validate().unwrap();
        }
    }
}
