//! Challenge metrics: hit rate, MRR, per-group miss rates, MRED, the
//! coefficient-of-variation fairness metric, and the embedding-distance
//! "be less wrong" score.

use serde::{Deserialize, Serialize};

use crate::dataset::EvalSplit;
use crate::grouping::Grouping;
use crate::numerics::Matrix;
use crate::{Error, Result};

/// How a grouping attributes a test case: by the user's own group, or by
/// the group of the held-out (ground truth) item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupBy {
    UserGroup,
    ItemGroupOfTruth,
}

fn rank_of(list: &[u32], item: u32, k: usize) -> Option<usize> {
    list.iter().take(k).position(|&i| i == item).map(|p| p + 1)
}

/// Fraction of users whose held-out item appears in the top-k.
pub fn hit_rate(recs: &[Vec<u32>], truth: &EvalSplit, k: usize) -> Result<f64> {
    if recs.len() != truth.held_out.len() {
        return Err(Error::Invalid(format!(
            "{} recommendation lists for {} users",
            recs.len(),
            truth.held_out.len()
        )));
    }
    let hits = recs
        .iter()
        .zip(&truth.held_out)
        .filter(|(list, &item)| rank_of(list, item, k).is_some())
        .count();
    Ok(hits as f64 / recs.len() as f64)
}

/// Mean over users of 1/rank of the held-out item (0 when absent);
/// ranks are 1-based.
pub fn mrr(recs: &[Vec<u32>], truth: &EvalSplit) -> Result<f64> {
    if recs.len() != truth.held_out.len() {
        return Err(Error::Invalid("missing user lists".into()));
    }
    let total: f64 = recs
        .iter()
        .zip(&truth.held_out)
        .map(|(list, &item)| {
            rank_of(list, item, list.len())
                .map(|r| 1.0 / r as f64)
                .unwrap_or(0.0)
        })
        .sum();
    Ok(total / recs.len() as f64)
}

#[derive(Clone, Debug)]
pub struct GroupMissRates {
    pub labels: Vec<String>,
    pub miss_rates: Vec<f64>,
    pub hit_rates: Vec<f64>,
    pub sizes: Vec<usize>,
    pub overall_mr: f64,
    /// Labels of groups with no test cases, excluded from the vectors above.
    pub skipped: Vec<String>,
}

/// Per-group MR (1 - HR within the group) and the overall MR. Item
/// groupings attribute each test case to the group of its held-out item.
pub fn group_miss_rates(
    recs: &[Vec<u32>],
    truth: &EvalSplit,
    grouping: &Grouping,
    by: GroupBy,
    k: usize,
) -> Result<GroupMissRates> {
    if recs.len() != truth.held_out.len() {
        return Err(Error::Invalid("missing user lists".into()));
    }
    let n_groups = grouping.n_groups();
    let mut hits = vec![0usize; n_groups];
    let mut sizes = vec![0usize; n_groups];
    let mut total_hits = 0usize;
    for (u, (list, &item)) in recs.iter().zip(&truth.held_out).enumerate() {
        let g = match by {
            GroupBy::UserGroup => grouping.group_of(u),
            GroupBy::ItemGroupOfTruth => grouping.group_of(item as usize),
        };
        sizes[g] += 1;
        if rank_of(list, item, k).is_some() {
            hits[g] += 1;
            total_hits += 1;
        }
    }
    let mut out = GroupMissRates {
        labels: Vec::new(),
        miss_rates: Vec::new(),
        hit_rates: Vec::new(),
        sizes: Vec::new(),
        overall_mr: 1.0 - total_hits as f64 / recs.len() as f64,
        skipped: Vec::new(),
    };
    for g in 0..n_groups {
        if sizes[g] == 0 {
            out.skipped.push(grouping.labels[g].clone());
            continue;
        }
        let hr = hits[g] as f64 / sizes[g] as f64;
        out.labels.push(grouping.labels[g].clone());
        out.hit_rates.push(hr);
        out.miss_rates.push(1.0 - hr);
        out.sizes.push(sizes[g]);
    }
    Ok(out)
}

/// Miss rate equality difference: -(1/G) * sum_g |MR_g - MR_overall|.
/// Always <= 0; 0 iff every group matches the overall rate.
pub fn mred(group_mrs: &[f64], overall_mr: f64) -> f64 {
    assert!(!group_mrs.is_empty());
    -group_mrs
        .iter()
        .map(|mr| (mr - overall_mr).abs())
        .sum::<f64>()
        / group_mrs.len() as f64
}

/// Coefficient-of-variation fairness:
/// `(1/hr_avg) * sqrt( sum_g (hr_avg - HR_g)^2 / G )`.
/// Scale-free: multiplying every rate by the same positive constant leaves
/// it unchanged. Lower is fairer.
pub fn cv_fairness(group_hit_rates: &[f64], hr_avg: f64) -> Result<f64> {
    if group_hit_rates.is_empty() {
        return Err(Error::Invalid("cv_fairness needs at least one group".into()));
    }
    if hr_avg <= 0.0 {
        return Err(Error::Invalid(
            "cv_fairness undefined for zero average hit rate".into(),
        ));
    }
    let var = group_hit_rates
        .iter()
        .map(|hr| (hr_avg - hr).powi(2))
        .sum::<f64>()
        / group_hit_rates.len() as f64;
    Ok(var.sqrt() / hr_avg)
}

/// Cosine similarity between the embeddings of the predicted top-1 and the
/// ground-truth item. `None` when either embedding has zero norm.
pub fn be_less_wrong(top1: u32, truth: u32, item_embeddings: &Matrix) -> Option<f64> {
    let a = item_embeddings.row(top1 as usize);
    let b = item_embeddings.row(truth as usize);
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na.sqrt() * nb.sqrt()))
}

/// Report-level be-less-wrong: mean cosine over users, with zero-norm
/// embeddings skipped and counted.
pub fn be_less_wrong_report(
    recs: &[Vec<u32>],
    truth: &EvalSplit,
    item_embeddings: &Matrix,
) -> (f64, usize) {
    let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for (list, &item) in recs.iter().zip(&truth.held_out) {
        let Some(&top1) = list.first() else {
            skipped += 1;
            continue;
        };
        match be_less_wrong(top1, item, item_embeddings) {
            Some(c) => {
                sum += c;
                n += 1;
            }
            None => skipped += 1,
        }
    }
    (if n > 0 { sum / n as f64 } else { 0.0 }, skipped)
}

/// One Table-3-shaped row of results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fold: String,
    pub hit_rate: f64,
    pub mrr: f64,
    pub mred_country: Option<f64>,
    pub mred_user_activity: Option<f64>,
    pub mred_track_pop: Option<f64>,
    pub mred_artist_pop: Option<f64>,
    pub mred_gender: Option<f64>,
    pub be_less_wrong: f64,
    pub be_less_wrong_skipped: usize,
    pub cv_country: Option<f64>,
    pub cv_user_activity: Option<f64>,
    pub cv_track_pop: Option<f64>,
    pub cv_artist_pop: Option<f64>,
    pub cv_gender: Option<f64>,
    /// Simple average of the available metric columns (HR, MRR, the five
    /// MREDs, be-less-wrong).
    pub score: f64,
    /// Weighted aggregate when a weights file is supplied.
    pub weighted_score: Option<f64>,
}

impl MetricsReport {
    pub fn metric_columns(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("hit_rate", Some(self.hit_rate)),
            ("mrr", Some(self.mrr)),
            ("mred_country", self.mred_country),
            ("mred_user_activity", self.mred_user_activity),
            ("mred_track_pop", self.mred_track_pop),
            ("mred_artist_pop", self.mred_artist_pop),
            ("mred_gender", self.mred_gender),
            ("be_less_wrong", Some(self.be_less_wrong)),
        ]
    }

    pub fn simple_average(&self) -> f64 {
        let cols: Vec<f64> = self
            .metric_columns()
            .iter()
            .filter_map(|(_, v)| *v)
            .collect();
        cols.iter().sum::<f64>() / cols.len() as f64
    }
}
