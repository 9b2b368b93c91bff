//! Fold orchestration: split, train the grouped VAE ensemble and BPRMF,
//! curate every user's list, evaluate, and emit reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::bprmf::{train_bpr, BprModel};
use crate::config::{ItemBinning, RunConfig};
use crate::curation::{curate_all, RecommendationList};
use crate::dataset::{leave_one_out_split, Dataset, EvalSplit};
use crate::evaluation::{
    be_less_wrong_report, group_miss_rates, hit_rate, mred, mrr, cv_fairness, GroupBy,
    MetricsReport,
};
use crate::grouping::{
    artist_popularity_grouping, quartile_grouping, track_popularity_grouping, user_groupings,
    Grouping,
};
use crate::numerics::Matrix;
use crate::vae::{train_grouped, EpochTrace, GroupedVaeEnsemble};
use crate::{Error, Result};

/// Track- and artist-popularity item groupings under the configured
/// binning.
pub fn item_groupings(data: &Dataset, binning: ItemBinning) -> (Grouping, Grouping) {
    match binning {
        ItemBinning::Pow10 => (
            track_popularity_grouping(&data.catalog),
            artist_popularity_grouping(&data.catalog),
        ),
        ItemBinning::Quartile => {
            let track: Vec<u64> = data.catalog.items.iter().map(|i| i.track_playcount).collect();
            let artist: Vec<u64> = data.catalog.items.iter().map(|i| i.artist_playcount).collect();
            let mut t = quartile_grouping("track_pop", &track);
            let mut a = quartile_grouping("artist_pop", &artist);
            t.name = "track_pop".into();
            a.name = "artist_pop".into();
            (t, a)
        }
    }
}

fn grouping_columns(
    recs: &[Vec<u32>],
    split: &EvalSplit,
    grouping: &Grouping,
    by: GroupBy,
    k: usize,
) -> Result<(Option<f64>, Option<f64>)> {
    let out = group_miss_rates(recs, split, grouping, by, k)?;
    if out.miss_rates.is_empty() {
        return Ok((None, None));
    }
    let m = mred(&out.miss_rates, out.overall_mr);
    let overall_hr = 1.0 - out.overall_mr;
    let cv = cv_fairness(&out.hit_rates, overall_hr).ok();
    Ok((Some(m), cv))
}

fn weighted_score(
    report: &MetricsReport,
    weights: Option<&BTreeMap<String, f64>>,
) -> Option<f64> {
    let weights = weights?;
    let (mut num, mut den) = (0.0, 0.0);
    for (name, value) in report.metric_columns() {
        if let (Some(v), Some(&w)) = (value, weights.get(name)) {
            num += w * v;
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Evaluates one fold's recommendation lists against the held-out items.
/// `item_embeddings` are the BPRMF item factors used by be-less-wrong.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_fold(
    recs: &[Vec<u32>],
    split: &EvalSplit,
    data: &Dataset,
    item_embeddings: &Matrix,
    track_grouping: &Grouping,
    artist_grouping: &Grouping,
    k: usize,
    fold: String,
    weights: Option<&BTreeMap<String, f64>>,
) -> Result<MetricsReport> {
    let [gender, country, activity] = user_groupings(&data.users, &split.train);
    let (mred_track, cv_track) =
        grouping_columns(recs, split, track_grouping, GroupBy::ItemGroupOfTruth, k)?;
    let (mred_artist, cv_artist) =
        grouping_columns(recs, split, artist_grouping, GroupBy::ItemGroupOfTruth, k)?;
    let (mred_gender, cv_gender) =
        grouping_columns(recs, split, &gender, GroupBy::UserGroup, k)?;
    let (mred_country, cv_country) =
        grouping_columns(recs, split, &country, GroupBy::UserGroup, k)?;
    let (mred_activity, cv_activity) =
        grouping_columns(recs, split, &activity, GroupBy::UserGroup, k)?;
    let (blw, blw_skipped) = be_less_wrong_report(recs, split, item_embeddings);
    let mut report = MetricsReport {
        fold,
        hit_rate: hit_rate(recs, split, k)?,
        mrr: mrr(recs, split)?,
        mred_country,
        mred_user_activity: mred_activity,
        mred_track_pop: mred_track,
        mred_artist_pop: mred_artist,
        mred_gender,
        be_less_wrong: blw,
        be_less_wrong_skipped: blw_skipped,
        cv_country,
        cv_user_activity: cv_activity,
        cv_track_pop: cv_track,
        cv_artist_pop: cv_artist,
        cv_gender,
        score: 0.0,
        weighted_score: None,
    };
    report.score = report.simple_average();
    report.weighted_score = weighted_score(&report, weights);
    Ok(report)
}

/// Everything produced by one fold.
pub struct FoldArtifacts {
    pub fold_id: u32,
    pub split: EvalSplit,
    pub ensemble: GroupedVaeEnsemble,
    pub bpr: BprModel,
    pub recommendations: Vec<RecommendationList>,
    pub report: MetricsReport,
}

pub struct RunOutput {
    pub folds: Vec<FoldArtifacts>,
    pub mean: MetricsReport,
}

impl RunOutput {
    pub fn reports(&self) -> Vec<MetricsReport> {
        let mut rows: Vec<MetricsReport> = self.folds.iter().map(|f| f.report.clone()).collect();
        rows.push(self.mean.clone());
        rows
    }
}

/// Runs split/train/curate/evaluate for one fold.
pub fn run_fold(data: &Dataset, cfg: &RunConfig, fold_id: u32) -> Result<FoldArtifacts> {
    let split = leave_one_out_split(&data.interactions, fold_id, cfg.seed)?;
    let (track, artist) = item_groupings(data, cfg.item_binning);
    let ensemble = train_grouped(&split.train, &artist, &track, &cfg.grouped_config(fold_id))?;
    let sweeps = ensemble.compute_sweeps(&split.train)?;
    let bpr = train_bpr(&split.train, &cfg.bpr_config(fold_id))?;
    let curation = cfg.curation_config();
    let recommendations = curate_all(&sweeps, &bpr, &split.train, &curation)?;
    for r in &recommendations {
        r.check(curation.k, &split.train)?;
    }
    let lists: Vec<Vec<u32>> = recommendations.iter().map(|r| r.items.clone()).collect();
    let report = evaluate_fold(
        &lists,
        &split,
        data,
        &bpr.item_factors,
        &track,
        &artist,
        curation.k,
        format!("fold{fold_id}"),
        cfg.weights.as_ref(),
    )?;
    Ok(FoldArtifacts {
        fold_id,
        split,
        ensemble,
        bpr,
        recommendations,
        report,
    })
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Arithmetic column means over fold rows.
pub fn mean_report(reports: &[MetricsReport]) -> MetricsReport {
    assert!(!reports.is_empty());
    let n = reports.len() as f64;
    let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    MetricsReport {
        fold: "mean".into(),
        hit_rate: avg(|r| r.hit_rate),
        mrr: avg(|r| r.mrr),
        mred_country: mean_opt(reports.iter().map(|r| r.mred_country)),
        mred_user_activity: mean_opt(reports.iter().map(|r| r.mred_user_activity)),
        mred_track_pop: mean_opt(reports.iter().map(|r| r.mred_track_pop)),
        mred_artist_pop: mean_opt(reports.iter().map(|r| r.mred_artist_pop)),
        mred_gender: mean_opt(reports.iter().map(|r| r.mred_gender)),
        be_less_wrong: avg(|r| r.be_less_wrong),
        be_less_wrong_skipped: reports.iter().map(|r| r.be_less_wrong_skipped).sum(),
        cv_country: mean_opt(reports.iter().map(|r| r.cv_country)),
        cv_user_activity: mean_opt(reports.iter().map(|r| r.cv_user_activity)),
        cv_track_pop: mean_opt(reports.iter().map(|r| r.cv_track_pop)),
        cv_artist_pop: mean_opt(reports.iter().map(|r| r.cv_artist_pop)),
        cv_gender: mean_opt(reports.iter().map(|r| r.cv_gender)),
        score: avg(|r| r.score),
        weighted_score: mean_opt(reports.iter().map(|r| r.weighted_score)),
    }
}

/// The 4-fold (or `cfg.folds`-fold) protocol with a mean row appended.
pub fn run_folds(data: &Dataset, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut folds = Vec::with_capacity(cfg.folds as usize);
    for fold_id in 0..cfg.folds {
        let fold = run_fold(data, cfg, fold_id)
            .map_err(|e| Error::Invalid(format!("fold {fold_id}: {e}")))?;
        folds.push(fold);
    }
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.report.clone()).collect();
    let mean = mean_report(&reports);
    Ok(RunOutput { folds, mean })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with one row per fold plus the mean row.
pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(
        "fold,hit_rate,mrr,mred_country,mred_user_activity,mred_track_pop,mred_artist_pop,\
         mred_gender,be_less_wrong,cv_country,cv_user_activity,cv_track_pop,cv_artist_pop,\
         cv_gender,score,weighted_score\n",
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.fold,
            r.hit_rate,
            r.mrr,
            fmt_opt(r.mred_country),
            fmt_opt(r.mred_user_activity),
            fmt_opt(r.mred_track_pop),
            fmt_opt(r.mred_artist_pop),
            fmt_opt(r.mred_gender),
            r.be_less_wrong,
            fmt_opt(r.cv_country),
            fmt_opt(r.cv_user_activity),
            fmt_opt(r.cv_track_pop),
            fmt_opt(r.cv_artist_pop),
            fmt_opt(r.cv_gender),
            r.score,
            fmt_opt(r.weighted_score),
        );
    }
    out
}

/// Per-model training curves: fold, model label, epoch, losses.
pub fn curves_csv(folds: &[FoldArtifacts]) -> String {
    let mut out = String::from("fold,model,epoch,mean_loss,mean_kl,mean_fairness\n");
    let mut push = |fold_id: u32, label: &str, trace: &[EpochTrace]| {
        for t in trace {
            let _ = writeln!(
                out,
                "fold{fold_id},{label},{},{},{},{}",
                t.epoch, t.mean_loss, t.mean_kl, t.mean_fairness
            );
        }
    };
    for f in folds {
        for (g, gm) in f.ensemble.artist_models.iter().enumerate() {
            push(f.fold_id, &format!("g{g}"), &gm.trace);
        }
        push(f.fold_id, "ltrack", &f.ensemble.least_track_model.trace);
    }
    out
}

/// TSV dump: `user_id<TAB>rank<TAB>track_id<TAB>source`, ranks 1-based.
pub fn recommendations_tsv(recs: &[RecommendationList], data: &Dataset) -> String {
    let mut out = String::new();
    for r in recs {
        let user_id = &data.users.users[r.user as usize].user_id;
        for (rank, (&item, source)) in r.items.iter().zip(&r.sources).enumerate() {
            let _ = writeln!(
                out,
                "{user_id}\t{}\t{}\t{}",
                rank + 1,
                data.catalog.items[item as usize].item_id,
                source.code()
            );
        }
    }
    out
}

/// Writes metrics.json, metrics.csv, curves.csv, and per-fold
/// recommendation TSVs into `dir`.
pub fn write_reports(dir: &Path, output: &RunOutput, data: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let reports = output.reports();
    std::fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(&reports)? + "\n",
    )?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(&reports))?;
    std::fs::write(dir.join("curves.csv"), curves_csv(&output.folds))?;
    for f in &output.folds {
        std::fs::write(
            dir.join(format!("recommendations_fold{}.tsv", f.fold_id)),
            recommendations_tsv(&f.recommendations, data),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bprmf::BprTrainConfig;
    use crate::config::{DatasetSource, Profile};
    use crate::dataset::SyntheticParams;
    use crate::vae::{GroupedTrainConfig, VaeTrainConfig};

    fn smoke_config(n_users: usize, folds: u32, seed: u64) -> RunConfig {
        RunConfig {
            dataset: DatasetSource::Synthetic {
                params: SyntheticParams {
                    n_users,
                    n_items: 60,
                    n_artists: 12,
                    mean_interactions: 10.0,
                    popularity_exponent: 1.1,
                    seed: seed.wrapping_add(77),
                },
            },
            profile: Profile::Phase2,
            seed,
            folds,
            k: 12,
            item_binning: ItemBinning::Quartile,
            vae: Some(GroupedTrainConfig {
                vae: VaeTrainConfig {
                    hidden: 8,
                    latent: 4,
                    epochs: 1,
                    batch_size: 8,
                    lr: 0.01,
                    beta: 1e-4,
                    gamma: 3e-3,
                    dropout: 0.2,
                    seed,
                },
                extra_epochs_group0: 1,
                least_track_latent: 3,
            }),
            bpr: Some(BprTrainConfig {
                dim: 8,
                epochs: 2,
                batch_size: 64,
                lr: 0.01,
                seed,
            }),
            curation: None,
            weights: None,
        }
    }

    #[test]
    fn fold_run_produces_valid_lists_and_report() {
        let cfg = smoke_config(25, 1, 9);
        let data = cfg.load_dataset().unwrap();
        let out = run_folds(&data, &cfg).unwrap();
        assert_eq!(out.folds.len(), 1);
        let f = &out.folds[0];
        assert_eq!(f.recommendations.len(), data.interactions.n_users());
        for r in &f.recommendations {
            assert_eq!(r.items.len(), 12);
        }
        let rep = &f.report;
        assert!(rep.hit_rate >= 0.0 && rep.hit_rate <= 1.0);
        assert!(rep.mrr <= rep.hit_rate + 1e-12);
        for m in [rep.mred_track_pop, rep.mred_artist_pop, rep.mred_gender] {
            if let Some(v) = m {
                assert!(v <= 1e-12, "MRED must be <= 0, got {v}");
            }
        }
    }

    #[test]
    fn mean_row_is_column_mean() {
        let cfg = smoke_config(25, 2, 4);
        let data = cfg.load_dataset().unwrap();
        let out = run_folds(&data, &cfg).unwrap();
        let expect = (out.folds[0].report.hit_rate + out.folds[1].report.hit_rate) / 2.0;
        assert!((out.mean.hit_rate - expect).abs() < 1e-15);
        let expect_score = (out.folds[0].report.score + out.folds[1].report.score) / 2.0;
        assert!((out.mean.score - expect_score).abs() < 1e-15);
    }

    #[test]
    fn weighted_score_uses_supplied_weights() {
        let mut cfg = smoke_config(25, 1, 5);
        cfg.weights = Some(
            [("hit_rate".to_string(), 3.0), ("mrr".to_string(), 1.0)]
                .into_iter()
                .collect(),
        );
        let data = cfg.load_dataset().unwrap();
        let out = run_folds(&data, &cfg).unwrap();
        let r = &out.folds[0].report;
        let expect = (3.0 * r.hit_rate + r.mrr) / 4.0;
        assert!((r.weighted_score.unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn reports_round_trip_and_csv_shape() {
        let cfg = smoke_config(25, 1, 6);
        let data = cfg.load_dataset().unwrap();
        let out = run_folds(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_reports(dir.path(), &out, &data).unwrap();
        let json = std::fs::read_to_string(dir.path().join("metrics.json")).unwrap();
        let back: Vec<MetricsReport> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), 2); // fold0 + mean
        assert_eq!(back.last().unwrap().fold, "mean");
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let header_cols = csv.lines().next().unwrap().split(',').count();
        for line in csv.lines().skip(1) {
            assert_eq!(line.split(',').count(), header_cols);
        }
        let tsv = std::fs::read_to_string(dir.path().join("recommendations_fold0.tsv")).unwrap();
        let first = tsv.lines().next().unwrap();
        assert_eq!(first.split('\t').count(), 4);
        assert_eq!(first.split('\t').nth(1), Some("1"));
    }

    #[test]
    fn run_is_deterministic() {
        let cfg = smoke_config(25, 1, 8);
        let data = cfg.load_dataset().unwrap();
        let a = run_folds(&data, &cfg).unwrap();
        let b = run_folds(&data, &cfg).unwrap();
        assert_eq!(metrics_csv(&a.reports()), metrics_csv(&b.reports()));
        assert_eq!(
            recommendations_tsv(&a.folds[0].recommendations, &data),
            recommendations_tsv(&b.folds[0].recommendations, &data)
        );
    }

    #[test]
    fn fold_failure_names_the_fold() {
        let mut cfg = smoke_config(25, 1, 9);
        // force an empty artist bin with pow10 binning on tiny playcounts
        cfg.item_binning = ItemBinning::Pow10;
        let data = cfg.load_dataset().unwrap();
        let err = match run_folds(&data, &cfg) {
            Err(e) => e,
            Ok(_) => panic!("expected empty-bin failure"),
        };
        assert!(err.to_string().contains("fold 0"), "{err}");
    }
}
