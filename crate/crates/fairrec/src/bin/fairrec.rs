//! Command-line front end: generate a corpus, train one fold, produce
//! recommendations, evaluate them, or run the whole multi-fold protocol.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fairrec::bprmf::{train_bpr, BprModel};
use fairrec::checkpoint;
use fairrec::config::{Profile, RunConfig};
use fairrec::curation::curate_all;
use fairrec::dataset::{write_dataset, Dataset, EvalSplit};
use fairrec::pipeline::{
    self, curves_csv, evaluate_fold, item_groupings, metrics_csv, recommendations_tsv,
};
use fairrec::vae::{train_grouped, GroupedVaeEnsemble};
use fairrec::{Error, Result};

#[derive(Parser)]
#[command(name = "fairrec", about = "Fairness-aware music recommender", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Hyperparameter profile override.
    #[arg(long)]
    profile: Option<Profile>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Fold count override.
    #[arg(long)]
    folds: Option<u32>,
    /// JSON file mapping metric column names to weights.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset (TSV triple + manifest) to a directory.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one fold's models and save checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        fold: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Curate recommendation lists from saved checkpoints.
    Recommend {
        #[command(flatten)]
        common: Common,
        /// Directory holding the `train` checkpoints.
        #[arg(long)]
        models: PathBuf,
        /// Output TSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a recommendation TSV against the fold's held-out items.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        models: PathBuf,
        /// TSV produced by `recommend`.
        #[arg(long)]
        recommendations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full protocol: split/train/recommend/evaluate per fold + mean row.
    RunFolds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(p) = common.profile {
        cfg.profile = p;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(f) = common.folds {
        cfg.folds = f;
    }
    if let Some(path) = &common.weights {
        let text = std::fs::read_to_string(path)?;
        let w: BTreeMap<String, f64> = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.weights = Some(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn guard_output(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Invalid(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FAIRREC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| Error::Config(format!("FAIRREC_THREADS={raw} is not a thread count")))?;
    if n == 0 {
        return Err(Error::Config("FAIRREC_THREADS must be at least 1".into()));
    }
    if n == 1 {
        fairrec::exec::force_sequential(true);
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest {
    n_users: usize,
    n_items: usize,
    n_interactions: usize,
    seed: u64,
}

fn cmd_generate(common: &Common, out: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    guard_output(&out.join("manifest.json"), common.force)?;
    let data = cfg.load_dataset()?;
    std::fs::create_dir_all(out)?;
    write_dataset(out, &data)?;
    let manifest = Manifest {
        n_users: data.interactions.n_users(),
        n_items: data.interactions.n_items(),
        n_interactions: data.interactions.n_interactions(),
        seed: cfg.seed,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    println!("wrote dataset to {}", out.display());
    Ok(())
}

fn cmd_train(common: &Common, fold: u32, out: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    guard_output(&out.join("ensemble.json"), common.force)?;
    let data = cfg.load_dataset()?;
    let split = fairrec::dataset::leave_one_out_split(&data.interactions, fold, cfg.seed)?;
    let (track, artist) = item_groupings(&data, cfg.item_binning);
    let ensemble = train_grouped(&split.train, &artist, &track, &cfg.grouped_config(fold))?;
    let bpr = train_bpr(&split.train, &cfg.bpr_config(fold))?;
    std::fs::create_dir_all(out)?;
    checkpoint::save(&out.join("split.json"), "split", &split)?;
    checkpoint::save(&out.join("ensemble.json"), "vae-ensemble", &ensemble)?;
    checkpoint::save(&out.join("bpr.json"), "bprmf", &bpr)?;
    let mut curves = String::from("model,epoch,mean_loss,mean_kl,mean_fairness\n");
    for (g, gm) in ensemble.artist_models.iter().enumerate() {
        for t in &gm.trace {
            curves += &format!("g{g},{},{},{},{}\n", t.epoch, t.mean_loss, t.mean_kl, t.mean_fairness);
        }
    }
    for t in &ensemble.least_track_model.trace {
        curves += &format!("ltrack,{},{},{},{}\n", t.epoch, t.mean_loss, t.mean_kl, t.mean_fairness);
    }
    std::fs::write(out.join("curves.csv"), curves)?;
    println!("trained fold {fold}; checkpoints in {}", out.display());
    Ok(())
}

fn cmd_recommend(common: &Common, models: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    guard_output(out, common.force)?;
    let data = cfg.load_dataset()?;
    let split: EvalSplit = checkpoint::load(&models.join("split.json"), "split")?;
    let ensemble: GroupedVaeEnsemble =
        checkpoint::load(&models.join("ensemble.json"), "vae-ensemble")?;
    let bpr: BprModel = checkpoint::load(&models.join("bpr.json"), "bprmf")?;
    let sweeps = ensemble.compute_sweeps(&split.train)?;
    let curation = cfg.curation_config();
    let recs = curate_all(&sweeps, &bpr, &split.train, &curation)?;
    for r in &recs {
        r.check(curation.k, &split.train)?;
    }
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(out, recommendations_tsv(&recs, &data))?;
    println!("wrote {} lists to {}", recs.len(), out.display());
    Ok(())
}

/// Parses a `recommend` TSV back into per-user index lists, requiring full
/// user coverage.
fn parse_recommendations(path: &Path, data: &Dataset) -> Result<Vec<Vec<u32>>> {
    let text = std::fs::read_to_string(path)?;
    let user_index: HashMap<&str, usize> = data
        .users
        .users
        .iter()
        .enumerate()
        .map(|(u, r)| (r.user_id.as_str(), u))
        .collect();
    let item_index: HashMap<&str, u32> = data
        .catalog
        .items
        .iter()
        .enumerate()
        .map(|(i, r)| (r.item_id.as_str(), i as u32))
        .collect();
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); data.interactions.n_users()];
    for (ln, line) in text.lines().enumerate() {
        let mut fields = line.split('\t');
        let (Some(uid), Some(_rank), Some(tid)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::parse(&path.display().to_string(), ln + 1, "expected 4 tab-separated fields"));
        };
        let &u = user_index
            .get(uid)
            .ok_or_else(|| Error::parse(&path.display().to_string(), ln + 1, format!("unknown user {uid}")))?;
        let &item = item_index
            .get(tid)
            .ok_or_else(|| Error::parse(&path.display().to_string(), ln + 1, format!("unknown track {tid}")))?;
        lists[u].push(item);
    }
    let missing: Vec<&str> = lists
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_empty())
        .map(|(u, _)| data.users.users[u].user_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Invalid(format!(
            "no recommendations for users: {}",
            missing.join(", ")
        )));
    }
    Ok(lists)
}

fn cmd_evaluate(common: &Common, models: &Path, recommendations: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    guard_output(&out.join("metrics.json"), common.force)?;
    let data = cfg.load_dataset()?;
    let split: EvalSplit = checkpoint::load(&models.join("split.json"), "split")?;
    let bpr: BprModel = checkpoint::load(&models.join("bpr.json"), "bprmf")?;
    let lists = parse_recommendations(recommendations, &data)?;
    let (track, artist) = item_groupings(&data, cfg.item_binning);
    let report = evaluate_fold(
        &lists,
        &split,
        &data,
        &bpr.item_factors,
        &track,
        &artist,
        cfg.curation_config().k,
        format!("fold{}", split.fold_id),
        cfg.weights.as_ref(),
    )?;
    std::fs::create_dir_all(out)?;
    let reports = vec![report];
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&reports)? + "\n",
    )?;
    std::fs::write(out.join("metrics.csv"), metrics_csv(&reports))?;
    println!("wrote metrics to {}", out.display());
    Ok(())
}

fn cmd_run_folds(common: &Common, out: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    guard_output(&out.join("metrics.json"), common.force)?;
    let data = cfg.load_dataset()?;
    let output = pipeline::run_folds(&data, &cfg)?;
    std::fs::create_dir_all(out)?;
    pipeline::write_reports(out, &output, &data)?;
    // dedicated curves file keeps the per-stage dumps comparable with `train`
    std::fs::write(out.join("curves.csv"), curves_csv(&output.folds))?;
    println!(
        "ran {} folds; mean score {}; reports in {}",
        output.folds.len(),
        output.mean.score,
        out.display()
    );
    Ok(())
}

fn run() -> Result<()> {
    configure_threads()?;
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate { common, out } => cmd_generate(common, out),
        Command::Train { common, fold, out } => cmd_train(common, *fold, out),
        Command::Recommend {
            common,
            models,
            out,
        } => cmd_recommend(common, models, out),
        Command::Evaluate {
            common,
            models,
            recommendations,
            out,
        } => cmd_evaluate(common, models, recommendations, out),
        Command::RunFolds { common, out } => cmd_run_folds(common, out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
