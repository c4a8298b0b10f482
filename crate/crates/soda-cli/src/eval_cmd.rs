//! `soda eval`: AUC/FPR95 from a scores CSV plus labels, and optional
//! accuracy-by-source-similarity bins when predicted classes are supplied.

use std::path::PathBuf;

use clap::Args;

use soda::io;
use soda::metrics::{binned_accuracy, evaluate};
use soda::{Error, Result};

use crate::config_file::{required, resolve, ConfigFile};

const CONFIG_KEYS: &[&str] = &["scores", "labels", "bins", "classes", "bins_out"];

#[derive(Args)]
pub struct EvalArgs {
    /// key=value config file; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scores CSV written by `soda score`
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Labels CSV (index,ood_label[,class_label])
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Equal-count bins for the accuracy breakdown [default 10]
    #[arg(long)]
    bins: Option<usize>,
    /// Predicted classes (row,class_name CSV); enables binned accuracy
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Write the per-bin CSV here instead of stdout
    #[arg(long)]
    bins_out: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref(), "eval", CONFIG_KEYS)?;
    let scores_path = required(resolve(args.scores, &cfg, "scores")?, "scores")?;
    let labels_path = required(resolve(args.labels, &cfg, "labels")?, "labels")?;
    let bins = resolve(args.bins, &cfg, "bins")?.unwrap_or(10);
    let classes_path = resolve(args.classes, &cfg, "classes")?;
    let bins_out = resolve(args.bins_out, &cfg, "bins_out")?;

    let scores = io::load_scores(&scores_path)?;
    let labels = io::load_labels(&labels_path)?;
    if scores.n() != labels.n() {
        return Err(Error::LengthMismatch {
            left: scores.n(),
            right: labels.n(),
        });
    }
    let is_ood = labels.ood_flags();
    let result = evaluate(&scores.score_final, &is_ood)?;
    println!(
        "AUC={:?} FPR95={:?} n_id={} n_ood={}",
        result.auc, result.fpr95, result.n_id, result.n_ood
    );

    let Some(classes_path) = classes_path else {
        return Ok(());
    };
    let predictions = io::load_class_assignments(&classes_path)?;
    if predictions.len() != labels.n() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.n(),
        });
    }
    let d_src = scores.d_src.as_ref().ok_or_else(|| {
        Error::ConflictingFlags(
            "binned accuracy needs the d_src column; score in mode full".into(),
        )
    })?;

    // Accuracy is defined only where the labels file names a true class.
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    let mut sims = Vec::new();
    for (entry, p) in labels.entries().iter().zip(&predictions) {
        if let Some(class) = &entry.class_label {
            pred.push(p.clone());
            truth.push(class.clone());
            sims.push(d_src[entry.index]);
        }
    }
    if pred.is_empty() {
        return Err(Error::InvalidConfig(
            "labels file has no class column values; nothing to bin".into(),
        ));
    }
    let rows = binned_accuracy(&pred, &truth, &sims, bins)?;
    let mut text = String::from("bin,d_src_min,d_src_max,accuracy,count\n");
    for (b, row) in rows.iter().enumerate() {
        text.push_str(&format!(
            "{b},{:.8e},{:.8e},{:.8e},{}\n",
            row.d_src_min, row.d_src_max, row.accuracy, row.count
        ));
    }
    match bins_out {
        Some(path) => std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?,
        None => print!("{text}"),
    }
    Ok(())
}
