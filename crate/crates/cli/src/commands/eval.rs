//! `eval`: score a trained model on one split, canonical orientation only,
//! writing per-instance predictions and an accuracy summary.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::Args;
use orgmail_core::ingest::atomic_write;
use orgmail_core::learn::{evaluate, load_model, majority_baseline, FeatureFamily, Model};
use orgmail_core::model::Split;
use serde::Serialize;

use crate::commands::{out_dir, write_json};
use crate::config::{require_artifact, require_path, ConfigMap};
use crate::featurize::{build_instances, load_feature_table, InstanceFilter};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model file from `orgmail train`.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Directory holding the feature tables from `orgmail features`.
    #[arg(long, value_name = "DIR")]
    features_dir: Option<PathBuf>,
    /// Split to evaluate: train, dev, or test [default: test].
    #[arg(long, value_name = "SPLIT")]
    split_name: Option<String>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalSummary {
    split: String,
    feature_sets: String,
    instances: usize,
    correct: usize,
    accuracy: f64,
    majority_label_on_split: String,
    majority_accuracy_on_split: f64,
}

/// Reads the feature selection a model was trained with out of its metadata.
pub fn model_families(model: &Model) -> Result<(BTreeSet<FeatureFamily>, bool)> {
    let label = model.metadata.get("feature_sets").ok_or_else(|| {
        anyhow!("model file lacks feature_sets metadata; retrain with `orgmail train`")
    })?;
    let mut families = BTreeSet::new();
    for part in label.split('+') {
        families.insert(
            part.parse::<FeatureFamily>()
                .map_err(|e| anyhow!("model metadata: {e}"))?,
        );
    }
    let gne_both = model
        .metadata
        .get("gne_both")
        .map(|v| v == "true")
        .unwrap_or(false);
    Ok((families, gne_both))
}

pub fn run(args: EvalArgs, cfg: &ConfigMap) -> Result<()> {
    let model_path = require_path(args.model, cfg, "model")?;
    let features_dir = require_path(args.features_dir, cfg, "features-dir")?;
    let split: Split = args
        .split_name
        .or_else(|| cfg.string("split-name"))
        .unwrap_or_else(|| "test".to_string())
        .parse()
        .map_err(|e: String| anyhow!(e))?;
    let out = out_dir(args.out_dir, cfg)?;

    require_artifact(&model_path, "model file", "train")?;
    let model = load_model(&model_path).map_err(|e| anyhow!("{e}"))?;
    let (families, gne_both) = model_families(&model)?;
    let table = load_feature_table(&features_dir)?;
    let instances = build_instances(
        &table,
        InstanceFilter {
            split: Some(split),
            canonical_only: true,
        },
        &families,
        gne_both,
    )?;
    if instances.is_empty() {
        bail!(
            "no {} instances in {}",
            split.as_str(),
            features_dir.display()
        );
    }

    let evaluation = evaluate(&model, &instances)?;
    let (majority_label, majority_accuracy) = majority_baseline(&instances)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["instance_id", "gold", "pred", "decision_value"])?;
    for p in &evaluation.predictions {
        wtr.write_record([
            p.id.as_str(),
            p.gold.as_str(),
            p.predicted.as_str(),
            &format!("{}", p.decision_value),
        ])?;
    }
    let predictions_path = out.join(format!("predictions_{}.csv", split.as_str()));
    let bytes = wtr
        .into_inner()
        .map_err(|e| anyhow!("csv buffer error: {e}"))?;
    atomic_write(&predictions_path, &bytes)?;

    let summary = EvalSummary {
        split: split.as_str().to_string(),
        feature_sets: model
            .metadata
            .get("feature_sets")
            .cloned()
            .unwrap_or_default(),
        instances: evaluation.total,
        correct: evaluation.correct,
        accuracy: evaluation.accuracy,
        majority_label_on_split: majority_label.as_str().to_string(),
        majority_accuracy_on_split: majority_accuracy,
    };
    let summary_path = out.join(format!("eval_{}.json", split.as_str()));
    write_json(&summary_path, &summary)?;

    println!(
        "eval: {} on {}: accuracy {:.4} ({}/{}); split majority {} at {:.4}",
        summary.feature_sets,
        summary.split,
        summary.accuracy,
        summary.correct,
        summary.instances,
        summary.majority_label_on_split,
        summary.majority_accuracy_on_split
    );
    println!("wrote {}", predictions_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
