//! `train`: fit the power-direction classifier on the training split, both
//! orientations of every pair, for a chosen feature-family selection.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::Args;
use orgmail_core::learn::{evaluate, save_model, train, FeatureFamily, TrainConfig};
use orgmail_core::model::Split;
use serde::Serialize;

use crate::commands::{out_dir, write_json};
use crate::config::{families_label, parse_families, parse_kernel, require_path, ConfigMap};
use crate::featurize::{
    build_instances, dense_layout, load_feature_table, InstanceFilter, MODEL_FILE, VOCAB_FILE,
};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory holding the feature tables from `orgmail features`.
    #[arg(long, value_name = "DIR")]
    features_dir: Option<PathBuf>,
    /// Feature families to use, comma separated from PST, VRB, THR, DA, ODP,
    /// LEX, GEN, GNE [default: all].
    #[arg(long, value_name = "LIST")]
    feature_sets: Option<String>,
    /// Encode the gender environment of both people instead of only the
    /// first-listed one.
    #[arg(long)]
    gne_both: bool,
    /// Soft-margin parameter [default: 1].
    #[arg(long, value_name = "C")]
    c: Option<f64>,
    /// Kernel: quadratic or linear [default: quadratic].
    #[arg(long, value_name = "KERNEL")]
    kernel: Option<String>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainSummary {
    feature_sets: String,
    gne_both: bool,
    kernel: String,
    c: f64,
    train_instances: usize,
    support_vectors: usize,
    dense_dim: usize,
    sparse_dim: usize,
    train_accuracy: f64,
}

pub fn run(args: TrainArgs, seed: u64, cfg: &ConfigMap) -> Result<()> {
    let features_dir = require_path(args.features_dir, cfg, "features-dir")?;
    let families = match args.feature_sets.or_else(|| cfg.string("feature-sets")) {
        Some(list) => parse_families(&list)?,
        None => FeatureFamily::ALL.into_iter().collect(),
    };
    let gne_both = args.gne_both || cfg.bool("gne-both").unwrap_or(false);
    let c = args.c.or_else(|| cfg.f64("c")).unwrap_or(1.0);
    let kernel = args
        .kernel
        .or_else(|| cfg.string("kernel"))
        .map(|s| parse_kernel(&s))
        .transpose()?
        .unwrap_or(orgmail_core::learn::Kernel::Quadratic);
    let out = out_dir(args.out_dir, cfg)?;

    let table = load_feature_table(&features_dir)?;
    let instances = build_instances(
        &table,
        InstanceFilter {
            split: Some(Split::Train),
            canonical_only: false,
        },
        &families,
        gne_both,
    )?;
    if instances.is_empty() {
        bail!(
            "no training instances in {}; check the split settings of `orgmail features`",
            features_dir.display()
        );
    }

    let config = TrainConfig {
        kernel,
        c,
        seed,
        ..TrainConfig::default()
    };
    let mut model = train(&instances, &config)?;
    let expected_width = dense_layout(&families, gne_both).len();
    if model.dense_dim != expected_width {
        bail!(
            "internal error: dense layout expects {expected_width} columns, model has {}",
            model.dense_dim
        );
    }
    let label = families_label(&families);
    model
        .metadata
        .insert("feature_sets".to_string(), label.clone());
    model
        .metadata
        .insert("gne_both".to_string(), gne_both.to_string());
    model
        .metadata
        .insert("vocabulary".to_string(), VOCAB_FILE.to_string());
    model
        .metadata
        .insert("vocabulary_size".to_string(), table.vocab.len().to_string());

    let evaluation = evaluate(&model, &instances)?;
    let model_path = out.join(MODEL_FILE);
    save_model(&model_path, &model).map_err(|e| anyhow!("{e}"))?;
    let summary = TrainSummary {
        feature_sets: label,
        gne_both,
        kernel: format!("{kernel:?}").to_lowercase(),
        c,
        train_instances: instances.len(),
        support_vectors: model.support.len(),
        dense_dim: model.dense_dim,
        sparse_dim: model.sparse_dim,
        train_accuracy: evaluation.accuracy,
    };
    let summary_path = out.join("train_summary.json");
    write_json(&summary_path, &summary)?;

    println!(
        "train: {} [{}] C={} on {} instances -> {} support vectors, train accuracy {:.4}",
        summary.feature_sets,
        summary.kernel,
        summary.c,
        summary.train_instances,
        summary.support_vectors,
        summary.train_accuracy
    );
    println!("wrote {}", model_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
