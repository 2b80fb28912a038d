//! `ablate`: train one system per feature-family selection, tune C on the
//! dev split, rank by dev accuracy, then score everything on the test split
//! and compare selected system pairs with McNemar's test.
//!
//! Comparisons cover every pair of specs where the richer one adds only the
//! gender families (GEN and/or GNE) to the poorer one, plus every spec
//! against the train-majority baseline.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::Args;
use orgmail_core::ingest::atomic_write;
use orgmail_core::learn::{
    ablate, error_reduction_pct, evaluate, majority_baseline, train, AblationRun, AblationSpec,
    FeatureFamily, TrainConfig,
};
use orgmail_core::model::Split;
use orgmail_core::pairs::HpLabel;
use orgmail_core::stats::{mcnemar, McNemarMethod, McNemarResult};
use serde::Serialize;

use crate::commands::{out_dir, write_json};
use crate::config::{parse_grid, parse_kernel, parse_specs, require_path, ConfigMap};
use crate::featurize::{build_instances, load_feature_table, FeatureTable, InstanceFilter};

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Directory holding the feature tables from `orgmail features`.
    #[arg(long, value_name = "DIR")]
    features_dir: Option<PathBuf>,
    /// Systems to compare: comma-separated specs, each a '+'-joined family
    /// list, e.g. "LEX,PST+VRB+LEX" [default: a structural/lexical ladder
    /// with and without the gender families].
    #[arg(long, value_name = "SPECS")]
    specs: Option<String>,
    /// C values to try per spec [default: 0.1,1,10].
    #[arg(long, value_name = "LIST")]
    c_grid: Option<String>,
    /// Kernel: quadratic or linear [default: quadratic].
    #[arg(long, value_name = "KERNEL")]
    kernel: Option<String>,
    /// Encode the gender environment of both people instead of only the
    /// first-listed one.
    #[arg(long)]
    gne_both: bool,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

const DEFAULT_SPECS: &str = "PST+VRB+THR+DA+ODP,LEX,PST+VRB+THR+DA+ODP+LEX,\
PST+VRB+THR+DA+ODP+LEX+GEN,PST+VRB+THR+DA+ODP+LEX+GNE,PST+VRB+THR+DA+ODP+LEX+GEN+GNE";

#[derive(Serialize)]
struct SystemReport {
    rank: usize,
    name: String,
    best_c: f64,
    dev_accuracy: f64,
    test_accuracy: f64,
    error_reduction_vs_majority_pct: f64,
    c_accuracies: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct MajorityReport {
    label: String,
    dev_accuracy: f64,
    test_accuracy: f64,
}

#[derive(Serialize)]
struct Comparison {
    baseline: String,
    richer: String,
    added: String,
    test_accuracy_baseline: f64,
    test_accuracy_richer: f64,
    error_reduction_pct: f64,
    mcnemar: McNemarResult,
}

#[derive(Serialize)]
struct AblationReport {
    kernel: String,
    c_grid: Vec<f64>,
    majority: MajorityReport,
    systems: Vec<SystemReport>,
    comparisons: Vec<Comparison>,
}

fn accuracy_of(label: HpLabel, gold: &[HpLabel]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    gold.iter().filter(|&&g| g == label).count() as f64 / gold.len() as f64
}

pub fn run(args: AblateArgs, seed: u64, cfg: &ConfigMap) -> Result<()> {
    let features_dir = require_path(args.features_dir, cfg, "features-dir")?;
    let specs = parse_specs(
        &args
            .specs
            .or_else(|| cfg.string("specs"))
            .unwrap_or_else(|| DEFAULT_SPECS.to_string()),
    )?;
    let c_grid = parse_grid(
        &args
            .c_grid
            .or_else(|| cfg.string("c-grid"))
            .unwrap_or_else(|| "0.1,1,10".to_string()),
    )?;
    let kernel = args
        .kernel
        .or_else(|| cfg.string("kernel"))
        .map(|s| parse_kernel(&s))
        .transpose()?
        .unwrap_or(orgmail_core::learn::Kernel::Quadratic);
    let gne_both = args.gne_both || cfg.bool("gne-both").unwrap_or(false);
    let out = out_dir(args.out_dir, cfg)?;

    let table = load_feature_table(&features_dir)?;
    let base = TrainConfig {
        kernel,
        seed,
        ..TrainConfig::default()
    };

    let build = |table: &FeatureTable, spec: &AblationSpec, split: Split, canonical_only: bool| {
        build_instances(
            table,
            InstanceFilter {
                split: Some(split),
                canonical_only,
            },
            &spec.families,
            gne_both,
        )
    };

    let mut runs = Vec::new();
    for spec in &specs {
        let train_instances = build(&table, spec, Split::Train, false)?;
        let dev_instances = build(&table, spec, Split::Dev, true)?;
        if train_instances.is_empty() || dev_instances.is_empty() {
            bail!(
                "spec {} has {} train / {} dev instances; check the split settings of `orgmail features`",
                spec.name,
                train_instances.len(),
                dev_instances.len()
            );
        }
        runs.push(AblationRun {
            spec: spec.clone(),
            train: train_instances,
            dev: dev_instances,
        });
    }

    let outcomes = ablate(&runs, &c_grid, &base).map_err(|e| anyhow!("{e}"))?;

    // Majority baseline: the training split's majority label, applied
    // everywhere. Labels are identical across specs, so any run serves.
    let (majority_label, _) = majority_baseline(&runs[0].train).map_err(|e| anyhow!("{e}"))?;
    let dev_gold: Vec<HpLabel> = runs[0].dev.iter().map(|i| i.label).collect();

    // Test-split scoring with each spec's selected C.
    let mut systems = Vec::new();
    let mut test_preds: Vec<(String, Vec<HpLabel>)> = Vec::new();
    let mut test_gold: Option<Vec<HpLabel>> = None;
    let mut test_ids: Option<Vec<String>> = None;
    for (rank, outcome) in outcomes.iter().enumerate() {
        let run = runs
            .iter()
            .find(|r| r.spec.name == outcome.name)
            .expect("outcome name matches a run");
        let test_instances = build(&table, &run.spec, Split::Test, true)?;
        if test_instances.is_empty() {
            bail!(
                "spec {} has no test instances; check the split settings of `orgmail features`",
                outcome.name
            );
        }
        let ids: Vec<String> = test_instances.iter().map(|i| i.id.clone()).collect();
        match &test_ids {
            None => test_ids = Some(ids),
            Some(existing) => {
                if existing != &ids {
                    bail!("internal error: test instance sets differ between specs");
                }
            }
        }
        let config = TrainConfig {
            c: outcome.best_c,
            ..base.clone()
        };
        let model = train(&run.train, &config).map_err(|e| anyhow!("{e}"))?;
        let evaluation = evaluate(&model, &test_instances).map_err(|e| anyhow!("{e}"))?;
        let gold: Vec<HpLabel> = test_instances.iter().map(|i| i.label).collect();
        let majority_test = accuracy_of(majority_label, &gold);
        systems.push(SystemReport {
            rank: rank + 1,
            name: outcome.name.clone(),
            best_c: outcome.best_c,
            dev_accuracy: outcome.dev_accuracy,
            test_accuracy: evaluation.accuracy,
            error_reduction_vs_majority_pct: error_reduction_pct(
                majority_test,
                evaluation.accuracy,
            ),
            c_accuracies: outcome.c_accuracies.clone(),
        });
        test_preds.push((
            outcome.name.clone(),
            evaluation.predictions.iter().map(|p| p.predicted).collect(),
        ));
        test_gold.get_or_insert(gold);
    }
    let test_gold = test_gold.expect("at least one spec");

    let majority = MajorityReport {
        label: majority_label.as_str().to_string(),
        dev_accuracy: accuracy_of(majority_label, &dev_gold),
        test_accuracy: accuracy_of(majority_label, &test_gold),
    };
    let majority_preds: Vec<HpLabel> = vec![majority_label; test_gold.len()];

    let preds_for =
        |name: &str| -> &Vec<HpLabel> { &test_preds.iter().find(|(n, _)| n == name).unwrap().1 };
    let mut comparisons = Vec::new();
    for system in &systems {
        let result = mcnemar(&majority_preds, preds_for(&system.name), &test_gold)
            .map_err(|e| anyhow!("{e}"))?;
        comparisons.push(Comparison {
            baseline: "MAJORITY".to_string(),
            richer: system.name.clone(),
            added: system.name.clone(),
            test_accuracy_baseline: majority.test_accuracy,
            test_accuracy_richer: system.test_accuracy,
            error_reduction_pct: system.error_reduction_vs_majority_pct,
            mcnemar: result,
        });
    }
    let family_set = |name: &str| -> BTreeSet<FeatureFamily> {
        specs
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.families.clone())
            .unwrap()
    };
    let gender_families: BTreeSet<FeatureFamily> = [FeatureFamily::Gen, FeatureFamily::Gne]
        .into_iter()
        .collect();
    let mut delta_pairs: Vec<(String, String, String)> = Vec::new();
    for a in &systems {
        let fa = family_set(&a.name);
        for b in &systems {
            let fb = family_set(&b.name);
            if fa.is_subset(&fb) && fa != fb {
                let added: BTreeSet<FeatureFamily> = fb.difference(&fa).copied().collect();
                if added.is_subset(&gender_families) {
                    let added_label = added
                        .iter()
                        .map(|f| f.as_str())
                        .collect::<Vec<_>>()
                        .join("+");
                    delta_pairs.push((a.name.clone(), b.name.clone(), added_label));
                }
            }
        }
    }
    delta_pairs.sort();
    for (a_name, b_name, added) in delta_pairs {
        let a = systems.iter().find(|s| s.name == a_name).unwrap();
        let b = systems.iter().find(|s| s.name == b_name).unwrap();
        let result = mcnemar(preds_for(&a_name), preds_for(&b_name), &test_gold)
            .map_err(|e| anyhow!("{e}"))?;
        comparisons.push(Comparison {
            baseline: a_name.clone(),
            richer: b_name.clone(),
            added,
            test_accuracy_baseline: a.test_accuracy,
            test_accuracy_richer: b.test_accuracy,
            error_reduction_pct: error_reduction_pct(a.test_accuracy, b.test_accuracy),
            mcnemar: result,
        });
    }

    // Table: majority row first, then systems by dev-accuracy rank.
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "rank",
        "name",
        "best_c",
        "dev_accuracy",
        "test_accuracy",
        "error_reduction_vs_majority_pct",
    ])?;
    wtr.write_record([
        "",
        "MAJORITY",
        "",
        &format!("{}", majority.dev_accuracy),
        &format!("{}", majority.test_accuracy),
        "0",
    ])?;
    for s in &systems {
        wtr.write_record([
            &s.rank.to_string(),
            &s.name,
            &format!("{}", s.best_c),
            &format!("{}", s.dev_accuracy),
            &format!("{}", s.test_accuracy),
            &format!("{}", s.error_reduction_vs_majority_pct),
        ])?;
    }
    let table_path = out.join("ablation.csv");
    let bytes = wtr
        .into_inner()
        .map_err(|e| anyhow!("csv buffer error: {e}"))?;
    atomic_write(&table_path, &bytes)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "baseline",
        "richer",
        "added",
        "test_accuracy_baseline",
        "test_accuracy_richer",
        "error_reduction_pct",
        "mcnemar_b",
        "mcnemar_c",
        "mcnemar_method",
        "mcnemar_statistic",
        "mcnemar_p",
    ])?;
    for c in &comparisons {
        let method = match c.mcnemar.method {
            McNemarMethod::ExactBinomial => "exact_binomial",
            McNemarMethod::ChiSquare => "chi_square",
        };
        wtr.write_record([
            c.baseline.as_str(),
            c.richer.as_str(),
            c.added.as_str(),
            &format!("{}", c.test_accuracy_baseline),
            &format!("{}", c.test_accuracy_richer),
            &format!("{}", c.error_reduction_pct),
            &c.mcnemar.b.to_string(),
            &c.mcnemar.c.to_string(),
            method,
            &c.mcnemar
                .statistic
                .map(|s| format!("{s}"))
                .unwrap_or_default(),
            &format!("{}", c.mcnemar.p),
        ])?;
    }
    let comparisons_path = out.join("ablation_comparisons.csv");
    let bytes = wtr
        .into_inner()
        .map_err(|e| anyhow!("csv buffer error: {e}"))?;
    atomic_write(&comparisons_path, &bytes)?;

    let report = AblationReport {
        kernel: format!("{kernel:?}").to_lowercase(),
        c_grid,
        majority,
        systems,
        comparisons,
    };
    let json_path = out.join("ablation.json");
    write_json(&json_path, &report)?;

    println!(
        "ablate: {} systems on {} test instances; majority {:.4}",
        report.systems.len(),
        test_gold.len(),
        report.majority.test_accuracy
    );
    for s in &report.systems {
        println!(
            "  #{} {} (C={}): dev {:.4}, test {:.4}, error reduction vs majority {:.2}%",
            s.rank,
            s.name,
            s.best_c,
            s.dev_accuracy,
            s.test_accuracy,
            s.error_reduction_vs_majority_pct
        );
    }
    println!("wrote {}", table_path.display());
    println!("wrote {}", comparisons_path.display());
    println!("wrote {}", json_path.display());
    Ok(())
}
