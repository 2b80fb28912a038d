//! `gender-assign`: resolve a gender for every corpus participant from name
//! statistics plus optional manual overrides, and report coverage.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use orgmail_core::gender::{assign_all, coverage_report, GenderConfig};
use orgmail_core::ingest::{load_overrides, load_ssa, load_threads};

use crate::commands::{out_dir, write_json};
use crate::config::{parse_years, require_path, ConfigMap};
use crate::tables::write_participants;

#[derive(Args, Debug)]
pub struct GenderAssignArgs {
    /// Thread corpus (one JSON thread per line).
    #[arg(long, value_name = "FILE")]
    threads: Option<PathBuf>,
    /// Directory of yobYYYY.txt files.
    #[arg(long, value_name = "DIR")]
    ssa_dir: Option<PathBuf>,
    /// Inclusive birth-year range FROM:TO [default: 1931:1977].
    #[arg(long, value_name = "FROM:TO")]
    ssa_years: Option<String>,
    /// Ambiguity score above which a name decides no gender [default: 10].
    #[arg(long, value_name = "SCORE")]
    as_threshold: Option<f64>,
    /// Manual gender overrides (email,gender CSV); also scored as gold.
    #[arg(long, value_name = "FILE")]
    overrides: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

pub fn run(args: GenderAssignArgs, cfg: &ConfigMap) -> Result<()> {
    let threads_path = require_path(args.threads, cfg, "threads")?;
    let ssa_dir = require_path(args.ssa_dir, cfg, "ssa-dir")?;
    let (year_from, year_to) = args
        .ssa_years
        .or_else(|| cfg.string("ssa-years"))
        .map(|s| parse_years(&s))
        .transpose()?
        .unwrap_or((1931, 1977));
    let threshold = args
        .as_threshold
        .or_else(|| cfg.f64("as-threshold"))
        .unwrap_or(10.0);
    let overrides_path = args.overrides.or_else(|| cfg.path("overrides"));
    let out = out_dir(args.out_dir, cfg)?;

    let gender_cfg = GenderConfig {
        ambiguity_threshold: threshold,
        year_from,
        year_to,
    }
    .validate()
    .map_err(|e| anyhow!(e))?;
    let corpus = load_threads(&threads_path)?;
    let stats = load_ssa(&ssa_dir, year_from, year_to)?;
    let overrides = match &overrides_path {
        Some(path) => load_overrides(path)?,
        None => BTreeMap::new(),
    };

    let records = assign_all(&corpus.sources, &stats, &overrides, &gender_cfg);
    let gold = if overrides.is_empty() {
        None
    } else {
        Some(&overrides)
    };
    let report = coverage_report(
        &corpus.threads,
        &corpus.sources,
        &records,
        &stats,
        &gender_cfg,
        gold,
    );

    let participants_path = out.join("participants.csv");
    write_participants(&participants_path, &records)?;
    let report_path = out.join("gender_report.json");
    write_json(&report_path, &report)?;

    println!(
        "gender-assign: {}/{} participants resolved ({:.1}%); ASGI {:.1}%, APGI {:.1}% of {} threads",
        report.assigned_participants,
        report.total_participants,
        report.participant_coverage_pct,
        report.asgi_pct,
        report.apgi_pct,
        report.total_threads
    );
    if let Some(gold) = &report.gold {
        println!(
            "gold check: {}/{} auto-resolved, accuracy {:.1}%",
            gold.auto_assigned, gold.gold_in_corpus, gold.accuracy_pct
        );
    }
    println!("wrote {}", participants_path.display());
    println!("wrote {}", report_path.display());
    Ok(())
}
