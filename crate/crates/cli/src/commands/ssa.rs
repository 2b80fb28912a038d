//! `ssa-build`: turn a directory of per-year birth-name counts into a
//! name-statistics table with ambiguity scores and resolved genders.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use orgmail_core::gender::{ambiguity_score, likely_gender, GenderConfig};
use orgmail_core::ingest::{atomic_write, load_ssa};
use serde::Serialize;

use crate::commands::{out_dir, write_json};
use crate::config::{parse_years, require_path, ConfigMap};

#[derive(Args, Debug)]
pub struct SsaBuildArgs {
    /// Directory of yobYYYY.txt files (name,sex,count per line).
    #[arg(long, value_name = "DIR")]
    ssa_dir: Option<PathBuf>,
    /// Inclusive birth-year range FROM:TO [default: 1931:1977].
    #[arg(long, value_name = "FROM:TO")]
    ssa_years: Option<String>,
    /// Ambiguity score above which a name decides no gender [default: 10].
    #[arg(long, value_name = "SCORE")]
    as_threshold: Option<f64>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct SsaSummary {
    year_from: i32,
    year_to: i32,
    ambiguity_threshold: f64,
    distinct_names: usize,
    /// Share of names whose ambiguity score is exactly zero (single-gender).
    pct_score_zero: f64,
    /// Share of names at or below the threshold (gender decidable).
    pct_score_at_most_threshold: f64,
}

pub fn run(args: SsaBuildArgs, cfg: &ConfigMap) -> Result<()> {
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
    let out = out_dir(args.out_dir, cfg)?;

    let gender_cfg = GenderConfig {
        ambiguity_threshold: threshold,
        year_from,
        year_to,
    }
    .validate()
    .map_err(|e| anyhow!(e))?;
    let stats = load_ssa(&ssa_dir, year_from, year_to)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["name", "male", "female", "ambiguity_score", "gender"])?;
    let mut zero = 0usize;
    let mut within = 0usize;
    for (name, (male, female)) in stats.iter() {
        let score = ambiguity_score(&stats, name)
            .ok_or_else(|| anyhow!("score vanished for known name {name:?}"))?;
        if score == 0.0 {
            zero += 1;
        }
        if score <= threshold {
            within += 1;
        }
        let gender = likely_gender(&stats, name, &gender_cfg);
        wtr.write_record([
            name,
            &male.to_string(),
            &female.to_string(),
            &format!("{score}"),
            gender.as_str(),
        ])?;
    }
    let names_path = out.join("names.csv");
    let bytes = wtr
        .into_inner()
        .map_err(|e| anyhow!("csv buffer error: {e}"))?;
    atomic_write(&names_path, &bytes)?;

    let distinct = stats.len();
    let pct = |n: usize| {
        if distinct == 0 {
            0.0
        } else {
            100.0 * n as f64 / distinct as f64
        }
    };
    let summary = SsaSummary {
        year_from,
        year_to,
        ambiguity_threshold: threshold,
        distinct_names: distinct,
        pct_score_zero: pct(zero),
        pct_score_at_most_threshold: pct(within),
    };
    let summary_path = out.join("ssa_summary.json");
    write_json(&summary_path, &summary)?;

    println!(
        "ssa-build: {distinct} names from {year_from}..={year_to}; score 0: {:.1}%, score <= {threshold}: {:.1}%",
        summary.pct_score_zero, summary.pct_score_at_most_threshold
    );
    println!("wrote {}", names_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
