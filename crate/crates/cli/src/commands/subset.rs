//! `subset`: keep only threads whose senders (or all participants) have a
//! resolved gender.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use orgmail_core::gender::{subset_corpus, SubsetMode};
use orgmail_core::ingest::{load_threads, write_threads};
use serde::Serialize;

use crate::commands::{out_dir, write_json};
use crate::config::{require_artifact, require_path, ConfigMap};
use crate::tables::read_participants;

#[derive(Args, Debug)]
pub struct SubsetArgs {
    /// Thread corpus (one JSON thread per line).
    #[arg(long, value_name = "FILE")]
    threads: Option<PathBuf>,
    /// Participant table from `orgmail gender-assign`.
    #[arg(long, value_name = "FILE")]
    participants: Option<PathBuf>,
    /// Which subset to keep: asgi (all senders gender-identified) or apgi
    /// (all participants gender-identified).
    #[arg(long, value_name = "MODE")]
    subset: Option<String>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct SubsetSummary {
    mode: String,
    threads_in: usize,
    threads_kept: usize,
    pct_kept: f64,
}

pub fn run(args: SubsetArgs, cfg: &ConfigMap) -> Result<()> {
    let threads_path = require_path(args.threads, cfg, "threads")?;
    let participants_path = require_path(args.participants, cfg, "participants")?;
    let mode_str = args
        .subset
        .or_else(|| cfg.string("subset"))
        .unwrap_or_else(|| "asgi".to_string());
    let mode = match mode_str.to_ascii_lowercase().as_str() {
        "asgi" => SubsetMode::Asgi,
        "apgi" => SubsetMode::Apgi,
        other => bail!("unknown subset {other:?}; expected asgi or apgi"),
    };
    let out = out_dir(args.out_dir, cfg)?;

    require_artifact(&participants_path, "participant table", "gender-assign")?;
    let records = read_participants(&participants_path)?;
    let corpus = load_threads(&threads_path)?;
    let threads_in = corpus.threads.len();
    let kept = subset_corpus(corpus.threads, &records, mode);

    let mode_name = mode_str.to_ascii_lowercase();
    let threads_out_path = out.join(format!("threads_{mode_name}.jsonl"));
    write_threads(&threads_out_path, &kept)?;
    let summary = SubsetSummary {
        mode: mode_name,
        threads_in,
        threads_kept: kept.len(),
        pct_kept: if threads_in == 0 {
            0.0
        } else {
            100.0 * kept.len() as f64 / threads_in as f64
        },
    };
    let summary_path = out.join("subset_summary.json");
    write_json(&summary_path, &summary)?;

    println!(
        "subset: kept {}/{} threads ({:.1}%) under {}",
        summary.threads_kept, summary.threads_in, summary.pct_kept, summary.mode
    );
    println!("wrote {}", threads_out_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
