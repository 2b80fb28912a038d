//! `pairs`: enumerate interacting pairs per thread, label the
//! hierarchically related ones with a power direction, and attach gender and
//! gender-environment context.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use orgmail_core::ingest::{load_hierarchy, load_threads};
use orgmail_core::pairs::build_pairs;
use serde::Serialize;

use crate::commands::{out_dir, write_json};
use crate::config::{require_artifact, require_path, ConfigMap};
use crate::tables::{write_pairs, PairRow};

#[derive(Args, Debug)]
pub struct PairsArgs {
    /// Thread corpus, typically the subset file from `orgmail subset`.
    #[arg(long, value_name = "FILE")]
    threads: Option<PathBuf>,
    /// Dominance edges (superior_email,subordinate_email CSV).
    #[arg(long, value_name = "FILE")]
    hierarchy: Option<PathBuf>,
    /// Participant table from `orgmail gender-assign`.
    #[arg(long, value_name = "FILE")]
    participants: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct PairsSummary {
    threads: usize,
    /// Interacting pairs summed over threads.
    interacting_pairs: usize,
    /// Of those, pairs related through the reporting hierarchy.
    related_pairs: usize,
    superior_first: usize,
    subordinate_first: usize,
}

pub fn run(args: PairsArgs, cfg: &ConfigMap) -> Result<()> {
    let threads_path = require_path(args.threads, cfg, "threads")?;
    let hierarchy_path = require_path(args.hierarchy, cfg, "hierarchy")?;
    let participants_path = require_path(args.participants, cfg, "participants")?;
    let out = out_dir(args.out_dir, cfg)?;

    require_artifact(&participants_path, "participant table", "gender-assign")?;
    let corpus = load_threads(&threads_path)?;
    let dominance = load_hierarchy(&hierarchy_path)?;
    let records = crate::tables::read_participants(&participants_path)?;

    let mut rows: Vec<PairRow> = Vec::new();
    let mut related = 0usize;
    let mut superior_first = 0usize;
    let mut subordinate_first = 0usize;
    for thread in &corpus.threads {
        let pairs = build_pairs(thread, &dominance, &records)
            .with_context(|| format!("thread {:?}", thread.thread_id()))?;
        for (key, ctx) in pairs {
            if let Some(label) = ctx.hp_label {
                related += 1;
                match label {
                    orgmail_core::pairs::HpLabel::Superior => superior_first += 1,
                    orgmail_core::pairs::HpLabel::Subordinate => subordinate_first += 1,
                }
            }
            rows.push(PairRow {
                thread_id: key.thread_id,
                p1: key.p1,
                p2: key.p2,
                hp_label: ctx.hp_label,
                gender_p1: ctx.gender_p1,
                gender_p2: ctx.gender_p2,
                env_p1: ctx.env_p1,
                env_p2: ctx.env_p2,
                n_im_messages: ctx.im_messages.len(),
            });
        }
    }

    let pairs_path = out.join("pairs.csv");
    write_pairs(&pairs_path, &rows)?;
    let summary = PairsSummary {
        threads: corpus.threads.len(),
        interacting_pairs: rows.len(),
        related_pairs: related,
        superior_first,
        subordinate_first,
    };
    let summary_path = out.join("pairs_summary.json");
    write_json(&summary_path, &summary)?;

    println!(
        "pairs: {} threads, {} interacting pairs, {} related ({} superior-first, {} subordinate-first)",
        summary.threads,
        summary.interacting_pairs,
        summary.related_pairs,
        summary.superior_first,
        summary.subordinate_first
    );
    println!("wrote {}", pairs_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
