//! `features`: extract per-pair dialog-structure features and ngram counts
//! for every hierarchically related pair, assign the train/dev/test split,
//! and fit the ngram vocabulary on the training portion.
//!
//! Each related pair yields two instances, one per orientation. The
//! canonical orientation (lexicographically smaller address first, as the
//! pairs table stores it) is flagged so evaluation can keep each pair once,
//! while training uses both orientations with mirrored labels.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use orgmail_core::features::ngrams::{pair_ngrams, NgramVocabulary};
use orgmail_core::features::pair_features;
use orgmail_core::features::taggers::{tag_threads, BaselineDaTagger, BaselineOdpTagger};
use orgmail_core::ingest::{apply_annotations, atomic_write, load_split, load_threads};
use orgmail_core::model::{CorpusSplit, Split, Thread};
use orgmail_core::pairs::{interaction_messages, PairContext};
use serde::Serialize;

use crate::commands::{out_dir, write_json};
use crate::config::{parse_ngram_families, parse_split, require_artifact, require_path, ConfigMap};
use crate::featurize::{DENSE_FILE, SPARSE_FILE, SPLIT_FILE, VOCAB_FILE};
use crate::tables::{read_pairs, write_dense, write_sparse, write_vocab, DenseRow};

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// Thread corpus the pairs were extracted from.
    #[arg(long, value_name = "FILE")]
    threads: Option<PathBuf>,
    /// Pair table from `orgmail pairs`.
    #[arg(long, value_name = "FILE")]
    pairs: Option<PathBuf>,
    /// Optional sentence annotations (dialog acts, overt displays of power);
    /// unannotated messages fall back to the built-in heuristic taggers.
    #[arg(long, value_name = "FILE")]
    annotations: Option<PathBuf>,
    /// Train:dev:test fractions for the hash-based split [default:
    /// 0.5:0.24:0.26].
    #[arg(long, value_name = "A:B:C")]
    split: Option<String>,
    /// Explicit thread_id,split assignment file; overrides --split.
    #[arg(long, value_name = "FILE")]
    split_file: Option<PathBuf>,
    /// Ngram families to count: lemma, pos, mixed [default: lemma].
    #[arg(long, value_name = "LIST")]
    ngram_families: Option<String>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct FeaturesSummary {
    related_pairs: usize,
    instances: usize,
    train_instances: usize,
    dev_instances: usize,
    test_instances: usize,
    vocabulary_size: usize,
    ngram_families: Vec<String>,
    split_source: String,
    seed: u64,
}

pub fn run(args: FeaturesArgs, seed: u64, cfg: &ConfigMap) -> Result<()> {
    let threads_path = require_path(args.threads, cfg, "threads")?;
    let pairs_path = require_path(args.pairs, cfg, "pairs")?;
    let annotations_path = args.annotations.or_else(|| cfg.path("annotations"));
    let split_file = args.split_file.or_else(|| cfg.path("split-file"));
    let proportions = args
        .split
        .or_else(|| cfg.string("split"))
        .map(|s| parse_split(&s))
        .transpose()?
        .unwrap_or_default();
    let families = parse_ngram_families(
        &args
            .ngram_families
            .or_else(|| cfg.string("ngram-families"))
            .unwrap_or_else(|| "lemma".to_string()),
    )?;
    let out = out_dir(args.out_dir, cfg)?;

    require_artifact(&pairs_path, "pair table", "pairs")?;
    let mut corpus = load_threads(&threads_path)?;
    if let Some(path) = &annotations_path {
        apply_annotations(&mut corpus.threads, path)?;
    }
    tag_threads(&mut corpus.threads, &BaselineDaTagger, &BaselineOdpTagger);
    let pair_rows = read_pairs(&pairs_path)?;

    let (split, split_source) = match &split_file {
        Some(path) => (load_split(path)?, "file".to_string()),
        None => (
            CorpusSplit::assign(
                corpus.threads.iter().map(|t| t.thread_id()),
                proportions,
                seed,
            )?,
            "hash".to_string(),
        ),
    };

    let threads_by_id: BTreeMap<&str, &Thread> =
        corpus.threads.iter().map(|t| (t.thread_id(), t)).collect();

    let mut dense_rows: Vec<DenseRow> = Vec::new();
    let mut counts_by_instance: Vec<(String, BTreeMap<String, u64>)> = Vec::new();
    let mut related_pairs = 0usize;
    for row in &pair_rows {
        let Some(label) = row.hp_label else {
            continue;
        };
        related_pairs += 1;
        let thread = *threads_by_id.get(row.thread_id.as_str()).ok_or_else(|| {
            anyhow::anyhow!(
                "pair table references thread {:?} absent from {}; rerun `orgmail pairs` on this corpus",
                row.thread_id,
                threads_path.display()
            )
        })?;
        let thread_split = split.get(&row.thread_id).ok_or_else(|| {
            anyhow::anyhow!(
                "split file does not cover thread {:?}; extend it or drop --split-file",
                row.thread_id
            )
        })?;
        let orientations = [
            (
                &row.p1,
                &row.p2,
                label,
                row.gender_p1,
                row.gender_p2,
                row.env_p1,
                row.env_p2,
                true,
            ),
            (
                &row.p2,
                &row.p1,
                label.flipped(),
                row.gender_p2,
                row.gender_p1,
                row.env_p2,
                row.env_p1,
                false,
            ),
        ];
        for (a, b, hp, ga, gb, ea, eb, canonical) in orientations {
            let im = interaction_messages(thread, a, b);
            if im.is_empty() {
                bail!(
                    "pair table lists {} and {} as interacting in thread {:?}, but no interaction messages exist; rerun `orgmail pairs`",
                    a,
                    b,
                    row.thread_id
                );
            }
            let ctx = PairContext {
                im_messages: im.clone(),
                hp_label: Some(hp),
                gender_p1: ga,
                gender_p2: gb,
                env_p1: ea,
                env_p2: eb,
            };
            let feats = pair_features(thread, a, b, &ctx)
                .with_context(|| format!("thread {:?}, pair {a}/{b}", row.thread_id))?;
            let instance_id = format!("{}|{}|{}", row.thread_id, a, b);
            dense_rows.push(DenseRow {
                instance_id: instance_id.clone(),
                thread_id: row.thread_id.clone(),
                p1: a.clone(),
                p2: b.clone(),
                split: thread_split,
                canonical,
                hp_label: hp,
                gender_p1: ga,
                gender_p2: gb,
                env_p1: ea,
                env_p2: eb,
                structural: feats.structural_row(),
            });
            let counts = pair_ngrams(thread, a, b, &im, &families)
                .with_context(|| format!("thread {:?}, pair {a}/{b}", row.thread_id))?;
            counts_by_instance.push((instance_id, counts));
        }
    }

    // Vocabulary comes from training instances only; other splits project
    // onto it and unseen keys drop out.
    let train_keys = dense_rows
        .iter()
        .zip(&counts_by_instance)
        .filter(|(row, _)| row.split == Split::Train)
        .flat_map(|(_, (_, counts))| counts.keys().map(|k| k.as_str()));
    let vocab = NgramVocabulary::fit(train_keys);

    let sparse_entries: Vec<(String, Vec<(u32, u64)>)> = counts_by_instance
        .iter()
        .map(|(id, counts)| {
            let mut projected: Vec<(u32, u64)> = counts
                .iter()
                .filter_map(|(key, &count)| vocab.id(key).map(|fid| (fid, count)))
                .collect();
            projected.sort_by_key(|&(fid, _)| fid);
            (id.clone(), projected)
        })
        .collect();

    let dense_path = out.join(DENSE_FILE);
    write_dense(&dense_path, &dense_rows)?;
    let sparse_path = out.join(SPARSE_FILE);
    write_sparse(&sparse_path, &sparse_entries)?;
    let vocab_path = out.join(VOCAB_FILE);
    write_vocab(&vocab_path, &vocab)?;

    let mut split_csv = csv::Writer::from_writer(Vec::new());
    split_csv.write_record(["thread_id", "split"])?;
    for (thread_id, assigned) in split.iter() {
        split_csv.write_record([thread_id, assigned.as_str()])?;
    }
    let split_path = out.join(SPLIT_FILE);
    let bytes = split_csv
        .into_inner()
        .map_err(|e| anyhow::anyhow!("csv buffer error: {e}"))?;
    atomic_write(&split_path, &bytes)?;

    let count_in = |s: Split| dense_rows.iter().filter(|r| r.split == s).count();
    let summary = FeaturesSummary {
        related_pairs,
        instances: dense_rows.len(),
        train_instances: count_in(Split::Train),
        dev_instances: count_in(Split::Dev),
        test_instances: count_in(Split::Test),
        vocabulary_size: vocab.len(),
        ngram_families: families.iter().map(|f| f.as_str().to_string()).collect(),
        split_source,
        seed,
    };
    let summary_path = out.join("features_summary.json");
    write_json(&summary_path, &summary)?;

    println!(
        "features: {} related pairs -> {} instances (train {}, dev {}, test {}), vocabulary {}",
        summary.related_pairs,
        summary.instances,
        summary.train_instances,
        summary.dev_instances,
        summary.test_instances,
        summary.vocabulary_size
    );
    for path in [
        &dense_path,
        &sparse_path,
        &vocab_path,
        &split_path,
        &summary_path,
    ] {
        println!("wrote {}", path.display());
    }
    Ok(())
}
