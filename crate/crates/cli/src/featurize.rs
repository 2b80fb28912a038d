//! Turns the on-disk feature tables into model-ready instances for a chosen
//! feature-family selection.
//!
//! The dense table always carries every structural column plus the gender
//! and environment metadata; family selection happens here, so one `features`
//! run feeds every train/eval/ablate configuration. Sparse ngram counts are
//! L2-normalized per variant/family block at assembly time.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use orgmail_core::features::ngrams::NgramVocabulary;
use orgmail_core::features::{
    StructuralGroup, Variant, GEN_COLUMNS, GNE_P1_COLUMNS, GNE_P2_COLUMNS, STRUCTURAL_COLUMNS,
};
use orgmail_core::learn::{l2_normalize_blocks, FeatureFamily, Instance};
use orgmail_core::model::{Gender, Split};
use orgmail_core::pairs::GenderEnvironment;

use crate::config::require_artifact;
use crate::tables::{read_dense, read_sparse, read_vocab, DenseRow};

pub const DENSE_FILE: &str = "features_dense.csv";
pub const SPARSE_FILE: &str = "features_sparse.csv";
pub const VOCAB_FILE: &str = "vocab.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const MODEL_FILE: &str = "model.json";

/// Everything the `features` command wrote, loaded back.
pub struct FeatureTable {
    pub rows: Vec<DenseRow>,
    pub sparse: std::collections::BTreeMap<String, Vec<(u32, f64)>>,
    pub vocab: NgramVocabulary,
    /// Contiguous id ranges per variant/family block, for L2 normalization.
    pub blocks: Vec<(u32, u32)>,
}

pub fn feature_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(DENSE_FILE),
        dir.join(SPARSE_FILE),
        dir.join(VOCAB_FILE),
    )
}

pub fn load_feature_table(dir: &Path) -> Result<FeatureTable> {
    let (dense_path, sparse_path, vocab_path) = feature_paths(dir);
    require_artifact(&dense_path, "dense feature table", "features")?;
    require_artifact(&sparse_path, "sparse feature table", "features")?;
    require_artifact(&vocab_path, "ngram vocabulary", "features")?;
    let rows = read_dense(&dense_path)?;
    let sparse = read_sparse(&sparse_path)?;
    let vocab = read_vocab(&vocab_path)?;
    for id in sparse.keys() {
        if !rows.iter().any(|r| &r.instance_id == id) {
            bail!(
                "sparse table references instance {id:?} absent from the dense table; rerun `orgmail features`"
            );
        }
    }
    let blocks = vocab.family_blocks();
    Ok(FeatureTable {
        rows,
        sparse,
        vocab,
        blocks,
    })
}

/// Which rows become instances.
#[derive(Debug, Clone, Copy)]
pub struct InstanceFilter {
    pub split: Option<Split>,
    /// Keep only the canonical orientation of each pair (evaluation); both
    /// orientations are kept for training.
    pub canonical_only: bool,
}

fn structural_groups(families: &BTreeSet<FeatureFamily>) -> Vec<StructuralGroup> {
    let mut out = Vec::new();
    for group in StructuralGroup::ALL {
        let family = match group {
            StructuralGroup::Positional => FeatureFamily::Pst,
            StructuralGroup::Verbosity => FeatureFamily::Vrb,
            StructuralGroup::ThreadStructure => FeatureFamily::Thr,
            StructuralGroup::DialogActs => FeatureFamily::Da,
            StructuralGroup::Odp => FeatureFamily::Odp,
        };
        if families.contains(&family) {
            out.push(group);
        }
    }
    out
}

fn gen_one_hot(p1: Option<Gender>, p2: Option<Gender>) -> [f64; 4] {
    let half = |g: Option<Gender>| match g {
        Some(Gender::Male) => Some([1.0, 0.0]),
        Some(Gender::Female) => Some([0.0, 1.0]),
        _ => None,
    };
    match (half(p1), half(p2)) {
        (Some(a), Some(b)) => [a[0], a[1], b[0], b[1]],
        _ => [0.0; 4],
    }
}

fn env_one_hot(env: Option<GenderEnvironment>) -> [f64; 3] {
    match env {
        Some(GenderEnvironment::FemaleEnv) => [1.0, 0.0, 0.0],
        Some(GenderEnvironment::MixedEnv) => [0.0, 1.0, 0.0],
        Some(GenderEnvironment::MaleEnv) => [0.0, 0.0, 1.0],
        None => [0.0; 3],
    }
}

/// Column names of the dense vector `build_instances` produces for this
/// selection, in order.
pub fn dense_layout(families: &BTreeSet<FeatureFamily>, gne_both: bool) -> Vec<String> {
    let mut out = Vec::new();
    for variant in Variant::ALL {
        for group in structural_groups(families) {
            for idx in group.columns() {
                out.push(format!("{}{}", variant.prefix(), STRUCTURAL_COLUMNS[idx]));
            }
        }
    }
    if families.contains(&FeatureFamily::Gen) {
        out.extend(GEN_COLUMNS.iter().map(|s| s.to_string()));
    }
    if families.contains(&FeatureFamily::Gne) {
        out.extend(GNE_P1_COLUMNS.iter().map(|s| s.to_string()));
        if gne_both {
            out.extend(GNE_P2_COLUMNS.iter().map(|s| s.to_string()));
        }
    }
    out
}

/// Assembles instances for the selected rows and families. Dense values stay
/// raw (models standardize with their stored training statistics); sparse
/// counts are L2-normalized within each variant/family block.
pub fn build_instances(
    table: &FeatureTable,
    filter: InstanceFilter,
    families: &BTreeSet<FeatureFamily>,
    gne_both: bool,
) -> Result<Vec<Instance>> {
    if families.is_empty() {
        bail!("no feature families selected");
    }
    let groups = structural_groups(families);
    let mut out = Vec::new();
    for row in &table.rows {
        if let Some(split) = filter.split {
            if row.split != split {
                continue;
            }
        }
        if filter.canonical_only && !row.canonical {
            continue;
        }
        let mut dense = Vec::new();
        for variant in 0..Variant::ALL.len() {
            for group in &groups {
                for idx in group.columns() {
                    dense.push(row.structural[variant * STRUCTURAL_COLUMNS.len() + idx]);
                }
            }
        }
        if families.contains(&FeatureFamily::Gen) {
            dense.extend(gen_one_hot(row.gender_p1, row.gender_p2));
        }
        if families.contains(&FeatureFamily::Gne) {
            dense.extend(env_one_hot(row.env_p1));
            if gne_both {
                dense.extend(env_one_hot(row.env_p2));
            }
        }
        let sparse = if families.contains(&FeatureFamily::Lex) {
            let mut counts = table
                .sparse
                .get(&row.instance_id)
                .cloned()
                .unwrap_or_default();
            counts.sort_by_key(|&(id, _)| id);
            l2_normalize_blocks(&mut counts, &table.blocks);
            counts
        } else {
            Vec::new()
        };
        out.push(Instance::new(
            row.instance_id.clone(),
            dense,
            sparse,
            row.hp_label,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use orgmail_core::pairs::HpLabel;

    fn row(id: &str, split: Split, canonical: bool) -> DenseRow {
        DenseRow {
            instance_id: id.to_string(),
            thread_id: "t".to_string(),
            p1: "a".to_string(),
            p2: "b".to_string(),
            split,
            canonical,
            hp_label: HpLabel::Superior,
            gender_p1: Some(Gender::Male),
            gender_p2: Some(Gender::Female),
            env_p1: Some(GenderEnvironment::MixedEnv),
            env_p2: None,
            structural: (0..80).map(|i| i as f64).collect(),
        }
    }

    fn table(rows: Vec<DenseRow>) -> FeatureTable {
        let vocab = NgramVocabulary::fit(["p1_im_lemma:1:hi", "p2_mt_lemma:1:yo"]);
        let blocks = vocab.family_blocks();
        let mut sparse = std::collections::BTreeMap::new();
        sparse.insert("i1".to_string(), vec![(0, 3.0), (1, 4.0)]);
        FeatureTable {
            rows,
            sparse,
            vocab,
            blocks,
        }
    }

    #[test]
    fn selects_structural_columns_variant_major() {
        let t = table(vec![row("i1", Split::Train, true)]);
        let fams: BTreeSet<_> = [FeatureFamily::Pst].into_iter().collect();
        let filter = InstanceFilter {
            split: None,
            canonical_only: false,
        };
        let inst = build_instances(&t, filter, &fams, false).unwrap();
        // Positional = columns 0..3 of each 20-wide variant block.
        assert_eq!(
            inst[0].dense,
            vec![0.0, 1.0, 2.0, 20.0, 21.0, 22.0, 40.0, 41.0, 42.0, 60.0, 61.0, 62.0]
        );
        assert!(inst[0].sparse.is_empty());
        assert_eq!(dense_layout(&fams, false).len(), 12);
    }

    #[test]
    fn gen_gne_blocks_and_sparse_normalization() {
        let t = table(vec![row("i1", Split::Train, true)]);
        let fams: BTreeSet<_> = [FeatureFamily::Gen, FeatureFamily::Gne, FeatureFamily::Lex]
            .into_iter()
            .collect();
        let filter = InstanceFilter {
            split: None,
            canonical_only: false,
        };
        let inst = build_instances(&t, filter, &fams, true).unwrap();
        // GEN [m1,f1,m2,f2] then GNE p1 one-hot then GNE p2 zeros (absent env).
        assert_eq!(
            inst[0].dense,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]
        );
        // Two singleton blocks: each count normalizes to 1.
        assert_eq!(inst[0].sparse, vec![(0, 1.0), (1, 1.0)]);
        assert_eq!(dense_layout(&fams, true).len(), 10);
        assert_eq!(dense_layout(&fams, false).len(), 7);
    }

    #[test]
    fn filter_by_split_and_orientation() {
        let rows = vec![
            row("i1", Split::Train, true),
            row("i2", Split::Train, false),
            row("i3", Split::Dev, true),
        ];
        let t = table(rows);
        let fams: BTreeSet<_> = [FeatureFamily::Pst].into_iter().collect();
        let train_all = build_instances(
            &t,
            InstanceFilter {
                split: Some(Split::Train),
                canonical_only: false,
            },
            &fams,
            false,
        )
        .unwrap();
        assert_eq!(train_all.len(), 2);
        let dev_canonical = build_instances(
            &t,
            InstanceFilter {
                split: Some(Split::Dev),
                canonical_only: true,
            },
            &fams,
            false,
        )
        .unwrap();
        assert_eq!(dev_canonical.len(), 1);
        assert_eq!(dev_canonical[0].id, "i3");
    }
}
