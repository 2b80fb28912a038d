//! On-disk table formats the pipeline commands exchange: participant
//! assignments, interacting pairs, and the dense/sparse feature tables.
//!
//! Every writer builds the full byte stream in memory and lands it with an
//! atomic rename, so a crashed run never leaves a half-written artifact.
//! Floats are written with Rust's shortest-roundtrip formatting and parsed
//! back with `f64::from_str`, which makes write/read cycles bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use orgmail_core::features::ngrams::NgramVocabulary;
use orgmail_core::ingest::atomic_write;
use orgmail_core::model::{Gender, ParticipantRecord, Provenance, Split};
use orgmail_core::pairs::{GenderEnvironment, HpLabel};

pub const PARTICIPANTS_HEADER: [&str; 4] = ["email", "gender", "ambiguity_score", "provenance"];
pub const PAIRS_HEADER: [&str; 9] = [
    "thread_id",
    "p1",
    "p2",
    "hp_label",
    "gender_p1",
    "gender_p2",
    "env_p1",
    "env_p2",
    "n_im_messages",
];

/// Metadata columns that precede the 80 structural values in the dense table.
pub const DENSE_META: [&str; 11] = [
    "instance_id",
    "thread_id",
    "p1",
    "p2",
    "split",
    "canonical",
    "hp_label",
    "gender_p1",
    "gender_p2",
    "env_p1",
    "env_p2",
];

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(path: &Path, wtr: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = wtr
        .into_inner()
        .map_err(|e| anyhow::anyhow!("csv buffer error: {e}"))?;
    atomic_write(path, &bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn check_header(
    path: &Path,
    rdr: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
) -> Result<()> {
    let headers = rdr
        .headers()
        .with_context(|| format!("cannot read header of {}", path.display()))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        bail!(
            "{} has header {:?}, expected {:?}; regenerate it",
            path.display(),
            found,
            expected
        );
    }
    Ok(())
}

fn opt_str(cell: &str) -> Option<&str> {
    if cell.is_empty() {
        None
    } else {
        Some(cell)
    }
}

fn parse_cell<T>(path: &Path, line: usize, what: &str, cell: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    cell.parse().map_err(|e: T::Err| {
        anyhow::anyhow!(
            "{} line {}: bad {} {:?}: {}",
            path.display(),
            line,
            what,
            cell,
            e
        )
    })
}

fn parse_opt<T>(path: &Path, line: usize, what: &str, cell: &str) -> Result<Option<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    opt_str(cell)
        .map(|c| parse_cell(path, line, what, c))
        .transpose()
}

// --- participants.csv ------------------------------------------------------

pub fn write_participants(
    path: &Path,
    records: &BTreeMap<String, ParticipantRecord>,
) -> Result<()> {
    let mut wtr = csv_writer();
    wtr.write_record(PARTICIPANTS_HEADER)?;
    for record in records.values() {
        let score = record
            .ambiguity_score
            .map(|s| format!("{s}"))
            .unwrap_or_default();
        wtr.write_record([
            record.email.as_str(),
            record.gender.as_str(),
            score.as_str(),
            record.provenance.as_str(),
        ])?;
    }
    finish(path, wtr)
}

pub fn read_participants(path: &Path) -> Result<BTreeMap<String, ParticipantRecord>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &PARTICIPANTS_HEADER)?;
    let mut out = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("{} line {line}", path.display()))?;
        if record.len() != PARTICIPANTS_HEADER.len() {
            bail!("{} line {line}: expected 4 fields", path.display());
        }
        let email = record[0].to_string();
        let gender: Gender = parse_cell(path, line, "gender", &record[1])?;
        let ambiguity_score: Option<f64> = parse_opt(path, line, "ambiguity score", &record[2])?;
        let provenance: Provenance = parse_cell(path, line, "provenance", &record[3])?;
        out.insert(
            email.clone(),
            ParticipantRecord {
                email,
                display_names: Default::default(),
                gender,
                ambiguity_score,
                provenance,
            },
        );
    }
    Ok(out)
}

// --- pairs.csv -------------------------------------------------------------

/// One interacting pair of one thread, in canonical (p1 < p2) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub thread_id: String,
    pub p1: String,
    pub p2: String,
    pub hp_label: Option<HpLabel>,
    pub gender_p1: Option<Gender>,
    pub gender_p2: Option<Gender>,
    pub env_p1: Option<GenderEnvironment>,
    pub env_p2: Option<GenderEnvironment>,
    pub n_im_messages: usize,
}

pub fn write_pairs(path: &Path, rows: &[PairRow]) -> Result<()> {
    let mut wtr = csv_writer();
    wtr.write_record(PAIRS_HEADER)?;
    for row in rows {
        wtr.write_record([
            row.thread_id.as_str(),
            row.p1.as_str(),
            row.p2.as_str(),
            row.hp_label.map(|l| l.as_str()).unwrap_or(""),
            row.gender_p1.map(|g| g.as_str()).unwrap_or(""),
            row.gender_p2.map(|g| g.as_str()).unwrap_or(""),
            row.env_p1.map(|e| e.as_str()).unwrap_or(""),
            row.env_p2.map(|e| e.as_str()).unwrap_or(""),
            &row.n_im_messages.to_string(),
        ])?;
    }
    finish(path, wtr)
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRow>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &PAIRS_HEADER)?;
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("{} line {line}", path.display()))?;
        if record.len() != PAIRS_HEADER.len() {
            bail!("{} line {line}: expected 9 fields", path.display());
        }
        out.push(PairRow {
            thread_id: record[0].to_string(),
            p1: record[1].to_string(),
            p2: record[2].to_string(),
            hp_label: parse_opt(path, line, "power label", &record[3])?,
            gender_p1: parse_opt(path, line, "gender", &record[4])?,
            gender_p2: parse_opt(path, line, "gender", &record[5])?,
            env_p1: parse_opt(path, line, "environment", &record[6])?,
            env_p2: parse_opt(path, line, "environment", &record[7])?,
            n_im_messages: parse_cell(path, line, "message count", &record[8])?,
        });
    }
    Ok(out)
}

// --- feature tables --------------------------------------------------------

/// One ordered pair instance of the dense feature table. `structural` holds
/// the 80 variant-major structural values; gender and environment one-hots
/// are derived from the string columns at load time.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRow {
    pub instance_id: String,
    pub thread_id: String,
    pub p1: String,
    pub p2: String,
    pub split: Split,
    pub canonical: bool,
    pub hp_label: HpLabel,
    pub gender_p1: Option<Gender>,
    pub gender_p2: Option<Gender>,
    pub env_p1: Option<GenderEnvironment>,
    pub env_p2: Option<GenderEnvironment>,
    pub structural: Vec<f64>,
}

pub fn dense_header() -> Vec<String> {
    let mut out: Vec<String> = DENSE_META.iter().map(|s| s.to_string()).collect();
    out.extend(orgmail_core::features::structural_matrix_columns());
    out
}

pub fn write_dense(path: &Path, rows: &[DenseRow]) -> Result<()> {
    let mut wtr = csv_writer();
    wtr.write_record(dense_header())?;
    for row in rows {
        let mut record: Vec<String> = vec![
            row.instance_id.clone(),
            row.thread_id.clone(),
            row.p1.clone(),
            row.p2.clone(),
            row.split.as_str().to_string(),
            if row.canonical { "1" } else { "0" }.to_string(),
            row.hp_label.as_str().to_string(),
            row.gender_p1.map(|g| g.as_str()).unwrap_or("").to_string(),
            row.gender_p2.map(|g| g.as_str()).unwrap_or("").to_string(),
            row.env_p1.map(|e| e.as_str()).unwrap_or("").to_string(),
            row.env_p2.map(|e| e.as_str()).unwrap_or("").to_string(),
        ];
        record.extend(row.structural.iter().map(|v| format!("{v}")));
        wtr.write_record(&record)?;
    }
    finish(path, wtr)
}

pub fn read_dense(path: &Path) -> Result<Vec<DenseRow>> {
    let mut rdr = reader(path)?;
    let expected = dense_header();
    let expected_refs: Vec<&str> = expected.iter().map(|s| s.as_str()).collect();
    check_header(path, &mut rdr, &expected_refs)?;
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("{} line {line}", path.display()))?;
        if record.len() != expected.len() {
            bail!(
                "{} line {line}: expected {} fields, found {}",
                path.display(),
                expected.len(),
                record.len()
            );
        }
        let canonical = match &record[5] {
            "1" => true,
            "0" => false,
            other => bail!(
                "{} line {line}: bad canonical flag {other:?}",
                path.display()
            ),
        };
        let mut structural = Vec::with_capacity(record.len() - DENSE_META.len());
        for cell in record.iter().skip(DENSE_META.len()) {
            structural.push(parse_cell::<f64>(path, line, "feature value", cell)?);
        }
        out.push(DenseRow {
            instance_id: record[0].to_string(),
            thread_id: record[1].to_string(),
            p1: record[2].to_string(),
            p2: record[3].to_string(),
            split: parse_cell(path, line, "split", &record[4])?,
            canonical,
            hp_label: parse_cell(path, line, "power label", &record[6])?,
            gender_p1: parse_opt(path, line, "gender", &record[7])?,
            gender_p2: parse_opt(path, line, "gender", &record[8])?,
            env_p1: parse_opt(path, line, "environment", &record[9])?,
            env_p2: parse_opt(path, line, "environment", &record[10])?,
            structural,
        });
    }
    Ok(out)
}

/// Sparse ngram counts, one (instance, feature) entry per line, feature ids
/// ascending within an instance.
pub fn write_sparse(path: &Path, entries: &[(String, Vec<(u32, u64)>)]) -> Result<()> {
    let mut wtr = csv_writer();
    wtr.write_record(["instance_id", "feature_id", "count"])?;
    for (instance_id, counts) in entries {
        for (feature_id, count) in counts {
            wtr.write_record([
                instance_id.as_str(),
                &feature_id.to_string(),
                &count.to_string(),
            ])?;
        }
    }
    finish(path, wtr)
}

pub fn read_sparse(path: &Path) -> Result<BTreeMap<String, Vec<(u32, f64)>>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["instance_id", "feature_id", "count"])?;
    let mut out: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("{} line {line}", path.display()))?;
        if record.len() != 3 {
            bail!("{} line {line}: expected 3 fields", path.display());
        }
        let id: u32 = parse_cell(path, line, "feature id", &record[1])?;
        let count: u64 = parse_cell(path, line, "count", &record[2])?;
        out.entry(record[0].to_string())
            .or_default()
            .push((id, count as f64));
    }
    for counts in out.values_mut() {
        counts.sort_by_key(|&(id, _)| id);
    }
    Ok(out)
}

/// The id-to-key table, in id order. Ids are positions in sorted key order,
/// so the reader can rebuild the exact vocabulary and verify it.
pub fn write_vocab(path: &Path, vocab: &NgramVocabulary) -> Result<()> {
    let mut wtr = csv_writer();
    wtr.write_record(["feature_id", "key"])?;
    for (key, id) in vocab.entries() {
        wtr.write_record([&id.to_string(), key])?;
    }
    finish(path, wtr)
}

pub fn read_vocab(path: &Path) -> Result<NgramVocabulary> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["feature_id", "key"])?;
    let mut keys = Vec::new();
    let mut ids = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("{} line {line}", path.display()))?;
        if record.len() != 2 {
            bail!("{} line {line}: expected 2 fields", path.display());
        }
        ids.push(parse_cell::<u32>(path, line, "feature id", &record[0])?);
        keys.push(record[1].to_string());
    }
    let vocab = NgramVocabulary::fit(keys.iter().map(|k| k.as_str()));
    for (key, id) in keys.iter().zip(&ids) {
        if vocab.id(key) != Some(*id) {
            bail!(
                "{} is not in canonical order (key {:?} should have id {:?}); regenerate it with `orgmail features`",
                path.display(),
                key,
                vocab.id(key)
            );
        }
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn participants_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("participants.csv");
        let mut records = BTreeMap::new();
        records.insert(
            "a@x.com".to_string(),
            ParticipantRecord {
                email: "a@x.com".to_string(),
                display_names: Default::default(),
                gender: Gender::Female,
                ambiguity_score: Some(3.25),
                provenance: Provenance::Auto,
            },
        );
        records.insert(
            "b@x.com".to_string(),
            ParticipantRecord {
                email: "b@x.com".to_string(),
                display_names: Default::default(),
                gender: Gender::Indeterminate,
                ambiguity_score: None,
                provenance: Provenance::None,
            },
        );
        write_participants(&path, &records).unwrap();
        let back = read_participants(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn pairs_round_trip_with_empty_cells() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let rows = vec![PairRow {
            thread_id: "t1".to_string(),
            p1: "a@x.com".to_string(),
            p2: "b@x.com".to_string(),
            hp_label: Some(HpLabel::Superior),
            gender_p1: Some(Gender::Male),
            gender_p2: None,
            env_p1: Some(GenderEnvironment::MixedEnv),
            env_p2: None,
            n_im_messages: 4,
        }];
        write_pairs(&path, &rows).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), rows);
    }

    #[test]
    fn dense_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dense.csv");
        let structural: Vec<f64> = (0..80).map(|i| (i as f64) / 7.0).collect();
        let rows = vec![DenseRow {
            instance_id: "t1|a@x.com|b@x.com".to_string(),
            thread_id: "t1".to_string(),
            p1: "a@x.com".to_string(),
            p2: "b@x.com".to_string(),
            split: Split::Train,
            canonical: true,
            hp_label: HpLabel::Subordinate,
            gender_p1: None,
            gender_p2: Some(Gender::Female),
            env_p1: None,
            env_p2: Some(GenderEnvironment::MaleEnv),
            structural: structural.clone(),
        }];
        write_dense(&path, &rows).unwrap();
        let back = read_dense(&path).unwrap();
        assert_eq!(back, rows);
        for (a, b) in back[0].structural.iter().zip(&structural) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn vocab_round_trip_and_tamper_detection() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vocab.csv");
        let vocab = NgramVocabulary::fit(["b:1:x", "a:1:y", "a:1:z"]);
        write_vocab(&path, &vocab).unwrap();
        assert_eq!(read_vocab(&path).unwrap(), vocab);

        let tampered = "feature_id,key\n0,b:1:x\n1,a:1:y\n2,a:1:z\n";
        std::fs::write(&path, tampered).unwrap();
        assert!(read_vocab(&path).is_err());
    }

    #[test]
    fn sparse_round_trip_sorts_ids() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("sparse.csv");
        let entries = vec![("i1".to_string(), vec![(0, 2), (5, 1)])];
        write_sparse(&path, &entries).unwrap();
        let back = read_sparse(&path).unwrap();
        assert_eq!(back["i1"], vec![(0, 2.0), (5, 1.0)]);
    }
}
