//! Parsers for every external file format the pipeline consumes.
//!
//! - thread corpora: UTF-8 line-delimited JSON, one thread per line
//! - name statistics: a directory of official `yobYYYY.txt` files
//! - organizational hierarchy: header-less CSV of (superior, subordinate) pairs
//! - manual gender overrides: CSV of (email, gender, source)
//! - sentence/token annotations: line-delimited JSON sidecar
//!
//! Every parse error carries the file path and, where meaningful, the line
//! number and offending field.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gender::NameStats;
use crate::model::{
    CorpusSplit, DominanceError, DominanceSet, Gender, Message, ModelError, SentenceSpan, Split,
    Thread, TokenAnnotation,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{dir}: no files named yobYYYY.txt with {from} <= YYYY <= {to}")]
    NoSsaYears { dir: PathBuf, from: i32, to: i32 },
    #[error("gender override conflict: {email} listed as both {first} and {second}")]
    OverrideConflict {
        email: String,
        first: &'static str,
        second: &'static str,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dominance(#[from] DominanceError),
    #[error("annotation references unknown message (thread {thread_id}, message {msg_id})")]
    DanglingAnnotation { thread_id: String, msg_id: String },
    #[error("annotation for (thread {thread_id}, message {msg_id}): {message}")]
    BadAnnotation {
        thread_id: String,
        msg_id: String,
        message: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Strips the literal `?S` mojibake prefix the source corpus leaves on some
/// name and address fields.
fn strip_artifact_prefix(s: &str) -> &str {
    s.strip_prefix("?S").unwrap_or(s)
}

/// Everything known about one address after a corpus load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParticipantSource {
    /// Display-name fields observed next to this address.
    pub display_names: BTreeSet<String>,
    /// Raw address spellings before lowercasing (case matters to the
    /// camel-case local-part heuristic).
    pub address_spellings: BTreeSet<String>,
}

/// A parsed corpus: canonical threads plus per-address display-name evidence.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub threads: Vec<Thread>,
    /// Keyed by canonical (lowercased) address.
    pub sources: BTreeMap<String, ParticipantSource>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireAddress {
    email: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireMessage {
    msg_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent_id: Option<String>,
    timestamp: DateTime<Utc>,
    from: WireAddress,
    #[serde(default)]
    to: Vec<WireAddress>,
    #[serde(default)]
    cc: Vec<WireAddress>,
    body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<Vec<SentenceSpan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<TokenAnnotation>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireThread {
    thread_id: String,
    messages: Vec<WireMessage>,
}

/// Loads a line-delimited thread corpus.
///
/// Each nonempty line is one thread record. Addresses are canonicalized by
/// [`Thread::new`]; the raw spellings and display names are collected into
/// [`LoadedCorpus::sources`] for the gender heuristics.
pub fn load_threads(path: &Path) -> Result<LoadedCorpus, IngestError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut corpus = LoadedCorpus::default();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireThread = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen_ids.insert(wire.thread_id.clone()) {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("duplicate thread id {}", wire.thread_id),
            });
        }
        let mut messages = Vec::with_capacity(wire.messages.len());
        for wm in wire.messages {
            let mut note = |addr: &WireAddress| {
                let raw = strip_artifact_prefix(addr.email.trim());
                let canonical = raw.to_lowercase();
                if canonical.is_empty() {
                    return canonical;
                }
                let source = corpus.sources.entry(canonical.clone()).or_default();
                source.address_spellings.insert(raw.to_string());
                if let Some(name) = &addr.name {
                    let name = strip_artifact_prefix(name.trim());
                    if !name.is_empty() {
                        source.display_names.insert(name.to_string());
                    }
                }
                canonical
            };
            let from = note(&wm.from);
            let to: Vec<String> = wm.to.iter().map(&mut note).collect();
            let cc: Vec<String> = wm.cc.iter().map(&mut note).collect();
            messages.push(Message {
                msg_id: wm.msg_id,
                parent_id: wm.parent_id,
                timestamp: wm.timestamp,
                from,
                to,
                cc,
                body: wm.body,
                sentences: wm.sentences,
                tokens: wm.tokens,
            });
        }
        let thread = Thread::new(wire.thread_id, messages)?;
        corpus.threads.push(thread);
    }
    Ok(corpus)
}

/// Writes threads in the same line-delimited format `load_threads` reads.
///
/// The write is atomic: content lands in a sibling temp file first and is
/// renamed over the target. Display names are not part of canonical threads
/// and are not written.
pub fn write_threads(path: &Path, threads: &[Thread]) -> Result<(), IngestError> {
    let mut buf = Vec::new();
    for thread in threads {
        let wire = WireThread {
            thread_id: thread.thread_id().to_string(),
            messages: thread
                .messages()
                .iter()
                .map(|m| WireMessage {
                    msg_id: m.msg_id.clone(),
                    parent_id: m.parent_id.clone(),
                    timestamp: m.timestamp,
                    from: WireAddress {
                        email: m.from.clone(),
                        name: None,
                    },
                    to: m
                        .to
                        .iter()
                        .map(|a| WireAddress {
                            email: a.clone(),
                            name: None,
                        })
                        .collect(),
                    cc: m
                        .cc
                        .iter()
                        .map(|a| WireAddress {
                            email: a.clone(),
                            name: None,
                        })
                        .collect(),
                    body: m.body.clone(),
                    sentences: m.sentences.clone(),
                    tokens: m.tokens.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut buf, &wire).expect("thread serialization cannot fail");
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// Writes `content` to `path` via a temp file + rename in the same directory.
pub fn atomic_write(path: &Path, content: &[u8]) -> Result<(), IngestError> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(content).map_err(|e| io_err(&tmp, e))?;
        file.flush().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Loads name statistics from a directory of `yobYYYY.txt` files, summing
/// counts over the inclusive year window.
pub fn load_ssa(dir: &Path, year_from: i32, year_to: i32) -> Result<NameStats, IngestError> {
    let mut files: Vec<(i32, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(year) = name
            .strip_prefix("yob")
            .and_then(|rest| rest.strip_suffix(".txt"))
            .and_then(|digits| (digits.len() == 4).then(|| digits.parse::<i32>().ok())?)
        {
            if (year_from..=year_to).contains(&year) {
                files.push((year, entry.path()));
            }
        }
    }
    if files.is_empty() {
        return Err(IngestError::NoSsaYears {
            dir: dir.to_path_buf(),
            from: year_from,
            to: year_to,
        });
    }
    files.sort();
    let mut stats = NameStats::default();
    for (_, path) in files {
        let file = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| io_err(&path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |message: String| IngestError::Malformed {
                path: path.clone(),
                line: line_no,
                message,
            };
            let mut fields = line.split(',');
            let (name, gender, count) = match (fields.next(), fields.next(), fields.next()) {
                (Some(n), Some(g), Some(c)) if fields.next().is_none() => (n, g, c),
                _ => return Err(malformed("expected exactly Name,G,Count".into())),
            };
            let count: u64 = count
                .parse()
                .ok()
                .filter(|c| *c > 0)
                .ok_or_else(|| malformed(format!("invalid count {count:?}")))?;
            if count < 5 {
                return Err(malformed(format!(
                    "count {count} below the published minimum of 5"
                )));
            }
            match gender {
                "M" => stats.add(name, count, 0),
                "F" => stats.add(name, 0, count),
                other => return Err(malformed(format!("invalid gender code {other:?}"))),
            }
        }
    }
    Ok(stats)
}

/// Loads the organizational hierarchy from header-less CSV rows
/// `superior_email,subordinate_email` and closes it under transitivity.
pub fn load_hierarchy(path: &Path) -> Result<DominanceSet, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_open_err(path, e))?;
    let mut edges = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 1;
        let record = record.map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        edges.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(DominanceSet::from_immediate(edges)?)
}

fn csv_open_err(path: &Path, err: csv::Error) -> IngestError {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => IngestError::Malformed {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Loads manual gender overrides from CSV rows `email,gender[,source]`.
///
/// A literal header row starting with `email` is skipped. Identical duplicate
/// rows are tolerated; the same email with both genders is rejected.
pub fn load_overrides(path: &Path) -> Result<BTreeMap<String, Gender>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_open_err(path, e))?;
    let mut out = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 1;
        let record = record.map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if record.len() < 2 || record.len() > 3 {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!(
                    "expected email,gender[,source], found {} fields",
                    record.len()
                ),
            });
        }
        if idx == 0 && record[0].eq_ignore_ascii_case("email") {
            continue;
        }
        let email = record[0].to_lowercase();
        let gender: Gender = record[1].parse().map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e,
        })?;
        if gender == Gender::Indeterminate {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: "override gender must be M or F".into(),
            });
        }
        if let Some(prev) = out.insert(email.clone(), gender) {
            if prev != gender {
                return Err(IngestError::OverrideConflict {
                    email,
                    first: prev.as_str(),
                    second: gender.as_str(),
                });
            }
        }
    }
    Ok(out)
}

/// Loads an explicit thread split assignment from header-less CSV rows
/// `thread_id,split` with split one of train/dev/test.
pub fn load_split(path: &Path) -> Result<CorpusSplit, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_open_err(path, e))?;
    let mut pairs = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 1;
        let record = record.map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected thread_id,split, found {} fields", record.len()),
            });
        }
        let split: Split = record[1].parse().map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e,
        })?;
        pairs.push((record[0].to_string(), split));
    }
    Ok(CorpusSplit::from_assignments(pairs))
}

/// One line of the annotation sidecar.
#[derive(Debug, Serialize, Deserialize)]
struct WireAnnotation {
    thread_id: String,
    msg_id: String,
    spans: Vec<WireSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<TokenAnnotation>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireSpan {
    start: usize,
    end: usize,
    da: String,
    #[serde(default)]
    odp: bool,
}

fn parse_da(code: &str) -> Option<crate::model::DaLabel> {
    use crate::model::DaLabel::*;
    match code {
        "RA" => Some(RequestAction),
        "RI" => Some(RequestInformation),
        "INF" => Some(Inform),
        "CONV" => Some(Conventional),
        _ => None,
    }
}

/// Applies a sentence/token annotation sidecar to a corpus in place.
///
/// Each sidecar line replaces the sentence spans of one message (and its
/// tokens, when present). Spans must lie inside the body, fall on character
/// boundaries, and be strictly ascending without overlap.
pub fn apply_annotations(threads: &mut [Thread], path: &Path) -> Result<(), IngestError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let index: BTreeMap<String, usize> = threads
        .iter()
        .enumerate()
        .map(|(i, t)| (t.thread_id().to_string(), i))
        .collect();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireAnnotation =
            serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        let thread = match index.get(&wire.thread_id) {
            Some(i) => &mut threads[*i],
            None => {
                return Err(IngestError::DanglingAnnotation {
                    thread_id: wire.thread_id,
                    msg_id: wire.msg_id,
                })
            }
        };
        let body_len = match thread.message(&wire.msg_id) {
            Some(m) => m.body.len(),
            None => {
                return Err(IngestError::DanglingAnnotation {
                    thread_id: wire.thread_id,
                    msg_id: wire.msg_id,
                })
            }
        };
        let body = thread.message(&wire.msg_id).unwrap().body.clone();
        let bad = |message: String| IngestError::BadAnnotation {
            thread_id: wire.thread_id.clone(),
            msg_id: wire.msg_id.clone(),
            message,
        };
        let mut spans = Vec::with_capacity(wire.spans.len());
        let mut prev_end = 0usize;
        for ws in &wire.spans {
            let da = parse_da(&ws.da)
                .ok_or_else(|| bad(format!("unknown dialog-act code {:?}", ws.da)))?;
            check_span(ws.start, ws.end, prev_end, body_len, &body).map_err(&bad)?;
            prev_end = ws.end;
            spans.push(SentenceSpan {
                start: ws.start,
                end: ws.end,
                da,
                odp: ws.odp,
            });
        }
        let tokens = match wire.tokens {
            Some(raw) => {
                let mut prev_end = 0usize;
                for t in &raw {
                    check_span(t.start, t.end, prev_end, body_len, &body).map_err(&bad)?;
                    prev_end = t.end;
                }
                Some(raw)
            }
            None => None,
        };
        thread.annotate_message(&wire.msg_id, spans, tokens);
    }
    Ok(())
}

fn check_span(
    start: usize,
    end: usize,
    prev_end: usize,
    body_len: usize,
    body: &str,
) -> Result<(), String> {
    if start >= end {
        return Err(format!("span {start}..{end} is empty or reversed"));
    }
    if end > body_len {
        return Err(format!(
            "span {start}..{end} exceeds body length {body_len}"
        ));
    }
    if start < prev_end {
        return Err(format!(
            "span {start}..{end} overlaps or precedes the prior span ending at {prev_end}"
        ));
    }
    if !body.is_char_boundary(start) || !body.is_char_boundary(end) {
        return Err(format!("span {start}..{end} splits a character"));
    }
    Ok(())
}
