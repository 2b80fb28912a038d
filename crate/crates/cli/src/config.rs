//! Flag/config-file resolution and the small string formats the command line
//! uses (year ranges, split proportions, feature-set lists).
//!
//! Precedence is always: explicit flag, then config-file key, then the
//! built-in default. Config keys are the long flag names verbatim.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use orgmail_core::features::ngrams::NgramFamily;
use orgmail_core::learn::{AblationSpec, FeatureFamily, Kernel};
use orgmail_core::model::SplitProportions;

/// Key/value defaults loaded from an optional JSON file.
#[derive(Debug, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, serde_json::Value>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<ConfigMap> {
        let Some(path) = path else {
            return Ok(ConfigMap::default());
        };
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let values: BTreeMap<String, serde_json::Value> = serde_json::from_str(&raw)
            .with_context(|| format!("config file {} is not a JSON object", path.display()))?;
        Ok(ConfigMap { values })
    }

    pub fn string(&self, key: &str) -> Option<String> {
        match self.values.get(key) {
            Some(serde_json::Value::String(s)) => Some(s.clone()),
            Some(other) => Some(other.to_string()),
            None => None,
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        match self.values.get(key) {
            Some(serde_json::Value::String(s)) => Some(PathBuf::from(s)),
            _ => None,
        }
    }

    pub fn f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(|v| v.as_f64())
    }

    pub fn bool(&self, key: &str) -> Option<bool> {
        self.values.get(key).and_then(|v| v.as_bool())
    }

    pub fn usize(&self, key: &str) -> Option<usize> {
        self.values
            .get(key)
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
    }
}

/// Resolves a required path-valued setting, telling the user both ways to
/// supply it.
pub fn require_path(flag: Option<PathBuf>, cfg: &ConfigMap, key: &str) -> Result<PathBuf> {
    flag.or_else(|| cfg.path(key)).with_context(|| {
        format!("missing required input: pass --{key} or set \"{key}\" in the config file")
    })
}

/// Fails with a pipeline-aware message when an upstream artifact is absent,
/// naming the command that produces it.
pub fn require_artifact(path: &Path, what: &str, producer: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "{what} not found at {}; run `orgmail {producer}` first",
            path.display()
        );
    }
    Ok(())
}

/// "FROM:TO" inclusive year range.
pub fn parse_years(s: &str) -> Result<(i32, i32)> {
    let (from, to) = s
        .split_once(':')
        .with_context(|| format!("year range {s:?} is not FROM:TO"))?;
    let from: i32 = from
        .trim()
        .parse()
        .with_context(|| format!("bad year {from:?}"))?;
    let to: i32 = to
        .trim()
        .parse()
        .with_context(|| format!("bad year {to:?}"))?;
    if from > to {
        bail!("year range {s:?} is reversed");
    }
    Ok((from, to))
}

/// "train:dev:test" fractions, e.g. "0.5:0.24:0.26".
pub fn parse_split(s: &str) -> Result<SplitProportions> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("split {s:?} is not train:dev:test");
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad split fraction {p:?}"))
        })
        .collect::<Result<_>>()?;
    SplitProportions {
        train: nums[0],
        dev: nums[1],
        test: nums[2],
    }
    .validate()
    .map_err(|e| anyhow::anyhow!("{e}"))
}

/// Comma-separated feature families, e.g. "PST,VRB,LEX".
pub fn parse_families(s: &str) -> Result<BTreeSet<FeatureFamily>> {
    let mut out = BTreeSet::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.insert(part.parse::<FeatureFamily>()?);
    }
    if out.is_empty() {
        bail!("feature set list {s:?} is empty");
    }
    Ok(out)
}

/// Canonical "A+B+C" label for a family set.
pub fn families_label(families: &BTreeSet<FeatureFamily>) -> String {
    families
        .iter()
        .map(|f| f.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

/// Comma-separated specs, each a '+'-joined family list:
/// "LEX,PST+VRB+LEX". Names are the canonical labels.
pub fn parse_specs(s: &str) -> Result<Vec<AblationSpec>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let mut families = BTreeSet::new();
        for fam in part.split('+') {
            families.insert(fam.trim().parse::<FeatureFamily>()?);
        }
        let label = families_label(&families);
        out.push(AblationSpec::new(label, families)?);
    }
    if out.is_empty() {
        bail!("spec list {s:?} is empty");
    }
    Ok(out)
}

/// Comma-separated positive C grid, e.g. "0.01,0.1,1,10".
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let c: f64 = part
            .parse()
            .with_context(|| format!("bad C value {part:?}"))?;
        if c <= 0.0 || c.is_nan() {
            bail!("C values must be positive, got {part}");
        }
        out.push(c);
    }
    if out.is_empty() {
        bail!("C grid {s:?} is empty");
    }
    Ok(out)
}

/// Comma-separated ngram families: "lemma,pos,mixed".
pub fn parse_ngram_families(s: &str) -> Result<Vec<NgramFamily>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let fam = match part.to_ascii_lowercase().as_str() {
            "lemma" => NgramFamily::Lemma,
            "pos" => NgramFamily::Pos,
            "mixed" => NgramFamily::Mixed,
            other => bail!("unknown ngram family {other:?}; expected lemma, pos, or mixed"),
        };
        if !out.contains(&fam) {
            out.push(fam);
        }
    }
    if out.is_empty() {
        bail!("ngram family list {s:?} is empty");
    }
    Ok(out)
}

pub fn parse_kernel(s: &str) -> Result<Kernel> {
    s.parse::<Kernel>().map_err(|e| anyhow::anyhow!("{e}"))
}
