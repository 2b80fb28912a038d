//! Supervised prediction of power direction from pair features: a
//! max-margin classifier with a quadratic kernel, the feature-set ablation
//! harness around it, and a serializable model container.

mod svm;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::atomic_write;
use crate::pairs::HpLabel;

pub const MODEL_FORMAT_VERSION: &str = "svm/1";

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("training set contains only the {0:?} class")]
    SingleClass(HpLabel),
    #[error("no instances given")]
    EmptyInstances,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ablation spec {name:?} selects no feature families")]
    EmptyFeatureSet { name: String },
    #[error("unknown feature family {0:?}")]
    UnknownFamily(String),
    #[error("the C grid is empty")]
    EmptyGrid,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model file {path}: {message}")]
    BadModelFile { path: String, message: String },
    #[error("model file {path}: format {found:?} is not {expected:?}")]
    FormatVersion {
        path: String,
        found: String,
        expected: String,
    },
    #[error(transparent)]
    Io(#[from] crate::ingest::IngestError),
}

/// Kernel applied to raw dot products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Plain dot product; kept for contrast experiments.
    Linear,
    /// (x·z + 1)^2 — pairwise interaction terms without explicit expansion.
    Quadratic,
}

impl Kernel {
    pub fn value(&self, dot: f64) -> f64 {
        match self {
            Kernel::Linear => dot,
            Kernel::Quadratic => (dot + 1.0) * (dot + 1.0),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Kernel, LearnError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Kernel::Linear),
            "quadratic" => Ok(Kernel::Quadratic),
            other => Err(LearnError::InvalidParameter(format!(
                "unknown kernel {other:?}; expected linear or quadratic"
            ))),
        }
    }
}

/// One labeled pair instance. The dense block is raw feature values — models
/// standardize on entry with their stored training statistics. The sparse
/// block is expected to be id-sorted and already block-normalized.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub dense: Vec<f64>,
    pub sparse: Vec<(u32, f64)>,
    pub label: HpLabel,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        dense: Vec<f64>,
        sparse: Vec<(u32, f64)>,
        label: HpLabel,
    ) -> Self {
        Instance {
            id: id.into(),
            dense,
            sparse,
            label,
        }
    }
}

fn label_sign(label: HpLabel) -> f64 {
    match label {
        HpLabel::Superior => 1.0,
        HpLabel::Subordinate => -1.0,
    }
}

/// Per-column location/scale fit on training data. Scale is the population
/// standard deviation; a zero scale marks a constant column, which
/// standardizes to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Standardizer {
        let dim = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in scales.iter_mut().zip(row.iter()).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        scales.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Standardizer { means, scales }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| if *s == 0.0 { 0.0 } else { (v - m) / s })
            .collect()
    }
}

/// In-place L2 normalization of each id block of a sparse vector. Blocks are
/// half-open id ranges (one per ngram family); all-zero blocks are left
/// untouched.
pub fn l2_normalize_blocks(sparse: &mut [(u32, f64)], blocks: &[(u32, u32)]) {
    for &(start, end) in blocks {
        let range: Vec<usize> = sparse
            .iter()
            .enumerate()
            .filter(|(_, (id, _))| *id >= start && *id < end)
            .map(|(i, _)| i)
            .collect();
        let norm: f64 = range
            .iter()
            .map(|&i| sparse[i].1 * sparse[i].1)
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for &i in &range {
                sparse[i].1 /= norm;
            }
        }
    }
}

/// Training settings. The tolerance is the KKT violation threshold the dual
/// solver drives every multiplier under.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub kernel: Kernel,
    pub c: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub max_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kernel: Kernel::Quadratic,
            c: 1.0,
            tolerance: 1e-3,
            seed: 42,
            max_steps: 200_000,
        }
    }
}

/// One stored support vector, in model (standardized) space. The coefficient
/// is the dual multiplier times the label sign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportVector {
    pub coefficient: f64,
    pub dense: Vec<f64>,
    pub sparse: Vec<(u32, f64)>,
}

/// A trained classifier: kernel, bias, support vectors, and the feature-space
/// bookkeeping needed to map raw instances into model space. Serializes to
/// JSON; reloading reproduces predictions bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub kernel: Kernel,
    pub c: f64,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub dense_dim: usize,
    pub sparse_dim: usize,
    /// Free-form provenance: which feature families went into the dense
    /// vector, which vocabulary file the sparse ids refer to, and similar.
    /// Never interpreted by the predictor.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    pub support: Vec<SupportVector>,
}

impl Model {
    fn check_dims(&self, instance: &Instance) -> Result<(), LearnError> {
        if instance.dense.len() != self.dense_dim {
            return Err(LearnError::DimensionMismatch {
                expected: self.dense_dim,
                found: instance.dense.len(),
            });
        }
        if let Some(&(id, _)) = instance.sparse.last() {
            if id as usize >= self.sparse_dim {
                return Err(LearnError::DimensionMismatch {
                    expected: self.sparse_dim,
                    found: id as usize + 1,
                });
            }
        }
        Ok(())
    }

    /// Signed distance-like score; positive side is SUPERIOR.
    pub fn decision_value(&self, instance: &Instance) -> Result<f64, LearnError> {
        self.check_dims(instance)?;
        let dense = self.standardizer.apply(&instance.dense);
        let mut decision = self.bias;
        for sv in &self.support {
            let dot: f64 = sv.dense.iter().zip(&dense).map(|(a, b)| a * b).sum::<f64>()
                + svm::sparse_dot(&sv.sparse, &instance.sparse);
            decision += sv.coefficient * self.kernel.value(dot);
        }
        Ok(decision)
    }

    /// Label by the sign of the decision value; an exact zero resolves to
    /// SUPERIOR by convention.
    pub fn predict(&self, instance: &Instance) -> Result<HpLabel, LearnError> {
        let decision = self.decision_value(instance)?;
        Ok(if decision >= 0.0 {
            HpLabel::Superior
        } else {
            HpLabel::Subordinate
        })
    }

    /// Sum of alpha_i * y_i over the support set; feasibility requires this
    /// to vanish.
    pub fn dual_balance(&self) -> f64 {
        self.support.iter().map(|sv| sv.coefficient).sum()
    }
}

/// Fit a classifier on labeled instances. Standardization statistics come
/// from these instances alone, so later evaluation data cannot leak into the
/// model.
pub fn train(instances: &[Instance], config: &TrainConfig) -> Result<Model, LearnError> {
    if instances.is_empty() {
        return Err(LearnError::EmptyInstances);
    }
    if config.c <= 0.0 || config.c.is_nan() {
        return Err(LearnError::InvalidParameter(format!(
            "C must be positive, got {}",
            config.c
        )));
    }
    let dense_dim = instances[0].dense.len();
    for instance in instances {
        if instance.dense.len() != dense_dim {
            return Err(LearnError::DimensionMismatch {
                expected: dense_dim,
                found: instance.dense.len(),
            });
        }
    }
    let positives = instances
        .iter()
        .filter(|i| i.label == HpLabel::Superior)
        .count();
    if positives == 0 {
        return Err(LearnError::SingleClass(HpLabel::Subordinate));
    }
    if positives == instances.len() {
        return Err(LearnError::SingleClass(HpLabel::Superior));
    }

    let dense_rows: Vec<&[f64]> = instances.iter().map(|i| i.dense.as_slice()).collect();
    let standardizer = Standardizer::fit(&dense_rows);
    let sparse_dim = instances
        .iter()
        .filter_map(|i| i.sparse.last())
        .map(|&(id, _)| id as usize + 1)
        .max()
        .unwrap_or(0);

    let points: Vec<svm::TrainPoint> = instances
        .iter()
        .map(|i| svm::TrainPoint {
            dense: standardizer.apply(&i.dense),
            sparse: i.sparse.clone(),
            y: label_sign(i.label),
        })
        .collect();
    let solution = svm::solve(
        &points,
        config.kernel,
        config.c,
        config.tolerance,
        config.seed,
        config.max_steps,
    );

    let support = points
        .into_iter()
        .zip(&solution.alphas)
        .filter(|(_, &alpha)| alpha > 0.0)
        .map(|(point, &alpha)| SupportVector {
            coefficient: alpha * point.y,
            dense: point.dense,
            sparse: point.sparse,
        })
        .collect();
    Ok(Model {
        format: MODEL_FORMAT_VERSION.to_string(),
        kernel: config.kernel,
        c: config.c,
        bias: solution.bias,
        standardizer,
        dense_dim,
        sparse_dim,
        metadata: BTreeMap::new(),
        support,
    })
}

/// One scored instance.
#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub id: String,
    pub gold: HpLabel,
    pub predicted: HpLabel,
    pub decision_value: f64,
}

/// Accuracy plus the per-instance predictions, retained for paired
/// significance testing between systems.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub predictions: Vec<Prediction>,
}

pub fn evaluate(model: &Model, instances: &[Instance]) -> Result<Evaluation, LearnError> {
    if instances.is_empty() {
        return Err(LearnError::EmptyInstances);
    }
    let mut predictions = Vec::with_capacity(instances.len());
    let mut correct = 0usize;
    for instance in instances {
        let decision_value = model.decision_value(instance)?;
        let predicted = if decision_value >= 0.0 {
            HpLabel::Superior
        } else {
            HpLabel::Subordinate
        };
        if predicted == instance.label {
            correct += 1;
        }
        predictions.push(Prediction {
            id: instance.id.clone(),
            gold: instance.label,
            predicted,
            decision_value,
        });
    }
    Ok(Evaluation {
        accuracy: correct as f64 / instances.len() as f64,
        correct,
        total: instances.len(),
        predictions,
    })
}

/// The always-majority-class baseline: the label to emit and the accuracy it
/// achieves on the same instances. Ties go to SUPERIOR.
pub fn majority_baseline(instances: &[Instance]) -> Result<(HpLabel, f64), LearnError> {
    if instances.is_empty() {
        return Err(LearnError::EmptyInstances);
    }
    let superiors = instances
        .iter()
        .filter(|i| i.label == HpLabel::Superior)
        .count();
    let (label, hits) = if 2 * superiors >= instances.len() {
        (HpLabel::Superior, superiors)
    } else {
        (HpLabel::Subordinate, instances.len() - superiors)
    };
    Ok((label, hits as f64 / instances.len() as f64))
}

/// Relative error reduction, in percent, of the richer system over the
/// baseline system.
pub fn error_reduction_pct(baseline_accuracy: f64, richer_accuracy: f64) -> f64 {
    let baseline_error = 1.0 - baseline_accuracy;
    if baseline_error <= 0.0 {
        return 0.0;
    }
    (richer_accuracy - baseline_accuracy) / baseline_error * 100.0
}

/// The feature families an ablation spec can draw on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureFamily {
    /// Positional features.
    Pst,
    /// Verbosity features.
    Vrb,
    /// Thread-structure features.
    Thr,
    /// Dialog-act counts.
    Da,
    /// Overt displays of power.
    Odp,
    /// Lexical ngrams.
    Lex,
    /// Gender indicators.
    Gen,
    /// Gender-environment indicators.
    Gne,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 8] = [
        FeatureFamily::Pst,
        FeatureFamily::Vrb,
        FeatureFamily::Thr,
        FeatureFamily::Da,
        FeatureFamily::Odp,
        FeatureFamily::Lex,
        FeatureFamily::Gen,
        FeatureFamily::Gne,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureFamily::Pst => "PST",
            FeatureFamily::Vrb => "VRB",
            FeatureFamily::Thr => "THR",
            FeatureFamily::Da => "DA",
            FeatureFamily::Odp => "ODP",
            FeatureFamily::Lex => "LEX",
            FeatureFamily::Gen => "GEN",
            FeatureFamily::Gne => "GNE",
        }
    }
}

impl std::str::FromStr for FeatureFamily {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PST" => Ok(FeatureFamily::Pst),
            "VRB" => Ok(FeatureFamily::Vrb),
            "THR" => Ok(FeatureFamily::Thr),
            "DA" => Ok(FeatureFamily::Da),
            "ODP" => Ok(FeatureFamily::Odp),
            "LEX" => Ok(FeatureFamily::Lex),
            "GEN" => Ok(FeatureFamily::Gen),
            "GNE" => Ok(FeatureFamily::Gne),
            other => Err(LearnError::UnknownFamily(other.to_string())),
        }
    }
}

/// A named, nonempty feature-family combination to train and score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub name: String,
    pub families: BTreeSet<FeatureFamily>,
}

impl AblationSpec {
    pub fn new(
        name: impl Into<String>,
        families: impl IntoIterator<Item = FeatureFamily>,
    ) -> Result<Self, LearnError> {
        let name = name.into();
        let families: BTreeSet<FeatureFamily> = families.into_iter().collect();
        if families.is_empty() {
            return Err(LearnError::EmptyFeatureSet { name });
        }
        Ok(AblationSpec { name, families })
    }

    /// Canonical "PST+VRB+..." form.
    pub fn label(&self) -> String {
        self.families
            .iter()
            .map(|f| f.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// One spec's training and selection data, already featurized for exactly
/// that spec's families.
pub struct AblationRun {
    pub spec: AblationSpec,
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
}

/// Result of tuning one spec on the selection split.
#[derive(Debug, Clone, Serialize)]
pub struct AblationOutcome {
    pub name: String,
    pub families: Vec<String>,
    pub best_c: f64,
    pub dev_accuracy: f64,
    /// Accuracy at every grid point, in grid order.
    pub c_accuracies: Vec<(f64, f64)>,
}

/// Train every spec at every C on the grid, select the best C per spec on
/// its selection split, and rank the outcomes by selection accuracy
/// (descending; ties alphabetically). Ties between C values resolve toward
/// the smaller, less complex setting.
pub fn ablate(
    runs: &[AblationRun],
    c_grid: &[f64],
    base: &TrainConfig,
) -> Result<Vec<AblationOutcome>, LearnError> {
    if c_grid.is_empty() {
        return Err(LearnError::EmptyGrid);
    }
    let mut outcomes = Vec::with_capacity(runs.len());
    for run in runs {
        if run.spec.families.is_empty() {
            return Err(LearnError::EmptyFeatureSet {
                name: run.spec.name.clone(),
            });
        }
        let mut c_accuracies = Vec::with_capacity(c_grid.len());
        let mut best: Option<(f64, f64)> = None;
        for &c in c_grid {
            let config = TrainConfig { c, ..base.clone() };
            let model = train(&run.train, &config)?;
            let accuracy = evaluate(&model, &run.dev)?.accuracy;
            c_accuracies.push((c, accuracy));
            let better = match best {
                None => true,
                Some((_, best_acc)) => accuracy > best_acc,
            };
            if better {
                best = Some((c, accuracy));
            }
        }
        let (best_c, dev_accuracy) = best.unwrap();
        outcomes.push(AblationOutcome {
            name: run.spec.name.clone(),
            families: run
                .spec
                .families
                .iter()
                .map(|f| f.as_str().to_string())
                .collect(),
            best_c,
            dev_accuracy,
            c_accuracies,
        });
    }
    outcomes.sort_by(|a, b| {
        b.dev_accuracy
            .total_cmp(&a.dev_accuracy)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(outcomes)
}

/// Write a model as pretty JSON, atomically.
pub fn save_model(path: &Path, model: &Model) -> Result<(), LearnError> {
    let json = serde_json::to_string_pretty(model).map_err(|e| LearnError::BadModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    atomic_write(path, json.as_bytes())?;
    Ok(())
}

/// Load a model, rejecting unknown container formats.
pub fn load_model(path: &Path) -> Result<Model, LearnError> {
    let raw = std::fs::read_to_string(path).map_err(|e| LearnError::BadModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let model: Model = serde_json::from_str(&raw).map_err(|e| LearnError::BadModelFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if model.format != MODEL_FORMAT_VERSION {
        return Err(LearnError::FormatVersion {
            path: path.display().to_string(),
            found: model.format,
            expected: MODEL_FORMAT_VERSION.to_string(),
        });
    }
    Ok(model)
}
