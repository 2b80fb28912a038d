//! `analyze`: factorial statistics over each whole-thread structural feature
//! of the first-listed person, across power, gender, and gender-environment
//! factors.
//!
//! Both orientations of every pair contribute, so each person of a related
//! pair is observed once per thread. Designs that cannot be estimated on the
//! data at hand (an empty cell, a missing factor level, too few points) are
//! skipped with a warning and recorded in the report notes; the run
//! continues.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use orgmail_core::features::{Variant, STRUCTURAL_COLUMNS};
use orgmail_core::stats::{
    anova_two_way, group_summary, t_test, tukey_hsd, AnalysisReport, DesignAnalysis, FactorDesign,
    SsType, StatsError, TukeyScope,
};

use crate::commands::{out_dir, write_json};
use crate::config::{require_artifact, require_path, ConfigMap};
use crate::featurize::DENSE_FILE;
use crate::tables::{read_dense, DenseRow};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Directory holding the feature tables from `orgmail features`.
    #[arg(long, value_name = "DIR")]
    features_dir: Option<PathBuf>,
    /// Significance level [default: 0.05].
    #[arg(long, value_name = "ALPHA")]
    alpha: Option<f64>,
    /// Sum-of-squares type for factorial designs: 1, 2, or 3 [default: 2].
    #[arg(long, value_name = "TYPE")]
    ss_type: Option<String>,
    /// Family size for the Bonferroni correction; grows to the number of
    /// tests actually run if smaller [default: tests run].
    #[arg(long, value_name = "N")]
    bonferroni_family: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

/// Index of the whole-thread (Mt) variant of the first-listed person within
/// the variant-major structural row.
const P1_MT: usize = 2;

struct Observation {
    value: f64,
    power: String,
    gender: Option<String>,
    env: Option<String>,
}

fn observations(rows: &[DenseRow], feature_idx: usize) -> Vec<Observation> {
    rows.iter()
        .map(|row| Observation {
            value: row.structural[P1_MT * STRUCTURAL_COLUMNS.len() + feature_idx],
            power: row.hp_label.as_str().to_string(),
            gender: row.gender_p1.and_then(|g| match g {
                orgmail_core::model::Gender::Indeterminate => None,
                g => Some(g.as_str().to_string()),
            }),
            env: row.env_p1.map(|e| e.as_str().to_string()),
        })
        .collect()
}

/// Builds one design, reporting any statistics error as a skip note.
fn run_design(
    report: &mut AnalysisReport,
    feature: &str,
    design_name: &str,
    build: impl FnOnce(&mut DesignAnalysis) -> Result<(), StatsError>,
) {
    let mut analysis = DesignAnalysis::new(feature, design_name);
    if let Err(e) = build(&mut analysis) {
        eprintln!("warning: {feature}/{design_name}: {e}; skipped");
        analysis = DesignAnalysis::new(feature, design_name);
        analysis.notes.push(format!("skipped: {e}"));
    }
    report.analyses.push(analysis);
}

/// Two-level comparison: group summary plus a pooled t test. Group order is
/// the sorted level order, so `mean1` belongs to the alphabetically first
/// level.
fn t_design(analysis: &mut DesignAnalysis, points: Vec<(f64, String)>) -> Result<(), StatsError> {
    let design = FactorDesign::new(points.iter().map(|(v, a)| (*v, a.clone(), None)).collect())?;
    let levels = design.levels_a().to_vec();
    if levels.len() != 2 {
        return Err(StatsError::FactorLevels {
            factor: "a",
            found: levels.len(),
        });
    }
    analysis.cells = group_summary(&design)?;
    let side = |level: &str| -> Vec<f64> {
        points
            .iter()
            .filter(|(_, a)| a == level)
            .map(|(v, _)| *v)
            .collect()
    };
    let result = t_test(&side(&levels[0]), &side(&levels[1]))?;
    analysis.primary_p = Some(result.p);
    analysis.t_test = Some(result);
    Ok(())
}

/// Two-way factorial: ANOVA of the selected type, Tukey over the cells, and
/// the first factor's p as the headline value.
fn factorial_design(
    analysis: &mut DesignAnalysis,
    points: Vec<(f64, String, String)>,
    ss_type: SsType,
    alpha: f64,
) -> Result<(), StatsError> {
    let design = FactorDesign::new(
        points
            .into_iter()
            .map(|(v, a, b)| (v, a, Some(b)))
            .collect(),
    )?;
    let anova = anova_two_way(&design, ss_type)?;
    analysis.cells = anova.cells.clone();
    analysis.primary_p = anova.effects.first().map(|e| e.p);
    match tukey_hsd(
        &design,
        TukeyScope::Cells,
        anova.residual_ms,
        anova.residual_df,
        alpha,
    ) {
        Ok(tukey) => analysis.tukey = Some(tukey),
        Err(e) => analysis.notes.push(format!("tukey skipped: {e}")),
    }
    analysis.anova = Some(anova);
    Ok(())
}

pub fn run(args: AnalyzeArgs, cfg: &ConfigMap) -> Result<()> {
    let features_dir = require_path(args.features_dir, cfg, "features-dir")?;
    let alpha = args.alpha.or_else(|| cfg.f64("alpha")).unwrap_or(0.05);
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(anyhow!("alpha must lie in (0, 1), got {alpha}"));
    }
    let ss_type: SsType = args
        .ss_type
        .or_else(|| cfg.string("ss-type"))
        .map(|s| s.parse())
        .transpose()
        .map_err(|e| anyhow!("{e}"))?
        .unwrap_or_default();
    let family = args
        .bonferroni_family
        .or_else(|| cfg.usize("bonferroni-family"));
    let out = out_dir(args.out_dir, cfg)?;

    let dense_path = features_dir.join(DENSE_FILE);
    require_artifact(&dense_path, "dense feature table", "features")?;
    let rows = read_dense(&dense_path)?;
    if rows.is_empty() {
        return Err(anyhow!(
            "the dense feature table {} has no instances",
            dense_path.display()
        ));
    }

    let variant_prefix = Variant::ALL[P1_MT].prefix();
    let mut report = AnalysisReport::new(alpha);
    for (idx, column) in STRUCTURAL_COLUMNS.iter().enumerate() {
        let feature = format!("{variant_prefix}{column}");
        let obs = observations(&rows, idx);

        run_design(&mut report, &feature, "power", |analysis| {
            let points = obs.iter().map(|o| (o.value, o.power.clone())).collect();
            t_design(analysis, points)
        });
        run_design(&mut report, &feature, "gender", |analysis| {
            let points = obs
                .iter()
                .filter_map(|o| o.gender.clone().map(|g| (o.value, g)))
                .collect();
            t_design(analysis, points)
        });
        run_design(&mut report, &feature, "power_x_gender", |analysis| {
            let points = obs
                .iter()
                .filter_map(|o| o.gender.clone().map(|g| (o.value, o.power.clone(), g)))
                .collect();
            factorial_design(analysis, points, ss_type, alpha)
        });
        run_design(&mut report, &feature, "power_x_gender_env", |analysis| {
            let points = obs
                .iter()
                .filter_map(|o| o.env.clone().map(|e| (o.value, o.power.clone(), e)))
                .collect();
            factorial_design(analysis, points, ss_type, alpha)
        });
    }

    report
        .apply_bonferroni(family)
        .map_err(|e| anyhow!("{e}"))?;

    let json_path = out.join("analysis.json");
    write_json(&json_path, &report)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in report.rows() {
        wtr.serialize(row)?;
    }
    let csv_path = out.join("analysis.csv");
    let bytes = wtr
        .into_inner()
        .map_err(|e| anyhow!("csv buffer error: {e}"))?;
    orgmail_core::ingest::atomic_write(&csv_path, &bytes)?;

    let ran = report
        .analyses
        .iter()
        .filter(|a| a.primary_p.is_some())
        .count();
    let skipped = report.analyses.len() - ran;
    let significant = report
        .analyses
        .iter()
        .filter(|a| a.bonferroni_significant == Some(true))
        .count();
    println!(
        "analyze: {} designs over {} features ({} run, {} skipped); {} significant after correction (alpha {})",
        report.analyses.len(),
        STRUCTURAL_COLUMNS.len(),
        ran,
        skipped,
        significant,
        alpha
    );
    println!("wrote {}", json_path.display());
    println!("wrote {}", csv_path.display());
    Ok(())
}
