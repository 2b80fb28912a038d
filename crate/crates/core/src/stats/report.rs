//! Serializable containers for a batch of statistical analyses: one entry
//! per (feature, design) pairing, with a family-wide multiplicity
//! correction applied across the headline p-values, plus a flat row form
//! for CSV export.

use super::{
    bonferroni, AnovaResult, BonferroniResult, CellSummary, StatsError, TTestResult, TukeyResult,
};

/// Everything computed for one feature under one factor layout.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DesignAnalysis {
    pub feature: String,
    pub design: String,
    pub cells: Vec<CellSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_test: Option<TTestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anova: Option<AnovaResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tukey: Option<TukeyResult>,
    /// Headline p-value feeding the family-wide correction: the t test's p
    /// for plain group comparisons, the first factor's p for factorials.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primary_p: Option<f64>,
    /// Set by the family-wide Bonferroni pass.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bonferroni_significant: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl DesignAnalysis {
    pub fn new(feature: impl Into<String>, design: impl Into<String>) -> Self {
        DesignAnalysis {
            feature: feature.into(),
            design: design.into(),
            cells: Vec::new(),
            t_test: None,
            anova: None,
            tukey: None,
            primary_p: None,
            bonferroni_significant: None,
            notes: Vec::new(),
        }
    }
}

/// A batch of analyses with one shared multiple-comparison family.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub analyses: Vec<DesignAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bonferroni: Option<BonferroniResult>,
}

impl AnalysisReport {
    pub fn new(alpha: f64) -> Self {
        AnalysisReport {
            alpha,
            analyses: Vec::new(),
            bonferroni: None,
        }
    }

    /// Correct across every analysis that produced a headline p-value. The
    /// family size is the count of such analyses unless a larger explicit
    /// family is given (when this batch is one slice of a wider family).
    pub fn apply_bonferroni(&mut self, family_size: Option<usize>) -> Result<(), StatsError> {
        let ps: Vec<f64> = self.analyses.iter().filter_map(|a| a.primary_p).collect();
        if ps.is_empty() {
            return Ok(());
        }
        let family = family_size.unwrap_or(ps.len()).max(ps.len());
        let result = bonferroni(&ps, family, self.alpha)?;
        let mut decisions = result.decisions.iter();
        for analysis in &mut self.analyses {
            if analysis.primary_p.is_some() {
                analysis.bonferroni_significant = Some(decisions.next().unwrap().significant);
            }
        }
        self.bonferroni = Some(result);
        Ok(())
    }

    /// Flatten into rows for CSV export: one row per cell, test line,
    /// ANOVA effect, and pairwise comparison.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for analysis in &self.analyses {
            let base = |section: &str, label: String| ReportRow {
                feature: analysis.feature.clone(),
                design: analysis.design.clone(),
                section: section.to_string(),
                label,
                n: None,
                mean: None,
                stderr: None,
                statistic: None,
                df: None,
                p: None,
                adjusted_p: None,
                significant: None,
            };
            for cell in &analysis.cells {
                let label = match &cell.b {
                    Some(b) => format!("{}/{}", cell.a, b),
                    None => cell.a.clone(),
                };
                let mut row = base("cell", label);
                row.n = Some(cell.n);
                row.mean = Some(cell.mean);
                row.stderr = Some(cell.stderr);
                rows.push(row);
            }
            if let Some(t) = &analysis.t_test {
                let mut row = base("t_test", String::new());
                row.statistic = Some(t.t);
                row.df = Some(t.df.to_string());
                row.p = Some(t.p);
                row.significant = Some(t.p < self.alpha);
                rows.push(row);
            }
            if let Some(anova) = &analysis.anova {
                for effect in &anova.effects {
                    let mut row = base("anova", effect.label.clone());
                    row.statistic = Some(effect.f);
                    row.df = Some(format!("{}/{}", effect.df, anova.residual_df));
                    row.p = Some(effect.p);
                    row.significant = Some(effect.p < self.alpha);
                    rows.push(row);
                }
            }
            if let Some(tukey) = &analysis.tukey {
                for pair in &tukey.pairs {
                    let mut row = base("tukey", format!("{} vs {}", pair.group_i, pair.group_j));
                    row.mean = Some(pair.diff);
                    row.statistic = Some(pair.q);
                    row.df = Some(tukey.residual_df.to_string());
                    row.p = Some(pair.p);
                    row.significant = Some(pair.significant);
                    rows.push(row);
                }
            }
            if let (Some(p), Some(flag)) = (analysis.primary_p, analysis.bonferroni_significant) {
                let mut row = base("bonferroni", String::new());
                row.p = Some(p);
                if let Some(b) = &self.bonferroni {
                    row.adjusted_p = Some((p * b.family_size as f64).min(1.0));
                }
                row.significant = Some(flag);
                rows.push(row);
            }
        }
        rows
    }
}

/// One flattened report line; optional fields serialize as empty CSV cells.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportRow {
    pub feature: String,
    pub design: String,
    pub section: String,
    pub label: String,
    pub n: Option<usize>,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub statistic: Option<f64>,
    pub df: Option<String>,
    pub p: Option<f64>,
    pub adjusted_p: Option<f64>,
    pub significant: Option<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{anova_two_way, group_summary, t_test, FactorDesign, SsType};

    fn sample_analysis() -> DesignAnalysis {
        let design = FactorDesign::new(vec![
            (1.0, "sup".to_string(), None),
            (2.0, "sup".to_string(), None),
            (3.0, "sub".to_string(), None),
            (5.0, "sub".to_string(), None),
        ])
        .unwrap();
        let mut analysis = DesignAnalysis::new("msg_count", "power");
        analysis.cells = group_summary(&design).unwrap();
        let t = t_test(&[1.0, 2.0], &[3.0, 5.0]).unwrap();
        analysis.primary_p = Some(t.p);
        analysis.t_test = Some(t);
        analysis
    }

    #[test]
    fn bonferroni_pass_sets_flags_and_family() {
        let mut report = AnalysisReport::new(0.05);
        report.analyses.push(sample_analysis());
        let mut second = DesignAnalysis::new("token_count", "power");
        second.primary_p = Some(0.0001);
        report.analyses.push(second);
        let mut third = DesignAnalysis::new("skipped", "power");
        third.notes.push("degenerate cell".to_string());
        report.analyses.push(third);

        report.apply_bonferroni(Some(120)).unwrap();
        let bonf = report.bonferroni.as_ref().unwrap();
        assert_eq!(bonf.family_size, 120);
        assert!((bonf.threshold - 0.05 / 120.0).abs() < 1e-15);
        assert_eq!(report.analyses[1].bonferroni_significant, Some(true));
        assert_eq!(report.analyses[2].bonferroni_significant, None);
    }

    #[test]
    fn family_never_shrinks_below_observed() {
        let mut report = AnalysisReport::new(0.05);
        for i in 0..5 {
            let mut a = DesignAnalysis::new(format!("f{i}"), "power");
            a.primary_p = Some(0.01);
            report.analyses.push(a);
        }
        report.apply_bonferroni(Some(2)).unwrap();
        assert_eq!(report.bonferroni.as_ref().unwrap().family_size, 5);
    }

    #[test]
    fn rows_cover_every_section() {
        let mut report = AnalysisReport::new(0.05);
        let mut analysis = sample_analysis();
        let design = FactorDesign::new(vec![
            (1.0, "sup".to_string(), Some("m".to_string())),
            (2.0, "sup".to_string(), Some("m".to_string())),
            (3.0, "sup".to_string(), Some("f".to_string())),
            (4.0, "sup".to_string(), Some("f".to_string())),
            (5.0, "sub".to_string(), Some("m".to_string())),
            (6.0, "sub".to_string(), Some("m".to_string())),
            (7.0, "sub".to_string(), Some("f".to_string())),
            (8.0, "sub".to_string(), Some("f".to_string())),
        ])
        .unwrap();
        analysis.anova = Some(anova_two_way(&design, SsType::TypeII).unwrap());
        report.analyses.push(analysis);
        report.apply_bonferroni(None).unwrap();

        let rows = report.rows();
        let sections: std::collections::BTreeSet<&str> =
            rows.iter().map(|r| r.section.as_str()).collect();
        assert!(sections.contains("cell"));
        assert!(sections.contains("t_test"));
        assert!(sections.contains("anova"));
        assert!(sections.contains("bonferroni"));
        let anova_rows: Vec<_> = rows.iter().filter(|r| r.section == "anova").collect();
        assert_eq!(anova_rows.len(), 3);
        assert_eq!(anova_rows[0].df.as_deref(), Some("1/4"));
        // JSON serialization stays well-formed.
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"msg_count\""));
    }
}
