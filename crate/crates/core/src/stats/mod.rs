//! Statistical testing over feature observations: group summaries, pooled
//! t tests, factorial ANOVA with post-hoc range comparisons, and the
//! multiple-comparison machinery used when many features are tested at once.

mod anova;
pub mod dist;
mod report;
mod tukey;

pub use anova::{anova_two_way, AnovaResult, EffectResult};
pub use report::{AnalysisReport, DesignAnalysis, ReportRow};
pub use tukey::{tukey_hsd, TukeyPair, TukeyResult, TukeyScope};

use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {required} observations, found {found}")]
    InsufficientData { required: usize, found: usize },
    #[error("empty design cell a={a}{}", .b.as_ref().map(|b| format!(", b={b}")).unwrap_or_default())]
    EmptyCell { a: String, b: Option<String> },
    #[error("factor {factor} needs at least two levels, found {found}")]
    FactorLevels { factor: &'static str, found: usize },
    #[error("factor b must be present on every observation or on none")]
    MixedFactorB,
    #[error("design matrix is singular at column {column}")]
    SingularDesign { column: String },
    #[error("no residual degrees of freedom left")]
    ZeroResidualDf,
    #[error("paired inputs differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
}

/// Which sums of squares a factorial ANOVA decomposes into.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub enum SsType {
    TypeI,
    #[default]
    TypeII,
    TypeIII,
}

impl std::str::FromStr for SsType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "i" => Ok(SsType::TypeI),
            "2" | "ii" => Ok(SsType::TypeII),
            "3" | "iii" => Ok(SsType::TypeIII),
            other => Err(format!("unknown sum-of-squares type {other:?}")),
        }
    }
}

/// One observation: a value tagged with a level of factor A and, for two-way
/// designs, a level of factor B.
#[derive(Debug, Clone)]
pub struct Observation {
    pub value: f64,
    pub a: String,
    pub b: Option<String>,
}

/// A set of observations under a one- or two-factor layout. Level sets are
/// the distinct labels seen, in sorted order; factor B must be present on
/// every observation or absent from all of them.
#[derive(Debug, Clone)]
pub struct FactorDesign {
    observations: Vec<Observation>,
    levels_a: Vec<String>,
    levels_b: Option<Vec<String>>,
}

impl FactorDesign {
    pub fn new(rows: Vec<(f64, String, Option<String>)>) -> Result<Self, StatsError> {
        if rows.is_empty() {
            return Err(StatsError::InsufficientData {
                required: 1,
                found: 0,
            });
        }
        let has_b = rows[0].2.is_some();
        if rows.iter().any(|(_, _, b)| b.is_some() != has_b) {
            return Err(StatsError::MixedFactorB);
        }
        let mut levels_a: Vec<String> = rows.iter().map(|(_, a, _)| a.clone()).collect();
        levels_a.sort();
        levels_a.dedup();
        let levels_b = if has_b {
            let mut levels: Vec<String> = rows.iter().map(|(_, _, b)| b.clone().unwrap()).collect();
            levels.sort();
            levels.dedup();
            Some(levels)
        } else {
            None
        };
        let observations = rows
            .into_iter()
            .map(|(value, a, b)| Observation { value, a, b })
            .collect();
        Ok(FactorDesign {
            observations,
            levels_a,
            levels_b,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn levels_a(&self) -> &[String] {
        &self.levels_a
    }

    pub fn levels_b(&self) -> Option<&[String]> {
        self.levels_b.as_deref()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Mean and standard error of one design cell. A singleton cell has a
/// well-defined mean but no spread estimate; its standard error is reported
/// as zero with the `degenerate` flag raised.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CellSummary {
    pub a: String,
    pub b: Option<String>,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub degenerate: bool,
}

/// Per-cell means and standard errors over the full factor cross product, in
/// level-sorted order. An empty cell is an error naming the cell.
pub fn group_summary(design: &FactorDesign) -> Result<Vec<CellSummary>, StatsError> {
    let mut buckets: BTreeMap<(String, Option<String>), Vec<f64>> = BTreeMap::new();
    for obs in &design.observations {
        buckets
            .entry((obs.a.clone(), obs.b.clone()))
            .or_default()
            .push(obs.value);
    }
    let cell_keys: Vec<(String, Option<String>)> = match &design.levels_b {
        Some(levels_b) => design
            .levels_a
            .iter()
            .flat_map(|a| levels_b.iter().map(move |b| (a.clone(), Some(b.clone()))))
            .collect(),
        None => design.levels_a.iter().map(|a| (a.clone(), None)).collect(),
    };
    cell_keys
        .into_iter()
        .map(|key| {
            let values = buckets.get(&key).ok_or_else(|| StatsError::EmptyCell {
                a: key.0.clone(),
                b: key.1.clone(),
            })?;
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let (stderr, degenerate) = if n < 2 {
                (0.0, true)
            } else {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                ((var / n as f64).sqrt(), false)
            };
            Ok(CellSummary {
                a: key.0,
                b: key.1,
                n,
                mean,
                stderr,
                degenerate,
            })
        })
        .collect()
}

/// Two-sample pooled-variance t test.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TTestResult {
    pub mean1: f64,
    pub mean2: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
}

/// Student's t test with pooled variance. Both groups need at least two
/// observations. Zero pooled variance collapses to t = 0, p = 1 when the
/// means agree and a zero p-value otherwise.
pub fn t_test(group1: &[f64], group2: &[f64]) -> Result<TTestResult, StatsError> {
    for group in [group1, group2] {
        if group.len() < 2 {
            return Err(StatsError::InsufficientData {
                required: 2,
                found: group.len(),
            });
        }
    }
    let n1 = group1.len() as f64;
    let n2 = group2.len() as f64;
    let mean1 = group1.iter().sum::<f64>() / n1;
    let mean2 = group2.iter().sum::<f64>() / n2;
    let ss1: f64 = group1.iter().map(|v| (v - mean1).powi(2)).sum();
    let ss2: f64 = group2.iter().map(|v| (v - mean2).powi(2)).sum();
    let df = group1.len() + group2.len() - 2;
    let pooled_var = (ss1 + ss2) / df as f64;
    let se = (pooled_var * (1.0 / n1 + 1.0 / n2)).sqrt();
    let diff = mean1 - mean2;
    let (t, p) = if se == 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = diff / se;
        let p = 2.0 * (1.0 - dist::t_cdf(t.abs(), df as f64)?);
        (t, p.clamp(0.0, 1.0))
    };
    Ok(TTestResult {
        mean1,
        mean2,
        t,
        df,
        p,
    })
}

/// One hypothesis under a Bonferroni family.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BonferroniDecision {
    pub p: f64,
    pub adjusted_p: f64,
    pub significant: bool,
}

/// Bonferroni correction summary for a family of `m` hypotheses.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BonferroniResult {
    pub alpha: f64,
    pub family_size: usize,
    pub threshold: f64,
    pub decisions: Vec<BonferroniDecision>,
}

/// Bonferroni correction: each raw p-value is compared against `alpha / m`
/// and reported alongside `min(1, p * m)`. The family size may exceed the
/// number of p-values supplied when the family spans several calls.
pub fn bonferroni(
    p_values: &[f64],
    family_size: usize,
    alpha: f64,
) -> Result<BonferroniResult, StatsError> {
    if family_size == 0 {
        return Err(StatsError::InvalidParameter {
            what: "Bonferroni family size must be positive".to_string(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(StatsError::InvalidParameter {
            what: format!("alpha must lie in [0, 1], got {alpha}"),
        });
    }
    let threshold = alpha / family_size as f64;
    let decisions = p_values
        .iter()
        .map(|&p| BonferroniDecision {
            p,
            adjusted_p: (p * family_size as f64).min(1.0),
            significant: p < threshold,
        })
        .collect();
    Ok(BonferroniResult {
        alpha,
        family_size,
        threshold,
        decisions,
    })
}

/// Which computation produced a McNemar p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquare,
}

/// Paired comparison of two classifiers on the same items.
#[derive(Debug, Clone, serde::Serialize)]
pub struct McNemarResult {
    /// Items the first classifier got right and the second got wrong.
    pub b: usize,
    /// Items the first classifier got wrong and the second got right.
    pub c: usize,
    pub method: McNemarMethod,
    /// Chi-square statistic; absent for the exact small-sample branch.
    pub statistic: Option<f64>,
    pub p: f64,
}

/// McNemar's test on the discordant pairs of two classifiers scored against
/// the same gold labels. Fewer than 25 discordant pairs switch to the exact
/// two-sided binomial; otherwise the continuity-corrected chi-square
/// approximation applies.
pub fn mcnemar<T: PartialEq>(
    pred_a: &[T],
    pred_b: &[T],
    gold: &[T],
) -> Result<McNemarResult, StatsError> {
    if pred_a.len() != gold.len() {
        return Err(StatsError::LengthMismatch {
            left: pred_a.len(),
            right: gold.len(),
        });
    }
    if pred_b.len() != gold.len() {
        return Err(StatsError::LengthMismatch {
            left: pred_b.len(),
            right: gold.len(),
        });
    }
    let mut b = 0usize;
    let mut c = 0usize;
    for i in 0..gold.len() {
        let a_correct = pred_a[i] == gold[i];
        let b_correct = pred_b[i] == gold[i];
        match (a_correct, b_correct) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let n = b + c;
    if n < 25 {
        // Exact two-sided binomial on the discordant count.
        let k = b.min(c);
        let mut tail = 0.0f64;
        for i in 0..=k {
            tail += binomial_coefficient(n, i);
        }
        let p = (2.0 * tail / 2f64.powi(n as i32)).min(1.0);
        Ok(McNemarResult {
            b,
            c,
            method: McNemarMethod::ExactBinomial,
            statistic: None,
            p,
        })
    } else {
        let diff = (b as f64 - c as f64).abs() - 1.0;
        let statistic = diff.max(0.0).powi(2) / n as f64;
        let p = 1.0 - dist::chi_square_cdf(statistic, 1.0)?;
        Ok(McNemarResult {
            b,
            c,
            method: McNemarMethod::ChiSquare,
            statistic: Some(statistic),
            p,
        })
    }
}

/// Exact binomial coefficient as f64; n stays below 25 here so the products
/// are nowhere near overflow.
fn binomial_coefficient(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut result = 1.0f64;
    for i in 0..k {
        result = result * (n - i) as f64 / (i + 1) as f64;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn factor_design_validates_shape() {
        assert!(matches!(
            FactorDesign::new(vec![]),
            Err(StatsError::InsufficientData { .. })
        ));
        let mixed = vec![
            (1.0, "a".to_string(), Some("b".to_string())),
            (2.0, "a".to_string(), None),
        ];
        assert!(matches!(
            FactorDesign::new(mixed),
            Err(StatsError::MixedFactorB)
        ));
        let design = FactorDesign::new(vec![
            (1.0, "a2".to_string(), Some("b1".to_string())),
            (2.0, "a1".to_string(), Some("b2".to_string())),
            (3.0, "a1".to_string(), Some("b1".to_string())),
            (4.0, "a2".to_string(), Some("b2".to_string())),
        ])
        .unwrap();
        assert_eq!(design.levels_a(), ["a1", "a2"]);
        assert_eq!(design.levels_b().unwrap(), ["b1", "b2"]);
    }

    #[test]
    fn group_summary_means_and_stderr() {
        let design = FactorDesign::new(vec![
            (2.0, "g1".to_string(), None),
            (4.0, "g1".to_string(), None),
            (10.0, "g2".to_string(), None),
        ])
        .unwrap();
        let cells = group_summary(&design).unwrap();
        assert_eq!(cells.len(), 2);
        assert_relative_eq!(cells[0].mean, 3.0, max_relative = 1e-12);
        // sd = sqrt(2), stderr = sqrt(2)/sqrt(2) = 1.
        assert_relative_eq!(cells[0].stderr, 1.0, max_relative = 1e-12);
        assert!(!cells[0].degenerate);
        assert_eq!(cells[1].n, 1);
        assert_eq!(cells[1].stderr, 0.0);
        assert!(cells[1].degenerate);
    }

    #[test]
    fn group_summary_names_the_empty_cell() {
        let design = FactorDesign::new(vec![
            (1.0, "a1".to_string(), Some("b1".to_string())),
            (2.0, "a1".to_string(), Some("b2".to_string())),
            (3.0, "a2".to_string(), Some("b1".to_string())),
        ])
        .unwrap();
        match group_summary(&design).unwrap_err() {
            StatsError::EmptyCell { a, b } => {
                assert_eq!(a, "a2");
                assert_eq!(b.as_deref(), Some("b2"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn t_test_hand_checked() {
        let result = t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_relative_eq!(result.t, -3.0 / (2.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert_eq!(result.df, 4);
        assert!((result.p - 0.0213).abs() < 5e-4, "p = {}", result.p);
    }

    #[test]
    fn t_test_zero_variance() {
        let equal = t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(equal.t, 0.0);
        assert_eq!(equal.p, 1.0);
        let unequal = t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert!(unequal.t.is_infinite() && unequal.t < 0.0);
        assert_eq!(unequal.p, 0.0);
        assert!(matches!(
            t_test(&[1.0], &[2.0, 3.0]),
            Err(StatsError::InsufficientData { .. })
        ));
    }

    #[test]
    fn bonferroni_threshold_and_adjustment() {
        let result = bonferroni(&[0.0003, 0.0005, 0.2], 120, 0.05).unwrap();
        assert_relative_eq!(result.threshold, 0.05 / 120.0, max_relative = 1e-12);
        // 0.05 / 120 = 0.000416...; only the first p-value clears it.
        assert!(result.decisions[0].significant);
        assert!(!result.decisions[1].significant);
        assert!(!result.decisions[2].significant);
        assert_relative_eq!(result.decisions[0].adjusted_p, 0.036, max_relative = 1e-9);
        assert_eq!(result.decisions[2].adjusted_p, 1.0);
        assert!(bonferroni(&[0.5], 0, 0.05).is_err());
    }

    #[test]
    fn mcnemar_exact_oracle() {
        // b = 0, c = 10: p = 2 * P(X <= 0 | n = 10) = 2 / 2^10.
        let gold = vec![true; 10];
        let pred_a = vec![false; 10];
        let pred_b = vec![true; 10];
        let result = mcnemar(&pred_a, &pred_b, &gold).unwrap();
        assert_eq!((result.b, result.c), (0, 10));
        assert_eq!(result.method, McNemarMethod::ExactBinomial);
        assert_relative_eq!(result.p, 2.0f64.powi(-9), epsilon = 1e-12);
    }

    #[test]
    fn mcnemar_chi_square_branch() {
        // b = 20, c = 10: statistic = (|10| - 1)^2 / 30 = 2.7.
        let mut gold = Vec::new();
        let mut pred_a = Vec::new();
        let mut pred_b = Vec::new();
        for _ in 0..20 {
            gold.push(1u8);
            pred_a.push(1);
            pred_b.push(0);
        }
        for _ in 0..10 {
            gold.push(1);
            pred_a.push(0);
            pred_b.push(1);
        }
        let result = mcnemar(&pred_a, &pred_b, &gold).unwrap();
        assert_eq!(result.method, McNemarMethod::ChiSquare);
        assert_relative_eq!(result.statistic.unwrap(), 2.7, max_relative = 1e-12);
        // 1 - chi2_cdf(2.7, 1) = 0.1003...
        assert!((result.p - 0.1003).abs() < 1e-3);
    }

    #[test]
    fn mcnemar_balanced_discordance_is_null() {
        let gold = vec![1u8, 1, 1, 1];
        let pred_a = vec![1, 1, 0, 0];
        let pred_b = vec![0, 0, 1, 1];
        let result = mcnemar(&pred_a, &pred_b, &gold).unwrap();
        assert_eq!((result.b, result.c), (2, 2));
        assert_eq!(result.p, 1.0);
    }

    #[test]
    fn mcnemar_length_mismatch() {
        assert!(matches!(
            mcnemar(&[1u8, 2], &[1, 2], &[1]),
            Err(StatsError::LengthMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Swapping the classifiers swaps b and c but never changes p.
        #[test]
        fn mcnemar_swap_invariance(outcomes in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let gold: Vec<bool> = vec![true; outcomes.len()];
            let pred_a: Vec<bool> = outcomes.iter().map(|&(a, _)| a).collect();
            let pred_b: Vec<bool> = outcomes.iter().map(|&(_, b)| b).collect();
            let forward = mcnemar(&pred_a, &pred_b, &gold).unwrap();
            let backward = mcnemar(&pred_b, &pred_a, &gold).unwrap();
            prop_assert_eq!(forward.b, backward.c);
            prop_assert_eq!(forward.c, backward.b);
            prop_assert!((forward.p - backward.p).abs() < 1e-12);
        }

        /// The pooled t statistic flips sign under group exchange and the
        /// p-value is symmetric.
        #[test]
        fn t_test_antisymmetry(
            g1 in prop::collection::vec(-50.0f64..50.0, 2..10),
            g2 in prop::collection::vec(-50.0f64..50.0, 2..10),
        ) {
            let forward = t_test(&g1, &g2).unwrap();
            let backward = t_test(&g2, &g1).unwrap();
            prop_assert!((forward.t + backward.t).abs() < 1e-9 || (forward.t.is_infinite() && backward.t.is_infinite()));
            prop_assert!((forward.p - backward.p).abs() < 1e-9);
        }

        /// Bonferroni adjusted p-values are monotone in the raw p-values and
        /// a significant decision always survives shrinking the family.
        #[test]
        fn bonferroni_monotonicity(
            mut ps in prop::collection::vec(0.0f64..1.0, 2..10),
            m in 1usize..200,
        ) {
            ps.sort_by(f64::total_cmp);
            let result = bonferroni(&ps, m, 0.05).unwrap();
            for pair in result.decisions.windows(2) {
                prop_assert!(pair[0].adjusted_p <= pair[1].adjusted_p + 1e-12);
            }
            if m > 1 {
                let smaller = bonferroni(&ps, m - 1, 0.05).unwrap();
                for (big, small) in result.decisions.iter().zip(&smaller.decisions) {
                    if big.significant {
                        prop_assert!(small.significant);
                    }
                }
            }
        }
    }
}
