//! Factorial analysis of variance by least-squares model comparison.
//!
//! Effects are encoded with sum-to-zero contrasts and each effect's sum of
//! squares is the residual-sum-of-squares drop between two nested linear
//! models. Which pair of models depends on the sum-of-squares type:
//!
//! * Type I — sequential: each effect against the model of everything before
//!   it, in the order A, B, A×B.
//! * Type II — each main effect against the other main effect, ignoring the
//!   interaction; the interaction against both main effects. The default,
//!   since observational cell counts are unbalanced.
//! * Type III — each effect against the full model with only that effect
//!   removed.
//!
//! On balanced designs the three coincide.

use std::collections::BTreeMap;

use super::{dist, CellSummary, FactorDesign, SsType, StatsError};

/// One line of an ANOVA table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EffectResult {
    pub label: String,
    pub ss: f64,
    pub df: usize,
    pub mean_square: f64,
    pub f: f64,
    pub p: f64,
}

/// Full ANOVA table plus the residual line and the cell layout it was
/// computed from.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AnovaResult {
    pub ss_type: SsType,
    pub effects: Vec<EffectResult>,
    pub residual_ss: f64,
    pub residual_df: usize,
    pub residual_ms: f64,
    pub grand_mean: f64,
    pub cells: Vec<CellSummary>,
}

/// Effect blocks a model can contain, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    FactorA,
    FactorB,
    Interaction,
}

/// Sum-to-zero contrast columns for one factor: level index `i < L-1` maps to
/// column `i` with +1, the last level carries -1 in every column.
fn contrast_row(level_index: usize, level_count: usize) -> Vec<f64> {
    let mut row = vec![0.0; level_count - 1];
    if level_index + 1 == level_count {
        row.iter_mut().for_each(|v| *v = -1.0);
    } else {
        row[level_index] = 1.0;
    }
    row
}

/// Design matrix for intercept plus the requested terms.
fn design_matrix(design: &FactorDesign, terms: &[Term]) -> (Vec<Vec<f64>>, Vec<String>) {
    let levels_a = design.levels_a();
    let levels_b = design.levels_b().unwrap_or_default();
    let index_a: BTreeMap<&str, usize> = levels_a
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let index_b: BTreeMap<&str, usize> = levels_b
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let mut labels = vec!["intercept".to_string()];
    for term in terms {
        match term {
            Term::FactorA => {
                labels.extend(
                    levels_a[..levels_a.len() - 1]
                        .iter()
                        .map(|l| format!("a:{l}")),
                );
            }
            Term::FactorB => {
                labels.extend(
                    levels_b[..levels_b.len() - 1]
                        .iter()
                        .map(|l| format!("b:{l}")),
                );
            }
            Term::Interaction => {
                for la in &levels_a[..levels_a.len() - 1] {
                    for lb in &levels_b[..levels_b.len() - 1] {
                        labels.push(format!("a:{la}*b:{lb}"));
                    }
                }
            }
        }
    }

    let rows = design
        .observations()
        .iter()
        .map(|obs| {
            let mut row = vec![1.0];
            let ca = contrast_row(index_a[obs.a.as_str()], levels_a.len());
            let cb = obs
                .b
                .as_deref()
                .map(|b| contrast_row(index_b[b], levels_b.len()));
            for term in terms {
                match term {
                    Term::FactorA => row.extend_from_slice(&ca),
                    Term::FactorB => row.extend_from_slice(cb.as_ref().unwrap()),
                    Term::Interaction => {
                        let cb = cb.as_ref().unwrap();
                        for &va in &ca {
                            for &vb in cb {
                                row.push(va * vb);
                            }
                        }
                    }
                }
            }
            row
        })
        .collect();
    (rows, labels)
}

/// Residual sum of squares of the least-squares fit of `y` on `x`,
/// via the normal equations and Gaussian elimination with partial pivoting.
// The elimination reads and writes two matrix rows in one step, which iterator
// adapters cannot express without split_at_mut noise; indices are the idiom.
#[allow(clippy::needless_range_loop)]
fn fit_rss(x: &[Vec<f64>], y: &[f64], labels: &[String]) -> Result<f64, StatsError> {
    let n = x.len();
    let p = x[0].len();
    // Gram matrix X'X and right-hand side X'y.
    let mut gram = vec![vec![0.0f64; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in i..p {
                gram[i][j] += row[i] * row[j];
            }
            gram[i][p] += row[i] * yi;
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
    }

    let scale = gram
        .iter()
        .flat_map(|r| r[..p].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = scale.max(1.0) * 1e-10;

    // Forward elimination with partial pivoting.
    let mut order: Vec<usize> = (0..p).collect();
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&a, &b| gram[a][col].abs().total_cmp(&gram[b][col].abs()))
            .unwrap();
        if gram[pivot_row][col].abs() < tol {
            return Err(StatsError::SingularDesign {
                column: labels[order[col]].clone(),
            });
        }
        gram.swap(col, pivot_row);
        order.swap(col, pivot_row);
        for row in col + 1..p {
            let factor = gram[row][col] / gram[col][col];
            for j in col..=p {
                gram[row][j] -= factor * gram[col][j];
            }
        }
    }
    // Back substitution.
    let mut beta = vec![0.0f64; p];
    for col in (0..p).rev() {
        let mut acc = gram[col][p];
        for j in col + 1..p {
            acc -= gram[col][j] * beta[j];
        }
        beta[col] = acc / gram[col][col];
    }

    let mut rss = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let fitted: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let r = yi - fitted;
        rss += r * r;
    }
    debug_assert_eq!(n, y.len());
    Ok(rss)
}

/// RSS of the model containing the intercept plus `terms`.
fn model_rss(design: &FactorDesign, y: &[f64], terms: &[Term]) -> Result<f64, StatsError> {
    let (x, labels) = design_matrix(design, terms);
    fit_rss(&x, y, &labels)
}

/// Two-way (or one-way, when factor B is absent) fixed-effects ANOVA.
///
/// Every cell of the factor cross product must be populated and the residual
/// must keep at least one degree of freedom.
pub fn anova_two_way(design: &FactorDesign, ss_type: SsType) -> Result<AnovaResult, StatsError> {
    let cells = super::group_summary(design)?;
    let levels_a = design.levels_a();
    if levels_a.len() < 2 {
        return Err(StatsError::FactorLevels {
            factor: "a",
            found: levels_a.len(),
        });
    }
    let y: Vec<f64> = design.observations().iter().map(|o| o.value).collect();
    let n = y.len();
    let grand_mean = y.iter().sum::<f64>() / n as f64;

    let two_way = design.levels_b().is_some();
    if two_way && design.levels_b().unwrap().len() < 2 {
        return Err(StatsError::FactorLevels {
            factor: "b",
            found: design.levels_b().unwrap().len(),
        });
    }

    let df_a = levels_a.len() - 1;
    let (full_terms, df_b, df_ab): (Vec<Term>, usize, usize) = if two_way {
        let lb = design.levels_b().unwrap().len();
        (
            vec![Term::FactorA, Term::FactorB, Term::Interaction],
            lb - 1,
            df_a * (lb - 1),
        )
    } else {
        (vec![Term::FactorA], 0, 0)
    };
    let model_df = 1 + df_a + df_b + df_ab;
    if n <= model_df {
        return Err(StatsError::ZeroResidualDf);
    }
    let residual_df = n - model_df;

    let rss_full = model_rss(design, &y, &full_terms)?;
    let residual_ms = rss_full / residual_df as f64;

    // Residual drop between nested models; tiny negatives are rounding noise.
    let drop = |rss_without: f64, rss_with: f64| (rss_without - rss_with).max(0.0);

    let mut effects = Vec::new();
    if two_way {
        use Term::{FactorA as A, FactorB as B, Interaction as AB};
        let rss_a = model_rss(design, &y, &[A])?;
        let rss_b = model_rss(design, &y, &[B])?;
        let rss_ab_less = model_rss(design, &y, &[A, B])?;
        let rss_1 = model_rss(design, &y, &[])?;
        let (ss_a, ss_b) = match ss_type {
            SsType::TypeI => (drop(rss_1, rss_a), drop(rss_a, rss_ab_less)),
            SsType::TypeII => (drop(rss_b, rss_ab_less), drop(rss_a, rss_ab_less)),
            SsType::TypeIII => {
                let rss_no_a = model_rss(design, &y, &[B, AB])?;
                let rss_no_b = model_rss(design, &y, &[A, AB])?;
                (drop(rss_no_a, rss_full), drop(rss_no_b, rss_full))
            }
        };
        let ss_ab = drop(rss_ab_less, rss_full);
        effects.push(("a", ss_a, df_a));
        effects.push(("b", ss_b, df_b));
        effects.push(("a*b", ss_ab, df_ab));
    } else {
        let rss_1 = model_rss(design, &y, &[])?;
        effects.push(("a", drop(rss_1, rss_full), df_a));
    }

    let effects = effects
        .into_iter()
        .map(|(label, ss, df)| {
            let mean_square = ss / df as f64;
            let f = if residual_ms > 0.0 {
                mean_square / residual_ms
            } else if mean_square > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            let p = if f.is_finite() {
                1.0 - dist::f_cdf(f, df as f64, residual_df as f64)?
            } else {
                0.0
            };
            Ok(EffectResult {
                label: label.to_string(),
                ss,
                df,
                mean_square,
                f,
                p,
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;

    Ok(AnovaResult {
        ss_type,
        effects,
        residual_ss: rss_full,
        residual_df,
        residual_ms,
        grand_mean,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::t_test;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn design_2x2(cells: [[&[f64]; 2]; 2]) -> FactorDesign {
        let mut obs = Vec::new();
        for (i, a) in ["a1", "a2"].iter().enumerate() {
            for (j, b) in ["b1", "b2"].iter().enumerate() {
                for &v in cells[i][j] {
                    obs.push((v, a.to_string(), Some(b.to_string())));
                }
            }
        }
        FactorDesign::new(obs).unwrap()
    }

    /// Balanced 2x2 whose decomposition is known in closed form.
    #[test]
    fn balanced_two_by_two_oracle() {
        let design = design_2x2([[&[1.0, 2.0], &[3.0, 4.0]], [&[5.0, 6.0], &[7.0, 8.0]]]);
        let result = anova_two_way(&design, SsType::TypeII).unwrap();
        assert_relative_eq!(result.grand_mean, 4.5, max_relative = 1e-12);
        assert_relative_eq!(result.effects[0].ss, 32.0, max_relative = 1e-9);
        assert_relative_eq!(result.effects[1].ss, 8.0, max_relative = 1e-9);
        assert!(result.effects[2].ss.abs() < 1e-9);
        assert_relative_eq!(result.residual_ss, 2.0, max_relative = 1e-9);
        assert_eq!(result.residual_df, 4);
        assert_relative_eq!(result.residual_ms, 0.5, max_relative = 1e-9);
        assert_relative_eq!(result.effects[0].f, 64.0, max_relative = 1e-9);
        assert_relative_eq!(result.effects[1].f, 16.0, max_relative = 1e-9);
        assert!(result.effects[2].f.abs() < 1e-9);
        assert_eq!(result.effects[0].df, 1);
        assert_eq!(result.residual_df, 4);
    }

    /// On balanced designs the cell-mean decomposition gives the sums of
    /// squares directly; the least-squares route must agree, and all three
    /// SS types must coincide.
    fn balanced_oracle_check(design: &FactorDesign, per_cell: usize) {
        let result_ii = anova_two_way(design, SsType::TypeII).unwrap();
        let result_i = anova_two_way(design, SsType::TypeI).unwrap();
        let result_iii = anova_two_way(design, SsType::TypeIII).unwrap();
        for (e1, e2) in result_ii.effects.iter().zip(&result_i.effects) {
            assert_relative_eq!(e1.ss, e2.ss, max_relative = 1e-9, epsilon = 1e-9);
        }
        for (e1, e2) in result_ii.effects.iter().zip(&result_iii.effects) {
            assert_relative_eq!(e1.ss, e2.ss, max_relative = 1e-9, epsilon = 1e-9);
        }

        // Cell-mean oracle.
        let obs = design.observations();
        let grand: f64 = obs.iter().map(|o| o.value).sum::<f64>() / obs.len() as f64;
        let mut mean_a: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        let mut mean_b: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        let mut mean_cell: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
        for o in obs {
            let ea = mean_a.entry(o.a.as_str()).or_default();
            ea.0 += o.value;
            ea.1 += 1;
            let eb = mean_b.entry(o.b.as_deref().unwrap()).or_default();
            eb.0 += o.value;
            eb.1 += 1;
            let ec = mean_cell
                .entry((o.a.as_str(), o.b.as_deref().unwrap()))
                .or_default();
            ec.0 += o.value;
            ec.1 += 1;
        }
        let ss_a: f64 = mean_a
            .values()
            .map(|(s, n)| *n as f64 * (s / *n as f64 - grand).powi(2))
            .sum();
        let ss_b: f64 = mean_b
            .values()
            .map(|(s, n)| *n as f64 * (s / *n as f64 - grand).powi(2))
            .sum();
        let ss_ab: f64 = mean_cell
            .iter()
            .map(|(&(a, b), (s, n))| {
                let cell = s / *n as f64;
                let ma = mean_a[a].0 / mean_a[a].1 as f64;
                let mb = mean_b[b].0 / mean_b[b].1 as f64;
                *n as f64 * (cell - ma - mb + grand).powi(2)
            })
            .sum();
        let ss_err: f64 = obs
            .iter()
            .map(|o| {
                let key = (o.a.as_str(), o.b.as_deref().unwrap());
                let (s, n) = mean_cell[&key];
                (o.value - s / n as f64).powi(2)
            })
            .sum();
        assert_relative_eq!(
            result_ii.effects[0].ss,
            ss_a,
            max_relative = 1e-9,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            result_ii.effects[1].ss,
            ss_b,
            max_relative = 1e-9,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            result_ii.effects[2].ss,
            ss_ab,
            max_relative = 1e-9,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            result_ii.residual_ss,
            ss_err,
            max_relative = 1e-9,
            epsilon = 1e-9
        );
        assert!(per_cell >= 2);
    }

    #[test]
    fn balanced_random_designs_match_cell_mean_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let la = rng.random_range(2..4usize);
            let lb = rng.random_range(2..4usize);
            let per_cell = rng.random_range(2..5usize);
            let mut obs = Vec::new();
            for i in 0..la {
                for j in 0..lb {
                    for _ in 0..per_cell {
                        obs.push((
                            rng.random_range(-10.0..10.0),
                            format!("a{i}"),
                            Some(format!("b{j}")),
                        ));
                    }
                }
            }
            let design = FactorDesign::new(obs).unwrap();
            balanced_oracle_check(&design, per_cell);
        }
    }

    /// One-way two-level ANOVA is the square of the pooled t test.
    #[test]
    fn one_way_f_equals_t_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n1 = rng.random_range(2..8usize);
            let n2 = rng.random_range(2..8usize);
            let g1: Vec<f64> = (0..n1).map(|_| rng.random_range(-5.0..5.0)).collect();
            let g2: Vec<f64> = (0..n2).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut obs: Vec<(f64, String, Option<String>)> =
                g1.iter().map(|&v| (v, "g1".to_string(), None)).collect();
            obs.extend(g2.iter().map(|&v| (v, "g2".to_string(), None)));
            let design = FactorDesign::new(obs).unwrap();
            let anova = anova_two_way(&design, SsType::TypeII).unwrap();
            let t = t_test(&g1, &g2).unwrap();
            if t.t.is_finite() {
                assert_relative_eq!(
                    anova.effects[0].f,
                    t.t * t.t,
                    max_relative = 1e-9,
                    epsilon = 1e-9
                );
                assert_relative_eq!(anova.effects[0].p, t.p, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    /// Unbalanced but full design: Type II SS for each main effect is the RSS
    /// drop against the other main effect alone.
    #[test]
    fn unbalanced_types_differ() {
        let design = design_2x2([
            [&[1.0, 2.0, 3.0, 9.0], &[3.0, 4.0]],
            [&[5.0, 6.0], &[7.0, 8.0, 2.0]],
        ]);
        let t1 = anova_two_way(&design, SsType::TypeI).unwrap();
        let t2 = anova_two_way(&design, SsType::TypeII).unwrap();
        let t3 = anova_two_way(&design, SsType::TypeIII).unwrap();
        // Residual line is type-independent.
        assert_relative_eq!(t1.residual_ss, t2.residual_ss, max_relative = 1e-12);
        assert_relative_eq!(t2.residual_ss, t3.residual_ss, max_relative = 1e-12);
        // Factor B enters last in the sequential order, so its Type I and
        // Type II sums coincide while factor A's differ.
        assert_relative_eq!(t1.effects[1].ss, t2.effects[1].ss, max_relative = 1e-9);
        assert!((t1.effects[0].ss - t2.effects[0].ss).abs() > 1e-6);
    }

    #[test]
    fn empty_cell_is_rejected() {
        let design = design_2x2([[&[1.0, 2.0], &[3.0, 4.0]], [&[5.0, 6.0], &[]]]);
        let err = anova_two_way(&design, SsType::TypeII).unwrap_err();
        match err {
            StatsError::EmptyCell { a, b } => {
                assert_eq!(a, "a2");
                assert_eq!(b.as_deref(), Some("b2"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn saturated_design_has_no_residual_df() {
        let design = design_2x2([[&[1.0], &[2.0]], [&[3.0], &[4.0]]]);
        assert!(matches!(
            anova_two_way(&design, SsType::TypeII),
            Err(StatsError::ZeroResidualDf)
        ));
    }

    #[test]
    fn single_level_factor_is_rejected() {
        let obs = vec![
            (1.0, "a1".to_string(), Some("b1".to_string())),
            (2.0, "a1".to_string(), Some("b2".to_string())),
            (3.0, "a1".to_string(), Some("b1".to_string())),
            (4.0, "a1".to_string(), Some("b2".to_string())),
        ];
        let design = FactorDesign::new(obs).unwrap();
        assert!(matches!(
            anova_two_way(&design, SsType::TypeII),
            Err(StatsError::FactorLevels { factor: "a", .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Type I sums of squares are additive: they tile the total sum of
        /// squares exactly, balanced or not.
        #[test]
        fn type_i_ss_additivity(
            seed in 0u64..1000,
            la in 2usize..4,
            lb in 2usize..3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut obs = Vec::new();
            for i in 0..la {
                for j in 0..lb {
                    for _ in 0..rng.random_range(2..5usize) {
                        obs.push((
                            rng.random_range(-3.0..3.0),
                            format!("a{i}"),
                            Some(format!("b{j}")),
                        ));
                    }
                }
            }
            let design = FactorDesign::new(obs).unwrap();
            let result = anova_two_way(&design, SsType::TypeI).unwrap();
            let values: Vec<f64> = design.observations().iter().map(|o| o.value).collect();
            let grand: f64 = values.iter().sum::<f64>() / values.len() as f64;
            let ss_total: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
            let tiled: f64 = result.effects.iter().map(|e| e.ss).sum::<f64>() + result.residual_ss;
            prop_assert!((ss_total - tiled).abs() <= 1e-9 * ss_total.max(1.0));
        }
    }
}
