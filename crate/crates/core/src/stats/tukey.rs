//! All-pairwise group comparisons with studentized-range adjustment.
//!
//! Unequal group sizes use the Kramer standard error
//! `sqrt(MSE/2 * (1/n_i + 1/n_j))`, so the statistic reduces to the classic
//! equal-n form when sizes match. Adjusted p-values come from the
//! studentized range distribution with the residual degrees of freedom of
//! the ANOVA the mean square error was taken from.

use std::collections::BTreeMap;

use super::{dist, FactorDesign, StatsError};

/// The quantile bisection re-integrates the distribution dozens of times, and
/// report generation asks for the same critical value once per feature, so
/// memoize per (probability, group count, df).
fn cached_quantile(p: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    thread_local! {
        static CACHE: std::cell::RefCell<BTreeMap<(u64, usize, u64), f64>> =
            const { std::cell::RefCell::new(BTreeMap::new()) };
    }
    let key = (p.to_bits(), k, df.to_bits());
    if let Some(q) = CACHE.with(|c| c.borrow().get(&key).copied()) {
        return Ok(q);
    }
    let q = dist::srange_quantile(p, k, df)?;
    CACHE.with(|c| c.borrow_mut().insert(key, q));
    Ok(q)
}

/// Which grouping of the design to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TukeyScope {
    /// Levels of the first factor.
    FactorA,
    /// Levels of the second factor.
    FactorB,
    /// Every cell of the cross product, labeled "a/b".
    Cells,
}

/// One pairwise comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TukeyPair {
    pub group_i: String,
    pub group_j: String,
    pub mean_i: f64,
    pub mean_j: f64,
    pub diff: f64,
    pub se: f64,
    pub q: f64,
    pub p: f64,
    pub significant: bool,
}

/// The full comparison table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TukeyResult {
    pub alpha: f64,
    pub group_count: usize,
    pub residual_df: usize,
    pub mse: f64,
    pub critical_q: f64,
    pub pairs: Vec<TukeyPair>,
}

/// Group observations by the requested scope, in deterministic label order.
fn collect_groups(design: &FactorDesign, scope: TukeyScope) -> Vec<(String, Vec<f64>)> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for obs in design.observations() {
        let key = match scope {
            TukeyScope::FactorA => obs.a.clone(),
            TukeyScope::FactorB => obs.b.clone().unwrap_or_default(),
            TukeyScope::Cells => match &obs.b {
                Some(b) => format!("{}/{}", obs.a, b),
                None => obs.a.clone(),
            },
        };
        groups.entry(key).or_default().push(obs.value);
    }
    groups.into_iter().collect()
}

/// Tukey–Kramer comparisons over the groups selected by `scope`, using the
/// residual mean square and degrees of freedom of an already-fitted ANOVA.
pub fn tukey_hsd(
    design: &FactorDesign,
    scope: TukeyScope,
    mse: f64,
    residual_df: usize,
    alpha: f64,
) -> Result<TukeyResult, StatsError> {
    if scope == TukeyScope::FactorB && design.levels_b().is_none() {
        return Err(StatsError::FactorLevels {
            factor: "b",
            found: 0,
        });
    }
    if mse <= 0.0 || mse.is_nan() {
        return Err(StatsError::InvalidParameter {
            what: format!("Tukey comparisons need a positive mean square error, got {mse}"),
        });
    }
    if residual_df < 1 {
        return Err(StatsError::ZeroResidualDf);
    }
    let groups = collect_groups(design, scope);
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::FactorLevels {
            factor: "comparison groups",
            found: k,
        });
    }
    let summaries: Vec<(String, f64, usize)> = groups
        .into_iter()
        .map(|(label, values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            (label, mean, n)
        })
        .collect();

    let critical_q = cached_quantile(1.0 - alpha, k, residual_df as f64)?;
    let mut pairs = Vec::new();
    for i in 0..summaries.len() {
        for j in i + 1..summaries.len() {
            let (label_i, mean_i, n_i) = &summaries[i];
            let (label_j, mean_j, n_j) = &summaries[j];
            let se = (mse / 2.0 * (1.0 / *n_i as f64 + 1.0 / *n_j as f64)).sqrt();
            let diff = mean_i - mean_j;
            let q = diff.abs() / se;
            let p = 1.0 - dist::srange_cdf(q, k, residual_df as f64)?;
            pairs.push(TukeyPair {
                group_i: label_i.clone(),
                group_j: label_j.clone(),
                mean_i: *mean_i,
                mean_j: *mean_j,
                diff,
                se,
                q,
                p,
                significant: p < alpha,
            });
        }
    }
    Ok(TukeyResult {
        alpha,
        group_count: k,
        residual_df,
        mse,
        critical_q,
        pairs,
    })
}
