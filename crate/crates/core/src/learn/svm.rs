//! Sequential minimal optimization for the soft-margin kernel dual.
//!
//! Classic two-variable coordinate ascent: repeatedly pick a
//! KKT-violating multiplier, pair it with a second one, and solve the
//! two-point subproblem analytically. Pair selection follows the usual
//! heuristic ladder (largest error gap among unbounded multipliers, then
//! unbounded sweep, then full sweep), with the sweep start positions drawn
//! from a seeded generator so training is reproducible bit for bit.
//!
//! The full kernel matrix is cached when the problem is small enough;
//! beyond that, rows are recomputed on demand, trading time for memory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Kernel;

/// One training point in model space: standardized dense block plus
/// normalized sparse block, with the label mapped to ±1.
pub(super) struct TrainPoint {
    pub dense: Vec<f64>,
    pub sparse: Vec<(u32, f64)>,
    pub y: f64,
}

/// Dot product of two id-sorted sparse vectors.
pub(super) fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

fn raw_dot(a: &TrainPoint, b: &TrainPoint) -> f64 {
    let dense: f64 = a.dense.iter().zip(&b.dense).map(|(x, z)| x * z).sum();
    dense + sparse_dot(&a.sparse, &b.sparse)
}

pub(super) struct Solution {
    pub alphas: Vec<f64>,
    pub bias: f64,
}

/// Cache the full kernel matrix up to this many points (at the limit,
/// 32 MiB of f64).
const FULL_CACHE_LIMIT: usize = 2048;

struct Solver<'a> {
    points: &'a [TrainPoint],
    kernel: Kernel,
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    bias: f64,
    /// errors[i] = decision(x_i) - y_i under the current multipliers.
    errors: Vec<f64>,
    cache: Option<Vec<f64>>,
    rng: ChaCha8Rng,
    steps: usize,
    max_steps: usize,
}

impl<'a> Solver<'a> {
    fn new(
        points: &'a [TrainPoint],
        kernel: Kernel,
        c: f64,
        tol: f64,
        seed: u64,
        max_steps: usize,
    ) -> Self {
        let n = points.len();
        let cache = (n <= FULL_CACHE_LIMIT).then(|| {
            let mut matrix = vec![0.0f64; n * n];
            for i in 0..n {
                for j in i..n {
                    let value = kernel.value(raw_dot(&points[i], &points[j]));
                    matrix[i * n + j] = value;
                    matrix[j * n + i] = value;
                }
            }
            matrix
        });
        Solver {
            points,
            kernel,
            c,
            tol,
            alphas: vec![0.0; n],
            bias: 0.0,
            errors: points.iter().map(|p| -p.y).collect(),
            cache,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            max_steps,
        }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        match &self.cache {
            Some(matrix) => matrix[i * self.points.len() + j],
            None => self.kernel.value(raw_dot(&self.points[i], &self.points[j])),
        }
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let n = self.points.len();
        match &self.cache {
            Some(matrix) => matrix[i * n..(i + 1) * n].to_vec(),
            None => (0..n).map(|j| self.k(i, j)).collect(),
        }
    }

    fn unbounded(&self, alpha: f64) -> bool {
        alpha > 0.0 && alpha < self.c
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (alph1, alph2) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.points[i1].y, self.points[i2].y);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let (low, high) = if (y1 - y2).abs() > f64::EPSILON {
            (
                (alph2 - alph1).max(0.0),
                (self.c + alph2 - alph1).min(self.c),
            )
        } else {
            (
                (alph1 + alph2 - self.c).max(0.0),
                (alph1 + alph2).min(self.c),
            )
        };
        if high - low < 1e-12 {
            return false;
        }
        let k11 = self.k(i1, i1);
        let k12 = self.k(i1, i2);
        let k22 = self.k(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > 0.0 {
            (alph2 + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // Flat or concave direction: evaluate the subproblem objective at
            // both segment ends and move to the better one.
            let f1 = y1 * (e1 - self.bias) - alph1 * k11 - s * alph2 * k12;
            let f2 = y2 * (e2 - self.bias) - s * alph1 * k12 - alph2 * k22;
            let l1 = alph1 + s * (alph2 - low);
            let h1 = alph1 + s * (alph2 - high);
            let lobj = l1 * f1
                + low * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * low * low * k22
                + s * low * l1 * k12;
            let hobj = h1 * f1
                + high * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * high * high * k22
                + s * high * h1 * k12;
            if lobj < hobj - 1e-12 {
                low
            } else if hobj < lobj - 1e-12 {
                high
            } else {
                return false;
            }
        };
        // Snap to the box edges so bound status is exact.
        if a2 < 1e-8 * self.c {
            a2 = 0.0;
        } else if a2 > self.c * (1.0 - 1e-8) {
            a2 = self.c;
        }
        if (a2 - alph2).abs() < 1e-12 * (a2 + alph2 + 1e-12) {
            return false;
        }
        let a1 = (alph1 + s * (alph2 - a2)).clamp(0.0, self.c);

        let d1 = y1 * (a1 - alph1);
        let d2 = y2 * (a2 - alph2);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        let row1 = self.row(i1);
        let row2 = self.row(i2);
        let shift = new_bias - self.bias;
        for (k, error) in self.errors.iter_mut().enumerate() {
            *error += d1 * row1[k] + d2 * row2[k] + shift;
        }
        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        self.bias = new_bias;
        self.steps += 1;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let alph2 = self.alphas[i2];
        let r2 = self.errors[i2] * self.points[i2].y;
        let violates = (r2 < -self.tol && alph2 < self.c) || (r2 > self.tol && alph2 > 0.0);
        if !violates {
            return false;
        }
        let n = self.points.len();
        let unbounded: Vec<usize> = (0..n)
            .filter(|&i| i != i2 && self.unbounded(self.alphas[i]))
            .collect();

        // Best-gap heuristic first: the partner with the largest error gap
        // makes the biggest analytic step.
        if let Some(&i1) = unbounded.iter().max_by(|&&a, &&b| {
            let ga = (self.errors[a] - self.errors[i2]).abs();
            let gb = (self.errors[b] - self.errors[i2]).abs();
            ga.total_cmp(&gb).then(b.cmp(&a))
        }) {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // Sweep the unbounded set from a seeded start.
        if !unbounded.is_empty() {
            let start = self.rng.random_range(0..unbounded.len());
            for offset in 0..unbounded.len() {
                let i1 = unbounded[(start + offset) % unbounded.len()];
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        // Full sweep, also from a seeded start.
        let start = self.rng.random_range(0..n);
        for offset in 0..n {
            let i1 = (start + offset) % n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn run(&mut self) {
        let n = self.points.len();
        let mut examine_all = true;
        let mut epochs = 0usize;
        loop {
            if self.steps >= self.max_steps || epochs >= 100_000 {
                break;
            }
            let mut changed = 0usize;
            if examine_all {
                for i in 0..n {
                    if self.examine(i) {
                        changed += 1;
                    }
                }
            } else {
                for i in 0..n {
                    if self.unbounded(self.alphas[i]) && self.examine(i) {
                        changed += 1;
                    }
                }
            }
            epochs += 1;
            if examine_all {
                if changed == 0 {
                    break;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
    }
}

/// Solve the dual to the configured tolerance.
pub(super) fn solve(
    points: &[TrainPoint],
    kernel: Kernel,
    c: f64,
    tolerance: f64,
    seed: u64,
    max_steps: usize,
) -> Solution {
    let mut solver = Solver::new(points, kernel, c, tolerance, seed, max_steps);
    solver.run();
    Solution {
        alphas: std::mem::take(&mut solver.alphas),
        bias: solver.bias,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(dense: &[f64], y: f64) -> TrainPoint {
        TrainPoint {
            dense: dense.to_vec(),
            sparse: vec![],
            y,
        }
    }

    #[test]
    fn sparse_dot_merges_by_id() {
        let a = vec![(1u32, 2.0), (4, 3.0), (9, 1.0)];
        let b = vec![(2u32, 5.0), (4, 2.0), (9, 4.0)];
        assert_eq!(sparse_dot(&a, &b), 3.0 * 2.0 + 1.0 * 4.0);
        assert_eq!(sparse_dot(&a, &[]), 0.0);
    }

    #[test]
    fn two_point_problem_converges_feasibly() {
        let points = vec![point(&[1.0], 1.0), point(&[-1.0], -1.0)];
        let solution = solve(&points, Kernel::Linear, 1.0, 1e-3, 42, 100_000);
        let sum: f64 = solution
            .alphas
            .iter()
            .zip(&points)
            .map(|(a, p)| a * p.y)
            .sum();
        assert!(sum.abs() < 1e-9);
        for &a in &solution.alphas {
            assert!((0.0..=1.0).contains(&a));
        }
        // decision(x) = sum alpha_i y_i K(x_i, x) + b classifies both points.
        for p in &points {
            let decision: f64 = points
                .iter()
                .zip(&solution.alphas)
                .map(|(q, &a)| a * q.y * raw_dot(q, p))
                .sum::<f64>()
                + solution.bias;
            assert!(decision * p.y > 0.0, "decision {decision} vs label {}", p.y);
        }
    }
}
