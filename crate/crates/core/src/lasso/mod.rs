// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse VAR estimation on an interval.
//!
//! For an interval with `count` summands the fitted coefficients minimize
//!
//! ```text
//! sum_t || X_t - sum_l A[l] X_{t-l} ||^2  +  lambda * sqrt(count) * sum_l ||A[l]||_1
//! ```
//!
//! The problem separates over output coordinates; each row is solved by
//! cyclic coordinate descent on the interval Gram matrix.

mod gram;
pub(crate) mod group;
mod loss;

pub use gram::{interval_gram, GramCache, IntervalGram};
pub use group::{fit_two_segment_group_lasso, group_kkt_residual, GroupLassoFit, TwoSegmentWindow};
pub use loss::{segment_loss, LossCache};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CoefficientSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the largest coefficient change in a sweep is below this.
    pub tol: f64,
    /// Maximum number of sweeps (coordinate descent) or iterations
    /// (proximal gradient).
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub coeffs: CoefficientSet,
    /// `rss + lambda * sqrt(count) * sum_l ||A[l]||_1`.
    pub objective: f64,
    pub rss: f64,
    /// Largest number of sweeps used by any row.
    pub iterations: usize,
    pub converged: bool,
}

impl LassoSolution {
    /// Largest violation of the Lasso optimality conditions at the solution.
    pub fn kkt_residual(&self, gram: &IntervalGram, lambda: f64) -> f64 {
        kkt_residual(gram, &self.coeffs.stacked(), lambda)
    }
}

/// Effective L1 weight `lambda * sqrt(count)`.
pub fn penalty_weight(lambda: f64, count: usize) -> f64 {
    lambda * (count as f64).sqrt()
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Outcome of one row problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowFit {
    pub sweeps: usize,
    pub converged: bool,
    pub rss: f64,
    pub objective: f64,
}

/// Coordinate descent for one output row.
///
/// Minimizes `yy - 2 a.c + a' G a + weight * ||a||_1` in place, starting from
/// the current `a`. `gram` is the column-major `dim x dim` Gram matrix.
/// When `trace` is given, the objective after every sweep is appended.
pub fn solve_row(
    gram: &[f64],
    cross_row: &[f64],
    yy: f64,
    weight: f64,
    a: &mut [f64],
    solver: &SolverConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> RowFit {
    let dim = a.len();
    debug_assert_eq!(gram.len(), dim * dim);
    let half = 0.5 * weight;
    // q = G a
    let mut q = vec![0.0; dim];
    for (j, &aj) in a.iter().enumerate() {
        if aj != 0.0 {
            for (qi, gij) in q.iter_mut().zip(&gram[j * dim..(j + 1) * dim]) {
                *qi += gij * aj;
            }
        }
    }
    let objective = |a: &[f64], q: &[f64]| -> (f64, f64) {
        let mut lin = 0.0;
        let mut quad = 0.0;
        let mut l1 = 0.0;
        for j in 0..dim {
            lin += a[j] * cross_row[j];
            quad += a[j] * q[j];
            l1 += a[j].abs();
        }
        let rss = yy - 2.0 * lin + quad;
        (rss, rss + weight * l1)
    };

    let mut prev = objective(a, &q).1;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < solver.max_iter {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..dim {
            let col = &gram[j * dim..(j + 1) * dim];
            let gjj = col[j];
            let new = if gjj > 0.0 {
                soft_threshold(cross_row[j] - q[j] + gjj * a[j], half) / gjj
            } else {
                0.0
            };
            let delta = new - a[j];
            if delta != 0.0 {
                for (qi, gij) in q.iter_mut().zip(col) {
                    *qi += gij * delta;
                }
                a[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let obj = objective(a, &q).1;
        debug_assert!(
            obj <= prev + 1e-9 * (1.0 + prev.abs()),
            "coordinate descent objective increased: {prev} -> {obj}"
        );
        prev = obj;
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj);
        }
        if max_change < solver.tol {
            converged = true;
            break;
        }
    }
    let (rss, objective) = objective(a, &q);
    RowFit {
        sweeps,
        converged,
        rss: rss.max(0.0),
        objective,
    }
}

/// Fits the interval Lasso from a cold (zero) start.
pub fn fit_lasso_var(
    gram: &IntervalGram,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<LassoSolution> {
    fit_lasso_var_warm(gram, lambda, solver, None)
}

/// Fits the interval Lasso, optionally starting from `init`.
pub fn fit_lasso_var_warm(
    gram: &IntervalGram,
    lambda: f64,
    solver: &SolverConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<LassoSolution> {
    let (stacked, fit) = fit_stacked(gram, lambda, solver, init)?;
    Ok(LassoSolution {
        coeffs: CoefficientSet::from_stacked(&stacked, gram.lag)?,
        objective: fit.objective,
        rss: fit.rss,
        iterations: fit.sweeps,
        converged: fit.converged,
    })
}

/// Core fit on the stacked `p x pL` representation. The returned `RowFit`
/// aggregates over rows (summed rss/objective, max sweeps, all converged).
pub(crate) fn fit_stacked(
    gram: &IntervalGram,
    lambda: f64,
    solver: &SolverConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, RowFit)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let (p, dim) = (gram.p(), gram.dim());
    let weight = penalty_weight(lambda, gram.count);
    let mut coef = match init {
        Some(m) if m.nrows() == p && m.ncols() == dim => m.clone(),
        Some(m) => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.ncols(),
            })
        }
        None => DMatrix::zeros(p, dim),
    };
    let mut total = RowFit {
        sweeps: 0,
        converged: true,
        rss: 0.0,
        objective: 0.0,
    };
    let mut row = vec![0.0; dim];
    let mut cross_row = vec![0.0; dim];
    for i in 0..p {
        for j in 0..dim {
            row[j] = coef[(i, j)];
            cross_row[j] = gram.cross[(i, j)];
        }
        let fit = solve_row(
            gram.gram.as_slice(),
            &cross_row,
            gram.response_sq_by_coord[i],
            weight,
            &mut row,
            solver,
            None,
        );
        for j in 0..dim {
            coef[(i, j)] = row[j];
        }
        total.sweeps = total.sweeps.max(fit.sweeps);
        total.converged &= fit.converged;
        total.rss += fit.rss;
        total.objective += fit.objective;
    }
    Ok((coef, total))
}

/// Largest KKT violation of a stacked `p x pL` coefficient matrix.
///
/// With `grad = -2 (c - G a)` per entry: nonzero entries need
/// `grad + w sign(a) = 0`, zero entries need `|grad| <= w`, where
/// `w = lambda * sqrt(count)`.
pub fn kkt_residual(gram: &IntervalGram, stacked: &DMatrix<f64>, lambda: f64) -> f64 {
    let weight = penalty_weight(lambda, gram.count);
    let fitted = stacked * &gram.gram;
    let mut worst = 0.0f64;
    for i in 0..stacked.nrows() {
        for j in 0..stacked.ncols() {
            let grad = -2.0 * (gram.cross[(i, j)] - fitted[(i, j)]);
            let a = stacked[(i, j)];
            let v = if a != 0.0 {
                (grad + weight * a.signum()).abs()
            } else {
                (grad.abs() - weight).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeSeries;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(n: usize, p: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSeries::new(n, p, (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Normal equations oracle: `A = C G^{-1}`.
    fn least_squares(g: &IntervalGram) -> DMatrix<f64> {
        let inv = g.gram.clone().try_inverse().expect("well-conditioned gram");
        &g.cross * inv
    }

    #[test]
    fn zero_penalty_matches_least_squares() {
        let s = random_series(80, 2, 5);
        let g = interval_gram(&s, 0, 80, 1).unwrap();
        let sol = fit_lasso_var(&g, 0.0, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        let ls = least_squares(&g);
        assert!((sol.coeffs.stacked() - ls).amax() < 1e-5);
    }

    #[test]
    fn large_penalty_kills_everything() {
        let s = random_series(60, 3, 6);
        let g = interval_gram(&s, 0, 60, 2).unwrap();
        let lambda = 2.0 * g.cross.amax() / (g.count as f64).sqrt();
        let sol = fit_lasso_var(&g, lambda, &SolverConfig::default()).unwrap();
        assert!(sol.coeffs.stacked().iter().all(|&v| v == 0.0));
        assert_eq!(sol.iterations, 1);
        assert!((sol.rss - g.response_sq()).abs() < 1e-12);
    }

    #[test]
    fn negative_lambda_rejected() {
        let s = random_series(20, 2, 7);
        let g = interval_gram(&s, 0, 20, 1).unwrap();
        assert!(fit_lasso_var(&g, -0.1, &SolverConfig::default()).is_err());
    }

    #[test]
    fn objective_identity_and_kkt() {
        let s = random_series(100, 4, 8);
        let g = interval_gram(&s, 0, 100, 2).unwrap();
        let lambda = 0.5;
        let sol = fit_lasso_var(&g, lambda, &SolverConfig::default()).unwrap();
        let l1: f64 = sol.coeffs.stacked().iter().map(|v| v.abs()).sum();
        let expected = sol.rss + penalty_weight(lambda, g.count) * l1;
        assert!((sol.objective - expected).abs() < 1e-9);
        assert!(sol.kkt_residual(&g, lambda) < 1e-4);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let s = random_series(40, 5, 9);
        let g = interval_gram(&s, 0, 40, 1).unwrap();
        let mut trace = Vec::new();
        let mut a = vec![0.0; 5];
        let cross: Vec<f64> = (0..5).map(|j| g.cross[(2, j)]).collect();
        solve_row(
            g.gram.as_slice(),
            &cross,
            g.response_sq_by_coord[2],
            0.3,
            &mut a,
            &SolverConfig::default(),
            Some(&mut trace),
        );
        assert!(!trace.is_empty());
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let s = random_series(90, 3, 10);
        let g = interval_gram(&s, 0, 90, 1).unwrap();
        let tight = SolverConfig {
            tol: 1e-12,
            max_iter: 100_000,
        };
        let cold = fit_lasso_var(&g, 0.2, &tight).unwrap();
        let init = DMatrix::from_element(3, 3, 0.7);
        let warm = fit_lasso_var_warm(&g, 0.2, &tight, Some(&init)).unwrap();
        assert!((cold.coeffs.stacked() - warm.coeffs.stacked()).amax() < 1e-8);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let s = random_series(30, 4, 11);
        let g = interval_gram(&s, 0, 30, 1).unwrap();
        let solver = SolverConfig {
            tol: 0.0,
            max_iter: 3,
        };
        let sol = fit_lasso_var(&g, 0.1, &solver).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
    }
}
