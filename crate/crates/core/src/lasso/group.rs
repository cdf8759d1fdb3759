// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two-segment group Lasso used to refine a single change point.
//!
//! A window is the closed range of time points `[s, e]` (1-based). A candidate
//! change point `eta` splits it into a first segment fitted on responses
//! `t in [s + L, eta - 1]` and a second segment fitted on responses
//! `t in [eta + L - 1, e]`. For `L = 1` the two response ranges tile
//! `[s + 1, e]`. Every coefficient position `(i, j, l)` forms a group of two
//! entries, one per segment, penalized by
//!
//! ```text
//! zeta * sqrt((eta - s) * A[l]_ij^2 + (e - eta) * B[l]_ij^2)
//! ```
//!
//! After rescaling `u = sqrt(eta - s) A`, `v = sqrt(e - eta) B` the penalty is
//! an ordinary Euclidean group norm and each output row is solved by
//! accelerated proximal gradient with adaptive restart.

use nalgebra::DMatrix;

use super::gram::{GramCache, IntervalGram};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, TimeSeries};

/// Statistics for both segments of a candidate split.
#[derive(Debug, Clone)]
pub struct TwoSegmentWindow {
    pub first: IntervalGram,
    pub second: IntervalGram,
    pub first_weight: f64,
    pub second_weight: f64,
}

fn window_stats(
    series: &TimeSeries,
    cache: Option<&GramCache>,
    s0: usize,
    e0: usize,
    lag: usize,
) -> IntervalGram {
    match cache {
        Some(c) => c.window(s0, e0),
        None => {
            let mut g = IntervalGram::empty(series.p(), lag);
            for t in (s0 + lag)..e0 {
                g.add_summand(series, t);
            }
            g
        }
    }
}

impl TwoSegmentWindow {
    /// Window `[s, e]` split at `eta`; requires `1 <= s`, `e <= n` and
    /// `s + lag <= eta <= e - lag`.
    pub fn new(
        series: &TimeSeries,
        s: usize,
        e: usize,
        eta: usize,
        lag: usize,
        cache: Option<&GramCache>,
    ) -> Result<Self> {
        if lag == 0 {
            return Err(Error::invalid("lag must be at least 1"));
        }
        if s == 0 || e > series.n() || s + 2 * lag > e {
            return Err(Error::invalid(format!(
                "window [{s}, {e}] is invalid for n={} and lag {lag}",
                series.n()
            )));
        }
        if eta < s + lag || eta > e - lag {
            return Err(Error::invalid(format!(
                "split {eta} outside [{}, {}]",
                s + lag,
                e - lag
            )));
        }
        if let Some(c) = cache {
            if c.lag() != lag {
                return Err(Error::invalid("gram cache was built for a different lag"));
            }
        }
        // half-open 0-based positions: first = (s-1, eta-1], second = (eta-2, e]
        Ok(Self {
            first: window_stats(series, cache, s - 1, eta - 1, lag),
            second: window_stats(series, cache, eta - 2, e, lag),
            first_weight: (eta - s) as f64,
            second_weight: (e - eta) as f64,
        })
    }

    fn p(&self) -> usize {
        self.first.p()
    }

    fn dim(&self) -> usize {
        self.first.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLassoFit {
    pub first: CoefficientSet,
    pub second: CoefficientSet,
    /// Residual sums of squares of both segments plus the group penalty.
    pub objective: f64,
    pub rss: f64,
    /// Largest iteration count over rows.
    pub iterations: usize,
    pub converged: bool,
}

/// Fits the two-segment group Lasso on window `[s, e]` split at `eta`.
#[allow(clippy::too_many_arguments)]
pub fn fit_two_segment_group_lasso(
    series: &TimeSeries,
    s: usize,
    e: usize,
    eta: usize,
    lag: usize,
    zeta: f64,
    solver: &SolverConfig,
) -> Result<GroupLassoFit> {
    let window = TwoSegmentWindow::new(series, s, e, eta, lag, None)?;
    let fit = fit_window(&window, zeta, solver, None)?;
    Ok(GroupLassoFit {
        first: CoefficientSet::from_stacked(&fit.first, lag)?,
        second: CoefficientSet::from_stacked(&fit.second, lag)?,
        objective: fit.objective,
        rss: fit.rss,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

#[derive(Debug, Clone)]
pub(crate) struct StackedFit {
    pub first: DMatrix<f64>,
    pub second: DMatrix<f64>,
    pub objective: f64,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn largest_eigenvalue(g: &DMatrix<f64>) -> f64 {
    if g.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    g.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub(crate) fn fit_window(
    window: &TwoSegmentWindow,
    zeta: f64,
    solver: &SolverConfig,
    warm: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<StackedFit> {
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(Error::invalid(format!("zeta must be >= 0, got {zeta}")));
    }
    let (p, dim) = (window.p(), window.dim());
    let ra = 1.0 / window.first_weight.sqrt();
    let rb = 1.0 / window.second_weight.sqrt();
    let lip = (2.0 * largest_eigenvalue(&window.first.gram) * ra * ra)
        .max(2.0 * largest_eigenvalue(&window.second.gram) * rb * rb);

    let (mut first, mut second) = match warm {
        Some((a, b)) => (a.clone(), b.clone()),
        None => (DMatrix::zeros(p, dim), DMatrix::zeros(p, dim)),
    };
    let mut out = StackedFit {
        first: DMatrix::zeros(p, dim),
        second: DMatrix::zeros(p, dim),
        objective: 0.0,
        rss: 0.0,
        iterations: 0,
        converged: true,
    };
    let rows = RowProblem {
        ga: window.first.gram.as_slice(),
        gb: window.second.gram.as_slice(),
        dim,
        ra,
        rb,
        zeta,
        lip,
    };
    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    for i in 0..p {
        let ca: Vec<f64> = (0..dim).map(|j| window.first.cross[(i, j)]).collect();
        let cb: Vec<f64> = (0..dim).map(|j| window.second.cross[(i, j)]).collect();
        for j in 0..dim {
            u[j] = first[(i, j)] / ra;
            v[j] = second[(i, j)] / rb;
        }
        let (iters, converged) = if lip > 0.0 {
            rows.solve(&ca, &cb, &mut u, &mut v, solver)
        } else {
            u.fill(0.0);
            v.fill(0.0);
            (0, true)
        };
        for j in 0..dim {
            first[(i, j)] = u[j] * ra;
            second[(i, j)] = v[j] * rb;
        }
        let (rss, pen) = rows.objective_parts(
            &ca,
            &cb,
            window.first.response_sq_by_coord[i],
            window.second.response_sq_by_coord[i],
            &u,
            &v,
        );
        out.rss += rss;
        out.objective += rss + pen;
        out.iterations = out.iterations.max(iters);
        out.converged &= converged;
    }
    out.first = first;
    out.second = second;
    Ok(out)
}

struct RowProblem<'a> {
    ga: &'a [f64],
    gb: &'a [f64],
    dim: usize,
    ra: f64,
    rb: f64,
    zeta: f64,
    lip: f64,
}

impl RowProblem<'_> {
    fn matvec(g: &[f64], x: &[f64], out: &mut [f64]) {
        let dim = x.len();
        out.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (o, gij) in out.iter_mut().zip(&g[j * dim..(j + 1) * dim]) {
                    *o += gij * xj;
                }
            }
        }
    }

    /// Gradient of the smooth part with respect to the scaled variables.
    fn gradient(&self, ca: &[f64], cb: &[f64], u: &[f64], v: &[f64], gu: &mut [f64], gv: &mut [f64]) {
        let a: Vec<f64> = u.iter().map(|x| x * self.ra).collect();
        let b: Vec<f64> = v.iter().map(|x| x * self.rb).collect();
        Self::matvec(self.ga, &a, gu);
        Self::matvec(self.gb, &b, gv);
        for j in 0..self.dim {
            gu[j] = 2.0 * (gu[j] - ca[j]) * self.ra;
            gv[j] = 2.0 * (gv[j] - cb[j]) * self.rb;
        }
    }

    fn objective_parts(&self, ca: &[f64], cb: &[f64], yya: f64, yyb: f64, u: &[f64], v: &[f64]) -> (f64, f64) {
        let a: Vec<f64> = u.iter().map(|x| x * self.ra).collect();
        let b: Vec<f64> = v.iter().map(|x| x * self.rb).collect();
        let mut qa = vec![0.0; self.dim];
        let mut qb = vec![0.0; self.dim];
        Self::matvec(self.ga, &a, &mut qa);
        Self::matvec(self.gb, &b, &mut qb);
        let mut rss = yya + yyb;
        let mut pen = 0.0;
        for j in 0..self.dim {
            rss += a[j] * (qa[j] - 2.0 * ca[j]) + b[j] * (qb[j] - 2.0 * cb[j]);
            pen += u[j].hypot(v[j]);
        }
        (rss.max(0.0), self.zeta * pen)
    }

    fn solve(&self, ca: &[f64], cb: &[f64], u: &mut [f64], v: &mut [f64], solver: &SolverConfig) -> (usize, bool) {
        let dim = self.dim;
        let step = 1.0 / self.lip;
        let thresh = self.zeta * step;
        let (mut yu, mut yv) = (u.to_vec(), v.to_vec());
        let (mut gu, mut gv) = (vec![0.0; dim], vec![0.0; dim]);
        let (mut nu, mut nv) = (vec![0.0; dim], vec![0.0; dim]);
        let mut t = 1.0f64;
        for iter in 1..=solver.max_iter {
            self.gradient(ca, cb, &yu, &yv, &mut gu, &mut gv);
            for j in 0..dim {
                let zu = yu[j] - step * gu[j];
                let zv = yv[j] - step * gv[j];
                let norm = zu.hypot(zv);
                let scale = if norm > thresh { 1.0 - thresh / norm } else { 0.0 };
                nu[j] = scale * zu;
                nv[j] = scale * zv;
            }
            let mut change = 0.0f64;
            let mut restart_dot = 0.0;
            for j in 0..dim {
                let du = nu[j] - u[j];
                let dv = nv[j] - v[j];
                change = change.max((du * self.ra).abs()).max((dv * self.rb).abs());
                restart_dot += (yu[j] - nu[j]) * du + (yv[j] - nv[j]) * dv;
            }
            if restart_dot > 0.0 {
                t = 1.0;
                yu.copy_from_slice(&nu);
                yv.copy_from_slice(&nv);
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let mom = (t - 1.0) / t_next;
                for j in 0..dim {
                    yu[j] = nu[j] + mom * (nu[j] - u[j]);
                    yv[j] = nv[j] + mom * (nv[j] - v[j]);
                }
                t = t_next;
            }
            u.copy_from_slice(&nu);
            v.copy_from_slice(&nv);
            if change < solver.tol {
                return (iter, true);
            }
        }
        (solver.max_iter, false)
    }
}

/// Largest violation of the group optimality conditions, measured on the
/// scaled gradient `(dA / sqrt(eta - s), dB / sqrt(e - eta))` of the residual
/// sums of squares.
pub fn group_kkt_residual(
    window: &TwoSegmentWindow,
    first: &DMatrix<f64>,
    second: &DMatrix<f64>,
    zeta: f64,
) -> f64 {
    let sa = window.first_weight.sqrt();
    let sb = window.second_weight.sqrt();
    let fa = first * &window.first.gram;
    let fb = second * &window.second.gram;
    let mut worst = 0.0f64;
    for i in 0..first.nrows() {
        for j in 0..first.ncols() {
            let gu = -2.0 * (window.first.cross[(i, j)] - fa[(i, j)]) / sa;
            let gv = -2.0 * (window.second.cross[(i, j)] - fb[(i, j)]) / sb;
            let u = first[(i, j)] * sa;
            let v = second[(i, j)] * sb;
            let norm = u.hypot(v);
            let r = if norm > 0.0 {
                (gu + zeta * u / norm).hypot(gv + zeta * v / norm)
            } else {
                (gu.hypot(gv) - zeta).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}
