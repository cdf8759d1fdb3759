// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change point refinement by two-segment group Lasso.
//!
//! Given preliminary points `eta~_1 < ... < eta~_K` and the conventions
//! `eta~_0 = 1`, `eta~_{K+1} = n + 1`, point `k` is searched for in the window
//!
//! ```text
//! s_k = floor((2 eta~_{k-1} + eta~_k) / 3),  e_k = floor((2 eta~_k + eta~_{k+1}) / 3)
//! ```
//!
//! over every split `eta` in `[s_k + L, e_k - L]`. The refined point minimizes
//! the group Lasso objective; among equal objectives the split closest to
//! `eta~_k` wins, then the smaller one. Since `s_{k+1} = e_k`, windows never
//! overlap and are refined independently.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lasso::group::{fit_window, TwoSegmentWindow};
use crate::lasso::{GramCache, SolverConfig};
use crate::model::{ChangePointSet, TimeSeries};

/// Objectives closer than this (relative) count as tied.
pub const TIE_TOLERANCE: f64 = 1e-11;

/// Number of best candidates re-solved from a cold start.
const RESOLVE_TOP: usize = 3;

/// Prefix Gram statistics are used when they fit in this many bytes.
const GRAM_CACHE_LIMIT: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Start each candidate's fit from the previous candidate's solution.
    pub warm_start: bool,
    /// Evaluate every `stride`-th split first, then all splits within
    /// `stride` of the best one.
    pub coarse_stride: Option<usize>,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            warm_start: true,
            coarse_stride: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub eta: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub initial: usize,
    /// Window `[start, end]`, 1-based and closed.
    pub start: usize,
    pub end: usize,
    /// Objective at every evaluated split, in increasing `eta`.
    pub curve: Vec<CurvePoint>,
    pub refined: usize,
    /// Set when the point was passed through unrefined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub nonconverged_fits: usize,
    /// Distance to the nearest true change point, when truth is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_error: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_error: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineReport {
    pub points: ChangePointSet,
    pub windows: Vec<WindowReport>,
}

/// Refined change points, one per preliminary point.
pub fn refine(
    series: &TimeSeries,
    initial: &ChangePointSet,
    lag: usize,
    zeta: f64,
    solver: &SolverConfig,
) -> Result<ChangePointSet> {
    Ok(refine_report(series, initial, None, lag, zeta, solver)?.points)
}

pub fn refine_report(
    series: &TimeSeries,
    initial: &ChangePointSet,
    truth: Option<&ChangePointSet>,
    lag: usize,
    zeta: f64,
    solver: &SolverConfig,
) -> Result<RefineReport> {
    refine_with_options(series, initial, truth, lag, zeta, solver, &RefineOptions::default())
}

/// Window `[s_k, e_k]` of every preliminary point.
pub fn windows(initial: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut ext = Vec::with_capacity(initial.len() + 2);
    ext.push(1);
    ext.extend_from_slice(initial);
    ext.push(n + 1);
    ext.windows(3)
        .map(|w| ((2 * w[0] + w[1]) / 3, (2 * w[1] + w[2]) / 3))
        .collect()
}

fn nearest_distance(x: usize, truth: &ChangePointSet) -> Option<usize> {
    truth.as_slice().iter().map(|&t| t.abs_diff(x)).min()
}

#[allow(clippy::too_many_arguments)]
pub fn refine_with_options(
    series: &TimeSeries,
    initial: &ChangePointSet,
    truth: Option<&ChangePointSet>,
    lag: usize,
    zeta: f64,
    solver: &SolverConfig,
    options: &RefineOptions,
) -> Result<RefineReport> {
    let n = series.n();
    if lag == 0 {
        return Err(Error::invalid("lag must be at least 1"));
    }
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(Error::invalid(format!("zeta must be >= 0, got {zeta}")));
    }
    if options.coarse_stride == Some(0) {
        return Err(Error::invalid("coarse stride must be at least 1"));
    }
    if let Some(&bad) = initial.as_slice().iter().find(|&&x| x < 2 || x > n) {
        return Err(Error::invalid(format!(
            "initial change point {bad} outside (1, {n}]"
        )));
    }
    let spans = windows(initial.as_slice(), n);
    assert!(
        spans.windows(2).all(|w| w[1].0 >= w[0].1),
        "refinement windows overlap"
    );
    let cache = GramCache::with_memory_limit(series, lag, GRAM_CACHE_LIMIT);
    let reports = initial
        .as_slice()
        .par_iter()
        .zip(spans.par_iter())
        .map(|(&eta0, &(s, e))| {
            refine_window(series, cache.as_ref(), eta0, s, e, lag, zeta, solver, options)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut windows = reports;
    if let Some(t) = truth {
        for w in &mut windows {
            w.initial_error = nearest_distance(w.initial, t);
            w.refined_error = nearest_distance(w.refined, t);
        }
    }
    let points = ChangePointSet::new(windows.iter().map(|w| w.refined).collect())?;
    Ok(RefineReport { points, windows })
}

/// Index of the best point under the objective-then-closeness rule.
fn select(curve: &[CurvePoint], target: usize) -> usize {
    let min = curve
        .iter()
        .map(|c| c.objective)
        .fold(f64::INFINITY, f64::min);
    let cut = min + TIE_TOLERANCE * (1.0 + min.abs());
    curve
        .iter()
        .enumerate()
        .filter(|(_, c)| c.objective <= cut)
        .min_by_key(|(_, c)| (c.eta.abs_diff(target), c.eta))
        .map(|(i, _)| i)
        .expect("non-empty curve")
}

struct Evaluator<'a> {
    series: &'a TimeSeries,
    cache: Option<&'a GramCache>,
    s: usize,
    e: usize,
    lag: usize,
    zeta: f64,
}

impl Evaluator<'_> {
    fn window(&self, eta: usize) -> Result<TwoSegmentWindow> {
        TwoSegmentWindow::new(self.series, self.s, self.e, eta, self.lag, self.cache)
    }

    /// Objectives along `etas` in order, optionally warm-started.
    fn sweep(
        &self,
        etas: &[usize],
        solver: &SolverConfig,
        warm_start: bool,
        nonconverged: &mut usize,
    ) -> Result<Vec<CurvePoint>> {
        let mut warm = None;
        let mut out = Vec::with_capacity(etas.len());
        for &eta in etas {
            let w = self.window(eta)?;
            let init = warm.as_ref().map(|(a, b)| (a, b));
            let fit = fit_window(&w, self.zeta, solver, init)?;
            if !fit.converged {
                *nonconverged += 1;
            }
            out.push(CurvePoint {
                eta,
                objective: fit.objective,
            });
            if warm_start {
                warm = Some((fit.first, fit.second));
            }
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn refine_window(
    series: &TimeSeries,
    cache: Option<&GramCache>,
    eta0: usize,
    s: usize,
    e: usize,
    lag: usize,
    zeta: f64,
    solver: &SolverConfig,
    options: &RefineOptions,
) -> Result<WindowReport> {
    let mut report = WindowReport {
        initial: eta0,
        start: s,
        end: e,
        curve: Vec::new(),
        refined: eta0,
        warning: None,
        nonconverged_fits: 0,
        initial_error: None,
        refined_error: None,
    };
    if e < s + 2 * lag + 1 {
        report.warning = Some(format!(
            "window [{s}, {e}] is shorter than {} points; point {eta0} kept",
            2 * lag + 2
        ));
        return Ok(report);
    }
    let ev = Evaluator {
        series,
        cache,
        s,
        e,
        lag,
        zeta,
    };
    let (lo, hi) = (s + lag, e - lag);
    let mut nonconverged = 0;
    let mut curve = match options.coarse_stride {
        Some(stride) if stride > 1 && hi - lo + 1 > 2 * stride => {
            let mut coarse: Vec<usize> = (lo..=hi).step_by(stride).collect();
            if *coarse.last().unwrap() != hi {
                coarse.push(hi);
            }
            let first = ev.sweep(&coarse, solver, options.warm_start, &mut nonconverged)?;
            let best = first[select(&first, eta0)].eta;
            let fine: Vec<usize> = (best.saturating_sub(stride).max(lo)..=(best + stride).min(hi))
                .filter(|x| coarse.binary_search(x).is_err())
                .collect();
            let mut all = first;
            all.extend(ev.sweep(&fine, solver, options.warm_start, &mut nonconverged)?);
            all.sort_by_key(|c| c.eta);
            all
        }
        _ => {
            let etas: Vec<usize> = (lo..=hi).collect();
            ev.sweep(&etas, solver, options.warm_start, &mut nonconverged)?
        }
    };

    // re-solve the leading candidates cold at a tighter tolerance
    let tight = SolverConfig {
        tol: solver.tol * 1e-3,
        max_iter: solver.max_iter.saturating_mul(10),
    };
    let mut order: Vec<usize> = (0..curve.len()).collect();
    order.sort_by(|&a, &b| {
        curve[a]
            .objective
            .total_cmp(&curve[b].objective)
            .then(curve[a].eta.abs_diff(eta0).cmp(&curve[b].eta.abs_diff(eta0)))
            .then(curve[a].eta.cmp(&curve[b].eta))
    });
    for &idx in order.iter().take(RESOLVE_TOP) {
        let mut nc = 0;
        let exact = ev.sweep(&[curve[idx].eta], &tight, false, &mut nc)?;
        curve[idx].objective = exact[0].objective;
    }

    report.refined = curve[select(&curve, eta0)].eta;
    report.curve = curve;
    report.nonconverged_fits = nonconverged;
    Ok(report)
}
