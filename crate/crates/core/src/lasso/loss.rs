// SPDX-License-Identifier: MIT OR Apache-2.0

//! Interval losses and their memoization.
//!
//! The loss of `(s, e]` is the residual sum of squares of the Lasso fit on
//! that interval, or zero when the interval has fewer than `min_len`
//! summands. Losses for a fixed start `s` are computed as one chain over
//! increasing ends: the Gram statistics grow by one summand at a time and each
//! fit is warm-started from the previous end's solution. A loss is therefore a
//! deterministic function of `(s, e)` and the cache parameters, independent of
//! evaluation order or thread count.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::gram::IntervalGram;
use super::{fit_stacked, SolverConfig};
use crate::error::{Error, Result};
use crate::model::TimeSeries;

#[derive(Debug)]
struct Chain {
    // losses[k] is the loss of (grid[start], grid[start + 1 + k]]
    losses: Vec<f64>,
    nonconverged: usize,
}

/// Memoized interval losses over a grid of candidate boundaries.
///
/// The grid holds every multiple of `step` in `[0, n)` plus `n`. Chains are
/// filled lazily and may be filled concurrently.
#[derive(Debug)]
pub struct LossCache<'a> {
    series: &'a TimeSeries,
    lag: usize,
    lambda: f64,
    min_len: usize,
    solver: SolverConfig,
    grid: Vec<usize>,
    chains: Vec<OnceLock<Chain>>,
}

impl<'a> LossCache<'a> {
    pub fn new(
        series: &'a TimeSeries,
        lag: usize,
        lambda: f64,
        min_len: usize,
        step: usize,
        solver: SolverConfig,
    ) -> Result<Self> {
        if lag == 0 {
            return Err(Error::invalid("lag must be at least 1"));
        }
        if step == 0 {
            return Err(Error::invalid("step must be at least 1"));
        }
        if min_len == 0 {
            return Err(Error::invalid("min_len must be at least 1"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        let n = series.n();
        let mut grid: Vec<usize> = (0..n).step_by(step).collect();
        grid.push(n);
        let chains = (0..grid.len()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            series,
            lag,
            lambda,
            min_len,
            solver,
            grid,
            chains,
        })
    }

    pub fn series(&self) -> &TimeSeries {
        self.series
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    /// Candidate boundary positions, `0` and `n` included.
    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    /// Loss of `(grid[i], grid[j]]`, `i < j`.
    pub fn loss_by_index(&self, i: usize, j: usize) -> f64 {
        assert!(i < j && j < self.grid.len(), "grid indices out of order");
        self.chain(i).losses[j - i - 1]
    }

    /// Loss of `(s, e]`; both ends must lie on the grid.
    pub fn loss(&self, s: usize, e: usize) -> Result<f64> {
        let i = self.grid_index(s)?;
        let j = self.grid_index(e)?;
        if i >= j {
            return Err(Error::invalid(format!("empty interval ({s}, {e}]")));
        }
        Ok(self.loss_by_index(i, j))
    }

    fn grid_index(&self, pos: usize) -> Result<usize> {
        self.grid
            .binary_search(&pos)
            .map_err(|_| Error::invalid(format!("position {pos} is not on the candidate grid")))
    }

    /// Computes every chain, in parallel.
    pub fn fill(&self) {
        (0..self.grid.len() - 1).into_par_iter().for_each(|i| {
            self.chain(i);
        });
    }

    /// Number of fits that hit the iteration cap, over chains computed so far.
    pub fn nonconverged_fits(&self) -> usize {
        self.chains
            .iter()
            .filter_map(OnceLock::get)
            .map(|c| c.nonconverged)
            .sum()
    }

    fn chain(&self, i: usize) -> &Chain {
        self.chains[i].get_or_init(|| self.compute_chain(i, self.grid.len() - 1))
    }

    fn compute_chain(&self, i: usize, last: usize) -> Chain {
        let s = self.grid[i];
        let mut acc = IntervalGram::empty(self.series.p(), self.lag);
        let mut next_row = s + self.lag;
        let mut warm: Option<DMatrix<f64>> = None;
        let mut losses = Vec::with_capacity(last - i);
        let mut nonconverged = 0;
        for &e in &self.grid[i + 1..=last] {
            while next_row < e {
                acc.add_summand(self.series, next_row);
                next_row += 1;
            }
            if acc.count < self.min_len {
                losses.push(0.0);
                continue;
            }
            let (coef, fit) = fit_stacked(&acc, self.lambda, &self.solver, warm.as_ref())
                .expect("lambda validated at construction");
            if !fit.converged {
                nonconverged += 1;
            }
            losses.push(fit.rss);
            warm = Some(coef);
        }
        Chain {
            losses,
            nonconverged,
        }
    }
}

/// Loss of the interval `(s, e]` (1-based time points `s+1..=e`).
///
/// With a cache the memoized value is returned; the cache's parameters must
/// match. Without one the value is computed by the same warm-started chain a
/// unit-step cache would use, so both paths agree exactly.
#[allow(clippy::too_many_arguments)]
pub fn segment_loss(
    series: &TimeSeries,
    s: usize,
    e: usize,
    lag: usize,
    lambda: f64,
    min_len: usize,
    solver: &SolverConfig,
    cache: Option<&LossCache<'_>>,
) -> Result<f64> {
    if s >= e || e > series.n() {
        return Err(Error::invalid(format!(
            "interval ({s}, {e}] is not inside (0, {}]",
            series.n()
        )));
    }
    match cache {
        Some(c) => {
            let same = std::ptr::eq(c.series, series)
                && c.lag == lag
                && c.lambda == lambda
                && c.min_len == min_len
                && c.solver == *solver;
            if !same {
                return Err(Error::invalid(
                    "loss cache was built for different data or parameters",
                ));
            }
            c.loss(s, e)
        }
        None => {
            let c = LossCache::new(series, lag, lambda, min_len, 1, *solver)?;
            Ok(*c.compute_chain(s, e).losses.last().expect("non-empty chain"))
        }
    }
}
