// SPDX-License-Identifier: MIT OR Apache-2.0

//! Penalized minimal-partition solver.
//!
//! Over all partitions of `{1, ..., n}` into intervals whose boundaries lie on
//! the candidate grid, minimize `sum_I loss(I) + gamma * |P|`. The Bellman
//! recursion `F(e) = min_{s < e} F(s) + loss((s, e]) + gamma` with `F(0) = 0`
//! gives an exact minimizer; ties go to the smallest boundary.
//!
//! Objectives are always accumulated left to right as `(acc + loss) + gamma`,
//! so the recursion, [`objective_with_cache`] and the exhaustive oracle produce
//! bit-identical values for the same partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{LossCache, SolverConfig};
use crate::model::{ChangePointSet, TimeSeries};

/// Detector tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub lag: usize,
    /// Lasso penalty; the per-interval weight is `lambda * sqrt(count)`.
    pub lambda: f64,
    /// Penalty per interval of the partition.
    pub gamma: f64,
    /// Intervals with fewer summands than this have zero loss.
    pub min_len: usize,
    /// Candidate boundaries are multiples of `step`.
    pub step: usize,
    pub solver: SolverConfig,
}

/// `0.1 * sqrt(ln p)`.
pub fn default_lambda(p: usize) -> f64 {
    0.1 * (p as f64).ln().sqrt()
}

/// `15 * ln(n) * p`.
pub fn default_gamma(n: usize, p: usize) -> f64 {
    15.0 * (n as f64).ln() * p as f64
}

/// `0.3 * sqrt(ln p)`.
pub fn default_zeta(p: usize) -> f64 {
    0.3 * (p as f64).ln().sqrt()
}

/// `2 (L + 1)`.
pub fn default_min_len(lag: usize) -> usize {
    2 * (lag + 1)
}

impl DetectionConfig {
    /// Defaults for an `n x p` series and lag 1.
    pub fn defaults_for(n: usize, p: usize) -> Self {
        Self::defaults_with_lag(n, p, 1)
    }

    pub fn defaults_with_lag(n: usize, p: usize, lag: usize) -> Self {
        Self {
            lag,
            lambda: default_lambda(p),
            gamma: default_gamma(n, p),
            min_len: default_min_len(lag),
            step: 1,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag == 0 {
            return Err(Error::invalid("lag must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.step == 0 {
            return Err(Error::invalid("step must be at least 1"));
        }
        if self.min_len == 0 {
            return Err(Error::invalid("min_len must be at least 1"));
        }
        if self.solver.tol.is_nan() || self.solver.tol < 0.0 || self.solver.max_iter == 0 {
            return Err(Error::invalid("solver needs tol >= 0 and max_iter >= 1"));
        }
        Ok(())
    }

    /// Loss cache matching this configuration.
    pub fn loss_cache<'a>(&self, series: &'a TimeSeries) -> Result<LossCache<'a>> {
        self.validate()?;
        LossCache::new(series, self.lag, self.lambda, self.min_len, self.step, self.solver)
    }
}

/// An interval partition of `{1, ..., n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Interior left endpoints `1 < i_1 < ... < i_K <= n` (1-based).
    pub boundaries: Vec<usize>,
    pub objective: f64,
}

impl Partition {
    pub fn num_intervals(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Intervals as inclusive 1-based `(start, end)` pairs.
    pub fn intervals(&self, n: usize) -> Vec<(usize, usize)> {
        let mut starts = vec![1];
        starts.extend_from_slice(&self.boundaries);
        let mut ends: Vec<usize> = self.boundaries.iter().map(|b| b - 1).collect();
        ends.push(n);
        starts.into_iter().zip(ends).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub change_points: ChangePointSet,
    pub partition: Partition,
    /// Interval fits that stopped at the iteration cap.
    pub nonconverged_fits: usize,
}

fn check_series(series: &TimeSeries, config: &DetectionConfig) -> Result<()> {
    config.validate()?;
    if series.n() < config.lag + 2 {
        return Err(Error::invalid(format!(
            "series of length {} is too short for lag {} (need at least {})",
            series.n(),
            config.lag,
            config.lag + 2
        )));
    }
    Ok(())
}

/// Exact DP change point detection.
pub fn detect(series: &TimeSeries, config: &DetectionConfig) -> Result<Detection> {
    check_series(series, config)?;
    let cache = config.loss_cache(series)?;
    cache.fill();
    Ok(detect_with_cache(&cache, config.gamma))
}

/// Bellman recursion over a (possibly pre-filled) loss cache.
pub fn detect_with_cache(cache: &LossCache<'_>, gamma: f64) -> Detection {
    let grid = cache.grid();
    let m = grid.len() - 1;
    let mut best = vec![0.0f64; m + 1];
    let mut from = vec![0usize; m + 1];
    for j in 1..=m {
        let mut value = f64::INFINITY;
        let mut arg = 0;
        for (i, b) in best.iter().enumerate().take(j) {
            let cand = b + cache.loss_by_index(i, j) + gamma;
            if cand < value {
                value = cand;
                arg = i;
            }
        }
        best[j] = value;
        from[j] = arg;
    }
    let mut starts = Vec::new();
    let mut j = m;
    while j > 0 {
        j = from[j];
        if j > 0 {
            starts.push(grid[j] + 1);
        }
    }
    starts.reverse();
    Detection {
        change_points: ChangePointSet::new(starts.clone()).expect("backtracking yields sorted boundaries"),
        partition: Partition {
            boundaries: starts,
            objective: best[m],
        },
        nonconverged_fits: cache.nonconverged_fits(),
    }
}

fn positions(boundaries: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut pos = Vec::with_capacity(boundaries.len() + 2);
    pos.push(0);
    for &b in boundaries {
        if b < 2 || b > n {
            return Err(Error::invalid(format!(
                "boundary {b} outside (1, {n}]"
            )));
        }
        pos.push(b - 1);
    }
    pos.push(n);
    if pos.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "partition boundaries must be strictly increasing, got {boundaries:?}"
        )));
    }
    Ok(pos)
}

/// `sum_I loss(I) + gamma |P|` for the partition with the given interior left
/// endpoints, using memoized losses.
pub fn objective_with_cache(cache: &LossCache<'_>, boundaries: &[usize], gamma: f64) -> Result<f64> {
    let pos = positions(boundaries, cache.series().n())?;
    let mut acc = 0.0;
    for w in pos.windows(2) {
        acc = acc + cache.loss(w[0], w[1])? + gamma;
    }
    Ok(acc)
}

/// Evaluates the partition objective from scratch.
pub fn objective(series: &TimeSeries, boundaries: &[usize], config: &DetectionConfig) -> Result<f64> {
    let cfg = DetectionConfig { step: 1, ..*config };
    let cache = cfg.loss_cache(series)?;
    objective_with_cache(&cache, boundaries, config.gamma)
}

/// Largest series length accepted by [`brute_force_detect`].
pub const BRUTE_FORCE_MAX_N: usize = 20;

/// Exhaustive search over all partitions on the candidate grid.
pub fn brute_force_detect(series: &TimeSeries, config: &DetectionConfig) -> Result<Detection> {
    check_series(series, config)?;
    let cache = config.loss_cache(series)?;
    brute_force_with_cache(&cache, config.gamma)
}

/// Exhaustive search sharing a loss cache with the DP. Among optimal
/// partitions the one whose boundaries, read from the last one backwards, are
/// lexicographically smallest is returned, which is the partition the DP's
/// smallest-boundary tie-break produces.
pub fn brute_force_with_cache(cache: &LossCache<'_>, gamma: f64) -> Result<Detection> {
    let n = cache.series().n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let grid = cache.grid();
    let interior = &grid[1..grid.len() - 1];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u64..(1u64 << interior.len()) {
        // starts of all intervals, as half-open positions
        let mut pos = vec![0usize];
        pos.extend(
            interior
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &g)| g),
        );
        let mut acc = 0.0;
        let mut prev = 0;
        for &end in pos[1..].iter().chain(std::iter::once(&n)) {
            acc = acc + cache.loss(prev, end)? + gamma;
            prev = end;
        }
        let better = match &best {
            None => true,
            Some((value, starts)) => {
                acc < *value || (acc == *value && pos.iter().rev().lt(starts.iter().rev()))
            }
        };
        if better {
            best = Some((acc, pos));
        }
    }
    let (objective, pos) = best.expect("at least one partition");
    let boundaries: Vec<usize> = pos[1..].iter().map(|b| b + 1).collect();
    Ok(Detection {
        change_points: ChangePointSet::new(boundaries.clone())?,
        partition: Partition {
            boundaries,
            objective,
        },
        nonconverged_fits: cache.nonconverged_fits(),
    })
}

/// Number of partitions [`brute_force_with_cache`] enumerates.
pub fn partition_count(cache: &LossCache<'_>) -> u64 {
    1u64 << (cache.grid().len() - 2)
}
