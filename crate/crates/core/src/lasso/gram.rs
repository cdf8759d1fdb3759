// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sufficient statistics of the VAR least-squares loss on an interval.
//!
//! Intervals are half-open over 0-based row positions: `(s, e]` covers rows
//! `s..e` (1-based time points `s+1..=e`). A summand exists for every row `t`
//! in `s+lag..e`, regressing row `t` on the stacked predictor
//! `(X[t-1], ..., X[t-lag])`, so only observations inside the interval enter.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::TimeSeries;

/// Gram, cross-product and response energy of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGram {
    /// `sum_t xbar_t xbar_t^T`, `pL x pL`.
    pub gram: DMatrix<f64>,
    /// `sum_t X_t xbar_t^T`, `p x pL`.
    pub cross: DMatrix<f64>,
    /// `sum_t X_t[i]^2` per coordinate.
    pub response_sq_by_coord: Vec<f64>,
    /// Number of summands.
    pub count: usize,
    pub lag: usize,
}

impl IntervalGram {
    pub fn empty(p: usize, lag: usize) -> Self {
        Self {
            gram: DMatrix::zeros(p * lag, p * lag),
            cross: DMatrix::zeros(p, p * lag),
            response_sq_by_coord: vec![0.0; p],
            count: 0,
            lag,
        }
    }

    pub fn p(&self) -> usize {
        self.cross.nrows()
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// `sum_t ||X_t||^2`.
    pub fn response_sq(&self) -> f64 {
        self.response_sq_by_coord.iter().sum()
    }

    /// Adds the summand for 0-based row `t` (requires `t >= lag`).
    pub fn add_summand(&mut self, series: &TimeSeries, t: usize) {
        let p = series.p();
        let dim = p * self.lag;
        let y = series.row(t);
        let gram = self.gram.as_mut_slice();
        let cross = self.cross.as_mut_slice();
        // column-major: entry (r, c) lives at c * nrows + r
        for lc in 0..self.lag {
            let xc = series.row(t - 1 - lc);
            for (jc, &vc) in xc.iter().enumerate() {
                let col = lc * p + jc;
                if vc == 0.0 {
                    continue;
                }
                let base = col * dim;
                for lr in 0..self.lag {
                    let xr = series.row(t - 1 - lr);
                    let off = base + lr * p;
                    for (jr, &vr) in xr.iter().enumerate() {
                        gram[off + jr] += vr * vc;
                    }
                }
                let cbase = col * p;
                for (i, &yi) in y.iter().enumerate() {
                    cross[cbase + i] += yi * vc;
                }
            }
        }
        for (acc, &yi) in self.response_sq_by_coord.iter_mut().zip(y) {
            *acc += yi * yi;
        }
        self.count += 1;
    }
}

fn check_interval(series: &TimeSeries, s: usize, e: usize, lag: usize) -> Result<()> {
    if lag == 0 {
        return Err(Error::invalid("lag must be at least 1"));
    }
    if s >= e || e > series.n() {
        return Err(Error::invalid(format!(
            "interval ({s}, {e}] is not inside (0, {}]",
            series.n()
        )));
    }
    if e - s < lag + 1 {
        return Err(Error::IntervalTooShort {
            start: s,
            end: e,
            lag,
        });
    }
    Ok(())
}

/// Direct summation over the rows of `(s, e]`, ascending in time.
pub fn interval_gram(series: &TimeSeries, s: usize, e: usize, lag: usize) -> Result<IntervalGram> {
    check_interval(series, s, e, lag)?;
    let mut g = IntervalGram::empty(series.p(), lag);
    for t in s + lag..e {
        g.add_summand(series, t);
    }
    Ok(g)
}

/// Prefix sums of the per-row summands, so any interval's statistics are
/// assembled in `O(p^2 L^2)`.
#[derive(Debug, Clone)]
pub struct GramCache {
    p: usize,
    lag: usize,
    n: usize,
    // entry k holds the sum over summand rows t < k
    gram: Vec<f64>,
    cross: Vec<f64>,
    response: Vec<f64>,
}

impl GramCache {
    /// Bytes needed to cache a series of this shape.
    pub fn memory_bytes(n: usize, p: usize, lag: usize) -> usize {
        let dim = p * lag;
        (n + 1) * (dim * dim + p * dim + p) * std::mem::size_of::<f64>()
    }

    pub fn new(series: &TimeSeries, lag: usize) -> Self {
        let (n, p) = (series.n(), series.p());
        let dim = p * lag;
        let (gs, cs) = (dim * dim, p * dim);
        let mut gram = vec![0.0; (n + 1) * gs];
        let mut cross = vec![0.0; (n + 1) * cs];
        let mut response = vec![0.0; (n + 1) * p];
        let mut acc = IntervalGram::empty(p, lag);
        for k in 1..=n {
            let t = k - 1;
            if t >= lag {
                acc.add_summand(series, t);
            }
            gram[k * gs..(k + 1) * gs].copy_from_slice(acc.gram.as_slice());
            cross[k * cs..(k + 1) * cs].copy_from_slice(acc.cross.as_slice());
            response[k * p..(k + 1) * p].copy_from_slice(&acc.response_sq_by_coord);
        }
        Self {
            p,
            lag,
            n,
            gram,
            cross,
            response,
        }
    }

    /// Builds the cache only if it fits in `max_bytes`.
    pub fn with_memory_limit(series: &TimeSeries, lag: usize, max_bytes: usize) -> Option<Self> {
        (Self::memory_bytes(series.n(), series.p(), lag) <= max_bytes)
            .then(|| Self::new(series, lag))
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Statistics of `(s, e]`; same contract as [`interval_gram`].
    pub fn interval_gram(&self, s: usize, e: usize) -> Result<IntervalGram> {
        if s >= e || e > self.n {
            return Err(Error::invalid(format!(
                "interval ({s}, {e}] is not inside (0, {}]",
                self.n
            )));
        }
        if e - s < self.lag + 1 {
            return Err(Error::IntervalTooShort {
                start: s,
                end: e,
                lag: self.lag,
            });
        }
        Ok(self.window(s, e))
    }

    /// Like [`Self::interval_gram`] but returns empty statistics for intervals
    /// without any summand.
    pub(crate) fn window(&self, s: usize, e: usize) -> IntervalGram {
        let dim = self.p * self.lag;
        let (gs, cs, p) = (dim * dim, self.p * dim, self.p);
        let lo = (s + self.lag).min(e);
        let diff = |v: &[f64], width: usize| -> Vec<f64> {
            v[e * width..(e + 1) * width]
                .iter()
                .zip(&v[lo * width..(lo + 1) * width])
                .map(|(a, b)| a - b)
                .collect()
        };
        IntervalGram {
            gram: DMatrix::from_vec(dim, dim, diff(&self.gram, gs)),
            cross: DMatrix::from_vec(p, dim, diff(&self.cross, cs)),
            response_sq_by_coord: diff(&self.response, p),
            count: e - lo,
            lag: self.lag,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(n: usize, p: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSeries::new(n, p, (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    /// Oracle: explicit stacked vectors and outer products.
    fn naive(series: &TimeSeries, s: usize, e: usize, lag: usize) -> (DMatrix<f64>, DMatrix<f64>, f64) {
        let p = series.p();
        let mut g = DMatrix::zeros(p * lag, p * lag);
        let mut c = DMatrix::zeros(p, p * lag);
        let mut r = 0.0;
        for t in s + lag..e {
            let xbar = nalgebra::DVector::from_iterator(
                p * lag,
                (0..lag).flat_map(|l| series.row(t - 1 - l).iter().copied()),
            );
            let y = nalgebra::DVector::from_row_slice(series.row(t));
            g += &xbar * xbar.transpose();
            c += &y * xbar.transpose();
            r += y.norm_squared();
        }
        (g, c, r)
    }

    #[test]
    fn zero_series_gives_zero_statistics() {
        let s = TimeSeries::new(10, 3, vec![0.0; 30]).unwrap();
        let g = interval_gram(&s, 0, 10, 2).unwrap();
        assert!(g.gram.iter().all(|&v| v == 0.0));
        assert!(g.cross.iter().all(|&v| v == 0.0));
        assert_eq!(g.response_sq(), 0.0);
        assert_eq!(g.count, 8);
    }

    #[test]
    fn single_summand_is_rank_one() {
        let s = random_series(20, 3, 1);
        let g = interval_gram(&s, 4, 7, 2).unwrap();
        assert_eq!(g.count, 1);
        let sv = g.gram.clone().singular_values();
        assert!(sv.iter().filter(|&&v| v > 1e-10 * sv.max()).count() <= 1);
        assert!(interval_gram(&s, 4, 6, 2).is_err());
    }

    #[test]
    fn matches_naive_outer_products() {
        let s = random_series(30, 3, 2);
        let g = interval_gram(&s, 3, 25, 2).unwrap();
        let (gn, cn, rn) = naive(&s, 3, 25, 2);
        assert!((&g.gram - gn).amax() < 1e-12);
        assert!((&g.cross - cn).amax() < 1e-12);
        assert!((g.response_sq() - rn).abs() < 1e-12);
        assert_eq!(g.gram, g.gram.transpose());
    }

    #[test]
    fn prefix_cache_matches_direct_summation() {
        let s = random_series(50, 4, 3);
        let cache = GramCache::new(&s, 2);
        for (a, b) in [(0, 50), (0, 3), (7, 19), (30, 50), (47, 50)] {
            let d = interval_gram(&s, a, b, 2).unwrap();
            let c = cache.interval_gram(a, b).unwrap();
            assert_eq!(c.count, d.count);
            let scale = 1.0 + d.gram.amax();
            assert!((&c.gram - &d.gram).amax() <= 1e-12 * scale);
            assert!((&c.cross - &d.cross).amax() <= 1e-12 * scale);
            assert!((c.response_sq() - d.response_sq()).abs() <= 1e-12 * scale);
        }
        assert!(cache.interval_gram(10, 12).is_err());
    }

    #[test]
    fn memory_limit_disables_cache() {
        let s = random_series(50, 4, 3);
        assert!(GramCache::with_memory_limit(&s, 2, 1024).is_none());
        assert!(GramCache::with_memory_limit(&s, 2, usize::MAX).is_some());
    }
}
