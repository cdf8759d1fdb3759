// SPDX-License-Identifier: MIT OR Apache-2.0

//! Domain types for piecewise-stable VAR processes.
//!
//! Time points are 1-based in every public type and report (the first
//! observation is `t = 1`); row storage inside [`TimeSeries`] is 0-based.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x p` matrix of observations, rows indexed by time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    n: usize,
    p: usize,
    // row-major: row t occupies data[t*p..(t+1)*p]
    data: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series from row-major data of length `n * p`.
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid(format!(
                "series must have n >= 1 and p >= 1 (got n={n}, p={p})"
            )));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / p + 1,
                col: idx % p + 1,
            });
        }
        Ok(Self { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), p, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Observation at 0-based row `t`.
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.p..(t + 1) * self.p]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    /// Returns a copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            p: self.p,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.data)
    }
}

/// The lag matrices `A[1..L]` of one VAR(L) parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    matrices: Vec<DMatrix<f64>>,
}

impl CoefficientSet {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::invalid("a coefficient set needs at least one lag"))?;
        let p = first.nrows();
        if p == 0 {
            return Err(Error::invalid("coefficient matrices must be non-empty"));
        }
        for m in &matrices {
            if m.nrows() != p || m.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: if m.nrows() != p { m.nrows() } else { m.ncols() },
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("coefficient matrices must be finite"));
            }
        }
        Ok(Self { matrices })
    }

    /// VAR(1) parameterization with a single matrix.
    pub fn single(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![matrix])
    }

    pub fn zeros(p: usize, lag: usize) -> Self {
        Self {
            matrices: vec![DMatrix::zeros(p, p); lag],
        }
    }

    /// Splits a `p x pL` stacked matrix `[A[1] A[2] ... A[L]]`.
    pub fn from_stacked(stacked: &DMatrix<f64>, lag: usize) -> Result<Self> {
        let p = stacked.nrows();
        if lag == 0 || stacked.ncols() != p * lag {
            return Err(Error::DimensionMismatch {
                expected: p * lag,
                found: stacked.ncols(),
            });
        }
        let matrices = (0..lag)
            .map(|l| stacked.columns(l * p, p).into_owned())
            .collect();
        Self::new(matrices)
    }

    /// `[A[1] A[2] ... A[L]]` as a `p x pL` matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut out = DMatrix::zeros(p, p * self.lag());
        for (l, m) in self.matrices.iter().enumerate() {
            out.columns_mut(l * p, p).copy_from(m);
        }
        out
    }

    pub fn lag(&self) -> usize {
        self.matrices.len()
    }

    pub fn p(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Matrix for lag `l`, 1-based.
    pub fn matrix(&self, l: usize) -> &DMatrix<f64> {
        &self.matrices[l - 1]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Nested `[lag][row][col]` representation used in JSON reports.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        self.matrices
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|i| m.row(i).iter().copied().collect())
                    .collect()
            })
            .collect()
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let matrices = nested
            .iter()
            .map(|rows| {
                let p = rows.len();
                if rows.iter().any(|r| r.len() != p) {
                    return Err(Error::invalid("coefficient matrices must be square"));
                }
                Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrices)
    }
}

/// Result of a stability check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub stable: bool,
    pub spectral_radius: f64,
}

/// Block companion matrix of a VAR(L): the lag matrices along the first
/// block row and identities on the first block subdiagonal.
pub fn companion_matrix(coeffs: &CoefficientSet) -> DMatrix<f64> {
    if coeffs.lag() == 1 {
        return coeffs.matrix(1).clone();
    }
    let p = coeffs.p();
    let dim = p * coeffs.lag();
    let mut out = DMatrix::zeros(dim, dim);
    for (l, m) in coeffs.matrices().iter().enumerate() {
        out.view_mut((0, l * p), (p, p)).copy_from(m);
    }
    for b in 1..coeffs.lag() {
        out.view_mut((b * p, (b - 1) * p), (p, p))
            .fill_with_identity();
    }
    out
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(matrix: &DMatrix<f64>) -> Result<f64> {
    let dim = matrix.nrows();
    let max_iter = 10 * dim.max(1);
    let schur = Schur::try_new(matrix.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNonConvergence {
            iterations: max_iter,
        })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Stability check with strict margin 0: stable iff the spectral radius of
/// the companion matrix is below 1.
pub fn is_stable(coeffs: &CoefficientSet) -> Result<Stability> {
    is_stable_with_margin(coeffs, 0.0)
}

/// Stable iff the companion spectral radius is below `1 - margin`.
pub fn is_stable_with_margin(coeffs: &CoefficientSet, margin: f64) -> Result<Stability> {
    let spectral_radius = spectral_radius(&companion_matrix(coeffs))?;
    Ok(Stability {
        stable: spectral_radius < 1.0 - margin,
        spectral_radius,
    })
}

/// Frobenius distance between two stacked coefficient sets.
pub fn jump_size(a: &CoefficientSet, b: &CoefficientSet) -> Result<f64> {
    if a.p() != b.p() {
        return Err(Error::DimensionMismatch {
            expected: a.p(),
            found: b.p(),
        });
    }
    if a.lag() != b.lag() {
        return Err(Error::DimensionMismatch {
            expected: a.lag(),
            found: b.lag(),
        });
    }
    let sq: f64 = a
        .matrices()
        .iter()
        .zip(b.matrices())
        .map(|(x, y)| (x - y).norm_squared())
        .sum();
    Ok(sq.sqrt())
}

/// Estimated or true change points: sorted, 1-based time indices at which a
/// new segment starts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChangePointSet(Vec<usize>);

impl ChangePointSet {
    pub fn new(points: Vec<usize>) -> Result<Self> {
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "change points must be strictly increasing, got {points:?}"
            )));
        }
        Ok(Self(points))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl From<ChangePointSet> for Vec<usize> {
    fn from(c: ChangePointSet) -> Self {
        c.0
    }
}

/// Ground-truth generating model: change points `eta_1 < ... < eta_K`, one
/// coefficient set per segment and the noise standard deviation.
///
/// Segment `k` covers `[eta_k, eta_{k+1} - 1]` with `eta_0 = 1` and
/// `eta_{K+1} = n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseVarModel {
    n: usize,
    change_points: Vec<usize>,
    segments: Vec<CoefficientSet>,
    noise_sd: f64,
}

impl PiecewiseVarModel {
    pub fn new(
        n: usize,
        change_points: Vec<usize>,
        segments: Vec<CoefficientSet>,
        noise_sd: f64,
    ) -> Result<Self> {
        if segments.len() != change_points.len() + 1 {
            return Err(Error::invalid(format!(
                "{} change points need {} segments, got {}",
                change_points.len(),
                change_points.len() + 1,
                segments.len()
            )));
        }
        if !(noise_sd.is_finite() && noise_sd > 0.0) {
            return Err(Error::invalid(format!("noise_sd must be > 0, got {noise_sd}")));
        }
        let bounds = boundaries(n, &change_points);
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "change points must satisfy 1 < eta_1 < ... < eta_K <= n={n}, got {change_points:?}"
            )));
        }
        let p = segments[0].p();
        let lag = segments[0].lag();
        for seg in &segments {
            if seg.p() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: seg.p(),
                });
            }
            if seg.lag() != lag {
                return Err(Error::DimensionMismatch {
                    expected: lag,
                    found: seg.lag(),
                });
            }
        }
        let delta = min_spacing(&bounds);
        if lag >= delta {
            return Err(Error::invalid(format!(
                "lag {lag} must be smaller than the minimal spacing {delta}"
            )));
        }
        for (k, seg) in segments.iter().enumerate() {
            let st = is_stable(seg)?;
            if !st.stable {
                return Err(Error::Unstable {
                    segment: k,
                    radius: st.spectral_radius,
                    margin: 0.0,
                });
            }
        }
        for (k, pair) in segments.windows(2).enumerate() {
            if jump_size(&pair[0], &pair[1])? == 0.0 {
                return Err(Error::invalid(format!(
                    "segments {k} and {} have identical coefficients",
                    k + 1
                )));
            }
        }
        Ok(Self {
            n,
            change_points,
            segments,
            noise_sd,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.segments[0].p()
    }

    pub fn lag(&self) -> usize {
        self.segments[0].lag()
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn truth(&self) -> ChangePointSet {
        ChangePointSet(self.change_points.clone())
    }

    pub fn segments(&self) -> &[CoefficientSet] {
        &self.segments
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// `[eta_0, eta_1, ..., eta_{K+1}]` with `eta_0 = 1`, `eta_{K+1} = n + 1`.
    pub fn boundaries(&self) -> Vec<usize> {
        boundaries(self.n, &self.change_points)
    }
}

fn boundaries(n: usize, change_points: &[usize]) -> Vec<usize> {
    let mut b = Vec::with_capacity(change_points.len() + 2);
    b.push(1);
    b.extend_from_slice(change_points);
    b.push(n + 1);
    b
}

fn min_spacing(bounds: &[usize]) -> usize {
    bounds.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(0)
}

/// Ground-truth diagnostics of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSummary {
    /// Minimal spacing between consecutive change points, boundaries included.
    pub delta: usize,
    /// Minimal jump size between adjacent segments; `+inf` without change points.
    pub kappa: f64,
    /// Size of the union support over all segments and lags.
    pub d0: usize,
    /// Number of change points.
    pub num_change_points: usize,
}

pub fn model_summary(model: &PiecewiseVarModel) -> ModelSummary {
    let delta = min_spacing(&model.boundaries());
    let kappa = model
        .segments
        .windows(2)
        .map(|w| jump_size(&w[0], &w[1]).expect("segments validated at construction"))
        .fold(f64::INFINITY, f64::min);
    let p = model.p();
    let mut support = vec![false; p * p];
    for seg in &model.segments {
        for m in seg.matrices() {
            for j in 0..p {
                for i in 0..p {
                    if m[(i, j)] != 0.0 {
                        support[i * p + j] = true;
                    }
                }
            }
        }
    }
    ModelSummary {
        delta,
        kappa,
        d0: support.iter().filter(|&&s| s).count(),
        num_change_points: model.change_points.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn set(mats: Vec<DMatrix<f64>>) -> CoefficientSet {
        CoefficientSet::new(mats).unwrap()
    }

    #[test]
    fn companion_lag_one_is_the_matrix() {
        let a = DMatrix::from_diagonal_element(3, 3, 0.5);
        let c = companion_matrix(&set(vec![a.clone()]));
        assert_eq!(c, a);
    }

    #[test]
    fn companion_scalar_lag_two() {
        let c = companion_matrix(&set(vec![
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.25),
        ]));
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 1.0, 0.0]));
    }

    #[test]
    fn companion_zero_coefficients() {
        let c = companion_matrix(&CoefficientSet::zeros(2, 2));
        let mut expected = DMatrix::zeros(4, 4);
        expected[(2, 0)] = 1.0;
        expected[(3, 1)] = 1.0;
        assert_eq!(c, expected);
    }

    #[test]
    fn stability_examples() {
        let s = is_stable(&set(vec![DMatrix::from_diagonal_element(4, 4, 0.5)])).unwrap();
        assert!(s.stable);
        assert_abs_diff_eq!(s.spectral_radius, 0.5, epsilon = 1e-10);

        let s = is_stable(&set(vec![DMatrix::identity(4, 4)])).unwrap();
        assert!(!s.stable);
        assert_abs_diff_eq!(s.spectral_radius, 1.0, epsilon = 1e-10);

        // larger root of z^2 - 0.5 z - 0.25
        let s = is_stable(&set(vec![
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.25),
        ]))
        .unwrap();
        assert!(s.stable);
        assert_abs_diff_eq!(s.spectral_radius, (0.5 + 1.25f64.sqrt()) / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn stability_margin() {
        let c = set(vec![DMatrix::from_diagonal_element(2, 2, 0.995)]);
        assert!(is_stable(&c).unwrap().stable);
        assert!(!is_stable_with_margin(&c, 0.01).unwrap().stable);
    }

    #[test]
    fn bidiagonal_radius_is_diagonal() {
        let p = 10;
        let a = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                0.3
            } else if j == i + 1 {
                -0.3
            } else {
                0.0
            }
        });
        let s = is_stable(&set(vec![a])).unwrap();
        assert!(s.stable);
        assert_abs_diff_eq!(s.spectral_radius, 0.3, epsilon = 1e-10);
    }

    #[test]
    fn jump_size_examples() {
        let a = set(vec![DMatrix::from_diagonal_element(3, 3, 0.2)]);
        assert_eq!(jump_size(&a, &a).unwrap(), 0.0);
        let mut m = a.matrix(1).clone();
        m[(0, 2)] = 0.3;
        let b = set(vec![m]);
        assert_abs_diff_eq!(jump_size(&a, &b).unwrap(), 0.3, epsilon = 1e-15);
        let c = CoefficientSet::zeros(3, 2);
        assert!(jump_size(&a, &c).is_err());
    }

    #[test]
    fn stacked_round_trip() {
        let c = set(vec![
            DMatrix::from_fn(2, 2, |i, j| (i * 2 + j) as f64),
            DMatrix::from_fn(2, 2, |i, j| 10.0 + (i * 2 + j) as f64),
        ]);
        let s = c.stacked();
        assert_eq!(s[(1, 3)], 13.0);
        assert_eq!(CoefficientSet::from_stacked(&s, 2).unwrap(), c);
        assert_eq!(CoefficientSet::from_nested(&c.to_nested()).unwrap(), c);
    }

    #[test]
    fn model_validation() {
        let a = set(vec![DMatrix::from_diagonal_element(2, 2, 0.5)]);
        let b = set(vec![DMatrix::from_diagonal_element(2, 2, -0.5)]);
        assert!(PiecewiseVarModel::new(100, vec![50], vec![a.clone(), b.clone()], 1.0).is_ok());
        // identical neighbours
        assert!(PiecewiseVarModel::new(100, vec![50], vec![a.clone(), a.clone()], 1.0).is_err());
        // eta_1 must exceed 1
        assert!(PiecewiseVarModel::new(100, vec![1], vec![a.clone(), b.clone()], 1.0).is_err());
        assert!(PiecewiseVarModel::new(100, vec![101], vec![a.clone(), b.clone()], 1.0).is_err());
        let unstable = set(vec![DMatrix::identity(2, 2)]);
        assert!(matches!(
            PiecewiseVarModel::new(100, vec![], vec![unstable], 1.0),
            Err(Error::Unstable { .. })
        ));
        assert!(PiecewiseVarModel::new(100, vec![], vec![a], 0.0).is_err());
    }

    #[test]
    fn summary_without_change_points() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 0.2;
        m[(2, 2)] = 0.1;
        let model = PiecewiseVarModel::new(100, vec![], vec![set(vec![m])], 1.0).unwrap();
        let s = model_summary(&model);
        assert_eq!(s.delta, 100);
        assert!(s.kappa.is_infinite());
        assert_eq!(s.d0, 2);
        assert_eq!(s.num_change_points, 0);
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::new(0, 2, vec![]).is_err());
        assert!(TimeSeries::new(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(
            TimeSeries::new(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]),
            Err(Error::NonFinite { row: 2, col: 1 })
        );
        let s = TimeSeries::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert!(TimeSeries::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
