// SPDX-License-Identifier: MIT OR Apache-2.0

//! Realizations of the piecewise VAR model and the three benchmark scenarios.
//!
//! Each segment is generated from its own ChaCha stream (stream index = segment
//! index) so segments are independent and the output does not depend on the
//! order in which segments are produced. The unobserved pre-history of every
//! segment is approximated by a burn-in run of the segment's own recursion
//! started from zero.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_stable_with_margin, CoefficientSet, PiecewiseVarModel, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub burn_in: usize,
    pub stability_margin: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in: 200,
            stability_margin: 0.01,
        }
    }
}

impl SimulationConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Draws one realization of `model`. Deterministic in `(model, config)`.
pub fn simulate(model: &PiecewiseVarModel, config: &SimulationConfig) -> Result<TimeSeries> {
    let lag = model.lag();
    if config.burn_in < lag {
        return Err(Error::invalid(format!(
            "burn_in ({}) must be at least the lag ({lag})",
            config.burn_in
        )));
    }
    for (k, seg) in model.segments().iter().enumerate() {
        let st = is_stable_with_margin(seg, config.stability_margin)?;
        if !st.stable {
            return Err(Error::Unstable {
                segment: k,
                radius: st.spectral_radius,
                margin: config.stability_margin,
            });
        }
    }

    let bounds = model.boundaries();
    let pieces: Vec<Vec<f64>> = (0..model.segments().len())
        .into_par_iter()
        .map(|k| {
            simulate_segment(
                &model.segments()[k],
                model.noise_sd(),
                bounds[k + 1] - bounds[k],
                config.burn_in,
                config.seed,
                k as u64,
            )
        })
        .collect();

    TimeSeries::new(model.n(), model.p(), pieces.concat())
}

fn simulate_segment(
    coeffs: &CoefficientSet,
    noise_sd: f64,
    len: usize,
    burn_in: usize,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let p = coeffs.p();
    let lag = coeffs.lag();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    // history[0] is the most recent state
    let mut history: Vec<Vec<f64>> = vec![vec![0.0; p]; lag];
    let mut out = Vec::with_capacity(len * p);
    let mut next = vec![0.0; p];
    for step in 0..burn_in + len {
        for (i, x) in next.iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *x = noise_sd * noise;
            for (l, past) in history.iter().enumerate() {
                let a = coeffs.matrices()[l].row(i);
                *x += a.iter().zip(past).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        history.rotate_right(1);
        history[0].copy_from_slice(&next);
        if step >= burn_in {
            out.extend_from_slice(&next);
        }
    }
    out
}

fn var1(m: DMatrix<f64>) -> CoefficientSet {
    CoefficientSet::single(m).expect("scenario matrices are finite and square")
}

/// Setting (i): `p = 10`, one change at `n/2` from an upper-bidiagonal matrix
/// (0.3 diagonal, -0.3 superdiagonal) to its negation.
pub fn scenario_i(n: usize) -> Result<PiecewiseVarModel> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::invalid(format!(
            "scenario (i) needs an even n >= 4, got {n}"
        )));
    }
    let p = 10;
    let bidiag = |d: f64| {
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                d
            } else if j == i + 1 {
                -d
            } else {
                0.0
            }
        })
    };
    PiecewiseVarModel::new(n, vec![n / 2], vec![var1(bidiag(0.3)), var1(bidiag(-0.3))], 1.0)
}

/// Setting (ii): `rho * (v, -v, 0)` / `rho * (-v, v, 0)` / `rho * (v, -v, 0)`
/// with `v = (1, -1, 1, -1, ...)` and changes at `n/3`, `2n/3`.
pub fn scenario_ii(n: usize, p: usize, rho: f64) -> Result<PiecewiseVarModel> {
    if n < 6 || n % 3 != 0 {
        return Err(Error::invalid(format!(
            "scenario (ii) needs n divisible by 3, got {n}"
        )));
    }
    if p < 3 {
        return Err(Error::invalid(format!("scenario (ii) needs p >= 3, got {p}")));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid(format!(
            "scenario (ii) needs rho > 0, got {rho}"
        )));
    }
    let v = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let pattern = |sign: f64| {
        DMatrix::from_fn(p, p, |i, j| match j {
            0 => sign * rho * v(i),
            1 => -sign * rho * v(i),
            _ => 0.0,
        })
    };
    PiecewiseVarModel::new(
        n,
        vec![n / 3, 2 * n / 3],
        vec![var1(pattern(1.0)), var1(pattern(-1.0)), var1(pattern(1.0))],
        1.0,
    )
}

const SCENARIO_III_V1: [f64; 4] = [-0.15, 0.225, 0.25, -0.15];
const SCENARIO_III_V2: [f64; 4] = [0.2, -0.075, -0.175, -0.05];
const SCENARIO_III_V3: [f64; 4] = [-0.15, 0.1, 0.3, -0.05];

/// Setting (iii): column arrangements `(v1, v2, v3, 0)`, `(v2, v3, v1, 0)`,
/// `(v3, v2, v1, 0)` with changes at `n/3`, `2n/3`.
pub fn scenario_iii(n: usize, p: usize) -> Result<PiecewiseVarModel> {
    if n < 6 || n % 3 != 0 {
        return Err(Error::invalid(format!(
            "scenario (iii) needs n divisible by 3, got {n}"
        )));
    }
    if p < 4 {
        return Err(Error::invalid(format!("scenario (iii) needs p >= 4, got {p}")));
    }
    let columns = |cols: [&[f64; 4]; 3]| {
        DMatrix::from_fn(p, p, |i, j| if j < 3 && i < 4 { cols[j][i] } else { 0.0 })
    };
    let (v1, v2, v3) = (&SCENARIO_III_V1, &SCENARIO_III_V2, &SCENARIO_III_V3);
    PiecewiseVarModel::new(
        n,
        vec![n / 3, 2 * n / 3],
        vec![
            var1(columns([v1, v2, v3])),
            var1(columns([v2, v3, v1])),
            var1(columns([v3, v2, v1])),
        ],
        1.0,
    )
}
