// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation benchmark: repeated detect-then-refine runs on the standard
//! scenarios with per-method summaries.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{default_zeta, detect, DetectionConfig};
use crate::error::{Error, Result};
use crate::metrics::{abs_k_error, hausdorff_scaled};
use crate::model::{ChangePointSet, PiecewiseVarModel};
use crate::pgl::refine;
use crate::simulate::{scenario_i, scenario_ii, scenario_iii, simulate, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "lowercase")]
pub enum Setting {
    I { n: usize },
    Ii { n: usize, p: usize, rho: f64 },
    Iii { n: usize, p: usize },
}

impl Setting {
    pub fn model(&self) -> Result<PiecewiseVarModel> {
        match *self {
            Setting::I { n } => scenario_i(n),
            Setting::Ii { n, p, rho } => scenario_ii(n, p, rho),
            Setting::Iii { n, p } => scenario_iii(n, p),
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            Setting::I { n } | Setting::Ii { n, .. } | Setting::Iii { n, .. } => n,
        }
    }

    pub fn p(&self) -> usize {
        match *self {
            Setting::I { .. } => 10,
            Setting::Ii { p, .. } | Setting::Iii { p, .. } => p,
        }
    }

    /// Row label, e.g. `(ii) rho=0.25`.
    pub fn label(&self) -> String {
        match *self {
            Setting::I { n } => format!("(i) n={n}"),
            Setting::Ii { rho, .. } => format!("(ii) rho={rho}"),
            Setting::Iii { p, .. } => format!("(iii) p={p}"),
        }
    }

    /// Default detector tuning for this setting's `(n, p)`.
    pub fn default_config(&self) -> DetectionConfig {
        DetectionConfig::defaults_for(self.n(), self.p())
    }

    pub fn default_zeta(&self) -> f64 {
        default_zeta(self.p())
    }
}

/// Seed of replication `index` (0-based): the `index + 1`-th output of a
/// SplitMix64 generator started at `master`. Adding replications never
/// changes earlier seeds.
pub fn replication_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Standard error of the mean, `sd / sqrt(count)`; 0 for one value.
    pub se: f64,
    /// Sample standard deviation; 0 for one value.
    pub sd: f64,
    pub count: usize,
}

impl Aggregate {
    /// Summary of `values`, summed in the given order.
    pub fn of(values: &[f64]) -> Self {
        let m = values.len();
        if m == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                sd: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let sd = if m > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            se: sd / (m as f64).sqrt(),
            sd,
            count: m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodSummary {
    pub hausdorff: Aggregate,
    pub k_error: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub dp_points: ChangePointSet,
    pub pgl_points: ChangePointSet,
    pub dp_hausdorff: f64,
    pub pgl_hausdorff: f64,
    pub k_error: usize,
    pub nonconverged_fits: usize,
    pub dp_seconds: f64,
    pub pgl_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub index: usize,
    pub seed: u64,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    #[serde(flatten)]
    pub setting: Setting,
    pub label: String,
    pub reps: usize,
    pub seed: u64,
    pub config: DetectionConfig,
    pub zeta: f64,
    pub dp: MethodSummary,
    pub pgl: MethodSummary,
    pub replications: Vec<Replication>,
    pub failures: Vec<ReplicationFailure>,
    pub dp_seconds: Aggregate,
    pub pgl_seconds: Aggregate,
    pub wall_seconds: f64,
}

/// One detect-then-refine run on a fresh draw of `model`.
pub fn run_replication(
    model: &PiecewiseVarModel,
    index: usize,
    seed: u64,
    config: &DetectionConfig,
    zeta: f64,
) -> Result<Replication> {
    let series = simulate(model, &SimulationConfig::with_seed(seed))?;
    let truth = model.truth();
    let t0 = Instant::now();
    let det = detect(&series, config)?;
    let dp_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let refined = refine(&series, &det.change_points, config.lag, zeta, &config.solver)?;
    let pgl_seconds = t1.elapsed().as_secs_f64();
    let n = series.n();
    Ok(Replication {
        index,
        seed,
        dp_hausdorff: hausdorff_scaled(&det.change_points, &truth, n)?,
        pgl_hausdorff: hausdorff_scaled(&refined, &truth, n)?,
        k_error: abs_k_error(&det.change_points, &truth),
        nonconverged_fits: det.nonconverged_fits,
        dp_points: det.change_points,
        pgl_points: refined,
        dp_seconds,
        pgl_seconds,
    })
}

/// Runs `reps` replications of `setting` in parallel.
pub fn run_setting(
    setting: Setting,
    reps: usize,
    seed: u64,
    config: &DetectionConfig,
    zeta: f64,
) -> Result<BenchResult> {
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    config.validate()?;
    let model = setting.model()?;
    if model.truth().is_empty() {
        return Err(Error::invalid("benchmark settings need at least one change point"));
    }
    let start = Instant::now();
    let outcomes: Vec<(usize, u64, Result<Replication>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = replication_seed(seed, r);
            (r, s, run_replication(&model, r, s, config, zeta))
        })
        .collect();
    let wall_seconds = start.elapsed().as_secs_f64();

    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (index, seed, out) in outcomes {
        match out {
            Ok(rep) => replications.push(rep),
            Err(e) => failures.push(ReplicationFailure {
                index,
                seed,
                kind: e.kind(),
                message: e.to_string(),
            }),
        }
    }
    let col = |f: &dyn Fn(&Replication) -> f64| -> Aggregate {
        Aggregate::of(&replications.iter().map(f).collect::<Vec<_>>())
    };
    // refinement keeps the number of points, so both methods share |K^ - K|
    let k_error = col(&|r| r.k_error as f64);
    Ok(BenchResult {
        setting,
        label: setting.label(),
        reps,
        seed,
        config: *config,
        zeta,
        dp: MethodSummary {
            hausdorff: col(&|r| r.dp_hausdorff),
            k_error,
        },
        pgl: MethodSummary {
            hausdorff: col(&|r| r.pgl_hausdorff),
            k_error,
        },
        dp_seconds: col(&|r| r.dp_seconds),
        pgl_seconds: col(&|r| r.pgl_seconds),
        replications,
        failures,
        wall_seconds,
    })
}
