// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change point localization for piecewise-stable sparse vector
//! autoregressive processes.
//!
//! The detector solves a penalized minimal-partition problem exactly by
//! dynamic programming, where the loss of an interval is the residual sum of
//! squares of a Lasso VAR fit on that interval. Detected points can then be
//! refined one at a time with a two-segment group Lasso search.
//!
//! ```
//! use var_cpd::{detect, refine, simulate, scenario_i, DetectionConfig, SimulationConfig};
//!
//! let model = scenario_i(100)?;
//! let series = simulate(&model, &SimulationConfig::with_seed(1))?;
//! let mut config = DetectionConfig::defaults_for(series.n(), series.p());
//! config.gamma *= 0.3;
//! let found = detect(&series, &config)?;
//! let refined = refine(&series, &found.change_points, 1, 0.15, &config.solver)?;
//! assert_eq!(found.change_points.len(), refined.len());
//! # Ok::<(), var_cpd::Error>(())
//! ```
//!
//! Time points are 1-based in every public type. Interval arguments of the
//! form `(s, e]` are half-open 0-based row positions, so `(s, e]` covers time
//! points `s + 1..=e`.

pub mod bench;
pub mod dp;
pub mod error;
pub mod lasso;
pub mod metrics;
pub mod model;
pub mod pgl;
pub mod simulate;

pub use dp::{brute_force_detect, detect, objective, Detection, DetectionConfig, Partition};
pub use error::{Error, Result};
pub use lasso::{fit_lasso_var, segment_loss, LassoSolution, SolverConfig};
pub use metrics::{abs_k_error, hausdorff_scaled};
pub use model::{
    companion_matrix, is_stable, jump_size, model_summary, ChangePointSet, CoefficientSet,
    ModelSummary, PiecewiseVarModel, Stability, TimeSeries,
};
pub use pgl::{refine, refine_report, RefineReport};
pub use simulate::{scenario_i, scenario_ii, scenario_iii, simulate, SimulationConfig};
