// SPDX-License-Identifier: MIT OR Apache-2.0

//! Tuning resolution: command-line flags over a JSON config file over the
//! defaults computed from the series shape.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use var_cpd::dp::{default_zeta, DetectionConfig};

use crate::error::{CliError, Result};

/// Every tunable, each optional. Used both for flags and for the config file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub lag: Option<usize>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub zeta: Option<f64>,
    pub min_len: Option<usize>,
    pub step: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Fields of `self`, falling back to `other`.
    pub fn or(self, other: Overrides) -> Overrides {
        Overrides {
            lag: self.lag.or(other.lag),
            lambda: self.lambda.or(other.lambda),
            gamma: self.gamma.or(other.gamma),
            zeta: self.zeta.or(other.zeta),
            min_len: self.min_len.or(other.min_len),
            step: self.step.or(other.step),
            tol: self.tol.or(other.tol),
            max_iter: self.max_iter.or(other.max_iter),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub detection: DetectionConfig,
    pub zeta: f64,
}

pub fn resolve_config(n: usize, p: usize, flags: Overrides, file: Option<&Path>) -> Result<Resolved> {
    let file = match file {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    let o = flags.or(file);
    let mut c = DetectionConfig::defaults_with_lag(n, p, o.lag.unwrap_or(1));
    if let Some(v) = o.lambda {
        c.lambda = v;
    }
    if let Some(v) = o.gamma {
        c.gamma = v;
    }
    if let Some(v) = o.min_len {
        c.min_len = v;
    }
    if let Some(v) = o.step {
        c.step = v;
    }
    if let Some(v) = o.tol {
        c.solver.tol = v;
    }
    if let Some(v) = o.max_iter {
        c.solver.max_iter = v;
    }
    c.validate()?;
    let zeta = o.zeta.unwrap_or_else(|| default_zeta(p));
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(CliError::Usage(format!("zeta must be >= 0, got {zeta}")));
    }
    Ok(Resolved { detection: c, zeta })
}
