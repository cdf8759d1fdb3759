// SPDX-License-Identifier: MIT OR Apache-2.0

//! Localization metrics.

use crate::error::{Error, Result};
use crate::model::ChangePointSet;

fn directed(from: &[usize], to: &[usize]) -> usize {
    from.iter()
        .map(|&a| to.iter().map(|&b| a.abs_diff(b)).min().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Two-sided Hausdorff distance between the sets, divided by `n`.
///
/// An empty estimate scores 1.
pub fn hausdorff_scaled(est: &ChangePointSet, truth: &ChangePointSet, n: usize) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::invalid("true change point set is empty"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if est.is_empty() {
        return Ok(1.0);
    }
    let (a, b) = (est.as_slice(), truth.as_slice());
    Ok(directed(a, b).max(directed(b, a)) as f64 / n as f64)
}

/// `| |est| - |truth| |`.
pub fn abs_k_error(est: &ChangePointSet, truth: &ChangePointSet) -> usize {
    est.len().abs_diff(truth.len())
}
