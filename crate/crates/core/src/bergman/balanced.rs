//! Fixed points of the iteration operator at a fixed level k.

use super::{iterate_once, SectionBasis};
use crate::error::{Error, Result};
use crate::potential::{sup_distance, MeasureSetting, SettingKind, Weight};
use crate::GridP1;

#[derive(Debug, Clone)]
pub struct BalancedRun {
    pub weight: Weight,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set for the expanding setting, where fixed points need not exist and
    /// the search is best-effort only.
    pub caveat: Option<String>,
}

/// Search for a fixed point of T by direct iteration. Converges for the
/// fixed-measure and contracting settings; for the expanding setting the
/// run is capped and returned with a caveat instead of an error.
pub fn balanced(
    grid: &GridP1,
    basis: &SectionBasis,
    s: &MeasureSetting,
    start: &Weight,
    tol: f64,
    max_iter: usize,
) -> Result<BalancedRun> {
    let caveat = (s.kind == SettingKind::SMinus).then(|| {
        "expanding setting: fixed points need not exist; search is best-effort and capped".to_string()
    });
    let mut current = start.clone();
    let mut residuals = Vec::new();
    for it in 0..max_iter {
        let next = iterate_once(grid, basis, &current, s)?;
        let r = sup_distance(&next, &current)?;
        residuals.push(r);
        current = next;
        if r < tol {
            return Ok(BalancedRun {
                weight: current,
                residuals,
                iterations: it + 1,
                converged: true,
                caveat,
            });
        }
    }
    if s.kind == SettingKind::SMinus {
        return Ok(BalancedRun {
            weight: current,
            residuals,
            iterations: max_iter,
            converged: false,
            caveat,
        });
    }
    Err(Error::NoConvergence {
        residual: residuals.last().copied().unwrap_or(f64::NAN),
        iterations: max_iter,
    })
}
