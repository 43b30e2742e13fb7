//! HopSkipJump, l2 variant: estimate the boundary normal from label-only
//! probes, step along it, and project back onto the boundary by bisection.

use super::{boundary_search, random_direction, QueryCounter, StepError};
use crate::error::{invalid, Result};
use crate::learners::HardLabelOracle;
use crate::matrix::{l2_distance, l2_norm};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HsjaParams {
    pub iterations: usize,
    /// Probe count at iteration 1; grows as `sqrt(t)`.
    pub initial_probes: usize,
    pub max_probes: usize,
    /// Bisection tolerance in blend space.
    pub binary_search_tol: f64,
    pub max_step_halvings: usize,
}

impl Default for HsjaParams {
    fn default() -> Self {
        Self {
            iterations: 40,
            initial_probes: 100,
            max_probes: 1000,
            binary_search_tol: 1e-3,
            max_step_halvings: 30,
        }
    }
}

impl HsjaParams {
    pub fn validate(&self) -> Result<()> {
        if self.initial_probes == 0 || self.max_probes < self.initial_probes {
            return Err(invalid("need 1 <= initial_probes <= max_probes"));
        }
        if !(self.binary_search_tol > 0.0 && self.binary_search_tol < 1.0) {
            return Err(invalid("binary_search_tol must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One iteration starting from a label-1 point `current` near the boundary.
/// Returns the new iterate, which is never farther from `original`.
pub fn hopskipjump_step<O: HardLabelOracle + ?Sized>(
    current: &[f64],
    original: &[f64],
    oracle: &QueryCounter<'_, O>,
    rng: &mut impl Rng,
    params: &HsjaParams,
    iteration: usize,
) -> Result<Vec<f64>, StepError> {
    let d = current.len();
    let dist = l2_distance(current, original);
    if dist == 0.0 {
        return Ok(current.to_vec());
    }
    let t = iteration.max(1) as f64;
    let delta = dist / d as f64;
    let probes = ((params.initial_probes as f64 * t.sqrt()) as usize).min(params.max_probes);

    let mut dirs = Vec::with_capacity(probes);
    let mut signs = Vec::with_capacity(probes);
    for _ in 0..probes {
        let u = random_direction(d, rng);
        let z: Vec<f64> = current.iter().zip(&u).map(|(c, v)| c + delta * v).collect();
        let s = if oracle.decide(&z)? { 1.0 } else { -1.0 };
        dirs.push(u);
        signs.push(s);
    }
    let mean_sign = signs.iter().sum::<f64>() / probes as f64;
    let mut grad = vec![0.0; d];
    let centered = mean_sign.abs() < 1.0;
    for (u, s) in dirs.iter().zip(&signs) {
        let w = if centered { s - mean_sign } else { *s };
        for (g, v) in grad.iter_mut().zip(u) {
            *g += w * v;
        }
    }
    let norm = l2_norm(&grad);
    if norm == 0.0 {
        return Ok(current.to_vec());
    }
    grad.iter_mut().for_each(|g| *g /= norm);

    let mut step = 2.0 * dist / (t + 1.0).sqrt();
    let mut candidate = None;
    for _ in 0..=params.max_step_halvings {
        let z: Vec<f64> = current.iter().zip(&grad).map(|(c, g)| c + step * g).collect();
        if oracle.decide(&z)? {
            candidate = Some(z);
            break;
        }
        step /= 2.0;
    }
    let Some(candidate) = candidate else {
        return Ok(current.to_vec());
    };
    let next = boundary_search(original, &candidate, oracle, params.binary_search_tol)?;
    if l2_distance(&next, original) <= dist {
        Ok(next)
    } else {
        Ok(current.to_vec())
    }
}
