//! Boundary attack: random walk along the decision boundary with a rotation
//! on the sphere around the original followed by a contraction towards it.
//! Both step sizes adapt to their recent acceptance rates.

use super::{random_direction, QueryCounter, StepError};
use crate::error::{invalid, Result};
use crate::learners::HardLabelOracle;
use crate::matrix::{l2_distance, l2_norm};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryParams {
    pub steps: usize,
    /// Initial orthogonal step, relative to the current distance.
    pub spherical_step: f64,
    /// Initial contraction factor towards the original.
    pub source_step: f64,
    /// Multiplicative step-size adjustment.
    pub step_adaptation: f64,
    /// Outcomes considered before each adjustment.
    pub window: usize,
    pub init_search_tol: f64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            steps: 3000,
            spherical_step: 0.05,
            source_step: 0.05,
            step_adaptation: 1.5,
            window: 30,
            init_search_tol: 1e-3,
        }
    }
}

impl BoundaryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spherical_step > 0.0 && self.source_step > 0.0 && self.source_step < 1.0) {
            return Err(invalid("step sizes must be positive, source_step below 1"));
        }
        if !(self.step_adaptation > 1.0) || self.window == 0 {
            return Err(invalid("step_adaptation must exceed 1 and window be positive"));
        }
        if !(self.init_search_tol > 0.0 && self.init_search_tol < 1.0) {
            return Err(invalid("init_search_tol must lie in (0, 1)"));
        }
        Ok(())
    }
}

const MAX_SPHERICAL: f64 = 1.0;
const MAX_SOURCE: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;

/// Adaptive step sizes and their acceptance history.
#[derive(Debug, Clone)]
pub struct BoundaryState {
    pub spherical_step: f64,
    pub source_step: f64,
    adaptation: f64,
    window: usize,
    spherical: VecDeque<bool>,
    source: VecDeque<bool>,
    recent: VecDeque<bool>,
}

impl BoundaryState {
    pub fn new(params: &BoundaryParams) -> Self {
        Self {
            spherical_step: params.spherical_step,
            source_step: params.source_step,
            adaptation: params.step_adaptation,
            window: params.window,
            spherical: VecDeque::new(),
            source: VecDeque::new(),
            recent: VecDeque::new(),
        }
    }

    /// Fraction of the last `window` spherical candidates that kept label 1.
    pub fn spherical_acceptance(&self) -> Option<f64> {
        (!self.recent.is_empty()).then(|| self.recent.iter().filter(|&&b| b).count() as f64 / self.recent.len() as f64)
    }

    fn record_spherical(&mut self, ok: bool) {
        self.recent.push_back(ok);
        if self.recent.len() > self.window {
            self.recent.pop_front();
        }
        self.spherical.push_back(ok);
        if self.spherical.len() == self.window {
            let rate = rate(&self.spherical);
            if rate > 0.5 {
                self.spherical_step = (self.spherical_step * self.adaptation).min(MAX_SPHERICAL);
            } else if rate < 0.2 {
                self.spherical_step = (self.spherical_step / self.adaptation).max(MIN_STEP);
            }
            self.spherical.clear();
        }
    }

    fn record_source(&mut self, ok: bool) {
        self.source.push_back(ok);
        if self.source.len() == self.window {
            let rate = rate(&self.source);
            if rate > 0.5 {
                self.source_step = (self.source_step * self.adaptation).min(MAX_SOURCE);
            } else if rate < 0.2 {
                self.source_step = (self.source_step / self.adaptation).max(MIN_STEP);
            }
            self.source.clear();
        }
    }
}

fn rate(v: &VecDeque<bool>) -> f64 {
    v.iter().filter(|&&b| b).count() as f64 / v.len() as f64
}

/// One proposal. Returns the new iterate, which is never farther from
/// `original`.
pub fn boundary_step<O: HardLabelOracle + ?Sized>(
    state: &mut BoundaryState,
    current: &[f64],
    original: &[f64],
    oracle: &QueryCounter<'_, O>,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, StepError> {
    let d = current.len();
    let diff: Vec<f64> = current.iter().zip(original).map(|(c, o)| c - o).collect();
    let dist = l2_norm(&diff);
    if dist == 0.0 {
        return Ok(current.to_vec());
    }
    let unit: Vec<f64> = diff.iter().map(|v| v / dist).collect();

    let mut eta = random_direction(d, rng);
    let proj: f64 = eta.iter().zip(&unit).map(|(a, b)| a * b).sum();
    eta.iter_mut().zip(&unit).for_each(|(e, u)| *e -= proj * u);
    let en = l2_norm(&eta);
    if en == 0.0 {
        return Ok(current.to_vec());
    }
    let scale = state.spherical_step * dist / en;
    let mut rotated: Vec<f64> = diff.iter().zip(&eta).map(|(r, e)| r + scale * e).collect();
    let rn = l2_norm(&rotated);
    rotated.iter_mut().for_each(|v| *v *= dist / rn);

    let spherical: Vec<f64> = original.iter().zip(&rotated).map(|(o, r)| o + r).collect();
    let ok = oracle.decide(&spherical)?;
    state.record_spherical(ok);
    if !ok {
        return Ok(current.to_vec());
    }
    let shrink = 1.0 - state.source_step;
    let candidate: Vec<f64> = original.iter().zip(&rotated).map(|(o, r)| o + shrink * r).collect();
    let ok = oracle.decide(&candidate)?;
    state.record_source(ok);
    if ok && l2_distance(&candidate, original) <= dist {
        Ok(candidate)
    } else {
        Ok(current.to_vec())
    }
}
