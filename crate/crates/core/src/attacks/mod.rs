//! Decision-based perturbation search.
//!
//! Both algorithms see the model only through [`HardLabelOracle`] and a
//! query budget. They start from the closest known label-1 point, bisect
//! back towards the original to land on the decision boundary, and then walk
//! along the boundary to shrink the l2 distance to the original while
//! staying on the label-1 side.

mod boundary;
mod hsja;

pub use boundary::{boundary_step, BoundaryParams, BoundaryState};
pub use hsja::{hopskipjump_step, HsjaParams};

use crate::error::{invalid, Error, Result};
use crate::learners::HardLabelOracle;
use crate::matrix::{l2_distance, Matrix};
use crate::seed;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackAlgorithm {
    HopSkipJump,
    Boundary,
}

impl AttackAlgorithm {
    pub fn short_name(self) -> &'static str {
        match self {
            AttackAlgorithm::HopSkipJump => "hop.",
            AttackAlgorithm::Boundary => "bound.",
        }
    }
}

/// Tunables of one attack run. Starting points are passed separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackParams {
    pub algorithm: AttackAlgorithm,
    /// Hard cap on oracle calls for one point, including initialization.
    pub max_queries: usize,
    pub hsja: HsjaParams,
    pub boundary: BoundaryParams,
    pub seed: u64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            algorithm: AttackAlgorithm::HopSkipJump,
            max_queries: 25_000,
            hsja: HsjaParams::default(),
            boundary: BoundaryParams::default(),
            seed: 0,
        }
    }
}

pub const MIN_QUERY_BUDGET: usize = 100;

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_queries < MIN_QUERY_BUDGET {
            return Err(invalid(format!("max_queries must be at least {MIN_QUERY_BUDGET}")));
        }
        self.hsja.validate()?;
        self.boundary.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub perturbed: Vec<f64>,
    /// The decision of `perturbed` differs from that of the original.
    pub success: bool,
    pub queries_used: usize,
    pub final_l2: f64,
    /// l2 distance to the original after initialization and after every
    /// iteration.
    pub trajectory: Vec<f64>,
}

impl AttackOutcome {
    /// The original, untouched.
    pub fn pass_through(original: &[f64], queries_used: usize) -> Self {
        Self {
            perturbed: original.to_vec(),
            success: false,
            queries_used,
            final_l2: 0.0,
            trajectory: Vec::new(),
        }
    }
}

/// Why a single step stopped early.
#[derive(Debug, Clone, PartialEq)]
pub enum StepError {
    BudgetExhausted,
    Oracle(Error),
}

/// Oracle wrapper that counts every call and refuses to exceed its budget.
pub struct QueryCounter<'a, O: ?Sized> {
    oracle: &'a O,
    used: Cell<usize>,
    limit: usize,
}

impl<'a, O: HardLabelOracle + ?Sized> QueryCounter<'a, O> {
    pub fn new(oracle: &'a O, limit: usize) -> Self {
        Self {
            oracle,
            used: Cell::new(0),
            limit,
        }
    }

    pub fn used(&self) -> usize {
        self.used.get()
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.used.get()
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn decide(&self, z: &[f64]) -> std::result::Result<bool, StepError> {
        if self.used.get() >= self.limit {
            return Err(StepError::BudgetExhausted);
        }
        self.used.set(self.used.get() + 1);
        self.oracle.decide(z).map_err(StepError::Oracle)
    }
}

/// Bisect the segment from `original` (label 0) to `adversarial` (label 1)
/// until its length in blend space is below `tol`; returns the label-1 end.
pub(crate) fn boundary_search<O: HardLabelOracle + ?Sized>(
    original: &[f64],
    adversarial: &[f64],
    oracle: &QueryCounter<'_, O>,
    tol: f64,
) -> std::result::Result<Vec<f64>, StepError> {
    let blend = |t: f64| -> Vec<f64> { original.iter().zip(adversarial).map(|(o, a)| o + t * (a - o)).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if oracle.decide(&blend(mid))? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(blend(hi))
}

/// Attack one point that the oracle currently labels 0.
///
/// `stream` keys the random stream, so attacks on different points are
/// independent of the order they run in. If no starting point is labelled 1
/// the outcome is a pass-through with `success = false`.
pub fn attack_point<O: HardLabelOracle + ?Sized>(
    original: &[f64],
    oracle: &O,
    init_targets: &Matrix,
    params: &AttackParams,
    stream: u64,
) -> Result<AttackOutcome> {
    params.validate()?;
    if original.len() != oracle.dim() {
        return Err(invalid(format!(
            "point has dimension {}, oracle expects {}",
            original.len(),
            oracle.dim()
        )));
    }
    if init_targets.rows() == 0 {
        return Err(Error::Initialization("no starting points supplied".into()));
    }
    if init_targets.cols() != original.len() {
        return Err(Error::Initialization("starting points have the wrong dimension".into()));
    }
    let counter = QueryCounter::new(oracle, params.max_queries);
    if counter.decide(original).map_err(step_to_error)? {
        return Err(invalid("point is already labelled 1"));
    }

    let mut order: Vec<(f64, usize)> = init_targets
        .iter_rows()
        .enumerate()
        .map(|(i, r)| (l2_distance(r, original), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut start = None;
    for &(_, i) in &order {
        match counter.decide(init_targets.row(i)) {
            Ok(true) => {
                start = Some(init_targets.row(i).to_vec());
                break;
            }
            Ok(false) => continue,
            Err(StepError::BudgetExhausted) => break,
            Err(StepError::Oracle(e)) => return Err(e),
        }
    }
    let Some(start) = start else {
        return Ok(AttackOutcome::pass_through(original, counter.used()));
    };

    let tol = match params.algorithm {
        AttackAlgorithm::HopSkipJump => params.hsja.binary_search_tol,
        AttackAlgorithm::Boundary => params.boundary.init_search_tol,
    };
    let mut current = match boundary_search(original, &start, &counter, tol) {
        Ok(x) => x,
        Err(StepError::BudgetExhausted) => start,
        Err(StepError::Oracle(e)) => return Err(e),
    };
    let mut trajectory = vec![l2_distance(&current, original)];
    let mut rng = seed::rng(params.seed, &[stream]);

    match params.algorithm {
        AttackAlgorithm::HopSkipJump => {
            for t in 1..=params.hsja.iterations {
                match hopskipjump_step(&current, original, &counter, &mut rng, &params.hsja, t) {
                    Ok(next) => current = next,
                    Err(StepError::BudgetExhausted) => break,
                    Err(StepError::Oracle(e)) => return Err(e),
                }
                trajectory.push(l2_distance(&current, original));
            }
        }
        AttackAlgorithm::Boundary => {
            let mut state = BoundaryState::new(&params.boundary);
            for _ in 0..params.boundary.steps {
                match boundary_step(&mut state, &current, original, &counter, &mut rng) {
                    Ok(next) => current = next,
                    Err(StepError::BudgetExhausted) => break,
                    Err(StepError::Oracle(e)) => return Err(e),
                }
                trajectory.push(l2_distance(&current, original));
            }
        }
    }

    Ok(AttackOutcome {
        final_l2: l2_distance(&current, original),
        perturbed: current,
        success: true,
        queries_used: counter.used(),
        trajectory,
    })
}

fn step_to_error(e: StepError) -> Error {
    match e {
        StepError::BudgetExhausted => invalid("query budget exhausted"),
        StepError::Oracle(e) => e,
    }
}

/// Random unit vector.
pub(crate) fn random_direction(dim: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = crate::matrix::l2_norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// 1{w·z + b >= 0}, counting calls.
    struct Halfspace {
        w: Vec<f64>,
        b: f64,
        calls: AtomicUsize,
    }

    impl Halfspace {
        fn new(w: Vec<f64>, b: f64) -> Self {
            Self {
                w,
                b,
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl HardLabelOracle for Halfspace {
        fn dim(&self) -> usize {
            self.w.len()
        }
        fn decide(&self, z: &[f64]) -> Result<bool> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            Ok(self.w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.b >= 0.0)
        }
    }

    struct Never;

    impl HardLabelOracle for Never {
        fn dim(&self) -> usize {
            2
        }
        fn decide(&self, _: &[f64]) -> Result<bool> {
            Ok(false)
        }
    }

    fn one(v: &[f64]) -> Matrix {
        Matrix::from_rows(&[v]).unwrap()
    }

    #[test]
    fn one_dimensional_boundary_is_found() {
        let oracle = Halfspace::new(vec![1.0], 0.0);
        let params = AttackParams {
            max_queries: 1000,
            ..AttackParams::default()
        };
        let out = attack_point(&[-1.0], &oracle, &one(&[3.0]), &params, 0).unwrap();
        assert!(out.success);
        assert!(out.perturbed[0] >= 0.0);
        assert!(out.perturbed[0].abs() <= 0.01, "{:?}", out.perturbed);
        assert!(oracle.decide(&out.perturbed).unwrap());
    }

    #[test]
    fn constant_oracle_passes_through() {
        let params = AttackParams::default();
        let out = attack_point(&[0.0, 0.0], &Never, &one(&[1.0, 1.0]), &params, 0).unwrap();
        assert!(!out.success);
        assert_eq!(out.perturbed, vec![0.0, 0.0]);
    }

    #[test]
    fn label_one_origin_is_rejected() {
        let oracle = Halfspace::new(vec![1.0], 0.0);
        let err = attack_point(&[1.0], &oracle, &one(&[3.0]), &AttackParams::default(), 0);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn empty_start_set_is_an_initialization_error() {
        let oracle = Halfspace::new(vec![1.0], 0.0);
        let err = attack_point(&[-1.0], &oracle, &Matrix::empty(1), &AttackParams::default(), 0);
        assert!(matches!(err, Err(Error::Initialization(_))));
    }

    #[test]
    fn small_budgets_are_invalid() {
        let p = AttackParams {
            max_queries: 99,
            ..AttackParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn query_accounting_is_exact_and_capped() {
        for algorithm in [AttackAlgorithm::HopSkipJump, AttackAlgorithm::Boundary] {
            for budget in [100, 777, 5000] {
                let oracle = Halfspace::new(vec![1.0, 2.0, -1.0], -1.0);
                let params = AttackParams {
                    algorithm,
                    max_queries: budget,
                    ..AttackParams::default()
                };
                let out = attack_point(&[0.0, 0.0, 0.0], &oracle, &one(&[3.0, 3.0, 0.0]), &params, 1).unwrap();
                assert_eq!(out.queries_used, oracle.calls.load(Ordering::Relaxed));
                assert!(out.queries_used <= budget);
                assert!(out.success);
            }
        }
    }

    #[test]
    fn trajectories_never_increase() {
        for algorithm in [AttackAlgorithm::HopSkipJump, AttackAlgorithm::Boundary] {
            let oracle = Halfspace::new(vec![0.3, -1.0, 0.5, 0.2], -2.0);
            let params = AttackParams {
                algorithm,
                ..AttackParams::default()
            };
            let out = attack_point(&[0.0; 4], &oracle, &one(&[5.0, -5.0, 5.0, 5.0]), &params, 3).unwrap();
            for w in out.trajectory.windows(2) {
                assert!(w[1] <= w[0], "{algorithm:?}: {} -> {}", w[0], w[1]);
            }
        }
    }
}
