//! Conformal p-values, the Benjamini–Hochberg step-up procedure, and the
//! per-replicate error metrics.
//!
//! Conformal p-values are kept as exact integer ranks over a shared
//! denominator `n_cal + 1`, so a p-value is always `(1 + c) / (n_cal + 1)`
//! for an integer count `c`. Comparisons inside BH are done on those ranks
//! rather than on rounded floats, which keeps ties between equal p-values
//! exact.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// How a calibration score is compared with the test score when counting
/// "more extreme" calibration points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// Count calibration scores strictly greater than the test score.
    #[default]
    Greater,
    /// Count calibration scores greater than or equal to the test score.
    GreaterOrEqual,
}

impl Comparator {
    #[inline]
    fn counts(self, calibration: f64, test: f64) -> bool {
        match self {
            Comparator::Greater => calibration > test,
            Comparator::GreaterOrEqual => calibration >= test,
        }
    }
}

/// A single conformal p-value `rank / denom` with `1 <= rank <= denom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PValue {
    rank: u32,
    denom: u32,
}

impl PValue {
    pub fn new(rank: u32, denom: u32) -> Result<Self> {
        if denom == 0 || rank == 0 || rank > denom {
            return Err(invalid(format!("p-value {rank}/{denom} outside (0, 1]")));
        }
        Ok(Self { rank, denom })
    }

    /// Integer rank `(n_cal + 1) * p`.
    pub fn rank(self) -> u32 {
        self.rank
    }

    pub fn denom(self) -> u32 {
        self.denom
    }

    pub fn value(self) -> f64 {
        self.rank as f64 / self.denom as f64
    }
}

impl PartialOrd for PValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PValue {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.rank as u64 * other.denom as u64;
        let rhs = other.rank as u64 * self.denom as u64;
        lhs.cmp(&rhs)
    }
}

/// Conformal p-values of a test block, all sharing one denominator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PValueVector {
    ranks: Vec<u32>,
    denom: u32,
}

impl PValueVector {
    pub fn new(ranks: Vec<u32>, denom: u32) -> Result<Self> {
        if denom == 0 {
            return Err(invalid("p-value denominator must be positive"));
        }
        if let Some(bad) = ranks.iter().find(|&&r| r == 0 || r > denom) {
            return Err(invalid(format!("p-value rank {bad} outside [1, {denom}]")));
        }
        Ok(Self { ranks, denom })
    }

    /// Build from values on the grid `k / denom`. Values off the grid are
    /// rejected.
    pub fn from_grid(values: &[f64], denom: u32) -> Result<Self> {
        let ranks = values
            .iter()
            .map(|&v| {
                let r = (v * denom as f64).round();
                if ((r / denom as f64) - v).abs() > 1e-12 {
                    Err(invalid(format!("p-value {v} is not a multiple of 1/{denom}")))
                } else {
                    Ok(r as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ranks, denom)
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn denom(&self) -> u32 {
        self.denom
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn get(&self, i: usize) -> PValue {
        PValue {
            rank: self.ranks[i],
            denom: self.denom,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.ranks.iter().map(|&r| r as f64 / self.denom as f64).collect()
    }

    /// `p_i <= alpha * t / m`, evaluated without dividing.
    #[inline]
    fn at_most(&self, i: usize, alpha: f64, t: usize, m: usize) -> bool {
        let lhs = self.ranks[i] as f64 * m as f64;
        let rhs = alpha * (t as f64 * self.denom as f64);
        lhs <= rhs
    }
}

/// One conformal p-value: `(1 + #{i : cal_i ⋗ test}) / (n_cal + 1)`.
pub fn conformal_pvalue(calibration: &[f64], test: f64, cmp: Comparator) -> Result<PValue> {
    if calibration.is_empty() {
        return Err(invalid("calibration set is empty"));
    }
    if !test.is_finite() || calibration.iter().any(|s| !s.is_finite()) {
        return Err(invalid("non-finite score"));
    }
    let count = calibration.iter().filter(|&&c| cmp.counts(c, test)).count();
    PValue::new(1 + count as u32, calibration.len() as u32 + 1)
}

/// Conformal p-values for a whole test block against one calibration set.
pub fn conformal_pvalues(calibration: &[f64], tests: &[f64], cmp: Comparator) -> Result<PValueVector> {
    if calibration.is_empty() {
        return Err(invalid("calibration set is empty"));
    }
    if tests.iter().chain(calibration).any(|s| !s.is_finite()) {
        return Err(invalid("non-finite score"));
    }
    let mut sorted = calibration.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let ranks = tests
        .iter()
        .map(|&t| {
            // number of calibration scores that are not counted
            let below = match cmp {
                Comparator::Greater => sorted.partition_point(|&c| c <= t),
                Comparator::GreaterOrEqual => sorted.partition_point(|&c| c < t),
            };
            (1 + n - below) as u32
        })
        .collect();
    PValueVector::new(ranks, n as u32 + 1)
}

/// Outcome of the Benjamini–Hochberg procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    /// Step-up index τ; equals the number of rejections.
    pub threshold_index: usize,
    pub rejected: Vec<bool>,
    pub alpha: f64,
}

impl BhResult {
    pub fn rejections(&self) -> usize {
        self.threshold_index
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Step-up search shared by the rational and float entry points. `order`
/// sorts indices by ascending p-value (ties by index); `at_most(i, t)` tests
/// `p_i <= alpha * t / m`.
fn step_up(m: usize, order: &[usize], at_most: impl Fn(usize, usize) -> bool) -> (usize, Vec<bool>) {
    let tau = (1..=m).rev().find(|&t| at_most(order[t - 1], t)).unwrap_or(0);
    let mut rejected = vec![false; m];
    if tau > 0 {
        for (i, r) in rejected.iter_mut().enumerate() {
            *r = at_most(i, tau);
        }
    }
    (tau, rejected)
}

/// Benjamini–Hochberg at level `alpha` on exact conformal p-values.
pub fn benjamini_hochberg(pvalues: &PValueVector, alpha: f64) -> Result<BhResult> {
    check_alpha(alpha)?;
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (pvalues.ranks[i], i));
    let (threshold_index, rejected) = step_up(m, &order, |i, t| pvalues.at_most(i, alpha, t, m));
    Ok(BhResult {
        threshold_index,
        rejected,
        alpha,
    })
}

/// Benjamini–Hochberg on arbitrary p-values in (0, 1].
pub fn benjamini_hochberg_f64(pvalues: &[f64], alpha: f64) -> Result<BhResult> {
    check_alpha(alpha)?;
    if let Some(p) = pvalues.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(invalid(format!("p-value {p} outside (0, 1]")));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let (threshold_index, rejected) = step_up(m, &order, |i, t| pvalues[i] * m as f64 <= alpha * t as f64);
    Ok(BhResult {
        threshold_index,
        rejected,
        alpha,
    })
}

/// Discovery counts of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// False discoveries.
    pub v: usize,
    /// Total rejections.
    pub r: usize,
    pub m0: usize,
    pub m1: usize,
}

impl ConfusionCounts {
    pub fn new(v: usize, r: usize, m0: usize, m1: usize) -> Result<Self> {
        if v > r || v > m0 || r - v > m1 {
            return Err(invalid(format!("inconsistent counts V={v} R={r} m0={m0} m1={m1}")));
        }
        Ok(Self { v, r, m0, m1 })
    }

    /// Tally rejections against a ground-truth mask (`true` = non-null).
    pub fn from_rejections(rejected: &[bool], non_null: &[bool]) -> Result<Self> {
        if rejected.len() != non_null.len() {
            return Err(invalid("rejection mask and ground truth differ in length"));
        }
        let m1 = non_null.iter().filter(|&&x| x).count();
        let r = rejected.iter().filter(|&&x| x).count();
        let v = rejected.iter().zip(non_null).filter(|(&rej, &alt)| rej && !alt).count();
        Self::new(v, r, rejected.len() - m1, m1)
    }
}

/// False discovery proportion `V / (R ∨ 1)` and power `(R − V) / (m1 ∨ 1)`.
pub fn fdp_and_power(counts: &ConfusionCounts) -> (f64, f64) {
    let fdp = counts.v as f64 / counts.r.max(1) as f64;
    let power = (counts.r - counts.v) as f64 / counts.m1.max(1) as f64;
    (fdp, power)
}

/// Empirical attacked-FDR bound `α + (1/N) Σ_i m_i / (R̃_i ∨ 1)`.
///
/// With a fixed attack size every `attack_sizes[i]` equals `m_a`; with an
/// intensity rule they are the per-replicate attack-set sizes.
pub fn estimate_fdr_upper_bound(alpha: f64, attack_sizes: &[usize], rejection_counts: &[usize]) -> Result<f64> {
    if attack_sizes.len() != rejection_counts.len() {
        return Err(invalid(format!(
            "{} attack sizes but {} rejection counts",
            attack_sizes.len(),
            rejection_counts.len()
        )));
    }
    if attack_sizes.is_empty() {
        return Err(invalid("bound needs at least one replicate"));
    }
    let n = attack_sizes.len() as f64;
    let sum: f64 = attack_sizes
        .iter()
        .zip(rejection_counts)
        .map(|(&a, &r)| a as f64 / r.max(1) as f64)
        .sum();
    Ok(alpha + sum / n)
}
