//! Threat models: who trains the attacker's score function, which test
//! points get perturbed, and what the user's detector sees afterwards.
//!
//! The attacker-side half of each scheme is a separate function whose
//! arguments are exactly what that attacker may see. The surrogate attacker
//! gets the test rows and a label-query handle; the direct attacker gets an
//! [`UnlabeledSplit`]; only the oracle attacker is handed ground truth.

use crate::attacks::{attack_point, AttackOutcome, AttackParams};
use crate::detector::{
    fit_and_detect, DataSplit, DetectionResult, DetectorConfig, LabelQuery, UnlabeledSplit, UserDetector,
};
use crate::error::{invalid, Error, Result};
use crate::learners::{
    train_score_function, DecisionFn, HardLabelOracle, LabeledDataset, LearnerConfig, ScoreModel, Scorer,
};
use crate::matrix::Matrix;
use crate::stats::Comparator;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Oracle,
    Surrogate,
    Direct,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Oracle => "oracle",
            SchemeKind::Surrogate => "surrogate",
            SchemeKind::Direct => "direct",
        }
    }
}

/// How many points the attacker perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRule {
    Fixed(usize),
    /// `floor(gamma * (m - R))`, `gamma` in (0, 1].
    Intensity(f64),
}

impl SizeRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SizeRule::Intensity(g) if !(g > 0.0 && g <= 1.0) => Err(invalid(format!("intensity {g} outside (0, 1]"))),
            _ => Ok(()),
        }
    }

    /// Attack-set size given `candidates` eligible points.
    pub fn resolve(&self, candidates: usize) -> Result<usize> {
        self.validate()?;
        match *self {
            SizeRule::Fixed(m_a) if m_a > candidates => Err(invalid(format!(
                "attack size {m_a} exceeds the {candidates} eligible points"
            ))),
            SizeRule::Fixed(m_a) => Ok(m_a),
            SizeRule::Intensity(g) => Ok((g * candidates as f64).floor() as usize),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// First true nulls in test order.
    FixedNullIndices,
    /// True nulls closest to the attacker's decision boundary.
    NearestBoundaryNulls,
    /// Unrejected points closest to the attacker's decision boundary.
    NearestBoundaryUnrejected,
    /// Unrejected points with the smallest local p-values.
    SmallestPvaluesUnrejected,
    RandomUnrejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub scheme: SchemeKind,
    /// Test indices, in attack order.
    pub attack_set: Vec<usize>,
    pub size_rule: SizeRule,
    pub selection_rule: SelectionRule,
}

/// The attacker's product: the modified test block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackerOutput {
    pub attacked_test: Matrix,
    pub plan: AttackPlan,
    pub per_point: Vec<AttackOutcome>,
    pub warnings: Vec<String>,
}

impl AttackerOutput {
    pub fn queries_used(&self) -> usize {
        self.per_point.iter().map(|o| o.queries_used).sum()
    }

    pub fn successes(&self) -> usize {
        self.per_point.iter().filter(|o| o.success).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub attack: AttackerOutput,
    /// The user's detector re-run on the attacked test block.
    pub post_detection: DetectionResult,
}

/// Orders candidate indices so that points the oracle labels 0 come first,
/// highest score first, ties by index.
fn boundary_order(candidates: &[usize], test: &Matrix, g: &ScoreModel) -> Result<Vec<usize>> {
    let mut keyed = candidates
        .iter()
        .map(|&i| g.score(test.row(i)).map(|s| (s, i)))
        .collect::<Result<Vec<_>>>()?;
    let oracle = DecisionFn::new(g);
    let threshold = oracle.threshold();
    keyed.sort_by(|a, b| {
        (a.0 >= threshold)
            .cmp(&(b.0 >= threshold))
            .then(b.0.total_cmp(&a.0))
            .then(a.1.cmp(&b.1))
    });
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Attack every row of `attack_set` in parallel. Rows the oracle already
/// labels 1 pass through untouched.
fn attack_rows<O: HardLabelOracle + ?Sized>(
    test: &Matrix,
    attack_set: &[usize],
    oracle: &O,
    init_targets: &Matrix,
    params: &AttackParams,
) -> Result<(Matrix, Vec<AttackOutcome>)> {
    let outcomes = attack_set
        .par_iter()
        .map(|&i| {
            let original = test.row(i);
            if oracle.decide(original)? {
                return Ok(AttackOutcome::pass_through(original, 1));
            }
            attack_point(original, oracle, init_targets, params, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut attacked = test.clone();
    for (&i, out) in attack_set.iter().zip(&outcomes) {
        if out.success {
            attacked.row_mut(i).copy_from_slice(&out.perturbed);
        }
    }
    Ok((attacked, outcomes))
}

pub fn check_selection(scheme: SchemeKind, rule: SelectionRule) -> Result<()> {
    use SelectionRule::*;
    let ok = match scheme {
        SchemeKind::Oracle => matches!(rule, FixedNullIndices | NearestBoundaryNulls),
        SchemeKind::Surrogate => matches!(rule, NearestBoundaryUnrejected | RandomUnrejected),
        SchemeKind::Direct => matches!(rule, SmallestPvaluesUnrejected | RandomUnrejected),
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!(
            "selection rule {rule:?} is not available to the {} scheme",
            scheme.name()
        )))
    }
}

/// Attacker who knows which test points are nulls. `g` separates every
/// null sample (training, calibration and test) from the test novelties.
pub fn oracle_attack(
    split: &DataSplit,
    size: SizeRule,
    selection: SelectionRule,
    attacker_learner: &LearnerConfig,
    params: &AttackParams,
    attacker_seed: u64,
) -> Result<AttackerOutput> {
    check_selection(SchemeKind::Oracle, selection)?;
    let truth = split
        .ground_truth()
        .ok_or_else(|| invalid("the oracle scheme needs ground truth"))?;
    let test = split.test();
    let nulls: Vec<usize> = (0..truth.len()).filter(|&i| !truth[i]).collect();
    let novel: Vec<usize> = (0..truth.len()).filter(|&i| truth[i]).collect();
    let m_a = size.resolve(nulls.len())?;
    let plan = |attack_set| AttackPlan {
        scheme: SchemeKind::Oracle,
        attack_set,
        size_rule: size,
        selection_rule: selection,
    };
    if m_a == 0 {
        return Ok(AttackerOutput {
            attacked_test: test.clone(),
            plan: plan(Vec::new()),
            per_point: Vec::new(),
            warnings: Vec::new(),
        });
    }
    let test_nulls = test.select_rows(&nulls);
    let test_novel = test.select_rows(&novel);
    let data = LabeledDataset::from_blocks(
        &[split.train_null(), split.calibration_null(), &test_nulls],
        &[&test_novel],
    )?;
    let g = train_score_function(&data, attacker_learner, attacker_seed)?;
    let attack_set = match selection {
        SelectionRule::FixedNullIndices => nulls[..m_a].to_vec(),
        _ => boundary_order(&nulls, test, &g)?[..m_a].to_vec(),
    };
    let (attacked_test, per_point) = attack_rows(test, &attack_set, &DecisionFn::new(&g), &test_novel, params)?;
    Ok(AttackerOutput {
        attacked_test,
        plan: plan(attack_set),
        per_point,
        warnings: Vec::new(),
    })
}

/// Attacker who only sees the test rows and may query the detector's
/// labels for them once.
pub fn surrogate_attack<Q: LabelQuery + ?Sized>(
    test: &Matrix,
    query: &Q,
    size: SizeRule,
    selection: SelectionRule,
    attacker_learner: &LearnerConfig,
    params: &AttackParams,
    attacker_seed: u64,
) -> Result<AttackerOutput> {
    check_selection(SchemeKind::Surrogate, selection)?;
    let pseudo = query.query_labels(test)?;
    let rejected: Vec<usize> = (0..pseudo.len()).filter(|&i| pseudo[i]).collect();
    let unrejected: Vec<usize> = (0..pseudo.len()).filter(|&i| !pseudo[i]).collect();
    if rejected.is_empty() || unrejected.is_empty() {
        return Err(Error::DegenerateSurrogate(format!(
            "pseudo-labels are all {}",
            if rejected.is_empty() { 0 } else { 1 }
        )));
    }
    let m_a = size.resolve(unrejected.len())?;
    let labels: Vec<u8> = pseudo.iter().map(|&b| b as u8).collect();
    let g = train_score_function(
        &LabeledDataset::new(test.clone(), labels)?,
        attacker_learner,
        attacker_seed,
    )?;
    let attack_set = match selection {
        SelectionRule::RandomUnrejected => {
            let mut rng = crate::seed::rng(attacker_seed, &[1]);
            let mut pick = unrejected.clone();
            pick.shuffle(&mut rng);
            pick.truncate(m_a);
            pick
        }
        _ => boundary_order(&unrejected, test, &g)?[..m_a].to_vec(),
    };
    let targets = test.select_rows(&rejected);
    let (attacked_test, per_point) = attack_rows(test, &attack_set, &DecisionFn::new(&g), &targets, params)?;
    Ok(AttackerOutput {
        attacked_test,
        plan: AttackPlan {
            scheme: SchemeKind::Surrogate,
            attack_set,
            size_rule: size,
            selection_rule: selection,
        },
        per_point,
        warnings: Vec::new(),
    })
}

/// Attacker with every sample and the user's configuration but no test
/// labels. Reproduces the detector locally with the inclusive comparator
/// and attacks against the local PU score function.
pub fn direct_attack(
    split: UnlabeledSplit<'_>,
    user_config: &DetectorConfig,
    user_seed: u64,
    size: SizeRule,
    selection: SelectionRule,
    params: &AttackParams,
) -> Result<AttackerOutput> {
    check_selection(SchemeKind::Direct, selection)?;
    let local_cfg = DetectorConfig {
        comparator: Comparator::GreaterOrEqual,
        ..user_config.clone()
    };
    let (s, local) = fit_and_detect(split, &local_cfg, user_seed)?;
    let test = split.test;
    let labels = local.labels();
    let unrejected: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let plan = |attack_set| AttackPlan {
        scheme: SchemeKind::Direct,
        attack_set,
        size_rule: size,
        selection_rule: selection,
    };
    if unrejected.is_empty() {
        let msg = "every test point is rejected locally; nothing to attack".to_string();
        log::warn!("{msg}");
        return Ok(AttackerOutput {
            attacked_test: test.clone(),
            plan: plan(Vec::new()),
            per_point: Vec::new(),
            warnings: vec![msg],
        });
    }
    let m_a = size.resolve(unrejected.len())?;
    let attack_set = match selection {
        SelectionRule::RandomUnrejected => {
            let mut rng = crate::seed::rng(params.seed, &[u64::MAX]);
            let mut pick = unrejected.clone();
            pick.shuffle(&mut rng);
            pick.truncate(m_a);
            pick
        }
        _ => smallest_pvalues(&unrejected, local.pvalues.ranks(), m_a),
    };
    let rejected: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let targets = if rejected.is_empty() {
        test.clone()
    } else {
        test.select_rows(&rejected)
    };
    let (attacked_test, per_point) = attack_rows(test, &attack_set, &DecisionFn::new(&s), &targets, params)?;
    Ok(AttackerOutput {
        attacked_test,
        plan: plan(attack_set),
        per_point,
        warnings: Vec::new(),
    })
}

/// The `count` candidates with the smallest rank, ties by index.
pub fn smallest_pvalues(candidates: &[usize], ranks: &[u32], count: usize) -> Vec<usize> {
    let mut c = candidates.to_vec();
    c.sort_by_key(|&i| (ranks[i], i));
    c.truncate(count);
    c
}

fn finish(user: &UserDetector<'_>, attack: AttackerOutput) -> Result<SchemeResult> {
    let post_detection = user.detect(&attack.attacked_test)?;
    Ok(SchemeResult { attack, post_detection })
}

/// Oracle attack followed by the user's detection run.
pub fn run_oracle_scheme(
    split: &DataSplit,
    user: &UserDetector<'_>,
    size: SizeRule,
    selection: SelectionRule,
    attacker_learner: &LearnerConfig,
    params: &AttackParams,
    attacker_seed: u64,
) -> Result<SchemeResult> {
    let attack = oracle_attack(split, size, selection, attacker_learner, params, attacker_seed)?;
    finish(user, attack)
}

/// Surrogate attack (querying `user`) followed by the user's detection run.
pub fn run_surrogate_scheme(
    test: &Matrix,
    user: &UserDetector<'_>,
    size: SizeRule,
    selection: SelectionRule,
    attacker_learner: &LearnerConfig,
    params: &AttackParams,
    attacker_seed: u64,
) -> Result<SchemeResult> {
    let attack = surrogate_attack(test, user, size, selection, attacker_learner, params, attacker_seed)?;
    finish(user, attack)
}

/// Direct attack followed by the user's detection run.
pub fn run_direct_scheme(
    split: &DataSplit,
    user: &UserDetector<'_>,
    user_seed: u64,
    size: SizeRule,
    selection: SelectionRule,
    params: &AttackParams,
) -> Result<SchemeResult> {
    let attack = direct_attack(split.unlabeled(), user.config(), user_seed, size, selection, params)?;
    finish(user, attack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_rules() {
        assert_eq!(SizeRule::Fixed(3).resolve(5).unwrap(), 3);
        assert!(SizeRule::Fixed(6).resolve(5).is_err());
        assert_eq!(SizeRule::Intensity(1.0).resolve(7).unwrap(), 7);
        assert_eq!(SizeRule::Intensity(0.5).resolve(7).unwrap(), 3);
        assert!(SizeRule::Intensity(0.0).resolve(7).is_err());
        assert!(SizeRule::Intensity(1.5).resolve(7).is_err());
    }

    #[test]
    fn smallest_pvalue_selection() {
        // p = [0.9, 0.3, 0.5] on a denominator of 10
        let ranks = [9, 3, 5];
        assert_eq!(smallest_pvalues(&[0, 1, 2], &ranks, 2), vec![1, 2]);
        assert_eq!(smallest_pvalues(&[0, 2], &[4, 0, 4], 1), vec![0]);
    }

    #[test]
    fn selection_rules_are_scheme_specific() {
        assert!(check_selection(SchemeKind::Oracle, SelectionRule::SmallestPvaluesUnrejected).is_err());
        assert!(check_selection(SchemeKind::Surrogate, SelectionRule::FixedNullIndices).is_err());
        assert!(check_selection(SchemeKind::Direct, SelectionRule::SmallestPvaluesUnrejected).is_ok());
    }
}
