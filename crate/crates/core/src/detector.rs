//! The adaptive conformal novelty detector: PU-train a score function on
//! training nulls against the mixed calibration+test sample, score, turn
//! scores into conformal p-values, and run BH.

use crate::error::{invalid, Result};
use crate::learners::{train_score_function, LabeledDataset, LearnerConfig, ScoreModel, Scorer};
use crate::matrix::Matrix;
use crate::stats::{benjamini_hochberg, conformal_pvalues, BhResult, Comparator, PValueVector};
use serde::{Deserialize, Serialize};

/// Null samples split into training (`k` rows) and calibration (`n - k`
/// rows), plus the unlabeled test block. Ground truth, when present, is only
/// reachable through [`DataSplit::ground_truth`]; the detection path takes an
/// [`UnlabeledSplit`] that has no such field.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    train_null: Matrix,
    calibration_null: Matrix,
    test: Matrix,
    ground_truth: Option<Vec<bool>>,
}

/// Borrowed view of a split without ground truth.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledSplit<'a> {
    pub train_null: &'a Matrix,
    pub calibration_null: &'a Matrix,
    pub test: &'a Matrix,
}

impl DataSplit {
    pub fn new(
        train_null: Matrix,
        calibration_null: Matrix,
        test: Matrix,
        ground_truth: Option<Vec<bool>>,
    ) -> Result<Self> {
        if train_null.rows() == 0 || calibration_null.rows() == 0 || test.rows() == 0 {
            return Err(invalid("train, calibration and test blocks must be non-empty"));
        }
        let d = train_null.cols();
        if calibration_null.cols() != d || test.cols() != d {
            return Err(invalid("all blocks must share the feature dimension"));
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != test.rows() {
                return Err(invalid(format!(
                    "ground truth has {} entries for {} test rows",
                    gt.len(),
                    test.rows()
                )));
            }
        }
        Ok(Self {
            train_null,
            calibration_null,
            test,
            ground_truth,
        })
    }

    pub fn unlabeled(&self) -> UnlabeledSplit<'_> {
        UnlabeledSplit {
            train_null: &self.train_null,
            calibration_null: &self.calibration_null,
            test: &self.test,
        }
    }

    /// `true` marks a non-null test point.
    pub fn ground_truth(&self) -> Option<&[bool]> {
        self.ground_truth.as_deref()
    }

    pub fn train_null(&self) -> &Matrix {
        &self.train_null
    }

    pub fn calibration_null(&self) -> &Matrix {
        &self.calibration_null
    }

    pub fn test(&self) -> &Matrix {
        &self.test
    }

    /// Total null sample size `n`.
    pub fn n(&self) -> usize {
        self.train_null.rows() + self.calibration_null.rows()
    }

    /// Training-null size `k`.
    pub fn k(&self) -> usize {
        self.train_null.rows()
    }

    pub fn m(&self) -> usize {
        self.test.rows()
    }

    pub fn dim(&self) -> usize {
        self.train_null.cols()
    }

    /// Same nulls and ground truth, different test block.
    pub fn with_test(&self, test: Matrix) -> Result<Self> {
        Self::new(
            self.train_null.clone(),
            self.calibration_null.clone(),
            test,
            self.ground_truth.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub learner: LearnerConfig,
    pub alpha: f64,
    pub comparator: Comparator,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            learner: LearnerConfig::default(),
            alpha: 0.1,
            comparator: Comparator::Greater,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub calibration_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
    pub pvalues: PValueVector,
    pub bh: BhResult,
}

impl DetectionResult {
    /// Rejection labels; `true` = flagged as novelty.
    pub fn labels(&self) -> &[bool] {
        &self.bh.rejected
    }

    pub fn rejections(&self) -> usize {
        self.bh.threshold_index
    }
}

/// Run the detector and also hand back the fitted score function.
pub(crate) fn fit_and_detect(
    split: UnlabeledSplit<'_>,
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<(ScoreModel, DetectionResult)> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(invalid(format!("alpha {} outside (0, 1)", cfg.alpha)));
    }
    let pu = LabeledDataset::from_blocks(&[split.train_null], &[split.calibration_null, split.test])?;
    let model = train_score_function(&pu, &cfg.learner, seed)?;
    let calibration_scores = model.score_rows(split.calibration_null)?;
    let test_scores = model.score_rows(split.test)?;
    let pvalues = conformal_pvalues(&calibration_scores, &test_scores, cfg.comparator)?;
    let bh = benjamini_hochberg(&pvalues, cfg.alpha)?;
    Ok((
        model,
        DetectionResult {
            calibration_scores,
            test_scores,
            pvalues,
            bh,
        },
    ))
}

/// Full detection pass on `split`.
pub fn adadetect(split: UnlabeledSplit<'_>, cfg: &DetectorConfig, seed: u64) -> Result<DetectionResult> {
    fit_and_detect(split, cfg, seed).map(|(_, r)| r)
}

/// Only the rejection labels of a full detection pass.
pub fn query_labels(split: UnlabeledSplit<'_>, cfg: &DetectorConfig, seed: u64) -> Result<Vec<bool>> {
    adadetect(split, cfg, seed).map(|r| r.bh.rejected)
}

/// Label-only access to a deployed detector, as seen by an outside party.
pub trait LabelQuery: Sync {
    fn query_labels(&self, test: &Matrix) -> Result<Vec<bool>>;
}

/// The defending party: owns the null samples and configuration and runs
/// the detector on whatever test block it is handed.
#[derive(Debug, Clone)]
pub struct UserDetector<'a> {
    train_null: &'a Matrix,
    calibration_null: &'a Matrix,
    config: DetectorConfig,
    seed: u64,
}

impl<'a> UserDetector<'a> {
    pub fn new(split: &'a DataSplit, config: DetectorConfig, seed: u64) -> Self {
        Self {
            train_null: &split.train_null,
            calibration_null: &split.calibration_null,
            config,
            seed,
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn detect(&self, test: &Matrix) -> Result<DetectionResult> {
        adadetect(
            UnlabeledSplit {
                train_null: self.train_null,
                calibration_null: self.calibration_null,
                test,
            },
            &self.config,
            self.seed,
        )
    }
}

impl LabelQuery for UserDetector<'_> {
    fn query_labels(&self, test: &Matrix) -> Result<Vec<bool>> {
        self.detect(test).map(|r| r.bh.rejected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(values: &[f64]) -> Matrix {
        Matrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn split_validation() {
        let a = block(&[0.0, 1.0]);
        assert!(DataSplit::new(a.clone(), a.clone(), a.clone(), Some(vec![true])).is_err());
        assert!(DataSplit::new(a.clone(), Matrix::empty(1), a.clone(), None).is_err());
        let two_d = Matrix::zeros(2, 2);
        assert!(DataSplit::new(a.clone(), a.clone(), two_d, None).is_err());
        let s = DataSplit::new(a.clone(), a.clone(), a, Some(vec![false, true])).unwrap();
        assert_eq!((s.n(), s.k(), s.m()), (4, 2, 2));
    }

    #[test]
    fn extreme_separation_rejects_every_novelty() {
        // nulls near 0, novelties far away: every novelty outscores all
        // calibration points and gets p = 1/(n_cal + 1)
        let nulls: Vec<f64> = (0..60).map(|i| (i as f64) / 60.0).collect();
        let train = block(&nulls[..40]);
        let calib = block(&nulls[40..]);
        let mut test_vals: Vec<f64> = (0..10).map(|i| 0.05 + i as f64 / 20.0).collect();
        test_vals.extend((0..10).map(|i| 50.0 + i as f64));
        let truth: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let split = DataSplit::new(train, calib, block(&test_vals), Some(truth.clone())).unwrap();
        let cfg = DetectorConfig::default();
        let res = adadetect(split.unlabeled(), &cfg, 0).unwrap();
        let denom = res.pvalues.denom();
        assert_eq!(denom, 21);
        for i in 10..20 {
            assert_eq!(res.pvalues.get(i).rank(), 1, "novelty {i}");
            assert!(res.labels()[i]);
        }
        assert_eq!(res.labels(), &res.bh.rejected[..]);
        let counts = crate::stats::ConfusionCounts::from_rejections(res.labels(), &truth).unwrap();
        assert_eq!(crate::stats::fdp_and_power(&counts).1, 1.0);
    }

    #[test]
    fn query_is_deterministic_and_matches_user_detector() {
        let nulls: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 50.0).collect();
        let test: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 3.0 + i as f64 } else { 0.5 }).collect();
        let split = DataSplit::new(block(&nulls[..30]), block(&nulls[30..]), block(&test), None).unwrap();
        let cfg = DetectorConfig::default();
        let a = query_labels(split.unlabeled(), &cfg, 4).unwrap();
        let b = query_labels(split.unlabeled(), &cfg, 4).unwrap();
        assert_eq!(a, b);
        let user = UserDetector::new(&split, cfg, 4);
        assert_eq!(user.query_labels(split.test()).unwrap(), a);
    }

    #[test]
    fn bad_alpha_is_rejected() {
        let a = block(&[0.0, 1.0, 2.0]);
        let split = DataSplit::new(a.clone(), a.clone(), a, None).unwrap();
        let cfg = DetectorConfig {
            alpha: 1.5,
            ..DetectorConfig::default()
        };
        assert!(adadetect(split.unlabeled(), &cfg, 0).is_err());
    }
}
