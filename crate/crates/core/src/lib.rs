//! Adaptive conformal novelty detection under decision-based evasion.
//!
//! The crate covers the whole pipeline: conformal p-values and BH, PU-trained
//! score functions, the detector, label-only perturbation attacks, the three
//! attacker knowledge schemes, synthetic and CSV data sources, and the
//! replicated experiment harness.

pub mod attacks;
pub mod datagen;
pub mod detector;
pub mod error;
pub mod harness;
pub mod learners;
pub mod matrix;
pub mod schemes;
pub mod seed;
pub mod stats;

pub use attacks::{attack_point, AttackAlgorithm, AttackOutcome, AttackParams};
pub use datagen::{generate_split, load_real_split, RealDatasetSpec, SplitSizes, SyntheticFamily, SyntheticSpec};
pub use detector::{
    adadetect, query_labels, DataSplit, DetectionResult, DetectorConfig, LabelQuery, UnlabeledSplit, UserDetector,
};
pub use error::{Error, Result};
pub use harness::{
    emit_report, run_experiment, run_suite, ExperimentConfig, ExperimentReport, ReportFormat, SuiteConfig, SuiteReport,
};
pub use learners::{
    train_score_function, DecisionFn, HardLabelOracle, LabeledDataset, LearnerConfig, ModelKind, ScoreModel, Scorer,
};
pub use matrix::Matrix;
pub use schemes::{AttackPlan, SchemeKind, SchemeResult, SelectionRule, SizeRule};
pub use stats::{
    benjamini_hochberg, conformal_pvalue, conformal_pvalues, estimate_fdr_upper_bound, fdp_and_power, BhResult,
    Comparator, ConfusionCounts, PValue, PValueVector,
};
