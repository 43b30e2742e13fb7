//! Trainable score functions and the hard-label decision built on them.
//!
//! Both learners consume the training set as an unordered multiset per
//! class: rows are put into a canonical order (label, then lexicographic
//! feature order) before any randomness or floating-point accumulation
//! touches them. Reordering rows inside a label block therefore yields a
//! bit-identical model.

mod forest;
mod mlp;

pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use mlp::{Mlp, MlpParams, MlpWeights};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Threshold of the hard-label decision `1{score >= 0.5}`.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Feature matrix with one binary label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(invalid(format!("{} rows but {} labels", features.rows(), labels.len())));
        }
        if !features.all_finite() {
            return Err(invalid("features contain NaN or infinite values"));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(invalid("labels must be 0 or 1"));
        }
        Ok(Self { features, labels })
    }

    /// Rows of `negatives` labelled 0 followed by rows of `positives`
    /// labelled 1.
    pub fn from_blocks(negatives: &[&Matrix], positives: &[&Matrix]) -> Result<Self> {
        let all: Vec<&Matrix> = negatives.iter().chain(positives).copied().collect();
        let features = Matrix::vstack(&all)?;
        let n0: usize = negatives.iter().map(|m| m.rows()).sum();
        let mut labels = vec![0u8; n0];
        labels.resize(features.rows(), 1);
        Self::new(features, labels)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Copy of the dataset with rows sorted by label, then lexicographically
    /// by features.
    fn canonical(&self) -> (Matrix, Vec<u8>) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.labels[a].cmp(&self.labels[b]).then_with(|| {
                let (ra, rb) = (self.features.row(a), self.features.row(b));
                ra.iter()
                    .zip(rb)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
        });
        let features = self.features.select_rows(&order);
        let labels = order.iter().map(|&i| self.labels[i]).collect();
        (features, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    NeuralNet,
}

/// Learner family together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    RandomForest(ForestParams),
    NeuralNet(MlpParams),
}

impl LearnerConfig {
    pub fn forest() -> Self {
        LearnerConfig::RandomForest(ForestParams::default())
    }

    pub fn neural_net() -> Self {
        LearnerConfig::NeuralNet(MlpParams::default())
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            LearnerConfig::RandomForest(_) => ModelKind::RandomForest,
            LearnerConfig::NeuralNet(_) => ModelKind::NeuralNet,
        }
    }

    /// Short tag used in report tables ("RF", "NN").
    pub fn short_name(&self) -> &'static str {
        match self {
            LearnerConfig::RandomForest(_) => "RF",
            LearnerConfig::NeuralNet(_) => "NN",
        }
    }
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self::forest()
    }
}

/// Anything that maps a feature vector to a score in [0, 1].
pub trait Scorer: Sync {
    fn dim(&self) -> usize;

    fn score(&self, z: &[f64]) -> Result<f64>;

    fn score_rows(&self, rows: &Matrix) -> Result<Vec<f64>> {
        rows.iter_rows().map(|r| self.score(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Fitted {
    Forest(RandomForest),
    Net(Mlp),
}

/// A fitted score function. Larger scores mean "more novel".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    config: LearnerConfig,
    train_seed: u64,
    dim: usize,
    fitted: Fitted,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelBlob {
    format_version: u32,
    model: ScoreModel,
}

impl ScoreModel {
    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind()
    }

    pub fn train_seed(&self) -> u64 {
        self.train_seed
    }

    /// Wrap an already-built forest, e.g. a hand-assembled one in tests.
    pub fn from_forest(forest: RandomForest, seed: u64) -> Self {
        Self {
            config: LearnerConfig::RandomForest(forest.params().clone()),
            train_seed: seed,
            dim: forest.dim(),
            fitted: Fitted::Forest(forest),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&ModelBlob {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .map_err(|e| invalid(format!("model serialization failed: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let blob: ModelBlob = serde_json::from_str(s).map_err(|e| invalid(format!("bad model blob: {e}")))?;
        if blob.format_version != MODEL_FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported model format version {}",
                blob.format_version
            )));
        }
        Ok(blob.model)
    }
}

impl Scorer for ScoreModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(invalid(format!(
                "feature vector has dimension {}, model expects {}",
                z.len(),
                self.dim
            )));
        }
        Ok(match &self.fitted {
            Fitted::Forest(f) => f.predict(z),
            Fitted::Net(n) => n.predict(z),
        })
    }
}

/// Fit a score function on `data`. Row order within each label block does
/// not affect the result.
pub fn train_score_function(data: &LabeledDataset, config: &LearnerConfig, seed: u64) -> Result<ScoreModel> {
    let (n0, n1) = (data.count(0), data.count(1));
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateTraining(format!(
            "need both classes, got {n0} label-0 and {n1} label-1 rows"
        )));
    }
    let (x, y) = data.canonical();
    let fitted = match config {
        LearnerConfig::RandomForest(p) => Fitted::Forest(RandomForest::fit(&x, &y, p, seed)?),
        LearnerConfig::NeuralNet(p) => Fitted::Net(Mlp::fit(&x, &y, p, seed)?),
    };
    Ok(ScoreModel {
        config: config.clone(),
        train_seed: seed,
        dim: data.dim(),
        fitted,
    })
}

/// Hard-label query access. Attacks only ever see this trait, never the
/// underlying score.
pub trait HardLabelOracle: Sync {
    fn dim(&self) -> usize;

    /// `true` means label 1 (detected / novelty side).
    fn decide(&self, z: &[f64]) -> Result<bool>;
}

/// `1{score(z) >= 0.5}` over a borrowed scorer.
#[derive(Debug, Clone, Copy)]
pub struct DecisionFn<'a, S: ?Sized> {
    scorer: &'a S,
}

impl<'a, S: Scorer + ?Sized> DecisionFn<'a, S> {
    pub fn new(scorer: &'a S) -> Self {
        Self { scorer }
    }

    pub fn threshold(&self) -> f64 {
        DECISION_THRESHOLD
    }
}

impl<S: Scorer + ?Sized> HardLabelOracle for DecisionFn<'_, S> {
    fn dim(&self) -> usize {
        self.scorer.dim()
    }

    fn decide(&self, z: &[f64]) -> Result<bool> {
        Ok(self.scorer.score(z)? >= DECISION_THRESHOLD)
    }
}
