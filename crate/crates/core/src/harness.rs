//! Replicated experiments: declarative configuration, per-replicate runs,
//! aggregation, and report rendering.

use crate::attacks::{AttackAlgorithm, AttackParams};
use crate::datagen::{
    generate_split, read_dataset, split_real, RealDataset, RealDatasetSpec, SplitSizes, SyntheticFamily, SyntheticSpec,
};
use crate::detector::{DataSplit, DetectorConfig, LabelQuery, UserDetector};
use crate::error::{invalid, Error, Result};
use crate::learners::LearnerConfig;
use crate::matrix::Matrix;
use crate::schemes::{
    direct_attack, oracle_attack, surrogate_attack, AttackPlan, AttackerOutput, SchemeKind, SelectionRule, SizeRule,
};
use crate::seed::{self, replicate_seed, Role};
use crate::stats::{estimate_fdr_upper_bound, fdp_and_power, Comparator, ConfusionCounts};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(RealDatasetSpec),
}

impl DataSource {
    pub fn name(&self) -> String {
        match self {
            DataSource::Synthetic(s) => s.family.short_name().to_string(),
            DataSource::Csv(r) => r
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    None,
    Oracle,
    Surrogate,
    Direct,
}

impl Scheme {
    pub fn kind(self) -> Option<SchemeKind> {
        match self {
            Scheme::None => None,
            Scheme::Oracle => Some(SchemeKind::Oracle),
            Scheme::Surrogate => Some(SchemeKind::Surrogate),
            Scheme::Direct => Some(SchemeKind::Direct),
        }
    }

    pub fn default_selection(self) -> Option<SelectionRule> {
        match self {
            Scheme::None => None,
            Scheme::Oracle => Some(SelectionRule::FixedNullIndices),
            Scheme::Surrogate => Some(SelectionRule::NearestBoundaryUnrejected),
            Scheme::Direct => Some(SelectionRule::SmallestPvaluesUnrejected),
        }
    }
}

/// Attack size used when none is configured.
pub const DEFAULT_ATTACK_SIZE: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub sizes: SplitSizes,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Tie rule of the user's conformal p-values.
    #[serde(default)]
    pub comparator: Comparator,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub user_learner: LearnerConfig,
    /// Defaults to the user's learner.
    #[serde(default)]
    pub attacker_learner: Option<LearnerConfig>,
    #[serde(default = "default_size_rule")]
    pub size_rule: SizeRule,
    /// Defaults per scheme.
    #[serde(default)]
    pub selection: Option<SelectionRule>,
    #[serde(default)]
    pub attack: AttackParams,
    /// Re-run the user's detector with a fresh seed after the attack
    /// instead of the pre-attack seed.
    #[serde(default)]
    pub fresh_post_attack_seed: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.1
}
fn default_replicates() -> usize {
    20
}
fn default_scheme() -> Scheme {
    Scheme::None
}
fn default_size_rule() -> SizeRule {
    SizeRule::Fixed(DEFAULT_ATTACK_SIZE)
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            name: String::new(),
            data,
            sizes: SplitSizes::DESK,
            alpha: default_alpha(),
            comparator: Comparator::Greater,
            replicates: default_replicates(),
            scheme: Scheme::None,
            user_learner: LearnerConfig::default(),
            attacker_learner: None,
            size_rule: default_size_rule(),
            selection: None,
            attack: AttackParams::default(),
            fresh_post_attack_seed: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Error::Config(format!("{}: {m}", self.display_name()));
        if self.replicates == 0 {
            return Err(cfg("replicates must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(cfg(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        self.sizes.validate().map_err(|e| cfg(e.to_string()))?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate().map_err(|e| cfg(e.to_string()))?;
        }
        if self.scheme == Scheme::None {
            if self.attacker_learner.is_some() || self.selection.is_some() {
                return Err(cfg("attacker settings given without an attack scheme".into()));
            }
            return Ok(());
        }
        self.size_rule.validate().map_err(|e| cfg(e.to_string()))?;
        self.attack.validate().map_err(|e| cfg(e.to_string()))?;
        if self.scheme == Scheme::Direct && self.attacker_learner.is_some() {
            return Err(cfg("the direct attacker uses the user's learner".into()));
        }
        if let (Some(kind), Some(rule)) = (self.scheme.kind(), self.selection) {
            crate::schemes::check_selection(kind, rule).map_err(|e| cfg(e.to_string()))?;
        }
        Ok(())
    }

    pub fn display_name(&self) -> String {
        if !self.name.is_empty() {
            return self.name.clone();
        }
        let mut s = format!("{}-{}", self.data.name(), self.scheme_label());
        if self.scheme != Scheme::None {
            if let SizeRule::Fixed(m_a) = self.size_rule {
                let _ = write!(s, "-ma{m_a}");
            }
        }
        s
    }

    fn scheme_label(&self) -> String {
        match self.scheme {
            Scheme::None => "benign".into(),
            _ => format!(
                "{}-{}",
                self.scheme.kind().expect("attacked").name(),
                self.learner_pair()
            ),
        }
    }

    /// "RF-NN" style user/attacker pair.
    pub fn learner_pair(&self) -> String {
        let attacker = self.attacker_learner.as_ref().unwrap_or(&self.user_learner);
        format!("{}-{}", self.user_learner.short_name(), attacker.short_name())
    }

    /// Switch to full-size splits, scaling a fixed attack size with `m`.
    pub fn to_full_scale(&mut self) {
        let old_m = self.sizes.m;
        self.sizes = SplitSizes::FULL;
        if let SizeRule::Fixed(m_a) = self.size_rule {
            self.size_rule = SizeRule::Fixed(m_a * SplitSizes::FULL.m / old_m.max(1));
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            learner: self.user_learner.clone(),
            alpha: self.alpha,
            comparator: self.comparator,
        }
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// A config file: one or more `[[experiment]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub experiment: Vec<ExperimentConfig>,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let suite: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if suite.experiment.is_empty() {
            return Err(Error::Config("no [[experiment]] tables".into()));
        }
        for e in &suite.experiment {
            e.validate()?;
        }
        Ok(suite)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Exp1,
    Exp2,
    Exp3,
    ExpA1,
    ExpA2,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp1" => Ok(Preset::Exp1),
            "exp2" => Ok(Preset::Exp2),
            "exp3" => Ok(Preset::Exp3),
            "expa1" => Ok(Preset::ExpA1),
            "expa2" => Ok(Preset::ExpA2),
            _ => Err(Error::Config(format!("unknown preset {s:?}"))),
        }
    }
}

/// The four public tabular datasets, as written by the fetch script.
pub fn real_datasets(dir: &str) -> Vec<RealDatasetSpec> {
    let spec = |file: &str, nulls: &[&str]| RealDatasetSpec {
        path: PathBuf::from(format!("{dir}/{file}")),
        label_column: "label".into(),
        null_labels: nulls.iter().map(|s| s.to_string()).collect(),
        feature_columns: None,
        standardize: true,
    };
    vec![
        spec("creditcard.csv", &["0"]),
        spec("shuttle.csv", &["1"]),
        spec("kddcup99.csv", &["normal."]),
        spec("mammography.csv", &["-1"]),
    ]
}

fn synthetic_families() -> Vec<SyntheticFamily> {
    vec![
        SyntheticFamily::independent_gaussian(),
        SyntheticFamily::non_gaussian_beta(),
        SyntheticFamily::exchangeable_gaussian(),
    ]
}

impl Preset {
    /// Desk-scale experiment list; attack sizes 10 and 40 correspond to 50
    /// and 200 at full scale.
    pub fn suite(self) -> SuiteConfig {
        let rf = LearnerConfig::forest();
        let nn = LearnerConfig::neural_net();
        let attacked = |data: DataSource, scheme, user: &LearnerConfig, attacker: &LearnerConfig, m_a, algorithm| {
            let mut c = ExperimentConfig::new(data);
            c.scheme = scheme;
            c.user_learner = user.clone();
            c.attacker_learner = (attacker != user).then(|| attacker.clone());
            c.size_rule = SizeRule::Fixed(m_a);
            c.attack.algorithm = algorithm;
            c.name = c.display_name();
            if algorithm == AttackAlgorithm::Boundary {
                c.name.push_str("-boundary");
            }
            c
        };
        let hsja = AttackAlgorithm::HopSkipJump;
        let mut out = Vec::new();
        match self {
            Preset::Exp1 | Preset::ExpA1 => {
                let l = if self == Preset::Exp1 { &rf } else { &nn };
                for family in synthetic_families() {
                    let data = DataSource::Synthetic(SyntheticSpec::new(family));
                    for m_a in [10, 40] {
                        for scheme in [Scheme::Oracle, Scheme::Surrogate] {
                            out.push(attacked(data.clone(), scheme, l, l, m_a, hsja));
                        }
                    }
                    if self == Preset::ExpA1 {
                        for scheme in [Scheme::Oracle, Scheme::Surrogate] {
                            out.push(attacked(data.clone(), scheme, &rf, &nn, 40, hsja));
                        }
                    }
                }
            }
            Preset::Exp2 => {
                for spec in real_datasets("data") {
                    for algorithm in [hsja, AttackAlgorithm::Boundary] {
                        for scheme in [Scheme::Oracle, Scheme::Surrogate] {
                            out.push(attacked(DataSource::Csv(spec.clone()), scheme, &rf, &rf, 40, algorithm));
                        }
                    }
                }
            }
            Preset::Exp3 | Preset::ExpA2 => {
                let (user, attacker) = if self == Preset::Exp3 { (&rf, &nn) } else { (&nn, &nn) };
                for spec in real_datasets("data") {
                    for scheme in [Scheme::Oracle, Scheme::Surrogate] {
                        out.push(attacked(
                            DataSource::Csv(spec.clone()),
                            scheme,
                            user,
                            attacker,
                            40,
                            hsja,
                        ));
                    }
                }
            }
        }
        SuiteConfig { experiment: out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub fdp: f64,
    pub power: f64,
    pub rejections: usize,
    pub false_discoveries: usize,
}

impl Metrics {
    fn from_labels(rejected: &[bool], truth: &[bool]) -> Result<Self> {
        let counts = ConfusionCounts::from_rejections(rejected, truth)?;
        let (fdp, power) = fdp_and_power(&counts);
        Ok(Self {
            fdp,
            power,
            rejections: counts.r,
            false_discoveries: counts.v,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub metrics: Metrics,
    /// Size of the attack set, failed attacks included.
    pub attack_size: usize,
    /// Share of the attack set that are true nulls.
    pub null_fraction: Option<f64>,
    pub successes: usize,
    pub queries: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub original: Metrics,
    pub attacked: Option<AttackRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub reason: String,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }

    /// Standard error of the mean, `std / sqrt(count)`.
    pub fn standard_error(&self, count: usize) -> f64 {
        self.std / (count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub completed: usize,
    pub original_fdr: Option<Summary>,
    pub original_power: Option<Summary>,
    pub attacked_fdr: Option<Summary>,
    pub attacked_power: Option<Summary>,
}

impl Aggregates {
    pub fn from_records(records: &[ReplicateRecord]) -> Self {
        let pick = |f: &dyn Fn(&ReplicateRecord) -> Option<f64>| -> Vec<f64> { records.iter().filter_map(f).collect() };
        Self {
            completed: records.len(),
            original_fdr: Summary::of(&pick(&|r| Some(r.original.fdp))),
            original_power: Summary::of(&pick(&|r| Some(r.original.power))),
            attacked_fdr: Summary::of(&pick(&|r| r.attacked.as_ref().map(|a| a.metrics.fdp))),
            attacked_power: Summary::of(&pick(&|r| r.attacked.as_ref().map(|a| a.metrics.power))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub replicates: Vec<ReplicateRecord>,
    pub failures: Vec<ReplicateFailure>,
    pub aggregates: Aggregates,
    pub estimated_upper_bound: Option<f64>,
    pub partial: bool,
}

impl ExperimentReport {
    /// Bound respect with slack of two standard errors.
    pub fn respects_bound(&self) -> Option<bool> {
        let bound = self.estimated_upper_bound?;
        let fdr = self.aggregates.attacked_fdr?;
        Some(fdr.mean <= bound + 2.0 * fdr.standard_error(self.aggregates.completed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub experiments: Vec<ExperimentReport>,
}

impl SuiteReport {
    pub fn partial(&self) -> bool {
        self.experiments.iter().any(|e| e.partial)
    }
}

/// Answers the first query from the pre-attack detection run.
struct Memo<'a> {
    user: &'a UserDetector<'a>,
    test: &'a Matrix,
    labels: &'a [bool],
}

impl LabelQuery for Memo<'_> {
    fn query_labels(&self, test: &Matrix) -> Result<Vec<bool>> {
        if test == self.test {
            Ok(self.labels.to_vec())
        } else {
            self.user.query_labels(test)
        }
    }
}

enum Source {
    Synthetic(SyntheticSpec),
    Csv(RealDataset, bool),
}

impl Source {
    fn split(&self, sizes: SplitSizes, seed: u64) -> Result<DataSplit> {
        match self {
            Source::Synthetic(spec) => generate_split(spec, sizes, seed),
            Source::Csv(data, standardize) => split_real(data, sizes, *standardize, seed),
        }
    }
}

fn run_replicate(cfg: &ExperimentConfig, source: &Source, r: usize) -> Result<ReplicateRecord> {
    let data_seed = replicate_seed(cfg.seed, r as u64, Role::Data);
    let user_seed = replicate_seed(cfg.seed, r as u64, Role::UserTrain);
    let attacker_seed = replicate_seed(cfg.seed, r as u64, Role::AttackerTrain);
    let attack_seed = replicate_seed(cfg.seed, r as u64, Role::Attack);

    let split = source.split(cfg.sizes, data_seed)?;
    let truth = split
        .ground_truth()
        .ok_or_else(|| invalid("split lacks ground truth"))?
        .to_vec();
    let user = UserDetector::new(&split, cfg.detector_config(), user_seed);
    let pre = user.detect(split.test())?;
    let original = Metrics::from_labels(pre.labels(), &truth)?;
    let Some(kind) = cfg.scheme.kind() else {
        return Ok(ReplicateRecord {
            replicate: r,
            original,
            attacked: None,
        });
    };

    let params = AttackParams {
        seed: attack_seed,
        ..cfg.attack.clone()
    };
    let selection = cfg.selection.or(cfg.scheme.default_selection()).expect("attacked");
    let attacker_learner = cfg.attacker_learner.as_ref().unwrap_or(&cfg.user_learner);
    let out: AttackerOutput = match kind {
        SchemeKind::Oracle => oracle_attack(
            &split,
            cfg.size_rule,
            selection,
            attacker_learner,
            &params,
            attacker_seed,
        )?,
        SchemeKind::Surrogate => {
            let memo = Memo {
                user: &user,
                test: split.test(),
                labels: pre.labels(),
            };
            match surrogate_attack(
                split.test(),
                &memo,
                cfg.size_rule,
                selection,
                attacker_learner,
                &params,
                attacker_seed,
            ) {
                // no surrogate can be trained: the attack fails and the data pass through
                Err(Error::DegenerateSurrogate(msg)) => AttackerOutput {
                    attacked_test: split.test().clone(),
                    plan: AttackPlan {
                        scheme: kind,
                        attack_set: Vec::new(),
                        size_rule: cfg.size_rule,
                        selection_rule: selection,
                    },
                    per_point: Vec::new(),
                    warnings: vec![format!("surrogate attack skipped: {msg}")],
                },
                other => other?,
            }
        }
        SchemeKind::Direct => direct_attack(
            split.unlabeled(),
            user.config(),
            user_seed,
            cfg.size_rule,
            selection,
            &params,
        )?,
    };
    let post_seed = if cfg.fresh_post_attack_seed {
        seed::derive(user_seed, &[1])
    } else {
        user_seed
    };
    let post = UserDetector::new(&split, cfg.detector_config(), post_seed).detect(&out.attacked_test)?;
    let attack_size = out.plan.attack_set.len();
    let nulls_attacked = out.plan.attack_set.iter().filter(|&&i| !truth[i]).count();
    Ok(ReplicateRecord {
        replicate: r,
        original,
        attacked: Some(AttackRecord {
            metrics: Metrics::from_labels(post.labels(), &truth)?,
            attack_size,
            null_fraction: (attack_size > 0).then(|| nulls_attacked as f64 / attack_size as f64),
            successes: out.successes(),
            queries: out.queries_used(),
            warnings: out.warnings,
        }),
    })
}

/// Run every replicate of `cfg` on a pool of `jobs` threads. Results do not
/// depend on `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let source = match &cfg.data {
        DataSource::Synthetic(s) => Source::Synthetic(s.clone()),
        DataSource::Csv(spec) => Source::Csv(read_dataset(spec)?, spec.standardize),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<ReplicateRecord>> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(cfg, &source, r))
            .collect()
    });

    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => replicates.push(rec),
            Err(e) => {
                log::warn!("{}: replicate {r} failed: {e}", cfg.display_name());
                failures.push(ReplicateFailure {
                    replicate: r,
                    reason: e.to_string(),
                });
            }
        }
    }
    let estimated_upper_bound = if cfg.scheme == Scheme::None || replicates.is_empty() {
        None
    } else {
        let sizes: Vec<usize> = replicates
            .iter()
            .map(|r| r.attacked.as_ref().map_or(0, |a| a.attack_size))
            .collect();
        let rej: Vec<usize> = replicates
            .iter()
            .map(|r| r.attacked.as_ref().map_or(0, |a| a.metrics.rejections))
            .collect();
        Some(estimate_fdr_upper_bound(cfg.alpha, &sizes, &rej)?)
    };
    Ok(ExperimentReport {
        name: cfg.display_name(),
        config: cfg.clone(),
        provenance: Provenance {
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        aggregates: Aggregates::from_records(&replicates),
        partial: !failures.is_empty(),
        replicates,
        failures,
        estimated_upper_bound,
    })
}

pub fn run_suite(suite: &SuiteConfig, jobs: usize) -> Result<SuiteReport> {
    let experiments = suite
        .experiment
        .iter()
        .map(|cfg| {
            log::info!("running {}", cfg.display_name());
            run_experiment(cfg, jobs)
        })
        .collect::<Result<_>>()?;
    Ok(SuiteReport { experiments })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(invalid(format!("unknown report format {s:?}"))),
        }
    }
}

pub fn emit_report(report: &SuiteReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
            v.push(b'\n');
            Ok(v)
        }
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Markdown => Ok(emit_markdown(report).into_bytes()),
    }
}

pub fn parse_json_report(bytes: &[u8]) -> Result<SuiteReport> {
    serde_json::from_slice(bytes).map_err(|e| invalid(e.to_string()))
}

fn emit_csv(report: &SuiteReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "experiment",
        "replicate",
        "original_fdp",
        "original_power",
        "original_rejections",
        "attacked_fdp",
        "attacked_power",
        "attacked_rejections",
        "attack_size",
        "null_fraction",
        "successes",
        "queries",
    ])
    .map_err(io)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for e in &report.experiments {
        for r in &e.replicates {
            let a = r.attacked.as_ref();
            w.write_record([
                e.name.clone(),
                r.replicate.to_string(),
                r.original.fdp.to_string(),
                r.original.power.to_string(),
                r.original.rejections.to_string(),
                opt(a.map(|a| a.metrics.fdp.to_string())),
                opt(a.map(|a| a.metrics.power.to_string())),
                opt(a.map(|a| a.metrics.rejections.to_string())),
                opt(a.map(|a| a.attack_size.to_string())),
                opt(a.and_then(|a| a.null_fraction).map(|v| v.to_string())),
                opt(a.map(|a| a.successes.to_string())),
                opt(a.map(|a| a.queries.to_string())),
            ])
            .map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn cell(s: Option<Summary>) -> String {
    s.map_or_else(|| "n/a".into(), |s| format!("{:.2} ± {:.2}", s.mean, s.std))
}

fn emit_markdown(report: &SuiteReport) -> String {
    let mut out = String::new();
    for e in &report.experiments {
        let a = &e.aggregates;
        let _ = writeln!(out, "### {}\n", e.name);
        let _ = writeln!(out, "| | FDR | Power |");
        let _ = writeln!(out, "|---|---|---|");
        let _ = writeln!(
            out,
            "| original | {} | {} |",
            cell(a.original_fdr),
            cell(a.original_power)
        );
        if let Some(kind) = e.config.scheme.kind() {
            let size = match e.config.size_rule {
                SizeRule::Fixed(m_a) => format!("m_a={m_a}"),
                SizeRule::Intensity(g) => format!("gamma={g}"),
            };
            let _ = writeln!(
                out,
                "| {} + {} ({size}) | {} | {} |",
                kind.name(),
                e.config.attack.algorithm.short_name(),
                cell(a.attacked_fdr),
                cell(a.attacked_power)
            );
            let bound = e
                .estimated_upper_bound
                .map_or_else(|| "n/a".into(), |b| format!("{b:.2}"));
            let _ = writeln!(out, "| estimated upper bound | {bound} | |");
        }
        if e.partial {
            let _ = writeln!(
                out,
                "\n{} of {} replicates failed.",
                e.failures.len(),
                e.config.replicates
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn presets_validate_and_round_trip_through_toml() {
        for p in [Preset::Exp1, Preset::Exp2, Preset::Exp3, Preset::ExpA1, Preset::ExpA2] {
            let suite = p.suite();
            let text = suite.to_toml().unwrap();
            assert_eq!(SuiteConfig::from_toml(&text).unwrap(), suite, "{p:?}");
        }
    }

    #[test]
    fn full_scale_scales_fixed_attack_size() {
        let mut c = ExperimentConfig::new(DataSource::Synthetic(SyntheticSpec::new(
            SyntheticFamily::independent_gaussian(),
        )));
        c.scheme = Scheme::Oracle;
        c.to_full_scale();
        assert_eq!(c.sizes, SplitSizes::FULL);
        assert_eq!(c.size_rule, SizeRule::Fixed(200));
    }

    #[test]
    fn config_errors() {
        assert!(SuiteConfig::from_toml("").is_err());
        assert!(SuiteConfig::from_toml("[[experiment]]\nbogus = 1\n").is_err());
        let text = "[[experiment]]\nreplicates = 0\n[experiment.data]\nsource = \"synthetic\"\nfamily = \"independent_gaussian\"\n";
        assert!(matches!(SuiteConfig::from_toml(text), Err(Error::Config(_))));
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
