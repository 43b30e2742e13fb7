use conformal_attack::attacks::AttackParams;
use conformal_attack::datagen::{RealDatasetSpec, SplitSizes, SyntheticFamily, SyntheticSpec};
use conformal_attack::harness::{
    emit_report, parse_json_report, run_experiment, Aggregates, DataSource, ExperimentConfig, ReportFormat, Scheme,
    SuiteConfig, SuiteReport, Summary,
};
use conformal_attack::schemes::SizeRule;
use std::io::Write;

fn tiny(scheme: Scheme, replicates: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic(SyntheticSpec::new(
        SyntheticFamily::independent_gaussian(),
    )));
    cfg.name = "tiny".into();
    cfg.sizes = SplitSizes {
        n: 200,
        m: 60,
        k: 160,
        m0: 45,
    };
    cfg.replicates = replicates;
    cfg.scheme = scheme;
    cfg.size_rule = SizeRule::Fixed(5);
    cfg.attack = AttackParams {
        max_queries: 800,
        ..AttackParams::default()
    };
    cfg.seed = 21;
    cfg
}

fn suite_of(cfg: &ExperimentConfig, jobs: usize) -> SuiteReport {
    SuiteReport {
        experiments: vec![run_experiment(cfg, jobs).unwrap()],
    }
}

#[test]
fn json_report_round_trips() {
    let report = suite_of(&tiny(Scheme::Oracle, 3), 1);
    let bytes = emit_report(&report, ReportFormat::Json).unwrap();
    assert_eq!(parse_json_report(&bytes).unwrap(), report);
}

#[test]
fn csv_has_one_row_per_replicate_plus_header() {
    let report = suite_of(&tiny(Scheme::Oracle, 4), 1);
    let text = String::from_utf8(emit_report(&report, ReportFormat::Csv).unwrap()).unwrap();
    assert_eq!(text.lines().count(), 5);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.records().count(), 4);
}

#[test]
fn markdown_bound_row_only_for_attacked_runs() {
    let bound = "estimated upper bound";
    let clean = emit_report(&suite_of(&tiny(Scheme::None, 2), 1), ReportFormat::Markdown).unwrap();
    assert!(!String::from_utf8(clean).unwrap().contains(bound));
    let attacked = emit_report(&suite_of(&tiny(Scheme::Oracle, 2), 1), ReportFormat::Markdown).unwrap();
    let text = String::from_utf8(attacked).unwrap();
    assert!(text.contains(bound));
    assert!(text.contains("oracle + hop. (m_a=5)"));
}

#[test]
fn zero_size_oracle_reproduces_benign_metrics() {
    let mut cfg = tiny(Scheme::Oracle, 3);
    cfg.size_rule = SizeRule::Fixed(0);
    let report = run_experiment(&cfg, 1).unwrap();
    for r in &report.replicates {
        assert_eq!(r.attacked.as_ref().unwrap().metrics, r.original);
    }
}

#[test]
fn aggregates_are_recomputable_from_records() {
    let report = run_experiment(&tiny(Scheme::Oracle, 4), 1).unwrap();
    assert_eq!(Aggregates::from_records(&report.replicates), report.aggregates);
    let fdps: Vec<f64> = report.replicates.iter().map(|r| r.original.fdp).collect();
    assert_eq!(report.aggregates.original_fdr, Summary::of(&fdps));
    assert_eq!(report.aggregates.completed, 4);
}

#[test]
fn replicates_do_not_depend_on_their_neighbours() {
    let short = run_experiment(&tiny(Scheme::Oracle, 2), 1).unwrap();
    let long = run_experiment(&tiny(Scheme::Oracle, 4), 1).unwrap();
    assert_eq!(short.replicates[..], long.replicates[..2]);
}

#[test]
fn reports_are_byte_identical_across_runs_and_job_counts() {
    let cfg = tiny(Scheme::Surrogate, 3);
    let a = emit_report(&suite_of(&cfg, 1), ReportFormat::Json).unwrap();
    let b = emit_report(&suite_of(&cfg, 1), ReportFormat::Json).unwrap();
    let c = emit_report(&suite_of(&cfg, 2), ReportFormat::Json).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn seed_changes_results_and_provenance() {
    let a = run_experiment(&tiny(Scheme::None, 2), 1).unwrap();
    let mut cfg = tiny(Scheme::None, 2);
    cfg.seed = 22;
    let b = run_experiment(&cfg, 1).unwrap();
    assert_eq!(b.provenance.seed, 22);
    assert_ne!(a.provenance.config_sha256, b.provenance.config_sha256);
    assert_ne!(a.replicates, b.replicates);
}

#[test]
fn undersized_csv_yields_a_partial_report() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "a,b,label").unwrap();
    for i in 0..30 {
        writeln!(f, "{i},{},{}", i * 2, if i < 25 { "n" } else { "x" }).unwrap();
    }
    let mut cfg = tiny(Scheme::None, 2);
    cfg.data = DataSource::Csv(RealDatasetSpec {
        path: f.path().to_path_buf(),
        label_column: "label".into(),
        null_labels: vec!["n".into()],
        feature_columns: None,
        standardize: true,
    });
    let report = run_experiment(&cfg, 1).unwrap();
    assert!(report.partial);
    assert_eq!(report.failures.len(), 2);
    assert!(report.replicates.is_empty());
    assert!(report.failures[0].reason.contains("short by"));
}

#[test]
fn direct_scheme_stays_under_the_estimated_bound() {
    let mut cfg = tiny(Scheme::Direct, 100);
    cfg.size_rule = SizeRule::Intensity(0.2);
    cfg.attack.max_queries = 300;
    let report = run_experiment(&cfg, 1).unwrap();
    assert_eq!(report.aggregates.completed, 100);
    let fdr = report.aggregates.attacked_fdr.unwrap().mean;
    let bound = report.estimated_upper_bound.unwrap();
    assert!(fdr <= bound, "FDR {fdr} above bound {bound}");
    assert_eq!(report.respects_bound(), Some(true));
}

#[test]
fn toml_config_parses_with_defaults() {
    let text = r#"
[[experiment]]
name = "g"
scheme = "oracle"
seed = 3
[experiment.data]
source = "synthetic"
family = "independent_gaussian"
"#;
    let suite = SuiteConfig::from_toml(text).unwrap();
    let e = &suite.experiment[0];
    assert_eq!(e.replicates, 20);
    assert_eq!(e.alpha, 0.1);
    assert_eq!(e.sizes, SplitSizes::DESK);
    assert!(SuiteConfig::from_toml("[[experiment]]\nbogus = 1\n").is_err());
}
