use conformal_attack::attacks::{attack_point, AttackAlgorithm, AttackParams};
use conformal_attack::datagen::{generate_split, sample, SplitSizes, SyntheticFamily, SyntheticSpec};
use conformal_attack::detector::{adadetect, DetectorConfig};
use conformal_attack::learners::{train_score_function, LabeledDataset, LearnerConfig, Scorer};
use conformal_attack::stats::{benjamini_hochberg_f64, conformal_pvalues, Comparator};
use conformal_attack::{seed, Matrix};
use conformal_attack_bench::Halfspace;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn uniform(n: usize, s: u64) -> Vec<f64> {
    (0..n as u64)
        .map(|i| (seed::derive(s, &[i]) >> 11) as f64 / (1u64 << 53) as f64)
        .collect()
}

fn stats(c: &mut Criterion) {
    let p = uniform(1000, 1);
    c.bench_function("bh_m1000", |b| {
        b.iter(|| benjamini_hochberg_f64(black_box(&p), 0.1).unwrap())
    });
    let calib = uniform(800, 2);
    let test = uniform(1000, 3);
    c.bench_function("conformal_pvalues_k800_m1000", |b| {
        b.iter(|| conformal_pvalues(black_box(&calib), black_box(&test), Comparator::Greater).unwrap())
    });
}

fn learners(c: &mut Criterion) {
    let spec = SyntheticSpec::new(SyntheticFamily::independent_gaussian());
    let mut rng = seed::rng(4, &[]);
    let neg = sample(&spec, false, 1000, &mut rng).unwrap();
    let pos = sample(&spec, true, 1000, &mut rng).unwrap();
    let data = LabeledDataset::from_blocks(&[&neg], &[&pos]).unwrap();
    let mut g = c.benchmark_group("learners");
    g.sample_size(10);
    g.bench_function("forest_train_2000x20", |b| {
        b.iter(|| train_score_function(&data, &LearnerConfig::forest(), 5).unwrap())
    });
    let model = train_score_function(&data, &LearnerConfig::forest(), 5).unwrap();
    g.bench_function("forest_score_1000", |b| {
        b.iter(|| model.score_rows(black_box(&pos)).unwrap())
    });
    g.finish();
}

fn attacks(c: &mut Criterion) {
    let dim = 20;
    let oracle = Halfspace::axis(dim, 1.0);
    let origin = vec![0.0; dim];
    let mut far = vec![0.0; dim];
    far[0] = 3.0;
    far[1] = 2.0;
    let targets = Matrix::from_rows(&[far]).unwrap();
    let mut g = c.benchmark_group("attacks");
    g.sample_size(10);
    for (name, algorithm) in [
        ("hsja", AttackAlgorithm::HopSkipJump),
        ("boundary", AttackAlgorithm::Boundary),
    ] {
        let params = AttackParams {
            algorithm,
            max_queries: 5000,
            seed: 6,
            ..AttackParams::default()
        };
        g.bench_function(format!("{name}_halfspace_d20"), |b| {
            b.iter(|| attack_point(&origin, &oracle, &targets, &params, 0).unwrap())
        });
    }
    g.finish();
}

fn detector(c: &mut Criterion) {
    let spec = SyntheticSpec::new(SyntheticFamily::independent_gaussian());
    let split = generate_split(&spec, SplitSizes::DESK, 7).unwrap();
    let cfg = DetectorConfig::default();
    let mut g = c.benchmark_group("detector");
    g.sample_size(10);
    g.bench_function("adadetect_desk_forest", |b| {
        b.iter(|| adadetect(split.unlabeled(), &cfg, 8).unwrap())
    });
    g.finish();
}

criterion_group!(benches, stats, learners, attacks, detector);
criterion_main!(benches);
