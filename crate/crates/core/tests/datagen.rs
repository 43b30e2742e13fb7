use conformal_attack::datagen::{
    generate_split, load_real_split, read_dataset, sample, RealDatasetSpec, SplitSizes, SyntheticFamily, SyntheticSpec,
};
use conformal_attack::{seed, Error, Matrix};
use std::io::Write;

fn column_means(m: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    mean.iter_mut().for_each(|a| *a /= m.rows() as f64);
    mean
}

#[test]
fn gaussian_moments_and_sparse_shift() {
    let spec = SyntheticSpec::new(SyntheticFamily::independent_gaussian());
    let n = 20_000;
    let mut rng = seed::rng(1, &[]);
    let tol = 3.0 / (n as f64).sqrt();
    let nulls = column_means(&sample(&spec, false, n, &mut rng).unwrap());
    assert!(nulls.iter().all(|m| m.abs() < tol), "{nulls:?}");
    let alt = column_means(&sample(&spec, true, n, &mut rng).unwrap());
    let shift = (2.0 * 20f64.ln()).sqrt();
    assert!((shift - 2.448).abs() < 1e-3);
    for (j, m) in alt.iter().enumerate() {
        let target = if j < 5 { shift } else { 0.0 };
        assert!((m - target).abs() < tol, "coord {j}: {m}");
    }
}

#[test]
fn beta_means() {
    let spec = SyntheticSpec::new(SyntheticFamily::non_gaussian_beta());
    let mut rng = seed::rng(2, &[]);
    let nulls = column_means(&sample(&spec, false, 20_000, &mut rng).unwrap());
    let alt = column_means(&sample(&spec, true, 20_000, &mut rng).unwrap());
    assert!((nulls[0] - 0.5).abs() < 0.01 && (nulls[1] - 0.5).abs() < 0.01);
    assert!((alt[0] - 0.25).abs() < 0.01 && (alt[1] - 0.25).abs() < 0.01);
    assert!((alt[5] - 0.5).abs() < 0.01 && (nulls[5] - 0.5).abs() < 0.01);
    let all = sample(&spec, true, 1000, &mut rng).unwrap();
    assert!(all.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn exchangeable_covariance_matches() {
    let (b2, c) = (1.0, 0.3);
    let spec = SyntheticSpec {
        family: SyntheticFamily::ExchangeableGaussian {
            a: 0.5,
            b2,
            c,
            delta: Some(1.0),
        },
        d: 6,
    };
    let mut rng = seed::rng(3, &[]);
    let n = 100_000;
    let x = sample(&spec, false, n, &mut rng).unwrap();
    let mean = column_means(&x);
    assert!(mean.iter().all(|m| (m - 0.5).abs() < 0.02));
    let d = spec.d;
    let mut cov = vec![0.0; d * d];
    for row in x.iter_rows() {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            let got = cov[i * d + j] / n as f64;
            let want = if i == j { b2 } else { c };
            assert!((got - want).abs() < 0.05, "({i},{j}) {got}");
        }
    }
    let alt = column_means(&sample(&spec, true, n, &mut rng).unwrap());
    assert!(alt.iter().all(|m| (m - 1.5).abs() < 0.02));
}

#[test]
fn negative_correlation_is_supported() {
    let spec = SyntheticSpec {
        family: SyntheticFamily::ExchangeableGaussian {
            a: 0.0,
            b2: 1.0,
            c: -0.1,
            delta: None,
        },
        d: 5,
    };
    let mut rng = seed::rng(4, &[]);
    let x = sample(&spec, false, 100_000, &mut rng).unwrap();
    let cov01: f64 = x.iter_rows().map(|r| r[0] * r[1]).sum::<f64>() / x.rows() as f64;
    assert!((cov01 + 0.1).abs() < 0.02, "{cov01}");
}

fn write_csv(rows: &[(f64, f64, &str)]) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "a,b,label").unwrap();
    for (a, b, l) in rows {
        writeln!(f, "{a},{b},{l}").unwrap();
    }
    f
}

fn spec_for(path: &std::path::Path) -> RealDatasetSpec {
    RealDatasetSpec {
        path: path.to_path_buf(),
        label_column: "label".into(),
        null_labels: vec!["1".into()],
        feature_columns: None,
        standardize: true,
    }
}

/// Shuttle-style labels: class 1 nominal, 2-7 novelties. Every row carries
/// a unique id in column `a` so the split can be traced back.
fn shuttle_fixture() -> tempfile::NamedTempFile {
    let rows: Vec<(f64, f64, String)> = (0..80)
        .map(|i| {
            let label = if i < 60 {
                "1".to_string()
            } else {
                (2 + i % 6).to_string()
            };
            (i as f64, (i * 7 % 13) as f64, label)
        })
        .collect();
    let borrowed: Vec<(f64, f64, &str)> = rows.iter().map(|(a, b, l)| (*a, *b, l.as_str())).collect();
    write_csv(&borrowed)
}

#[test]
fn real_split_is_disjoint_and_deterministic() {
    let f = shuttle_fixture();
    let mut spec = spec_for(f.path());
    spec.standardize = false;
    let data = read_dataset(&spec).unwrap();
    assert_eq!((data.null_count(), data.novelty_count()), (60, 20));
    let sizes = SplitSizes {
        n: 40,
        m: 25,
        k: 30,
        m0: 15,
    };
    let s = load_real_split(&spec, sizes, 5).unwrap();
    assert_eq!(load_real_split(&spec, sizes, 5).unwrap(), s);
    let mut ids: Vec<i64> = [s.train_null(), s.calibration_null(), s.test()]
        .iter()
        .flat_map(|m| m.iter_rows().map(|r| r[0] as i64).collect::<Vec<_>>())
        .collect();
    let total = ids.len();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), total, "rows reused across blocks");
    for (row, &novel) in s.test().iter_rows().zip(s.ground_truth().unwrap()) {
        assert_eq!(novel, row[0] >= 60.0);
    }
    assert!(s.train_null().iter_rows().all(|r| r[0] < 60.0));
}

#[test]
fn standardization_uses_training_nulls_only() {
    let f = shuttle_fixture();
    let spec = spec_for(f.path());
    let sizes = SplitSizes {
        n: 40,
        m: 25,
        k: 30,
        m0: 15,
    };
    let s = load_real_split(&spec, sizes, 6).unwrap();
    let means = column_means(s.train_null());
    assert!(means.iter().all(|m| m.abs() < 1e-9), "{means:?}");
    let var: f64 = s.train_null().iter_rows().map(|r| r[0] * r[0]).sum::<f64>() / 30.0;
    assert!((var - 1.0).abs() < 1e-9);
    // novelties carry ids >= 60, above every null id
    let test_means = column_means(s.test());
    assert!(test_means[0] > 0.0);
}

#[test]
fn too_few_novelties_is_a_size_error() {
    let f = shuttle_fixture();
    let spec = spec_for(f.path());
    let sizes = SplitSizes {
        n: 40,
        m: 40,
        k: 30,
        m0: 15,
    };
    match load_real_split(&spec, sizes, 0) {
        Err(Error::Size(msg)) => assert!(msg.contains("short by 5"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn parse_errors_name_row_and_column() {
    let f = write_csv(&[(1.0, 2.0, "1")]);
    let mut text = std::fs::read_to_string(f.path()).unwrap();
    text.push_str("3,oops,2\n");
    std::fs::write(f.path(), text).unwrap();
    match read_dataset(&spec_for(f.path())) {
        Err(Error::Format { row, column, .. }) => assert_eq!((row, column.as_str()), (3, "b")),
        other => panic!("{other:?}"),
    }
    let mut spec = spec_for(f.path());
    spec.label_column = "class".into();
    assert!(matches!(read_dataset(&spec), Err(Error::Format { .. })));
    spec.path = "/nonexistent/file.csv".into();
    assert!(matches!(read_dataset(&spec), Err(Error::Io(_))));
}

#[test]
fn test_order_is_shuffled_with_matching_truth() {
    let spec = SyntheticSpec::new(SyntheticFamily::independent_gaussian());
    let s = generate_split(&spec, SplitSizes::DESK, 9).unwrap();
    let truth = s.ground_truth().unwrap();
    assert_eq!(truth.iter().filter(|&&b| b).count(), 20);
    // novelties are not all at the end
    assert!(truth[..180].iter().any(|&b| b));
    let first5 = |r: &[f64]| r[..5].iter().sum::<f64>();
    let novel: f64 = s
        .test()
        .iter_rows()
        .zip(truth)
        .filter(|(_, &t)| t)
        .map(|(r, _)| first5(r))
        .sum::<f64>()
        / 20.0;
    let null: f64 = s
        .test()
        .iter_rows()
        .zip(truth)
        .filter(|(_, &t)| !t)
        .map(|(r, _)| first5(r))
        .sum::<f64>()
        / 180.0;
    assert!(novel > null + 8.0, "{novel} vs {null}");
}
