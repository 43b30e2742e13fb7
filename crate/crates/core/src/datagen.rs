//! Data sources: three synthetic null/novelty families and CSV ingestion.
//!
//! Every split draws nulls i.i.d. (or uniformly without replacement from a
//! file), so nulls are exchangeable given the novelties by construction.

use crate::detector::DataSplit;
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Requested split sizes: `n` nulls of which `k` train the score, and `m`
/// test points of which `m0` are nulls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub m0: usize,
}

impl SplitSizes {
    pub const DESK: SplitSizes = SplitSizes {
        n: 1000,
        m: 200,
        k: 800,
        m0: 180,
    };
    pub const FULL: SplitSizes = SplitSizes {
        n: 5000,
        m: 1000,
        k: 4000,
        m0: 900,
    };

    pub fn m1(&self) -> usize {
        self.m - self.m0
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return Err(invalid(format!("need 0 < k < n, got k={} n={}", self.k, self.n)));
        }
        if self.m == 0 || self.m0 > self.m {
            return Err(invalid(format!(
                "need m > 0 and m0 <= m, got m={} m0={}",
                self.m, self.m0
            )));
        }
        Ok(())
    }
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self::DESK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SyntheticFamily {
    /// N(0, I) against N(mu, I) with `shift` on the first `shifted` coords.
    IndependentGaussian {
        /// Defaults to sqrt(2 ln d).
        #[serde(default)]
        shift: Option<f64>,
        #[serde(default = "default_shifted")]
        shifted: usize,
    },
    /// Beta(null) against Beta(alt) on the first `affected` coords,
    /// Beta(1, 1) elsewhere.
    NonGaussianBeta {
        #[serde(default = "default_beta_null")]
        null: (f64, f64),
        #[serde(default = "default_beta_alt")]
        alt: (f64, f64),
        #[serde(default = "default_affected")]
        affected: usize,
    },
    /// N(a 1, S) against N((a + delta) 1, S), S = c 11' + (b2 - c) I.
    ExchangeableGaussian {
        #[serde(default)]
        a: f64,
        #[serde(default = "default_b2")]
        b2: f64,
        #[serde(default = "default_c")]
        c: f64,
        /// Defaults to sqrt(2 ln d) / 2.
        #[serde(default)]
        delta: Option<f64>,
    },
}

fn default_shifted() -> usize {
    5
}
fn default_beta_null() -> (f64, f64) {
    (5.0, 5.0)
}
fn default_beta_alt() -> (f64, f64) {
    (1.0, 3.0)
}
fn default_affected() -> usize {
    2
}
fn default_b2() -> f64 {
    1.0
}
fn default_c() -> f64 {
    0.3
}

impl SyntheticFamily {
    pub fn independent_gaussian() -> Self {
        SyntheticFamily::IndependentGaussian {
            shift: None,
            shifted: default_shifted(),
        }
    }

    pub fn non_gaussian_beta() -> Self {
        SyntheticFamily::NonGaussianBeta {
            null: default_beta_null(),
            alt: default_beta_alt(),
            affected: default_affected(),
        }
    }

    pub fn exchangeable_gaussian() -> Self {
        SyntheticFamily::ExchangeableGaussian {
            a: 0.0,
            b2: default_b2(),
            c: default_c(),
            delta: None,
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            SyntheticFamily::IndependentGaussian { .. } => "independent_gaussian",
            SyntheticFamily::NonGaussianBeta { .. } => "non_gaussian",
            SyntheticFamily::ExchangeableGaussian { .. } => "exchangeable_gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub family: SyntheticFamily,
    #[serde(default = "default_dim")]
    pub d: usize,
}

fn default_dim() -> usize {
    20
}

impl SyntheticSpec {
    pub fn new(family: SyntheticFamily) -> Self {
        Self { family, d: 20 }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        match &self.family {
            SyntheticFamily::IndependentGaussian { shifted, shift } => {
                if d < *shifted || *shifted == 0 {
                    return Err(invalid(format!("need 1 <= shifted ({shifted}) <= d ({d})")));
                }
                if shift.is_some_and(|s| !s.is_finite()) {
                    return Err(invalid("shift must be finite"));
                }
            }
            SyntheticFamily::NonGaussianBeta { null, alt, affected } => {
                if d < *affected || *affected == 0 {
                    return Err(invalid(format!("need 1 <= affected ({affected}) <= d ({d})")));
                }
                for (p, q) in [null, alt] {
                    if !(*p > 0.0 && *q > 0.0) {
                        return Err(invalid("Beta parameters must be positive"));
                    }
                }
            }
            SyntheticFamily::ExchangeableGaussian { b2, c, delta, a } => {
                // positive definite iff b2 > c > -b2 / (d - 1)
                let lower = if d > 1 {
                    -b2 / (d as f64 - 1.0)
                } else {
                    f64::NEG_INFINITY
                };
                if !(b2 > c && *c > lower) {
                    return Err(invalid(format!(
                        "covariance not positive definite: need b2 > c > -b2/(d-1), got b2={b2} c={c}"
                    )));
                }
                if !a.is_finite() || delta.is_some_and(|v| !v.is_finite()) {
                    return Err(invalid("means must be finite"));
                }
            }
        }
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(())
    }

    fn sampler(&self) -> Sampler {
        let d = self.d;
        let log_shift = (2.0 * (d as f64).ln()).sqrt();
        match &self.family {
            SyntheticFamily::IndependentGaussian { shift, shifted } => Sampler::Gaussian {
                shift: shift.unwrap_or(log_shift),
                shifted: *shifted,
            },
            SyntheticFamily::NonGaussianBeta { null, alt, affected } => Sampler::Beta {
                null: Beta::new(null.0, null.1).expect("validated"),
                alt: Beta::new(alt.0, alt.1).expect("validated"),
                flat: Beta::new(1.0, 1.0).expect("valid"),
                affected: *affected,
            },
            SyntheticFamily::ExchangeableGaussian { a, b2, c, delta } => {
                // S^(1/2) = sqrt(b2 - c) (I + s 11'), (1 + s d)^2 = 1 + t d
                let t = c / (b2 - c);
                let s = ((1.0 + t * d as f64).sqrt() - 1.0) / d as f64;
                Sampler::Exchangeable {
                    a: *a,
                    delta: delta.unwrap_or(log_shift / 2.0),
                    scale: (b2 - c).sqrt(),
                    s,
                }
            }
        }
    }
}

enum Sampler {
    Gaussian {
        shift: f64,
        shifted: usize,
    },
    Beta {
        null: Beta<f64>,
        alt: Beta<f64>,
        flat: Beta<f64>,
        affected: usize,
    },
    Exchangeable {
        a: f64,
        delta: f64,
        scale: f64,
        s: f64,
    },
}

impl Sampler {
    fn draw(&self, novelty: bool, out: &mut [f64], rng: &mut impl Rng) {
        match self {
            Sampler::Gaussian { shift, shifted } => {
                for (j, v) in out.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = if novelty && j < *shifted { z + shift } else { z };
                }
            }
            Sampler::Beta {
                null,
                alt,
                flat,
                affected,
            } => {
                for (j, v) in out.iter_mut().enumerate() {
                    *v = if j < *affected {
                        if novelty {
                            alt.sample(rng)
                        } else {
                            null.sample(rng)
                        }
                    } else {
                        flat.sample(rng)
                    };
                }
            }
            Sampler::Exchangeable { a, delta, scale, s } => {
                let mut total = 0.0;
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                    total += *v;
                }
                let mean = if novelty { a + delta } else { *a };
                for v in out.iter_mut() {
                    *v = mean + scale * (*v + s * total);
                }
            }
        }
    }
}

/// Draw `rows` i.i.d. samples from the null (`novelty = false`) or the
/// alternative distribution.
pub fn sample(spec: &SyntheticSpec, novelty: bool, rows: usize, rng: &mut impl Rng) -> Result<Matrix> {
    spec.validate()?;
    let sampler = spec.sampler();
    let mut m = Matrix::zeros(rows, spec.d);
    for i in 0..rows {
        sampler.draw(novelty, m.row_mut(i), rng);
    }
    Ok(m)
}

/// Fresh synthetic split. Test rows are shuffled; ground truth marks the
/// novelties.
pub fn generate_split(spec: &SyntheticSpec, sizes: SplitSizes, seed: u64) -> Result<DataSplit> {
    sizes.validate()?;
    spec.validate()?;
    let mut rng = seed::rng(seed, &[]);
    let nulls = sample(spec, false, sizes.n, &mut rng)?;
    let test_nulls = sample(spec, false, sizes.m0, &mut rng)?;
    let novelties = sample(spec, true, sizes.m1(), &mut rng)?;
    let mut order: Vec<usize> = (0..sizes.m).collect();
    order.shuffle(&mut rng);
    assemble(
        nulls,
        sizes.k,
        &Matrix::vstack(&[&test_nulls, &novelties])?,
        sizes.m0,
        &order,
    )
}

/// `pool` holds test nulls first, then novelties; `order[i]` is the pool row
/// placed at test position `i`.
fn assemble(nulls: Matrix, k: usize, pool: &Matrix, m0: usize, order: &[usize]) -> Result<DataSplit> {
    let train: Vec<usize> = (0..k).collect();
    let calib: Vec<usize> = (k..nulls.rows()).collect();
    let test = pool.select_rows(order);
    let truth = order.iter().map(|&i| i >= m0).collect();
    DataSplit::new(nulls.select_rows(&train), nulls.select_rows(&calib), test, Some(truth))
}

/// A labelled CSV file with a header row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDatasetSpec {
    pub path: PathBuf,
    pub label_column: String,
    /// Raw label values (compared after trimming) that mark a null row.
    pub null_labels: Vec<String>,
    /// Feature columns to use; all non-label columns when absent.
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

/// Parsed file: features plus a null flag per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDataset {
    pub features: Matrix,
    pub is_null: Vec<bool>,
    pub columns: Vec<String>,
}

impl RealDataset {
    pub fn null_count(&self) -> usize {
        self.is_null.iter().filter(|&&b| b).count()
    }

    pub fn novelty_count(&self) -> usize {
        self.is_null.len() - self.null_count()
    }
}

pub fn read_dataset(spec: &RealDatasetSpec) -> Result<RealDataset> {
    read_dataset_from(&spec.path, spec)
}

fn read_dataset_from(path: &Path, spec: &RealDatasetSpec) -> Result<RealDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| format_error(1, "", e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| *h == spec.label_column)
        .ok_or_else(|| format_error(1, &spec.label_column, "label column not found".into()))?;
    let feature_idx: Vec<usize> = match &spec.feature_columns {
        Some(names) => names
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| format_error(1, n, "feature column not found".into()))
            })
            .collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(format_error(1, "", "no feature columns".into()));
    }
    let columns: Vec<String> = feature_idx.iter().map(|&i| header[i].clone()).collect();
    let mut features = Matrix::empty(feature_idx.len());
    let mut is_null = Vec::new();
    let mut row = vec![0.0; feature_idx.len()];
    for (r, record) in reader.records().enumerate() {
        // header is line 1
        let line = r + 2;
        let record = record.map_err(|e| format_error(line, "", e.to_string()))?;
        let label = record
            .get(label_idx)
            .ok_or_else(|| format_error(line, &spec.label_column, "missing field".into()))?
            .trim();
        for (slot, &c) in row.iter_mut().zip(&feature_idx) {
            let raw = record
                .get(c)
                .ok_or_else(|| format_error(line, &header[c], "missing field".into()))?;
            *slot = raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format_error(line, &header[c], format!("not a finite number: {raw:?}")))?;
        }
        features.push_row(&row)?;
        is_null.push(spec.null_labels.iter().any(|n| n.trim() == label));
    }
    Ok(RealDataset {
        features,
        is_null,
        columns,
    })
}

fn format_error(row: usize, column: &str, message: String) -> Error {
    Error::Format {
        row,
        column: column.to_string(),
        message,
    }
}

/// Subsample a split from a parsed dataset without replacement.
pub fn split_real(data: &RealDataset, sizes: SplitSizes, standardize: bool, seed: u64) -> Result<DataSplit> {
    sizes.validate()?;
    let mut nulls: Vec<usize> = (0..data.is_null.len()).filter(|&i| data.is_null[i]).collect();
    let mut novel: Vec<usize> = (0..data.is_null.len()).filter(|&i| !data.is_null[i]).collect();
    let need_null = sizes.n + sizes.m0;
    if nulls.len() < need_null {
        return Err(Error::Size(format!(
            "need {need_null} null rows, file has {} (short by {})",
            nulls.len(),
            need_null - nulls.len()
        )));
    }
    if novel.len() < sizes.m1() {
        return Err(Error::Size(format!(
            "need {} novelty rows, file has {} (short by {})",
            sizes.m1(),
            novel.len(),
            sizes.m1() - novel.len()
        )));
    }
    let mut rng = seed::rng(seed, &[]);
    nulls.shuffle(&mut rng);
    novel.shuffle(&mut rng);
    let mut null_rows = data.features.select_rows(&nulls[..sizes.n]);
    let mut pool_idx = nulls[sizes.n..need_null].to_vec();
    pool_idx.extend_from_slice(&novel[..sizes.m1()]);
    let mut pool = data.features.select_rows(&pool_idx);
    if standardize {
        let train: Vec<usize> = (0..sizes.k).collect();
        let (mean, sd) = column_stats(&null_rows.select_rows(&train));
        for m in [&mut null_rows, &mut pool] {
            for i in 0..m.rows() {
                for ((v, mu), s) in m.row_mut(i).iter_mut().zip(&mean).zip(&sd) {
                    *v = (*v - mu) / s;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..sizes.m).collect();
    order.shuffle(&mut rng);
    assemble(null_rows, sizes.k, &pool, sizes.m0, &order)
}

/// Read the file and subsample a split.
pub fn load_real_split(spec: &RealDatasetSpec, sizes: SplitSizes, seed: u64) -> Result<DataSplit> {
    let data = read_dataset(spec)?;
    split_real(&data, sizes, spec.standardize, seed)
}

/// Column means and standard deviations; constant columns get unit scale.
pub fn column_stats(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut mean = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_are_validated() {
        let spec = SyntheticSpec::new(SyntheticFamily::independent_gaussian());
        for sizes in [
            SplitSizes {
                n: 10,
                m: 5,
                k: 10,
                m0: 2,
            },
            SplitSizes {
                n: 10,
                m: 5,
                k: 0,
                m0: 2,
            },
            SplitSizes {
                n: 10,
                m: 5,
                k: 5,
                m0: 6,
            },
        ] {
            assert!(generate_split(&spec, sizes, 0).is_err());
        }
    }

    #[test]
    fn family_constraints() {
        let mut spec = SyntheticSpec::new(SyntheticFamily::independent_gaussian());
        spec.d = 4;
        assert!(spec.validate().is_err());
        let spec = SyntheticSpec {
            family: SyntheticFamily::ExchangeableGaussian {
                a: 0.0,
                b2: 1.0,
                c: -0.1,
                delta: None,
            },
            d: 20,
        };
        // -1/19 > -0.1
        assert!(spec.validate().is_err());
    }

    #[test]
    fn split_shape_and_truth() {
        let spec = SyntheticSpec::new(SyntheticFamily::non_gaussian_beta());
        let sizes = SplitSizes {
            n: 50,
            m: 30,
            k: 40,
            m0: 20,
        };
        let s = generate_split(&spec, sizes, 3).unwrap();
        assert_eq!((s.k(), s.n(), s.m(), s.dim()), (40, 50, 30, 20));
        let truth = s.ground_truth().unwrap();
        assert_eq!(truth.iter().filter(|&&b| b).count(), 10);
        assert_eq!(generate_split(&spec, sizes, 3).unwrap(), s);
        assert_ne!(generate_split(&spec, sizes, 4).unwrap(), s);
    }

    #[test]
    fn exchangeable_with_zero_correlation_is_independent() {
        let spec = SyntheticSpec {
            family: SyntheticFamily::ExchangeableGaussian {
                a: 0.0,
                b2: 4.0,
                c: 0.0,
                delta: Some(1.0),
            },
            d: 3,
        };
        let Sampler::Exchangeable { s, scale, .. } = spec.sampler() else {
            unreachable!()
        };
        assert_eq!(s, 0.0);
        assert_eq!(scale, 2.0);
    }
}
