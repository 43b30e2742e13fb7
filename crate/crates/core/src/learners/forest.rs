//! Random forest of Gini-split classification trees.
//!
//! Each tree sees a bootstrap resample (drawn as per-row multiplicities) and
//! considers a random subset of features at every node. The forest score is
//! the mean over trees of the leaf's class-1 fraction.

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Fixed(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    feature: u32,
    /// Split threshold for internal nodes, class-1 fraction for leaves.
    value: f64,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    fn predict(&self, z: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if z[node.feature as usize] <= node.value {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    params: ForestParams,
    dim: usize,
    trees: Vec<Tree>,
}

impl RandomForest {
    /// Fit on rows already in canonical order.
    pub(crate) fn fit(x: &Matrix, y: &[u8], params: &ForestParams, seed: u64) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(invalid("forest needs at least one tree"));
        }
        if params.min_samples_leaf == 0 || params.min_samples_split < 2 {
            return Err(invalid("min_samples_leaf >= 1 and min_samples_split >= 2"));
        }
        let n = x.rows();
        let mtry = params.max_features.resolve(x.cols());
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed, &[t as u64]);
                let mut weights = vec![0u32; n];
                if params.bootstrap {
                    for _ in 0..n {
                        weights[rng.gen_range(0..n)] += 1;
                    }
                } else {
                    weights.fill(1);
                }
                let mut samples: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > 0).collect();
                let mut builder = TreeBuilder {
                    x,
                    y,
                    w: &weights,
                    params,
                    mtry,
                    rng,
                    nodes: Vec::new(),
                    scratch: Vec::with_capacity(samples.len()),
                    features: (0..x.cols()).collect(),
                };
                builder.grow(&mut samples, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Ok(Self {
            params: params.clone(),
            dim: x.cols(),
            trees,
        })
    }

    /// A forest of single-leaf trees that all output `value`.
    pub fn constant(dim: usize, n_trees: usize, value: f64) -> Self {
        let leaf = Tree {
            nodes: vec![Node {
                feature: LEAF,
                value,
                left: 0,
                right: 0,
            }],
        };
        Self {
            params: ForestParams {
                n_trees,
                ..ForestParams::default()
            },
            dim,
            trees: vec![leaf; n_trees],
        }
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict(z)).sum();
        total / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    w: &'a [u32],
    params: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u32)>,
    features: Vec<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    proxy: f64,
}

impl TreeBuilder<'_> {
    fn class_weights(&self, samples: &[u32]) -> (u64, u64) {
        samples.iter().fold((0, 0), |(w0, w1), &i| {
            let w = self.w[i as usize] as u64;
            if self.y[i as usize] == 1 {
                (w0, w1 + w)
            } else {
                (w0 + w, w1)
            }
        })
    }

    fn push_leaf(&mut self, w0: u64, w1: u64) -> u32 {
        self.nodes.push(Node {
            feature: LEAF,
            value: w1 as f64 / (w0 + w1) as f64,
            left: 0,
            right: 0,
        });
        (self.nodes.len() - 1) as u32
    }

    fn grow(&mut self, samples: &mut [u32], depth: usize) -> u32 {
        let (w0, w1) = self.class_weights(samples);
        let at_depth_limit = self.params.max_depth.is_some_and(|m| depth >= m);
        if w0 == 0
            || w1 == 0
            || at_depth_limit
            || ((w0 + w1) as usize) < self.params.min_samples_split
            || samples.len() < 2 * self.params.min_samples_leaf
        {
            return self.push_leaf(w0, w1);
        }
        let Some(split) = self.best_split(samples) else {
            return self.push_leaf(w0, w1);
        };
        let id = self.nodes.len();
        self.nodes.push(Node {
            feature: split.feature as u32,
            value: split.threshold,
            left: 0,
            right: 0,
        });
        let mid = partition(samples, |i| self.x.row(i as usize)[split.feature] <= split.threshold);
        let (left, right) = samples.split_at_mut(mid);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id].left = l;
        self.nodes[id].right = r;
        id as u32
    }

    /// Best Gini split over a random feature subset. Constant features do
    /// not count towards the `mtry` budget.
    fn best_split(&mut self, samples: &[u32]) -> Option<Split> {
        self.features.shuffle(&mut self.rng);
        let min_leaf = self.params.min_samples_leaf;
        let (tot0, tot1) = self.class_weights(samples);
        let mut best: Option<Split> = None;
        let mut informative = 0;
        for fi in 0..self.features.len() {
            if informative >= self.mtry {
                break;
            }
            let f = self.features[fi];
            self.scratch.clear();
            self.scratch
                .extend(samples.iter().map(|&i| (self.x.row(i as usize)[f], i)));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let first = self.scratch[0].0;
            let last = self.scratch[self.scratch.len() - 1].0;
            if first == last {
                continue;
            }
            informative += 1;
            let (mut l0, mut l1) = (0u64, 0u64);
            let n = self.scratch.len();
            for j in 0..n - 1 {
                let (v, i) = self.scratch[j];
                let w = self.w[i as usize] as u64;
                if self.y[i as usize] == 1 {
                    l1 += w;
                } else {
                    l0 += w;
                }
                let next = self.scratch[j + 1].0;
                if v == next || j + 1 < min_leaf || n - j - 1 < min_leaf {
                    continue;
                }
                let (r0, r1) = (tot0 - l0, tot1 - l1);
                let (wl, wr) = ((l0 + l1) as f64, (r0 + r1) as f64);
                // maximizing this minimizes the weighted child Gini impurity
                let proxy = ((l0 * l0 + l1 * l1) as f64) / wl + ((r0 * r0 + r1 * r1) as f64) / wr;
                if best.as_ref().is_none_or(|b| proxy > b.proxy) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        proxy,
                    });
                }
            }
        }
        best
    }
}

/// Moves elements satisfying `pred` to the front; returns their count.
fn partition(items: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut k = 0;
    for j in 0..items.len() {
        if pred(items[j]) {
            items.swap(k, j);
            k += 1;
        }
    }
    k
}
