//! Random forest of CART trees grown on bootstrap resamples with Gini splits.
//!
//! Tree `t` draws its bootstrap sample and feature subsets from a ChaCha
//! stream seeded by `seed::derive(seed, t)`, so a forest depends only on
//! `(data, hyper, seed)` and trees can be grown in parallel.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_indices, validate_rows, ImportanceVector};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(n_features))`.
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfHyper {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for RfHyper {
    fn default() -> Self {
        RfHyper {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }
}

/// Gini impurity `1 - Σ p_k²` of a class-count vector.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// A tree as parallel node arrays in preorder. Leaves have `feature = -1`
/// and `left = right = -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    /// Training class counts per node, aligned with the forest's classes.
    pub counts: Vec<Vec<u32>>,
    pub impurity: Vec<f64>,
    pub samples: Vec<u32>,
    pub seed: u64,
}

impl Tree {
    fn new(seed: u64) -> Self {
        Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            counts: Vec::new(),
            impurity: Vec::new(),
            samples: Vec::new(),
            seed,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] < 0
    }

    fn push_leaf(&mut self, counts: Vec<u32>) -> usize {
        let id = self.feature.len();
        self.samples.push(counts.iter().sum());
        self.impurity.push(gini(&counts));
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(-1);
        self.right.push(-1);
        self.counts.push(counts);
        id
    }

    /// Leaf reached by `x`.
    pub fn leaf(&self, x: &[f64]) -> usize {
        let mut node = 0;
        while !self.is_leaf(node) {
            let f = self.feature[node] as usize;
            node = if x[f] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        node
    }

    /// Class index with the most training samples at the leaf; ties to the
    /// lower index.
    pub fn vote(&self, x: &[f64]) -> usize {
        argmax_lowest(&self.counts[self.leaf(x)])
    }

    /// Weighted impurity decrease per feature, normalized to sum 1 (all
    /// zeros for a single-leaf tree).
    pub fn importances(&self, n_features: usize) -> Vec<f64> {
        let mut imp = vec![0.0; n_features];
        for node in 0..self.n_nodes() {
            if self.is_leaf(node) {
                continue;
            }
            let (l, r) = (self.left[node] as usize, self.right[node] as usize);
            let decrease = self.samples[node] as f64 * self.impurity[node]
                - self.samples[l] as f64 * self.impurity[l]
                - self.samples[r] as f64 * self.impurity[r];
            imp[self.feature[node] as usize] += decrease.max(0.0);
        }
        normalize(&mut imp);
        imp
    }
}

fn argmax_lowest(v: &[u32]) -> usize {
    let mut best = 0;
    for (k, &c) in v.iter().enumerate() {
        if c > v[best] {
            best = k;
        }
    }
    best
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub classes: Vec<usize>,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    pub hyper: RfHyper,
    pub seed: u64,
}

impl RfModel {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Per-class vote counts aligned with `classes`.
    pub fn votes(&self, x: &[f64]) -> Result<Vec<u32>> {
        self.check(x)?;
        let mut votes = vec![0u32; self.classes.len()];
        for t in &self.trees {
            votes[t.vote(x)] += 1;
        }
        Ok(votes)
    }

    /// Majority vote; ties go to the lower class.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.classes[argmax_lowest(&self.votes(x)?)])
    }

    /// Share of trees voting for `class`.
    pub fn vote_fraction(&self, x: &[f64], class: usize) -> Result<f64> {
        let k = self
            .classes
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| Error::invalid(format!("class {class} not in model")))?;
        let votes = self.votes(x)?;
        Ok(votes[k] as f64 / self.trees.len().max(1) as f64)
    }
}

pub fn rf_predict(model: &RfModel, x: &[f64]) -> Result<usize> {
    model.predict(x)
}

/// Mean over split-bearing trees of their normalized impurity decreases,
/// renormalized to sum 1. All zeros when no tree split.
pub fn gini_importance(model: &RfModel) -> ImportanceVector {
    let mut total = vec![0.0; model.n_features];
    let mut used = 0usize;
    for t in &model.trees {
        if t.n_nodes() <= 1 {
            continue;
        }
        used += 1;
        for (acc, v) in total.iter_mut().zip(t.importances(model.n_features)) {
            *acc += v;
        }
    }
    if used > 0 {
        total.iter_mut().for_each(|v| *v /= used as f64);
        normalize(&mut total);
    }
    ImportanceVector(total)
}

pub fn train_forest(x: &[Vec<f64>], y: &[usize], hyper: &RfHyper, seed: u64) -> Result<RfModel> {
    let d = validate_rows(x, None)?;
    if x.len() != y.len() {
        return Err(Error::invalid("rows and labels differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("random forest needs at least 2 samples"));
    }
    if hyper.n_trees == 0 || hyper.min_samples_leaf == 0 {
        return Err(Error::invalid(
            "n_trees and min_samples_leaf must be positive",
        ));
    }
    let classes = class_indices(y)?;
    let targets: Vec<usize> = y
        .iter()
        .map(|l| classes.binary_search(l).expect("label drawn from y"))
        .collect();
    let ctx = Grow {
        x,
        targets: &targets,
        n_classes: classes.len(),
        mtry: hyper.max_features.resolve(d),
        n_features: d,
        hyper,
    };
    let trees = (0..hyper.n_trees)
        .into_par_iter()
        .map(|t| ctx.tree(seed::derive(seed, t as u64)))
        .collect();
    Ok(RfModel {
        classes,
        n_features: d,
        trees,
        hyper: *hyper,
        seed,
    })
}

struct Grow<'a> {
    x: &'a [Vec<f64>],
    targets: &'a [usize],
    n_classes: usize,
    mtry: usize,
    n_features: usize,
    hyper: &'a RfHyper,
}

struct Split {
    feature: usize,
    threshold: f64,
    child_impurity: f64,
}

impl Grow<'_> {
    fn tree(&self, tree_seed: u64) -> Tree {
        let mut rng = seed::rng(tree_seed);
        let n = self.x.len();
        let mut rows: Vec<usize> = if self.hyper.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut tree = Tree::new(tree_seed);
        self.grow(&mut tree, &mut rows, 0, &mut rng);
        tree
    }

    fn class_counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_classes];
        for &r in rows {
            c[self.targets[r]] += 1;
        }
        c
    }

    fn grow(
        &self,
        tree: &mut Tree,
        rows: &mut [usize],
        depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let counts = self.class_counts(rows);
        let node = tree.push_leaf(counts);
        let min_leaf = self.hyper.min_samples_leaf;
        if tree.impurity[node] == 0.0
            || rows.len() < 2 * min_leaf
            || self.hyper.max_depth.is_some_and(|m| depth >= m)
        {
            return node;
        }

        let mut features = sample_indices(rng, self.n_features, self.mtry).into_vec();
        features.sort_unstable();
        let Some(split) = self.best_split(rows, &features) else {
            return node;
        };

        let (f, thr) = (split.feature, split.threshold);
        rows.sort_by(|&a, &b| {
            (self.x[a][f] > thr)
                .cmp(&(self.x[b][f] > thr))
                .then(a.cmp(&b))
        });
        let n_left = rows.iter().filter(|&&r| self.x[r][f] <= thr).count();
        let (left_rows, right_rows) = rows.split_at_mut(n_left);

        tree.feature[node] = f as i64;
        tree.threshold[node] = thr;
        let l = self.grow(tree, left_rows, depth + 1, rng);
        let r = self.grow(tree, right_rows, depth + 1, rng);
        tree.left[node] = l as i64;
        tree.right[node] = r as i64;
        debug_assert!(split.child_impurity <= tree.impurity[node] + 1e-12);
        node
    }

    /// Lowest weighted child impurity over midpoints of consecutive distinct
    /// values; ties keep the smaller feature, then the smaller threshold.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.hyper.min_samples_leaf;
        let total = self.class_counts(rows);
        let mut best: Option<Split> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);

        for &f in features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[r][f], self.targets[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut left = vec![0u32; self.n_classes];
            for i in 0..n - 1 {
                left[sorted[i].1] += 1;
                let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
                if lo == hi {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right: Vec<u32> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let child = (nl as f64 * gini(&left) + nr as f64 * gini(&right)) / n as f64;
                if best.as_ref().is_none_or(|b| child < b.child_impurity) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        child_impurity: child,
                    });
                }
            }
        }
        best
    }
}
