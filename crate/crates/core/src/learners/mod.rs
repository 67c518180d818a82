//! The two classifiers and their shared plumbing.

mod artifact;
pub mod forest;
pub mod logistic;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use artifact::ModelArtifact;
pub use forest::{
    gini, gini_importance, rf_predict, train_forest, MaxFeatures, RfHyper, RfModel, Tree,
};
pub use logistic::{lr_gradient, train_logistic, train_logistic_traced, LrHyper, LrModel};

use crate::error::{Error, Result};

/// Per-feature Gini importance, aligned with the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(pub Vec<f64>);

impl ImportanceVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices of the `n` largest positive importances, ties to the lower
    /// index.
    pub fn top(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).filter(|&i| self.0[i] > 0.0).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx.truncate(n);
        idx
    }
}

/// Checks that rows are non-empty, rectangular and finite. Returns the
/// feature count.
pub(crate) fn validate_rows(x: &[Vec<f64>], expected: Option<usize>) -> Result<usize> {
    let first = x
        .first()
        .ok_or_else(|| Error::invalid("no training rows"))?;
    let d = first.len();
    if d == 0 {
        return Err(Error::invalid("rows have no features"));
    }
    if let Some(e) = expected {
        if e != d {
            return Err(Error::LengthMismatch {
                expected: e,
                actual: d,
            });
        }
    }
    for row in x {
        if row.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
    }
    Ok(d)
}

/// Sorted distinct labels; at least two are required.
pub(crate) fn class_indices(y: &[usize]) -> Result<Vec<usize>> {
    let classes: Vec<usize> = y
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::invalid("training labels contain a single class"));
    }
    Ok(classes)
}

/// Which classifier to fit, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerSpec {
    Logistic(LrHyper),
    Forest(RfHyper),
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Logistic(_) => "logistic_regression",
            LearnerSpec::Forest(_) => "random_forest",
        }
    }

    /// Logistic regression ignores the seed.
    pub fn fit(&self, x: &[Vec<f64>], y: &[usize], seed: u64) -> Result<Trained> {
        match self {
            LearnerSpec::Logistic(h) => train_logistic(x, y, h).map(Trained::Logistic),
            LearnerSpec::Forest(h) => train_forest(x, y, h, seed).map(Trained::Forest),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trained {
    Logistic(LrModel),
    Forest(RfModel),
}

impl Trained {
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        match self {
            Trained::Logistic(m) => m.predict(x),
            Trained::Forest(m) => m.predict(x),
        }
    }

    /// Logistic probability, or the forest's vote share, for `class`.
    pub fn score(&self, x: &[f64], class: usize) -> Result<f64> {
        match self {
            Trained::Logistic(m) => m.probability_of(x, class),
            Trained::Forest(m) => m.vote_fraction(x, class),
        }
    }
}
