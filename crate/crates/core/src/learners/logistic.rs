//! L2-regularized logistic regression: binary logistic link for two classes,
//! multinomial softmax for more.
//!
//! The objective is the summed negative log-likelihood plus
//! `l2_strength / 2 * ||W||²` (biases unpenalized), minimized by full-batch
//! gradient descent with a Barzilai-Borwein trial step and Armijo
//! backtracking. Every accepted step decreases the objective, and all sums
//! run in a fixed order, so training is bit-reproducible.

use serde::{Deserialize, Serialize};

use super::{class_indices, validate_rows};
use crate::error::{Error, Result};

/// Probabilities are kept inside `[P_EDGE, 1 - P_EDGE]`.
const P_EDGE: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
/// Consecutive steps without a representable decrease before giving up.
const MAX_STALLS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrHyper {
    pub l2_strength: f64,
    pub max_iterations: usize,
    /// Stop once the largest gradient component falls below this.
    pub tolerance: f64,
    /// z-score features with training-row statistics.
    pub standardize: bool,
}

impl Default for LrHyper {
    fn default() -> Self {
        LrHyper {
            l2_strength: 1.0,
            max_iterations: 5000,
            tolerance: 1e-8,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    /// Strictly positive; constant features get 1.
    pub std: Vec<f64>,
}

impl Standardization {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardization { mean, std }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    /// Sorted training labels. Binary models score `classes[1]`.
    pub classes: Vec<usize>,
    /// One row for binary models, one per class for softmax.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub standardization: Option<Standardization>,
    pub hyper: LrHyper,
    pub summary: TrainingSummary,
}

impl LrModel {
    pub fn n_features(&self) -> usize {
        self.weights[0].len()
    }

    pub fn is_binary(&self) -> bool {
        self.weights.len() == 1
    }

    fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::LengthMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(match &self.standardization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        })
    }

    fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, z) + b)
            .collect()
    }

    /// Class distribution aligned with `classes`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.transform(x)?;
        let logits = self.logits(&z);
        if self.is_binary() {
            let p = sigmoid(logits[0]).clamp(P_EDGE, 1.0 - P_EDGE);
            Ok(vec![1.0 - p, p])
        } else {
            Ok(softmax(&logits))
        }
    }

    /// Probability of `class` (which must be a training label).
    pub fn probability_of(&self, x: &[f64], class: usize) -> Result<f64> {
        let k = self
            .classes
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| Error::invalid(format!("class {class} not in model")))?;
        Ok(self.predict_proba(x)?[k])
    }

    /// Binary: `classes[1]` iff p ≥ 0.5. Softmax: argmax, ties to the lower
    /// class.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let dist = self.predict_proba(x)?;
        if self.is_binary() {
            return Ok(if dist[1] >= 0.5 {
                self.classes[1]
            } else {
                self.classes[0]
            });
        }
        let mut best = 0;
        for (k, &p) in dist.iter().enumerate() {
            if p > dist[best] {
                best = k;
            }
        }
        Ok(self.classes[best])
    }

    /// Flat parameter vector: each output's weights followed by its bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.weights.len() * (self.n_features() + 1));
        for (w, b) in self.weights.iter().zip(&self.bias) {
            p.extend_from_slice(w);
            p.push(*b);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let d = self.n_features();
        if params.len() != self.weights.len() * (d + 1) {
            return Err(Error::LengthMismatch {
                expected: self.weights.len() * (d + 1),
                actual: params.len(),
            });
        }
        for (k, chunk) in params.chunks(d + 1).enumerate() {
            self.weights[k].copy_from_slice(&chunk[..d]);
            self.bias[k] = chunk[d];
        }
        Ok(())
    }

    fn problem<'a>(&self, x: &'a [Vec<f64>], y: &[usize]) -> Result<Problem<'a>> {
        let targets = y
            .iter()
            .map(|label| {
                self.classes
                    .iter()
                    .position(|c| c == label)
                    .ok_or_else(|| Error::invalid(format!("label {label} not in model")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = match &self.standardization {
            Some(s) => Rows::Owned(x.iter().map(|r| s.apply(r)).collect()),
            None => Rows::Borrowed(x),
        };
        Ok(Problem {
            rows,
            targets,
            outputs: self.weights.len(),
            d: self.n_features(),
            lambda: self.hyper.l2_strength,
        })
    }

    /// Regularized objective at the model's current parameters.
    pub fn objective(&self, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
        validate_rows(x, Some(self.n_features()))?;
        Ok(self.problem(x, y)?.value(&self.params()))
    }
}

/// Analytic gradient of the regularized objective with respect to
/// [`LrModel::params`], evaluated on `(x, y)`.
pub fn lr_gradient(model: &LrModel, x: &[Vec<f64>], y: &[usize]) -> Result<Vec<f64>> {
    validate_rows(x, Some(model.n_features()))?;
    if x.len() != y.len() {
        return Err(Error::invalid("rows and labels differ in length"));
    }
    Ok(model.problem(x, y)?.value_and_gradient(&model.params()).1)
}

pub fn train_logistic(x: &[Vec<f64>], y: &[usize], hyper: &LrHyper) -> Result<LrModel> {
    train_logistic_traced(x, y, hyper).map(|(m, _)| m)
}

/// Training that also returns the objective after every accepted step
/// (first entry: the all-zero starting point).
pub fn train_logistic_traced(
    x: &[Vec<f64>],
    y: &[usize],
    hyper: &LrHyper,
) -> Result<(LrModel, Vec<f64>)> {
    let d = validate_rows(x, None)?;
    if x.len() != y.len() {
        return Err(Error::invalid("rows and labels differ in length"));
    }
    if hyper.l2_strength.is_nan()
        || hyper.l2_strength < 0.0
        || hyper.tolerance.is_nan()
        || hyper.tolerance <= 0.0
    {
        return Err(Error::invalid("l2_strength must be ≥ 0 and tolerance > 0"));
    }
    let classes = class_indices(y)?;
    let outputs = if classes.len() == 2 { 1 } else { classes.len() };

    let mut model = LrModel {
        classes,
        weights: vec![vec![0.0; d]; outputs],
        bias: vec![0.0; outputs],
        standardization: hyper.standardize.then(|| Standardization::fit(x)),
        hyper: *hyper,
        summary: TrainingSummary {
            iterations: 0,
            converged: false,
            final_objective: f64::NAN,
            gradient_norm: f64::NAN,
        },
    };
    let problem = model.problem(x, y)?;
    let (params, trace, summary) = descend(&problem, model.params(), hyper)?;
    model.set_params(&params)?;
    model.summary = summary;
    if !summary.converged {
        log::warn!(
            "logistic regression stopped after {} iterations, gradient {:.3e}",
            summary.iterations,
            summary.gradient_norm
        );
    }
    Ok((model, trace))
}

fn descend(
    problem: &Problem<'_>,
    mut params: Vec<f64>,
    hyper: &LrHyper,
) -> Result<(Vec<f64>, Vec<f64>, TrainingSummary)> {
    let (mut f, mut g) = problem.value_and_gradient(&params);
    if !f.is_finite() {
        return Err(Error::Numeric("non-finite initial objective".into()));
    }
    let mut trace = vec![f];
    let mut step = 1.0 / norm(&g).max(1.0);
    let mut iterations = 0;
    let mut converged = false;
    let mut stalls = 0;

    while iterations < hyper.max_iterations {
        let gmax = max_abs(&g);
        if gmax <= hyper.tolerance {
            converged = true;
            break;
        }
        let g2 = dot(&g, &g);
        let mut t = step;
        let accepted = loop {
            let trial: Vec<f64> = params.iter().zip(&g).map(|(p, gi)| p - t * gi).collect();
            let ft = problem.value(&trial);
            if ft.is_finite() && ft <= f - ARMIJO * t * g2 {
                break Some((trial, ft));
            }
            t *= 0.5;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some((next, _)) = accepted else {
            // No descent possible at working precision.
            converged = gmax <= hyper.tolerance.sqrt();
            break;
        };
        let (fn_, gn) = problem.value_and_gradient(&next);
        if !fn_.is_finite() {
            return Err(Error::Numeric("non-finite objective during descent".into()));
        }
        if f - fn_ <= 4.0 * f64::EPSILON * f.abs() {
            stalls += 1;
        } else {
            stalls = 0;
        }
        // Barzilai-Borwein trial step for the next iteration.
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..params.len() {
            let s = next[i] - params[i];
            sy += s * (gn[i] - g[i]);
            ss += s * s;
        }
        step = if sy > 0.0 && (ss / sy).is_finite() {
            ss / sy
        } else {
            t * 2.0
        };
        params = next;
        f = fn_;
        g = gn;
        trace.push(f);
        iterations += 1;
        if stalls >= MAX_STALLS {
            converged = max_abs(&g) <= hyper.tolerance.sqrt();
            break;
        }
    }
    if !converged && max_abs(&g) <= hyper.tolerance {
        converged = true;
    }
    let summary = TrainingSummary {
        iterations,
        converged,
        final_objective: f,
        gradient_norm: max_abs(&g),
    };
    Ok((params, trace, summary))
}

enum Rows<'a> {
    Borrowed(&'a [Vec<f64>]),
    Owned(Vec<Vec<f64>>),
}

impl Rows<'_> {
    fn as_slice(&self) -> &[Vec<f64>] {
        match self {
            Rows::Borrowed(r) => r,
            Rows::Owned(r) => r,
        }
    }
}

struct Problem<'a> {
    rows: Rows<'a>,
    /// Index into `classes` per row.
    targets: Vec<usize>,
    outputs: usize,
    d: usize,
    lambda: f64,
}

impl Problem<'_> {
    fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        params
            .chunks(self.d + 1)
            .map(|c| dot(&c[..self.d], x) + c[self.d])
            .collect()
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        let sq: f64 = params
            .chunks(self.d + 1)
            .map(|c| c[..self.d].iter().map(|w| w * w).sum::<f64>())
            .sum();
        0.5 * self.lambda * sq
    }

    fn value(&self, params: &[f64]) -> f64 {
        let mut nll = 0.0;
        for (x, &t) in self.rows.as_slice().iter().zip(&self.targets) {
            let z = self.logits(params, x);
            nll += if self.outputs == 1 {
                softplus(z[0]) - if t == 1 { z[0] } else { 0.0 }
            } else {
                log_sum_exp(&z) - z[t]
            };
        }
        nll + self.penalty(params)
    }

    fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let stride = self.d + 1;
        let mut grad = vec![0.0; params.len()];
        let mut nll = 0.0;
        for (x, &t) in self.rows.as_slice().iter().zip(&self.targets) {
            let z = self.logits(params, x);
            let residuals: Vec<f64> = if self.outputs == 1 {
                let y = if t == 1 { 1.0 } else { 0.0 };
                nll += softplus(z[0]) - y * z[0];
                vec![sigmoid(z[0]) - y]
            } else {
                nll += log_sum_exp(&z) - z[t];
                let mut p = softmax(&z);
                p[t] -= 1.0;
                p
            };
            for (k, r) in residuals.iter().enumerate() {
                let block = &mut grad[k * stride..(k + 1) * stride];
                for (gj, xj) in block[..self.d].iter_mut().zip(x) {
                    *gj += r * xj;
                }
                block[self.d] += r;
            }
        }
        for k in 0..self.outputs {
            for j in 0..self.d {
                grad[k * stride + j] += self.lambda * params[k * stride + j];
            }
        }
        (nll + self.penalty(params), grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_std() -> LrHyper {
        LrHyper {
            standardize: false,
            ..LrHyper::default()
        }
    }

    #[test]
    fn one_feature_sign_matches_grid_minimum() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [0, 1];
        let m = train_logistic(&x, &y, &no_std()).unwrap();
        assert!(m.weights[0][0] > 0.0);
        assert!(m.probability_of(&[1.0], 1).unwrap() > 0.5);

        // Grid oracle over (w, b) on the same objective, written out longhand.
        let obj = |w: f64, b: f64| {
            let nll = |z: f64, yv: f64| (1.0 + z.exp()).ln() - yv * z;
            nll(b, 0.0) + nll(w + b, 1.0) + 0.5 * w * w
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -500..=500 {
            for j in -500..=500 {
                let (w, b) = (i as f64 * 0.01, j as f64 * 0.01);
                let v = obj(w, b);
                if v < best.0 {
                    best = (v, w, b);
                }
            }
        }
        assert!(best.1 > 0.0);
        assert!((m.weights[0][0] - best.1).abs() < 0.011);
        assert!((m.bias[0] - best.2).abs() < 0.011);
    }

    #[test]
    fn zero_model_is_half() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let (m, trace) = train_logistic_traced(
            &x,
            &[0, 1],
            &LrHyper {
                max_iterations: 0,
                ..no_std()
            },
        )
        .unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(m.probability_of(&[3.0, -2.0], 1).unwrap(), 0.5);
    }

    #[test]
    fn objective_never_increases() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                vec![
                    (i as f64 * 0.7).sin(),
                    (i as f64 * 1.3).cos(),
                    i as f64 / 12.0,
                ]
            })
            .collect();
        let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let (m, trace) = train_logistic_traced(&x, &y, &LrHyper::default()).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.summary.converged, "{:?}", m.summary);
        let g = lr_gradient(&m, &x, &y).unwrap();
        assert!(g.iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn unregularized_separable_weights_grow() {
        let x = vec![vec![-1.0], vec![-0.5], vec![0.5], vec![1.0]];
        let y = [0, 0, 1, 1];
        // Without a penalty the optimum is at infinity: every tighter
        // tolerance pushes the weight further out.
        let norms: Vec<f64> = [1e-2, 1e-4, 1e-8]
            .iter()
            .map(|&tol| {
                let h = LrHyper {
                    l2_strength: 0.0,
                    tolerance: tol,
                    ..no_std()
                };
                train_logistic(&x, &y, &h).unwrap().weights[0][0].abs()
            })
            .collect();
        assert!(norms[0] < norms[1] && norms[1] < norms[2], "{norms:?}");
    }

    #[test]
    fn softmax_distribution_sums_to_one() {
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y: Vec<usize> = (0..9).map(|i| i / 3).collect();
        let m = train_logistic(&x, &y, &LrHyper::default()).unwrap();
        let p = m.predict_proba(&[4.0, 16.0]).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), 0);
        assert_eq!(m.predict(&[8.0, 64.0]).unwrap(), 2);
    }

    #[test]
    fn errors() {
        assert!(train_logistic(&[vec![1.0], vec![2.0]], &[1, 1], &LrHyper::default()).is_err());
        assert!(
            train_logistic(&[vec![f64::NAN], vec![2.0]], &[0, 1], &LrHyper::default()).is_err()
        );
        let m = train_logistic(&[vec![0.0], vec![1.0]], &[0, 1], &LrHyper::default()).unwrap();
        assert!(matches!(
            m.predict_proba(&[1.0, 2.0]),
            Err(Error::LengthMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn increasing_a_positive_feature_raises_p() {
        let x = vec![
            vec![0.0, 1.0],
            vec![0.2, 0.9],
            vec![0.9, 0.1],
            vec![1.0, 0.3],
        ];
        let y = [0, 0, 1, 1];
        let m = train_logistic(&x, &y, &LrHyper::default()).unwrap();
        let std = m.standardization.as_ref().unwrap();
        let w0 = m.weights[0][0] / std.std[0];
        assert!(w0 > 0.0);
        let base = m.probability_of(&[0.5, 0.5], 1).unwrap();
        let up = m.probability_of(&[0.6, 0.5], 1).unwrap();
        assert!(up > base);
    }
}
