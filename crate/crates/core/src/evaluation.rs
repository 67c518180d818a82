//! Splits, cross-validation, confusion-matrix metrics, run aggregation, the
//! random-guessing baseline and the one-tailed Z test.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, Trained};
use crate::seed;

pub const DEFAULT_RUNS: usize = 20;

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OvrCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl OvrCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<usize>,
    /// `matrix[true][predicted]`, indexed by position in `classes`.
    pub matrix: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.matrix.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|k| self.matrix[k][k]).sum()
    }

    pub fn support(&self, k: usize) -> u64 {
        self.matrix[k].iter().sum()
    }

    /// One-vs-rest counts for the class at position `k`.
    pub fn counts(&self, k: usize) -> OvrCounts {
        let tp = self.matrix[k][k];
        let row: u64 = self.matrix[k].iter().sum();
        let col: u64 = self.matrix.iter().map(|r| r[k]).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        OvrCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], classes: &[usize]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid("true and predicted labels differ in length"));
    }
    let pos = |label: usize| {
        classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::invalid(format!("label {label} outside class list {classes:?}")))
    };
    let mut matrix = vec![vec![0u64; classes.len()]; classes.len()];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        matrix[pos(t)?][pos(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        matrix,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Two classes; the second listed class is positive.
    BinaryOverall,
    /// One-vs-rest per class, weighted by class support.
    #[default]
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
}

fn ratio(num: u64, den: u64, what: &str) -> f64 {
    if den == 0 {
        log::warn!("{what} undefined (zero denominator), using 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * (precision * recall) / (precision + recall)
    }
}

/// Accuracy, precision, recall and F1 of a single one-vs-rest table.
pub fn binary_metrics(c: &OvrCounts) -> Result<MetricsReport> {
    if c.total() == 0 {
        return Err(Error::invalid("no predictions"));
    }
    let precision = ratio(c.tp, c.tp + c.fp, "precision");
    let recall = ratio(c.tp, c.fn_ + c.tp, "recall");
    Ok(MetricsReport {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision,
        recall,
        f1: f1(precision, recall),
        averaging: Averaging::BinaryOverall,
    })
}

pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("no predictions"));
    }
    match averaging {
        Averaging::BinaryOverall => {
            if cm.classes.len() != 2 {
                return Err(Error::invalid("binary averaging needs exactly 2 classes"));
            }
            binary_metrics(&cm.counts(1))
        }
        Averaging::Weighted => {
            let n = total as f64;
            let mut precision = 0.0;
            let mut f1_sum = 0.0;
            let mut tp_sum = 0u64;
            for k in 0..cm.classes.len() {
                let support = cm.support(k);
                if support == 0 {
                    continue;
                }
                let c = cm.counts(k);
                let p = ratio(c.tp, c.tp + c.fp, "precision");
                let r = c.tp as f64 / support as f64;
                precision += support as f64 * p;
                f1_sum += support as f64 * f1(p, r);
                tp_sum += c.tp;
            }
            let accuracy = cm.correct() as f64 / n;
            Ok(MetricsReport {
                accuracy,
                precision: precision / n,
                // Σ support·(TP/support) / N reduces to Σ TP / N.
                recall: tp_sum as f64 / n,
                f1: f1_sum / n,
                averaging,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified 80/20 split: `max(1, round(0.2 n))` test samples, allocated
/// to classes in proportion to their size while leaving every class at least
/// one training sample where possible.
pub fn split_80_20(labels: &[usize], seed: u64) -> Result<Split> {
    let n = labels.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "80/20 split needs at least 5 samples, got {n}"
        )));
    }
    let n_test = ((0.2 * n as f64).round() as usize).max(1);
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();

    // Largest-remainder apportionment, capped at size - 1 per class.
    let cap = |k: usize| members[k].len().saturating_sub(1);
    let mut quota: Vec<usize> = members
        .iter()
        .enumerate()
        .map(|(k, m)| (n_test * m.len() / n).min(cap(k)))
        .collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = (n_test * members[a].len()) % n;
        let rb = (n_test * members[b].len()) % n;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = quota.iter().sum();
    for &k in order.iter().cycle().take(order.len() * n) {
        if assigned >= n_test {
            break;
        }
        if quota[k] < cap(k) {
            quota[k] += 1;
            assigned += 1;
        }
    }
    // Only singleton classes left: take test samples from them anyway.
    for &k in &order {
        if assigned >= n_test {
            break;
        }
        if quota[k] < members[k].len() {
            quota[k] += 1;
            assigned += 1;
        }
    }

    let mut rng = seed::rng(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (k, m) in members.iter().enumerate() {
        let mut m = m.clone();
        m.shuffle(&mut rng);
        test.extend_from_slice(&m[..quota[k]]);
        train.extend_from_slice(&m[quota[k]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPrediction {
    /// Row index in the input.
    pub index: usize,
    pub fold: usize,
    pub truth: usize,
    pub predicted: usize,
    /// Score for class 1 (logistic probability or forest vote share), when
    /// class 1 was in the fold's training set.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub predictions: Vec<FoldPrediction>,
    /// Folds whose training set held a single class.
    pub skipped: Vec<usize>,
}

impl CvOutcome {
    pub fn confusion(&self, classes: &[usize]) -> Result<ConfusionMatrix> {
        let t: Vec<usize> = self.predictions.iter().map(|p| p.truth).collect();
        let p: Vec<usize> = self.predictions.iter().map(|p| p.predicted).collect();
        confusion(&t, &p, classes)
    }

    pub fn accuracy(&self) -> f64 {
        let ok = self
            .predictions
            .iter()
            .filter(|p| p.truth == p.predicted)
            .count();
        ok as f64 / self.predictions.len().max(1) as f64
    }
}

fn subset(x: &[Vec<f64>], y: &[usize], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        idx.iter().map(|&i| x[i].clone()).collect(),
        idx.iter().map(|&i| y[i]).collect(),
    )
}

fn predict_one(
    model: &Trained,
    x: &[f64],
    index: usize,
    fold: usize,
    truth: usize,
) -> Result<FoldPrediction> {
    Ok(FoldPrediction {
        index,
        fold,
        truth,
        predicted: model.predict(x)?,
        score: model.score(x, 1).ok(),
    })
}

fn check_xy(x: &[Vec<f64>], y: &[usize]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid("rows and labels differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let first = y[0];
    if y.iter().all(|&l| l == first) {
        return Err(Error::invalid("labels contain a single class"));
    }
    Ok(())
}

/// Leave-one-out: sample `i` is predicted by a model trained on all others,
/// with seed `derive(seed, i)`. Predictions come back in input order.
pub fn loocv(x: &[Vec<f64>], y: &[usize], spec: &LearnerSpec, seed: u64) -> Result<CvOutcome> {
    check_xy(x, y)?;
    let folds: Vec<Result<Option<FoldPrediction>>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let idx: Vec<usize> = (0..x.len()).filter(|&j| j != i).collect();
            let (tx, ty) = subset(x, y, &idx);
            if ty.iter().all(|&l| l == ty[0]) {
                log::warn!("fold {i}: training set holds a single class, skipped");
                return Ok(None);
            }
            let model = spec.fit(&tx, &ty, seed::derive(seed, i as u64))?;
            predict_one(&model, &x[i], i, i, y[i]).map(Some)
        })
        .collect();
    let mut predictions = Vec::with_capacity(x.len());
    let mut skipped = Vec::new();
    for (i, f) in folds.into_iter().enumerate() {
        match f? {
            Some(p) => predictions.push(p),
            None => skipped.push(i),
        }
    }
    Ok(CvOutcome {
        predictions,
        skipped,
    })
}

/// Train on a stratified 80% and predict the remaining 20%.
pub fn holdout(x: &[Vec<f64>], y: &[usize], spec: &LearnerSpec, seed: u64) -> Result<CvOutcome> {
    check_xy(x, y)?;
    let split = split_80_20(y, seed)?;
    let (tx, ty) = subset(x, y, &split.train);
    if ty.iter().all(|&l| l == ty[0]) {
        log::warn!("holdout: training set holds a single class, skipped");
        return Ok(CvOutcome {
            predictions: Vec::new(),
            skipped: vec![0],
        });
    }
    let model = spec.fit(&tx, &ty, seed::derive(seed, 1))?;
    let predictions = split
        .test
        .iter()
        .map(|&i| predict_one(&model, &x[i], i, 0, y[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvOutcome {
        predictions,
        skipped: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Holdout8020,
    Loocv,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Holdout8020 => "80/20 train/test",
            Scheme::Loocv => "leave-one-out",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub mean: f64,
    /// Sample standard deviation over √n.
    pub sem: f64,
    pub n_runs: usize,
}

pub fn aggregate_runs(values: &[f64]) -> Result<RunAggregate> {
    let n = values.len();
    if n == 0 {
        return Err(Error::invalid("no runs to aggregate"));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(RunAggregate {
            mean: values[0],
            sem: 0.0,
            n_runs: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(RunAggregate {
        mean,
        sem: var.sqrt() / (n as f64).sqrt(),
        n_runs: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsAggregate {
    pub accuracy: RunAggregate,
    pub precision: RunAggregate,
    pub recall: RunAggregate,
    pub f1: RunAggregate,
}

impl MetricsAggregate {
    pub fn from_reports(reports: &[MetricsReport]) -> Result<Self> {
        let col = |f: fn(&MetricsReport) -> f64| {
            aggregate_runs(&reports.iter().map(f).collect::<Vec<_>>())
        };
        Ok(MetricsAggregate {
            accuracy: col(|r| r.accuracy)?,
            precision: col(|r| r.precision)?,
            recall: col(|r| r.recall)?,
            f1: col(|r| r.f1)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub run: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
    pub outcome: CvOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub learner: String,
    pub scheme: Scheme,
    pub runs: Vec<EvaluationRun>,
    pub aggregate: MetricsAggregate,
}

/// `n_runs` repetitions of a scheme; run `r` uses seed `derive(seed, r)`.
pub fn evaluate(
    x: &[Vec<f64>],
    y: &[usize],
    spec: &LearnerSpec,
    scheme: Scheme,
    n_runs: usize,
    seed: u64,
    averaging: Averaging,
) -> Result<Evaluation> {
    if n_runs == 0 {
        return Err(Error::invalid("n_runs must be at least 1"));
    }
    check_xy(x, y)?;
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let run_seed = seed::derive(seed, r as u64);
            let outcome = match scheme {
                Scheme::Loocv => loocv(x, y, spec, run_seed)?,
                Scheme::Holdout8020 => holdout(x, y, spec, run_seed)?,
            };
            let metrics = metrics(&outcome.confusion(&classes)?, averaging)?;
            Ok(EvaluationRun {
                run: r,
                seed: run_seed,
                metrics,
                outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.metrics).collect();
    Ok(Evaluation {
        learner: spec.name().to_string(),
        scheme,
        aggregate: MetricsAggregate::from_reports(&reports)?,
        runs,
    })
}

/// Uniform random guessing over the label set, `n_runs` times.
pub fn random_baseline(labels: &[usize], n_runs: usize, seed: u64) -> Result<MetricsAggregate> {
    if n_runs == 0 || labels.is_empty() {
        return Err(Error::invalid(
            "random baseline needs labels and at least one run",
        ));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let reports = (0..n_runs)
        .map(|r| {
            let mut rng = seed::rng(seed::derive(seed, r as u64));
            let guesses: Vec<usize> = labels
                .iter()
                .map(|_| classes[rng.random_range(0..classes.len())])
                .collect();
            metrics(&confusion(labels, &guesses, &classes)?, Averaging::Weighted)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsAggregate::from_reports(&reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemChoice {
    /// The model runs' standard error alone.
    #[default]
    ModelRuns,
    /// `sqrt(sem_model² + sem_baseline²)`.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub z: f64,
    /// Upper-tail standard normal probability of `z`.
    pub p_value: f64,
    pub sem_choice: SemChoice,
}

pub fn z_test(
    model: &RunAggregate,
    baseline: &RunAggregate,
    choice: SemChoice,
) -> SignificanceResult {
    let diff = model.mean - baseline.mean;
    let sem = match choice {
        SemChoice::ModelRuns => model.sem,
        SemChoice::Pooled => model.sem.hypot(baseline.sem),
    };
    let z = if diff == 0.0 {
        0.0
    } else if sem == 0.0 {
        log::warn!("zero standard error: z is infinite");
        diff.signum() * f64::INFINITY
    } else {
        diff / sem
    };
    SignificanceResult {
        z,
        p_value: upper_tail(z),
        sem_choice: choice,
    }
}

fn upper_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        1.0
    } else {
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }
}

/// A labelled row of the performance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub scheme: String,
    pub aggregate: MetricsAggregate,
}

/// Performance table: each metric as mean and sem with three decimals.
pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "scheme",
        "accuracy_mean",
        "accuracy_sem",
        "precision_mean",
        "precision_sem",
        "recall_mean",
        "recall_sem",
        "f1_mean",
        "f1_sem",
    ])?;
    for r in rows {
        let a = &r.aggregate;
        let mut rec = vec![r.model.clone(), r.scheme.clone()];
        for m in [a.accuracy, a.precision, a.recall, a.f1] {
            rec.push(format!("{:.3}", m.mean));
            rec.push(format!("{:.3}", m.sem));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Per-fold prediction log `run,fold,country,true,pred,p`.
pub fn write_fold_log<W: Write>(
    out: W,
    evaluation: &Evaluation,
    countries: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "fold", "country", "true", "pred", "p"])?;
    for run in &evaluation.runs {
        for p in &run.outcome.predictions {
            w.write_record([
                run.run.to_string(),
                p.fold.to_string(),
                countries.get(p.index).cloned().unwrap_or_default(),
                p.truth.to_string(),
                p.predicted.to_string(),
                p.score.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LrHyper, RfHyper};

    #[test]
    fn hand_counted_confusion() {
        let cm = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], &[0, 1]).unwrap();
        assert_eq!(
            cm.counts(1),
            OvrCounts {
                tp: 2,
                fp: 1,
                fn_: 0,
                tn: 1
            }
        );
        assert!(confusion(&[0, 3], &[0, 0], &[0, 1]).is_err());
        assert!(confusion(&[0], &[0, 0], &[0, 1]).is_err());
    }

    #[test]
    fn perfect_and_all_wrong() {
        let cm = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], &[0, 1, 2]).unwrap();
        for k in 0..3 {
            let c = cm.counts(k);
            assert_eq!((c.fp, c.fn_), (0, 0));
        }
        let m = metrics(&cm, Averaging::Weighted).unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, 1.0, 1.0, 1.0)
        );

        let wrong = confusion(&[0, 1, 1], &[1, 0, 0], &[0, 1]).unwrap();
        let c = wrong.counts(1);
        assert_eq!((c.tp, c.tn), (0, 0));
    }

    #[test]
    fn published_formulas() {
        let m = binary_metrics(&OvrCounts {
            tp: 3,
            tn: 4,
            fp: 1,
            fn_: 2,
        })
        .unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_precision_is_zero() {
        let m = binary_metrics(&OvrCounts {
            tp: 0,
            tn: 5,
            fp: 0,
            fn_: 2,
        })
        .unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(binary_metrics(&OvrCounts::default()).is_err());
    }

    #[test]
    fn weighted_recall_is_accuracy() {
        let cm = confusion(
            &[0, 0, 0, 1, 1, 2, 2, 2, 2],
            &[0, 1, 2, 1, 1, 2, 0, 2, 1],
            &[0, 1, 2],
        )
        .unwrap();
        let m = metrics(&cm, Averaging::Weighted).unwrap();
        assert_eq!(m.recall, m.accuracy);
    }

    #[test]
    fn split_sizes() {
        let labels: Vec<usize> = (0..18).map(|i| [0, 0, 1, 2][i % 4]).collect();
        let s = split_80_20(&labels, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (14, 4));
        assert_eq!(s, split_80_20(&labels, 1).unwrap());
        let s5 = split_80_20(&[0, 1, 0, 1, 0], 2).unwrap();
        assert_eq!((s5.train.len(), s5.test.len()), (4, 1));
        assert!(split_80_20(&[0, 1, 0, 1], 2).is_err());
    }

    #[test]
    fn split_is_stratified() {
        // 4 lower, 8 intermediate, 6 higher: 4 test samples as 1/2/1.
        let mut labels = vec![0; 4];
        labels.extend(vec![2; 8]);
        labels.extend(vec![1; 6]);
        for seed in 0..20 {
            let s = split_80_20(&labels, seed).unwrap();
            let mut per = [0; 3];
            for &i in &s.test {
                per[labels[i]] += 1;
            }
            assert_eq!(per, [1, 1, 2], "seed {seed}");
            for c in 0..3 {
                assert!(s.train.iter().any(|&i| labels[i] == c));
            }
        }
    }

    #[test]
    fn aggregates() {
        let a = aggregate_runs(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!((a.mean, a.sem), (0.5, 0.0));
        let b = aggregate_runs(&[0.4, 0.6]).unwrap();
        assert!((b.mean - 0.5).abs() < 1e-15);
        assert!((b.sem - 0.1).abs() < 1e-12);
        let one = aggregate_runs(&[0.3]).unwrap();
        assert_eq!(one.sem, 0.0);
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn z_values() {
        let model = RunAggregate {
            mean: 0.525,
            sem: 0.040,
            n_runs: 20,
        };
        let base = RunAggregate {
            mean: 0.356,
            sem: 0.033,
            n_runs: 20,
        };
        let z = z_test(&model, &base, SemChoice::ModelRuns);
        assert!((z.z - 4.225).abs() < 1e-9);
        assert!(z.p_value < 2.0e-5);
        let pooled = z_test(&model, &base, SemChoice::Pooled);
        assert!((pooled.z - 0.169 / (0.033f64.powi(2) + 0.04f64.powi(2)).sqrt()).abs() < 1e-9);
        assert!((pooled.z - 3.3).abs() < 0.05);
        let eq = z_test(&base, &base, SemChoice::ModelRuns);
        assert_eq!((eq.z, eq.p_value), (0.0, 0.5));
        let zero = RunAggregate { sem: 0.0, ..model };
        let inf = z_test(&zero, &base, SemChoice::ModelRuns);
        assert_eq!(inf.z, f64::INFINITY);
        assert_eq!(inf.p_value, 0.0);
    }

    #[test]
    fn baseline_degenerate_and_reproducible() {
        let one = random_baseline(&[2, 2, 2], 5, 1).unwrap();
        assert_eq!((one.accuracy.mean, one.accuracy.sem), (1.0, 0.0));
        let labels = [0, 1, 2, 0, 1, 2, 0, 1];
        assert_eq!(
            random_baseline(&labels, 20, 4).unwrap(),
            random_baseline(&labels, 20, 4).unwrap()
        );
    }

    fn separable(n_low: usize, n_high: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_low {
            x.push(vec![1.0 + i as f64 * 0.1, 5.0 - i as f64 * 0.2]);
            y.push(0);
        }
        for i in 0..n_high {
            x.push(vec![4.0 + i as f64 * 0.1, 1.0 + i as f64 * 0.15]);
            y.push(1);
        }
        (x, y)
    }

    #[test]
    fn loocv_separable_is_perfect() {
        let (x, y) = separable(4, 6);
        for spec in [
            LearnerSpec::Logistic(LrHyper::default()),
            LearnerSpec::Forest(RfHyper::default()),
        ] {
            let out = loocv(&x, &y, &spec, 3).unwrap();
            assert_eq!(out.predictions.len(), 10);
            assert!(out.skipped.is_empty());
            assert_eq!(out.accuracy(), 1.0, "{}", spec.name());
            let cm = out.confusion(&[0, 1]).unwrap();
            assert_eq!(
                metrics(&cm, Averaging::Weighted).unwrap().accuracy,
                out.accuracy()
            );
        }
    }

    #[test]
    fn loocv_degenerate_inputs() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let spec = LearnerSpec::Logistic(LrHyper::default());
        assert!(loocv(&x, &[1, 1, 1], &spec, 0).is_err());
        // Leaving out the only class-1 sample leaves a single-class fold.
        let out = loocv(&x, &[0, 0, 1], &spec, 0).unwrap();
        assert_eq!(out.skipped, [2]);
        assert_eq!(out.predictions.len(), 2);
    }

    #[test]
    fn logistic_runs_have_zero_sem() {
        let (x, y) = separable(4, 6);
        let spec = LearnerSpec::Logistic(LrHyper::default());
        let ev = evaluate(&x, &y, &spec, Scheme::Loocv, 5, 1, Averaging::Weighted).unwrap();
        assert_eq!(ev.aggregate.accuracy.sem, 0.0);
        assert_eq!(ev.runs.len(), 5);
    }
}
