//! Softmax, cross-entropy, predictions and the classification report.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn rows<T: Scalar>(logits: &Tensor<T>) -> Result<(usize, usize)> {
    match logits.shape() {
        &[n, k] => Ok((n, k)),
        s => Err(Error::shape(format!(
            "logits must be [N, classes], got {s:?}"
        ))),
    }
}

fn check_targets(targets: &[usize], n: usize, classes: usize) -> Result<()> {
    if targets.len() != n {
        return Err(Error::shape(format!(
            "{n} logit rows but {} targets",
            targets.len()
        )));
    }
    if let Some((i, &t)) = targets.iter().enumerate().find(|(_, &t)| t >= classes) {
        return Err(Error::invalid(format!(
            "target {t} at row {i} is not a class index below {classes}"
        )));
    }
    Ok(())
}

/// Row-wise `exp(y_i) / sum_k exp(y_k)`, evaluated after subtracting the row maximum.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = rows(logits)?;
    if logits.data().iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN in logits".into()));
    }
    let mut out = logits.zeros_like();
    for (src, dst) in logits
        .data()
        .chunks_exact(k)
        .zip(out.data_mut().chunks_exact_mut(k))
    {
        let max = src
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v.as_f64()));
        let exps: Vec<f64> = src.iter().map(|&v| (v.as_f64() - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (d, e) in dst.iter_mut().zip(exps) {
            *d = T::from_f64(e / total);
        }
    }
    Ok(out)
}

fn log_softmax_row<T: Scalar>(row: &[T]) -> Vec<f64> {
    let max = row
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v.as_f64()));
    let lse = max
        + row
            .iter()
            .map(|&v| (v.as_f64() - max).exp())
            .sum::<f64>()
            .ln();
    row.iter().map(|&v| v.as_f64() - lse).collect()
}

/// Mean over the batch of `-log softmax(y)[target]`.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<f64> {
    let (n, k) = rows(logits)?;
    check_targets(targets, n, k)?;
    let total: f64 = logits
        .data()
        .chunks_exact(k)
        .zip(targets)
        .map(|(row, &t)| -log_softmax_row(row)[t])
        .sum();
    Ok(total / n as f64)
}

/// `(softmax(y) - onehot(target)) / N` per row.
pub fn cross_entropy_grad<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<Tensor<T>> {
    let (n, k) = rows(logits)?;
    check_targets(targets, n, k)?;
    let mut grad = softmax(logits)?;
    let inv_n = T::from_f64(1.0 / n as f64);
    for (row, &t) in grad.data_mut().chunks_exact_mut(k).zip(targets) {
        row[t] -= T::one();
        row.iter_mut().for_each(|v| *v *= inv_n);
    }
    Ok(grad)
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict<T: Scalar>(logits: &Tensor<T>) -> Result<Vec<usize>> {
    let (_, k) = rows(logits)?;
    Ok(logits
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (i, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

/// Percentage of positions where `preds` equals `targets`.
pub fn accuracy(preds: &[usize], targets: &[usize]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} predictions but {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::invalid("accuracy of an empty set is undefined"));
    }
    let correct = preds.iter().zip(targets).filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / preds.len() as f64)
}

/// Training accuracy minus test accuracy, in percentage points.
pub fn overfitting_gap(train_acc: f64, test_acc: f64) -> f64 {
    train_acc - test_acc
}

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::shape(format!(
                "{classes}-class confusion matrix needs {} counts, got {}",
                classes * classes,
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn from_predictions(preds: &[usize], targets: &[usize], classes: usize) -> Result<Self> {
        if preds.len() != targets.len() {
            return Err(Error::shape(format!(
                "{} predictions but {} targets",
                preds.len(),
                targets.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (&p, &t) in preds.iter().zip(targets) {
            if p >= classes || t >= classes {
                return Err(Error::invalid(format!(
                    "class index out of range: true {t}, predicted {p}"
                )));
            }
            cm.counts[t * classes + p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    /// Per-class precision, recall and F1. A zero denominator yields 0.
    pub fn per_class(&self) -> Vec<ClassScores> {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        (0..self.classes)
            .map(|c| {
                let tp = self.get(c, c);
                let precision = ratio(tp, self.col_sum(c));
                let recall = ratio(tp, self.row_sum(c));
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support: self.row_sum(c),
                }
            })
            .collect()
    }

    /// Support-weighted mean of per-class F1.
    pub fn weighted_f1(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::invalid(
                "weighted F1 of an empty confusion matrix is undefined",
            ));
        }
        let weighted: f64 = self
            .per_class()
            .iter()
            .map(|s| s.support as f64 * s.f1)
            .sum();
        Ok(weighted / total as f64)
    }
}

pub fn weighted_f1(cm: &ConfusionMatrix) -> Result<f64> {
    cm.weighted_f1()
}

/// Evaluation summary over one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub samples: usize,
    /// Percent.
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub loss: f64,
    pub per_class: Vec<ClassScores>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_logits<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<Self> {
        let (_, k) = rows(logits)?;
        let loss = cross_entropy(logits, targets)?;
        let preds = predict(logits)?;
        let confusion = ConfusionMatrix::from_predictions(&preds, targets, k)?;
        Ok(MetricsReport {
            samples: targets.len(),
            accuracy: accuracy(&preds, targets)?,
            weighted_f1: confusion.weighted_f1()?,
            loss,
            per_class: confusion.per_class(),
            confusion,
        })
    }
}
