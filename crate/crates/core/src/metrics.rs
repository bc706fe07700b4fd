//! Confusion matrix, accuracy, per-class precision/recall/F-measure and
//! one-vs-rest ROC curves.
//!
//! The confusion matrix is indexed `[predicted][actual]`: rows are predicted
//! classes, columns actual classes. All percentages are on a 0-100 scale and
//! any ratio with a zero denominator is reported as 0.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn build(predicted: &[usize], actual: &[usize], class_names: &[String]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::Metrics(format!(
                "{} predictions but {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let n = class_names.len();
        let mut counts = vec![vec![0u64; n]; n];
        for (&p, &a) in predicted.iter().zip(actual) {
            if p >= n || a >= n {
                return Err(Error::Metrics(format!(
                    "class id {} out of range for {n} classes",
                    p.max(a)
                )));
            }
            counts[p][a] += 1;
        }
        Ok(ConfusionMatrix {
            counts,
            class_names: class_names.to_vec(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// `counts()[predicted][actual]`.
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Records predicted as `class`.
    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Records whose actual class is `class`.
    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        Ok(100.0 * self.trace() as f64 / total as f64)
    }

    pub fn class_stats(&self) -> Result<Vec<ClassStats>> {
        if self.total() == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        Ok((0..self.num_classes())
            .map(|j| {
                let tp = self.counts[j][j] as f64;
                let precision = percent(tp, self.row_sum(j) as f64);
                let recall = percent(tp, self.col_sum(j) as f64);
                let f_measure = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassStats {
                    class: self.class_names[j].clone(),
                    precision,
                    recall,
                    f_measure,
                    support: self.col_sum(j),
                }
            })
            .collect())
    }
}

fn percent(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        100.0 * num / den
    }
}

pub fn build_confusion(
    predicted: &[usize],
    actual: &[usize],
    class_names: &[String],
) -> Result<ConfusionMatrix> {
    ConfusionMatrix::build(predicted, actual, class_names)
}

pub fn accuracy(m: &ConfusionMatrix) -> Result<f64> {
    m.accuracy()
}

pub fn precision_recall_f(m: &ConfusionMatrix) -> Result<Vec<ClassStats>> {
    m.class_stats()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Number of records whose actual class is this one.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, sorted by threshold descending.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve of a score against a binary ground truth. Every distinct score
/// is one threshold; tied scores move the curve diagonally.
pub fn roc_from_scores(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::Metrics(format!(
            "{} scores but {} labels",
            scores.len(),
            positive.len()
        )));
    }
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 {
        return Err(Error::Metrics("ROC undefined: no positive records".into()));
    }
    if neg == 0 {
        return Err(Error::Metrics("ROC undefined: no negative records".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// One-vs-rest ROC for `class`, scoring each record by its probability for that class.
pub fn roc_curve(scores: &[Vec<f64>], actual: &[usize], class: usize) -> Result<RocCurve> {
    if scores.len() != actual.len() {
        return Err(Error::Metrics(format!(
            "{} score vectors but {} labels",
            scores.len(),
            actual.len()
        )));
    }
    if !actual.contains(&class) {
        return Err(Error::Metrics(format!(
            "ROC undefined: class {class} does not occur in the labels"
        )));
    }
    let class_scores = scores
        .iter()
        .map(|s| {
            s.get(class).copied().ok_or_else(|| {
                Error::Metrics(format!(
                    "score vector of length {} lacks class {class}",
                    s.len()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<bool> = actual.iter().map(|&a| a == class).collect();
    roc_from_scores(&class_scores, &positive)
}
