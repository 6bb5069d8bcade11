//! Ordinal and multiclass evaluation metrics.
//!
//! Labels are ordinal levels `1..=k`. The confusion matrix stores raw counts
//! with rows indexed by the true level and columns by the predicted level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if k < 2 || counts.len() != k * k {
            return Err(Error::InvalidInput(format!(
                "confusion matrix needs k >= 2 and k*k counts, got k={k}, {} counts",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Count of samples with true level `i + 1` predicted as `j + 1`.
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.k + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let k = self.k;
        let mut counts = vec![0; k * k];
        for i in 0..k {
            for j in 0..k {
                counts[j * k + i] = self.get(i, j);
            }
        }
        ConfusionMatrix { k, counts }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k)
            .map(|j| (0..self.k).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }
}

pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros(k);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for l in [t, p] {
            if l == 0 || l as usize > k {
                return Err(Error::InvalidInput(format!("label {l} outside 1..={k}")));
            }
        }
        m.counts[(t as usize - 1) * k + (p as usize - 1)] += 1;
    }
    Ok(m)
}

/// Quadratic weighted kappa with weights `(i - j)^2 / (k - 1)^2`.
///
/// Observed and expected matrices are normalised to proportions; the expected
/// matrix is the outer product of the observed marginals. When the expected
/// weighted disagreement is zero the result is 1.0 if the observed matrix is
/// purely diagonal, and an error otherwise.
pub fn qwk(m: &ConfusionMatrix) -> Result<f64> {
    let k = m.k;
    let total = m.total();
    if total == 0 {
        return Err(Error::InvalidInput("quadratic weighted kappa of an empty matrix".into()));
    }
    let n = total as f64;
    let rows: Vec<f64> = m.row_sums().iter().map(|&c| c as f64 / n).collect();
    let cols: Vec<f64> = m.col_sums().iter().map(|&c| c as f64 / n).collect();
    let scale = ((k - 1) * (k - 1)) as f64;
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..k {
        for j in 0..k {
            let d = i.abs_diff(j);
            if d == 0 {
                continue;
            }
            let w = (d * d) as f64 / scale;
            observed += w * (m.get(i, j) as f64 / n);
            expected += w * rows[i] * cols[j];
        }
    }
    if expected == 0.0 {
        return if observed == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::InvalidInput(
                "quadratic weighted kappa undefined: zero expected disagreement".into(),
            ))
        };
    }
    Ok(1.0 - observed / expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub qwk: f64,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    #[serde(default)]
    pub mean_log_loss: Option<f64>,
    #[serde(default)]
    pub mse: Option<f64>,
}

/// Per-class recall and F1 derived from a confusion matrix.
pub fn per_class_scores(m: &ConfusionMatrix) -> Vec<(Option<f64>, f64)> {
    let rows = m.row_sums();
    let cols = m.col_sums();
    (0..m.k)
        .map(|c| {
            let tp = m.get(c, c) as f64;
            let recall = (rows[c] > 0).then(|| tp / rows[c] as f64);
            let denom = (rows[c] + cols[c]) as f64;
            let f1 = if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
            (recall, f1)
        })
        .collect()
}

pub fn accuracy(m: &ConfusionMatrix) -> f64 {
    m.trace() as f64 / m.total() as f64
}

/// Mean recall over classes that occur in the truth.
pub fn balanced_accuracy(m: &ConfusionMatrix) -> f64 {
    let recalls: Vec<f64> = per_class_scores(m).into_iter().filter_map(|(r, _)| r).collect();
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

/// Unweighted mean F1 over all `k` classes; a class that is never true and
/// never predicted contributes 0.
pub fn macro_f1(m: &ConfusionMatrix) -> f64 {
    let scores = per_class_scores(m);
    scores.iter().map(|(_, f1)| f1).sum::<f64>() / scores.len() as f64
}

/// Accuracy, balanced accuracy, macro-F1 and QWK for a labelled prediction set.
pub fn classification_report(y_true: &[u8], y_pred: &[u8], k: usize) -> Result<MetricBundle> {
    let m = confusion_matrix(y_true, y_pred, k)?;
    if m.total() == 0 {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    Ok(MetricBundle {
        qwk: qwk(&m)?,
        accuracy: accuracy(&m),
        balanced_accuracy: balanced_accuracy(&m),
        macro_f1: macro_f1(&m),
        mean_log_loss: None,
        mse: None,
    })
}

/// Mean negative log-likelihood of the true class, with probabilities clamped
/// to `[1e-15, 1 - 1e-15]`.
pub fn mean_multiclass_log_loss<R: AsRef<[f64]>>(prob_rows: &[R], y_true: &[u8]) -> Result<f64> {
    if prob_rows.len() != y_true.len() || prob_rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "log loss needs equal non-zero lengths, got {} rows and {} labels",
            prob_rows.len(),
            y_true.len()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in prob_rows.iter().zip(y_true) {
        let row = row.as_ref();
        if y == 0 || y as usize > row.len() {
            return Err(Error::InvalidInput(format!(
                "label {y} does not index a row of arity {}",
                row.len()
            )));
        }
        let p = row[y as usize - 1].clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        total -= p.ln();
    }
    Ok(total / y_true.len() as f64)
}

pub fn mean_squared_error(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidInput("mse needs equal non-zero lengths".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matrix_from_perfect_predictions() {
        let y = [1, 2, 3, 4, 5];
        let m = confusion_matrix(&y, &y, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.get(i, j), u64::from(i == j));
            }
        }
        assert_eq!(m.total(), 5);
        assert_eq!(qwk(&m).unwrap(), 1.0);
    }

    #[test]
    fn label_errors() {
        assert!(confusion_matrix(&[1, 6], &[1, 2], 5).is_err());
        assert!(confusion_matrix(&[0], &[1], 5).is_err());
        assert!(confusion_matrix(&[1, 2], &[1], 5).is_err());
    }

    #[test]
    fn degenerate_qwk() {
        let single = ConfusionMatrix::from_counts(3, vec![0, 0, 0, 0, 4, 0, 0, 0, 0]).unwrap();
        assert_eq!(qwk(&single).unwrap(), 1.0);
        let off = ConfusionMatrix::from_counts(3, vec![0, 0, 4, 0, 0, 0, 0, 0, 0]).unwrap();
        // distinct true and predicted labels: expected weight is nonzero, kappa is 0
        assert_eq!(qwk(&off).unwrap(), 0.0);
        assert!(qwk(&ConfusionMatrix::zeros(5)).is_err());
    }

    #[test]
    fn two_level_worked_case() {
        // O = [[2,1],[0,1]], n = 4: observed disagreement 1/4,
        // expected = r0*c1 + r1*c0 = (3/4)(2/4) + (1/4)(2/4) = 1/2
        let m = ConfusionMatrix::from_counts(2, vec![2, 1, 0, 1]).unwrap();
        assert!((qwk(&m).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor_balanced_accuracy() {
        let truth: Vec<u8> = (0..50).map(|i| (i % 5 + 1) as u8).collect();
        let pred = vec![3u8; 50];
        let r = classification_report(&truth, &pred, 5).unwrap();
        assert!((r.balanced_accuracy - 0.2).abs() < 1e-15);
        assert!((r.accuracy - 0.2).abs() < 1e-15);
    }

    #[test]
    fn perfect_report() {
        let y = [1, 2, 3, 3, 4, 5, 5];
        let r = classification_report(&y, &y, 5).unwrap();
        assert_eq!((r.qwk, r.accuracy, r.balanced_accuracy, r.macro_f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn absent_class_counts_zero_in_macro_f1() {
        // level 5 never true, never predicted
        let y = [1, 2, 3, 4];
        let r = classification_report(&y, &y, 5).unwrap();
        assert!((r.macro_f1 - 0.8).abs() < 1e-15);
        assert_eq!(r.balanced_accuracy, 1.0);
    }

    #[test]
    fn log_loss_cases() {
        let onehot = vec![[0.0, 1.0, 0.0, 0.0, 0.0]; 3];
        assert!(mean_multiclass_log_loss(&onehot, &[2, 2, 2]).unwrap() <= 1e-14);
        let uniform = vec![[0.2; 5]; 4];
        let l = mean_multiclass_log_loss(&uniform, &[1, 3, 5, 2]).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
        assert!(mean_multiclass_log_loss(&uniform, &[1, 2]).is_err());
        assert!(mean_multiclass_log_loss(&uniform[..1], &[6]).is_err());
    }
}
