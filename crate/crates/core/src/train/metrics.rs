use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{predict_labels, Labeled, TrainError};
use crate::models::Model;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("confusion matrix must be square, got {rows} rows with a row of length {cols}")]
    NonSquareMatrix { rows: usize, cols: usize },
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("truth and prediction lists differ in length ({truth} vs {predicted})")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("confusion matrix is empty")]
    Empty,
    #[error("chance agreement is 1, so kappa is undefined")]
    DegenerateMarginals,
}

/// Counts indexed `[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    rows: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            rows: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        if let Some(bad) = rows.iter().find(|r| r.len() != rows.len()) {
            return Err(MetricsError::NonSquareMatrix {
                rows: rows.len(),
                cols: bad.len(),
            });
        }
        Ok(Self { rows })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self, MetricsError> {
        if truth.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch {
                truth: truth.len(),
                predicted: predicted.len(),
            });
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), MetricsError> {
        let classes = self.classes();
        for index in [truth, predicted] {
            if index >= classes {
                return Err(MetricsError::ClassOutOfRange { index, classes });
            }
        }
        self.rows[truth][predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.rows[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.rows[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.classes())
            .map(|j| self.rows.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn new(precision: f64, recall: f64) -> Self {
        Self {
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Micro,
    Macro,
    PerClass,
}

/// Precision, recall and F1. `PerClass` yields one entry per class, the
/// averages a single entry. A zero denominator makes that metric 0.
pub fn precision_recall_f1(cm: &ConfusionMatrix, averaging: Averaging) -> Vec<Prf> {
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let per_class = || {
        (0..cm.classes()).map(|i| {
            let tp = cm.get(i, i);
            Prf::new(ratio(tp, cols[i]), ratio(tp, rows[i]))
        })
    };
    match averaging {
        Averaging::PerClass => per_class().collect(),
        Averaging::Macro => {
            let k = cm.classes().max(1) as f64;
            let (p, r, f) = per_class().fold((0.0, 0.0, 0.0), |(p, r, f), m| {
                (p + m.precision, r + m.recall, f + m.f1)
            });
            vec![Prf {
                precision: p / k,
                recall: r / k,
                f1: f / k,
            }]
        }
        Averaging::Micro => {
            // Pooled over classes: FP and FN both sum to the off-diagonal mass.
            let tp = cm.trace();
            let fp: u64 = cols.iter().sum::<u64>() - tp;
            let fn_: u64 = rows.iter().sum::<u64>() - tp;
            vec![Prf::new(ratio(tp, tp + fp), ratio(tp, tp + fn_))]
        }
    }
}

/// `(p_o - p_e) / (1 - p_e)` with `p_e` from the row and column marginals.
pub fn cohens_kappa(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let n = cm.total() as u128;
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let chance: u128 = cm
        .row_sums()
        .iter()
        .zip(cm.col_sums())
        .map(|(&r, c)| r as u128 * c as u128)
        .sum();
    let n2 = n * n;
    if chance == n2 {
        return Err(MetricsError::DegenerateMarginals);
    }
    // Scaled by n^2 to keep the subtraction exact.
    let observed = (cm.trace() as u128 * n) as i128;
    Ok((observed - chance as i128) as f64 / (n2 - chance) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub labels: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub n_examples: u64,
    pub accuracy: f64,
    pub per_class: Vec<Prf>,
    pub macro_avg: Prf,
    pub micro_avg: Prf,
    /// `None` when the marginals make kappa undefined.
    pub cohens_kappa: Option<f64>,
}

impl MetricsReport {
    pub fn from_confusion(labels: Vec<String>, confusion: ConfusionMatrix) -> Self {
        Self {
            labels,
            n_examples: confusion.total(),
            accuracy: confusion.accuracy(),
            per_class: precision_recall_f1(&confusion, Averaging::PerClass),
            macro_avg: precision_recall_f1(&confusion, Averaging::Macro)[0],
            micro_avg: precision_recall_f1(&confusion, Averaging::Micro)[0],
            cohens_kappa: cohens_kappa(&confusion).ok(),
            confusion,
        }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "examples: {}", self.n_examples)?;
        writeln!(f, "accuracy: {:.4}", self.accuracy)?;
        match self.cohens_kappa {
            Some(k) => writeln!(f, "cohen's kappa: {k:.4}")?,
            None => writeln!(f, "cohen's kappa: undefined")?,
        }
        let width = self.labels.iter().map(|l| l.len()).max().unwrap_or(0).max(9);
        writeln!(
            f,
            "{:<width$}  {:>9}  {:>9}  {:>9}",
            "class", "precision", "recall", "f1"
        )?;
        let rows = self
            .labels
            .iter()
            .map(String::as_str)
            .zip(&self.per_class)
            .chain([("macro", &self.macro_avg), ("micro", &self.micro_avg)]);
        for (name, m) in rows {
            writeln!(
                f,
                "{name:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
                m.precision, m.recall, m.f1
            )?;
        }
        writeln!(f, "confusion (rows = true, columns = predicted):")?;
        for row in self.confusion.rows() {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>4}")).collect();
            writeln!(f, "{}", cells.join(""))?;
        }
        Ok(())
    }
}

/// Eval-mode argmax predictions, tallied and scored.
pub fn evaluate<E: Labeled + Sync>(model: &Model, set: &[E]) -> Result<MetricsReport, TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptySet("evaluation"));
    }
    let predicted = predict_labels(model, set)?;
    let truth: Vec<usize> = set.iter().map(|e| e.label()).collect();
    let cm = ConfusionMatrix::from_predictions(model.num_classes(), &truth, &predicted)?;
    Ok(MetricsReport::from_confusion(model.labels(), cm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::SplitMix64;
    use proptest::prelude::*;

    fn diag(k: usize, v: u64) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(k);
        for i in 0..k {
            cm.rows[i][i] = v;
        }
        cm
    }

    #[test]
    fn perfect_predictions() {
        let report = MetricsReport::from_confusion(vec!["x".into(); 8], diag(8, 5));
        assert_eq!(report.accuracy, 1.0);
        assert!(report.per_class.iter().all(|m| *m == Prf::new(1.0, 1.0)));
        assert_eq!(report.macro_avg, Prf::new(1.0, 1.0));
        assert_eq!(report.cohens_kappa, Some(1.0));
    }

    #[test]
    fn single_class_predictions_on_balanced_labels() {
        let truth: Vec<usize> = (0..80).map(|i| i % 8).collect();
        let cm = ConfusionMatrix::from_predictions(8, &truth, &[3; 80]).unwrap();
        assert_eq!(cm.accuracy(), 0.125);
        assert_eq!(cohens_kappa(&cm).unwrap(), 0.0);
    }

    #[test]
    fn uniform_matrix_has_zero_kappa() {
        let cm = ConfusionMatrix::from_rows(vec![vec![7; 5]; 5]).unwrap();
        assert_eq!(cohens_kappa(&cm).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_and_bad_matrices() {
        let mut cm = ConfusionMatrix::new(3);
        assert_eq!(cohens_kappa(&cm), Err(MetricsError::Empty));
        cm.record(1, 1).unwrap();
        assert_eq!(cohens_kappa(&cm), Err(MetricsError::DegenerateMarginals));
        assert!(matches!(
            ConfusionMatrix::from_rows(vec![vec![1, 2], vec![3]]),
            Err(MetricsError::NonSquareMatrix { .. })
        ));
        assert!(cm.record(3, 0).is_err());
        assert!(ConfusionMatrix::from_predictions(3, &[0], &[]).is_err());
    }

    #[test]
    fn absent_class_scores_zero() {
        let cm = ConfusionMatrix::from_rows(vec![vec![3, 1, 0], vec![2, 4, 0], vec![0, 0, 0]]).unwrap();
        let per = precision_recall_f1(&cm, Averaging::PerClass);
        assert_eq!(per[2], Prf::new(0.0, 0.0));
        let macro_avg = precision_recall_f1(&cm, Averaging::Macro)[0];
        assert!(macro_avg.f1.is_finite());
        assert!((macro_avg.precision - (3.0 / 5.0 + 4.0 / 5.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tally_oracle_on_random_predictions() {
        let mut rng = SplitMix64::new(17);
        let truth: Vec<usize> = (0..100).map(|_| rng.below(8)).collect();
        let predicted: Vec<usize> = (0..100).map(|_| rng.below(8)).collect();
        let cm = ConfusionMatrix::from_predictions(8, &truth, &predicted).unwrap();
        for c in 0..8 {
            let tp = (0..100).filter(|&i| truth[i] == c && predicted[i] == c).count();
            let fp = (0..100).filter(|&i| truth[i] != c && predicted[i] == c).count();
            let fn_ = (0..100).filter(|&i| truth[i] == c && predicted[i] != c).count();
            let p = if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let r = if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            let m = precision_recall_f1(&cm, Averaging::PerClass)[c];
            assert_eq!((m.precision, m.recall), (p, r));
        }
        let correct = (0..100).filter(|&i| truth[i] == predicted[i]).count();
        assert_eq!(cm.accuracy(), correct as f64 / 100.0);
        assert_eq!(cm.total(), 100);
    }

    #[test]
    fn kappa_matches_direct_formula() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..50 {
            let rows: Vec<Vec<u64>> = (0..4).map(|_| (0..4).map(|_| rng.below(20) as u64).collect()).collect();
            let cm = ConfusionMatrix::from_rows(rows.clone()).unwrap();
            let n: f64 = rows.iter().flatten().map(|&v| v as f64).sum();
            let po: f64 = (0..4).map(|i| rows[i][i] as f64).sum::<f64>() / n;
            let pe: f64 = (0..4)
                .map(|i| {
                    let r: f64 = rows[i].iter().map(|&v| v as f64).sum();
                    let c: f64 = rows.iter().map(|row| row[i] as f64).sum();
                    r * c / (n * n)
                })
                .sum();
            let direct = (po - pe) / (1.0 - pe);
            assert!((cohens_kappa(&cm).unwrap() - direct).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn micro_scores_equal_accuracy(k in 2usize..10, cells in prop::collection::vec(0u64..50, 100)) {
            let rows: Vec<Vec<u64>> = (0..k).map(|i| (0..k).map(|j| cells[(i * k + j) % cells.len()]).collect()).collect();
            let cm = ConfusionMatrix::from_rows(rows).unwrap();
            prop_assume!(cm.total() > 0);
            let m = precision_recall_f1(&cm, Averaging::Micro)[0];
            let acc = cm.accuracy();
            prop_assert!((m.precision - acc).abs() <= 1e-12);
            prop_assert!((m.recall - acc).abs() <= 1e-12);
            prop_assert!((m.f1 - acc).abs() <= 1e-12);
        }
    }
}
