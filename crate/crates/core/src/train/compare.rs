use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsReport};
use super::{train_with_progress, EpochRecord, Labeled, TrainConfig, TrainError};
use crate::features::PipelineConfig;
use crate::models::{Model, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    #[serde(rename = "ok")]
    Ok,
    #[serde(rename = "not implemented (out of scope)")]
    NotImplemented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub status: RowStatus,
}

impl ComparisonRow {
    fn trained(name: &str, report: &MetricsReport) -> Self {
        Self {
            name: name.to_string(),
            precision: Some(report.micro_avg.precision),
            recall: Some(report.micro_avg.recall),
            f1: Some(report.micro_avg.f1),
            accuracy: Some(report.accuracy),
            status: RowStatus::Ok,
        }
    }

    fn placeholder(name: &str) -> Self {
        Self {
            name: name.to_string(),
            precision: None,
            recall: None,
            f1: None,
            accuracy: None,
            status: RowStatus::NotImplemented,
        }
    }
}

/// Micro-averaged scores of each model on the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub models: Vec<ComparisonRow>,
    /// Training history per trained model, in row order.
    #[serde(skip)]
    pub histories: Vec<(ModelKind, Vec<EpochRecord>)>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.models.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        writeln!(
            f,
            "{:<6} {:>10} {:>10} {:>10} {:>10}  Status",
            "Model", "Precision", "Recall", "F1-Score", "Accuracy"
        )?;
        for r in &self.models {
            let status = match r.status {
                RowStatus::Ok => "ok",
                RowStatus::NotImplemented => "not implemented (out of scope)",
            };
            writeln!(
                f,
                "{:<6} {:>10} {:>10} {:>10} {:>10}  {status}",
                r.name,
                cell(r.precision),
                cell(r.recall),
                cell(r.f1),
                cell(r.accuracy)
            )?;
        }
        Ok(())
    }
}

/// Trains the CNN and the DNN baseline under the same config and seed and
/// scores both on `test`. The recurrent model has a placeholder row.
pub fn compare_models<E: Labeled + Sync>(
    train: &[E],
    test: &[E],
    pipeline: &PipelineConfig,
    num_classes: usize,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(ModelKind, &EpochRecord),
) -> Result<ComparisonReport, TrainError> {
    let mut trained = Vec::new();
    for kind in [ModelKind::CnnFig1, ModelKind::DnnBaseline] {
        let mut model = Model::build(kind, pipeline, num_classes, &mut super::init_rng(cfg.seed))?;
        let history = train_with_progress(&mut model, train, test, cfg, |r| on_epoch(kind, r))?;
        let report = evaluate(&model, test)?;
        trained.push((kind, history, report));
    }
    let (cnn, dnn) = (&trained[0].2, &trained[1].2);
    let models = vec![
        ComparisonRow::trained("CNN", cnn),
        ComparisonRow::placeholder("LSTM"),
        ComparisonRow::trained("DNN", dnn),
    ];
    Ok(ComparisonReport {
        models,
        histories: trained.into_iter().map(|(k, h, _)| (k, h)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureTensor;
    use crate::nn::SplitMix64;

    fn data(n: usize, seed: u64) -> Vec<(FeatureTensor, usize)> {
        let mut rng = SplitMix64::new(seed);
        (0..n)
            .map(|i| {
                let label = i % 4;
                // Class-dependent mean so the task is learnable.
                let values = (0..144)
                    .map(|j| (rng.next_normal() * 0.5 + if j % 4 == label { 1.0 } else { 0.0 }) as f32)
                    .collect();
                (FeatureTensor::new(12, 12, values).unwrap(), label)
            })
            .collect()
    }

    #[test]
    fn three_rows_with_equal_micro_columns_and_determinism() {
        let pipeline = PipelineConfig {
            height: 12,
            width: 12,
            ..PipelineConfig::default()
        };
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (train, test) = (data(24, 1), data(12, 2));
        let a = compare_models(&train, &test, &pipeline, 4, &cfg, |_, _| {}).unwrap();
        let names: Vec<&str> = a.models.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["CNN", "LSTM", "DNN"]);
        assert_eq!(a.models[1].status, RowStatus::NotImplemented);
        for r in [&a.models[0], &a.models[2]] {
            let acc = r.accuracy.unwrap();
            for v in [r.precision, r.recall, r.f1] {
                assert!((v.unwrap() - acc).abs() < 1e-12);
            }
        }
        let b = compare_models(&train, &test, &pipeline, 4, &cfg, |_, _| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json["models"][1]["status"], "not implemented (out of scope)");
        assert!(json["models"][1]["accuracy"].is_null());
        let table = a.to_string();
        assert_eq!(table.lines().count(), 4);
        assert!(table.lines().next().unwrap().contains("F1-Score"));
    }
}
