//! The convolutional classifier, the MLP baseline, checkpoints and
//! single-clip prediction.

mod checkpoint;
mod gradsuite;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradsuite::{gradient_suite, SuiteEntry, END_TO_END_TOLERANCE, LAYER_TOLERANCE};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};
use crate::features::{featurize, FeatureError, FeatureTensor, PipelineConfig};
use crate::nn::{Layer, LayerSpec, Mode, NnError, Sequential, SplitMix64, Tensor};
use crate::ravdess::Emotion;

pub const DEFAULT_NUM_CLASSES: usize = 8;

/// Smallest input side that survives both conv + pool stages of the CNN.
pub const CNN_MIN_SIDE: usize = 9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input {height}x{width} is too small; both sides must be at least {min}")]
    InputTooSmall { height: usize, width: usize, min: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("feature tensor is {actual:?}, model expects {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u32),
    #[error("checkpoint does not match its spec: {0}")]
    ShapeMismatchOnLoad(String),
    #[error("checkpoint is truncated")]
    TruncatedFile,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    CnnFig1,
    DnnBaseline,
}

impl ModelKind {
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::CnnFig1 => "CNN",
            ModelKind::DnnBaseline => "DNN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `(height, width)` of the feature tensor.
    pub input_shape: (usize, usize),
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_shape: (usize, usize), num_classes: usize) -> Result<Self, ModelError> {
        if num_classes < 2 {
            return Err(ModelError::TooFewClasses(num_classes));
        }
        let (height, width) = input_shape;
        let layers = match kind {
            ModelKind::CnnFig1 => {
                if height < CNN_MIN_SIDE || width < CNN_MIN_SIDE {
                    return Err(ModelError::InputTooSmall {
                        height,
                        width,
                        min: CNN_MIN_SIDE,
                    });
                }
                cnn_layers(num_classes)
            }
            ModelKind::DnnBaseline => {
                if height == 0 || width == 0 {
                    return Err(ModelError::InputTooSmall { height, width, min: 1 });
                }
                dnn_layers(num_classes)
            }
        };
        Ok(Self {
            kind,
            input_shape,
            num_classes,
            layers,
        })
    }

    fn nn_input_shape(&self) -> [usize; 3] {
        [self.input_shape.0, self.input_shape.1, 1]
    }
}

fn cnn_layers(num_classes: usize) -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv2d {
            filters: 32,
            kernel_h: 2,
            kernel_w: 2,
        },
        Relu,
        MaxPool2d,
        Dropout { rate: 0.25 },
        Conv2d {
            filters: 64,
            kernel_h: 3,
            kernel_w: 3,
        },
        Relu,
        MaxPool2d,
        Dropout { rate: 0.25 },
        Flatten,
        Dense { units: 128 },
        Relu,
        Dropout { rate: 0.5 },
        Dense { units: num_classes },
        Softmax,
    ]
}

fn dnn_layers(num_classes: usize) -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Flatten,
        Dense { units: 256 },
        Relu,
        Dropout { rate: 0.5 },
        Dense { units: 128 },
        Relu,
        Dense { units: num_classes },
        Softmax,
    ]
}

/// A network plus the pipeline config its inputs were produced with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub net: Sequential<f32>,
    pub pipeline: PipelineConfig,
}

impl Model {
    pub fn build(
        kind: ModelKind,
        pipeline: &PipelineConfig,
        num_classes: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self, ModelError> {
        let spec = ModelSpec::new(kind, pipeline.shape(), num_classes)?;
        let net = Sequential::from_specs(&spec.nn_input_shape(), &spec.layers, rng)?;
        Ok(Self {
            spec,
            net,
            pipeline: pipeline.clone(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Width of the flatten stage.
    pub fn flatten_width(&self) -> usize {
        let shapes = self.net.shapes();
        let idx = self
            .net
            .layers()
            .iter()
            .position(|l| matches!(l, Layer::Flatten))
            .expect("both architectures flatten");
        shapes[idx + 1][0]
    }

    /// Converts a feature tensor to the network's input layout.
    pub fn input_tensor(&self, features: &FeatureTensor) -> Result<Tensor<f32>, ModelError> {
        if features.shape() != self.spec.input_shape {
            return Err(ModelError::ShapeMismatch {
                expected: self.spec.input_shape,
                actual: features.shape(),
            });
        }
        Ok(Tensor::new(
            self.spec.nn_input_shape().to_vec(),
            features.values().to_vec(),
        )?)
    }

    /// Class probabilities for one example. In `Train` mode dropout draws from `rng`.
    pub fn forward_one(
        &self,
        features: &FeatureTensor,
        mode: Mode,
        rng: &mut SplitMix64,
    ) -> Result<Vec<f32>, ModelError> {
        let x = self.input_tensor(features)?;
        Ok(self.net.forward(&x, mode, rng)?.into_data())
    }

    /// One probability row per example. Rows are computed in parallel;
    /// in `Train` mode example `i` uses the stream `derive(seed, [i])`.
    pub fn forward(&self, batch: &[FeatureTensor], mode: Mode, seed: u64) -> Result<Vec<Vec<f32>>, ModelError> {
        batch
            .par_iter()
            .enumerate()
            .map(|(i, f)| self.forward_one(f, mode, &mut SplitMix64::derive(seed, &[i as u64])))
            .collect()
    }

    /// Deterministic inference on one example.
    pub fn predict_proba(&self, features: &FeatureTensor) -> Result<Vec<f32>, ModelError> {
        self.forward_one(features, Mode::Eval, &mut SplitMix64::new(0))
    }

    /// Class names used in score listings.
    pub fn labels(&self) -> Vec<String> {
        class_labels(self.num_classes())
    }
}

/// Emotion names in code order when there are eight classes, otherwise `class_<i>`.
pub fn class_labels(num_classes: usize) -> Vec<String> {
    if num_classes == Emotion::ALL.len() {
        Emotion::ALL.iter().map(|e| e.name().to_string()).collect()
    } else {
        (0..num_classes).map(|i| format!("class_{i}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub probability: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionScores {
    pub scores: Vec<LabelScore>,
    pub top: String,
}

/// Featurizes `clip` with the model's own pipeline and runs inference.
pub fn predict(model: &Model, clip: &AudioClip) -> Result<EmotionScores, ModelError> {
    let features = featurize(clip, &model.pipeline)?;
    let probs = model.predict_proba(&features)?;
    let scores: Vec<LabelScore> = model
        .labels()
        .into_iter()
        .zip(&probs)
        .map(|(label, &probability)| LabelScore { label, probability })
        .collect();
    let top = argmax(&probs);
    Ok(EmotionScores {
        top: scores[top].label.clone(),
        scores,
    })
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipeline(h: usize, w: usize) -> PipelineConfig {
        PipelineConfig {
            height: h,
            width: w,
            ..PipelineConfig::default()
        }
    }

    fn random_features(h: usize, w: usize, rng: &mut SplitMix64) -> FeatureTensor {
        FeatureTensor::new(h, w, (0..h * w).map(|_| rng.next_normal() as f32).collect()).unwrap()
    }

    #[test]
    fn cnn_parameter_count_and_flatten_width() {
        let model = Model::build(ModelKind::CnnFig1, &pipeline(64, 64), 8, &mut SplitMix64::new(0)).unwrap();
        assert_eq!(model.flatten_width(), 14 * 14 * 64);
        let counts: Vec<usize> = model
            .net
            .layers()
            .iter()
            .filter(|l| !l.params().is_empty())
            .map(|l| l.params().iter().map(|p| p.value.len()).sum())
            .collect();
        assert_eq!(counts, vec![160, 18_496, 1_605_760, 1_032]);
        assert_eq!(model.param_count(), 1_625_448);
    }

    #[test]
    fn cnn_minimum_input() {
        let too_small = Model::build(ModelKind::CnnFig1, &pipeline(8, 8), 8, &mut SplitMix64::new(0));
        assert!(matches!(too_small, Err(ModelError::InputTooSmall { .. })));
        let model = Model::build(ModelKind::CnnFig1, &pipeline(9, 9), 8, &mut SplitMix64::new(0)).unwrap();
        assert_eq!(model.flatten_width(), 64);
    }

    #[test]
    fn cnn_layer_audit() {
        use LayerSpec::*;
        let model = Model::build(ModelKind::CnnFig1, &pipeline(16, 16), 8, &mut SplitMix64::new(0)).unwrap();
        let expected = vec![
            Conv2d {
                filters: 32,
                kernel_h: 2,
                kernel_w: 2,
            },
            Relu,
            MaxPool2d,
            Dropout { rate: 0.25 },
            Conv2d {
                filters: 64,
                kernel_h: 3,
                kernel_w: 3,
            },
            Relu,
            MaxPool2d,
            Dropout { rate: 0.25 },
            Flatten,
            Dense { units: 128 },
            Relu,
            Dropout { rate: 0.5 },
            Dense { units: 8 },
            Softmax,
        ];
        assert_eq!(model.net.specs(), expected);
        assert_eq!(model.spec.layers, expected);
    }

    #[test]
    fn dnn_shapes_and_determinism() {
        let a = Model::build(ModelKind::DnnBaseline, &pipeline(64, 64), 8, &mut SplitMix64::new(3)).unwrap();
        let b = Model::build(ModelKind::DnnBaseline, &pipeline(64, 64), 8, &mut SplitMix64::new(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.net.params()[0].value.shape(), &[4096, 256]);
        assert_eq!(a.param_count(), 1_082_760);
        let probs = a
            .predict_proba(&random_features(64, 64, &mut SplitMix64::new(1)))
            .unwrap();
        assert_eq!(probs.len(), 8);
        assert!((probs.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn fresh_cnn_is_uniform_on_average() {
        // Individual inits are not near-uniform (logit std is a few units),
        // but every class averages close to 1/8 across initializations.
        let mut rng = SplitMix64::new(11);
        let mut mean = [0.0f64; 8];
        for _ in 0..100 {
            let model = Model::build(ModelKind::CnnFig1, &pipeline(16, 16), 8, &mut rng).unwrap();
            let probs = model.predict_proba(&random_features(16, 16, &mut rng)).unwrap();
            for (m, p) in mean.iter_mut().zip(&probs) {
                *m += *p as f64 / 100.0;
            }
        }
        assert!(mean.iter().all(|p| (0.05..=0.25).contains(p)), "{mean:?}");
    }

    #[test]
    fn forward_batch_contract() {
        let mut rng = SplitMix64::new(5);
        let model = Model::build(ModelKind::CnnFig1, &pipeline(16, 16), 8, &mut rng).unwrap();
        let batch: Vec<_> = (0..3).map(|_| random_features(16, 16, &mut rng)).collect();
        let rows = model.forward(&batch, Mode::Eval, 0).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.len(), 8);
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
        assert_eq!(rows, model.forward(&batch, Mode::Eval, 99).unwrap());
        let wrong = random_features(17, 16, &mut rng);
        assert!(matches!(
            model.predict_proba(&wrong),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn predict_scores_clip() {
        let mut rng = SplitMix64::new(6);
        let model = Model::build(ModelKind::CnnFig1, &pipeline(16, 16), 8, &mut rng).unwrap();
        let samples: Vec<f32> = (0..24_000).map(|_| rng.uniform(-0.3, 0.3) as f32).collect();
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let scores = predict(&model, &clip).unwrap();
        let labels: Vec<&str> = scores.scores.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "neutral",
                "calm",
                "happy",
                "sad",
                "angry",
                "fearful",
                "disgust",
                "surprised"
            ]
        );
        let total: f32 = scores.scores.iter().map(|s| s.probability).sum();
        assert!((total - 1.0).abs() < 1e-5);
        let best = scores
            .scores
            .iter()
            .max_by(|a, b| a.probability.total_cmp(&b.probability))
            .unwrap();
        assert_eq!(scores.top, best.label);
        assert_eq!(predict(&model, &clip.clone()).unwrap(), scores);
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
        assert_eq!(argmax(&[1.0]), 0);
    }
}
