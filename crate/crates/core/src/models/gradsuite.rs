//! The full finite-difference suite: each layer kind on its own, the loss,
//! and the complete CNN stack end to end.

use serde::Serialize;

use super::{ModelKind, ModelSpec};
use crate::nn::gradcheck::{self, Coverage, GradCheckReport};
use crate::nn::{Layer, NnError, Parameter, Sequential, SplitMix64, Tensor};

pub const LAYER_TOLERANCE: f64 = 1e-3;
pub const END_TO_END_TOLERANCE: f64 = 5e-3;
const EPS: f64 = 1e-3;
/// Coordinates probed per block in the end-to-end check.
const END_TO_END_SAMPLES: usize = 24;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub report: GradCheckReport,
    pub tolerance: f64,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.report.checked > 0 && self.report.max_rel_error < self.tolerance
    }
}

fn uniform(shape: &[usize], rng: &mut SplitMix64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
}

/// Runs every check with inputs drawn from `seed`.
pub fn gradient_suite(seed: u64) -> Result<Vec<SuiteEntry>, NnError> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::new();
    let mut layer = |name, layer: Layer<f64>, x: Tensor<f64>, rng: &mut SplitMix64| -> Result<(), NnError> {
        out.push(SuiteEntry {
            name,
            report: gradcheck::grad_check(&layer, &x, EPS, rng)?,
            tolerance: LAYER_TOLERANCE,
        });
        Ok(())
    };

    let dense = Layer::Dense {
        weight: Parameter::new(uniform(&[12, 7], &mut rng)),
        bias: Parameter::new(uniform(&[7], &mut rng)),
    };
    let x = uniform(&[12], &mut rng);
    layer("dense", dense, x, &mut rng)?;

    let conv = Layer::Conv2d {
        weight: Parameter::new(uniform(&[3, 3, 2, 4], &mut rng)),
        bias: Parameter::new(uniform(&[4], &mut rng)),
    };
    let x = uniform(&[6, 5, 2], &mut rng);
    layer("conv2d", conv, x, &mut rng)?;

    let margin = 10.0 * EPS;
    let x = gradcheck::random_away_from_zero(&[6, 6, 3], margin, &mut rng);
    layer("relu", Layer::Relu, x, &mut rng)?;
    let x = gradcheck::random_away_from_zero(&[6, 6, 3], margin, &mut rng);
    layer("maxpool2d", Layer::MaxPool2d, x, &mut rng)?;
    let x = uniform(&[5, 5, 2], &mut rng);
    layer("dropout", Layer::Dropout { rate: 0.25 }, x, &mut rng)?;
    let x = uniform(&[4, 3, 2], &mut rng);
    layer("flatten", Layer::Flatten, x, &mut rng)?;
    let x = uniform(&[8], &mut rng);
    layer("softmax", Layer::Softmax, x, &mut rng)?;

    let logits: Vec<f64> = (0..8).map(|_| rng.uniform(-3.0, 3.0)).collect();
    let label = rng.below(8);
    out.push(SuiteEntry {
        name: "softmax_xent",
        report: gradcheck::grad_check_softmax_xent(&logits, label, EPS)?,
        tolerance: LAYER_TOLERANCE,
    });

    let spec = ModelSpec::new(ModelKind::CnnFig1, (16, 16), 8).expect("16x16 is large enough");
    let net = Sequential::<f64>::from_specs(&spec.nn_input_shape(), &spec.layers, &mut rng)?;
    let x = uniform(&spec.nn_input_shape(), &mut rng);
    let label = rng.below(8);
    out.push(SuiteEntry {
        name: "cnn_end_to_end",
        report: gradcheck::grad_check_network(&net, &x, label, EPS, Coverage::Sample(END_TO_END_SAMPLES), &mut rng)?,
        tolerance: END_TO_END_TOLERANCE,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_a_few_seeds() {
        for seed in 0..5 {
            for entry in gradient_suite(seed).unwrap() {
                assert!(entry.passed(), "seed {seed}: {entry:?}");
            }
        }
    }
}
