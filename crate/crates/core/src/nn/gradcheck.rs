//! Central finite-difference verification of the analytic backward passes.
//!
//! Checks run on the `f64` instantiation of the layer code so the finite
//! differences themselves are not swamped by rounding. A coordinate whose
//! `±ε` perturbation flips any ReLU sign or max-pool winner sits on a kink;
//! it is skipped and counted rather than compared.

use serde::Serialize;

use super::layers;
use super::network::{Layer, Sequential};
use super::tensor::Tensor;
use super::{Mode, NnError, SplitMix64};

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because the perturbation crossed a kink.
    pub skipped: usize,
}

impl GradCheckReport {
    fn empty() -> Self {
        Self {
            max_rel_error: 0.0,
            checked: 0,
            skipped: 0,
        }
    }

    pub fn merge(&mut self, other: &GradCheckReport) {
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.checked += other.checked;
        self.skipped += other.skipped;
    }
}

/// Which coordinates of each block (input, then parameters) to probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coverage {
    All,
    /// At most this many randomly chosen coordinates per block.
    Sample(usize),
}

fn element_mut<'a>(net: &'a mut Sequential<f64>, input: &'a mut Tensor<f64>, block: usize, idx: usize) -> &'a mut f64 {
    if block == 0 {
        &mut input.data_mut()[idx]
    } else {
        &mut net
            .params_mut()
            .into_iter()
            .nth(block - 1)
            .expect("block in range")
            .value
            .data_mut()[idx]
    }
}

fn pick_coords(len: usize, coverage: Coverage, rng: &mut SplitMix64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if let Coverage::Sample(n) = coverage {
        if n < len {
            rng.shuffle(&mut idx);
            idx.truncate(n);
        }
    }
    idx
}

/// Compares `analytic` (input gradient first, then one tensor per parameter)
/// against central differences of `objective`.
fn compare<F>(
    net: &mut Sequential<f64>,
    input: &mut Tensor<f64>,
    analytic: &[Tensor<f64>],
    eps: f64,
    coverage: Coverage,
    rng: &mut SplitMix64,
    objective: F,
) -> Result<GradCheckReport, NnError>
where
    F: Fn(&Sequential<f64>, &Tensor<f64>) -> Result<(f64, u64), NnError>,
{
    let (_, base_pattern) = objective(net, input)?;
    let mut report = GradCheckReport::empty();
    for (block, grad) in analytic.iter().enumerate() {
        for idx in pick_coords(grad.len(), coverage, rng) {
            let orig = *element_mut(net, input, block, idx);
            *element_mut(net, input, block, idx) = orig + eps;
            let (f_plus, p_plus) = objective(net, input)?;
            *element_mut(net, input, block, idx) = orig - eps;
            let (f_minus, p_minus) = objective(net, input)?;
            *element_mut(net, input, block, idx) = orig;
            if p_plus != base_pattern || p_minus != base_pattern {
                report.skipped += 1;
                continue;
            }
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            report.max_rel_error = report.max_rel_error.max(relative_error(grad.data()[idx], numeric));
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Checks one layer's backward pass against the scalar objective
/// `sum(r * layer(x))` for a random projection `r`. Dropout layers are run in
/// `Train` mode with a fixed mask.
pub fn grad_check(
    layer: &Layer<f64>,
    input: &Tensor<f64>,
    eps: f64,
    rng: &mut SplitMix64,
) -> Result<GradCheckReport, NnError> {
    let mut net = Sequential::from_layers(input.shape(), vec![layer.clone()])?;
    let out_shape = net.shapes().pop().unwrap();
    let projection = Tensor::from_fn(&out_shape, |_| rng.uniform(-1.0, 1.0));
    let mask_rng = SplitMix64::new(rng.next_u64());

    let trace = net.forward_trace(input, Mode::Train, &mut mask_rng.clone())?;
    let mut grads = net.zero_grads();
    let input_grad = net
        .backward(&trace, &projection, &mut grads, true)?
        .expect("input gradient requested");
    let mut analytic = vec![input_grad];
    analytic.extend(grads);

    let objective = |net: &Sequential<f64>, x: &Tensor<f64>| {
        let trace = net.forward_trace(x, Mode::Train, &mut mask_rng.clone())?;
        let value: f64 = trace
            .output()
            .data()
            .iter()
            .zip(projection.data())
            .map(|(y, r)| y * r)
            .sum();
        Ok((value, trace.activation_pattern(net.layers())))
    };
    let mut input = input.clone();
    compare(&mut net, &mut input, &analytic, eps, Coverage::All, rng, objective)
}

/// Checks `probs - one_hot(label)` against differences of the cross-entropy.
pub fn grad_check_softmax_xent(logits: &[f64], label: usize, eps: f64) -> Result<GradCheckReport, NnError> {
    let (probs, _) = layers::softmax_xent(logits, label)?;
    let analytic = layers::softmax_xent_grad(&probs, label);
    let mut report = GradCheckReport::empty();
    let mut z = logits.to_vec();
    for i in 0..z.len() {
        let orig = z[i];
        z[i] = orig + eps;
        let (_, f_plus) = layers::softmax_xent(&z, label)?;
        z[i] = orig - eps;
        let (_, f_minus) = layers::softmax_xent(&z, label)?;
        z[i] = orig;
        let numeric = (f_plus - f_minus) / (2.0 * eps);
        report.max_rel_error = report.max_rel_error.max(relative_error(analytic[i], numeric));
        report.checked += 1;
    }
    Ok(report)
}

/// End-to-end check of a whole network under the cross-entropy loss, in
/// `Train` mode with fixed dropout masks.
pub fn grad_check_network(
    net: &Sequential<f64>,
    input: &Tensor<f64>,
    label: usize,
    eps: f64,
    coverage: Coverage,
    rng: &mut SplitMix64,
) -> Result<GradCheckReport, NnError> {
    let mask_rng = SplitMix64::new(rng.next_u64());
    let mut grads = net.zero_grads();
    let (_, _, input_grad) = net.loss_and_grad(input, label, Mode::Train, &mut mask_rng.clone(), &mut grads, true)?;
    let mut analytic = vec![input_grad.expect("input gradient requested")];
    analytic.extend(grads);
    let objective = |net: &Sequential<f64>, x: &Tensor<f64>| net.loss(x, label, Mode::Train, &mut mask_rng.clone());
    let mut net = net.clone();
    let mut input = input.clone();
    compare(&mut net, &mut input, &analytic, eps, coverage, rng, objective)
}

/// Random tensor in `[-1, 1]` with no element closer than `margin` to zero.
pub fn random_away_from_zero(shape: &[usize], margin: f64, rng: &mut SplitMix64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| loop {
        let v = rng.uniform(-1.0, 1.0);
        if v.abs() >= margin {
            break v;
        }
    })
}
