//! Weight initialization.

use super::tensor::{Scalar, Tensor};
use super::SplitMix64;

/// He-normal: `N(0, 2 / fan_in)`.
pub fn he_normal<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut SplitMix64) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64(rng.next_normal() * std))
}

/// Glorot-uniform: `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut SplitMix64) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64(rng.uniform(-limit, limit)))
}

/// He-normal for weights feeding a ReLU, Glorot-uniform otherwise.
pub fn init_weight<T: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    feeds_relu: bool,
    rng: &mut SplitMix64,
) -> Tensor<T> {
    if feeds_relu {
        he_normal(shape, fan_in, rng)
    } else {
        glorot_uniform(shape, fan_in, fan_out, rng)
    }
}
