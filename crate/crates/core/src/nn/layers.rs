//! Forward and backward passes of the individual layers.
//!
//! Image tensors are `[H, W, C]`. Convolution weights are `[Kh, Kw, C, F]`
//! and dense weights `[n_in, n_out]`. Parameter gradients are accumulated
//! (`+=`) into caller-owned buffers so a batch can be reduced in place.

use super::tensor::{axpy, dot, Scalar, Tensor};
use super::{Mode, NnError, SplitMix64};

fn shape_err(msg: String) -> NnError {
    NnError::ShapeMismatch(msg)
}

fn dims3<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize), NnError> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(shape_err(format!("{what} must be [H, W, C], got {s:?}"))),
    }
}

pub(crate) fn conv_dims<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<ConvDims, NnError> {
    let (h, w, c) = dims3(input, "conv2d input")?;
    let (kh, kw, wc, f) = match *weight.shape() {
        [kh, kw, wc, f] => (kh, kw, wc, f),
        ref s => return Err(shape_err(format!("conv2d weight must be [Kh, Kw, C, F], got {s:?}"))),
    };
    if wc != c {
        return Err(shape_err(format!("conv2d weight expects {wc} channels, input has {c}")));
    }
    if let Some(bias) = bias {
        if bias.shape() != [f] {
            return Err(shape_err(format!("conv2d bias must be [{f}], got {:?}", bias.shape())));
        }
    }
    if h < kh || w < kw {
        return Err(shape_err(format!("conv2d input {h}x{w} smaller than kernel {kh}x{kw}")));
    }
    Ok(ConvDims {
        h,
        w,
        c,
        kh,
        kw,
        f,
        oh: h - kh + 1,
        ow: w - kw + 1,
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    h: usize,
    w: usize,
    c: usize,
    kh: usize,
    kw: usize,
    f: usize,
    oh: usize,
    ow: usize,
}

impl ConvDims {
    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.c
    }
}

// Row p = i*ow + j holds the receptive field of output (i, j) in (a, b, c) order,
// which is the row order of the weight viewed as a [Kh*Kw*C, F] matrix.
fn im2col<T: Scalar>(input: &[T], d: &ConvDims) -> Vec<T> {
    let k = d.patch_len();
    let seg = d.kw * d.c;
    let mut patches = vec![T::zero(); d.oh * d.ow * k];
    for i in 0..d.oh {
        for j in 0..d.ow {
            let row = &mut patches[(i * d.ow + j) * k..][..k];
            for a in 0..d.kh {
                let src = (i + a) * d.w * d.c + j * d.c;
                row[a * seg..(a + 1) * seg].copy_from_slice(&input[src..src + seg]);
            }
        }
    }
    patches
}

/// Valid (unpadded), stride-1 2-D convolution. Returns the output and the
/// im2col patch matrix reused by the backward pass.
pub(crate) fn conv2d_forward_cached<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>), NnError> {
    let d = conv_dims(input, weight, Some(bias))?;
    let k = d.patch_len();
    let patches = im2col(input.data(), &d);
    let wmat = weight.data();
    let mut out = vec![T::zero(); d.oh * d.ow * d.f];
    for (row, patch) in out.chunks_exact_mut(d.f).zip(patches.chunks_exact(k)) {
        row.copy_from_slice(bias.data());
        for (kk, &x) in patch.iter().enumerate() {
            if x != T::zero() {
                axpy(row, x, &wmat[kk * d.f..(kk + 1) * d.f]);
            }
        }
    }
    Ok((Tensor::new(vec![d.oh, d.ow, d.f], out)?, patches))
}

pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    conv2d_forward_cached(input, weight, bias).map(|(out, _)| out)
}

/// Backward pass of [`conv2d_forward`]. Adds weight and bias gradients into
/// `grad_weight` / `grad_bias` and returns the input gradient when asked.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    grad_weight: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
    need_input_grad: bool,
) -> Result<Option<Tensor<T>>, NnError> {
    let d = conv_dims(input, weight, None)?;
    let patches = im2col(input.data(), &d);
    conv2d_backward_cached(
        &d,
        &patches,
        input.shape(),
        weight,
        grad_out,
        grad_weight,
        grad_bias,
        need_input_grad,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward_cached<T: Scalar>(
    d: &ConvDims,
    patches: &[T],
    input_shape: &[usize],
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    grad_weight: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
    need_input_grad: bool,
) -> Result<Option<Tensor<T>>, NnError> {
    if grad_out.shape() != [d.oh, d.ow, d.f] {
        return Err(shape_err(format!(
            "conv2d grad_out must be [{}, {}, {}], got {:?}",
            d.oh,
            d.ow,
            d.f,
            grad_out.shape()
        )));
    }
    if grad_weight.shape() != weight.shape() || grad_bias.shape() != [d.f] {
        return Err(shape_err("conv2d gradient buffers do not match parameters".into()));
    }
    let k = d.patch_len();
    // Work with the transposed weight [F, K] so every inner loop is a contiguous axpy.
    let wmat = weight.data();
    let mut wt = vec![T::zero(); d.f * k];
    for kk in 0..k {
        for f in 0..d.f {
            wt[f * k + kk] = wmat[kk * d.f + f];
        }
    }
    let mut dwt = vec![T::zero(); d.f * k];
    let mut dpatches = if need_input_grad {
        vec![T::zero(); d.oh * d.ow * k]
    } else {
        Vec::new()
    };
    let gb = grad_bias.data_mut();
    for (p, g_row) in grad_out.data().chunks_exact(d.f).enumerate() {
        let patch = &patches[p * k..(p + 1) * k];
        for (f, &g) in g_row.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            gb[f] += g;
            axpy(&mut dwt[f * k..(f + 1) * k], g, patch);
            if need_input_grad {
                axpy(&mut dpatches[p * k..(p + 1) * k], g, &wt[f * k..(f + 1) * k]);
            }
        }
    }
    let gw = grad_weight.data_mut();
    for kk in 0..k {
        for f in 0..d.f {
            gw[kk * d.f + f] += dwt[f * k + kk];
        }
    }
    if !need_input_grad {
        return Ok(None);
    }
    let seg = d.kw * d.c;
    let mut dinput = vec![T::zero(); d.h * d.w * d.c];
    for i in 0..d.oh {
        for j in 0..d.ow {
            let row = &dpatches[(i * d.ow + j) * k..][..k];
            for a in 0..d.kh {
                let dst = (i + a) * d.w * d.c + j * d.c;
                axpy(&mut dinput[dst..dst + seg], T::one(), &row[a * seg..(a + 1) * seg]);
            }
        }
    }
    Ok(Some(Tensor::new(input_shape.to_vec(), dinput)?))
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    Tensor::from_fn(x.shape(), |i| x.data()[i].max(T::zero()))
}

/// Passes the gradient where `x > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    Tensor::from_fn(x.shape(), |i| {
        if x.data()[i] > T::zero() {
            grad_out.data()[i]
        } else {
            T::zero()
        }
    })
}

/// 2x2 max pooling with stride 2. A trailing odd row or column is dropped.
/// Returns the pooled tensor and, per output, the flat input index of the
/// maximum (first in row-major window order on ties).
pub fn maxpool2d_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>), NnError> {
    let (h, w, c) = dims3(x, "maxpool input")?;
    if h < 2 || w < 2 {
        return Err(shape_err(format!("maxpool input {h}x{w} is smaller than 2x2")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let data = x.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let mut best_idx = ((2 * i) * w + 2 * j) * c + ch;
                let mut best = data[best_idx];
                for (a, b) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * i + a) * w + 2 * j + b) * c + ch;
                    if data[idx] > best {
                        best = data[idx];
                        best_idx = idx;
                    }
                }
                out.push(best);
                argmax.push(best_idx as u32);
            }
        }
    }
    Ok((Tensor::new(vec![oh, ow, c], out)?, argmax))
}

pub fn maxpool2d_backward<T: Scalar>(input_shape: &[usize], argmax: &[u32], grad_out: &Tensor<T>) -> Tensor<T> {
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        g[idx as usize] += v;
    }
    grad
}

fn check_rate(rate: f64) -> Result<(), NnError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(NnError::InvalidRate(rate))
    }
}

/// Inverted dropout. In `Train` mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; the returned mask
/// holds the per-element multiplier. `Eval` is the identity.
pub fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut SplitMix64,
) -> Result<(Tensor<T>, Option<Vec<T>>), NnError> {
    check_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.next_f64() < rate { T::zero() } else { keep })
        .collect();
    let y = Tensor::from_fn(x.shape(), |i| x.data()[i] * mask[i]);
    Ok((y, Some(mask)))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&[T]>, grad_out: &Tensor<T>) -> Tensor<T> {
    match mask {
        None => grad_out.clone(),
        Some(m) => Tensor::from_fn(grad_out.shape(), |i| grad_out.data()[i] * m[i]),
    }
}

pub fn flatten<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    Tensor::new(vec![x.len()], x.data().to_vec()).expect("length preserved")
}

pub fn unflatten<T: Scalar>(x: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>, NnError> {
    Tensor::new(shape.to_vec(), x.data().to_vec())
}

fn dense_dims<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>) -> Result<(usize, usize), NnError> {
    let (n, m) = match *weight.shape() {
        [n, m] => (n, m),
        ref s => return Err(shape_err(format!("dense weight must be [n, m], got {s:?}"))),
    };
    if x.shape() != [n] {
        return Err(shape_err(format!("dense input must be [{n}], got {:?}", x.shape())));
    }
    Ok((n, m))
}

/// `y = x W + b`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (_, m) = dense_dims(x, weight)?;
    if bias.shape() != [m] {
        return Err(shape_err(format!("dense bias must be [{m}], got {:?}", bias.shape())));
    }
    let mut y = bias.data().to_vec();
    for (&xi, row) in x.data().iter().zip(weight.data().chunks_exact(m)) {
        if xi != T::zero() {
            axpy(&mut y, xi, row);
        }
    }
    Tensor::new(vec![m], y)
}

pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    grad_weight: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
    need_input_grad: bool,
) -> Result<Option<Tensor<T>>, NnError> {
    let (n, m) = dense_dims(x, weight)?;
    if grad_out.shape() != [m] || grad_weight.shape() != [n, m] || grad_bias.shape() != [m] {
        return Err(shape_err("dense gradient shapes do not match the layer".into()));
    }
    let gy = grad_out.data();
    axpy(grad_bias.data_mut(), T::one(), gy);
    for (&xi, row) in x.data().iter().zip(grad_weight.data_mut().chunks_exact_mut(m)) {
        if xi != T::zero() {
            axpy(row, xi, gy);
        }
    }
    if !need_input_grad {
        return Ok(None);
    }
    let dx = weight.data().chunks_exact(m).map(|row| dot(row, gy)).collect();
    Ok(Some(Tensor::new(vec![n], dx)?))
}

/// Numerically stable softmax over a logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Vector-Jacobian product of softmax given its output `probs`.
pub fn softmax_backward<T: Scalar>(probs: &[T], grad_out: &[T]) -> Vec<T> {
    let inner: T = probs.iter().zip(grad_out).map(|(&p, &g)| p * g).sum();
    probs.iter().zip(grad_out).map(|(&p, &g)| p * (g - inner)).collect()
}

/// Softmax followed by categorical cross-entropy against `label`.
/// Returns `(probs, loss)`; the loss gradient w.r.t. the logits is
/// `probs - one_hot(label)`, see [`softmax_xent_grad`].
pub fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> Result<(Vec<T>, T), NnError> {
    if logits.len() < 2 || label >= logits.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits[label];
    Ok((softmax(logits), loss))
}

pub fn softmax_xent_grad<T: Scalar>(probs: &[T], label: usize) -> Vec<T> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == label { p - T::one() } else { p })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn random(shape: &[usize], rng: &mut SplitMix64) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
    }

    fn naive_conv(input: &Tensor<f64>, weight: &Tensor<f64>, bias: &Tensor<f64>) -> Vec<f64> {
        let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (kh, kw, f) = (weight.shape()[0], weight.shape()[1], weight.shape()[3]);
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let mut out = vec![0.0; oh * ow * f];
        for i in 0..oh {
            for j in 0..ow {
                for ff in 0..f {
                    let mut acc = bias.data()[ff];
                    for a in 0..kh {
                        for b in 0..kw {
                            for cc in 0..c {
                                acc += input.data()[((i + a) * w + j + b) * c + cc]
                                    * weight.data()[((a * kw + b) * c + cc) * f + ff];
                            }
                        }
                    }
                    out[(i * ow + j) * f + ff] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_sum_of_ones() {
        let out = conv2d_forward(
            &t(&[3, 3, 1], &[1.0; 9]),
            &t(&[2, 2, 1, 1], &[1.0; 4]),
            &t(&[1], &[0.0]),
        )
        .unwrap();
        assert_eq!(out.shape(), &[2, 2, 1]);
        assert_eq!(out.data(), &[4.0; 4]);
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = SplitMix64::new(1);
        let x = random(&[4, 5, 1], &mut rng);
        let out = conv2d_forward(&x, &t(&[1, 1, 1, 1], &[1.0]), &t(&[1], &[0.0])).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = SplitMix64::new(2);
        let x = random(&[5, 5, 2], &mut rng);
        let w = random(&[3, 3, 2, 3], &mut rng);
        let b = random(&[3], &mut rng);
        let fast = conv2d_forward(&x, &w, &b).unwrap();
        let slow = naive_conv(&x, &w, &b);
        let err = fast
            .data()
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6);

        // and in f32
        let (x32, w32, b32) = (x.cast::<f32>(), w.cast::<f32>(), b.cast::<f32>());
        let fast32 = conv2d_forward(&x32, &w32, &b32).unwrap();
        let err = fast32
            .data()
            .iter()
            .zip(&slow)
            .map(|(a, b)| (*a as f64 - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6);
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor::<f64>::zeros(&[2, 2, 1]);
        assert!(conv2d_forward(&x, &Tensor::zeros(&[3, 3, 1, 1]), &Tensor::zeros(&[1])).is_err());
        assert!(conv2d_forward(&x, &Tensor::zeros(&[1, 1, 2, 1]), &Tensor::zeros(&[1])).is_err());
        assert!(conv2d_forward(&x, &Tensor::zeros(&[1, 1, 1, 1]), &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn relu_examples() {
        let x = t(&[3], &[-1.0, 0.0, 2.0]);
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(relu_backward(&x, &t(&[3], &[5.0, 5.0, 5.0])).data(), &[0.0, 0.0, 5.0]);
        let neg = t(&[2], &[-3.0, -0.5]);
        assert_eq!(relu_forward(&neg).data(), &[0.0, 0.0]);
        assert_eq!(relu_backward(&neg, &t(&[2], &[1.0, 1.0])).data(), &[0.0, 0.0]);
    }

    #[test]
    fn maxpool_examples() {
        let (out, _) = maxpool2d_forward(&t(&[2, 2, 1], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(out.data(), &[4.0]);

        let x = t(&[4, 4, 1], &[7.0; 16]);
        let (out, argmax) = maxpool2d_forward(&x).unwrap();
        assert_eq!(out.data(), &[7.0; 4]);
        let grad = maxpool2d_backward(x.shape(), &argmax, &t(&[2, 2, 1], &[1.0; 4]));
        let expected: Vec<f64> = (0..16)
            .map(|i| if (i / 4) % 2 == 0 && (i % 4) % 2 == 0 { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(grad.data(), expected.as_slice());

        // odd trailing row/column dropped
        let (out, _) = maxpool2d_forward(&Tensor::<f64>::zeros(&[5, 3, 2])).unwrap();
        assert_eq!(out.shape(), &[2, 1, 2]);
        assert!(maxpool2d_forward(&Tensor::<f64>::zeros(&[1, 4, 1])).is_err());
    }

    #[test]
    fn maxpool_matches_brute_force() {
        let mut rng = SplitMix64::new(4);
        let x = random(&[8, 8, 3], &mut rng);
        let (out, _) = maxpool2d_forward(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for c in 0..3 {
                    let window = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|(a, b)| x.data()[((2 * i + a) * 8 + 2 * j + b) * 3 + c])
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(out.data()[(i * 4 + j) * 3 + c], window);
                }
            }
        }
    }

    #[test]
    fn dropout_modes() {
        let x = t(&[4], &[1.0, 2.0, 3.0, 4.0]);
        let mut rng = SplitMix64::new(0);
        for mode in [Mode::Train, Mode::Eval] {
            let (y, mask) = dropout_forward(&x, 0.0, mode, &mut rng).unwrap();
            assert_eq!(y, x);
            assert!(mask.is_none());
        }
        let (y, _) = dropout_forward(&x, 0.5, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert_eq!(
            dropout_forward(&x, 1.0, Mode::Train, &mut rng).unwrap_err(),
            NnError::InvalidRate(1.0)
        );
        assert!(dropout_forward(&x, -0.1, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let ones = Tensor::<f32>::from_fn(&[50], |_| 1.0);
        let mut rng = SplitMix64::new(77);
        let mut sums = vec![0.0f64; 50];
        let trials = 10_000;
        for _ in 0..trials {
            let (y, _) = dropout_forward(&ones, 0.25, Mode::Train, &mut rng).unwrap();
            for (s, &v) in sums.iter_mut().zip(y.data()) {
                *s += v as f64;
            }
        }
        for s in sums {
            let mean = s / trials as f64;
            assert!((0.98..=1.02).contains(&mean), "mean {mean}");
        }
    }

    #[test]
    fn flatten_round_trip() {
        let x = t(&[2, 2, 1], &[1.0, 2.0, 3.0, 4.0]);
        let flat = flatten(&x);
        assert_eq!(flat.shape(), &[4]);
        assert_eq!(flat.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(flatten(&flat), flat);
        assert_eq!(unflatten(&flat, &[2, 2, 1]).unwrap(), x);
    }

    #[test]
    fn dense_examples() {
        let x = t(&[3], &[1.0, -2.0, 0.5]);
        let eye = Tensor::from_fn(&[3, 3], |i| if i / 3 == i % 3 { 1.0 } else { 0.0 });
        assert_eq!(dense_forward(&x, &eye, &Tensor::zeros(&[3])).unwrap(), x);
        let y = dense_forward(&t(&[1], &[5.0]), &t(&[1, 1], &[2.0]), &t(&[1], &[3.0])).unwrap();
        assert_eq!(y.data(), &[13.0]);
        assert!(dense_forward(&t(&[2], &[1.0, 1.0]), &eye, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn softmax_xent_examples() {
        let (probs, loss) = softmax_xent(&[0.3f64; 8], 2).unwrap();
        for p in &probs {
            assert!((p - 0.125).abs() < 1e-12);
        }
        assert!((loss - 8f64.ln()).abs() < 1e-12);

        let (probs, loss) = softmax_xent(&[1000.0f32, 0.0], 0).unwrap();
        assert_eq!(probs, vec![1.0, 0.0]);
        assert!(loss.is_finite());
        let (_, loss) = softmax_xent(&[1000.0f32, 0.0], 1).unwrap();
        assert_eq!(loss, 1000.0);

        assert_eq!(
            softmax_xent(&[0.0f32; 8], 8).unwrap_err(),
            NnError::LabelOutOfRange { label: 8, classes: 8 }
        );
        assert!(softmax_xent(&[0.0f32], 0).is_err());
    }
}
