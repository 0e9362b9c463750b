use serde::{Deserialize, Serialize};

use super::layers::{self, conv2d_forward_cached};
use super::tensor::{Scalar, Tensor};
use super::{Mode, NnError, SplitMix64};

/// Serializable description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel_h: usize,
        kernel_w: usize,
    },
    Relu,
    /// 2x2 window, stride 2.
    MaxPool2d,
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
}

/// A trainable tensor with its gradient and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T: Scalar = f32> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub first_moment: Option<Tensor<T>>,
    pub second_moment: Option<Tensor<T>>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            value,
            grad,
            first_moment: None,
            second_moment: None,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    fn cast<U: Scalar>(&self) -> Parameter<U> {
        Parameter::new(self.value.cast())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T: Scalar = f32> {
    Conv2d { weight: Parameter<T>, bias: Parameter<T> },
    Relu,
    MaxPool2d,
    Dropout { rate: f64 },
    Flatten,
    Dense { weight: Parameter<T>, bias: Parameter<T> },
    Softmax,
}

impl<T: Scalar> Layer<T> {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv2d { weight, .. } => {
                let s = weight.value.shape();
                LayerSpec::Conv2d {
                    filters: s[3],
                    kernel_h: s[0],
                    kernel_w: s[1],
                }
            }
            Layer::Relu => LayerSpec::Relu,
            Layer::MaxPool2d => LayerSpec::MaxPool2d,
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
            Layer::Flatten => LayerSpec::Flatten,
            Layer::Dense { weight, .. } => LayerSpec::Dense {
                units: weight.value.shape()[1],
            },
            Layer::Softmax => LayerSpec::Softmax,
        }
    }

    pub fn params(&self) -> Vec<&Parameter<T>> {
        match self {
            Layer::Conv2d { weight, bias } | Layer::Dense { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        match self {
            Layer::Conv2d { weight, bias } | Layer::Dense { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv2d { weight, bias } => Layer::Conv2d {
                weight: weight.cast(),
                bias: bias.cast(),
            },
            Layer::Dense { weight, bias } => Layer::Dense {
                weight: weight.cast(),
                bias: bias.cast(),
            },
            Layer::Relu => Layer::Relu,
            Layer::MaxPool2d => Layer::MaxPool2d,
            Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
            Layer::Flatten => Layer::Flatten,
            Layer::Softmax => Layer::Softmax,
        }
    }
}

/// Shape produced by `spec` for an input of `shape`.
pub fn output_shape(spec: &LayerSpec, shape: &[usize]) -> Result<Vec<usize>, NnError> {
    let err = |msg: String| Err(NnError::ShapeMismatch(msg));
    match (spec, shape) {
        (
            LayerSpec::Conv2d {
                filters,
                kernel_h,
                kernel_w,
            },
            &[h, w, _],
        ) => {
            if *filters == 0 || *kernel_h == 0 || *kernel_w == 0 {
                return err("conv2d needs positive filters and kernel size".into());
            }
            if h < *kernel_h || w < *kernel_w {
                return err(format!(
                    "conv2d input {h}x{w} smaller than kernel {kernel_h}x{kernel_w}"
                ));
            }
            Ok(vec![h - kernel_h + 1, w - kernel_w + 1, *filters])
        }
        (LayerSpec::MaxPool2d, &[h, w, c]) => {
            if h < 2 || w < 2 {
                return err(format!("maxpool input {h}x{w} is smaller than 2x2"));
            }
            Ok(vec![h / 2, w / 2, c])
        }
        (LayerSpec::Conv2d { .. } | LayerSpec::MaxPool2d, s) => {
            err(format!("{spec:?} needs an [H, W, C] input, got {s:?}"))
        }
        (LayerSpec::Flatten, s) => Ok(vec![s.iter().product()]),
        (LayerSpec::Dense { units }, &[_]) => {
            if *units == 0 {
                return err("dense needs at least one unit".into());
            }
            Ok(vec![*units])
        }
        (LayerSpec::Dense { .. }, s) => err(format!("dense needs a flat input, got {s:?}")),
        (LayerSpec::Dropout { rate }, s) => {
            if !(0.0..1.0).contains(rate) {
                return Err(NnError::InvalidRate(*rate));
            }
            Ok(s.to_vec())
        }
        (LayerSpec::Relu | LayerSpec::Softmax, s) => Ok(s.to_vec()),
    }
}

/// Per-layer state recorded by [`Sequential::forward_trace`] for backprop.
#[derive(Debug, Clone)]
enum Cache<T: Scalar> {
    None,
    Patches(Vec<T>),
    Argmax(Vec<u32>),
    Mask(Option<Vec<T>>),
    Probs(Vec<T>),
}

/// Activations of one forward pass: `inputs[i]` entered layer `i`.
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar> {
    inputs: Vec<Tensor<T>>,
    caches: Vec<Cache<T>>,
    output: Tensor<T>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    /// Fingerprint of every piecewise-linear decision taken during the pass:
    /// ReLU signs and max-pool winners. Two passes with equal fingerprints lie
    /// on the same linear piece of the network.
    pub fn activation_pattern(&self, layers: &[Layer<T>]) -> u64 {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for (i, layer) in layers.iter().enumerate() {
            match (layer, &self.caches[i]) {
                (Layer::Relu, _) => {
                    for (k, v) in self.inputs[i].data().iter().enumerate() {
                        if *v > T::zero() {
                            feed(k as u64);
                        }
                    }
                    feed(u64::MAX);
                }
                (Layer::MaxPool2d, Cache::Argmax(idx)) => {
                    idx.iter().for_each(|&k| feed(k as u64));
                    feed(u64::MAX - 1);
                }
                _ => {}
            }
        }
        h
    }
}

/// An ordered stack of layers over a fixed input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential<T: Scalar = f32> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    /// Builds the stack and initializes its parameters: He-normal for
    /// layers followed by a ReLU, Glorot-uniform otherwise, zero biases.
    pub fn from_specs(input_shape: &[usize], specs: &[LayerSpec], rng: &mut SplitMix64) -> Result<Self, NnError> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let out = output_shape(spec, &shape)?;
            let feeds_relu = matches!(specs.get(i + 1), Some(LayerSpec::Relu));
            let layer = match *spec {
                LayerSpec::Conv2d {
                    filters,
                    kernel_h,
                    kernel_w,
                } => {
                    let fan_in = kernel_h * kernel_w * shape[2];
                    let wshape = [kernel_h, kernel_w, shape[2], filters];
                    Layer::Conv2d {
                        weight: Parameter::new(super::init::init_weight(&wshape, fan_in, filters, feeds_relu, rng)),
                        bias: Parameter::new(Tensor::zeros(&[filters])),
                    }
                }
                LayerSpec::Dense { units } => {
                    let wshape = [shape[0], units];
                    Layer::Dense {
                        weight: Parameter::new(super::init::init_weight(&wshape, shape[0], units, feeds_relu, rng)),
                        bias: Parameter::new(Tensor::zeros(&[units])),
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool2d => Layer::MaxPool2d,
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Softmax => Layer::Softmax,
            };
            layers.push(layer);
            shape = out;
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
        })
    }

    /// Assembles a stack from existing layers, checking that shapes chain.
    pub fn from_layers(input_shape: &[usize], layers: Vec<Layer<T>>) -> Result<Self, NnError> {
        let net = Self {
            input_shape: input_shape.to_vec(),
            layers,
        };
        net.check_param_shapes()?;
        Ok(net)
    }

    fn check_param_shapes(&self) -> Result<(), NnError> {
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            let next = output_shape(&layer.spec(), &shape)?;
            match layer {
                Layer::Conv2d { weight, bias } => {
                    let s = weight.value.shape();
                    if s.len() != 4 || s[2] != shape[2] || bias.value.shape() != [s[3]] {
                        return Err(NnError::ShapeMismatch(format!(
                            "conv2d parameters {s:?} do not fit input {shape:?}"
                        )));
                    }
                }
                Layer::Dense { weight, bias } => {
                    let s = weight.value.shape();
                    if s.len() != 2 || s[0] != shape[0] || bias.value.shape() != [s[1]] {
                        return Err(NnError::ShapeMismatch(format!(
                            "dense parameters {s:?} do not fit input {shape:?}"
                        )));
                    }
                }
                _ => {}
            }
            shape = next;
        }
        Ok(())
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Shapes after every layer, starting with the input shape.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = output_shape(&layer.spec(), shapes.last().unwrap()).expect("validated at construction");
            shapes.push(next);
        }
        shapes
    }

    pub fn output_len(&self) -> usize {
        self.shapes().last().unwrap().iter().product()
    }

    /// Parameters in layer order, weight before bias.
    pub fn params(&self) -> Vec<&Parameter<T>> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Zero-filled buffers matching [`Self::params`].
    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params().iter().map(|p| Tensor::zeros(p.value.shape())).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        Sequential {
            input_shape: self.input_shape.clone(),
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(NnError::ShapeMismatch(format!(
                "network expects input {:?}, got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        if !x.all_finite() {
            return Err(NnError::NonFinite("network input"));
        }
        Ok(())
    }

    fn trailing_softmax(&self) -> bool {
        matches!(self.layers.last(), Some(Layer::Softmax))
    }

    /// Runs layers `0..end`, recording what backprop needs.
    fn run(&self, x: &Tensor<T>, end: usize, mode: Mode, rng: &mut SplitMix64) -> Result<Trace<T>, NnError> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(end);
        let mut caches = Vec::with_capacity(end);
        let mut cur = x.clone();
        for layer in &self.layers[..end] {
            let (next, cache) = match layer {
                Layer::Conv2d { weight, bias } => {
                    let (out, patches) = conv2d_forward_cached(&cur, &weight.value, &bias.value)?;
                    (out, Cache::Patches(patches))
                }
                Layer::Relu => (layers::relu_forward(&cur), Cache::None),
                Layer::MaxPool2d => {
                    let (out, argmax) = layers::maxpool2d_forward(&cur)?;
                    (out, Cache::Argmax(argmax))
                }
                Layer::Dropout { rate } => {
                    let (out, mask) = layers::dropout_forward(&cur, *rate, mode, rng)?;
                    (out, Cache::Mask(mask))
                }
                Layer::Flatten => (layers::flatten(&cur), Cache::None),
                Layer::Dense { weight, bias } => {
                    (layers::dense_forward(&cur, &weight.value, &bias.value)?, Cache::None)
                }
                Layer::Softmax => {
                    let probs = layers::softmax(cur.data());
                    let out = Tensor::new(cur.shape().to_vec(), probs.clone())?;
                    (out, Cache::Probs(probs))
                }
            };
            inputs.push(std::mem::replace(&mut cur, next));
            caches.push(cache);
        }
        if !cur.all_finite() {
            return Err(NnError::NonFinite("network output"));
        }
        Ok(Trace {
            inputs,
            caches,
            output: cur,
        })
    }

    /// Full forward pass with caches for [`Self::backward`].
    pub fn forward_trace(&self, x: &Tensor<T>, mode: Mode, rng: &mut SplitMix64) -> Result<Trace<T>, NnError> {
        self.run(x, self.layers.len(), mode, rng)
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode, rng: &mut SplitMix64) -> Result<Tensor<T>, NnError> {
        Ok(self.forward_trace(x, mode, rng)?.output)
    }

    /// Deterministic inference pass (dropout disabled).
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        // Eval never draws from the generator
        self.forward(x, Mode::Eval, &mut SplitMix64::new(0))
    }

    /// Backpropagates `grad_out` through the traced layers, adding parameter
    /// gradients into `grads` (ordered as [`Self::params`]). Returns the
    /// gradient with respect to the network input when requested.
    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad_out: &Tensor<T>,
        grads: &mut [Tensor<T>],
        need_input_grad: bool,
    ) -> Result<Option<Tensor<T>>, NnError> {
        let end = trace.inputs.len();
        let n_params: usize = self.layers[..end].iter().map(|l| l.params().len()).sum();
        if grads.len() < n_params {
            return Err(NnError::ShapeMismatch("too few gradient buffers".into()));
        }
        let mut slot = n_params;
        let mut g = grad_out.clone();
        for i in (0..end).rev() {
            let input = &trace.inputs[i];
            let want_input = need_input_grad || i > 0;
            g = match (&self.layers[i], &trace.caches[i]) {
                (Layer::Conv2d { weight, .. }, Cache::Patches(patches)) => {
                    slot -= 2;
                    let (gw, gb) = split_pair(grads, slot);
                    let d = layers::conv_dims(input, &weight.value, None)?;
                    match layers::conv2d_backward_cached(
                        &d,
                        patches,
                        input.shape(),
                        &weight.value,
                        &g,
                        gw,
                        gb,
                        want_input,
                    )? {
                        Some(gi) => gi,
                        None => return Ok(None),
                    }
                }
                (Layer::Dense { weight, .. }, _) => {
                    slot -= 2;
                    let (gw, gb) = split_pair(grads, slot);
                    match layers::dense_backward(input, &weight.value, &g, gw, gb, want_input)? {
                        Some(gi) => gi,
                        None => return Ok(None),
                    }
                }
                (Layer::Relu, _) => layers::relu_backward(input, &g),
                (Layer::MaxPool2d, Cache::Argmax(argmax)) => layers::maxpool2d_backward(input.shape(), argmax, &g),
                (Layer::Dropout { .. }, Cache::Mask(mask)) => layers::dropout_backward(mask.as_deref(), &g),
                (Layer::Flatten, _) => layers::unflatten(&g, input.shape())?,
                (Layer::Softmax, Cache::Probs(probs)) => {
                    Tensor::new(g.shape().to_vec(), layers::softmax_backward(probs, g.data()))?
                }
                _ => unreachable!("cache kind always matches its layer"),
            };
        }
        Ok(Some(g))
    }

    /// Cross-entropy loss of one example and its gradient.
    ///
    /// A trailing softmax layer is fused with the loss, so backprop starts
    /// from `probs - one_hot(label)` at the logits. Returns the loss, the
    /// probabilities and, if requested, the input gradient.
    #[allow(clippy::type_complexity)]
    pub fn loss_and_grad(
        &self,
        x: &Tensor<T>,
        label: usize,
        mode: Mode,
        rng: &mut SplitMix64,
        grads: &mut [Tensor<T>],
        need_input_grad: bool,
    ) -> Result<(T, Vec<T>, Option<Tensor<T>>), NnError> {
        let end = if self.trailing_softmax() {
            self.layers.len() - 1
        } else {
            self.layers.len()
        };
        let trace = self.run(x, end, mode, rng)?;
        let (probs, loss) = layers::softmax_xent(trace.output.data(), label)?;
        let dlogits = Tensor::new(trace.output.shape().to_vec(), layers::softmax_xent_grad(&probs, label))?;
        let input_grad = self.backward(&trace, &dlogits, grads, need_input_grad)?;
        Ok((loss, probs, input_grad))
    }

    /// Cross-entropy loss and activation fingerprint without gradients.
    pub fn loss(&self, x: &Tensor<T>, label: usize, mode: Mode, rng: &mut SplitMix64) -> Result<(T, u64), NnError> {
        let end = if self.trailing_softmax() {
            self.layers.len() - 1
        } else {
            self.layers.len()
        };
        let trace = self.run(x, end, mode, rng)?;
        let (_, loss) = layers::softmax_xent(trace.output.data(), label)?;
        Ok((loss, trace.activation_pattern(&self.layers[..end])))
    }
    /// Eval-mode cross-entropy and class probabilities of one example.
    pub fn eval_loss(&self, x: &Tensor<T>, label: usize) -> Result<(T, Vec<T>), NnError> {
        let end = if self.trailing_softmax() {
            self.layers.len() - 1
        } else {
            self.layers.len()
        };
        let trace = self.run(x, end, Mode::Eval, &mut SplitMix64::new(0))?;
        let (probs, loss) = layers::softmax_xent(trace.output.data(), label)?;
        Ok((loss, probs))
    }
}

fn split_pair<T: Scalar>(grads: &mut [Tensor<T>], at: usize) -> (&mut Tensor<T>, &mut Tensor<T>) {
    let (a, b) = grads[at..].split_at_mut(1);
    (&mut a[0], &mut b[0])
}
