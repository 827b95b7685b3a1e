use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{
    conv_backward, conv_forward, dense_forward, fill_dropout, lstm_backward, lstm_forward,
    softmax_rows, ConvGeom, LstmCache, LstmParams, LOG_CLAMP,
};
use super::{check_finite, matmul, Mode, Scalar, Tensor};
use crate::error::{AmcError, Result};

/// One entry of a layer stack. Shapes below are per sample (no batch axis).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `[n] -> [units]`
    Dense { units: usize },
    /// `[C, H, W] -> [maps, H - kh + 1, W - kw + 1]`
    Conv2d {
        feature_maps: usize,
        kernel_h: usize,
        kernel_w: usize,
    },
    /// `[T, F] -> [T, units]`, full hidden sequence.
    Lstm { units: usize },
    Relu,
    Dropout { rate: f64 },
    /// Last axis; must close the stack for training.
    Softmax,
    /// Any shape to `[n]`.
    Flatten,
    /// `[len, 2] -> [1, 2, len]`: IQ frame as a one-channel 2-row image.
    FrameToImage,
    /// `[C, H, W] -> [W, C * H]`: feature maps as a sequence along width.
    MapsToSequence,
    /// `[T, U] -> [U]`
    LastStep,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Flatten => "flatten",
            LayerSpec::FrameToImage => "frame_to_image",
            LayerSpec::MapsToSequence => "maps_to_sequence",
            LayerSpec::LastStep => "last_step",
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: &str| {
            Err(AmcError::Shape(format!(
                "{} layer {what}, got input {input:?}",
                self.kind()
            )))
        };
        match *self {
            LayerSpec::Dense { units } => match input {
                [_] if units > 0 => Ok(vec![units]),
                _ => bad("needs a flat input and positive units"),
            },
            LayerSpec::Conv2d {
                feature_maps,
                kernel_h,
                kernel_w,
            } => {
                let g = ConvGeom::new(input, feature_maps, kernel_h, kernel_w)?;
                Ok(vec![feature_maps, g.out_h(), g.out_w()])
            }
            LayerSpec::Lstm { units } => match input {
                [t, _] if *t > 0 && units > 0 => Ok(vec![*t, units]),
                _ => bad("needs a [steps, features] input"),
            },
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                Err(AmcError::Config(format!("dropout rate must be in [0, 1), got {rate}")))
            }
            LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
            LayerSpec::Softmax => match input {
                [c] if *c > 0 => Ok(input.to_vec()),
                _ => bad("needs a flat input"),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::FrameToImage => match input {
                [len, 2] => Ok(vec![1, 2, *len]),
                _ => bad("needs a [len, 2] frame"),
            },
            LayerSpec::MapsToSequence => match input {
                [c, h, w] => Ok(vec![*w, c * h]),
                _ => bad("needs a [maps, height, width] input"),
            },
            LayerSpec::LastStep => match input {
                [t, u] if *t > 0 => Ok(vec![*u]),
                _ => bad("needs a [steps, units] input"),
            },
        }
    }
}

/// A layer with its parameters. Built from a [`LayerSpec`] by [`Network`].
#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Dense {
        fan_in: usize,
        /// `units x fan_in`
        weights: Vec<T>,
        bias: Vec<T>,
    },
    Conv2d {
        geom: ConvGeom,
        /// `maps x C_in x kh x kw`
        weights: Vec<T>,
        bias: Vec<T>,
    },
    Lstm {
        steps: usize,
        params: LstmParams<T>,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Softmax,
    Flatten,
    FrameToImage {
        len: usize,
    },
    MapsToSequence {
        maps: usize,
        height: usize,
        width: usize,
    },
    LastStep {
        steps: usize,
        units: usize,
    },
}

impl<T: Scalar> Layer<T> {
    fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Dense { weights, bias, .. } | Layer::Conv2d { weights, bias, .. } => {
                vec![weights, bias]
            }
            Layer::Lstm { params, .. } => vec![&params.w_ih, &params.w_hh, &params.bias],
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Layer::Dense { weights, bias, .. } | Layer::Conv2d { weights, bias, .. } => {
                vec![weights, bias]
            }
            Layer::Lstm { params, .. } => {
                vec![&mut params.w_ih, &mut params.w_hh, &mut params.bias]
            }
            _ => Vec::new(),
        }
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::from_f64(x.to_f64())).collect::<Vec<U>>();
        match self {
            Layer::Dense {
                fan_in,
                weights,
                bias,
            } => Layer::Dense {
                fan_in: *fan_in,
                weights: conv(weights),
                bias: conv(bias),
            },
            Layer::Conv2d {
                geom,
                weights,
                bias,
            } => Layer::Conv2d {
                geom: *geom,
                weights: conv(weights),
                bias: conv(bias),
            },
            Layer::Lstm { steps, params } => Layer::Lstm {
                steps: *steps,
                params: LstmParams {
                    input: params.input,
                    units: params.units,
                    w_ih: conv(&params.w_ih),
                    w_hh: conv(&params.w_hh),
                    bias: conv(&params.bias),
                },
            },
            Layer::Relu => Layer::Relu,
            Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
            Layer::Softmax => Layer::Softmax,
            Layer::Flatten => Layer::Flatten,
            Layer::FrameToImage { len } => Layer::FrameToImage { len: *len },
            Layer::MapsToSequence {
                maps,
                height,
                width,
            } => Layer::MapsToSequence {
                maps: *maps,
                height: *height,
                width: *width,
            },
            Layer::LastStep { steps, units } => Layer::LastStep {
                steps: *steps,
                units: *units,
            },
        }
    }
}

enum Cache<T> {
    Input(Vec<T>),
    Lstm(LstmCache<T>),
    Output(Vec<T>),
    Mask(Vec<T>),
    Empty,
}

/// Which gradients [`Network::backprop`] should produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradRequest {
    pub params: bool,
    pub input: bool,
}

impl GradRequest {
    pub const ALL: GradRequest = GradRequest {
        params: true,
        input: true,
    };
    pub const PARAMS: GradRequest = GradRequest {
        params: true,
        input: false,
    };
    pub const INPUT: GradRequest = GradRequest {
        params: false,
        input: true,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LossSeed {
    /// Gradient of the mean cross-entropy.
    Mean,
    /// Per-sample cross-entropy gradient at the logits rescaled to unit
    /// length; same input-gradient direction, no underflow for confident
    /// predictions.
    UnitPerSample,
}

#[derive(Clone, Debug)]
pub struct Backprop<T> {
    /// Mean cross-entropy of the batch.
    pub loss: f64,
    /// Softmax output, `batch x classes`.
    pub probabilities: Vec<T>,
    /// One buffer per parameter tensor, in [`Network::params`] order. Empty
    /// when parameter gradients were not requested.
    pub param_grads: Vec<Vec<T>>,
    pub input_grad: Option<Tensor<T>>,
}

/// A feed-forward stack of layers closed by a softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    specs: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    /// Builds the stack and draws initial parameters from `seed`: fan-in
    /// scaled uniform `±sqrt(6 / fan_in)` for dense and conv weights, uniform
    /// `±1/sqrt(units)` for LSTM weights, zero biases except a forget-gate
    /// bias of one.
    pub fn from_specs(specs: &[LayerSpec], input_shape: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, bound: f64| -> Vec<T> {
            (0..n)
                .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                .collect()
        };
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let next = spec.output_shape(&shape)?;
            let layer = match *spec {
                LayerSpec::Dense { units } => {
                    let fan_in = shape[0];
                    Layer::Dense {
                        fan_in,
                        weights: uniform(units * fan_in, (6.0 / fan_in as f64).sqrt()),
                        bias: vec![T::zero(); units],
                    }
                }
                LayerSpec::Conv2d {
                    feature_maps,
                    kernel_h,
                    kernel_w,
                } => {
                    let geom = ConvGeom::new(&shape, feature_maps, kernel_h, kernel_w)?;
                    Layer::Conv2d {
                        geom,
                        weights: uniform(feature_maps * geom.k(), (6.0 / geom.k() as f64).sqrt()),
                        bias: vec![T::zero(); feature_maps],
                    }
                }
                LayerSpec::Lstm { units } => {
                    let (steps, input) = (shape[0], shape[1]);
                    let bound = 1.0 / (units as f64).sqrt();
                    let mut bias = vec![T::zero(); 4 * units];
                    bias[units..2 * units].fill(T::one());
                    Layer::Lstm {
                        steps,
                        params: LstmParams {
                            input,
                            units,
                            w_ih: uniform(4 * units * input, bound),
                            w_hh: uniform(4 * units * units, bound),
                            bias,
                        },
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
                LayerSpec::Softmax => Layer::Softmax,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::FrameToImage => Layer::FrameToImage { len: shape[0] },
                LayerSpec::MapsToSequence => Layer::MapsToSequence {
                    maps: shape[0],
                    height: shape[1],
                    width: shape[2],
                },
                LayerSpec::LastStep => Layer::LastStep {
                    steps: shape[0],
                    units: shape[1],
                },
            };
            layers.push(layer);
            shape = next;
        }
        if specs.last() != Some(&LayerSpec::Softmax) {
            return Err(AmcError::Config("layer stack must end with softmax".into()));
        }
        Ok(Network {
            specs: specs.to_vec(),
            input_shape: input_shape.to_vec(),
            layers,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample output shape of every layer.
    pub fn layer_shapes(&self) -> Vec<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        self.specs
            .iter()
            .map(|s| {
                shape = s.output_shape(&shape).expect("validated at construction");
                shape.clone()
            })
            .collect()
    }

    pub fn classes(&self) -> usize {
        self.layer_shapes().last().map(|s| s[0]).unwrap_or(0)
    }

    /// Parameter tensors in checkpoint order: per layer, dense/conv
    /// `weights, bias`; LSTM `w_ih, w_hh, bias`.
    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.params().concat()
    }

    pub fn set_flat_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(AmcError::Shape(format!(
                "network has {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&values[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            specs: self.specs.clone(),
            input_shape: self.input_shape.clone(),
            layers: self.layers.iter().map(|l| l.cast()).collect(),
        }
    }

    fn batch_of(&self, input: &Tensor<T>) -> Result<usize> {
        let shape = input.shape();
        let batch = if shape == self.input_shape.as_slice() {
            1
        } else if shape.len() == self.input_shape.len() + 1 && shape[1..] == self.input_shape[..] {
            shape[0]
        } else {
            return Err(AmcError::Shape(format!(
                "network expects [batch, {:?}], got {shape:?}",
                self.input_shape
            )));
        };
        if batch == 0 {
            return Err(AmcError::Input("empty batch".into()));
        }
        Ok(batch)
    }

    /// Eval-mode class probabilities, `batch x classes`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let batch = self.batch_of(input)?;
        let (out, _) = self.run_forward(input.data(), batch, Mode::Eval, None, false)?;
        Tensor::new(vec![batch, self.classes()], out)
    }

    fn run_forward(
        &self,
        input: &[T],
        batch: usize,
        mode: Mode,
        mut rng: Option<&mut dyn RngCore>,
        keep: bool,
    ) -> Result<(Vec<T>, Vec<Cache<T>>)> {
        check_finite(input, "input")?;
        let mut x = input.to_vec();
        let mut caches = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        for (idx, layer) in self.layers.iter().enumerate() {
            let (y, cache) = match layer {
                Layer::Dense {
                    fan_in,
                    weights,
                    bias,
                } => {
                    let mut y = vec![T::zero(); batch * bias.len()];
                    dense_forward(&x, batch, *fan_in, weights, bias, &mut y);
                    (y, Cache::Input(x))
                }
                Layer::Conv2d {
                    geom,
                    weights,
                    bias,
                } => (conv_forward(&x, batch, geom, weights, bias), Cache::Input(x)),
                Layer::Lstm { steps, params } => {
                    let (y, c) = lstm_forward(&x, batch, *steps, params);
                    (y, Cache::Lstm(c))
                }
                Layer::Relu => {
                    for v in x.iter_mut() {
                        *v = v.max(T::zero());
                    }
                    let cache = if keep { Cache::Output(x.clone()) } else { Cache::Empty };
                    (x, cache)
                }
                Layer::Dropout { rate } => {
                    if mode == Mode::Train && *rate > 0.0 {
                        let rng = rng.as_deref_mut().ok_or_else(|| {
                            AmcError::Config("training mode needs a random source".into())
                        })?;
                        let mut mask = vec![T::zero(); x.len()];
                        fill_dropout(&mut mask, *rate, rng);
                        for (v, &m) in x.iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        (x, Cache::Mask(mask))
                    } else {
                        (x, Cache::Empty)
                    }
                }
                Layer::Softmax => {
                    let classes = x.len() / batch;
                    let mut p = vec![T::zero(); x.len()];
                    softmax_rows(&x, classes, &mut p);
                    let cache = if keep { Cache::Output(p.clone()) } else { Cache::Empty };
                    (p, cache)
                }
                Layer::Flatten => (x, Cache::Empty),
                Layer::FrameToImage { len } => (frame_to_image(&x, *len), Cache::Empty),
                Layer::MapsToSequence {
                    maps,
                    height,
                    width,
                } => (maps_to_sequence(&x, *maps * *height, *width), Cache::Empty),
                Layer::LastStep { steps, units } => {
                    let y = x
                        .chunks_exact(steps * units)
                        .flat_map(|s| s[(steps - 1) * units..].iter().copied())
                        .collect();
                    (y, Cache::Empty)
                }
            };
            check_finite(&y, &layer_name(idx, &self.specs[idx]))?;
            if keep {
                caches.push(cache);
            }
            x = y;
        }
        Ok((x, caches))
    }

    /// Mean cross-entropy and its gradients for a labeled batch.
    pub fn backprop(
        &self,
        input: &Tensor<T>,
        labels: &[usize],
        mode: Mode,
        rng: Option<&mut dyn RngCore>,
        request: GradRequest,
    ) -> Result<Backprop<T>> {
        self.backprop_seeded(input, labels, mode, rng, request, LossSeed::Mean)
    }

    /// Eval-mode input gradients with each sample's gradient direction
    /// preserved but its scale unspecified. Only the direction is meaningful.
    pub fn input_gradient_directions(
        &self,
        input: &Tensor<T>,
        labels: &[usize],
    ) -> Result<Backprop<T>> {
        self.backprop_seeded(
            input,
            labels,
            Mode::Eval,
            None,
            GradRequest::INPUT,
            LossSeed::UnitPerSample,
        )
    }

    fn backprop_seeded(
        &self,
        input: &Tensor<T>,
        labels: &[usize],
        mode: Mode,
        rng: Option<&mut dyn RngCore>,
        request: GradRequest,
        seed: LossSeed,
    ) -> Result<Backprop<T>> {
        let batch = self.batch_of(input)?;
        if labels.len() != batch {
            return Err(AmcError::Shape(format!(
                "{} labels for a batch of {batch}",
                labels.len()
            )));
        }
        let classes = self.classes();
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(AmcError::Input(format!("label {bad} out of range for {classes} classes")));
        }
        let (probs, caches) = self.run_forward(input.data(), batch, mode, rng, true)?;

        let mut loss = 0.0;
        let mut dy = vec![T::zero(); probs.len()];
        let scale = T::from_f64(1.0 / batch as f64);
        for ((p, d), &y) in probs
            .chunks_exact(classes)
            .zip(dy.chunks_exact_mut(classes))
            .zip(labels)
        {
            loss -= p[y].to_f64().max(LOG_CLAMP).ln();
            if p[y].to_f64() < LOG_CLAMP {
                continue;
            }
            // d(-log p_y)/dz = p - onehot(y); the true-class entry is summed
            // from the others to avoid cancellation when p_y rounds to one.
            let mut rest = T::zero();
            for (j, (dj, &pj)) in d.iter_mut().zip(p).enumerate() {
                if j != y {
                    *dj = pj;
                    rest += pj;
                }
            }
            d[y] = -rest;
            match seed {
                LossSeed::Mean => d.iter_mut().for_each(|v| *v *= scale),
                LossSeed::UnitPerSample => {
                    let norm = d.iter().map(|&v| v * v).sum::<T>().sqrt();
                    if norm > T::zero() {
                        d.iter_mut().for_each(|v| *v = *v / norm);
                    }
                }
            }
        }
        loss /= batch as f64;

        let mut param_grads: Vec<Vec<T>> = if request.params {
            self.params().iter().map(|p| vec![T::zero(); p.len()]).collect()
        } else {
            Vec::new()
        };
        let mut grad_slot = param_grads.len();
        let last = self.layers.len() - 1;
        let mut input_grad = None;
        for idx in (0..last).rev() {
            let layer = &self.layers[idx];
            let need_dx = idx > 0 || request.input;
            let n_params = layer.params().len();
            if request.params {
                grad_slot -= n_params;
            }
            let tail = &mut param_grads[grad_slot..];
            let dx = match (layer, &caches[idx]) {
                (
                    Layer::Dense {
                        fan_in,
                        weights,
                        bias,
                    },
                    Cache::Input(x),
                ) => {
                    let out = bias.len();
                    if request.params {
                        let (dw, rest) = tail.split_at_mut(1);
                        matmul(true, false, out, batch, *fan_in, &dy, x, &mut dw[0], true);
                        for row in dy.chunks_exact(out) {
                            for (acc, &v) in rest[0].iter_mut().zip(row) {
                                *acc += v;
                            }
                        }
                    }
                    need_dx.then(|| {
                        let mut dx = vec![T::zero(); batch * fan_in];
                        matmul(false, false, batch, out, *fan_in, &dy, weights, &mut dx, false);
                        dx
                    })
                }
                (Layer::Conv2d { geom, weights, .. }, Cache::Input(x)) => {
                    let dparams = if request.params {
                        let (dw, rest) = tail.split_at_mut(1);
                        Some((&mut dw[0][..], &mut rest[0][..]))
                    } else {
                        None
                    };
                    conv_backward(x, &dy, batch, geom, weights, dparams, need_dx)
                }
                (Layer::Lstm { params, .. }, Cache::Lstm(cache)) => {
                    let dparams = if request.params {
                        let (a, rest) = tail.split_at_mut(1);
                        let (b, c) = rest.split_at_mut(1);
                        Some((&mut a[0][..], &mut b[0][..], &mut c[0][..]))
                    } else {
                        None
                    };
                    lstm_backward(cache, &dy, params, dparams, need_dx)
                }
                (Layer::Relu, Cache::Output(y)) => {
                    for (d, &v) in dy.iter_mut().zip(y) {
                        if v <= T::zero() {
                            *d = T::zero();
                        }
                    }
                    Some(std::mem::take(&mut dy))
                }
                (Layer::Dropout { .. }, Cache::Mask(mask)) => {
                    for (d, &m) in dy.iter_mut().zip(mask) {
                        *d *= m;
                    }
                    Some(std::mem::take(&mut dy))
                }
                (Layer::Dropout { .. }, Cache::Empty) | (Layer::Flatten, _) => {
                    Some(std::mem::take(&mut dy))
                }
                (Layer::Softmax, Cache::Output(p)) => {
                    let classes = p.len() / batch;
                    for (d, pr) in dy.chunks_exact_mut(classes).zip(p.chunks_exact(classes)) {
                        let dot: T = d.iter().zip(pr).map(|(&a, &b)| a * b).sum();
                        for (dj, &pj) in d.iter_mut().zip(pr) {
                            *dj = pj * (*dj - dot);
                        }
                    }
                    Some(std::mem::take(&mut dy))
                }
                (Layer::FrameToImage { len }, _) => Some(image_to_frame(&dy, *len)),
                (
                    Layer::MapsToSequence {
                        maps,
                        height,
                        width,
                    },
                    _,
                ) => Some(sequence_to_maps(&dy, maps * height, *width)),
                (Layer::LastStep { steps, units }, _) => {
                    let mut dx = vec![T::zero(); batch * steps * units];
                    for (dst, src) in dx.chunks_exact_mut(steps * units).zip(dy.chunks_exact(*units)) {
                        dst[(steps - 1) * units..].copy_from_slice(src);
                    }
                    Some(dx)
                }
                _ => {
                    return Err(AmcError::Internal(format!(
                        "missing activation cache for {}",
                        layer_name(idx, &self.specs[idx])
                    )))
                }
            };
            match dx {
                Some(dx) => {
                    check_finite(&dx, &format!("gradient of {}", layer_name(idx, &self.specs[idx])))?;
                    if idx == 0 {
                        input_grad = Some(Tensor::new(input.shape().to_vec(), dx)?);
                    } else {
                        dy = dx;
                    }
                }
                None => break,
            }
        }
        for g in &param_grads {
            check_finite(g, "parameter gradients")?;
        }
        Ok(Backprop {
            loss,
            probabilities: probs,
            param_grads,
            input_grad,
        })
    }
}

fn layer_name(idx: usize, spec: &LayerSpec) -> String {
    format!("layer {idx} ({})", spec.kind())
}

/// `[B, len, 2] -> [B, 1, 2, len]`
fn frame_to_image<T: Scalar>(x: &[T], len: usize) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for (src, dst) in x.chunks_exact(2 * len).zip(y.chunks_exact_mut(2 * len)) {
        for k in 0..len {
            dst[k] = src[2 * k];
            dst[len + k] = src[2 * k + 1];
        }
    }
    y
}

fn image_to_frame<T: Scalar>(y: &[T], len: usize) -> Vec<T> {
    let mut x = vec![T::zero(); y.len()];
    for (src, dst) in y.chunks_exact(2 * len).zip(x.chunks_exact_mut(2 * len)) {
        for k in 0..len {
            dst[2 * k] = src[k];
            dst[2 * k + 1] = src[len + k];
        }
    }
    x
}

/// `[B, F, W] -> [B, W, F]` where `F = maps * height`.
fn maps_to_sequence<T: Scalar>(x: &[T], features: usize, width: usize) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for (src, dst) in x.chunks_exact(features * width).zip(y.chunks_exact_mut(features * width)) {
        for f in 0..features {
            for w in 0..width {
                dst[w * features + f] = src[f * width + w];
            }
        }
    }
    y
}

fn sequence_to_maps<T: Scalar>(y: &[T], features: usize, width: usize) -> Vec<T> {
    let mut x = vec![T::zero(); y.len()];
    for (src, dst) in y.chunks_exact(features * width).zip(x.chunks_exact_mut(features * width)) {
        for f in 0..features {
            for w in 0..width {
                dst[f * width + w] = src[w * features + f];
            }
        }
    }
    x
}
