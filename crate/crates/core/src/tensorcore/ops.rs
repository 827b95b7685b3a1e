use rand::{Rng, RngCore};

use super::{check_finite, matmul, Mode, Scalar, Tensor};
use crate::error::{AmcError, Result};

/// Floor applied to the true-class probability inside the loss.
pub const LOG_CLAMP: f64 = 1e-12;

/// Affine map `y = W a + b` over the last axis; `weights` is `out x in`.
pub fn dense_apply<T: Scalar>(input: &Tensor<T>, weights: &[T], bias: &[T]) -> Result<Tensor<T>> {
    let out = bias.len();
    let fan_in = input.shape().last().copied().unwrap_or(0);
    if out == 0 || weights.len() != out * fan_in {
        return Err(AmcError::Shape(format!(
            "dense weights hold {} values, expected {out} x {fan_in}",
            weights.len()
        )));
    }
    let rows = input.len() / fan_in.max(1);
    let mut y = vec![T::zero(); rows * out];
    dense_forward(input.data(), rows, fan_in, weights, bias, &mut y);
    let mut shape = input.shape().to_vec();
    *shape.last_mut().expect("non-empty shape") = out;
    Tensor::new(shape, y)
}

pub(crate) fn dense_forward<T: Scalar>(
    x: &[T],
    rows: usize,
    fan_in: usize,
    weights: &[T],
    bias: &[T],
    y: &mut [T],
) {
    let out = bias.len();
    for row in y.chunks_exact_mut(out) {
        row.copy_from_slice(bias);
    }
    matmul(false, true, rows, fan_in, out, x, weights, y, true);
}

/// Geometry of a valid-padding, stride-1 cross-correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvGeom {
    pub fn new(input: &[usize], c_out: usize, kh: usize, kw: usize) -> Result<Self> {
        let [c_in, h, w] = input else {
            return Err(AmcError::Shape(format!(
                "conv2d expects a [channels, height, width] input, got {input:?}"
            )));
        };
        if kh == 0 || kw == 0 || c_out == 0 {
            return Err(AmcError::Shape("conv2d kernel and map counts must be positive".into()));
        }
        if kh > *h || kw > *w {
            return Err(AmcError::Shape(format!(
                "{kh}x{kw} kernel does not fit a {h}x{w} input"
            )));
        }
        Ok(ConvGeom {
            c_in: *c_in,
            h: *h,
            w: *w,
            c_out,
            kh,
            kw,
        })
    }

    pub fn out_h(&self) -> usize {
        self.h - self.kh + 1
    }

    pub fn out_w(&self) -> usize {
        self.w - self.kw + 1
    }

    /// Patch length.
    pub fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    /// Output positions per map.
    pub fn p(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn in_len(&self) -> usize {
        self.c_in * self.h * self.w
    }

    pub fn out_len(&self) -> usize {
        self.c_out * self.p()
    }
}

pub(crate) fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let (oh, ow, p) = (g.out_h(), g.out_w(), g.p());
    for c in 0..g.c_in {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * p;
                for oy in 0..oh {
                    let src = (c * g.h + oy + i) * g.w + j;
                    cols[row + oy * ow..row + (oy + 1) * ow].copy_from_slice(&x[src..src + ow]);
                }
            }
        }
    }
}

pub(crate) fn col2im_add<T: Scalar>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let (oh, ow, p) = (g.out_h(), g.out_w(), g.p());
    for c in 0..g.c_in {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * p;
                for oy in 0..oh {
                    let dst = (c * g.h + oy + i) * g.w + j;
                    for (d, &s) in dx[dst..dst + ow]
                        .iter_mut()
                        .zip(&cols[row + oy * ow..row + (oy + 1) * ow])
                    {
                        *d += s;
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    g: &ConvGeom,
    weights: &[T],
    bias: &[T],
) -> Vec<T> {
    let (k, p) = (g.k(), g.p());
    let mut cols = vec![T::zero(); k * p];
    let mut y = vec![T::zero(); batch * g.out_len()];
    for (xb, yb) in x.chunks_exact(g.in_len()).zip(y.chunks_exact_mut(g.out_len())) {
        im2col(xb, g, &mut cols);
        for (map, &b) in yb.chunks_exact_mut(p).zip(bias) {
            map.fill(b);
        }
        matmul(false, false, g.c_out, k, p, weights, &cols, yb, true);
    }
    debug_assert_eq!(x.len(), batch * g.in_len());
    y
}

/// Accumulates kernel/bias gradients and optionally returns the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    batch: usize,
    g: &ConvGeom,
    weights: &[T],
    mut dparams: Option<(&mut [T], &mut [T])>,
    need_dx: bool,
) -> Option<Vec<T>> {
    let (k, p) = (g.k(), g.p());
    let mut cols = vec![T::zero(); k * p];
    let mut dcols = vec![T::zero(); k * p];
    let mut dx = need_dx.then(|| vec![T::zero(); batch * g.in_len()]);
    for b in 0..batch {
        let xb = &x[b * g.in_len()..(b + 1) * g.in_len()];
        let dyb = &dy[b * g.out_len()..(b + 1) * g.out_len()];
        if let Some((dw, db)) = dparams.as_mut() {
            im2col(xb, g, &mut cols);
            matmul(false, true, g.c_out, p, k, dyb, &cols, dw, true);
            for (acc, map) in db.iter_mut().zip(dyb.chunks_exact(p)) {
                *acc += map.iter().copied().sum::<T>();
            }
        }
        if let Some(dx) = dx.as_mut() {
            matmul(true, false, k, g.c_out, p, weights, dyb, &mut dcols, false);
            col2im_add(&dcols, g, &mut dx[b * g.in_len()..(b + 1) * g.in_len()]);
        }
    }
    dx
}

/// Valid-padding, stride-1 cross-correlation of a `[C_in, H, W]` (or batched
/// `[B, C_in, H, W]`) input with `C_out x C_in x kh x kw` kernels.
pub fn conv2d_apply<T: Scalar>(
    input: &Tensor<T>,
    kernels: &[T],
    bias: &[T],
    kernel_h: usize,
    kernel_w: usize,
) -> Result<Tensor<T>> {
    let (batch, sample) = match input.shape() {
        [c, h, w] => (1, vec![*c, *h, *w]),
        [b, c, h, w] => (*b, vec![*c, *h, *w]),
        other => {
            return Err(AmcError::Shape(format!(
                "conv2d expects a rank-3 or rank-4 input, got {other:?}"
            )))
        }
    };
    let g = ConvGeom::new(&sample, bias.len(), kernel_h, kernel_w)?;
    if kernels.len() != g.c_out * g.k() {
        return Err(AmcError::Shape(format!(
            "conv2d kernels hold {} values, expected {}",
            kernels.len(),
            g.c_out * g.k()
        )));
    }
    let y = conv_forward(input.data(), batch, &g, kernels, bias);
    let mut shape = vec![g.c_out, g.out_h(), g.out_w()];
    if input.shape().len() == 4 {
        shape.insert(0, batch);
    }
    Tensor::new(shape, y)
}

/// LSTM weights with gates stacked in the order input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    pub input: usize,
    pub units: usize,
    /// `4U x F`
    pub w_ih: Vec<T>,
    /// `4U x U`
    pub w_hh: Vec<T>,
    /// `4U`
    pub bias: Vec<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input: usize, units: usize) -> Self {
        LstmParams {
            input,
            units,
            w_ih: vec![T::zero(); 4 * units * input],
            w_hh: vec![T::zero(); 4 * units * units],
            bias: vec![T::zero(); 4 * units],
        }
    }

    fn check(&self) -> Result<()> {
        let u = self.units;
        if u == 0
            || self.w_ih.len() != 4 * u * self.input
            || self.w_hh.len() != 4 * u * u
            || self.bias.len() != 4 * u
        {
            return Err(AmcError::Shape(format!(
                "inconsistent LSTM parameters for {} inputs and {u} units",
                self.input
            )));
        }
        Ok(())
    }
}

/// Activations kept for backpropagation through time. Buffers are
/// time-major: row `t * batch + b`.
#[derive(Clone, Debug)]
pub(crate) struct LstmCache<T> {
    pub batch: usize,
    pub steps: usize,
    pub x: Vec<T>,
    /// Activated gates `[i, f, g, o]`, `4U` per row.
    pub gates: Vec<T>,
    pub cells: Vec<T>,
    pub tanh_cells: Vec<T>,
    pub hidden: Vec<T>,
}

fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Runs the recurrence on a batch-major `[B, T, F]` buffer and returns the
/// batch-major `[B, T, U]` hidden sequence.
pub(crate) fn lstm_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    steps: usize,
    p: &LstmParams<T>,
) -> (Vec<T>, LstmCache<T>) {
    let (f, u) = (p.input, p.units);
    let g4 = 4 * u;
    let mut xt = vec![T::zero(); steps * batch * f];
    for b in 0..batch {
        for t in 0..steps {
            xt[(t * batch + b) * f..(t * batch + b + 1) * f]
                .copy_from_slice(&x[(b * steps + t) * f..(b * steps + t + 1) * f]);
        }
    }
    let rows = steps * batch;
    let mut gates = vec![T::zero(); rows * g4];
    for row in gates.chunks_exact_mut(g4) {
        row.copy_from_slice(&p.bias);
    }
    matmul(false, true, rows, f, g4, &xt, &p.w_ih, &mut gates, true);

    let mut cells = vec![T::zero(); rows * u];
    let mut tanh_cells = vec![T::zero(); rows * u];
    let mut hidden = vec![T::zero(); rows * u];
    for t in 0..steps {
        let span = t * batch..(t + 1) * batch;
        if t > 0 {
            let h_prev = &hidden[(t - 1) * batch * u..t * batch * u];
            matmul(
                false,
                true,
                batch,
                u,
                g4,
                h_prev,
                &p.w_hh,
                &mut gates[span.start * g4..span.end * g4],
                true,
            );
        }
        for r in span {
            let z = &mut gates[r * g4..(r + 1) * g4];
            for v in &mut z[..2 * u] {
                *v = sigmoid(*v);
            }
            for v in &mut z[2 * u..3 * u] {
                *v = v.tanh();
            }
            for v in &mut z[3 * u..] {
                *v = sigmoid(*v);
            }
            for j in 0..u {
                let c_prev = if t > 0 { cells[(r - batch) * u + j] } else { T::zero() };
                let c = z[u + j] * c_prev + z[j] * z[2 * u + j];
                let tc = c.tanh();
                cells[r * u + j] = c;
                tanh_cells[r * u + j] = tc;
                hidden[r * u + j] = z[3 * u + j] * tc;
            }
        }
    }

    let mut out = vec![T::zero(); batch * steps * u];
    for b in 0..batch {
        for t in 0..steps {
            out[(b * steps + t) * u..(b * steps + t + 1) * u]
                .copy_from_slice(&hidden[(t * batch + b) * u..(t * batch + b + 1) * u]);
        }
    }
    let cache = LstmCache {
        batch,
        steps,
        x: xt,
        gates,
        cells,
        tanh_cells,
        hidden,
    };
    (out, cache)
}

/// Backpropagation through time. `dy` is batch-major `[B, T, U]`; parameter
/// gradients `(w_ih, w_hh, bias)` are accumulated when given. Returns
/// `[B, T, F]` input gradients when requested.
pub(crate) fn lstm_backward<T: Scalar>(
    cache: &LstmCache<T>,
    dy: &[T],
    p: &LstmParams<T>,
    dparams: Option<(&mut [T], &mut [T], &mut [T])>,
    need_dx: bool,
) -> Option<Vec<T>> {
    let (f, u) = (p.input, p.units);
    let g4 = 4 * u;
    let (batch, steps) = (cache.batch, cache.steps);
    let rows = batch * steps;
    let mut dz = vec![T::zero(); rows * g4];
    let mut dh_next = vec![T::zero(); batch * u];
    let mut dc_next = vec![T::zero(); batch * u];
    let one = T::one();

    for t in (0..steps).rev() {
        for b in 0..batch {
            let r = t * batch + b;
            let z = &cache.gates[r * g4..(r + 1) * g4];
            let dzr = &mut dz[r * g4..(r + 1) * g4];
            for j in 0..u {
                let (i_g, f_g, c_g, o_g) = (z[j], z[u + j], z[2 * u + j], z[3 * u + j]);
                let tc = cache.tanh_cells[r * u + j];
                let dh = dy[(b * steps + t) * u + j] + dh_next[b * u + j];
                let dc = dh * o_g * (one - tc * tc) + dc_next[b * u + j];
                let c_prev = if t > 0 { cache.cells[(r - batch) * u + j] } else { T::zero() };
                dzr[j] = dc * c_g * i_g * (one - i_g);
                dzr[u + j] = dc * c_prev * f_g * (one - f_g);
                dzr[2 * u + j] = dc * i_g * (one - c_g * c_g);
                dzr[3 * u + j] = dh * tc * o_g * (one - o_g);
                dc_next[b * u + j] = dc * f_g;
            }
        }
        let dz_t = &dz[t * batch * g4..(t + 1) * batch * g4];
        matmul(false, false, batch, g4, u, dz_t, &p.w_hh, &mut dh_next, false);
    }

    if let Some((dw_ih, dw_hh, db)) = dparams {
        for row in dz.chunks_exact(g4) {
            for (acc, &v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
        matmul(true, false, g4, rows, f, &dz, &cache.x, dw_ih, true);
        if steps > 1 {
            let tail = &dz[batch * g4..];
            let head = &cache.hidden[..(steps - 1) * batch * u];
            matmul(true, false, g4, (steps - 1) * batch, u, tail, head, dw_hh, true);
        }
    }

    need_dx.then(|| {
        let mut dxt = vec![T::zero(); rows * f];
        matmul(false, false, rows, g4, f, &dz, &p.w_ih, &mut dxt, false);
        let mut dx = vec![T::zero(); rows * f];
        for b in 0..batch {
            for t in 0..steps {
                dx[(b * steps + t) * f..(b * steps + t + 1) * f]
                    .copy_from_slice(&dxt[(t * batch + b) * f..(t * batch + b + 1) * f]);
            }
        }
        dx
    })
}

/// Full hidden-state sequence for a `[T, F]` or `[B, T, F]` input.
pub fn lstm_apply<T: Scalar>(sequence: &Tensor<T>, params: &LstmParams<T>) -> Result<Tensor<T>> {
    params.check()?;
    let (batch, steps, feat) = match sequence.shape() {
        [t, f] => (1, *t, *f),
        [b, t, f] => (*b, *t, *f),
        other => {
            return Err(AmcError::Shape(format!(
                "lstm expects a rank-2 or rank-3 input, got {other:?}"
            )))
        }
    };
    if feat != params.input || steps == 0 {
        return Err(AmcError::Shape(format!(
            "lstm expects {} features and at least one step, got {feat} features over {steps} steps",
            params.input
        )));
    }
    let (out, _) = lstm_forward(sequence.data(), batch, steps, params);
    let mut shape = sequence.shape().to_vec();
    *shape.last_mut().expect("rank checked") = params.units;
    Tensor::new(shape, out)
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let data = input.data().iter().map(|&v| v.max(T::zero())).collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

pub(crate) fn softmax_rows<T: Scalar>(logits: &[T], classes: usize, out: &mut [T]) {
    for (z, p) in logits.chunks_exact(classes).zip(out.chunks_exact_mut(classes)) {
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (pi, &zi) in p.iter_mut().zip(z) {
            *pi = (zi - max).exp();
            sum += *pi;
        }
        for pi in p.iter_mut() {
            *pi = *pi / sum;
        }
    }
}

/// Softmax over the last axis, computed with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let classes = logits.shape().last().copied().unwrap_or(0);
    if classes == 0 {
        return Err(AmcError::Shape("softmax needs at least one class".into()));
    }
    check_finite(logits.data(), "softmax")?;
    let mut out = vec![T::zero(); logits.len()];
    softmax_rows(logits.data(), classes, &mut out);
    Tensor::new(logits.shape().to_vec(), out)
}

/// Mean of `-log(max(p_true, LOG_CLAMP))` over the rows of `predicted`.
pub fn cross_entropy_loss<T: Scalar>(predicted: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let classes = predicted.shape().last().copied().unwrap_or(0);
    if classes == 0 || predicted.len() != labels.len() * classes || labels.is_empty() {
        return Err(AmcError::Shape(format!(
            "{} labels do not match predictions of shape {:?}",
            labels.len(),
            predicted.shape()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in predicted.data().chunks_exact(classes).zip(labels) {
        if y >= classes {
            return Err(AmcError::Input(format!("label {y} out of range for {classes} classes")));
        }
        total -= row[y].to_f64().max(LOG_CLAMP).ln();
    }
    Ok(total / labels.len() as f64)
}

/// Inverted-dropout mask: zero with probability `rate`, otherwise
/// `1 / (1 - rate)`. Eval mode yields all ones.
pub fn dropout_mask<T: Scalar>(
    shape: &[usize],
    rate: f64,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(AmcError::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    let count: usize = shape.iter().product();
    let mut data = vec![T::one(); count];
    if mode == Mode::Train && rate > 0.0 {
        fill_dropout(&mut data, rate, rng);
    }
    Tensor::new(shape.to_vec(), data)
}

pub(crate) fn fill_dropout<T: Scalar>(mask: &mut [T], rate: f64, rng: &mut dyn RngCore) {
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let threshold = rate as f32;
    for m in mask.iter_mut() {
        *m = if rng.random::<f32>() < threshold { T::zero() } else { keep };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn dense_identity_and_bias_only() {
        let x = Tensor::new(vec![3], vec![1.0f64, -2.0, 0.5]).unwrap();
        let eye = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(dense_apply(&x, &eye, &[0.0; 3]).unwrap(), x);
        let y = dense_apply(&x, &[0.0; 6], &[0.25, -4.0]).unwrap();
        assert_eq!(y.data(), &[0.25, -4.0]);
        assert!(dense_apply(&x, &[0.0; 4], &[0.0; 2]).is_err());
    }

    #[test]
    fn dense_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = uniform(&mut rng, 2 * 8);
        let w = uniform(&mut rng, 3 * 8);
        let b = uniform(&mut rng, 3);
        let y = dense_apply(&Tensor::new(vec![2, 8], x.clone()).unwrap(), &w, &b).unwrap();
        for n in 0..2 {
            for u in 0..3 {
                let mut acc = b[u];
                for i in 0..8 {
                    acc += w[u * 8 + i] * x[n * 8 + i];
                }
                assert_abs_diff_eq!(y.data()[n * 3 + u], acc, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn conv_unit_kernel_is_identity() {
        let x = Tensor::new(vec![1, 2, 4], (0..8).map(|v| v as f64).collect()).unwrap();
        let y = conv2d_apply(&x, &[1.0], &[0.0], 1, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_output_shape_for_first_cnn_layer() {
        let x = Tensor::<f32>::zeros(vec![1, 2, 128]);
        let y = conv2d_apply(&x, &vec![0.0; 256 * 10], &vec![0.0; 256], 2, 5).unwrap();
        assert_eq!(y.shape(), &[256, 1, 124]);
        assert!(conv2d_apply(&x, &[0.0; 3], &[0.0], 3, 1).is_err());
    }

    #[test]
    fn conv_matches_quadruple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (c_in, h, w, c_out, kh, kw) = (1, 2, 7, 3, 2, 3);
        let x = uniform(&mut rng, c_in * h * w);
        let k = uniform(&mut rng, c_out * c_in * kh * kw);
        let b = uniform(&mut rng, c_out);
        let y = conv2d_apply(&Tensor::new(vec![c_in, h, w], x.clone()).unwrap(), &k, &b, kh, kw)
            .unwrap();
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        for o in 0..c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[o];
                    for c in 0..c_in {
                        for i in 0..kh {
                            for j in 0..kw {
                                acc += k[((o * c_in + c) * kh + i) * kw + j]
                                    * x[(c * h + oy + i) * w + ox + j];
                            }
                        }
                    }
                    assert_abs_diff_eq!(y.data()[(o * oh + oy) * ow + ox], acc, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn lstm_with_zero_parameters_outputs_zero() {
        let x = Tensor::new(vec![5, 2], vec![0.3f64; 10]).unwrap();
        let y = lstm_apply(&x, &LstmParams::zeros(2, 4)).unwrap();
        assert_eq!(y.shape(), &[5, 4]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_single_step_matches_scalar_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (f, u) = (3, 2);
        let p = LstmParams {
            input: f,
            units: u,
            w_ih: uniform(&mut rng, 4 * u * f),
            w_hh: uniform(&mut rng, 4 * u * u),
            bias: uniform(&mut rng, 4 * u),
        };
        let x = uniform(&mut rng, f);
        let y = lstm_apply(&Tensor::new(vec![1, f], x.clone()).unwrap(), &p).unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        for j in 0..u {
            let pre = |gate: usize| {
                let row = gate * u + j;
                p.bias[row] + (0..f).map(|i| p.w_ih[row * f + i] * x[i]).sum::<f64>()
            };
            let (i_g, g_g, o_g) = (sig(pre(0)), pre(2).tanh(), sig(pre(3)));
            // zero initial cell: the forget gate has nothing to act on
            let c = i_g * g_g;
            assert_abs_diff_eq!(y.data()[j], o_g * c.tanh(), epsilon = 1e-12);
        }
    }

    #[test]
    fn lstm_outputs_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LstmParams {
            input: 2,
            units: 3,
            w_ih: uniform(&mut rng, 24).iter().map(|v| v * 20.0).collect(),
            w_hh: uniform(&mut rng, 36).iter().map(|v| v * 20.0).collect(),
            bias: uniform(&mut rng, 12),
        };
        let x = Tensor::new(vec![4, 6, 2], uniform(&mut rng, 48)).unwrap();
        let y = lstm_apply(&x, &p).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn softmax_contracts() {
        let z = Tensor::new(vec![4], vec![0.0f64; 4]).unwrap();
        assert_eq!(softmax(&z).unwrap().data(), &[0.25; 4]);

        let z = Tensor::new(vec![4], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let p = softmax(&z).unwrap();
        let denom: f64 = (1..=4).map(|v| (v as f64).exp()).sum();
        for (i, &pi) in p.data().iter().enumerate() {
            assert_abs_diff_eq!(pi, ((i + 1) as f64).exp() / denom, epsilon = 1e-7);
        }
        let shifted = Tensor::new(vec![4], vec![101.0f64, 102.0, 103.0, 104.0]).unwrap();
        for (a, b) in softmax(&shifted).unwrap().data().iter().zip(p.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
        let bad = Tensor::new(vec![2], vec![f64::INFINITY, 0.0]).unwrap();
        assert!(matches!(softmax(&bad), Err(AmcError::Numeric { .. })));
    }

    #[test]
    fn cross_entropy_cases() {
        let exact = Tensor::new(vec![4], vec![0.0f64, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(cross_entropy_loss(&exact, &[2]).unwrap(), 0.0);
        let uniform = Tensor::new(vec![4], vec![0.25f64; 4]).unwrap();
        assert_abs_diff_eq!(cross_entropy_loss(&uniform, &[1]).unwrap(), 4f64.ln(), epsilon = 1e-9);
        let zero = Tensor::new(vec![2], vec![0.0f64, 1.0]).unwrap();
        assert_abs_diff_eq!(cross_entropy_loss(&zero, &[0]).unwrap(), -(1e-12f64.ln()));
        let p = Tensor::new(vec![2, 3], vec![0.2f64, 0.5, 0.3, 0.1, 0.1, 0.8]).unwrap();
        let want = -(0.5f64.ln() + 0.8f64.ln()) / 2.0;
        assert_abs_diff_eq!(cross_entropy_loss(&p, &[1, 2]).unwrap(), want, epsilon = 1e-9);
    }

    #[test]
    fn dropout_mask_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ones: Tensor<f32> = dropout_mask(&[10, 10], 0.0, Mode::Train, &mut rng).unwrap();
        assert!(ones.data().iter().all(|&v| v == 1.0));
        let eval: Tensor<f32> = dropout_mask(&[100], 0.5, Mode::Eval, &mut rng).unwrap();
        assert!(eval.data().iter().all(|&v| v == 1.0));
        let m: Tensor<f64> = dropout_mask(&[1_000_000], 0.2, Mode::Train, &mut rng).unwrap();
        let mean = m.data().iter().sum::<f64>() / 1e6;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(m.data().iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-12));
        assert!(dropout_mask::<f32>(&[1], 1.0, Mode::Train, &mut rng).is_err());
    }
}
