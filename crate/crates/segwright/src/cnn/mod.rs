//! The small (~120k parameter) frame-classification CNN.
//!
//! Architecture: three valid 3x3 convolutions (32, 64, 64 kernels) with ReLU,
//! 2x2/stride-2 max-pools after the first two, a 1024-wide flatten, a dense
//! ReLU layer of 64 and a dense output of 2 with independent sigmoids. On a
//! 32x32 input the spatial sizes run 32 -> 30 -> 15 -> 13 -> 6 -> 4, so the
//! flatten is 4*4*64 = 1024.
//!
//! The two outputs are independent "speech" and "non-speech" detectors
//! trained with per-neuron binary cross-entropy; they need not sum to one.

mod io;
mod train;

pub use io::{load_model, save_model, FORMAT_VERSION};
pub use train::{cnn_train, Optimizer, TrainConfig, TrainSample};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::SpectrogramWindow;

pub const INPUT_SIDE: usize = 32;
pub const FLATTEN_DIM: usize = 1024;
pub const PARAM_COUNT: usize = 121_474;

/// Independent sigmoid outputs of the two neurons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePrediction {
    pub p_speech: f64,
    pub p_nonspeech: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    /// `[out_c][in_c][k][k]`, flattened.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out_dim][in_dim]`, flattened.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub conv3: ConvLayer,
    pub dense1: DenseLayer,
    pub dense2: DenseLayer,
}

impl ConvLayer {
    fn zeros(in_c: usize, out_c: usize, k: usize) -> Self {
        ConvLayer {
            in_c,
            out_c,
            k,
            w: vec![0.0; out_c * in_c * k * k],
            b: vec![0.0; out_c],
        }
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            w: vec![0.0; out_dim * in_dim],
            b: vec![0.0; out_dim],
        }
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl CnnModel {
    /// All-zero model; forward gives (0.5, 0.5) everywhere.
    pub fn zeros() -> Self {
        CnnModel {
            conv1: ConvLayer::zeros(1, 32, 3),
            conv2: ConvLayer::zeros(32, 64, 3),
            conv3: ConvLayer::zeros(64, 64, 3),
            dense1: DenseLayer::zeros(FLATTEN_DIM, 64),
            dense2: DenseLayer::zeros(64, 2),
        }
    }

    /// He-initialized weights, zero biases, reproducible from `seed`.
    pub fn new_random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = CnnModel::zeros();
        for layer in [&mut model.conv1, &mut model.conv2, &mut model.conv3] {
            let fan_in = (layer.in_c * layer.k * layer.k) as f64;
            let sd = (2.0 / fan_in).sqrt();
            for w in layer.w.iter_mut() {
                *w = gaussian(&mut rng) * sd;
            }
        }
        for layer in [&mut model.dense1, &mut model.dense2] {
            let sd = (2.0 / layer.in_dim as f64).sqrt();
            for w in layer.w.iter_mut() {
                *w = gaussian(&mut rng) * sd;
            }
        }
        model
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count()
            + self.conv2.param_count()
            + self.conv3.param_count()
            + self.dense1.param_count()
            + self.dense2.param_count()
    }

    /// Flat parameter vector in fixed layer order (weights then bias per layer).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in [&self.conv1, &self.conv2, &self.conv3] {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        for layer in [&self.dense1, &self.dense2] {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&params[offset..offset + dst.len()]);
            offset += dst.len();
        };
        for layer in [&mut self.conv1, &mut self.conv2, &mut self.conv3] {
            take(&mut layer.w);
            take(&mut layer.b);
        }
        for layer in [&mut self.dense1, &mut self.dense2] {
            take(&mut layer.w);
            take(&mut layer.b);
        }
        Ok(())
    }

    /// Forward pass on one spectrogram window.
    pub fn forward(&self, window: &SpectrogramWindow) -> Result<FramePrediction> {
        if window.values.len() != INPUT_SIDE * INPUT_SIDE {
            return Err(Error::DimensionMismatch(format!(
                "window has {} values, expected {}",
                window.values.len(),
                INPUT_SIDE * INPUT_SIDE
            )));
        }
        let cache = self.forward_cache(&window.values);
        Ok(FramePrediction {
            p_speech: cache.output[0],
            p_nonspeech: cache.output[1],
        })
    }

    /// Per-window loss and its gradient in flat-parameter order, for one
    /// (speech, non-speech) target pair.
    pub fn loss_and_grad(&self, window: &SpectrogramWindow, targets: [f64; 2]) -> Result<(f64, Vec<f64>)> {
        if window.values.len() != INPUT_SIDE * INPUT_SIDE {
            return Err(Error::DimensionMismatch(format!(
                "window has {} values, expected {}",
                window.values.len(),
                INPUT_SIDE * INPUT_SIDE
            )));
        }
        let cache = self.forward_cache(&window.values);
        Ok(self.backward(&cache, targets))
    }

    pub(crate) fn forward_cache(&self, input: &[f64]) -> ForwardCache {
        let a1 = conv_forward(&self.conv1, input, INPUT_SIDE, INPUT_SIDE);
        let r1 = relu(&a1);
        let (p1, p1_idx) = maxpool2(&r1, self.conv1.out_c, 30, 30);
        let a2 = conv_forward(&self.conv2, &p1, 15, 15);
        let r2 = relu(&a2);
        let (p2, p2_idx) = maxpool2(&r2, self.conv2.out_c, 13, 13);
        let a3 = conv_forward(&self.conv3, &p2, 6, 6);
        let r3 = relu(&a3);
        debug_assert_eq!(r3.len(), FLATTEN_DIM);
        let z4 = dense_forward(&self.dense1, &r3);
        let r4 = relu(&z4);
        let z5 = dense_forward(&self.dense2, &r4);
        let output: Vec<f64> = z5.iter().map(|&z| sigmoid(z)).collect();
        ForwardCache {
            input: input.to_vec(),
            a1,
            p1,
            p1_idx,
            a2,
            p2,
            p2_idx,
            a3,
            r4,
            output,
        }
    }

    /// Summed binary cross-entropy over the two output neurons and its
    /// gradient in flat-parameter order.
    pub(crate) fn backward(&self, cache: &ForwardCache, y: [f64; 2]) -> (f64, Vec<f64>) {
        let eps = 1e-12;
        let loss: f64 = (0..2)
            .map(|i| {
                let p = cache.output[i].clamp(eps, 1.0 - eps);
                -(y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
            })
            .sum();

        // sigmoid + BCE: dL/dz = p - y
        let dz5: Vec<f64> = (0..2).map(|i| cache.output[i] - y[i]).collect();

        let mut grad = Grad::new(self);
        let dr4 = dense_backward(&self.dense2, &cache.r4, &dz5, &mut grad.d2_w, &mut grad.d2_b);
        let r3 = relu(&cache.a3);
        let dz4: Vec<f64> = dr4
            .iter()
            .zip(&cache.r4)
            .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
            .collect();
        let dr3 = dense_backward(&self.dense1, &r3, &dz4, &mut grad.d1_w, &mut grad.d1_b);
        let da3: Vec<f64> = dr3
            .iter()
            .zip(&cache.a3)
            .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
            .collect();
        let dp2 = conv_backward(
            &self.conv3,
            &cache.p2,
            6,
            6,
            &da3,
            &mut grad.c3_w,
            &mut grad.c3_b,
        );
        let dr2 = maxpool2_backward(&dp2, &cache.p2_idx, self.conv2.out_c, 13, 13);
        let da2: Vec<f64> = dr2
            .iter()
            .zip(&cache.a2)
            .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
            .collect();
        let dp1 = conv_backward(
            &self.conv2,
            &cache.p1,
            15,
            15,
            &da2,
            &mut grad.c2_w,
            &mut grad.c2_b,
        );
        let dr1 = maxpool2_backward(&dp1, &cache.p1_idx, self.conv1.out_c, 30, 30);
        let da1: Vec<f64> = dr1
            .iter()
            .zip(&cache.a1)
            .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
            .collect();
        conv_backward(
            &self.conv1,
            &cache.input,
            INPUT_SIDE,
            INPUT_SIDE,
            &da1,
            &mut grad.c1_w,
            &mut grad.c1_b,
        );

        (loss, grad.into_flat())
    }
}

pub(crate) struct ForwardCache {
    input: Vec<f64>,
    a1: Vec<f64>,
    p1: Vec<f64>,
    p1_idx: Vec<usize>,
    a2: Vec<f64>,
    p2: Vec<f64>,
    p2_idx: Vec<usize>,
    a3: Vec<f64>,
    r4: Vec<f64>,
    pub(crate) output: Vec<f64>,
}

struct Grad {
    c1_w: Vec<f64>,
    c1_b: Vec<f64>,
    c2_w: Vec<f64>,
    c2_b: Vec<f64>,
    c3_w: Vec<f64>,
    c3_b: Vec<f64>,
    d1_w: Vec<f64>,
    d1_b: Vec<f64>,
    d2_w: Vec<f64>,
    d2_b: Vec<f64>,
}

impl Grad {
    fn new(model: &CnnModel) -> Self {
        Grad {
            c1_w: vec![0.0; model.conv1.w.len()],
            c1_b: vec![0.0; model.conv1.b.len()],
            c2_w: vec![0.0; model.conv2.w.len()],
            c2_b: vec![0.0; model.conv2.b.len()],
            c3_w: vec![0.0; model.conv3.w.len()],
            c3_b: vec![0.0; model.conv3.b.len()],
            d1_w: vec![0.0; model.dense1.w.len()],
            d1_b: vec![0.0; model.dense1.b.len()],
            d2_w: vec![0.0; model.dense2.w.len()],
            d2_b: vec![0.0; model.dense2.b.len()],
        }
    }

    fn into_flat(self) -> Vec<f64> {
        let mut out = Vec::new();
        for part in [
            self.c1_w, self.c1_b, self.c2_w, self.c2_b, self.c3_w, self.c3_b, self.d1_w,
            self.d1_b, self.d2_w, self.d2_b,
        ] {
            out.extend(part);
        }
        out
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Valid (no padding) convolution; input `[in_c][h][w]`, output
/// `[out_c][h-k+1][w-k+1]`.
fn conv_forward(layer: &ConvLayer, input: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = layer.k;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = vec![0.0; layer.out_c * oh * ow];
    for oc in 0..layer.out_c {
        let out_base = oc * oh * ow;
        out[out_base..out_base + oh * ow].fill(layer.b[oc]);
        for ic in 0..layer.in_c {
            let in_base = ic * h * w;
            for ky in 0..k {
                for kx in 0..k {
                    let wgt = layer.w[((oc * layer.in_c + ic) * k + ky) * k + kx];
                    for y in 0..oh {
                        let row_in = in_base + (y + ky) * w + kx;
                        let row_out = out_base + y * ow;
                        for x in 0..ow {
                            out[row_out + x] += wgt * input[row_in + x];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient of a valid convolution; accumulates weight/bias grads and
/// returns the gradient w.r.t. the input.
fn conv_backward(
    layer: &ConvLayer,
    input: &[f64],
    h: usize,
    w: usize,
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    ) -> Vec<f64> {
    let k = layer.k;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut dinput = vec![0.0; layer.in_c * h * w];
    for oc in 0..layer.out_c {
        let out_base = oc * oh * ow;
        db[oc] += dout[out_base..out_base + oh * ow].iter().sum::<f64>();
        for ic in 0..layer.in_c {
            let in_base = ic * h * w;
            for ky in 0..k {
                for kx in 0..k {
                    let widx = ((oc * layer.in_c + ic) * k + ky) * k + kx;
                    let wgt = layer.w[widx];
                    let mut wacc = 0.0;
                    for y in 0..oh {
                        let row_in = in_base + (y + ky) * w + kx;
                        let row_out = out_base + y * ow;
                        for x in 0..ow {
                            let d = dout[row_out + x];
                            wacc += d * input[row_in + x];
                            dinput[row_in + x] += wgt * d;
                        }
                    }
                    dw[widx] += wacc;
                }
            }
        }
    }
    dinput
}

/// 2x2 stride-2 max pool (floor semantics on odd sizes). Also returns the
/// flat input index of each maximum for backprop.
fn maxpool2(input: &[f64], channels: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; channels * oh * ow];
    let mut idx = vec![0usize; channels * oh * ow];
    for c in 0..channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let i = c * h * w + (2 * y + dy) * w + (2 * x + dx);
                        if input[i] > best {
                            best = input[i];
                            best_i = i;
                        }
                    }
                }
                let o = c * oh * ow + y * ow + x;
                out[o] = best;
                idx[o] = best_i;
            }
        }
    }
    (out, idx)
}

fn maxpool2_backward(
    dout: &[f64],
    idx: &[usize],
    channels: usize,
    h: usize,
    w: usize,
) -> Vec<f64> {
    let mut dinput = vec![0.0; channels * h * w];
    for (o, &i) in idx.iter().enumerate() {
        dinput[i] += dout[o];
    }
    dinput
}

fn dense_forward(layer: &DenseLayer, input: &[f64]) -> Vec<f64> {
    (0..layer.out_dim)
        .map(|o| {
            let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
            layer.b[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect()
}

fn dense_backward(
    layer: &DenseLayer,
    input: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dinput = vec![0.0; layer.in_dim];
    for o in 0..layer.out_dim {
        db[o] += dout[o];
        let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
        let drow = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
        for i in 0..layer.in_dim {
            drow[i] += dout[o] * input[i];
            dinput[i] += row[i] * dout[o];
        }
    }
    dinput
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn window_from(values: Vec<f64>) -> SpectrogramWindow {
        SpectrogramWindow {
            values,
            center_frame: 0,
        }
    }

    #[test]
    fn zero_model_outputs_half() {
        let model = CnnModel::zeros();
        let pred = model.forward(&window_from(vec![0.3; 1024])).unwrap();
        assert_eq!(pred.p_speech, 0.5);
        assert_eq!(pred.p_nonspeech, 0.5);
    }

    #[test]
    fn parameter_count_is_exact() {
        let model = CnnModel::new_random(1);
        assert_eq!(model.param_count(), PARAM_COUNT);
        // Per-layer breakdown.
        assert_eq!(model.conv1.param_count(), 320);
        assert_eq!(model.conv2.param_count(), 18_496);
        assert_eq!(model.conv3.param_count(), 36_928);
        assert_eq!(model.dense1.param_count(), 65_600);
        assert_eq!(model.dense2.param_count(), 130);
    }

    #[test]
    fn flatten_dim_is_1024() {
        let model = CnnModel::new_random(2);
        let cache = model.forward_cache(&vec![0.1; 1024]);
        assert_eq!(relu(&cache.a3).len(), FLATTEN_DIM);
    }

    #[test]
    fn forward_is_deterministic() {
        let model = CnnModel::new_random(7);
        let input: Vec<f64> = (0..1024).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = model.forward(&window_from(input.clone())).unwrap();
        let b = model.forward(&window_from(input)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_input_size_rejected() {
        let model = CnnModel::zeros();
        assert!(model.forward(&window_from(vec![0.0; 100])).is_err());
    }

    #[test]
    fn params_flat_roundtrip() {
        let model = CnnModel::new_random(3);
        let params = model.params_flat();
        assert_eq!(params.len(), PARAM_COUNT);
        let mut other = CnnModel::zeros();
        other.set_params_flat(&params).unwrap();
        assert_eq!(other, model);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // Central finite differences on randomly sampled parameters.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let model = CnnModel::new_random(42);
        let input: Vec<f64> = (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = [1.0, 0.0];
        let cache = model.forward_cache(&input);
        let (_, grad) = model.backward(&cache, y);

        let params = model.params_flat();
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for _ in 0..200 {
            let i = rng.gen_range(0..PARAM_COUNT);
            let mut p_plus = params.clone();
            p_plus[i] += h;
            let mut p_minus = params.clone();
            p_minus[i] -= h;
            let mut m = CnnModel::zeros();
            m.set_params_flat(&p_plus).unwrap();
            let (l_plus, _) = m.backward(&m.forward_cache(&input), y);
            m.set_params_flat(&p_minus).unwrap();
            let (l_minus, _) = m.backward(&m.forward_cache(&input), y);
            let fd = (l_plus - l_minus) / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max((grad[i] - fd).abs() / denom);
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }
}
