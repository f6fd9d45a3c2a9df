//! Minimal neural function approximation: fully connected networks with
//! exact reverse-mode gradients, an adaptive-moment optimizer, and the
//! squashed-Gaussian policy head used by the stochastic actor.
//!
//! Everything is double precision and allocation-flat: a network's
//! parameters live in one `Vec<f64>` so optimizer steps, soft target
//! updates, and finite-difference checks all operate on plain slices.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rng::normal;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed parameter blob: {0}")]
    MalformedBlob(String),
}

/// Output-layer activation. Hidden layers are always rectified-linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Tanh,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    w_off: usize,
    b_off: usize,
    in_dim: usize,
    out_dim: usize,
}

/// Fully connected network: affine layers with ReLU hidden activations and a
/// linear or tanh output head. Weights for each layer are stored `[in][out]`
/// row-major so both passes run as contiguous accumulations.
#[derive(Debug, Clone)]
pub struct Mlp {
    dims: Vec<usize>,
    out_act: OutputActivation,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Cached post-activations of one batch forward pass.
pub struct BatchCache {
    batch: usize,
    /// Post-activation outputs per layer, each `batch x out_dim`.
    acts: Vec<Vec<f64>>,
}

impl BatchCache {
    /// Final layer output of the cached pass.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl Mlp {
    /// Builds a network with Gaussian initialization scaled by
    /// `1/sqrt(fan_in)` and zero biases.
    pub fn new(dims: &[usize], out_act: OutputActivation, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut layers = Vec::new();
        let mut off = 0;
        for pair in dims.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            layers.push(Layer { w_off: off, b_off: off + in_dim * out_dim, in_dim, out_dim });
            off += in_dim * out_dim + out_dim;
        }
        let mut params = vec![0.0; off];
        for layer in &layers {
            let scale = 1.0 / (layer.in_dim as f64).sqrt();
            for w in
                params[layer.w_off..layer.w_off + layer.in_dim * layer.out_dim].iter_mut()
            {
                *w = scale * normal(rng);
            }
        }
        Self { dims: dims.to_vec(), out_act, layers, params }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.out_act
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Copies parameters from another network of identical shape.
    pub fn copy_params_from(&mut self, other: &Mlp) {
        assert_eq!(self.dims, other.dims);
        self.params.copy_from_slice(&other.params);
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        Ok(self.forward_batch(input, 1).acts.pop().unwrap())
    }

    /// Batch forward pass; `input` is `batch x input_dim` row-major.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> BatchCache {
        assert_eq!(input.len(), batch * self.input_dim(), "batch input size");
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut x = input;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut y = vec![0.0; batch * layer.out_dim];
            self.affine(layer, x, batch, &mut y);
            let last = li + 1 == self.layers.len();
            match (last, self.out_act) {
                (false, _) => {
                    for v in y.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                (true, OutputActivation::Tanh) => {
                    for v in y.iter_mut() {
                        *v = v.tanh();
                    }
                }
                (true, OutputActivation::Linear) => {}
            }
            acts.push(y);
            x = acts.last().unwrap();
        }
        BatchCache { batch, acts }
    }

    fn affine(&self, layer: &Layer, x: &[f64], batch: usize, y: &mut [f64]) {
        let w = &self.params[layer.w_off..layer.w_off + layer.in_dim * layer.out_dim];
        let b = &self.params[layer.b_off..layer.b_off + layer.out_dim];
        for i in 0..batch {
            let yrow = &mut y[i * layer.out_dim..(i + 1) * layer.out_dim];
            yrow.copy_from_slice(b);
            let xrow = &x[i * layer.in_dim..(i + 1) * layer.in_dim];
            for (p, &xv) in xrow.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &w[p * layer.out_dim..(p + 1) * layer.out_dim];
                for (yv, &wv) in yrow.iter_mut().zip(wrow.iter()) {
                    *yv += xv * wv;
                }
            }
        }
    }

    /// Reverse pass from `d_out` (gradient of a scalar loss with respect to
    /// the network output, `batch x out_dim`). Returns flat parameter
    /// gradients and the gradient with respect to the input.
    pub fn backward_batch(
        &self,
        input: &[f64],
        cache: &BatchCache,
        d_out: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        self.backward_impl(input, cache, d_out, true)
    }

    /// Reverse pass that only propagates to the input (no parameter
    /// gradients); used to differentiate through a frozen network.
    pub fn backward_input(&self, input: &[f64], cache: &BatchCache, d_out: &[f64]) -> Vec<f64> {
        self.backward_impl(input, cache, d_out, false).1
    }

    fn backward_impl(
        &self,
        input: &[f64],
        cache: &BatchCache,
        d_out: &[f64],
        want_params: bool,
    ) -> (Vec<f64>, Vec<f64>) {
        let batch = cache.batch;
        assert_eq!(d_out.len(), batch * self.output_dim());
        let mut grads = vec![0.0; if want_params { self.params.len() } else { 0 }];
        let mut delta = d_out.to_vec();

        for (li, layer) in self.layers.iter().enumerate().rev() {
            let post = &cache.acts[li];
            let last = li + 1 == self.layers.len();
            // Activation backward on this layer's output.
            match (last, self.out_act) {
                (false, _) => {
                    for (d, &a) in delta.iter_mut().zip(post.iter()) {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
                (true, OutputActivation::Tanh) => {
                    for (d, &a) in delta.iter_mut().zip(post.iter()) {
                        *d *= 1.0 - a * a;
                    }
                }
                (true, OutputActivation::Linear) => {}
            }

            let x: &[f64] = if li == 0 { input } else { &cache.acts[li - 1] };
            if want_params {
                let dw = layer.w_off;
                for i in 0..batch {
                    let drow = &delta[i * layer.out_dim..(i + 1) * layer.out_dim];
                    let xrow = &x[i * layer.in_dim..(i + 1) * layer.in_dim];
                    for (p, &xv) in xrow.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let grow = &mut grads[dw + p * layer.out_dim..dw + (p + 1) * layer.out_dim];
                        for (g, &d) in grow.iter_mut().zip(drow.iter()) {
                            *g += xv * d;
                        }
                    }
                    let brow = &mut grads[layer.b_off..layer.b_off + layer.out_dim];
                    for (g, &d) in brow.iter_mut().zip(drow.iter()) {
                        *g += d;
                    }
                }
            }

            // Input gradient via the transposed weights (built contiguous so
            // the accumulation below stays unit-stride).
            let w = &self.params[layer.w_off..layer.w_off + layer.in_dim * layer.out_dim];
            let mut wt = vec![0.0; layer.in_dim * layer.out_dim];
            for p in 0..layer.in_dim {
                for o in 0..layer.out_dim {
                    wt[o * layer.in_dim + p] = w[p * layer.out_dim + o];
                }
            }
            let mut dx = vec![0.0; batch * layer.in_dim];
            for i in 0..batch {
                let drow = &delta[i * layer.out_dim..(i + 1) * layer.out_dim];
                let dxrow = &mut dx[i * layer.in_dim..(i + 1) * layer.in_dim];
                for (o, &dv) in drow.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let wtrow = &wt[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (g, &wv) in dxrow.iter_mut().zip(wtrow.iter()) {
                        *g += dv * wv;
                    }
                }
            }
            delta = dx;
        }
        (grads, delta)
    }

    /// Serializes dims, seed/step metadata, and parameters as a flat blob.
    pub fn save_blob(&self, seed: u64, step: u64) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RSMLPB1\0");
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.push(match self.out_act {
            OutputActivation::Linear => 0,
            OutputActivation::Tanh => 1,
        });
        out.extend_from_slice(&seed.to_le_bytes());
        out.extend_from_slice(&step.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for &p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Reconstructs a network from [`Mlp::save_blob`] output, returning the
    /// stored (seed, step) metadata alongside it.
    pub fn load_blob(blob: &[u8]) -> Result<(Self, u64, u64), NnError> {
        let mut cur = Cursor { data: blob, pos: 0 };
        let magic = cur.take(8)?;
        if magic != b"RSMLPB1\0" {
            return Err(NnError::MalformedBlob("bad magic".into()));
        }
        let ndims = cur.u32()? as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(cur.u64()? as usize);
        }
        let out_act = match cur.take(1)?[0] {
            0 => OutputActivation::Linear,
            1 => OutputActivation::Tanh,
            other => return Err(NnError::MalformedBlob(format!("bad activation tag {other}"))),
        };
        let seed = cur.u64()?;
        let step = cur.u64()?;
        let nparams = cur.u64()? as usize;
        let mut layers = Vec::new();
        let mut off = 0;
        for pair in dims.windows(2) {
            layers.push(Layer { w_off: off, b_off: off + pair[0] * pair[1], in_dim: pair[0], out_dim: pair[1] });
            off += pair[0] * pair[1] + pair[1];
        }
        if off != nparams {
            return Err(NnError::MalformedBlob(format!("expected {off} params, header says {nparams}")));
        }
        let mut params = Vec::with_capacity(nparams);
        for _ in 0..nparams {
            params.push(cur.f64()?);
        }
        Ok((Self { dims, out_act, layers, params }, seed, step))
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.data.len() {
            return Err(NnError::MalformedBlob("truncated".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Adaptive-moment optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    /// One update with bias correction. Shapes must match.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Soft target update `target <- tau * online + (1 - tau) * target`.
pub fn polyak_update(target: &mut [f64], online: &[f64], tau: f64) {
    assert_eq!(target.len(), online.len());
    for (t, &o) in target.iter_mut().zip(online.iter()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

/// Floor added inside the squashing correction log.
pub const SQUASH_EPS: f64 = 1e-6;
const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8; // ln(2 pi) / 2
const LOG_STD_MIN: f64 = -20.0;
const LOG_STD_MAX: f64 = 2.0;

/// Squashed-Gaussian policy head: the actor network emits `2 A` values
/// (state-dependent mean and log-standard-deviation); sampling is
/// reparameterized and squashed through tanh with the standard
/// change-of-variables correction on the log-density.
#[derive(Debug, Clone, Copy)]
pub struct SquashedGaussian {
    pub action_dim: usize,
}

/// One sampled action with everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    sigma: Vec<f64>,
    eps: Vec<f64>,
    clamped: Vec<bool>,
}

impl SquashedGaussian {
    pub fn head_dim(&self) -> usize {
        2 * self.action_dim
    }

    /// Reparameterized sample from the policy defined by `head_out`
    /// (mean then raw log-std), using the provided standard-normal noise.
    pub fn sample(&self, head_out: &[f64], eps: &[f64]) -> PolicySample {
        assert_eq!(head_out.len(), self.head_dim());
        assert_eq!(eps.len(), self.action_dim);
        let mut action = Vec::with_capacity(self.action_dim);
        let mut sigma = Vec::with_capacity(self.action_dim);
        let mut clamped = Vec::with_capacity(self.action_dim);
        let mut log_prob = 0.0;
        for d in 0..self.action_dim {
            let mu = head_out[d];
            let ls_raw = head_out[self.action_dim + d];
            let ls = ls_raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            clamped.push(ls_raw <= LOG_STD_MIN || ls_raw >= LOG_STD_MAX);
            let s = ls.exp();
            let u = mu + s * eps[d];
            let a = u.tanh();
            log_prob += -0.5 * eps[d] * eps[d] - ls - LOG_SQRT_2PI - (1.0 - a * a + SQUASH_EPS).ln();
            action.push(a);
            sigma.push(s);
        }
        PolicySample { action, log_prob, sigma, eps: eps.to_vec(), clamped }
    }

    /// Squashed mean, used for deterministic evaluation.
    pub fn mean_action(&self, head_out: &[f64]) -> Vec<f64> {
        head_out[..self.action_dim].iter().map(|m| m.tanh()).collect()
    }

    /// Accumulates `dL/d(head_out)` into `d_head` given the gradient of the
    /// loss with respect to the action and the log-probability.
    pub fn backward(
        &self,
        sample: &PolicySample,
        d_action: &[f64],
        d_log_prob: f64,
        d_head: &mut [f64],
    ) {
        assert_eq!(d_action.len(), self.action_dim);
        assert_eq!(d_head.len(), self.head_dim());
        for d in 0..self.action_dim {
            let a = sample.action[d];
            let one_m_a2 = 1.0 - a * a;
            // d/du of the squashing correction -ln(1 - a^2 + eps).
            let t = 2.0 * a * one_m_a2 / (one_m_a2 + SQUASH_EPS);
            let se = sample.sigma[d] * sample.eps[d];
            let g_mu = d_log_prob * t + d_action[d] * one_m_a2;
            let g_ls = d_log_prob * (-1.0 + t * se) + d_action[d] * one_m_a2 * se;
            d_head[d] += g_mu;
            d_head[self.action_dim + d] += if sample.clamped[d] { 0.0 } else { g_ls };
        }
    }
}

/// Finite-difference utilities for gradient verification.
pub mod check {
    /// Central-difference gradient of a scalar function of the parameters.
    pub fn finite_difference_gradient(
        f: &mut dyn FnMut(&[f64]) -> f64,
        params: &[f64],
        h: f64,
    ) -> Vec<f64> {
        let mut work = params.to_vec();
        let mut grad = vec![0.0; params.len()];
        for i in 0..params.len() {
            let orig = work[i];
            work[i] = orig + h;
            let up = f(&work);
            work[i] = orig - h;
            let down = f(&work);
            work[i] = orig;
            grad[i] = (up - down) / (2.0 * h);
        }
        grad
    }

    /// Largest relative coordinate error between two gradients, with the
    /// denominator floored at `1e-6` times the largest magnitude seen.
    pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        let scale = analytic
            .iter()
            .chain(numeric.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
            .max(1e-12);
        analytic
            .iter()
            .zip(numeric.iter())
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6 * scale))
            .fold(0.0, f64::max)
    }
}
