//! Dense building blocks: a two-hidden-layer ReLU perceptron with an exact
//! reverse pass, masked softmax and Adam.
//!
//! Matrices are row-major `f64` slices; a batch of `rows` inputs is a
//! `rows x in_dim` matrix and weights are stored `in_dim x out_dim`, so a
//! layer computes `X W + b`.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;

pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("tape was recorded against different parameters")]
    StaleTape,
    #[error("every entry is masked out")]
    AllMasked,
}

/// `C = alpha * op(A) * op(B) + beta * C` with `op(A)` `m x k` and `op(B)`
/// `k x n`; transposition is expressed through strides. With `beta == 0`
/// the previous contents of `C` are ignored.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for x in &mut c[..m * n] {
            *x = if beta == 0.0 { 0.0 } else { *x * beta };
        }
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above guarantee every strided access stays in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// `in_dim -> hidden -> hidden -> out_dim` perceptron, ReLU on the hidden
/// layers and identity on the output.
///
/// All weights and biases live in one flat vector in the order
/// `W1, b1, W2, b2, W3, b3`, which is also the gradient layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    in_dim: usize,
    hidden: usize,
    out_dim: usize,
    params: Vec<f64>,
    #[serde(skip, default = "fresh_version")]
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.in_dim == other.in_dim
            && self.hidden == other.hidden
            && self.out_dim == other.out_dim
            && self.params == other.params
    }
}

/// Offsets of the six tensors inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(i: usize, h: usize, o: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + i * h;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + h * o;
        Layout { w1, b1, w2, b2, w3, b3, len: b3 + o }
    }
}

/// Activations recorded by [`Mlp::forward_tape`].
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    rows: usize,
    input: Vec<f64>,
    hidden1: Vec<f64>,
    hidden2: Vec<f64>,
}

impl Tape {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Shrinks the output layer at initialization. The embedding stack feeds a
/// sum over every node back into each layer, so unit-gain outputs grow by
/// roughly the node count per layer.
pub const OUTPUT_INIT_GAIN: f64 = 0.1;

impl Mlp {
    /// Fan-in scaled uniform initialization with zero biases. Rectified
    /// layers draw from `U(+-sqrt(6/fan_in))`; the linear output layer from
    /// `U(+-g sqrt(3/fan_in))` with `g = OUTPUT_INIT_GAIN`.
    pub fn new(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        Self::with_hidden(in_dim, DEFAULT_HIDDEN, out_dim, seed)
    }

    pub fn with_hidden(in_dim: usize, hidden: usize, out_dim: usize, seed: u64) -> Self {
        assert!(in_dim >= 1 && hidden >= 1 && out_dim >= 1);
        let layout = Layout::new(in_dim, hidden, out_dim);
        let mut params = vec![0.0; layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: core::ops::Range<usize>, bound: f64| {
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(layout.w1..layout.b1, math::sqrt(6.0 / in_dim as f64));
        fill(layout.w2..layout.b2, math::sqrt(6.0 / hidden as f64));
        fill(layout.w3..layout.b3, OUTPUT_INIT_GAIN * math::sqrt(3.0 / hidden as f64));
        Mlp { in_dim, hidden, out_dim, params, version: fresh_version() }
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(in_dim: usize, hidden: usize, out_dim: usize, params: Vec<f64>) -> Result<Self, NnError> {
        let expected = Layout::new(in_dim, hidden, out_dim).len;
        if params.len() != expected {
            return Err(NnError::ShapeMismatch { expected, got: params.len() });
        }
        Ok(Mlp { in_dim, hidden, out_dim, params, version: fresh_version() })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version = fresh_version();
        &mut self.params
    }

    /// `(rows, cols)` of `W1, b1, W2, b2, W3, b3`.
    pub fn tensor_shapes(&self) -> [(usize, usize); 6] {
        let (i, h, o) = (self.in_dim, self.hidden, self.out_dim);
        [(i, h), (1, h), (h, h), (1, h), (h, o), (1, o)]
    }

    fn layout(&self) -> Layout {
        Layout::new(self.in_dim, self.hidden, self.out_dim)
    }

    fn check_input(&self, x: &[f64], rows: usize) -> Result<(), NnError> {
        let expected = rows * self.in_dim;
        if x.len() != expected {
            return Err(NnError::ShapeMismatch { expected, got: x.len() });
        }
        Ok(())
    }

    fn affine(&self, x: &[f64], rows: usize, w: usize, b: usize, i: usize, o: usize, out: &mut [f64]) {
        for r in 0..rows {
            out[r * o..(r + 1) * o].copy_from_slice(&self.params[b..b + o]);
        }
        gemm(rows, i, o, 1.0, x, false, &self.params[w..w + i * o], false, 1.0, out);
    }

    fn run(&self, x: &[f64], rows: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let l = self.layout();
        let (i, h, o) = (self.in_dim, self.hidden, self.out_dim);
        let mut a1 = vec![0.0; rows * h];
        self.affine(x, rows, l.w1, l.b1, i, h, &mut a1);
        relu_in_place(&mut a1);
        let mut a2 = vec![0.0; rows * h];
        self.affine(&a1, rows, l.w2, l.b2, h, h, &mut a2);
        relu_in_place(&mut a2);
        let mut y = vec![0.0; rows * o];
        self.affine(&a2, rows, l.w3, l.b3, h, o, &mut y);
        (a1, a2, y)
    }

    /// Batched forward pass without recording.
    pub fn forward(&self, x: &[f64], rows: usize) -> Result<Vec<f64>, NnError> {
        self.check_input(x, rows)?;
        Ok(self.run(x, rows).2)
    }

    /// Batched forward pass recording what the reverse pass needs.
    pub fn forward_tape(&self, x: &[f64], rows: usize) -> Result<(Vec<f64>, Tape), NnError> {
        self.check_input(x, rows)?;
        let (a1, a2, y) = self.run(x, rows);
        let tape = Tape { version: self.version, rows, input: x.to_vec(), hidden1: a1, hidden2: a2 };
        Ok((y, tape))
    }

    /// Reverse pass: adds `dL/dparams` into `grads` and returns `dL/dx`.
    pub fn backward(&self, tape: &Tape, dy: &[f64], grads: &mut [f64]) -> Result<Vec<f64>, NnError> {
        if tape.version != self.version {
            return Err(NnError::StaleTape);
        }
        let rows = tape.rows;
        let l = self.layout();
        let (i, h, o) = (self.in_dim, self.hidden, self.out_dim);
        if dy.len() != rows * o {
            return Err(NnError::ShapeMismatch { expected: rows * o, got: dy.len() });
        }
        if grads.len() != l.len {
            return Err(NnError::ShapeMismatch { expected: l.len, got: grads.len() });
        }
        // Output layer.
        gemm(h, rows, o, 1.0, &tape.hidden2, true, dy, false, 1.0, &mut grads[l.w3..l.b3]);
        col_sum_into(dy, rows, o, &mut grads[l.b3..l.b3 + o]);
        let mut d2 = vec![0.0; rows * h];
        gemm(rows, o, h, 1.0, dy, false, &self.params[l.w3..l.b3], true, 0.0, &mut d2);
        relu_mask(&mut d2, &tape.hidden2);
        // Second hidden layer.
        gemm(h, rows, h, 1.0, &tape.hidden1, true, &d2, false, 1.0, &mut grads[l.w2..l.b2]);
        col_sum_into(&d2, rows, h, &mut grads[l.b2..l.w3]);
        let mut d1 = vec![0.0; rows * h];
        gemm(rows, h, h, 1.0, &d2, false, &self.params[l.w2..l.b2], true, 0.0, &mut d1);
        relu_mask(&mut d1, &tape.hidden1);
        // First hidden layer.
        gemm(i, rows, h, 1.0, &tape.input, true, &d1, false, 1.0, &mut grads[l.w1..l.b1]);
        col_sum_into(&d1, rows, h, &mut grads[l.b1..l.w2]);
        let mut dx = vec![0.0; rows * i];
        gemm(rows, h, i, 1.0, &d1, false, &self.params[l.w1..l.b1], true, 0.0, &mut dx);
        Ok(dx)
    }
}

fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries whose post-activation was not positive.
fn relu_mask(grad: &mut [f64], activation: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn col_sum_into(x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        for (o, v) in out.iter_mut().zip(&x[r * cols..(r + 1) * cols]) {
            *o += v;
        }
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Softmax over the unmasked entries; masked entries get probability 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
    if logits.len() != mask.len() {
        return Err(NnError::ShapeMismatch { expected: logits.len(), got: mask.len() });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &keep)| keep)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY && !mask.iter().any(|&k| k) {
        return Err(NnError::AllMasked);
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &keep)| if keep { math::exp(l - max) } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

/// Adam with bias correction. The update descends; callers maximizing an
/// objective pass the negated gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 2.5e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment accumulators for one flat parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { first_moment: vec![0.0; len], second_moment: vec![0.0; len], step: 0 }
    }
}

pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<(), NnError> {
    for len in [grads.len(), state.first_moment.len(), state.second_moment.len()] {
        if len != params.len() {
            return Err(NnError::ShapeMismatch { expected: params.len(), got: len });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - math::powi(config.beta1, t);
    let c2 = 1.0 - math::powi(config.beta2, t);
    let (b1, b2) = (config.beta1, config.beta2);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.learning_rate * m_hat / (math::sqrt(v_hat) + config.epsilon);
    }
    Ok(())
}
