//! Bidirectional LSTM, temporal average pooling, dropout and a linear head.
//!
//! ```text
//! x (L × d+2) ─┬─ LSTM→ ─┐
//!              └─ LSTM← ─┴─ concat (L × 2u) ─ avg-pool over time (L' × 2u)
//!                          ─ flatten ─ dropout ─ affine ─ scores (|P|)
//! ```
//!
//! Scores are left unsquashed; hidden states are tanh-bounded so a trained
//! model keeps them roughly in `[-1, 1]`.

mod lstm;
mod pool;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::EncodedSentence;
use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;

pub use lstm::{lstm_backward, lstm_forward, Direction, LstmCache};
pub use pool::{avg_pool, avg_pool_backward, pooled_len};

/// How raw scores are read before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Head {
    /// Scores used as-is.
    #[default]
    Linear,
    /// Scores passed through a logistic sigmoid.
    Sigmoid,
}

impl Head {
    pub fn activate(self, score: f64) -> f64 {
        match self {
            Head::Linear => score,
            Head::Sigmoid => crate::loss::sigmoid(score),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Head::Linear => "linear",
            Head::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Head::Linear),
            "sigmoid" => Some(Head::Sigmoid),
            _ => None,
        }
    }
}

/// Dimensions of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub embed_dim: usize,
    /// Units per LSTM direction.
    pub hidden: usize,
    pub seq_len: usize,
    pub relations: usize,
    pub pool: usize,
    pub stride: usize,
    pub head: Head,
}

impl Shape {
    /// 2×500 LSTM units, padding 100, pool 80 with stride 2.
    pub fn reference(embed_dim: usize, relations: usize) -> Self {
        Self { embed_dim, hidden: 500, seq_len: 100, relations, pool: 80, stride: 2, head: Head::Linear }
    }

    pub fn input_dim(&self) -> usize {
        self.embed_dim + 2
    }

    pub fn pooled_len(&self) -> usize {
        (self.seq_len - self.pool) / self.stride + 1
    }

    /// Length of the flattened pooled features feeding the dense layer.
    pub fn flat_dim(&self) -> usize {
        self.pooled_len() * 2 * self.hidden
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("embedding dimension", self.embed_dim),
            ("hidden units", self.hidden),
            ("sequence length", self.seq_len),
            ("relation count", self.relations),
            ("pool size", self.pool),
            ("stride", self.stride),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(alloc::format!("{name} must be positive")));
        }
        pooled_len(self.seq_len, self.pool, self.stride).map(|_| ())
    }

    /// `(name, rows, cols)` of every tensor, in storage order. Vectors have one row.
    pub fn tensor_specs(&self) -> [(&'static str, usize, usize); 8] {
        let (i, u, p) = (self.input_dim(), self.hidden, self.relations);
        [
            ("forward.kernel", i, 4 * u),
            ("forward.recurrent_kernel", u, 4 * u),
            ("forward.bias", 1, 4 * u),
            ("backward.kernel", i, 4 * u),
            ("backward.recurrent_kernel", u, 4 * u),
            ("backward.bias", 1, 4 * u),
            ("dense.kernel", self.flat_dim(), p),
            ("dense.bias", 1, p),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensor_specs().iter().map(|(_, r, c)| r * c).sum()
    }
}

/// Weights of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `input × 4u`
    pub w_in: Matrix,
    /// `u × 4u`
    pub w_rec: Matrix,
    /// `4u`
    pub bias: Vec<f64>,
}

impl LstmParams {
    fn zeros(input: usize, units: usize) -> Self {
        Self { w_in: Matrix::zeros(input, 4 * units), w_rec: Matrix::zeros(units, 4 * units), bias: vec![0.0; 4 * units] }
    }

    pub fn units(&self) -> usize {
        self.w_rec.rows()
    }
}

/// Every trainable tensor plus the shape it was built for. Gradients use the
/// same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shape: Shape,
    pub forward: LstmParams,
    pub backward: LstmParams,
    /// `flat_dim × relations`
    pub dense_w: Matrix,
    pub dense_b: Vec<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

/// `rows × cols` matrix with orthonormal rows (or columns when `rows > cols`).
fn orthogonal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        // a near-degenerate draw is simply redrawn
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    if rows <= cols {
        Matrix::from_fn(rows, cols, |r, c| basis[r][c])
    } else {
        Matrix::from_fn(rows, cols, |r, c| basis[c][r])
    }
}

impl ModelParams {
    pub fn zeros(shape: Shape) -> Self {
        let (i, u) = (shape.input_dim(), shape.hidden);
        Self {
            shape,
            forward: LstmParams::zeros(i, u),
            backward: LstmParams::zeros(i, u),
            dense_w: Matrix::zeros(shape.flat_dim(), shape.relations),
            dense_b: vec![0.0; shape.relations],
        }
    }

    /// Seeded initialization: Glorot-uniform input and dense kernels,
    /// orthogonal recurrent kernels, zero biases.
    pub fn init(seed: u64, shape: Shape) -> Result<Self> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, u) = (shape.input_dim(), shape.hidden);
        let direction = |rng: &mut ChaCha8Rng| LstmParams {
            w_in: glorot(rng, i, 4 * u),
            w_rec: orthogonal(rng, u, 4 * u),
            bias: vec![0.0; 4 * u],
        };
        let forward = direction(&mut rng);
        let backward = direction(&mut rng);
        let dense_w = glorot(&mut rng, shape.flat_dim(), shape.relations);
        Ok(Self { shape, forward, backward, dense_w, dense_b: vec![0.0; shape.relations] })
    }

    /// Rebuilds parameters from flat tensors in [`Shape::tensor_specs`] order.
    pub fn from_tensors(shape: Shape, tensors: Vec<Vec<f64>>) -> Result<Self> {
        shape.validate()?;
        check_len("tensor count", 8, tensors.len())?;
        for ((_, r, c), t) in shape.tensor_specs().iter().zip(&tensors) {
            check_len("tensor length", r * c, t.len())?;
        }
        let mut it = tensors.into_iter();
        let (i, u) = (shape.input_dim(), shape.hidden);
        let mut next = || it.next().expect("length checked");
        let lstm = |next: &mut dyn FnMut() -> Vec<f64>| LstmParams {
            w_in: Matrix::from_vec(i, 4 * u, next()),
            w_rec: Matrix::from_vec(u, 4 * u, next()),
            bias: next(),
        };
        let forward = lstm(&mut next);
        let backward = lstm(&mut next);
        let dense_w = Matrix::from_vec(shape.flat_dim(), shape.relations, next());
        let dense_b = next();
        Ok(Self { shape, forward, backward, dense_w, dense_b })
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 8] {
        let names = self.shape.tensor_specs().map(|(n, _, _)| n);
        [
            (names[0], self.forward.w_in.as_slice()),
            (names[1], self.forward.w_rec.as_slice()),
            (names[2], &self.forward.bias),
            (names[3], self.backward.w_in.as_slice()),
            (names[4], self.backward.w_rec.as_slice()),
            (names[5], &self.backward.bias),
            (names[6], self.dense_w.as_slice()),
            (names[7], &self.dense_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 8] {
        let names = self.shape.tensor_specs().map(|(n, _, _)| n);
        [
            (names[0], self.forward.w_in.as_mut_slice()),
            (names[1], self.forward.w_rec.as_mut_slice()),
            (names[2], &mut self.forward.bias),
            (names[3], self.backward.w_in.as_mut_slice()),
            (names[4], self.backward.w_rec.as_mut_slice()),
            (names[5], &mut self.backward.bias),
            (names[6], self.dense_w.as_mut_slice()),
            (names[7], &mut self.dense_b),
        ]
    }

    pub fn add_assign(&mut self, other: &ModelParams) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::InvalidConfig("adding parameters of different shapes".into()));
        }
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    /// First tensor containing a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors().into_iter().find(|(_, t)| t.iter().any(|x| !x.is_finite())).map(|(n, _)| n)
    }

    pub fn param_count(&self) -> usize {
        self.shape.param_count()
    }
}

/// Everything recorded by [`forward`] that [`backward`] needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    shape: Shape,
    input: Matrix,
    forward: LstmCache,
    backward: LstmCache,
    /// Flattened pooled features after dropout.
    features: Vec<f64>,
    /// Inverted-dropout multipliers, absent at inference.
    mask: Option<Vec<f64>>,
    pub scores: Vec<f64>,
}

impl ForwardCache {
    pub fn dropout_mask(&self) -> Option<&[f64]> {
        self.mask.as_deref()
    }
}

/// Dropout applied while training: each feature is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut dyn RngCore,
}

fn check_input(shape: &Shape, x: &EncodedSentence) -> Result<()> {
    check_len("sequence length", shape.seq_len, x.seq_len())?;
    check_len("feature width", shape.input_dim(), x.width())
}

/// Runs the network on one encoded sentence. Pass `dropout` only in training.
pub fn forward(params: &ModelParams, x: &EncodedSentence, dropout: Option<Dropout<'_>>) -> Result<(Vec<f64>, ForwardCache)> {
    let shape = params.shape;
    check_input(&shape, x)?;
    let u = shape.hidden;
    let (h_fwd, c_fwd) = lstm_forward(&params.forward, &x.matrix, Direction::Forward)?;
    let (h_bwd, c_bwd) = lstm_forward(&params.backward, &x.matrix, Direction::Backward)?;
    let concat = Matrix::from_fn(shape.seq_len, 2 * u, |t, c| if c < u { h_fwd.get(t, c) } else { h_bwd.get(t, c - u) });
    let mut features = avg_pool(&concat, shape.pool, shape.stride)?.into_vec();
    let mask = match dropout {
        Some(Dropout { rate, rng }) => {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::InvalidConfig(alloc::format!("dropout rate {rate} outside [0, 1)")));
            }
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..features.len()).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
            features.iter_mut().zip(&mask).for_each(|(f, m)| *f *= m);
            Some(mask)
        }
        None => None,
    };
    let mut scores = params.dense_b.clone();
    params.dense_w.accumulate_vec_mul(&features, &mut scores);
    let cache = ForwardCache {
        shape,
        input: x.matrix.clone(),
        forward: c_fwd,
        backward: c_bwd,
        features,
        mask,
        scores: scores.clone(),
    };
    Ok((scores, cache))
}

/// Inference-mode scores (no dropout).
pub fn infer(params: &ModelParams, x: &EncodedSentence) -> Result<Vec<f64>> {
    forward(params, x, None).map(|(s, _)| s)
}

/// `score >= threshold` per relation.
pub fn predict(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

/// Gradients of `dot(scores, d_scores)` with respect to every parameter.
pub fn backward(params: &ModelParams, cache: &ForwardCache, d_scores: &[f64]) -> Result<ModelParams> {
    let mut grads = ModelParams::zeros(params.shape);
    backward_into(params, cache, d_scores, &mut grads)?;
    Ok(grads)
}

/// Like [`backward`] but adds into an existing gradient set.
pub fn backward_into(params: &ModelParams, cache: &ForwardCache, d_scores: &[f64], grads: &mut ModelParams) -> Result<()> {
    let shape = params.shape;
    if cache.shape != shape || grads.shape != shape {
        return Err(Error::InvalidConfig("forward cache recorded with a different model shape".into()));
    }
    check_len("score gradient", shape.relations, d_scores.len())?;
    for (b, d) in grads.dense_b.iter_mut().zip(d_scores) {
        *b += d;
    }
    grads.dense_w.add_outer(&cache.features, d_scores);
    let mut d_features = vec![0.0; cache.features.len()];
    params.dense_w.accumulate_mul_vec(d_scores, &mut d_features);
    if let Some(mask) = &cache.mask {
        d_features.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
    }
    let u = shape.hidden;
    let d_pooled = Matrix::from_vec(shape.pooled_len(), 2 * u, d_features);
    let d_concat = avg_pool_backward(&d_pooled, shape.seq_len, shape.pool, shape.stride)?;
    let d_fwd = Matrix::from_fn(shape.seq_len, u, |t, c| d_concat.get(t, c));
    let d_bwd = Matrix::from_fn(shape.seq_len, u, |t, c| d_concat.get(t, u + c));
    lstm_backward(&params.forward, &cache.forward, &cache.input, &d_fwd, &mut grads.forward)?;
    lstm_backward(&params.backward, &cache.backward, &cache.input, &d_bwd, &mut grads.backward)?;
    Ok(())
}
