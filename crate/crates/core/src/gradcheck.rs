//! Finite-difference verification of the analytic gradients.
//!
//! Only forward evaluations feed the numerical side, so a bug in
//! [`network::backward`] cannot cancel itself out.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::EncodedSentence;
use crate::error::Result;
use crate::loss;
use crate::matrix::Matrix;
use crate::network::{self, Dropout, Head, ModelParams, Shape};

pub const REL_TOLERANCE: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-7;
/// Step for network checks.
pub const NETWORK_STEP: f64 = 1e-4;
/// Step for scalar loss checks.
pub const LOSS_STEP: f64 = 1e-6;
/// Loss checks skip predictions this close to the RC Dice branch boundary.
pub const BOUNDARY_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradcheckReport {
    pub checked: usize,
    /// Largest `|a - n| / max(|a|, |n|)` among components whose absolute
    /// difference exceeds [`ABS_FLOOR`]; 0 when none do.
    pub worst_rel_error: f64,
    pub worst_abs_error: f64,
    /// Tensor and flat index of the worst component.
    pub worst_at: Option<(&'static str, usize)>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.worst_rel_error < REL_TOLERANCE
    }

    fn record(&mut self, at: (&'static str, usize), analytic: f64, numeric: f64) {
        self.checked += 1;
        let abs = libm::fabs(analytic - numeric);
        self.worst_abs_error = self.worst_abs_error.max(abs);
        if abs <= ABS_FLOOR {
            return;
        }
        let rel = abs / libm::fabs(analytic).max(libm::fabs(numeric));
        if rel > self.worst_rel_error || self.worst_at.is_none() {
            self.worst_rel_error = self.worst_rel_error.max(rel);
            self.worst_at = Some(at);
        }
    }

    pub fn merge(&mut self, other: &GradcheckReport) {
        self.checked += other.checked;
        self.worst_abs_error = self.worst_abs_error.max(other.worst_abs_error);
        if other.worst_rel_error > self.worst_rel_error {
            self.worst_rel_error = other.worst_rel_error;
            self.worst_at = other.worst_at;
        }
    }
}

/// Small sizes used when none are given: `u = 3, L = 5, |P| = 3`.
pub fn default_shape() -> Shape {
    Shape { embed_dim: 3, hidden: 3, seq_len: 5, relations: 3, pool: 2, stride: 1, head: Head::Linear }
}

/// A random sentence: `valid_len` rows of embedding values in `[-1, 1]` with
/// `±boost` case/entity columns, zero padding after.
pub fn random_sentence(rng: &mut impl Rng, shape: &Shape, boost: f64) -> EncodedSentence {
    let valid_len = rng.random_range(1..=shape.seq_len);
    let d = shape.embed_dim;
    let mut matrix = Matrix::zeros(shape.seq_len, shape.input_dim());
    for r in 0..valid_len {
        let row = matrix.row_mut(r);
        for x in row[..d].iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        row[d] = if rng.random_bool(0.5) { boost } else { -boost };
        row[d + 1] = [boost, -boost, 0.0][rng.random_range(0..3)];
    }
    EncodedSentence { matrix, valid_len }
}

/// Compares [`network::backward`] against central differences of
/// `dot(scores, upstream)` for every parameter of a random model. Dropout is
/// active with a fixed mask. `corrupt` perturbs one analytic component.
pub fn check_network(seed: u64, shape: Shape, corrupt: bool) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::init(seed, shape)?;
    for (_, t) in params.tensors_mut() {
        t.iter_mut().for_each(|x| *x += rng.random_range(-0.1..0.1));
    }
    let x = random_sentence(&mut rng, &shape, 2.0);
    let upstream: Vec<f64> = (0..shape.relations).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mask_seed: u64 = rng.random();
    let objective = |p: &ModelParams| -> Result<f64> {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_seed);
        let (scores, _) = network::forward(p, &x, Some(Dropout { rate: 0.15, rng: &mut mask_rng }))?;
        Ok(scores.iter().zip(&upstream).map(|(s, u)| s * u).sum())
    };
    let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let (_, cache) = network::forward(&params, &x, Some(Dropout { rate: 0.15, rng: &mut mask_rng }))?;
    let mut analytic = network::backward(&params, &cache, &upstream)?;
    if corrupt {
        analytic.tensors_mut()[0].1[0] += 1e-2;
    }

    let mut report = GradcheckReport::default();
    let names: Vec<&'static str> = params.tensors().iter().map(|(n, _)| *n).collect();
    for (ti, name) in names.into_iter().enumerate() {
        let len = params.tensors()[ti].1.len();
        for i in 0..len {
            let orig = params.tensors()[ti].1[i];
            params.tensors_mut()[ti].1[i] = orig + NETWORK_STEP;
            let plus = objective(&params)?;
            params.tensors_mut()[ti].1[i] = orig - NETWORK_STEP;
            let minus = objective(&params)?;
            params.tensors_mut()[ti].1[i] = orig;
            let numeric = (plus - minus) / (2.0 * NETWORK_STEP);
            report.record((name, i), analytic.tensors()[ti].1[i], numeric);
        }
    }
    Ok(report)
}

fn central(f: impl Fn(f64) -> f64, p: f64) -> f64 {
    (f(p + LOSS_STEP) - f(p - LOSS_STEP)) / (2.0 * LOSS_STEP)
}

/// Checks RC Dice, Dice and cross-entropy gradients at `points` random
/// predictions per label, skipping the RC Dice boundary neighbourhood.
pub fn check_losses(seed: u64, points: usize, gamma: f64) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradcheckReport::default();
    for _ in 0..points {
        for y in [false, true] {
            let p: f64 = rng.random_range(-1.0..1.0);
            if libm::fabs(p - loss::THRESHOLD) >= BOUNDARY_MARGIN {
                let numeric = central(|q| loss::rc_dice_loss(y, q, gamma), p);
                report.record(("rc_dice", 0), loss::rc_dice_grad(y, p, gamma), numeric);
            }
            if libm::fabs(p) >= BOUNDARY_MARGIN {
                let numeric = central(|q| loss::dice_loss(y, q, gamma), p);
                report.record(("dice", 0), loss::dice_grad(y, p, gamma), numeric);
            }
            let q: f64 = rng.random_range(0.01..0.99);
            report.record(("bce", 0), loss::bce_grad(y, q), central(|v| loss::bce_loss(y, v), q));
            let s: f64 = rng.random_range(-4.0..4.0);
            let (_, g) = loss::LossKind::BceSigmoid.cell(y, s, gamma);
            report.record(("bce_sigmoid", 0), g, central(|v| loss::bce_loss(y, loss::sigmoid(v)), s));
        }
    }
    report
}
