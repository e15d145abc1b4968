//! Dice, RC Dice and sigmoid cross-entropy losses with their gradients.
//!
//! Predictions for the Dice family are raw linear scores, normally in
//! `[-1, 1]`; a label counts as positive from 0.5 upwards. RC Dice replaces
//! the Dice value for a correctly rejected negative (`y = 0`, `p < 0.5`) by
//! `gamma^2 / (p^2 + gamma)`, which is at most `gamma`.

use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// Default smoothing constant.
pub const DEFAULT_GAMMA: f64 = 1e-6;
/// Probability clamp for cross-entropy.
pub const BCE_EPSILON: f64 = 1e-12;
/// Decision threshold on linear scores.
pub const THRESHOLD: f64 = 0.5;

#[inline]
fn label(y: bool) -> f64 {
    if y {
        1.0
    } else {
        0.0
    }
}

/// `1 - (2py + gamma) / (p^2 + y^2 + gamma)`.
pub fn dice_loss(y: bool, p: f64, gamma: f64) -> f64 {
    let y = label(y);
    1.0 - (2.0 * p * y + gamma) / (p * p + y * y + gamma)
}

/// `d dice_loss / dp`.
pub fn dice_grad(y: bool, p: f64, gamma: f64) -> f64 {
    let y = label(y);
    let num = 2.0 * p * y + gamma;
    let den = p * p + y * y + gamma;
    -(2.0 * y * den - num * 2.0 * p) / (den * den)
}

#[inline]
fn suppressed(y: bool, p: f64) -> bool {
    !y && p < THRESHOLD
}

/// Dice loss with the correctly-rejected-negative branch replaced by
/// `gamma^2 / (p^2 + y^2 + gamma)`. At `p = 0.5` the Dice branch applies.
pub fn rc_dice_loss(y: bool, p: f64, gamma: f64) -> f64 {
    if suppressed(y, p) {
        libm::pow(gamma, 2.0) / (p * p + gamma)
    } else {
        dice_loss(y, p, gamma)
    }
}

/// `d rc_dice_loss / dp`, piecewise like the loss.
pub fn rc_dice_grad(y: bool, p: f64, gamma: f64) -> f64 {
    if suppressed(y, p) {
        let den = p * p + gamma;
        -2.0 * p * libm::pow(gamma, 2.0) / (den * den)
    } else {
        dice_grad(y, p, gamma)
    }
}

/// `-(y ln q + (1 - y) ln(1 - q))` with `q` clamped to `[eps, 1 - eps]`.
pub fn bce_loss(y: bool, q: f64) -> f64 {
    let q = q.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    let y = label(y);
    -(y * libm::log(q) + (1.0 - y) * libm::log(1.0 - q))
}

/// `d bce_loss / dq`; zero where the clamp is active.
pub fn bce_grad(y: bool, q: f64) -> f64 {
    if !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&q) {
        return 0.0;
    }
    let y = label(y);
    -y / q + (1.0 - y) / (1.0 - q)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Which per-cell loss drives training, and how scores are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum LossKind {
    /// RC Dice on linear scores.
    #[default]
    RcDice,
    /// Plain Dice on linear scores.
    Dice,
    /// Sigmoid on the scores followed by binary cross-entropy.
    BceSigmoid,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::RcDice => "rc_dice",
            LossKind::Dice => "dice",
            LossKind::BceSigmoid => "bce_sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rc_dice" => Some(LossKind::RcDice),
            "dice" => Some(LossKind::Dice),
            "bce_sigmoid" => Some(LossKind::BceSigmoid),
            _ => None,
        }
    }

    /// Loss and `d loss / d score` for one cell.
    pub fn cell(self, y: bool, score: f64, gamma: f64) -> (f64, f64) {
        match self {
            LossKind::RcDice => (rc_dice_loss(y, score, gamma), rc_dice_grad(y, score, gamma)),
            LossKind::Dice => (dice_loss(y, score, gamma), dice_grad(y, score, gamma)),
            LossKind::BceSigmoid => {
                let q = sigmoid(score);
                // d/ds bce(y, sigmoid(s)) = sigmoid(s) - y outside the clamp
                (bce_loss(y, q), q - label(y))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub kind: LossKind,
    pub gamma: f64,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { kind: LossKind::RcDice, gamma: DEFAULT_GAMMA, reduction: Reduction::Mean }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 && self.gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!("gamma must be positive, got {}", self.gamma)))
        }
    }
}

/// Reduced loss over a batch and its gradient with respect to every score.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    pub grad: Vec<Vec<f64>>,
}

pub fn batch_loss<L, S>(labels: &[L], scores: &[S], cfg: &LossConfig) -> Result<BatchLoss>
where
    L: AsRef<[bool]>,
    S: AsRef<[f64]>,
{
    cfg.validate()?;
    check_len("batch size", labels.len(), scores.len())?;
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let width = labels[0].as_ref().len();
    let mut cells = 0usize;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (y, s) in labels.iter().zip(scores) {
        let (y, s) = (y.as_ref(), s.as_ref());
        check_len("label vector", width, y.len())?;
        check_len("score vector", width, s.len())?;
        let mut row = Vec::with_capacity(width);
        for (&yi, &si) in y.iter().zip(s) {
            let (l, g) = cfg.kind.cell(yi, si, cfg.gamma);
            total += l;
            row.push(g);
        }
        cells += width;
        grad.push(row);
    }
    if cfg.reduction == Reduction::Mean && cells > 0 {
        let n = cells as f64;
        total /= n;
        grad.iter_mut().flatten().for_each(|g| *g /= n);
    }
    Ok(BatchLoss { value: total, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const G: f64 = DEFAULT_GAMMA;

    #[test]
    fn dice_reference_points() {
        assert_eq!(dice_loss(true, 1.0, G), 0.0);
        assert_eq!(dice_loss(false, 0.0, G), 0.0);
        assert!((dice_loss(false, 0.1, G) - (1.0 - 1e-6 / 0.010001)).abs() < 1e-15);
        assert!((dice_loss(true, -1.0, G) - 4.0 / (2.0 + G)).abs() < 1e-15);
    }

    #[test]
    fn rc_dice_reference_points() {
        assert!((rc_dice_loss(false, -1.0, G) - 1e-12 / (1.0 + 1e-6)).abs() < 1e-24);
        assert!((rc_dice_loss(false, 0.1, G) - 1e-12 / 0.010001).abs() < 1e-22);
        assert_eq!(rc_dice_loss(false, 1.0, G), dice_loss(false, 1.0, G));
        assert_eq!(rc_dice_loss(true, -1.0, G), dice_loss(true, -1.0, G));
        // boundary belongs to the Dice branch
        assert_eq!(rc_dice_loss(false, 0.5, G), dice_loss(false, 0.5, G));
        assert_eq!(rc_dice_grad(false, 0.5, G), dice_grad(false, 0.5, G));
        assert_eq!(rc_dice_grad(false, 0.0, G), 0.0);
    }

    #[test]
    fn bce_reference_points() {
        assert!(bce_loss(true, 1.0 - BCE_EPSILON) < 1e-11);
        assert!((bce_loss(false, 0.5) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(true, 0.5) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(true, 0.0).is_finite());
        assert_eq!(bce_grad(true, 0.0), 0.0);
    }

    #[test]
    fn batch_mean_and_shape_errors() {
        let cfg = LossConfig::default();
        let zero = batch_loss(&[vec![true, false]], &[vec![1.0, -1.0]], &cfg).unwrap();
        assert!(zero.value < 1e-12);
        let one = batch_loss(&[vec![false]], &[vec![0.7]], &cfg).unwrap();
        assert_eq!(one.value, rc_dice_loss(false, 0.7, G));
        assert_eq!(one.grad[0][0], rc_dice_grad(false, 0.7, G));

        let labels = [vec![true, false], vec![false, true]];
        let scores = [vec![0.2, 0.9], vec![-0.3, 1.0]];
        let b = batch_loss(&labels, &scores, &cfg).unwrap();
        let expect = (rc_dice_loss(true, 0.2, G)
            + rc_dice_loss(false, 0.9, G)
            + rc_dice_loss(false, -0.3, G)
            + rc_dice_loss(true, 1.0, G))
            / 4.0;
        assert!((b.value - expect).abs() < 1e-15);
        assert!((b.grad[0][1] - rc_dice_grad(false, 0.9, G) / 4.0).abs() < 1e-18);

        let sum = LossConfig { reduction: Reduction::Sum, ..cfg };
        assert!((batch_loss(&labels, &scores, &sum).unwrap().value - 4.0 * expect).abs() < 1e-14);

        assert!(matches!(batch_loss(&labels, &scores[..1], &cfg), Err(Error::Shape { .. })));
        assert!(matches!(batch_loss(&[vec![true]], &[vec![1.0, 2.0]], &cfg), Err(Error::Shape { .. })));
        let bad = LossConfig { gamma: 0.0, ..cfg };
        assert!(matches!(batch_loss(&labels, &scores, &bad), Err(Error::InvalidConfig(_))));
    }
}
