//! Independent scalar re-implementations checked against the library.

use mrca_core::loss::{self, DEFAULT_GAMMA};
use mrca_core::network::{self, lstm_forward, Direction, Dropout};
use mrca_core::train::{adam_step, TrainConfig};
use mrca_core::{AdamState, EmbeddingStore, Head, Matrix, ModelParams, Shape, Span};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dice rewritten as a squared distance: `(p − y)² / (p² + y² + γ)`.
fn dice_oracle(y: f64, p: f64, gamma: f64) -> f64 {
    let d = p - y;
    d * d / (p * p + y * y + gamma)
}

fn rc_dice_oracle(y: f64, p: f64, gamma: f64) -> f64 {
    if y == 0.0 && p < 0.5 {
        gamma * gamma / (p * p + gamma)
    } else {
        dice_oracle(y, p, gamma)
    }
}

#[test]
fn losses_match_oracle_on_grid() {
    for y in [false, true] {
        for k in 0..=49 {
            let p = -1.0 + 2.0 * k as f64 / 49.0;
            let yf = f64::from(u8::from(y));
            let d = loss::dice_loss(y, p, DEFAULT_GAMMA);
            let rc = loss::rc_dice_loss(y, p, DEFAULT_GAMMA);
            assert!((d - dice_oracle(yf, p, DEFAULT_GAMMA)).abs() <= 1e-12, "dice y={y} p={p}");
            assert!((rc - rc_dice_oracle(yf, p, DEFAULT_GAMMA)).abs() <= 1e-12, "rc y={y} p={p}");
        }
    }
}

#[test]
fn worked_values() {
    let g = DEFAULT_GAMMA;
    assert_eq!(loss::dice_loss(true, 1.0, g), 0.0);
    assert_eq!(loss::dice_loss(false, 0.0, g), 0.0);
    assert!((loss::dice_loss(false, 0.1, g) - (1.0 - 1e-6 / 0.010001)).abs() < 1e-15);
    assert!((loss::dice_loss(true, -1.0, g) - 4.0 / (2.0 + g)).abs() < 1e-15);
    assert!((loss::rc_dice_loss(false, -1.0, g) - 1e-12 / (1.0 + g)).abs() < 1e-24);
    assert!((loss::rc_dice_loss(false, 0.1, g) - 1e-12 / 0.010001).abs() < 1e-22);
    assert_eq!(loss::rc_dice_loss(false, 1.0, g), loss::dice_loss(false, 1.0, g));
    // the branch boundary belongs to the Dice side
    assert_eq!(loss::rc_dice_loss(false, 0.5, g), loss::dice_loss(false, 0.5, g));
    assert_eq!(loss::rc_dice_loss(true, -1.0, g), loss::dice_loss(true, -1.0, g));
}

#[test]
fn cross_entropy_values() {
    assert!((loss::bce_loss(true, 0.5) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!((loss::bce_loss(false, 0.25) + (0.75f64).ln()).abs() < 1e-15);
    // clamped away from log(0)
    assert!((loss::bce_loss(true, 0.0) + (1e-12f64).ln()).abs() < 1e-9);
    let (l, g) = mrca_core::LossKind::BceSigmoid.cell(true, 0.3, DEFAULT_GAMMA);
    let q = 1.0 / (1.0 + (-0.3f64).exp());
    assert!((l + q.ln()).abs() < 1e-14);
    assert!((g - (q - 1.0)).abs() < 1e-14);
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Single-unit LSTM over rows of `x` with weights `w[gate][input]`,
/// `r[gate]`, `b[gate]` in input/forget/candidate/output order.
fn scalar_lstm(x: &[Vec<f64>], w: &[Vec<f64>; 4], r: [f64; 4], b: [f64; 4]) -> Vec<f64> {
    let (mut h, mut c) = (0.0, 0.0);
    let mut out = Vec::new();
    for row in x {
        let z: Vec<f64> = (0..4).map(|k| b[k] + r[k] * h + row.iter().zip(&w[k]).map(|(a, b)| a * b).sum::<f64>()).collect();
        let (i, f, g, o) = (sigmoid(z[0]), sigmoid(z[1]), z[2].tanh(), sigmoid(z[3]));
        c = f * c + i * g;
        h = o * c.tanh();
        out.push(h);
    }
    out
}

#[test]
fn lstm_matches_scalar_trace() {
    let shape = Shape { embed_dim: 1, hidden: 1, seq_len: 4, relations: 1, pool: 1, stride: 1, head: Head::Linear };
    let mut params = ModelParams::zeros(shape);
    let w = [vec![0.3, -0.2, 0.1], vec![0.5, 0.4, -0.3], vec![-0.7, 0.2, 0.6], vec![0.1, 0.1, 0.9]];
    let r = [0.2, -0.4, 0.8, 0.5];
    let b = [0.05, 1.0, -0.1, 0.0];
    for (k, col) in w.iter().enumerate() {
        for (j, &v) in col.iter().enumerate() {
            params.forward.w_in.set(j, k, v);
        }
        params.forward.w_rec.set(0, k, r[k]);
        params.forward.bias[k] = b[k];
    }
    let rows = vec![vec![0.5, 3.0, 3.0], vec![-1.0, -3.0, 0.0], vec![0.25, -3.0, -3.0], vec![0.0, 0.0, 0.0]];
    let x = Matrix::from_fn(4, 3, |t, c| rows[t][c]);

    let (h, _) = lstm_forward(&params.forward, &x, Direction::Forward).unwrap();
    let expected = scalar_lstm(&rows, &w, r, b);
    for t in 0..4 {
        assert!((h.get(t, 0) - expected[t]).abs() < 1e-14, "t={t}");
    }

    let (h, _) = lstm_forward(&params.forward, &x, Direction::Backward).unwrap();
    let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
    let mut expected = scalar_lstm(&reversed, &w, r, b);
    expected.reverse();
    for t in 0..4 {
        assert!((h.get(t, 0) - expected[t]).abs() < 1e-14, "t={t}");
    }
}

#[test]
fn full_forward_matches_hand_composition() {
    // zero LSTM weights leave h = 0.5 * tanh(0.5 * tanh(0)) = 0 everywhere,
    // so the score is the dense bias alone
    let shape = Shape { embed_dim: 2, hidden: 2, seq_len: 6, relations: 3, pool: 2, stride: 2, head: Head::Linear };
    let mut params = ModelParams::zeros(shape);
    params.dense_b = vec![0.25, -1.0, 0.75];
    let store = EmbeddingStore::from_entries([("a", vec![0.1, 0.2])]).unwrap();
    let x = store.encode_sentence(&["A", "a"], &[Span::new(0, 1)], &[], 6).unwrap();
    assert_eq!(network::infer(&params, &x).unwrap(), vec![0.25, -1.0, 0.75]);

    // a bias on the candidate and input gates gives a constant-input recurrence
    // whose pooled mean feeds one dense weight
    let mut params = ModelParams::zeros(Shape { relations: 1, ..shape });
    for lstm in [&mut params.forward, &mut params.backward] {
        lstm.bias = vec![10.0, 10.0, -10.0, -10.0, 1.0, 1.0, 10.0, 10.0];
    }
    params.dense_w.set(0, 0, 1.0);
    let (i, g, o) = (sigmoid(10.0), 1.0f64.tanh(), sigmoid(10.0));
    let f = sigmoid(-10.0);
    let mut c = 0.0;
    let mut h = Vec::new();
    for _ in 0..6 {
        c = f * c + i * g;
        h.push(o * c.tanh());
    }
    let score = network::infer(&params, &x).unwrap()[0];
    assert!((score - (h[0] + h[1]) / 2.0).abs() < 1e-14);
}

#[test]
fn dropout_mask_values() {
    let shape = Shape { embed_dim: 2, hidden: 3, seq_len: 6, relations: 2, pool: 2, stride: 2, head: Head::Linear };
    let params = ModelParams::init(3, shape).unwrap();
    let store = EmbeddingStore::from_entries([("a", vec![0.1, 0.2])]).unwrap();
    let x = store.encode_sentence(&["a", "a", "a"], &[], &[], 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, cache) = network::forward(&params, &x, Some(Dropout { rate: 0.15, rng: &mut rng })).unwrap();
    let mask = cache.dropout_mask().unwrap();
    assert_eq!(mask.len(), shape.flat_dim());
    assert!(mask.iter().all(|&m| m == 0.0 || m == 1.0 / 0.85));
    let (_, cache) = network::forward(&params, &x, None).unwrap();
    assert!(cache.dropout_mask().is_none());
}

/// Scalar Adam with the same constants, written from the textbook update.
fn adam_oracle(p0: f64, grads: &[f64], cfg: &TrainConfig) -> f64 {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-7);
    let (mut p, mut m, mut v) = (p0, 0.0, 0.0);
    for (k, g) in grads.iter().enumerate() {
        let t = (k + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        let lr = cfg.learning_rate / (1.0 + cfg.decay * t as f64);
        p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    p
}

#[test]
fn adam_matches_scalar_oracle() {
    let shape = Shape { embed_dim: 1, hidden: 1, seq_len: 2, relations: 2, pool: 1, stride: 1, head: Head::Linear };
    let cfg = TrainConfig { decay: 0.01, ..TrainConfig::default() };
    let mut params = ModelParams::init(9, shape).unwrap();
    let start = params.clone();
    let mut state = AdamState::new(shape);
    let steps: Vec<ModelParams> = (0..4)
        .map(|s| {
            let mut g = ModelParams::zeros(shape);
            for (ti, (_, t)) in g.tensors_mut().into_iter().enumerate() {
                for (i, x) in t.iter_mut().enumerate() {
                    *x = ((ti * 7 + i * 3 + s * 5) % 11) as f64 / 5.0 - 1.0;
                }
            }
            g
        })
        .collect();
    for g in &steps {
        adam_step(&mut params, g, &mut state, &cfg).unwrap();
    }
    assert_eq!(state.t, 4);
    for ti in 0..8 {
        for i in 0..start.tensors()[ti].1.len() {
            let grads: Vec<f64> = steps.iter().map(|g| g.tensors()[ti].1[i]).collect();
            let expected = adam_oracle(start.tensors()[ti].1[i], &grads, &cfg);
            assert!((params.tensors()[ti].1[i] - expected).abs() < 1e-14, "tensor {ti} index {i}");
        }
    }
}

#[test]
fn adam_rejects_non_finite_gradients() {
    let shape = Shape { embed_dim: 1, hidden: 1, seq_len: 2, relations: 1, pool: 1, stride: 1, head: Head::Linear };
    let mut params = ModelParams::init(1, shape).unwrap();
    let mut g = ModelParams::zeros(shape);
    g.dense_b[0] = f64::NAN;
    let err = adam_step(&mut params, &g, &mut AdamState::new(shape), &TrainConfig::default()).unwrap_err();
    assert_eq!(err, mrca_core::Error::NonFinite { tensor: "dense.bias" });
}

#[test]
fn reference_parameter_counts() {
    // 2 × [(302 + 500 + 1) · 2000] + 11 · 1000 · |P| + |P|
    assert_eq!(Shape::reference(300, 216).param_count(), 2 * 803 * 2000 + 11_000 * 216 + 216);
    assert_eq!(Shape::reference(300, 216).param_count(), 5_588_216);
    assert_eq!(Shape::reference(300, 24).param_count(), 3_476_024);
    assert_eq!(Shape::reference(300, 216).flat_dim(), 11_000);
}
