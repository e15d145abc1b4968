use mrca_core::data::batch_indices;
use mrca_core::eval::micro_prf;
use mrca_core::loss::{self, DEFAULT_GAMMA};
use mrca_core::network::{avg_pool, avg_pool_backward, pooled_len};
use mrca_core::train::{EarlyStopping, TrainConfig, Verdict};
use mrca_core::{Dataset, EmbeddingStore, Head, Matrix, ModelParams, RawExample, Shape, Span};
use proptest::prelude::*;

fn store_strategy() -> impl Strategy<Value = EmbeddingStore> {
    (1usize..5).prop_flat_map(|d| {
        prop::collection::vec(("[a-z]{1,4}", prop::collection::vec(-3.0f64..3.0, d)), 1..12)
            .prop_map(|entries| EmbeddingStore::from_entries(entries).unwrap())
    })
}

fn token() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z]{1,5}", "[A-Z][a-z]{0,4}", "[0-9]{1,3}", "[.,;!?]", "[A-Za-z0-9éß]{1,6}"]
}

proptest! {
    #[test]
    fn pooled_length_law(len in 1usize..300, pool in 1usize..300, stride in 1usize..20) {
        prop_assume!(pool <= len);
        prop_assert_eq!(pooled_len(len, pool, stride).unwrap(), (len - pool) / stride + 1);
        let x = Matrix::zeros(len, 2);
        prop_assert_eq!(avg_pool(&x, pool, stride).unwrap().rows(), (len - pool) / stride + 1);
    }

    #[test]
    fn pooling_is_adjoint(
        (len, pool, stride) in (1usize..20).prop_flat_map(|l| (Just(l), 1..=l, 1usize..5)),
        seed in any::<u64>(),
    ) {
        let val = |i: usize, j: usize, s: u64| (((i * 31 + j * 7) as u64 ^ s) % 97) as f64 / 97.0 - 0.5;
        let x = Matrix::from_fn(len, 3, |i, j| val(i, j, seed));
        let out_rows = pooled_len(len, pool, stride).unwrap();
        let g = Matrix::from_fn(out_rows, 3, |i, j| val(i, j, seed.rotate_left(7)));
        let y = avg_pool(&x, pool, stride).unwrap();
        let back = avg_pool_backward(&g, len, pool, stride).unwrap();
        let lhs: f64 = y.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.as_slice().iter().zip(back.as_slice()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn encoder_feature_columns(
        store in store_strategy(),
        tokens in prop::collection::vec(token(), 1..30),
        seq_len in 1usize..40,
        spans in prop::collection::vec((0usize..30, 1usize..4, any::<bool>()), 0..5),
    ) {
        let n = tokens.len();
        let (mut subjects, mut objects) = (Vec::new(), Vec::new());
        for (start, width, is_subject) in spans {
            if start < n {
                let span = Span::new(start, (start + width).min(n));
                if is_subject { subjects.push(span) } else { objects.push(span) }
            }
        }
        let v = store.boost();
        let d = store.dim();
        let enc = store.encode_sentence(&tokens, &subjects, &objects, seq_len).unwrap();
        prop_assert_eq!(enc.valid_len, n.min(seq_len));
        prop_assert_eq!((enc.matrix.rows(), enc.matrix.cols()), (seq_len, d + 2));
        for r in 0..seq_len {
            let row = enc.matrix.row(r);
            if r < enc.valid_len {
                prop_assert!(row[d] == v || row[d] == -v);
                let upper = tokens[r].chars().next().unwrap().is_uppercase();
                prop_assert_eq!(row[d] == v, upper || v == 0.0);
                prop_assert!(row[d + 1] == v || row[d + 1] == -v || row[d + 1] == 0.0);
                let expected = if subjects.iter().any(|s| s.contains(r)) {
                    v
                } else if objects.iter().any(|s| s.contains(r)) {
                    -v
                } else {
                    0.0
                };
                prop_assert_eq!(row[d + 1], expected);
                prop_assert_eq!(row[..d].to_vec(), store.lookup(&tokens[r]));
            } else {
                prop_assert!(row.iter().all(|&x| x == 0.0));
            }
        }
        for (w, vec) in store.iter() {
            prop_assert!(vec.iter().all(|&x| x <= v), "{} exceeds boost", w);
        }
    }

    #[test]
    fn lookup_is_total(store in store_strategy(), word in "\\PC{0,8}") {
        let v = store.lookup(&word);
        prop_assert_eq!(v.len(), store.dim());
        prop_assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn micro_counts_and_permutation(
        rows in prop::collection::vec(prop::collection::vec((any::<bool>(), any::<bool>()), 4), 1..20),
        shift in 0usize..20,
    ) {
        let pred: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|c| c.0).collect()).collect();
        let gold: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|c| c.1).collect()).collect();
        let r = micro_prf(&pred, &gold).unwrap();
        let gold_pos = gold.iter().flatten().filter(|&&g| g).count();
        let pred_pos = pred.iter().flatten().filter(|&&p| p).count();
        prop_assert_eq!(r.tp + r.fn_, gold_pos);
        prop_assert_eq!(r.tp + r.fp, pred_pos);
        for m in [r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
        if r.precision + r.recall > 0.0 {
            prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() < 1e-12);
        }
        let k = shift % pred.len();
        let (mut p2, mut g2) = (pred.clone(), gold.clone());
        p2.rotate_left(k);
        g2.rotate_left(k);
        for row in p2.iter_mut().chain(g2.iter_mut()) {
            row.rotate_right(shift % 4);
        }
        prop_assert_eq!(micro_prf(&p2, &g2).unwrap(), r);
    }

    #[test]
    fn suppressed_negatives_stay_below_gamma(p in -10.0f64..0.4999, gamma in 1e-9f64..1e-2) {
        let rc = loss::rc_dice_loss(false, p, gamma);
        prop_assert!(rc > 0.0 && rc <= gamma);
    }

    #[test]
    fn rc_equals_dice_off_branch(p in -10.0f64..10.0, y in any::<bool>()) {
        prop_assume!(y || p >= 0.5);
        prop_assert_eq!(loss::rc_dice_loss(y, p, DEFAULT_GAMMA), loss::dice_loss(y, p, DEFAULT_GAMMA));
    }

    #[test]
    fn effective_lr_strictly_decreasing(t in 0u64..1_000_000, decay in 1e-9f64..1.0) {
        let cfg = TrainConfig { decay, ..TrainConfig::default() };
        prop_assert!(cfg.effective_lr(t + 1) < cfg.effective_lr(t));
    }

    #[test]
    fn batches_partition_the_split(len in 1usize..200, bs in 1usize..50, seed in any::<u64>()) {
        let b = batch_indices(len, bs, seed).unwrap();
        prop_assert_eq!(b.len(), len.div_ceil(bs));
        prop_assert!(b[..b.len() - 1].iter().all(|c| c.len() == bs));
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        prop_assert_eq!(batch_indices(len, bs, seed).unwrap(), b);
    }

    #[test]
    fn early_stopping_keeps_the_best(scores in prop::collection::vec(0.0f64..1.0, 1..60), patience in 1usize..8) {
        let mut s = EarlyStopping::new(patience);
        let mut best: Option<(usize, f64)> = None;
        let mut seen = Vec::new();
        for (e, &f1) in scores.iter().enumerate() {
            seen.push(f1);
            match s.observe(f1) {
                Verdict::Improved => best = Some((e, f1)),
                Verdict::Continue => {}
                Verdict::Stop => break,
            }
        }
        let (_, b) = best.unwrap();
        prop_assert!(seen.iter().all(|&f| f <= b));
    }

    #[test]
    fn init_is_seed_determined(seed in any::<u64>()) {
        let shape = Shape { embed_dim: 2, hidden: 3, seq_len: 4, relations: 2, pool: 2, stride: 1, head: Head::Linear };
        let a = ModelParams::init(seed, shape).unwrap();
        prop_assert_eq!(&a, &ModelParams::init(seed, shape).unwrap());
        prop_assert_ne!(&a, &ModelParams::init(seed.wrapping_add(1), shape).unwrap());
        prop_assert!(a.forward.bias.iter().chain(&a.dense_b).all(|&b| b == 0.0));
        // recurrent kernels have orthonormal rows
        let w = &a.forward.w_rec;
        for i in 0..w.rows() {
            for j in 0..w.rows() {
                let dot: f64 = w.row(i).iter().zip(w.row(j)).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hidden_states_are_bounded(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let shape = Shape { embed_dim: 2, hidden: 3, seq_len: 5, relations: 2, pool: 2, stride: 1, head: Head::Linear };
        let mut p = ModelParams::init(seed, shape).unwrap();
        p.forward.w_in.as_mut_slice().iter_mut().for_each(|w| *w *= scale);
        let x = Matrix::from_fn(5, 4, |i, j| ((i + j) as f64 - 3.0) * scale);
        let (h, _) = mrca_core::network::lstm_forward(&p.forward, &x, mrca_core::network::Direction::Forward).unwrap();
        prop_assert!(h.as_slice().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn dataset_relations_sorted_and_labels_positive(
        sentences in prop::collection::vec(prop::collection::vec("[a-e]", 0..4), 1..10),
    ) {
        let raws: Vec<RawExample> = sentences
            .iter()
            .map(|rels| RawExample {
                tokens: vec!["x".into()],
                subjects: vec![Span::new(0, 1)],
                objects: vec![],
                relations: rels.clone(),
            })
            .collect();
        let built = Dataset::from_raw("p", raws, vec![], vec![]).unwrap();
        let ds = built.dataset;
        prop_assert!(ds.relations.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(ds.train.iter().all(|e| e.positives() >= 1));
        prop_assert_eq!(ds.train.len() + built.dropped_unlabeled, sentences.len());
    }
}
