//! Adam with inverse-time decay, the epoch loop, early stopping on
//! validation F1 and the multi-seed protocol.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{batch_indices, Dataset, LabeledExample};
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::eval::{aggregate_runs, evaluate_model, EvalReport, RunAggregate};
use crate::loss::{batch_loss, LossConfig, LossKind, Reduction};
use crate::network::{self, Dropout, Head, ModelParams, Shape};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-7;

/// Samples per gradient-reduction chunk. Chunks are summed in index order, so
/// results do not depend on how many threads process them.
const REDUCE_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Inverse-time decay per optimizer step: `lr / (1 + decay * t)`.
    pub decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub gamma: f64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0015,
            decay: 3e-5,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            dropout: 0.15,
            seed: 0,
            loss: LossKind::RcDice,
            gamma: crate::loss::DEFAULT_GAMMA,
            threshold: crate::loss::THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return bad("decay must be non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, epochs and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience cannot exceed the epoch limit");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite");
        }
        self.loss_config().validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig { kind: self.loss, gamma: self.gamma, reduction: Reduction::Mean }
    }

    /// Output head matching the configured loss.
    pub fn head(&self) -> Head {
        match self.loss {
            LossKind::BceSigmoid => Head::Sigmoid,
            LossKind::RcDice | LossKind::Dice => Head::Linear,
        }
    }

    /// Learning rate used by optimizer step `t` (1-based).
    pub fn effective_lr(&self, t: u64) -> f64 {
        self.learning_rate / (1.0 + self.decay * t as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: Shape) -> Self {
        Self { m: ModelParams::zeros(shape), v: ModelParams::zeros(shape), t: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ModelParams, grads: &ModelParams, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if grads.shape != params.shape || state.m.shape != params.shape {
        return Err(Error::InvalidConfig("gradient and parameter shapes differ".into()));
    }
    if let Some(tensor) = grads.first_non_finite() {
        return Err(Error::NonFinite { tensor });
    }
    state.t += 1;
    let lr = cfg.effective_lr(state.t);
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(ADAM_BETA1, t);
    let c2 = 1.0 - libm::pow(ADAM_BETA2, t);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()));
    for (((_, p), (_, g)), ((_, m), (_, v))) in tensors {
        for i in 0..p.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (libm::sqrt(v[i] / c2) + ADAM_EPSILON);
        }
    }
    match params.first_non_finite() {
        Some(tensor) => Err(Error::NonFinite { tensor }),
        None => Ok(()),
    }
}

#[cfg(feature = "parallel")]
fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_ordered<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Mean batch loss and summed gradients for one batch. `dropout_seeds[i]`
/// seeds sample `i`'s dropout mask.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &[&LabeledExample],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
    dropout_seeds: &[u64],
) -> Result<(f64, ModelParams)> {
    crate::error::check_len("dropout seeds", batch.len(), dropout_seeds.len())?;
    let seq_len = params.shape.seq_len;
    let jobs: Vec<(&LabeledExample, u64)> = batch.iter().copied().zip(dropout_seeds.iter().copied()).collect();
    let passes = map_ordered(&jobs, |&(ex, seed)| {
        let x = store.encode_sentence(&ex.tokens, &ex.subjects, &ex.objects, seq_len)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dropout = (cfg.dropout > 0.0).then_some(Dropout { rate: cfg.dropout, rng: &mut rng });
        network::forward(params, &x, dropout).map(|(_, cache)| cache)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let labels: Vec<&[bool]> = batch.iter().map(|e| e.labels.as_slice()).collect();
    let scores: Vec<&[f64]> = passes.iter().map(|c| c.scores.as_slice()).collect();
    let loss = batch_loss(&labels, &scores, &cfg.loss_config())?;

    let chunks: Vec<usize> = (0..batch.len()).step_by(REDUCE_CHUNK).collect();
    let partials = map_ordered(&chunks, |&start| {
        let mut grads = ModelParams::zeros(params.shape);
        for i in start..(start + REDUCE_CHUNK).min(batch.len()) {
            network::backward_into(params, &passes[i], &loss.grad[i], &mut grads)?;
        }
        Ok(grads)
    });
    let mut total: Option<ModelParams> = None;
    for part in partials {
        let part = part?;
        match total.as_mut() {
            Some(t) => t.add_assign(&part)?,
            None => total = Some(part),
        }
    }
    Ok((loss.value, total.expect("batch is non-empty")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub mean_loss: f64,
    pub batches: usize,
}

/// One pass over `split` in a seeded shuffled order, one Adam step per batch.
pub fn train_epoch(
    params: &mut ModelParams,
    adam: &mut AdamState,
    split: &[LabeledExample],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EpochSummary> {
    if split.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let batches = batch_indices(split.len(), cfg.batch_size, rng.next_u64())?;
    let mut total = 0.0;
    for idx in &batches {
        let batch: Vec<&LabeledExample> = idx.iter().map(|&i| &split[i]).collect();
        let seeds: Vec<u64> = (0..batch.len()).map(|_| rng.next_u64()).collect();
        let (loss, grads) = batch_gradients(params, &batch, store, cfg, &seeds)?;
        adam_step(params, &grads, adam, cfg)?;
        total += loss;
    }
    Ok(EpochSummary { mean_loss: total / batches.len() as f64, batches: batches.len() })
}

/// Patience-based stopping on a maximized metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, since_best: 0 }
    }

    /// Only a strict improvement resets the counter.
    pub fn observe(&mut self, metric: f64) -> Verdict {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.since_best = 0;
            Verdict::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: EvalReport,
    /// Learning rate in effect after the epoch's last step.
    pub lr: f64,
    pub elapsed_ms: u64,
}

/// Hooks into the training loop. Every method has a no-op default.
pub trait Observer {
    /// Monotonic milliseconds; used only for reporting.
    fn now_ms(&self) -> u64 {
        0
    }

    fn on_run_start(&mut self, _run: usize, _seed: u64) {}

    fn on_epoch(&mut self, _record: &EpochRecord) {}
}

impl Observer for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    /// Parameters from the epoch with the highest validation F1.
    pub best: ModelParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl FitOutcome {
    pub fn best_f1(&self) -> f64 {
        self.history[self.best_epoch - 1].validation.f1
    }
}

/// Trains from `params` until validation F1 stalls for `patience` epochs or
/// `max_epochs` is reached, returning the best-scoring parameters.
pub fn fit(
    mut params: ModelParams,
    train: &[LabeledExample],
    validation: &[LabeledExample],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
    observer: &mut dyn Observer,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let mut adam = AdamState::new(params.shape);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ TRAIN_STREAM);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let start = observer.now_ms();
        let summary = train_epoch(&mut params, &mut adam, train, store, cfg, &mut rng)?;
        let val = evaluate_model(&params, validation, store, cfg.threshold)?;
        let record = EpochRecord {
            epoch,
            train_loss: summary.mean_loss,
            validation: val,
            lr: cfg.effective_lr(adam.t),
            elapsed_ms: observer.now_ms().saturating_sub(start),
        };
        observer.on_epoch(&record);
        history.push(record);
        match stopper.observe(val.f1) {
            Verdict::Improved => {
                best.clone_from(&params);
                best_epoch = epoch;
            }
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    Ok(FitOutcome { best, best_epoch, history })
}

// Keeps the shuffle/dropout stream distinct from the initialization stream of the same seed.
const TRAIN_STREAM: u64 = 0x5eed_0f7a_1000_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub fit: FitOutcome,
    pub test: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRun {
    pub runs: Vec<RunResult>,
    pub aggregate: RunAggregate,
}

/// Runs [`fit`] with seeds `cfg.seed + i` and scores each best checkpoint on
/// the test split.
pub fn multi_run(
    dataset: &Dataset,
    store: &EmbeddingStore,
    shape: Shape,
    cfg: &TrainConfig,
    n_runs: usize,
    observer: &mut dyn Observer,
) -> Result<MultiRun> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("at least one run is required".into()));
    }
    if dataset.test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let mut runs = Vec::with_capacity(n_runs);
    for i in 0..n_runs {
        let seed = cfg.seed.wrapping_add(i as u64);
        observer.on_run_start(i, seed);
        let run_cfg = TrainConfig { seed, ..*cfg };
        let init = ModelParams::init(seed, shape)?;
        let fit = fit(init, &dataset.train, &dataset.validation, store, &run_cfg, observer)?;
        let test = evaluate_model(&fit.best, &dataset.test, store, cfg.threshold)?;
        runs.push(RunResult { seed, fit, test });
    }
    let reports: Vec<EvalReport> = runs.iter().map(|r| r.test).collect();
    Ok(MultiRun { aggregate: aggregate_runs(&reports)?, runs })
}
