//! Micro-averaged precision, recall and F1 over (sentence, relation) cells.

use alloc::vec::Vec;
use core::fmt;

use crate::data::LabeledExample;
use crate::embedding::EmbeddingStore;
use crate::error::{check_len, Error, Result};
use crate::network::{self, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_examples: usize,
}

impl EvalReport {
    /// Zero denominators yield 0 rather than NaN.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, n_examples: usize) -> Self {
        let ratio = |a: usize, b: usize| if b > 0 { a as f64 / b as f64 } else { 0.0 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { tp, fp, fn_, precision, recall, f1, n_examples }
    }

    /// Metric name → value pairs, for machine-readable output.
    pub fn metrics(&self) -> [(&'static str, f64); 7] {
        [
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("tp", self.tp as f64),
            ("fp", self.fp as f64),
            ("fn", self.fn_ as f64),
            ("examples", self.n_examples as f64),
        ]
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9}", "metric", "value")?;
        writeln!(f, "{:<10} {:>9.4}", "precision", self.precision)?;
        writeln!(f, "{:<10} {:>9.4}", "recall", self.recall)?;
        writeln!(f, "{:<10} {:>9.4}", "f1", self.f1)?;
        write!(f, "{:<10} {:>9}  (tp {} / fp {} / fn {})", "examples", self.n_examples, self.tp, self.fp, self.fn_)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
    n: usize,
}

impl Counts {
    fn add(&mut self, predicted: &[bool], gold: &[bool]) -> Result<()> {
        check_len("label vector", gold.len(), predicted.len())?;
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p, g) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => {}
            }
        }
        self.n += 1;
        Ok(())
    }

    fn report(self) -> EvalReport {
        EvalReport::from_counts(self.tp, self.fp, self.fn_, self.n)
    }
}

pub fn micro_prf<P: AsRef<[bool]>, G: AsRef<[bool]>>(predictions: &[P], gold: &[G]) -> Result<EvalReport> {
    check_len("example count", gold.len(), predictions.len())?;
    let mut counts = Counts::default();
    for (p, g) in predictions.iter().zip(gold) {
        counts.add(p.as_ref(), g.as_ref())?;
    }
    Ok(counts.report())
}

/// Anything that produces comparable per-relation values for an example.
/// Values are compared against the decision threshold as-is.
pub trait Scorer {
    fn relations(&self) -> usize;
    fn score(&self, example: &LabeledExample, store: &EmbeddingStore) -> Result<Vec<f64>>;
}

impl Scorer for ModelParams {
    fn relations(&self) -> usize {
        self.shape.relations
    }

    /// Inference-mode scores passed through the model's output head.
    fn score(&self, example: &LabeledExample, store: &EmbeddingStore) -> Result<Vec<f64>> {
        let x = store.encode_sentence(&example.tokens, &example.subjects, &example.objects, self.shape.seq_len)?;
        let mut scores = network::infer(self, &x)?;
        scores.iter_mut().for_each(|s| *s = self.shape.head.activate(*s));
        Ok(scores)
    }
}

/// Scores, thresholds and counts every example of `split`.
pub fn evaluate_model<S: Scorer + ?Sized>(
    model: &S,
    split: &[LabeledExample],
    store: &EmbeddingStore,
    threshold: f64,
) -> Result<EvalReport> {
    let mut counts = Counts::default();
    for ex in split {
        check_len("relation count", model.relations(), ex.labels.len())?;
        let scores = model.score(ex, store)?;
        counts.add(&network::predict(&scores, threshold), &ex.labels)?;
    }
    Ok(counts.report())
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    pub stdev: f64,
}

impl Summary {
    /// Sample (n − 1) deviation; 0 for a single value.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("run list"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stdev = if values.len() > 1 {
            libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        } else {
            0.0
        };
        Ok(Self { mean, stdev })
    }
}

/// Renders `mean_{stdev}` in percent, e.g. `93.35_{0.29}`.
impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}_{{{:.2}}}", self.mean * 100.0, self.stdev * 100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunAggregate {
    pub runs: usize,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
}

pub fn aggregate_runs(reports: &[EvalReport]) -> Result<RunAggregate> {
    let pick = |f: fn(&EvalReport) -> f64| Summary::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(RunAggregate {
        runs: reports.len(),
        precision: pick(|r| r.precision)?,
        recall: pick(|r| r.recall)?,
        f1: pick(|r| r.f1)?,
    })
}

impl fmt::Display for RunAggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "runs {}  precision {}  recall {}  f1 {}", self.runs, self.precision, self.recall, self.f1)
    }
}
