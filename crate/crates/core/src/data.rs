//! Labeled sentences, relation vocabularies and dataset statistics.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A sentence with its entity spans and relation names, before binarization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExample {
    pub tokens: Vec<String>,
    pub subjects: Vec<Span>,
    pub objects: Vec<Span>,
    pub relations: Vec<String>,
}

/// A sentence with a binary label per relation of the owning dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub tokens: Vec<String>,
    pub subjects: Vec<Span>,
    pub objects: Vec<Span>,
    pub labels: Vec<bool>,
}

impl LabeledExample {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Train, SplitKind::Validation, SplitKind::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    /// Sorted, duplicate-free relation names; position is the label index.
    pub relations: Vec<String>,
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Outcome of binarizing raw splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Built {
    pub dataset: Dataset,
    /// Sentences dropped because they carried no relation.
    pub dropped_unlabeled: usize,
}

impl Dataset {
    /// Binarizes raw splits against the sorted union of their relation names.
    ///
    /// Duplicate spans and relations collapse. Sentences without any relation
    /// are dropped and counted. Spans outside the token range are rejected.
    pub fn from_raw(
        name: impl Into<String>,
        train: Vec<RawExample>,
        validation: Vec<RawExample>,
        test: Vec<RawExample>,
    ) -> Result<Built> {
        let relations: Vec<String> = train
            .iter()
            .chain(&validation)
            .chain(&test)
            .flat_map(|e| e.relations.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self::with_relations(name, relations, train, validation, test)
    }

    /// Like [`Dataset::from_raw`] but against a fixed vocabulary, which must be
    /// sorted and duplicate-free. A relation outside it is a malformed record.
    pub fn with_relations(
        name: impl Into<String>,
        relations: Vec<String>,
        train: Vec<RawExample>,
        validation: Vec<RawExample>,
        test: Vec<RawExample>,
    ) -> Result<Built> {
        if relations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("relation vocabulary must be sorted and duplicate-free".into()));
        }
        let mut dropped = 0;
        let mut convert = |split: Vec<RawExample>| -> Result<Vec<LabeledExample>> {
            let mut out = Vec::with_capacity(split.len());
            for (i, raw) in split.into_iter().enumerate() {
                if raw.relations.is_empty() {
                    dropped += 1;
                    continue;
                }
                out.push(binarize(&relations, raw, i + 1)?);
            }
            Ok(out)
        };
        let train = convert(train)?;
        let validation = convert(validation)?;
        let test = convert(test)?;
        Ok(Built {
            dataset: Dataset { name: name.into(), relations, train, validation, test },
            dropped_unlabeled: dropped,
        })
    }

    pub fn split(&self, kind: SplitKind) -> &[LabeledExample] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Validation => &self.validation,
            SplitKind::Test => &self.test,
        }
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Converts an example back to relation names.
    pub fn to_raw(&self, example: &LabeledExample) -> RawExample {
        RawExample {
            tokens: example.tokens.clone(),
            subjects: example.subjects.clone(),
            objects: example.objects.clone(),
            relations: example
                .labels
                .iter()
                .zip(&self.relations)
                .filter(|(&l, _)| l)
                .map(|(_, r)| r.clone())
                .collect(),
        }
    }

    /// Per-split statistics followed by the all-splits aggregate.
    pub fn stats(&self) -> DatasetStats {
        let per_split = SplitKind::ALL.map(|k| SplitStats::compute(self.relations.len(), self.split(k)));
        let all: Vec<&LabeledExample> = self.train.iter().chain(&self.validation).chain(&self.test).collect();
        DatasetStats { per_split, overall: SplitStats::compute_refs(self.relations.len(), &all) }
    }
}

fn binarize(relations: &[String], raw: RawExample, record: usize) -> Result<LabeledExample> {
    let n = raw.tokens.len();
    for span in raw.subjects.iter().chain(&raw.objects) {
        if span.is_empty() || span.end > n {
            return Err(Error::Malformed {
                line: record,
                reason: alloc::format!("span [{}, {}) outside sentence of {n} tokens", span.start, span.end),
            });
        }
    }
    let mut labels = alloc::vec![false; relations.len()];
    for r in &raw.relations {
        let idx = relations
            .binary_search(r)
            .map_err(|_| Error::Malformed { line: record, reason: alloc::format!("unknown relation `{r}`") })?;
        labels[idx] = true;
    }
    let dedup = |spans: Vec<Span>| spans.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    Ok(LabeledExample { tokens: raw.tokens, subjects: dedup(raw.subjects), objects: dedup(raw.objects), labels })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStats {
    pub relations: usize,
    pub sentences: usize,
    pub mean_positives: f64,
    /// Population standard deviation of positives per sentence.
    pub stdev_positives: f64,
    /// Fraction of sentences with three or more positives, in `[0, 1]`.
    pub share_three_plus: f64,
}

impl SplitStats {
    pub fn compute(relations: usize, examples: &[LabeledExample]) -> Self {
        let refs: Vec<&LabeledExample> = examples.iter().collect();
        Self::compute_refs(relations, &refs)
    }

    fn compute_refs(relations: usize, examples: &[&LabeledExample]) -> Self {
        let n = examples.len();
        if n == 0 {
            return Self { relations, sentences: 0, mean_positives: 0.0, stdev_positives: 0.0, share_three_plus: 0.0 };
        }
        let counts: Vec<f64> = examples.iter().map(|e| e.positives() as f64).collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n as f64;
        let three = counts.iter().filter(|&&c| c >= 3.0).count();
        Self {
            relations,
            sentences: n,
            mean_positives: mean,
            stdev_positives: libm::sqrt(var),
            share_three_plus: three as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    /// Indexed like [`SplitKind::ALL`].
    pub per_split: [SplitStats; 3],
    pub overall: SplitStats,
}

/// Shuffled index batches: a seeded permutation cut into consecutive chunks,
/// keeping the final partial chunk.
pub fn batch_indices(len: usize, batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if len == 0 {
        return Err(Error::Empty("split"));
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Shuffled batches of references into `split`.
pub fn batch_iter<T>(split: &[T], batch_size: usize, seed: u64) -> Result<impl Iterator<Item = Vec<&T>> + '_> {
    let batches = batch_indices(split.len(), batch_size, seed)?;
    Ok(batches.into_iter().map(move |b| b.into_iter().map(|i| &split[i]).collect()))
}
