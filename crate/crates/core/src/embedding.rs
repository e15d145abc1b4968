//! Word-vector table and sentence feature encoding.
//!
//! Every token row is `vector ∥ case ∥ entity`. The two extra columns carry
//! `±v` where `v` is the ceiling of the largest entry anywhere in the table,
//! so the markers sit at the edge of the embedding value range.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Span;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Immutable word→vector table with its derived boost constant.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    vocab: BTreeMap<String, Vec<f64>>,
    chars: BTreeMap<char, Vec<f64>>,
    dim: usize,
    boost: f64,
}

/// Identity of an embedding table as recorded in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fingerprint {
    pub dim: usize,
    pub vocab_size: usize,
    pub boost: f64,
}

impl EmbeddingStore {
    /// Builds a store from `(word, vector)` pairs.
    ///
    /// Keys are lowercased; when two entries collide the first one is kept.
    /// Errors on an empty input, a zero-length vector, a dimension that
    /// differs from the first entry (reported with its 1-based position) or a
    /// non-finite component.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut vocab = BTreeMap::new();
        let mut dim = None;
        let mut max = f64::NEG_INFINITY;
        for (i, (word, vector)) in entries.into_iter().enumerate() {
            let line = i + 1;
            let expected = *dim.get_or_insert(vector.len());
            if vector.is_empty() {
                return Err(Error::Malformed { line, reason: "entry has no vector components".into() });
            }
            if vector.len() != expected {
                return Err(Error::Malformed {
                    line,
                    reason: alloc::format!("expected {expected} components, found {}", vector.len()),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Malformed { line, reason: "non-finite component".into() });
            }
            let key = word.as_ref().to_lowercase();
            if vocab.contains_key(&key) {
                continue;
            }
            max = vector.iter().copied().fold(max, f64::max);
            vocab.insert(key, vector);
        }
        let dim = dim.ok_or(Error::Empty("embedding source"))?;
        let chars = vocab
            .iter()
            .filter_map(|(k, v)| {
                let mut it = k.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Some((c, v.clone())),
                    _ => None,
                }
            })
            .collect();
        Ok(Self { vocab, chars, dim, boost: libm::ceil(max) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The boost constant `v = ceil(max entry)`.
    pub fn boost(&self) -> f64 {
        self.boost
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains_key(&word.to_lowercase())
    }

    /// Stored entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vocab.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint { dim: self.dim, vocab_size: self.vocab.len(), boost: self.boost }
    }

    /// Vector for `word`, falling back to the mean of its known character
    /// vectors, then to zeros. Total over all strings.
    pub fn lookup(&self, word: &str) -> Vec<f64> {
        let key = word.to_lowercase();
        if let Some(v) = self.vocab.get(&key) {
            return v.clone();
        }
        let mut sum = vec![0.0; self.dim];
        let mut hits = 0usize;
        for c in key.chars() {
            if let Some(v) = self.chars.get(&c) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                hits += 1;
            }
        }
        if hits > 0 {
            let n = hits as f64;
            sum.iter_mut().for_each(|s| *s /= n);
        }
        sum
    }

    /// `+v` for a token whose first character is uppercase, `-v` otherwise.
    pub fn case_feature(&self, word: &str) -> Result<f64> {
        let first = word.chars().next().ok_or(Error::Empty("token"))?;
        Ok(if first.is_uppercase() { self.boost } else { -self.boost })
    }

    /// `+v` inside any subject span, `-v` inside any object span, `0` elsewhere.
    /// Subject membership wins when a token belongs to both.
    pub fn entity_feature(&self, index: usize, subjects: &[Span], objects: &[Span]) -> f64 {
        entity_marker(index, subjects, objects, self.boost)
    }

    /// Encodes `tokens` into a `seq_len × (dim + 2)` matrix, truncating long
    /// sentences and zero-padding short ones.
    pub fn encode_sentence<S: AsRef<str>>(
        &self,
        tokens: &[S],
        subjects: &[Span],
        objects: &[Span],
        seq_len: usize,
    ) -> Result<EncodedSentence> {
        if tokens.is_empty() {
            return Err(Error::Empty("token list"));
        }
        if seq_len == 0 {
            return Err(Error::InvalidConfig("sequence length must be positive".into()));
        }
        let width = self.dim + 2;
        let valid_len = tokens.len().min(seq_len);
        let mut matrix = Matrix::zeros(seq_len, width);
        for (i, token) in tokens.iter().take(valid_len).enumerate() {
            let token = token.as_ref();
            let case = self.case_feature(token)?;
            let row = matrix.row_mut(i);
            row[..self.dim].copy_from_slice(&self.lookup(token));
            row[self.dim] = case;
            row[self.dim + 1] = self.entity_feature(i, subjects, objects);
        }
        Ok(EncodedSentence { matrix, valid_len })
    }
}

fn entity_marker(index: usize, subjects: &[Span], objects: &[Span], boost: f64) -> f64 {
    if subjects.iter().any(|s| s.contains(index)) {
        boost
    } else if objects.iter().any(|s| s.contains(index)) {
        -boost
    } else {
        0.0
    }
}

/// Padded feature matrix for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub matrix: Matrix,
    /// Number of leading rows holding real tokens.
    pub valid_len: usize,
}

impl EncodedSentence {
    pub fn seq_len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }
}
