//! Seeded synthetic corpora with their own embedding tables.
//!
//! Each relation owns one or more trigger words. A positive relation appears
//! in a sentence as `Subject trigger Object`, with both entities capitalized
//! and marked by spans. Trigger vectors carry a unit component on a
//! dimension reserved for their relation, which every other word leaves at
//! zero, so relation presence is linearly separable from the summed input.
//! Optional decoys drop a trigger into filler text without entities around
//! it; those do not count as positives.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, RawExample, Span};
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub relations: usize,
    /// Sentences per split: train, validation, test.
    pub split_sizes: [usize; 3],
    pub min_positives: usize,
    pub max_positives: usize,
    /// Extra embedding dimensions beyond the one reserved per relation.
    pub extra_dims: usize,
    pub filler_words: usize,
    pub entity_names: usize,
    pub triggers_per_relation: usize,
    /// Filler tokens per sentence before relation segments are inserted.
    pub filler_len: (usize, usize),
    /// Relation frequency follows `1 / (rank + 1)^skew`; 0 is uniform.
    pub skew: f64,
    /// Probability that a sentence gets one decoy trigger.
    pub decoy_rate: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// 50 training sentences over 10 relations with no decoys.
    pub fn overfit_fixture(seed: u64) -> Self {
        Self {
            relations: 10,
            split_sizes: [50, 0, 0],
            min_positives: 1,
            max_positives: 3,
            extra_dims: 6,
            filler_words: 40,
            entity_names: 30,
            triggers_per_relation: 1,
            filler_len: (4, 10),
            skew: 0.0,
            decoy_rate: 0.0,
            seed,
        }
    }

    /// 500 sentences over 50 skewed relations, at most 3 positives each, with decoys.
    pub fn imbalanced_benchmark(seed: u64) -> Self {
        Self {
            relations: 50,
            split_sizes: [400, 50, 50],
            min_positives: 1,
            max_positives: 3,
            extra_dims: 14,
            filler_words: 120,
            entity_names: 80,
            triggers_per_relation: 2,
            filler_len: (5, 12),
            skew: 1.0,
            decoy_rate: 0.5,
            seed,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.relations + self.extra_dims
    }
}

pub struct SyntheticCorpus {
    pub store: EmbeddingStore,
    pub dataset: Dataset,
}

pub fn relation_name(j: usize) -> String {
    format!("rel_{j:03}")
}

fn trigger_word(j: usize, k: usize) -> String {
    format!("trig{j}x{k}")
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if cfg.relations == 0 || cfg.filler_words == 0 || cfg.entity_names < 2 || cfg.triggers_per_relation == 0 {
        return Err(Error::InvalidConfig("synthetic corpus needs relations, fillers, entities and triggers".into()));
    }
    if cfg.min_positives == 0 || cfg.min_positives > cfg.max_positives || cfg.max_positives > cfg.relations {
        return Err(Error::InvalidConfig("positives per sentence out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.embed_dim();
    let noise = Normal::new(0.0, 0.4).expect("valid normal");
    let dense = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v = alloc::vec![0.0; d];
        for x in v[cfg.relations..].iter_mut() {
            *x = noise.sample(rng);
        }
        v
    };

    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    for j in 0..cfg.relations {
        for k in 0..cfg.triggers_per_relation {
            let mut v = dense(&mut rng);
            v[j] = 1.0;
            entries.push((trigger_word(j, k), v));
        }
    }
    let fillers: Vec<String> = (0..cfg.filler_words).map(|i| format!("w{i}")).collect();
    let names: Vec<String> = (0..cfg.entity_names).map(|i| format!("Name{i}")).collect();
    for w in fillers.iter().chain(&names) {
        entries.push((w.clone(), dense(&mut rng)));
    }
    entries.push((String::from("."), dense(&mut rng)));
    let store = EmbeddingStore::from_entries(entries)?;

    let weights: Vec<f64> = (0..cfg.relations).map(|j| 1.0 / libm::pow((j + 1) as f64, cfg.skew)).collect();
    let picker = WeightedIndex::new(&weights).map_err(|_| Error::InvalidConfig("relation weights".into()))?;

    let sentence = |rng: &mut ChaCha8Rng| -> RawExample {
        let n_pos = rng.random_range(cfg.min_positives..=cfg.max_positives);
        let mut rels: Vec<usize> = Vec::with_capacity(n_pos);
        while rels.len() < n_pos {
            let j = picker.sample(rng);
            if !rels.contains(&j) {
                rels.push(j);
            }
        }
        let len = rng.random_range(cfg.filler_len.0..=cfg.filler_len.1);
        // chunks are either a single filler/decoy token or a relation segment
        let mut chunks: Vec<Vec<(String, u8)>> =
            (0..len).map(|_| alloc::vec![(fillers.choose(rng).expect("fillers").clone(), 0)]).collect();
        if rng.random_bool(cfg.decoy_rate) {
            let others: Vec<usize> = (0..cfg.relations).filter(|j| !rels.contains(j)).collect();
            if let Some(&j) = others.choose(rng) {
                let k = rng.random_range(0..cfg.triggers_per_relation);
                let at = rng.random_range(0..=chunks.len());
                chunks.insert(at, alloc::vec![(trigger_word(j, k), 0)]);
            }
        }
        for &j in &rels {
            let subject = names.choose(rng).expect("names").clone();
            let object = loop {
                let o = names.choose(rng).expect("names");
                if *o != subject {
                    break o.clone();
                }
            };
            let k = rng.random_range(0..cfg.triggers_per_relation);
            let seg = alloc::vec![(subject, 1), (trigger_word(j, k), 0), (object, 2)];
            let at = rng.random_range(0..=chunks.len());
            chunks.insert(at, seg);
        }
        chunks.push(alloc::vec![(String::from("."), 0)]);
        let mut tokens = Vec::new();
        let mut subjects = Vec::new();
        let mut objects = Vec::new();
        for (tok, role) in chunks.into_iter().flatten() {
            let i = tokens.len();
            match role {
                1 => subjects.push(Span::new(i, i + 1)),
                2 => objects.push(Span::new(i, i + 1)),
                _ => {}
            }
            tokens.push(tok);
        }
        RawExample { tokens, subjects, objects, relations: rels.into_iter().map(relation_name).collect() }
    };

    let mut splits: [Vec<RawExample>; 3] = Default::default();
    for (split, &n) in splits.iter_mut().zip(&cfg.split_sizes) {
        *split = (0..n).map(|_| sentence(&mut rng)).collect();
    }
    let [train, validation, test] = splits;
    // every relation keeps its index even if the sampler never drew it
    let all: Vec<String> = (0..cfg.relations).map(relation_name).collect();
    let built = Dataset::with_relations("synthetic", all, train, validation, test)?.dataset;
    Ok(SyntheticCorpus { store, dataset: built })
}
