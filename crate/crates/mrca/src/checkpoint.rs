//! Binary checkpoints.
//!
//! Layout: the 8-byte magic `MRCACKPT`, a little-endian `u32` version, a
//! little-endian `u64` header length, a JSON header, then every tensor as
//! little-endian `f64` values in header order. The header records the model
//! shape, relation vocabulary, embedding fingerprint and each tensor's name,
//! dimensions and offset, so a file can be checked before any value is used.

use std::fs;
use std::io::Write;
use std::path::Path;

use mrca_core::embedding::Fingerprint;
use mrca_core::{EmbeddingStore, Head, LossKind, ModelParams, Shape};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"MRCACKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub relations: Vec<String>,
    pub embeddings: Fingerprint,
    pub loss: LossKind,
    pub seed: u64,
    pub best_epoch: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ShapeHeader {
    embed_dim: usize,
    hidden: usize,
    seq_len: usize,
    relations: usize,
    pool: usize,
    stride: usize,
    head: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct FingerprintHeader {
    dim: usize,
    vocab_size: usize,
    boost: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct TensorHeader {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Header {
    shape: ShapeHeader,
    relations: Vec<String>,
    embeddings: FingerprintHeader,
    loss: String,
    seed: u64,
    best_epoch: usize,
    tensors: Vec<TensorHeader>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Data(format!("checkpoint: {}", msg.into()))
}

impl Checkpoint {
    pub fn shape(&self) -> Shape {
        self.params.shape
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.params.shape;
        let mut offset = 0;
        let tensors = shape
            .tensor_specs()
            .iter()
            .map(|&(name, rows, cols)| {
                let t = TensorHeader { name: name.to_owned(), rows, cols, offset };
                offset += rows * cols;
                t
            })
            .collect();
        let header = Header {
            shape: ShapeHeader {
                embed_dim: shape.embed_dim,
                hidden: shape.hidden,
                seq_len: shape.seq_len,
                relations: shape.relations,
                pool: shape.pool,
                stride: shape.stride,
                head: shape.head.name().to_owned(),
            },
            relations: self.relations.clone(),
            embeddings: FingerprintHeader {
                dim: self.embeddings.dim,
                vocab_size: self.embeddings.vocab_size,
                boost: self.embeddings.boost,
            },
            loss: self.loss.name().to_owned(),
            seed: self.seed,
            best_epoch: self.best_epoch,
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + json.len() + 8 * offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in self.params.tensors() {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if header_len > body.len() {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..header_len]).map_err(|e| bad(e.to_string()))?;
        let head = Head::parse(&header.shape.head).ok_or_else(|| bad(format!("unknown head `{}`", header.shape.head)))?;
        let loss = LossKind::parse(&header.loss).ok_or_else(|| bad(format!("unknown loss `{}`", header.loss)))?;
        let s = &header.shape;
        let shape = Shape {
            embed_dim: s.embed_dim,
            hidden: s.hidden,
            seq_len: s.seq_len,
            relations: s.relations,
            pool: s.pool,
            stride: s.stride,
            head,
        };
        shape.validate().map_err(|e| bad(e.to_string()))?;
        if header.relations.len() != shape.relations {
            return Err(bad(format!(
                "{} relation names for {} outputs",
                header.relations.len(),
                shape.relations
            )));
        }
        let data = &body[header_len..];
        let mut tensors = Vec::with_capacity(8);
        let mut expected_offset = 0;
        let specs = shape.tensor_specs();
        if header.tensors.len() != specs.len() {
            return Err(bad(format!("expected {} tensors, found {}", specs.len(), header.tensors.len())));
        }
        for (t, &(name, rows, cols)) in header.tensors.iter().zip(&specs) {
            if t.name != name || t.rows != rows || t.cols != cols || t.offset != expected_offset {
                return Err(bad(format!("tensor `{}` does not match the model shape", t.name)));
            }
            let len = rows * cols;
            let range = 8 * t.offset..8 * (t.offset + len);
            let raw = data.get(range).ok_or_else(|| bad(format!("tensor `{name}` is truncated")))?;
            let values: Vec<f64> =
                raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            if values.iter().any(|x| !x.is_finite()) {
                return Err(bad(format!("tensor `{name}` holds non-finite values")));
            }
            tensors.push(values);
            expected_offset += len;
        }
        if data.len() != 8 * expected_offset {
            return Err(bad(format!("{} trailing bytes", data.len() as isize - 8 * expected_offset as isize)));
        }
        let params = ModelParams::from_tensors(shape, tensors).map_err(|e| bad(e.to_string()))?;
        let e = &header.embeddings;
        Ok(Self {
            params,
            relations: header.relations,
            embeddings: Fingerprint { dim: e.dim, vocab_size: e.vocab_size, boost: e.boost },
            loss,
            seed: header.seed,
            best_epoch: header.best_epoch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(CliError::io(path))?;
        file.write_all(&self.to_bytes()).map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(CliError::io(path))?;
        Self::from_bytes(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Rejects an embedding table other than the one the model was trained on.
    pub fn check_embeddings(&self, store: &EmbeddingStore) -> Result<()> {
        let found = store.fingerprint();
        if found != self.embeddings {
            return Err(CliError::Data(format!(
                "embedding mismatch: checkpoint expects dim {} / {} words / boost {}, found dim {} / {} words / boost {}",
                self.embeddings.dim,
                self.embeddings.vocab_size,
                self.embeddings.boost,
                found.dim,
                found.vocab_size,
                found.boost
            )));
        }
        Ok(())
    }

    /// Rejects a corpus whose relation vocabulary differs from the model's.
    pub fn check_relations(&self, relations: &[String]) -> Result<()> {
        if relations == self.relations.as_slice() {
            return Ok(());
        }
        let first_diff = self.relations.iter().zip(relations).position(|(a, b)| a != b);
        let detail = match first_diff {
            Some(i) => format!("index {i} is `{}` in the checkpoint but `{}` in the corpus", self.relations[i], relations[i]),
            None => format!("checkpoint has {} relations, corpus has {}", self.relations.len(), relations.len()),
        };
        Err(CliError::Data(format!("relation vocabulary mismatch: {detail}")))
    }
}
