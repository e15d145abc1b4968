//! Plain-text word vectors: one `token x1 x2 … xd` entry per line.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use mrca_core::{EmbeddingStore, Error};

use crate::error::{CliError, Result};

/// Parses a word-vector stream. Blank lines are ignored; errors carry the
/// 1-based line number of the offending entry.
pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingStore, Error> {
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dim = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Malformed { line: line_no, reason: e.to_string() })?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let vector = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Malformed { line: line_no, reason: format!("`{f}` is not a number") })
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        let expected = *dim.get_or_insert(vector.len());
        if vector.is_empty() {
            return Err(Error::Malformed { line: line_no, reason: format!("`{word}` has no vector components") });
        }
        if vector.len() != expected {
            return Err(Error::Malformed {
                line: line_no,
                reason: format!("expected {expected} components, found {}", vector.len()),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Malformed { line: line_no, reason: "non-finite component".into() });
        }
        entries.push((word.to_owned(), vector));
    }
    EmbeddingStore::from_entries(entries)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let file = File::open(path).map_err(CliError::io(path))?;
    read_embeddings(BufReader::new(file)).map_err(CliError::core(path.display().to_string()))
}

/// Writes every entry in key order using the shortest round-tripping decimals.
pub fn write_embeddings<W: Write>(store: &EmbeddingStore, mut out: W) -> std::io::Result<()> {
    for (word, vector) in store.iter() {
        write!(out, "{word}")?;
        for x in vector {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}
