//! Corpus formats.
//!
//! The canonical format is one JSON object per line with `tokens`,
//! `subjects`, `objects` (lists of `[start, end)` token index pairs) and
//! `relations`. A corpus directory holds `train.jsonl`, `validation.jsonl`,
//! `test.jsonl` and `relations.txt`, the last pinning label indices.
//!
//! The release importer reads records with `sentText` and a
//! `relationMentions` list of `{em1Text, em2Text, label}`, either as one JSON
//! array or one object per line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use mrca_core::{Dataset, Error, LabeledExample, RawExample, Span, SplitKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const RELATIONS_FILE: &str = "relations.txt";

/// Relation label that release files use for "no relation".
pub const NO_RELATION: &str = "None";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    CanonicalJsonl,
    CopyreJson,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "canonical-jsonl" => Some(Format::CanonicalJsonl),
            "copyre-json" => Some(Format::CopyreJson),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::CanonicalJsonl => "canonical-jsonl",
            Format::CopyreJson => "copyre-json",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    tokens: Vec<String>,
    subjects: Vec<[usize; 2]>,
    objects: Vec<[usize; 2]>,
    relations: Vec<String>,
}

impl From<Record> for RawExample {
    fn from(r: Record) -> Self {
        let spans = |v: Vec<[usize; 2]>| v.into_iter().map(|[a, b]| Span::new(a, b)).collect();
        RawExample { tokens: r.tokens, subjects: spans(r.subjects), objects: spans(r.objects), relations: r.relations }
    }
}

impl From<RawExample> for Record {
    fn from(r: RawExample) -> Self {
        let spans = |v: Vec<Span>| v.into_iter().map(|s| [s.start, s.end]).collect();
        Record { tokens: r.tokens, subjects: spans(r.subjects), objects: spans(r.objects), relations: r.relations }
    }
}

fn malformed(line: usize, e: impl ToString) -> Error {
    Error::Malformed { line, reason: e.to_string() }
}

/// Reads canonical records; blank lines are skipped but still counted.
pub fn read_canonical<R: BufRead>(reader: R) -> Result<Vec<RawExample>, Error> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| malformed(i + 1, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| malformed(i + 1, e))?;
        out.push(record.into());
    }
    Ok(out)
}

/// Writes one record per example and returns the count.
pub fn write_canonical<W: Write>(dataset: &Dataset, split: &[LabeledExample], mut out: W) -> std::io::Result<usize> {
    for ex in split {
        let line = serde_json::to_string(&Record::from(dataset.to_raw(ex)))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(split.len())
}

#[derive(Debug, Deserialize)]
struct ReleaseRecord {
    #[serde(rename = "sentText")]
    sent_text: String,
    #[serde(rename = "relationMentions", default)]
    relation_mentions: Vec<Mention>,
}

#[derive(Debug, Deserialize)]
struct Mention {
    #[serde(rename = "em1Text")]
    em1_text: String,
    #[serde(rename = "em2Text")]
    em2_text: String,
    label: String,
}

/// First occurrence of `needle` as a contiguous token run.
pub fn find_tokens(haystack: &[String], needle: &[&str]) -> Option<Span> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack
        .windows(needle.len())
        .position(|w| w.iter().zip(needle).all(|(a, b)| a == b))
        .map(|start| Span::new(start, start + needle.len()))
}

fn release_to_raw(record: ReleaseRecord) -> Option<RawExample> {
    let tokens: Vec<String> = record.sent_text.split_whitespace().map(str::to_owned).collect();
    let mut raw = RawExample { tokens, subjects: Vec::new(), objects: Vec::new(), relations: Vec::new() };
    for m in record.relation_mentions {
        if m.label == NO_RELATION {
            continue;
        }
        let em1: Vec<&str> = m.em1_text.split_whitespace().collect();
        let em2: Vec<&str> = m.em2_text.split_whitespace().collect();
        let subject = find_tokens(&raw.tokens, &em1)?;
        let object = find_tokens(&raw.tokens, &em2)?;
        raw.subjects.push(subject);
        raw.objects.push(object);
        raw.relations.push(m.label);
    }
    Some(raw)
}

/// Parsed release records plus the number skipped for unlocatable entities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleaseSplit {
    pub examples: Vec<RawExample>,
    pub skipped: usize,
}

/// Reads release records. Errors carry the 1-based record index.
pub fn read_release<R: Read>(mut reader: R) -> Result<ReleaseSplit, Error> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| malformed(0, e))?;
    let records: Vec<ReleaseRecord> = if text.trim_start().starts_with('[') {
        let values: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|e| malformed(0, e))?;
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| serde_json::from_value(v).map_err(|e| malformed(i + 1, format!("record {}: {e}", i + 1))))
            .collect::<Result<_, Error>>()?
    } else {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| malformed(i + 1, format!("record {}: {e}", i + 1))))
            .collect::<Result<_, Error>>()?
    };
    let total = records.len();
    let examples: Vec<RawExample> = records.into_iter().filter_map(release_to_raw).collect();
    Ok(ReleaseSplit { skipped: total - examples.len(), examples })
}

/// A dataset with the bookkeeping of how it was read.
#[derive(Debug, Clone, PartialEq)]
pub struct Imported {
    pub dataset: Dataset,
    /// Records skipped per split because an entity could not be located.
    pub skipped: [usize; 3],
    /// Records dropped because they carried no relation.
    pub dropped_unlabeled: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(CliError::io(path))
}

/// Imports three split files of the given format.
pub fn import_files(name: &str, paths: [&Path; 3], format: Format) -> Result<Imported> {
    let mut raws: [Vec<RawExample>; 3] = Default::default();
    let mut skipped = [0; 3];
    for (k, path) in paths.iter().enumerate() {
        let ctx = || path.display().to_string();
        match format {
            Format::CanonicalJsonl => raws[k] = read_canonical(open(path)?).map_err(CliError::core(ctx()))?,
            Format::CopyreJson => {
                let split = read_release(open(path)?).map_err(CliError::core(ctx()))?;
                raws[k] = split.examples;
                skipped[k] = split.skipped;
            }
        }
    }
    let [train, validation, test] = raws;
    let built = Dataset::from_raw(name, train, validation, test).map_err(CliError::core("building dataset"))?;
    Ok(Imported { dataset: built.dataset, skipped, dropped_unlabeled: built.dropped_unlabeled })
}

pub fn split_file(dir: &Path, kind: SplitKind) -> std::path::PathBuf {
    dir.join(format!("{}.jsonl", kind.name()))
}

/// Writes a canonical corpus directory, creating it if needed.
pub fn write_corpus_dir(dataset: &Dataset, dir: &Path) -> Result<[usize; 3]> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let vocab_path = dir.join(RELATIONS_FILE);
    let mut vocab = String::new();
    for r in &dataset.relations {
        vocab.push_str(r);
        vocab.push('\n');
    }
    fs::write(&vocab_path, vocab).map_err(CliError::io(&vocab_path))?;
    let mut counts = [0; 3];
    for (k, kind) in SplitKind::ALL.into_iter().enumerate() {
        let path = split_file(dir, kind);
        let file = File::create(&path).map_err(CliError::io(&path))?;
        counts[k] = write_canonical(dataset, dataset.split(kind), BufWriter::new(file)).map_err(CliError::io(&path))?;
    }
    Ok(counts)
}

/// Reads a canonical corpus directory. A missing split file reads as empty;
/// `relations.txt`, when present, fixes the label order.
pub fn read_corpus_dir(dir: &Path) -> Result<Dataset> {
    let mut raws: [Vec<RawExample>; 3] = Default::default();
    for (k, kind) in SplitKind::ALL.into_iter().enumerate() {
        let path = split_file(dir, kind);
        if path.exists() {
            raws[k] = read_canonical(open(&path)?).map_err(CliError::core(path.display().to_string()))?;
        }
    }
    let [train, validation, test] = raws;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into());
    let vocab_path = dir.join(RELATIONS_FILE);
    let built = if vocab_path.exists() {
        let text = fs::read_to_string(&vocab_path).map_err(CliError::io(&vocab_path))?;
        let vocab = text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect();
        Dataset::with_relations(name, vocab, train, validation, test)
    } else {
        Dataset::from_raw(name, train, validation, test)
    }
    .map_err(CliError::core(dir.display().to_string()))?;
    Ok(built.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn token_search_takes_first_match() {
        let t = toks("New York is in New York State");
        assert_eq!(find_tokens(&t, &["New", "York"]), Some(Span::new(0, 2)));
        assert_eq!(find_tokens(&t, &["York", "State"]), Some(Span::new(5, 7)));
        assert_eq!(find_tokens(&t, &["Boston"]), None);
        assert_eq!(find_tokens(&t, &[]), None);
    }

    #[test]
    fn release_record_unions_triples() {
        let text = r#"{"sentText": "A lives in B , C was born in B", "relationMentions": [
            {"em1Text": "A", "em2Text": "B", "label": "contains"},
            {"em1Text": "C", "em2Text": "B", "label": "place_lived"},
            {"em1Text": "A", "em2Text": "C", "label": "None"}]}"#;
        let split = read_release(format!("[{text}]").as_bytes()).unwrap();
        assert_eq!(split.skipped, 0);
        let ex = &split.examples[0];
        assert_eq!(ex.relations, ["contains", "place_lived"]);
        assert_eq!(ex.subjects, [Span::new(0, 1), Span::new(5, 6)]);
        assert_eq!(ex.objects, [Span::new(3, 4), Span::new(3, 4)]);
    }

    #[test]
    fn release_lines_and_skips() {
        let text = concat!(
            r#"{"sentText": "X met Y", "relationMentions": [{"em1Text": "X", "em2Text": "Y", "label": "met"}]}"#,
            "\n\n",
            r#"{"sentText": "X met Y", "relationMentions": [{"em1Text": "Q", "em2Text": "Y", "label": "met"}]}"#,
            "\n"
        );
        let split = read_release(text.as_bytes()).unwrap();
        assert_eq!(split.examples.len(), 1);
        assert_eq!(split.skipped, 1);
        let err = read_release("{\"sentText\": 3}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
        let err = read_release("[{\"sentText\": \"a\"}, {}]".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn canonical_errors_name_the_line() {
        let good = r#"{"tokens":["a"],"subjects":[],"objects":[],"relations":["r"]}"#;
        let text = format!("{good}\n\n{{\"tokens\": 1}}\n");
        let err = read_canonical(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
        assert_eq!(read_canonical(good.as_bytes()).unwrap().len(), 1);
    }
}
