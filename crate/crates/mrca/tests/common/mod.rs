#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::Command;

use mrca::corpus::write_corpus_dir;
use mrca::embeddings::write_embeddings;
use mrca_core::synthetic::{generate, SyntheticConfig};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI in-process.
pub fn run<S: AsRef<str>>(args: &[S]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mrca").chain(args.iter().map(AsRef::as_ref));
    let code = mrca::cli::main_with(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

/// Runs the built binary.
pub fn run_bin<S: AsRef<str>>(args: &[S]) -> Output {
    let o = Command::new(env!("CARGO_BIN_EXE_mrca")).args(args.iter().map(AsRef::as_ref)).output().unwrap();
    Output {
        code: o.status.code().unwrap(),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn s(p: &Path) -> String {
    p.display().to_string()
}

pub struct FixtureCorpus {
    pub embeddings: PathBuf,
    pub corpus: PathBuf,
}

/// Writes the synthetic overfit corpus with validation and test copies of
/// the training split, plus its word vectors.
pub fn write_overfit_fixture(dir: &Path, seed: u64) -> FixtureCorpus {
    let mut c = generate(&SyntheticConfig::overfit_fixture(seed)).unwrap();
    c.dataset.validation = c.dataset.train.clone();
    c.dataset.test = c.dataset.train.clone();
    let embeddings = dir.join("vectors.txt");
    write_embeddings(&c.store, BufWriter::new(File::create(&embeddings).unwrap())).unwrap();
    let corpus = dir.join("corpus");
    write_corpus_dir(&c.dataset, &corpus).unwrap();
    FixtureCorpus { embeddings, corpus }
}

/// Small settings under which a sigmoid head fits the overfit corpus.
pub const FIT_SETTINGS: [&str; 16] = [
    "--loss", "bce_sigmoid", "--hidden", "32", "--seq-len", "24", "--pool", "8", "--stride", "2",
    "--learning-rate", "0.01", "--epochs", "100", "--patience", "20",
];

pub fn train_args(f: &FixtureCorpus, out: &Path, extra: &[&str]) -> Vec<String> {
    let mut a: Vec<String> = ["train", "--quiet", "--embeddings", &s(&f.embeddings), "--corpus", &s(&f.corpus), "--out", &s(out)]
        .iter()
        .map(|x| x.to_string())
        .collect();
    a.extend(extra.iter().map(|x| x.to_string()));
    a
}
