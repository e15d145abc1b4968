//! Per-epoch training log, one JSON object per line.
//!
//! Wall-clock time is deliberately absent so that two runs with the same
//! seed write identical logs.

use std::io::{BufRead, Write};

use mrca_core::train::EpochRecord;
use mrca_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run: usize,
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_precision: f64,
    pub val_recall: f64,
    pub val_f1: f64,
    pub lr: f64,
}

impl MetricsRecord {
    pub fn new(run: usize, seed: u64, r: &EpochRecord) -> Self {
        Self {
            run,
            seed,
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_precision: r.validation.precision,
            val_recall: r.validation.recall,
            val_f1: r.validation.f1,
            lr: r.lr,
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", serde_json::to_string(self)?)
    }
}

/// Reads a log; blank lines are skipped, anything else must parse.
pub fn read_metrics<R: BufRead>(reader: R) -> Result<Vec<MetricsRecord>, Error> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let malformed = |e: &dyn ToString| Error::Malformed { line: i + 1, reason: e.to_string() };
        let line = line.map_err(|e| malformed(&e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| malformed(&e))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_line_errors() {
        let r = MetricsRecord {
            run: 0,
            seed: 7,
            epoch: 1,
            train_loss: 0.25,
            val_precision: 0.5,
            val_recall: 1.0,
            val_f1: 2.0 / 3.0,
            lr: 0.0015,
        };
        let mut buf = Vec::new();
        r.write(&mut buf).unwrap();
        r.write(&mut buf).unwrap();
        assert_eq!(read_metrics(buf.as_slice()).unwrap(), vec![r, r]);
        buf.extend_from_slice(b"\n{oops\n");
        let err = read_metrics(buf.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 4, .. }), "{err}");
    }
}
