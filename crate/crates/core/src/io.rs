//! File formats. Data files are JSON Lines, one record per line; single
//! objects (couplings, reports, checkpoints) are pretty-printed JSON.
//! Coupling indices are 1-based, frame indices in spans are 0-based.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::CouplingEntry;
use crate::seq::Span;

fn label(path: &Path) -> String {
    path.display().to_string()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(format!("cannot open {}", label(path)), e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::json(format!("malformed JSON in {}", label(path)), e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(format!("cannot create {}", label(path)), e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::json(format!("cannot serialize {}", label(path)), e))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(format!("cannot write {}", label(path)), e))
}

/// Reads one record per nonblank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(format!("cannot open {}", label(path)), e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("cannot read {}", label(path)), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("malformed record on line {} of {}", k + 1, label(path)), e))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(format!("cannot create {}", label(path)), e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::json(format!("cannot serialize {}", label(path)), e))?;
        w.write_all(b"\n").map_err(|e| Error::io(format!("cannot write {}", label(path)), e))?;
    }
    w.flush().map_err(|e| Error::io(format!("cannot write {}", label(path)), e))
}

/// A named vector sequence as stored in sequence files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    pub vectors: Vec<Vec<f64>>,
}

/// Per-utterance alignment data for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub id: String,
    pub alpha: Vec<f64>,
    pub coupling: Vec<CouplingEntry>,
    pub frame_argmax: Vec<usize>,
    /// 0-based frames whose weight falls below the drop threshold.
    pub dropped_frames: Vec<usize>,
}

/// A Viterbi path and its runs `[symbol, start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedAlignmentRecord {
    pub id: String,
    pub path: Vec<usize>,
    pub runs: Vec<Span>,
}
