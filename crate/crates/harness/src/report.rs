//! Result files (one JSON record per line, append-only) and reward curves
//! (`episode mean_reward` per line).

use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::eval::ResultRecord;
use crate::HarnessError;

pub fn append_records(path: impl AsRef<Path>, records: &[ResultRecord]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io = |e| HarnessError::io(path, e);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| HarnessError::Config(e.to_string()))?;
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn write_curve(path: impl AsRef<Path>, curve: &[f64]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut text = String::new();
    for (e, r) in curve.iter().enumerate() {
        text.push_str(&format!("{e} {r}\n"));
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
