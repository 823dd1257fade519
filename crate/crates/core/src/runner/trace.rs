//! Per-iteration trace records and their CSV representation.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

pub const CSV_HEADER: &str = "iter,rel_error,comm_vector_entries,comm_scalar_entries,rounds,elapsed_ms";

/// Metrics captured after each outer iteration (and once at `iter = 0`).
/// Counters are cumulative and therefore monotone across records.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub rel_error: f64,
    pub comm_vector_entries: u64,
    pub comm_scalar_entries: u64,
    /// Total communication rounds so far (vector + scalar).
    pub rounds: u64,
    /// Wall-clock time since the run started; recorded, never asserted.
    pub elapsed_ms: f64,
}

/// Writes `header + one line per record`; floats in shortest round-trip form.
pub fn emit_csv<W: Write>(trace: &[TraceRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.iter, r.rel_error, r.comm_vector_entries, r.comm_scalar_entries, r.rounds, r.elapsed_ms
        )?;
    }
    Ok(())
}

pub fn write_csv_file(trace: &[TraceRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_csv(trace, std::io::BufWriter::new(file))?;
    Ok(())
}

/// Inverse of [`emit_csv`]; mainly for round-trip checks and tooling.
pub fn parse_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse { line: 1, msg: format!("expected header {CSV_HEADER:?}") })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected 6 columns, got {}", cols.len()),
            });
        }
        let bad = |what: &str| Error::Parse { line: idx + 1, msg: format!("bad {what}") };
        out.push(TraceRecord {
            iter: cols[0].parse().map_err(|_| bad("iter"))?,
            rel_error: cols[1].parse().map_err(|_| bad("rel_error"))?,
            comm_vector_entries: cols[2].parse().map_err(|_| bad("comm_vector_entries"))?,
            comm_scalar_entries: cols[3].parse().map_err(|_| bad("comm_scalar_entries"))?,
            rounds: cols[4].parse().map_err(|_| bad("rounds"))?,
            elapsed_ms: cols[5].parse().map_err(|_| bad("elapsed_ms"))?,
        });
    }
    Ok(out)
}
