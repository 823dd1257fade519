//! LIBSVM text-format ingestion and dataset sharding.
//!
//! Format: one sample per line, `label idx:val idx:val ...` with 1-based,
//! strictly increasing feature indices. Empty lines are skipped.

use nalgebra::{DMatrix, DVector};

use super::LogisticLocal;
use crate::{Error, Result};

/// One parsed sample: a +/-1 label and a sparse feature list.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub label: f64,
    /// `(index, value)` pairs, 1-based, strictly increasing.
    pub features: Vec<(usize, f64)>,
}

/// A parsed dataset; `dim` is the largest feature index seen.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Densifies one row to dimension `p >= self.dim`.
    pub fn densify_row(&self, row: &DatasetRow, p: usize) -> DVector<f64> {
        let mut v = DVector::<f64>::zeros(p);
        for &(idx, val) in &row.features {
            v[idx - 1] = val;
        }
        v
    }
}

/// Parsing options; `zero_one_labels` maps `0 -> -1` and `1 -> +1` instead of
/// requiring explicit +/-1 labels.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub zero_one_labels: bool,
}

/// Parses LIBSVM text. Errors carry the 1-based line number of the offending
/// token.
pub fn parse_libsvm(text: &str, opts: ParseOptions) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut dim = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        // strip trailing comments, as extracted dataset files sometimes carry them
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label_tok = toks.next().expect("non-empty line has a token");
        let raw_label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label token {label_tok:?}"),
        })?;
        let label = map_label(raw_label, opts, line_no)?;
        let mut features = Vec::new();
        let mut prev_idx = 0usize;
        for tok in toks {
            let (i_str, v_str) = tok.split_once(':').ok_or(Error::Parse {
                line: line_no,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let i: usize = i_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature index {i_str:?}"),
            })?;
            if i == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let v: f64 = v_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value {v_str:?}"),
            })?;
            if i <= prev_idx {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("feature index {i} not strictly increasing"),
                });
            }
            prev_idx = i;
            dim = dim.max(i);
            features.push((i, v));
        }
        rows.push(DatasetRow { label, features });
    }
    Ok(Dataset { rows, dim })
}

fn map_label(raw: f64, opts: ParseOptions, line: usize) -> Result<f64> {
    if opts.zero_one_labels {
        match raw {
            v if v == 0.0 => Ok(-1.0),
            v if v == 1.0 => Ok(1.0),
            v => Err(Error::Parse {
                line,
                msg: format!("label {v} not in {{0, 1}}"),
            }),
        }
    } else {
        match raw {
            v if v == 1.0 => Ok(1.0),
            v if v == -1.0 => Ok(-1.0),
            v => Err(Error::Parse {
                line,
                msg: format!("label {v} not in {{-1, +1}} (use the 0/1 flag for 0/1 files)"),
            }),
        }
    }
}

/// How samples are assigned to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShardStrategy {
    /// Node 0 gets the first block, node 1 the next, ...; the first
    /// `len % n` nodes take one extra sample.
    Contiguous,
    /// Sample `k` goes to node `k % n`.
    RoundRobin,
}

/// Splits a dataset into `n` logistic objectives with balanced shard sizes
/// (difference at most one) and the full regularizer `reg` on every node.
///
/// `_seed` is reserved for randomized strategies; the two current strategies
/// are deterministic.
pub fn shard_dataset(
    d: &Dataset,
    n: usize,
    strategy: ShardStrategy,
    _seed: u64,
    reg: f64,
) -> Result<Vec<LogisticLocal>> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one node".into()));
    }
    if n > d.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot shard {} samples across {n} nodes",
            d.len()
        )));
    }
    if d.dim == 0 {
        return Err(Error::InvalidArgument("dataset has no features".into()));
    }
    let assignments: Vec<Vec<usize>> = match strategy {
        ShardStrategy::Contiguous => {
            let base = d.len() / n;
            let extra = d.len() % n;
            let mut out = Vec::with_capacity(n);
            let mut start = 0;
            for i in 0..n {
                let size = base + usize::from(i < extra);
                out.push((start..start + size).collect());
                start += size;
            }
            out
        }
        ShardStrategy::RoundRobin => {
            let mut out = vec![Vec::new(); n];
            for k in 0..d.len() {
                out[k % n].push(k);
            }
            out
        }
    };
    let mut shards = Vec::with_capacity(n);
    for idxs in assignments {
        let mut features = DMatrix::<f64>::zeros(idxs.len(), d.dim);
        let mut labels = DVector::<f64>::zeros(idxs.len());
        for (r, &k) in idxs.iter().enumerate() {
            let row = &d.rows[k];
            labels[r] = row.label;
            for &(i, v) in &row.features {
                features[(r, i - 1)] = v;
            }
        }
        shards.push(LogisticLocal::new(features, labels, reg)?);
    }
    Ok(shards)
}
