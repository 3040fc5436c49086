//! LIBSVM text format reader.
//!
//! One sample per line: `label index:value index:value ...`, whitespace
//! separated, 1-based strictly increasing indices. Blank lines are skipped.
//! A `#` anywhere on a line is an error (comments are not part of the
//! format). Labels `+1`/`1` map to `1`, `-1` and `0` map to `-1`.

use std::io::BufRead;
use std::path::Path;

use super::ProblemError;

/// Samples in compressed sparse row layout; column indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmData {
    pub labels: Vec<f64>,
    pub row_ptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub n_features: usize,
}

impl LibsvmData {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Builds a dataset from dense rows (zeros are dropped).
    pub fn from_dense(labels: Vec<f64>, rows: &[Vec<f64>]) -> Self {
        assert_eq!(labels.len(), rows.len());
        let n_features = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut out = Self {
            labels,
            row_ptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            n_features,
        };
        for r in rows {
            for (j, v) in r.iter().enumerate() {
                if *v != 0.0 {
                    out.indices.push(j);
                    out.values.push(*v);
                }
            }
            out.row_ptr.push(out.indices.len());
        }
        out
    }
}

fn parse_label(tok: &str, line: usize) -> Result<f64, ProblemError> {
    let v: f64 = tok.parse().map_err(|_| ProblemError::Parse {
        line,
        msg: format!("bad label {tok:?}"),
    })?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1.0)
    } else {
        Err(ProblemError::Parse {
            line,
            msg: format!("label {tok:?} is not one of -1, 0, 1"),
        })
    }
}

pub fn parse_libsvm(reader: impl BufRead) -> Result<LibsvmData, ProblemError> {
    let mut data = LibsvmData {
        labels: Vec::new(),
        row_ptr: vec![0],
        indices: Vec::new(),
        values: Vec::new(),
        n_features: 0,
    };
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| ProblemError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.contains('#') {
            return Err(ProblemError::Parse {
                line: lineno,
                msg: "comments are not allowed".into(),
            });
        }
        let mut toks = line.split_whitespace();
        let Some(label) = toks.next() else {
            continue;
        };
        data.labels.push(parse_label(label, lineno)?);
        let mut prev = 0usize;
        for tok in toks {
            let bad = |msg: String| ProblemError::Parse { line: lineno, msg };
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| bad(format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("bad index {idx:?}")))?;
            let val: f64 = val.parse().map_err(|_| bad(format!("bad value {val:?}")))?;
            if idx == 0 {
                return Err(bad("indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(bad(format!("index {idx} not strictly increasing")));
            }
            if !val.is_finite() {
                return Err(bad(format!("non-finite value {val}")));
            }
            prev = idx;
            data.indices.push(idx - 1);
            data.values.push(val);
            data.n_features = data.n_features.max(idx);
        }
        data.row_ptr.push(data.indices.len());
    }
    if data.labels.is_empty() {
        return Err(ProblemError::EmptyDataset);
    }
    Ok(data)
}

pub fn parse_libsvm_file(path: &Path) -> Result<LibsvmData, ProblemError> {
    let file = std::fs::File::open(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_libsvm(std::io::BufReader::new(file))
}
