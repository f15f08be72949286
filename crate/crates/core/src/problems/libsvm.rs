use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One example: label in `{-1, +1}` and 0-based sparse features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub label: f64,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v * x[i as usize])
            .sum()
    }

    /// `out += alpha * a`
    pub fn axpy(&self, alpha: f64, out: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] += alpha * v;
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<SparseRow>,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// LIBSVM text with `+1`/`-1` labels and 1-based indices.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(if row.label > 0.0 { "+1" } else { "-1" });
            for (&i, &v) in row.indices.iter().zip(&row.values) {
                let _ = write!(out, " {}:{}", i + 1, v);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_libsvm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_libsvm()).map_err(|e| Error::io(path, e))
    }

    pub fn read_libsvm(path: &Path) -> Result<Dataset> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        parse_libsvm(std::io::BufReader::new(f))
    }

    /// Seeded row permutation split into `(train, test)` with `round(n * train_fraction)`
    /// training rows. Both halves keep the full feature dimension.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(Error::param("train_fraction", "must lie in (0, 1]"));
        }
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (self.rows.len() as f64 * train_fraction).round() as usize;
        let pick = |idx: &[usize]| Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            dim: self.dim,
        };
        Ok((pick(&order[..n_train]), pick(&order[n_train..])))
    }
}

fn map_label(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("label `{token}` is not a number"),
    })?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1.0)
    } else {
        Err(Error::Parse {
            line,
            reason: format!("label `{token}` is not one of -1, 0, +1"),
        })
    }
}

/// Read LIBSVM lines `label idx:value ...`; labels `0` map to `-1`.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut dim = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        let label = map_label(label, line_no)?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut last = 0u64;
        for tok in tokens {
            let bad = |reason: String| Error::Parse {
                line: line_no,
                reason,
            };
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| bad(format!("token `{tok}` is not index:value")))?;
            let i: u64 = i
                .parse()
                .map_err(|_| bad(format!("index in `{tok}` is not a positive integer")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| bad(format!("value in `{tok}` is not a number")))?;
            if i == 0 {
                return Err(bad("indices are 1-based".into()));
            }
            if i <= last {
                return Err(bad(format!(
                    "index {i} does not increase (previous {last})"
                )));
            }
            if !v.is_finite() {
                return Err(bad(format!("value in `{tok}` is not finite")));
            }
            if i > u32::MAX as u64 {
                return Err(bad(format!("index {i} is too large")));
            }
            last = i;
            indices.push((i - 1) as u32);
            values.push(v);
        }
        dim = dim.max(last as usize);
        rows.push(SparseRow {
            label,
            indices,
            values,
        });
    }
    Ok(Dataset { rows, dim })
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    parse_libsvm(text.as_bytes())
}
