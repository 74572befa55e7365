//! Sparse finite-sum datasets: LibSVM text I/O, row normalization and sparse row products.

use std::fmt::Write as _;
use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl RowView<'_> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// `y += scale * row`
    pub fn axpy(&self, scale: f64, y: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(self.values) {
            y[j] += scale * v;
        }
    }
}

/// Row-major (CSR) feature matrix with one label per row. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    row_norms: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from per-row `(index, value)` lists (0-based, strictly increasing).
    /// Explicit zeros are dropped.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, d: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Degenerate("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::Degenerate("feature dimension is zero".into()));
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (j, v) in row {
                if j >= d {
                    return Err(Error::Data(format!(
                        "row {i}: index {j} out of range (d = {d})"
                    )));
                }
                if prev.is_some_and(|p| j <= p) {
                    return Err(Error::Data(format!(
                        "row {i}: indices not strictly increasing"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Data(format!("row {i}: non-finite value")));
                }
                prev = Some(j);
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        if labels.iter().any(|b| !b.is_finite()) {
            return Err(Error::Data("non-finite label".into()));
        }
        let mut ds = Dataset {
            d,
            indptr,
            indices,
            values,
            labels,
            row_norms: Vec::new(),
        };
        ds.row_norms = ds.compute_row_norms();
        Ok(ds)
    }

    /// Dense constructor, convenient for tests and synthetic problems.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Self::from_rows(sparse, labels, d)
    }

    fn compute_row_norms(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let r = self.row(i);
                r.values.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        self.row_norms.iter().fold(0.0, |m, r| m.max(r * r))
    }

    /// Panics if `i >= n`.
    pub fn row(&self, i: usize) -> RowView<'_> {
        assert!(
            i < self.n(),
            "row index {i} out of range (n = {})",
            self.n()
        );
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        RowView {
            indices: &self.indices[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    /// Sparse inner product `<a_i, x>`. Panics on a bad row index or a wrong-length `x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.d,
            "vector length {} != d = {}",
            x.len(),
            self.d
        );
        self.row(i).dot(x)
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.row(i).axpy(1.0, &mut out);
        out
    }

    /// All `<a_i, x>` at once.
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d);
        (0..self.n()).map(|i| self.row(i).dot(x)).collect()
    }

    /// `(1/n) sum_i w_i a_i`
    pub fn weighted_mean_rows(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        let inv_n = 1.0 / self.n() as f64;
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                self.row(i).axpy(w * inv_n, &mut out);
            }
        }
        out
    }

    /// Divides every row by the mean row norm.
    pub fn normalize_rows(&self) -> Result<Dataset> {
        let mean = self.row_norms.iter().sum::<f64>() / self.n() as f64;
        if mean == 0.0 {
            return Err(Error::Degenerate("all rows are zero".into()));
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v /= mean;
        }
        out.row_norms = out.compute_row_norms();
        Ok(out)
    }

    /// Widens the feature dimension (e.g. to match a training set). Never shrinks.
    pub fn with_dimension(mut self, d: usize) -> Result<Dataset> {
        let max_idx = self.indices.iter().max().map_or(0, |m| m + 1);
        if d < max_idx {
            return Err(Error::Data(format!(
                "requested dimension {d} is smaller than max index {max_idx}"
            )));
        }
        self.d = d;
        Ok(self)
    }

    /// SHA-256 over the exact bit patterns of the contents.
    pub fn content_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.d as u64).to_le_bytes());
        for &p in &self.indptr {
            h.update((p as u64).to_le_bytes());
        }
        for &j in &self.indices {
            h.update((j as u64).to_le_bytes());
        }
        for v in self.values.iter().chain(&self.labels) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }

    /// LibSVM text with 1-based indices; values use shortest round-trip formatting.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n() {
            write!(out, "{}", self.labels[i]).unwrap();
            let r = self.row(i);
            for (&j, &v) in r.indices.iter().zip(r.values) {
                write!(out, " {}:{}", j + 1, v).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LibSVM text (`label idx:val ...`, 1-based indices). Blank lines and `#` comments
/// are skipped. `d` is the largest index seen unless `dim` is given.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_idx = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid label '{label_tok}'"),
        })?;
        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("malformed token '{tok}'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid index in '{tok}'"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid value in '{tok}'"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "indices are 1-based; found 0".into(),
                });
            }
            if idx <= prev {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("index {idx} does not increase (previous {prev})"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite value in '{tok}'"),
                });
            }
            prev = idx;
            max_idx = max_idx.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }
    let d = match dim {
        Some(d) if d < max_idx => {
            return Err(Error::Data(format!(
                "dimension override {d} smaller than max index {max_idx}"
            )))
        }
        Some(d) => d,
        None => max_idx,
    };
    Dataset::from_rows(rows, labels, d)
}

pub fn parse_libsvm_str(text: &str, dim: Option<usize>) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), dim)
}
