//! Dense primitives shared by the matchers: token matrices, cosine
//! similarity, stable descending argsort and a shift-stable softmax.
//!
//! Everything here is a pure function of its inputs. Ties in every sort are
//! broken by ascending original index so downstream plans are deterministic.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm floor used by every cosine in the crate.
pub const NORM_EPS: f64 = 1e-12;

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::NonFinite(pos)),
        None => Ok(()),
    }
}

/// Row-major `n_tokens × dim` matrix of token embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenMatrix {
    n_tokens: usize,
    dim: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn new(n_tokens: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n_tokens == 0 || dim == 0 {
            return Err(Error::InvalidShape(format!(
                "token matrix must be non-empty, got {n_tokens}x{dim}"
            )));
        }
        if data.len() != n_tokens * dim {
            return Err(Error::LengthMismatch {
                expected: n_tokens * dim,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { n_tokens, dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// `self · m`, i.e. every token row multiplied by `m`.
    pub fn matmul(&self, m: &Matrix) -> Result<TokenMatrix> {
        if m.rows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.rows(),
            });
        }
        let mut data = Vec::with_capacity(self.n_tokens * m.cols());
        for row in self.rows() {
            data.extend(m.left_mul(row));
        }
        Ok(TokenMatrix {
            n_tokens: self.n_tokens,
            dim: m.cols(),
            data,
        })
    }
}

/// General row-major real matrix, used for projection weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Row vector times matrix. `v.len()` must equal `self.rows()`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += vi * w;
            }
        }
        out
    }
}

/// `n × n` similarity matrix. When `diagonal_excluded` is set the stored
/// diagonal is ignored and reads back as negative infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
    diagonal_excluded: bool,
}

impl SimilarityMatrix {
    pub fn new(n: usize, entries: Vec<f64>, diagonal_excluded: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidShape("similarity matrix must be non-empty".into()));
        }
        if entries.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        check_finite(&entries)?;
        Ok(Self {
            n,
            entries,
            diagonal_excluded,
        })
    }

    /// Builds a symmetric matrix from the strict upper triangle given row by
    /// row: `(0,1), (0,2), ..., (0,n-1), (1,2), ...`.
    pub fn from_upper_triangle(n: usize, upper: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: upper.len(),
            });
        }
        let mut entries = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                entries[i * n + j] = upper[k];
                entries[j * n + i] = upper[k];
                k += 1;
            }
        }
        Self::new(n, entries, true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diagonal_excluded(&self) -> bool {
        self.diagonal_excluded
    }

    /// Entry `(i, j)`, with the diagonal read as −∞ when excluded.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j && self.diagonal_excluded {
            f64::NEG_INFINITY
        } else {
            self.entries[i * self.n + j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Raw stored entries, diagonal included as stored.
    pub fn raw(&self) -> &[f64] {
        &self.entries
    }
}

/// A bijection on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || seen[i] {
                return Err(Error::NotAPermutation(n));
            }
            seen[i] = true;
        }
        Ok(Self(indices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Inverse permutation: `ranks()[self[k]] == k`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.0.len()];
        for (k, &i) in self.0.iter().enumerate() {
            rank[i] = k;
        }
        rank
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;

    fn index(&self, k: usize) -> &usize {
        &self.0[k]
    }
}

/// Orders `values` descending; equal values keep ascending index order.
/// −∞ sorts last.
pub fn stable_argsort_desc(values: &[f64]) -> Permutation {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal));
    Permutation(idx)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine with both norms clamped at [`NORM_EPS`]; clamped into `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = l2_norm(a).max(NORM_EPS) * l2_norm(b).max(NORM_EPS);
    (dot(a, b) / denom).clamp(-1.0, 1.0)
}

/// Pairwise cosine similarity between key rows, diagonal excluded.
pub fn cosine_similarity_matrix(keys: &TokenMatrix) -> Result<SimilarityMatrix> {
    let n = keys.n_tokens();
    if n < 2 {
        return Err(Error::TooFewTokens(n));
    }
    check_finite(keys.as_slice())?;

    let unit: Vec<Vec<f64>> = keys
        .rows()
        .map(|row| {
            let norm = l2_norm(row).max(NORM_EPS);
            row.iter().map(|v| v / norm).collect()
        })
        .collect();

    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = dot(&unit[i], &unit[j]).clamp(-1.0, 1.0);
            entries[i * n + j] = s;
            entries[j * n + i] = s;
        }
    }
    SimilarityMatrix::new(n, entries, true)
}

/// Softmax with max-subtraction.
pub fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_finite(values)?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}
