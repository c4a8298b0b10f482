//! Dense embedding storage, row normalization, and cosine similarity.
//!
//! Embeddings are stored as row-major `f32`; every reduction (dot products,
//! norms, means) accumulates in `f64` so results do not drift with N or D.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Norm below which a vector counts as zero and cannot be normalized.
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// Row-major N x D matrix of finite `f32` embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    n: usize,
    d: usize,
}

impl EmbeddingMatrix {
    /// Wraps a row-major buffer. Rejects empty shapes, length mismatches,
    /// and non-finite entries.
    pub fn new(data: Vec<f32>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * d {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n * d,
            });
        }
        for (pos, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: pos / d,
                    col: pos % d,
                });
            }
        }
        Ok(EmbeddingMatrix { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, rows.len(), d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.d)
    }

    /// Euclidean norm of row `i`, accumulated in f64.
    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i)
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Scales every row to unit Euclidean norm.
    ///
    /// Rows already within 2e-7 of unit norm are copied bit-for-bit; the
    /// division path never leaves the norm further out than that, so the
    /// operation is idempotent down to the bit level.
    pub fn normalize_rows(&self) -> Result<EmbeddingMatrix> {
        let mut out = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let norm = row
                .iter()
                .map(|&v| v as f64 * v as f64)
                .sum::<f64>()
                .sqrt();
            if norm < ZERO_NORM_EPS {
                return Err(Error::ZeroNormRow { row: i });
            }
            if (norm - 1.0).abs() <= 2e-7 {
                out.extend_from_slice(row);
            } else {
                out.extend(row.iter().map(|&v| (v as f64 / norm) as f32));
            }
        }
        Ok(EmbeddingMatrix {
            data: out,
            n: self.n,
            d: self.d,
        })
    }
}

/// Cosine similarity of two equal-length vectors, clamped to [-1, 1].
///
/// The `ZeroNormRow` index reports which argument was degenerate: 0 for
/// `a`, 1 for `b`.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let na = na.sqrt();
    let nb = nb.sqrt();
    if na < ZERO_NORM_EPS {
        return Err(Error::ZeroNormRow { row: 0 });
    }
    if nb < ZERO_NORM_EPS {
        return Err(Error::ZeroNormRow { row: 1 });
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Symmetric N x N cosine-similarity matrix with unit diagonal.
///
/// Symmetry is exact: the upper triangle is computed once and mirrored,
/// never recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    data: Vec<f32>,
    n: usize,
}

impl SimilarityMatrix {
    /// Validates an externally built matrix: square, finite, bitwise
    /// symmetric, diagonal exactly 1.0.
    pub fn from_data(data: Vec<f32>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n * n,
            });
        }
        for (pos, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: pos / n,
                    col: pos % n,
                });
            }
        }
        for i in 0..n {
            if data[i * n + i] != 1.0 {
                return Err(Error::InvalidFormat {
                    detail: format!("similarity diagonal entry {i} is not 1.0"),
                });
            }
            for j in i + 1..n {
                if data[i * n + j].to_bits() != data[j * n + i].to_bits() {
                    return Err(Error::InvalidFormat {
                        detail: format!("similarity matrix not symmetric at ({i}, {j})"),
                    });
                }
            }
        }
        Ok(SimilarityMatrix { data, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Strict-upper-triangle entries in row-major order, length N(N-1)/2.
    pub fn upper_triangle(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.data[i * self.n + i + 1..(i + 1) * self.n]);
        }
        out
    }
}

/// All pairwise cosine similarities between rows of `m`.
///
/// Rows are normalized first, so each entry reduces to a dot product. The
/// diagonal is set to exactly 1.0. Rows are processed in parallel with a
/// fixed per-row accumulation order, so the result is independent of the
/// thread count.
pub fn pairwise_similarity(m: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    let normed = m.normalize_rows()?;
    let n = normed.n();
    let mut data = vec![0.0f32; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, out_row)| {
        out_row[i] = 1.0;
        let a = normed.row(i);
        for (j, out) in out_row.iter_mut().enumerate().skip(i + 1) {
            let b = normed.row(j);
            let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
            *out = dot.clamp(-1.0, 1.0) as f32;
        }
    });
    for i in 1..n {
        for j in 0..i {
            data[i * n + j] = data[j * n + i];
        }
    }
    Ok(SimilarityMatrix { data, n })
}
