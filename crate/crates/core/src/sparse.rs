//! Compressed sparse row storage for the data and regularization operators.

use std::io::Write;

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Row-compressed sparse matrix. Explicit zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Duplicated coordinates, out-of-range indices and non-finite values are rejected.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(invalid(format!("entry ({r}, {c}) outside {rows}x{cols} matrix")));
            }
            if !v.is_finite() {
                return Err(invalid(format!("entry ({r}, {c}) is not finite")));
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = triplets.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(invalid(format!("duplicate entry ({}, {})", w[0].0, w[0].1)));
        }
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if v != T::zero() {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r).find(|&(j, _)| j == c).map_or(T::zero(), |(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(invalid(format!("vector length {} != {} columns", x.len(), self.cols)));
        }
        Ok((0..self.rows).map(|r| self.row(r).fold(T::zero(), |acc, (c, v)| acc + v * x[c])).collect())
    }

    /// `y = Aᵀ x`.
    pub fn tmul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.rows {
            return Err(invalid(format!("vector length {} != {} rows", x.len(), self.rows)));
        }
        let mut y = vec![T::zero(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == T::zero() {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        Ok(y)
    }

    /// `selfᵀ · other`, both sharing the same row space.
    pub fn transpose_mul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(invalid("transpose product needs matching row counts"));
        }
        let mut acc: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.cols];
        for r in 0..self.rows {
            for (i, a) in self.row(r) {
                for (j, b) in other.row(r) {
                    acc[i].push((j, a * b));
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(self.cols + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut entries in acc {
            entries.sort_unstable_by_key(|&(j, _)| j);
            let mut iter = entries.into_iter().peekable();
            while let Some((j, mut v)) = iter.next() {
                while let Some(&(k, w)) = iter.peek() {
                    if k != j {
                        break;
                    }
                    v += w;
                    iter.next();
                }
                if v != T::zero() {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { rows: self.cols, cols: other.cols, row_ptr, col_idx, values })
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&Self]) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(invalid("stacked blocks must share a column count"));
        }
        let mut out = Self::zeros(0, cols);
        for b in blocks {
            let base = *out.row_ptr.last().unwrap_or(&0);
            out.row_ptr.extend(b.row_ptr[1..].iter().map(|p| p + base));
            out.col_idx.extend_from_slice(&b.col_idx);
            out.values.extend_from_slice(&b.values);
            out.rows += b.rows;
        }
        Ok(out)
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.rows {
            return Err(invalid(format!("row range {start}..{end} outside {} rows", self.rows)));
        }
        let lo = self.row_ptr[start];
        let hi = self.row_ptr[end];
        Ok(Self {
            rows: end - start,
            cols: self.cols,
            row_ptr: self.row_ptr[start..=end].iter().map(|p| p - lo).collect(),
            col_idx: self.col_idx[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        })
    }

    /// Returns `c · self`.
    pub fn scaled(&self, c: T) -> Self {
        if c == T::zero() {
            return Self::zeros(self.rows, self.cols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.iter().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut d = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.iter() {
            d[[r, c]] = v;
        }
        d
    }

    /// Writes `row col value` lines (0-based) for cross-checking with external tools.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}
