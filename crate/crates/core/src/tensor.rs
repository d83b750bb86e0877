use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dense `(batch, length, width)` tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(batch: usize, len: usize, width: usize) -> Self {
        Self { dims: [batch, len, width], data: vec![T::zero(); batch * len * width] }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Vector at `(sentence, position)`.
    #[inline]
    pub fn at(&self, s: usize, i: usize) -> &[T] {
        let w = self.dims[2];
        let o = (s * self.dims[1] + i) * w;
        &self.data[o..o + w]
    }

    #[inline]
    pub fn at_mut(&mut self, s: usize, i: usize) -> &mut [T] {
        let w = self.dims[2];
        let o = (s * self.dims[1] + i) * w;
        &mut self.data[o..o + w]
    }

    /// Contiguous positions `from..to` of one sentence, flattened.
    #[inline]
    pub fn span(&self, s: usize, from: usize, to: usize) -> &[T] {
        let w = self.dims[2];
        let base = s * self.dims[1] * w;
        &self.data[base + from * w..base + to * w]
    }

    #[inline]
    pub fn span_mut(&mut self, s: usize, from: usize, to: usize) -> &mut [T] {
        let w = self.dims[2];
        let base = s * self.dims[1] * w;
        &mut self.data[base + from * w..base + to * w]
    }

    pub fn sentence(&self, s: usize) -> &[T] {
        self.span(s, 0, self.dims[1])
    }

    pub fn sentence_mut(&mut self, s: usize) -> &mut [T] {
        let l = self.dims[1];
        self.span_mut(s, 0, l)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}
