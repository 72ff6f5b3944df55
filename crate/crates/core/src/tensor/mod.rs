//! Dense order-N tensors, column-major matrices and the contraction kernels
//! the Tucker solver is built from.
//!
//! Linearization is mode-0-fastest: entry `(i_0, …, i_{N-1})` lives at
//! `i_0 + s_0 * (i_1 + s_1 * (…))`. Mode indices in this crate are 0-based.

mod eigen;
mod ops;

pub use eigen::{leading_eigvecs, symmetric_eigen, EigenPairs};
pub use ops::{fold, gram, mode_gram, ttm, ttm_transposed, ttmc, unfold};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::arg("tensor order must be at least 1"));
        }
        if dims.contains(&0) {
            return Err(Error::arg(format!("zero-sized dimension in {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::shape(
                None,
                format!("data length {} != product of dims {dims:?}", data.len()),
            ));
        }
        Ok(Self { dims, data })
    }

    /// Like [`DenseTensor::new`] but also rejects NaN and infinite entries.
    pub fn new_finite(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite entry at linear index {pos}")));
        }
        Self::new(dims, data)
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims, vec![T::zero(); len])
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len: usize = dims.iter().product();
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (i, d) in idx.iter_mut().zip(&dims) {
                *i += 1;
                if *i < *d {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .rev()
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.linear_index(idx)]
    }

    pub fn fro_norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::shape(
                None,
                format!("{:?} vs {:?}", self.dims, other.dims),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DenseTensor<U> {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Frobenius norm, `sqrt(sum of squared entries)`.
pub fn fro_norm<T: Scalar>(t: &DenseTensor<T>) -> T {
    t.fro_norm()
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::arg(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                None,
                format!("data length {} != {rows}x{cols}", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r + c * self.rows]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r + c * self.rows] = v;
    }

    pub fn col(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                None,
                format!(
                    "matmul {}x{} * {}x{}",
                    self.rows, self.cols, rhs.rows, rhs.cols
                ),
            ));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = rhs.get(k, j);
                if b == T::zero() {
                    continue;
                }
                for (d, &a) in dst.iter_mut().zip(self.col(k)) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    /// Leading `k` columns.
    pub fn truncate_cols(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.cols {
            return Err(Error::arg(format!("cannot keep {k} of {} columns", self.cols)));
        }
        Ok(Self {
            rows: self.rows,
            cols: k,
            data: self.data[..self.rows * k].to_vec(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                None,
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn fro_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |QᵀQ - I|` over all entries.
    pub fn orthonormality_error(&self) -> T {
        let mut worst = T::zero();
        for a in 0..self.cols {
            for b in a..self.cols {
                let dot: T = self
                    .col(a)
                    .iter()
                    .zip(self.col(b))
                    .map(|(&x, &y)| x * y)
                    .sum();
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}
