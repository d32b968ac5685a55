//! Minimal dense row-major matrix.
//!
//! The sizes in this crate are small (a few hundred rows/columns at most), so
//! a plain `Vec`-backed matrix with straightforward loops is all that is
//! needed.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        assert!(!rows.is_empty(), "from_rows requires at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols));
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `Aᵀ·A`, computed symmetrically so the result is exactly symmetric.
    pub fn gram(&self) -> Matrix<T> {
        let n = self.cols;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for r in 0..self.rows {
                    acc += self[(r, i)] * self[(r, j)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    /// `A·Aᵀ`, exactly symmetric.
    pub fn gram_right(&self) -> Matrix<T> {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                let (ri, rj) = (self.row(i), self.row(j));
                for (&a, &b) in ri.iter().zip(rj) {
                    acc += a * b;
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .fold(T::zero(), |acc, x| acc + x)
            })
            .collect()
    }

    /// `Aᵀ·v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![T::zero(); self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    /// Keeps columns `lo..hi` (half-open).
    pub fn columns(&self, lo: usize, hi: usize) -> Matrix<T> {
        assert!(lo <= hi && hi <= self.cols);
        Matrix::from_fn(self.rows, hi - lo, |r, c| self[(r, lo + c)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|&x| x * x)
            .fold(T::zero(), |acc, x| acc + x)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(
            T::zero(),
            |acc, &x| if x.abs() > acc { x.abs() } else { acc },
        )
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest absolute asymmetry `|a_ij − a_ji|`.
    pub fn max_asymmetry(&self) -> T {
        assert!(self.is_square());
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn trace(&self) -> T {
        assert!(self.is_square());
        (0..self.rows)
            .map(|i| self[(i, i)])
            .fold(T::zero(), |a, x| a + x)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Euclidean norm of a slice.
pub fn vec_norm<T: Scalar>(v: &[T]) -> T {
    v.iter()
        .map(|&x| x * x)
        .fold(T::zero(), |acc, x| acc + x)
        .sqrt()
}

/// Dot product of two equal-length slices.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x * y)
        .fold(T::zero(), |acc, x| acc + x)
}
