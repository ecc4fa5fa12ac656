//! Small dense square matrices. Lattice dimensions stay below ten, so
//! everything here is plain `O(d^3)` code on a row-major `Vec<f64>`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// A `dim x dim` real matrix stored row-major. When used as a lattice basis
/// the columns are the generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Builds a matrix from its rows; fails unless the rows form a square.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        Ok(Self::from_rows(cols)?.transpose())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        for i in 0..self.dim {
            self[(i, j)] = col[i];
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                for j in 0..d {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `self * k` for an integer coefficient vector.
    pub fn mul_int(&self, k: &[i64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            out[i] = row.iter().zip(k).map(|(a, &b)| a * b as f64).sum();
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn max_column_norm(&self) -> f64 {
        (0..self.dim).map(|j| norm(&self.column(j))).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)
    }

    /// LU factorization with partial pivoting; `None` when a pivot is exactly zero.
    fn lu(&self) -> Option<(Vec<f64>, Vec<usize>, f64)> {
        let d = self.dim;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut sign = 1.0;
        for col in 0..d {
            let mut piv = col;
            for r in col + 1..d {
                if libm::fabs(a[r * d + col]) > libm::fabs(a[piv * d + col]) {
                    piv = r;
                }
            }
            if a[piv * d + col] == 0.0 {
                return None;
            }
            if piv != col {
                for j in 0..d {
                    a.swap(piv * d + j, col * d + j);
                }
                perm.swap(piv, col);
                sign = -sign;
            }
            let p = a[col * d + col];
            for r in col + 1..d {
                let f = a[r * d + col] / p;
                a[r * d + col] = f;
                for j in col + 1..d {
                    a[r * d + j] -= f * a[col * d + j];
                }
            }
        }
        Some((a, perm, sign))
    }

    pub fn det(&self) -> f64 {
        match self.lu() {
            None => 0.0,
            Some((a, _, sign)) => {
                let d = self.dim;
                (0..d).map(|i| a[i * d + i]).product::<f64>() * sign
            }
        }
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let d = self.dim;
        let (a, perm, _) = self.lu().ok_or(Error::SingularBasis { det: 0.0 })?;
        let mut inv = Self::zeros(d);
        for j in 0..d {
            // Solve A x = e_j using the permuted LU factors.
            let mut x: Vec<f64> = (0..d).map(|i| if perm[i] == j { 1.0 } else { 0.0 }).collect();
            for i in 0..d {
                for k in 0..i {
                    x[i] -= a[i * d + k] * x[k];
                }
            }
            for i in (0..d).rev() {
                for k in i + 1..d {
                    x[i] -= a[i * d + k] * x[k];
                }
                x[i] /= a[i * d + i];
            }
            inv.set_column(j, &x);
        }
        Ok(inv)
    }

    /// Solves `self * x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.inverse()?.mul_vec(b))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    libm::fabs(x - libm::round(x))
}
