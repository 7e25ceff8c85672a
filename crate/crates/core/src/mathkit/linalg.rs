//! Small dense linear algebra: row-major matrices, Cholesky and triangular
//! solves.

use std::ops::{Index, IndexMut};

use crate::error::{check_dim, Error, Result};
use crate::mathkit::Rng;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// `L·v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok((0..self.dim())
            .map(|i| dot(&self.0.row(i)[..=i], &v[..=i]))
            .collect())
    }

    /// Solves `L·x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), b.len())?;
        let mut x = b.to_vec();
        for i in 0..self.dim() {
            let row = self.0.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    /// Solves `Lᵀ·x = b` by back substitution.
    pub fn solve_upper_transposed(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), b.len())?;
        let n = self.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.0[(k, i)] * x[k];
            }
            x[i] = s / self.0[(i, i)];
        }
        Ok(x)
    }

    /// Solves `L·Lᵀ·x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let y = self.solve_lower(b)?;
        self.solve_upper_transposed(&y)
    }

    /// `L·Lᵀ` reassembled.
    pub fn reconstruct(&self) -> Matrix {
        self.0
            .matmul(&self.0.transpose())
            .expect("square factor")
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Only the lower triangle is read. Fails with the index of the first pivot
/// that is not strictly positive.
pub fn cholesky(m: &Matrix) -> Result<LowerTriangular> {
    check_dim(m.rows, m.cols)?;
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let pivot = m[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let s = m[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangular(l))
}

/// A symmetric positive definite matrix together with its Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    matrix: Matrix,
    factor: LowerTriangular,
}

impl SpdMatrix {
    /// Validates symmetry (relative tolerance 1e-12 of the largest entry) and
    /// positive definiteness.
    pub fn new(matrix: Matrix) -> Result<Self> {
        check_dim(matrix.rows, matrix.cols)?;
        let tol = 1e-12 * matrix.max_abs();
        for i in 0..matrix.rows {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > tol {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        let factor = cholesky(&matrix)?;
        Ok(Self { matrix, factor })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Matrix::identity(n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn factor(&self) -> &LowerTriangular {
        &self.factor
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.matrix.mul_vec(v)
    }

    /// `aᵀ·A·a`.
    pub fn quad_form(&self, a: &[f64]) -> Result<f64> {
        Ok(dot(a, &self.mul_vec(a)?))
    }

    /// `A⁻¹·b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.factor.solve(b)
    }

    /// `‖L⁻¹·v‖ = sqrt(vᵀ·A⁻¹·v)`, the Mahalanobis norm of `v`.
    pub fn whitened_norm(&self, v: &[f64]) -> Result<f64> {
        Ok(norm(&self.factor.solve_lower(v)?))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.matrix.scaled(factor))
    }
}

/// Draws `count` rows from `N(mean, cov)` as a `count × d` matrix.
pub fn mvn_sample(rng: &mut Rng, mean: &[f64], cov: &SpdMatrix, count: usize) -> Result<Matrix> {
    let d = cov.dim();
    check_dim(d, mean.len())?;
    let l = cov.factor();
    let mut out = Matrix::zeros(count, d);
    let mut z = vec![0.0; d];
    for r in 0..count {
        rng.fill_normal(&mut z);
        let row = out.row_mut(r);
        for i in 0..d {
            row[i] = mean[i] + dot(&l.0.row(i)[..=i], &z[..=i]);
        }
    }
    Ok(out)
}
