//! Small dense linear algebra kernel.
//!
//! Everything here is sized for Gram matrices of a few hundred samples:
//! a row-major [`Matrix`], a symmetric [`SymMatrix`], Cholesky with a
//! relative pivot floor, partial-pivoting LU for the simplex basis, and a
//! cyclic Jacobi eigensolver for extreme eigenvalues.

use thiserror::Error;

/// Default relative pivot floor used when factoring Gram matrices.
pub const DEFAULT_PIVOT_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {index} = {pivot:e} below floor {floor:e})")]
    NotPositiveDefinite { index: usize, pivot: f64, floor: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix order must be at least 1")]
    Empty,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(LinalgError::DimensionMismatch { expected: cols, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
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

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.rows {
            return Err(LinalgError::DimensionMismatch { expected: self.rows, got: v.len() });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense symmetric matrix with full storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

impl SymMatrix {
    /// Wraps a square matrix, rejecting anything not exactly symmetric.
    pub fn new(m: Matrix) -> Result<Self, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::DimensionMismatch { expected: m.rows, got: m.cols });
        }
        if m.rows == 0 {
            return Err(LinalgError::Empty);
        }
        for i in 0..m.rows {
            for j in (i + 1)..m.cols {
                if m[(i, j)] != m[(j, i)] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { inner: m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: Matrix::identity(n) }
    }

    /// Builds from the upper triangle (including the diagonal), mirroring it.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = upper(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { inner: m }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.inner.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.inner[(i, i)]).collect()
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.inner.matvec(v)
    }

    /// Principal submatrix keeping the listed indices, in order.
    pub fn principal_minor(&self, keep: &[usize]) -> Self {
        Self::from_upper(keep.len(), |a, b| self.inner[(keep[a], keep[b])])
    }

    /// Principal minor with row and column `skip` removed.
    pub fn without(&self, skip: usize) -> Self {
        let keep: Vec<usize> = (0..self.order()).filter(|&k| k != skip).collect();
        self.principal_minor(&keep)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.inner[idx]
    }
}

/// `L` with `L Lᵀ = M`.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    lower: Matrix,
    pivot_floor: f64,
    absolute_floor: f64,
}

impl SpdFactorization {
    pub fn order(&self) -> usize {
        self.lower.rows
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Relative floor the factorization was computed with.
    pub fn pivot_floor(&self) -> f64 {
        self.pivot_floor
    }

    /// `pivot_floor * max_i m[i][i]`; every squared diagonal of `L` exceeds it.
    pub fn absolute_floor(&self) -> f64 {
        self.absolute_floor
    }
}

/// Cholesky factorization. A Schur pivot must exceed
/// `pivot_floor * max_i m[i][i]`, otherwise the matrix is reported as not
/// positive definite.
pub fn cholesky(m: &SymMatrix, pivot_floor: f64) -> Result<SpdFactorization, LinalgError> {
    let n = m.order();
    let max_diag = m.diagonal().into_iter().fold(0.0_f64, f64::max);
    let floor = pivot_floor * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let pivot = m[(j, j)] - dot(lj, lj);
        if !(pivot > floor) || !(max_diag > 0.0) {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot, floor });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let s = m[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l[(i, j)] = s / diag;
        }
    }
    Ok(SpdFactorization { lower: l, pivot_floor, absolute_floor: floor })
}

/// Solves `L Lᵀ x = b`.
pub fn solve_spd(f: &SpdFactorization, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = f.order();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let l = &f.lower;
    let mut z = b.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &z[..i]);
        z[i] = (z[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    Ok(z)
}

/// Diagonal of `M⁻¹`, one unit-vector solve per entry.
pub fn inverse_diagonal(f: &SpdFactorization) -> Vec<f64> {
    let n = f.order();
    let mut e = vec![0.0; n];
    (0..n)
        .map(|i| {
            e[i] = 1.0;
            let col = solve_spd(f, &e).expect("unit vector has factor order");
            e[i] = 0.0;
            col[i]
        })
        .collect()
}

/// Solves a general square system with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows;
    if a.cols != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: a.cols });
    }
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(LinalgError::Singular);
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|r| (r, m[(r, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pv <= 1e-13 * scale {
            return Err(LinalgError::Singular);
        }
        if p != k {
            for c in 0..n {
                m.data.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        let piv = m[(k, k)];
        for r in (k + 1)..n {
            let factor = m[(r, k)] / piv;
            if factor == 0.0 {
                continue;
            }
            for c in k..n {
                let v = m[(k, c)];
                m[(r, c)] -= factor * v;
            }
            x[r] -= factor * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in (k + 1)..n {
            s -= m[(k, c)] * x[c];
        }
        x[k] = s / m[(k, k)];
    }
    Ok(x)
}

/// Smallest and largest eigenvalue by cyclic Jacobi rotations.
pub fn sym_eigen_extremes(m: &SymMatrix) -> (f64, f64) {
    let evals = jacobi_eigenvalues(m);
    let lo = evals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = evals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// All eigenvalues (unordered) by cyclic Jacobi sweeps.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.order();
    let mut a = m.inner.clone();
    let total: f64 = a.data.iter().map(|v| v * v).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}
