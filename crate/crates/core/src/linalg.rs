//! Fixed-capacity dense vectors and matrices.
//!
//! Everything in the control loop is small (state dimension ≤ 8, control
//! dimension ≤ 4), so storage lives inline and values are `Copy`. The
//! logical dimension is carried at runtime.

use core::fmt;
use core::ops::{Index, IndexMut};

/// Largest supported state dimension.
pub const MAX_STATE_DIM: usize = 8;
/// Largest supported control dimension.
pub const MAX_CONTROL_DIM: usize = 4;

#[derive(Clone, Copy, PartialEq)]
pub struct Vector<const CAP: usize> {
    data: [f64; CAP],
    len: usize,
}

/// System state `x`.
pub type StateVec = Vector<MAX_STATE_DIM>;
/// Control input `u` (or a control perturbation `δu`).
pub type ControlVec = Vector<MAX_CONTROL_DIM>;

impl<const CAP: usize> Vector<CAP> {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= CAP, "dimension {len} exceeds capacity {CAP}");
        Self { data: [0.0; CAP], len }
    }

    /// Panics if `values` is longer than the capacity.
    pub fn new(values: &[f64]) -> Self {
        let mut v = Self::zeros(values.len());
        v.data[..values.len()].copy_from_slice(values);
        v
    }

    pub fn try_new(values: &[f64]) -> Option<Self> {
        (values.len() <= CAP).then(|| Self::new(values))
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.data[i] = f(i);
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.len]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.len]
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.as_slice().iter()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len, other.len);
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn norm_l1(&self) -> f64 {
        self.iter().map(|v| v.abs()).sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::from_fn(self.len, |i| self.data[i] * k)
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Self::from_fn(self.len, |i| self.data[i] + other.data[i])
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Self::from_fn(self.len, |i| self.data[i] - other.data[i])
    }

    /// `self += k * other`
    pub fn axpy(&mut self, k: f64, other: &Self) {
        debug_assert_eq!(self.len, other.len);
        for i in 0..self.len {
            self.data[i] += k * other.data[i];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<const CAP: usize> Index<usize> for Vector<CAP> {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl<const CAP: usize> IndexMut<usize> for Vector<CAP> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl<const CAP: usize> fmt::Debug for Vector<CAP> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// Row-major dense matrix with inline `R × C` storage.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix<const R: usize, const C: usize> {
    data: [[f64; C]; R],
    rows: usize,
    cols: usize,
}

/// `g(x)`: state × control.
pub type InputMatrix = Matrix<MAX_STATE_DIM, MAX_CONTROL_DIM>;
/// `σ(x)`, Hessians, drift Jacobians: state × state.
pub type StateMatrix = Matrix<MAX_STATE_DIM, MAX_STATE_DIM>;
/// Covariance factors and weights in control space.
pub type ControlMatrix = Matrix<MAX_CONTROL_DIM, MAX_CONTROL_DIM>;

impl<const R: usize, const C: usize> Matrix<R, C> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows <= R && cols <= C, "shape {rows}x{cols} exceeds capacity {R}x{C}");
        Self { data: [[0.0; C]; R], rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, k: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i][i] = k;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i][i] = *d;
        }
        m
    }

    /// Rows given as slices of equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            m.data[i][..cols].copy_from_slice(row);
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

    pub fn mul_vec<const K: usize, const O: usize>(&self, v: &Vector<K>) -> Vector<O> {
        debug_assert_eq!(self.cols, v.len());
        Vector::from_fn(self.rows, |i| {
            (0..self.cols).map(|j| self.data[i][j] * v[j]).sum()
        })
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec<const K: usize, const O: usize>(&self, v: &Vector<K>) -> Vector<O> {
        debug_assert_eq!(self.rows, v.len());
        Vector::from_fn(self.cols, |j| {
            (0..self.rows).map(|i| self.data[i][j] * v[i]).sum()
        })
    }

    pub fn transpose(&self) -> Matrix<C, R> {
        let mut t = Matrix::<C, R>::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j][i] = self.data[i][j];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        (0..self.rows).all(|i| self.data[i][..self.cols].iter().all(|v| v.is_finite()))
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.data[i][j] == 0.0))
    }

    pub fn diag(&self) -> Vector<R> {
        Vector::from_fn(self.rows.min(self.cols), |i| self.data[i][i])
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += self.data[i][j] * self.data[i][j];
            }
        }
        libm::sqrt(s)
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert!(self.rows == other.rows && self.cols == other.cols);
        let mut m = *self;
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.data[i][j] -= other.data[i][j];
            }
        }
        m
    }

    pub fn mul<const K: usize>(&self, other: &Matrix<C, K>) -> Matrix<R, K> {
        debug_assert_eq!(self.cols, other.rows);
        let mut m = Matrix::<R, K>::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                m.data[i][j] = (0..self.cols).map(|k| self.data[i][k] * other.data[k][j]).sum();
            }
        }
        m
    }

    /// `self · selfᵀ`
    pub fn gram(&self) -> Matrix<R, R> {
        let mut m = Matrix::<R, R>::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..self.rows {
                m.data[i][j] = (0..self.cols).map(|k| self.data[i][k] * self.data[j][k]).sum();
            }
        }
        m
    }
}

impl<const N: usize> Matrix<N, N> {
    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i][i]).sum()
    }

    /// `vᵀ · self · v`
    pub fn quadratic_form<const K: usize>(&self, v: &Vector<K>) -> f64 {
        debug_assert_eq!(self.rows, v.len());
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += v[i] * self.data[i][j] * v[j];
            }
        }
        s
    }

    /// `uᵀ · self · v`
    pub fn bilinear_form<const K: usize>(&self, u: &Vector<K>, v: &Vector<K>) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += u[i] * self.data[i][j] * v[j];
            }
        }
        s
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| (0..i).all(|j| (self.data[i][j] - self.data[j][i]).abs() <= tol))
    }

    /// `Tr(sᵀ · self · s)` for a square `s` of the same size.
    pub fn sandwich_trace(&self, s: &Matrix<N, N>) -> f64 {
        let n = self.rows;
        let mut total = 0.0;
        // Tr(sᵀ H s) = Σ_k Σ_ij s_ik H_ij s_jk
        for k in 0..s.cols {
            for i in 0..n {
                if s.data[i][k] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    total += s.data[i][k] * self.data[i][j] * s.data[j][k];
                }
            }
        }
        total
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// in ascending order (first `rows()` entries of the result).
    pub fn symmetric_eigenvalues(&self) -> Vector<N> {
        let n = self.rows;
        let mut a = self.data;
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i][j] * a[i][j];
                }
            }
            let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
            if off <= f64::EPSILON * f64::EPSILON * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q] == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig = Vector::from_fn(n, |i| a[i][i]);
        eig.as_mut_slice().sort_by(|x, y| x.total_cmp(y));
        eig
    }
}

impl<const R: usize, const C: usize> Index<(usize, usize)> for Matrix<R, C> {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i][j]
    }
}

impl<const R: usize, const C: usize> IndexMut<(usize, usize)> for Matrix<R, C> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i][j]
    }
}

impl<const R: usize, const C: usize> fmt::Debug for Matrix<R, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| &self.data[i][..self.cols]))
            .finish()
    }
}

/// Solves `a · x = b` in place by Gaussian elimination with partial
/// pivoting. `a` is `n × n` stored in the leading block. Returns `false`
/// when the system is numerically singular.
pub(crate) fn solve_dense<const N: usize>(a: &mut [[f64; N]; N], b: &mut [f64; N], n: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return false;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in (row + 1)..n {
            acc -= a[row][c] * b[c];
        }
        b[row] = acc / a[row][row];
    }
    true
}
