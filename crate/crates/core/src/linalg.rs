//! Dense linear-algebra kernels for small matrices.
//!
//! Everything here is sized for `d <= 10`: Cholesky, a cyclic Jacobi
//! eigensolver for symmetric input, LU with partial pivoting, a
//! Gram-Schmidt rank count and the generalized maximum eigenvalue used for
//! transition gains. A Kronecker-form discrete Lyapunov solve is included as
//! a model-based oracle for tests and fixture generation.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerances shared by the kernels. There is exactly one instance,
/// [`NUMERIC`]; callers that need a different rank tolerance pass it
/// explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSettings {
    /// Relative symmetry tolerance accepted by the symmetric kernels.
    pub symmetry_rel: f64,
    /// Cholesky pivot floor relative to the largest diagonal entry.
    pub cholesky_pivot_rel: f64,
    /// Jacobi stops once the off-diagonal Frobenius mass is below this
    /// fraction of the input's Frobenius norm.
    pub jacobi_off_rel: f64,
    pub jacobi_max_sweeps: usize,
    /// LU pivot floor relative to the largest entry of the input.
    pub lu_pivot_rel: f64,
    /// Default relative tolerance for [`column_rank`].
    pub rank_rel: f64,
}

pub const NUMERIC: NumericSettings = NumericSettings {
    symmetry_rel: 1e-12,
    cholesky_pivot_rel: 1e-12,
    jacobi_off_rel: 1e-14,
    jacobi_max_sweeps: 50,
    lu_pivot_rel: 1e-13,
    rank_rel: 1e-8,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Row-major dense matrix of finite `f64` values.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
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

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major storage, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        Ok(Self::from_rows(columns)?.transpose())
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Copy of rows `start..end`.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
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

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "vector length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · m · self`.
    pub fn congruence(&self, m: &Self) -> Self {
        self.transpose().matmul(&m.matmul(self))
    }

    /// Quadratic form `vᵀ · self · v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetrize(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// Largest `|m_ij - m_ji|` relative to `max(1, max|m_ij|)`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / self.max_abs().max(1.0)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.is_square() && self.asymmetry() <= rel_tol
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn require_symmetric(&self) -> Result<()> {
        self.require_square()?;
        let asym = self.asymmetry();
        if asym > NUMERIC.symmetry_rel {
            return Err(LinalgError::NotSymmetric(asym));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:>14.7e}")).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = LinalgError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.to_rows()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = m`.
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    m.require_symmetric()?;
    let n = m.rows();
    let max_diag = m.diagonal().into_iter().fold(0.0f64, f64::max);
    let floor = NUMERIC.cholesky_pivot_rel * max_diag;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > floor) || pivot <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

pub fn is_positive_definite(m: &DenseMatrix) -> bool {
    cholesky(m).is_ok()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: DenseMatrix,
}

impl SymEigenResult {
    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("empty spectrum")
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn top_vector(&self) -> Vec<f64> {
        self.eigenvectors.column(self.eigenvalues.len() - 1)
    }

    /// `V · diag(f(eigenvalues)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            for i in 0..n {
                let vik = v[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)];
                }
            }
        }
        out.symmetrize()
    }
}

/// Cyclic Jacobi eigensolver with eigenvalues sorted ascending.
pub fn eigh_jacobi(m: &DenseMatrix) -> Result<SymEigenResult> {
    m.require_symmetric()?;
    let n = m.rows();
    let mut a = m.symmetrize().data;
    let mut v = DenseMatrix::identity(n).data;
    let target = NUMERIC.jacobi_off_rel * m.frobenius_norm();
    let target2 = target * target;

    let off_norm2 = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s
    };

    let mut sweep = 0;
    while off_norm2(&a) > target2 {
        if sweep == NUMERIC.jacobi_max_sweeps {
            return Err(LinalgError::NoConvergence { sweeps: sweep });
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_p = c * akp - s * akq;
                    let new_q = s * akp + c * akq;
                    a[k * n + p] = new_p;
                    a[p * n + k] = new_p;
                    a[k * n + q] = new_q;
                    a[q * n + k] = new_q;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[(k, dst)] = v[k * n + src];
        }
    }
    Ok(SymEigenResult {
        eigenvalues,
        eigenvectors,
    })
}

pub fn lambda_max(m: &DenseMatrix) -> Result<f64> {
    Ok(eigh_jacobi(m)?.max())
}

pub fn lambda_min(m: &DenseMatrix) -> Result<f64> {
    Ok(eigh_jacobi(m)?.min())
}

/// LU factorization with partial pivoting, `P·A = L·U` packed in place.
#[derive(Debug, Clone)]
pub struct Lu {
    packed: DenseMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        a.require_square()?;
        let n = a.rows();
        let floor = NUMERIC.lu_pivot_rel * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (pivot_row, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)]))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .expect("non-empty column");
            if pivot.abs() <= floor || pivot == 0.0 {
                return Err(LinalgError::Singular { column: k, pivot });
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
                swaps += 1;
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self {
            packed: lu,
            perm,
            swaps,
        })
    }

    pub fn determinant(&self) -> f64 {
        let sign = if self.swaps % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.packed.diagonal().iter().product::<f64>()
    }

    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.packed.rows();
        if b.rows() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "right-hand side has {} rows, expected {n}",
                b.rows()
            )));
        }
        let mut x = DenseMatrix::zeros(n, b.cols());
        for c in 0..b.cols() {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] -= self.packed[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    y[i] -= self.packed[(i, k)] * y[k];
                }
                y[i] /= self.packed[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Ok(x)
    }
}

/// Solves `a · x = b`.
pub fn solve_linear(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Lu::factor(a)?.solve(b)
}

pub fn determinant(a: &DenseMatrix) -> Result<f64> {
    match Lu::factor(a) {
        Ok(lu) => Ok(lu.determinant()),
        Err(LinalgError::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Counts columns that survive modified Gram-Schmidt with one pass of
/// re-orthogonalization. A column counts when its residual norm after
/// projection exceeds `tol` times its original norm.
pub fn column_rank(m: &DenseMatrix, tol: f64) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..m.cols() {
        let col = m.column(j);
        let original = norm2(&col);
        if original == 0.0 {
            continue;
        }
        let mut r = col;
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
            }
        }
        let residual = norm2(&r);
        if residual > tol * original {
            basis.push(r.into_iter().map(|v| v / residual).collect());
        }
    }
    basis.len()
}

/// Solves `l · x = b` for lower-triangular `l`, column by column.
fn forward_substitute(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// `λ_max(pj · pi⁻¹)`, computed as `λ_max(L⁻¹ · pj · L⁻ᵀ)` with
/// `L = cholesky(pi)`.
pub fn max_gen_eig(pj: &DenseMatrix, pi: &DenseMatrix) -> Result<f64> {
    if pj.rows() != pi.rows() || !pj.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} against {}x{}",
            pj.rows(),
            pj.cols(),
            pi.rows(),
            pi.cols()
        )));
    }
    cholesky(pj)?;
    let l = cholesky(pi)?;
    // L⁻¹ pj, then (L⁻¹ (L⁻¹ pj)ᵀ) = L⁻¹ pj L⁻ᵀ since pj is symmetric.
    let half = forward_substitute(&l, pj);
    let full = forward_substitute(&l, &half.transpose());
    lambda_max(&full.symmetrize())
}

/// Outcome of the model-based Schur test.
#[derive(Debug, Clone)]
pub struct SchurVerdict {
    pub is_schur: bool,
    /// Solution of `AᵀPA − P = −I` when it is positive definite.
    pub p: Option<DenseMatrix>,
    /// The Kronecker system was singular: some eigenvalue product of `A`
    /// lies on the unit circle.
    pub degenerate: bool,
}

/// Solves `AᵀPA − P = −I` as a `d²`-dimensional linear system. `A` is Schur
/// stable iff the solution exists and is positive definite.
pub fn discrete_lyapunov_oracle(a: &DenseMatrix) -> Result<SchurVerdict> {
    a.require_square()?;
    let d = a.rows();
    let n = d * d;
    // Row-major vec: (AᵀPA)_{ij} = Σ_{k,l} A_{ki} A_{lj} P_{kl}.
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for kk in 0..d {
                for l in 0..d {
                    k[(row, kk * d + l)] = a[(kk, i)] * a[(l, j)];
                }
            }
            k[(row, row)] -= 1.0;
        }
    }
    let rhs = DenseMatrix::column_vector(
        &DenseMatrix::identity(d)
            .as_slice()
            .iter()
            .map(|v| -v)
            .collect::<Vec<_>>(),
    );
    let sol = match solve_linear(&k, &rhs) {
        Ok(s) => s,
        Err(LinalgError::Singular { .. }) => {
            return Ok(SchurVerdict {
                is_schur: false,
                p: None,
                degenerate: true,
            })
        }
        Err(e) => return Err(e),
    };
    let p = DenseMatrix::from_vec(d, d, sol.as_slice().to_vec())?.symmetrize();
    if cholesky(&p).is_ok() {
        Ok(SchurVerdict {
            is_schur: true,
            p: Some(p),
            degenerate: false,
        })
    } else {
        Ok(SchurVerdict {
            is_schur: false,
            p: None,
            degenerate: false,
        })
    }
}

/// Spectral radius by bisection on the Schur test of `A / r`: `A / r` is
/// Schur stable iff `r > ρ(A)`. Returns the midpoint of the final bracket.
pub fn spectral_radius_bisect(a: &DenseMatrix, tol: f64) -> Result<f64> {
    a.require_square()?;
    // Any induced norm bounds ρ; the max-row-sum norm is cheap.
    let mut hi = (0..a.rows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        * 1.01
        + 1e-12;
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if discrete_lyapunov_oracle(&a.scale(1.0 / mid))?.is_schur {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(matches!(
            DenseMatrix::from_rows(&[[1.0, f64::NAN]]),
            Err(LinalgError::NonFinite { row: 0, col: 1 })
        ));
        assert!(DenseMatrix::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(
            cholesky(&DenseMatrix::identity(3)).unwrap(),
            DenseMatrix::identity(3)
        );
        let l = cholesky(&m(&[&[4.0, 2.0], &[2.0, 5.0]])).unwrap();
        assert_eq!(l, m(&[&[2.0, 0.0], &[1.0, 2.0]]));
        assert!(matches!(
            cholesky(&m(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cholesky_rejects_asymmetric_input() {
        assert!(matches!(
            cholesky(&m(&[&[1.0, 0.5], &[0.0, 1.0]])),
            Err(LinalgError::NotSymmetric(_))
        ));
    }

    #[test]
    fn eigh_examples() {
        let e = eigh_jacobi(&DenseMatrix::from_diag(&[2.0, 1.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0]);
        let e = eigh_jacobi(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-15);
        let e = eigh_jacobi(&DenseMatrix::identity(5)).unwrap();
        assert!(e.eigenvalues.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn eigh_zero_matrix() {
        let e = eigh_jacobi(&DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn solve_examples() {
        let b = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(solve_linear(&DenseMatrix::identity(4), &b).unwrap(), b);
        let x = solve_linear(&DenseMatrix::from_diag(&[2.0, 4.0]), &m(&[&[2.0], &[4.0]])).unwrap();
        assert_eq!(x, m(&[&[1.0], &[1.0]]));
        assert!(matches!(
            solve_linear(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), &m(&[&[1.0], &[1.0]])),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(column_rank(&DenseMatrix::identity(3), 1e-8), 3);
        assert_eq!(column_rank(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), 1e-8), 1);
        assert_eq!(column_rank(&DenseMatrix::zeros(3, 2), 1e-8), 0);
    }

    #[test]
    fn max_gen_eig_examples() {
        let p = m(&[&[4.0, 2.0], &[2.0, 5.0]]);
        assert!((max_gen_eig(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let two = DenseMatrix::identity(3).scale(2.0);
        assert!((max_gen_eig(&two, &DenseMatrix::identity(3)).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            max_gen_eig(&p, &m(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn lyapunov_scalar_cases() {
        let v = discrete_lyapunov_oracle(&m(&[&[0.5]])).unwrap();
        assert!(v.is_schur);
        assert!((v.p.unwrap()[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        let v = discrete_lyapunov_oracle(&m(&[&[2.0]])).unwrap();
        assert!(!v.is_schur && !v.degenerate);
        let v = discrete_lyapunov_oracle(&m(&[&[1.0]])).unwrap();
        assert!(!v.is_schur && v.degenerate);
    }

    #[test]
    fn bisection_recovers_scalar_radius() {
        let r = spectral_radius_bisect(&m(&[&[-0.7]]), 1e-10).unwrap();
        assert!((r - 0.7).abs() < 1e-9);
    }
}
