//! Dense symmetric linear algebra.
//!
//! Everything downstream works with [`SymMatrix`], a square matrix that is
//! symmetric by construction. Spectral functions (`S^{-1/2}`, `S^{-1}`,
//! `S^{1/2}`) all go through a single eigendecomposition and reject inputs
//! whose smallest eigenvalue is not safely positive.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default relative eigenvalue floor for the spectral functions.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const EIG_EPS: f64 = f64::EPSILON;
const EIG_MAX_ITER: usize = 10_000;

/// Square symmetric matrix with finite entries, stored in full.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds from a square matrix, replacing it by `(M + M^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("matrix dimension must be positive"));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % m.nrows(), pos / m.nrows());
            return Err(Error::NumericalFailure(format!(
                "non-finite entry at ({r}, {c})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation. Callers guarantee a finite square input.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = m;
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix(out)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("rows do not form a square matrix"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)] == 0.0))
    }

    /// Rows as nested vectors, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.0[(i, j)]).collect()).collect()
    }
}

/// Eigendecomposition `S = V diag(lambda) V^T`, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("dimension is positive")
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `V diag(f(lambda)) V^T`, re-symmetrized.
    fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(j).scale_mut(s);
        }
        SymMatrix::symmetrized(scaled * v.transpose())
    }
}

pub fn sym_eig(s: &SymMatrix) -> Result<SymEigen> {
    let dim = s.dim();
    let eig = SymmetricEigen::try_new(s.as_matrix().clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| {
            Error::NumericalFailure(format!(
                "symmetric eigensolver did not converge (dim = {dim}, max |entry| = {:e})",
                s.max_abs()
            ))
        })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(dim, dim, |i, j| eig.eigenvectors[(i, order[j])]);
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite eigenvalue (dim = {dim})"
        )));
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

fn checked_eig(s: &SymMatrix, rel_tol: f64) -> Result<SymEigen> {
    let eig = sym_eig(s)?;
    let (lo, hi) = (eig.lambda_min(), eig.lambda_max());
    if hi <= 0.0 || lo <= rel_tol * hi {
        return Err(Error::NotPositiveDefinite {
            dim: s.dim(),
            lambda_min: lo,
            lambda_max: hi,
        });
    }
    Ok(eig)
}

/// Applies `f` entrywise to the diagonal of an exactly diagonal PD matrix.
fn diagonal_map(s: &SymMatrix, rel_tol: f64, f: impl Fn(f64) -> f64) -> Option<Result<SymMatrix>> {
    if !s.is_diagonal() {
        return None;
    }
    let d = s.diagonal();
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    if hi <= 0.0 || lo <= rel_tol * hi {
        return Some(Err(Error::NotPositiveDefinite {
            dim: s.dim(),
            lambda_min: lo,
            lambda_max: hi,
        }));
    }
    let mapped: Vec<f64> = d.into_iter().map(f).collect();
    Some(Ok(SymMatrix(DMatrix::from_diagonal(&DVector::from_vec(mapped)))))
}

/// Symmetric `S^{-1/2}`.
pub fn inv_sqrt_psd(s: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    if let Some(r) = diagonal_map(s, rel_tol, |v| 1.0 / v.sqrt()) {
        return r;
    }
    Ok(checked_eig(s, rel_tol)?.map_spectrum(|v| 1.0 / v.sqrt()))
}

pub fn inverse_psd(s: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    if let Some(r) = diagonal_map(s, rel_tol, |v| 1.0 / v) {
        return r;
    }
    Ok(checked_eig(s, rel_tol)?.map_spectrum(|v| 1.0 / v))
}

/// Symmetric `S^{1/2}`, used by the matrix-normal sampler.
pub fn sqrt_psd(s: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    if let Some(r) = diagonal_map(s, rel_tol, f64::sqrt) {
        return r;
    }
    Ok(checked_eig(s, rel_tol)?.map_spectrum(f64::sqrt))
}

/// `T S T`, re-symmetrized.
pub fn sandwich(t: &SymMatrix, s: &SymMatrix) -> SymMatrix {
    SymMatrix::symmetrized(t.as_matrix() * s.as_matrix() * t.as_matrix())
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}
