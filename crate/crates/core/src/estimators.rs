//! Nuisance column-covariance estimates and the pre-whitened row statistics.
//!
//! Given observations `X_1..X_n` (each `p x q`) and a resolved column
//! covariance `B`, every observation is whitened as `Y_k = X_k B^{-1/2}`.
//! The row covariance estimate and the entrywise variance estimates are then
//!
//! ```text
//! a_ij     = 1/(nq) sum_k sum_l Y_k[i,l] Y_k[j,l]
//! theta_ij = 1/(nq) sum_k sum_l (Y_k[i,l] Y_k[j,l] - a_ij)^2
//! ```
//!
//! Sums run k-major, l-minor in a fixed order so results are reproducible bit
//! for bit.

use std::borrow::Cow;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_psd, SymMatrix, DEFAULT_REL_TOL};

/// Seed for the cross-validation splits when a banded estimator has no bandwidth.
pub const BANDWIDTH_CV_SEED: u64 = 0x6261_6e64_6564;

pub const DEFAULT_CV_SPLITS: usize = 5;

/// `n` observed `p x q` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDataset {
    observations: Vec<DMatrix<f64>>,
    /// When false, each row variable is demeaned across all `k, l` before estimation.
    pub centered: bool,
}

impl MatrixDataset {
    pub fn new(observations: Vec<DMatrix<f64>>, centered: bool) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| Error::invalid("dataset has no observations"))?;
        let (p, q) = first.shape();
        if p == 0 || q == 0 {
            return Err(Error::invalid("observations must have at least one row and column"));
        }
        for (k, x) in observations.iter().enumerate() {
            if x.shape() != (p, q) {
                return Err(Error::invalid(format!(
                    "observation {k} is {}x{}, expected {p}x{q}",
                    x.nrows(),
                    x.ncols()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("observation {k} has non-finite entries")));
            }
        }
        Ok(Self {
            observations,
            centered,
        })
    }

    /// Simulated data: already mean-zero.
    pub fn centered(observations: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(observations, true)
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn p(&self) -> usize {
        self.observations[0].nrows()
    }

    pub fn q(&self) -> usize {
        self.observations[0].ncols()
    }

    pub fn observations(&self) -> &[DMatrix<f64>] {
        &self.observations
    }

    /// Swaps the roles of rows and columns, so the row machinery tests `B`.
    pub fn transposed(&self) -> Self {
        Self {
            observations: self.observations.iter().map(|x| x.transpose()).collect(),
            centered: self.centered,
        }
    }

    pub fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Result<Self> {
        Self::new(self.observations.iter().map(f).collect(), self.centered)
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            observations: idx.iter().map(|&k| self.observations[k].clone()).collect(),
            centered: self.centered,
        }
    }

    /// Observations as used for estimation: demeaned per row unless `centered`.
    pub fn prepared(&self) -> Cow<'_, [DMatrix<f64>]> {
        if self.centered {
            return Cow::Borrowed(&self.observations);
        }
        let (p, q, n) = (self.p(), self.q(), self.n());
        let mut means = vec![0.0; p];
        for x in &self.observations {
            for l in 0..q {
                for (i, m) in means.iter_mut().enumerate() {
                    *m += x[(i, l)];
                }
            }
        }
        let count = (n * q) as f64;
        means.iter_mut().for_each(|m| *m /= count);
        Cow::Owned(
            self.observations
                .iter()
                .map(|x| DMatrix::from_fn(p, q, |i, l| x[(i, l)] - means[i]))
                .collect(),
        )
    }
}

/// How the nuisance column covariance `B` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum BEstimator {
    /// The true `B` is known.
    Oracle(SymMatrix),
    /// `(1/np) sum_k X_k^T X_k`.
    Sample,
    /// The sample estimate banded at `bandwidth`; selected by cross-validation when `None`.
    Banded { bandwidth: Option<usize> },
}

impl BEstimator {
    pub fn tag(&self) -> &'static str {
        match self {
            BEstimator::Oracle(_) => "oracle",
            BEstimator::Sample => "sample",
            BEstimator::Banded { .. } => "banded",
        }
    }
}

/// Pre-whitened row covariance and entrywise variance estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedStats {
    pub a_hat: SymMatrix,
    pub theta_hat: DMatrix<f64>,
    pub n: usize,
    pub q: usize,
    /// Bandwidth actually used by a banded estimator.
    pub bandwidth: Option<usize>,
}

/// Naive column covariance `(1/np) sum_k X_k^T X_k`.
pub fn naive_col_cov(ds: &MatrixDataset) -> SymMatrix {
    naive_col_cov_of(&ds.prepared(), ds.p())
}

fn naive_col_cov_of(xs: &[DMatrix<f64>], p: usize) -> SymMatrix {
    let q = xs[0].ncols();
    let mut acc = DMatrix::zeros(q, q);
    for x in xs {
        acc += x.transpose() * x;
    }
    SymMatrix::symmetrized(acc / (xs.len() * p) as f64)
}

/// Zeroes every entry farther than `k` from the diagonal.
pub fn band_matrix(s: &SymMatrix, k: usize) -> SymMatrix {
    let m = s.as_matrix();
    let dim = s.dim();
    SymMatrix::symmetrized(DMatrix::from_fn(dim, dim, |i, j| {
        if i.abs_diff(j) <= k {
            m[(i, j)]
        } else {
            0.0
        }
    }))
}

/// `{0, 1, ..., min(q - 1, 20)}`.
pub fn default_bandwidth_grid(q: usize) -> Vec<usize> {
    (0..=q.saturating_sub(1).min(20)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandwidthChoice {
    pub bandwidth: usize,
    /// Set when there were too few observations to cross-validate.
    pub fallback: bool,
}

/// Chooses a bandwidth by repeated 2/3 : 1/3 random splits.
///
/// Each split scores `|| band(B_train, k) - B_validate ||_F`; the smallest
/// average wins, ties going to the smaller `k`.
pub fn select_bandwidth<R: Rng + ?Sized>(
    ds: &MatrixDataset,
    grid: &[usize],
    splits: usize,
    rng: &mut R,
) -> Result<BandwidthChoice> {
    if grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty"));
    }
    if splits == 0 {
        return Err(Error::invalid("need at least one cross-validation split"));
    }
    if grid.len() == 1 {
        return Ok(BandwidthChoice {
            bandwidth: grid[0],
            fallback: false,
        });
    }
    let n = ds.n();
    if n < 3 {
        let bandwidth = (ds.q() as f64).cbrt().ceil() as usize;
        return Ok(BandwidthChoice {
            bandwidth,
            fallback: true,
        });
    }

    let prepared = MatrixDataset::centered(ds.prepared().into_owned())?;
    let n_train = 2 * n / 3;
    let mut grid: Vec<usize> = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();

    let mut loss = vec![0.0; grid.len()];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..splits {
        order.shuffle(rng);
        let train = naive_col_cov(&prepared.subset(&order[..n_train]));
        let validate = naive_col_cov(&prepared.subset(&order[n_train..]));
        for (slot, &k) in loss.iter_mut().zip(&grid) {
            let diff = band_matrix(&train, k).into_matrix() - validate.as_matrix();
            *slot += diff.norm();
        }
    }

    let mut best = 0;
    for (idx, &l) in loss.iter().enumerate().skip(1) {
        if l < loss[best] {
            best = idx;
        }
    }
    Ok(BandwidthChoice {
        bandwidth: grid[best],
        fallback: false,
    })
}

/// Resolves `B` for a dataset. Returns the matrix and the bandwidth used, if banded.
pub fn resolve_b(ds: &MatrixDataset, b: &BEstimator) -> Result<(SymMatrix, Option<usize>)> {
    let (n, p, q) = (ds.n(), ds.p(), ds.q());
    match b {
        BEstimator::Oracle(m) => {
            if m.dim() != q {
                return Err(Error::invalid(format!(
                    "oracle column covariance is {0}x{0} but observations have {q} columns",
                    m.dim()
                )));
            }
            Ok((m.clone(), None))
        }
        BEstimator::Sample | BEstimator::Banded { .. } => {
            if n * p <= q {
                return Err(Error::invalid(format!(
                    "estimating B needs n*p > q (n = {n}, p = {p}, q = {q})"
                )));
            }
            let sample = naive_col_cov(ds);
            match b {
                BEstimator::Banded { bandwidth } => {
                    let k = match bandwidth {
                        Some(k) => *k,
                        None => {
                            let mut rng = ChaCha8Rng::seed_from_u64(BANDWIDTH_CV_SEED);
                            select_bandwidth(ds, &default_bandwidth_grid(q), DEFAULT_CV_SPLITS, &mut rng)?
                                .bandwidth
                        }
                    };
                    Ok((band_matrix(&sample, k), Some(k)))
                }
                _ => Ok((sample, None)),
            }
        }
    }
}

/// Row statistics after whitening by the resolved `B`.
pub fn whitened_stats(ds: &MatrixDataset, b: &BEstimator) -> Result<WhitenedStats> {
    let (resolved, bandwidth) = resolve_b(ds, b)?;
    let t = inv_sqrt_psd(&resolved, DEFAULT_REL_TOL)?;
    let prepared = ds.prepared();
    let whitened: Vec<DMatrix<f64>> = prepared.iter().map(|x| x * t.as_matrix()).collect();
    let mut stats = row_stats(&whitened);
    stats.bandwidth = bandwidth;
    Ok(stats)
}

/// Row statistics treating the `nq` columns as i.i.d. vectors (no whitening).
pub fn unwhitened_stats(ds: &MatrixDataset) -> WhitenedStats {
    row_stats(&ds.prepared())
}

fn row_stats(ys: &[DMatrix<f64>]) -> WhitenedStats {
    let n = ys.len();
    let (p, q) = ys[0].shape();
    let len = n * q;

    // rows[i] = [Y_1[i, .], Y_2[i, .], ...]
    let mut rows = vec![0.0; p * len];
    for (k, y) in ys.iter().enumerate() {
        for l in 0..q {
            let col = y.column(l);
            for i in 0..p {
                rows[i * len + k * q + l] = col[i];
            }
        }
    }
    let row = |i: usize| &rows[i * len..(i + 1) * len];

    let scale = 1.0 / len as f64;
    let mut a = DMatrix::zeros(p, p);
    let mut theta = DMatrix::zeros(p, p);
    for i in 0..p {
        let ri = row(i);
        for j in i..p {
            let rj = row(j);
            let mut s = 0.0;
            for t in 0..len {
                s += ri[t] * rj[t];
            }
            let a_ij = s * scale;
            let mut v = 0.0;
            for t in 0..len {
                let d = ri[t] * rj[t] - a_ij;
                v += d * d;
            }
            let theta_ij = v * scale;
            a[(i, j)] = a_ij;
            a[(j, i)] = a_ij;
            theta[(i, j)] = theta_ij;
            theta[(j, i)] = theta_ij;
        }
    }
    WhitenedStats {
        a_hat: SymMatrix::symmetrized(a),
        theta_hat: theta,
        n,
        q,
        bandwidth: None,
    }
}

/// `r_ij = a_ij / sqrt(a_ii a_jj)`.
pub fn correlation_from_cov(a_hat: &SymMatrix) -> Result<SymMatrix> {
    let d = a_hat.diagonal();
    if let Some((index, &value)) = d.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
        return Err(Error::DegenerateVariance { index, value });
    }
    let sd: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    let m = a_hat.as_matrix();
    let dim = a_hat.dim();
    Ok(SymMatrix::symmetrized(DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            1.0
        } else {
            m[(i, j)] / (sd[i] * sd[j])
        }
    })))
}
