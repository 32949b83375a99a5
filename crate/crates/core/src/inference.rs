//! Global max-type tests and support recovery.
//!
//! One sample: `H0: A is diagonal`, standardized entries
//! `M_ij = a_ij^2 / (theta_ij / nq)`.
//!
//! Two samples: `H0: R_A1 = R_A2`, standardized entries
//! `M*_ij = (r1_ij - r2_ij)^2 / (vt1_ij/(n1 q) + vt2_ij/(n2 q))` with
//! `vt_ij = theta_ij / (a_ii a_jj)`.
//!
//! Both reject when the maximum off-diagonal entry reaches
//! `q_alpha + 4 log p - log log p`, where `q_alpha` is the upper-alpha quantile
//! of the Gumbel law `F(t) = exp(-(8 pi)^{-1/2} exp(-t/2))`. Supports are the
//! entries at or above `tau log p`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimators::{
    correlation_from_cov, unwhitened_stats, whitened_stats, BEstimator, MatrixDataset, WhitenedStats,
};

/// Threshold constant for support recovery.
pub const DEFAULT_TAU: f64 = 4.0;

/// `-log(8 pi) - 2 log log (1 - alpha)^{-1}`.
pub fn gumbel_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    // log(1/(1-alpha)) = -ln_1p(-alpha), accurate for small alpha
    Ok(-(8.0 * PI).ln() - 2.0 * (-(-alpha).ln_1p()).ln())
}

pub fn gumbel_cdf(t: f64) -> f64 {
    (-gumbel_rate(t)).exp()
}

/// `1 - gumbel_cdf(t)` without cancellation in the upper tail.
pub fn gumbel_sf(t: f64) -> f64 {
    -(-gumbel_rate(t)).exp_m1()
}

fn gumbel_rate(t: f64) -> f64 {
    (8.0 * PI).sqrt().recip() * (-t / 2.0).exp()
}

/// Centering applied to the maximum: `4 log p - log log p`.
pub fn extreme_value_shift(p: usize) -> f64 {
    let lp = (p as f64).ln();
    4.0 * lp - lp.ln()
}

pub fn critical_value(alpha: f64, p: usize) -> Result<f64> {
    Ok(gumbel_quantile(alpha)? + extreme_value_shift(p))
}

/// Asymptotic p-value of a maximum statistic over a `p x p` off-diagonal.
pub fn max_stat_p_value(statistic: f64, p: usize) -> f64 {
    gumbel_sf(statistic - extreme_value_shift(p))
}

/// Outcome of a global test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Standardized entries; the diagonal is NaN (`null` in JSON).
    #[serde(with = "entry_stats_serde")]
    pub entry_stats: DMatrix<f64>,
    pub alpha: f64,
    pub method_tag: String,
}

impl PartialEq for TestResult {
    fn eq(&self, other: &Self) -> bool {
        self.statistic.to_bits() == other.statistic.to_bits()
            && self.threshold.to_bits() == other.threshold.to_bits()
            && self.p_value.to_bits() == other.p_value.to_bits()
            && self.reject == other.reject
            && self.alpha.to_bits() == other.alpha.to_bits()
            && self.method_tag == other.method_tag
            && self.entry_stats.shape() == other.entry_stats.shape()
            && self
                .entry_stats
                .iter()
                .zip(other.entry_stats.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

mod entry_stats_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Option<f64>>> = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| Some(m[(i, j)]).filter(|v| v.is_finite()))
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<Option<f64>>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("entry_stats must be square"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j].unwrap_or(f64::NAN)))
    }
}

/// Index pairs `(i, j)`, `1 <= i < j <= p`, declared nonzero or different.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    pub edges: BTreeSet<(usize, usize)>,
    pub tau: f64,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Off-diagonal support of a symmetric matrix, 1-based.
    pub fn of_nonzero(m: &DMatrix<f64>) -> Self {
        let p = m.nrows();
        let mut edges = BTreeSet::new();
        for j in 0..p {
            for i in 0..j {
                if m[(i, j)] != 0.0 {
                    edges.insert((i + 1, j + 1));
                }
            }
        }
        SupportSet { edges, tau: 0.0 }
    }
}

fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    let p = m.nrows();
    for j in 0..p {
        for i in 0..p {
            if i != j && !m[(i, j)].is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "entry statistic ({}, {}) is {}",
                    i + 1,
                    j + 1,
                    m[(i, j)]
                )));
            }
        }
    }
    Ok(())
}

/// `M_ij = a_ij^2 / (theta_ij / nq)`, diagonal NaN.
pub fn entry_statistics_one(ws: &WhitenedStats) -> Result<DMatrix<f64>> {
    let p = ws.a_hat.dim();
    let nq = (ws.n * ws.q) as f64;
    let a = ws.a_hat.as_matrix();
    let m = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            f64::NAN
        } else {
            a[(i, j)] * a[(i, j)] / (ws.theta_hat[(i, j)] / nq)
        }
    });
    ensure_finite(&m)?;
    Ok(m)
}

/// Two-sample standardized entries together with the two correlation estimates.
#[derive(Debug, Clone)]
pub struct TwoSampleEntries {
    pub stats: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub r2: DMatrix<f64>,
}

pub fn entry_statistics_two(ws1: &WhitenedStats, ws2: &WhitenedStats) -> Result<TwoSampleEntries> {
    let p = ws1.a_hat.dim();
    if ws2.a_hat.dim() != p || ws1.q != ws2.q {
        return Err(Error::invalid("groups differ in shape"));
    }
    let r1 = correlation_from_cov(&ws1.a_hat)?.into_matrix();
    let r2 = correlation_from_cov(&ws2.a_hat)?.into_matrix();
    let vt = |ws: &WhitenedStats, i: usize, j: usize| {
        let a = ws.a_hat.as_matrix();
        ws.theta_hat[(i, j)] / (a[(i, i)] * a[(j, j)]) / (ws.n * ws.q) as f64
    };
    let stats = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            f64::NAN
        } else {
            let d = r1[(i, j)] - r2[(i, j)];
            d * d / (vt(ws1, i, j) + vt(ws2, i, j))
        }
    });
    ensure_finite(&stats)?;
    Ok(TwoSampleEntries { stats, r1, r2 })
}

/// Largest off-diagonal entry.
pub fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut best = f64::NEG_INFINITY;
    for j in 0..p {
        for i in 0..j {
            best = best.max(m[(i, j)]);
        }
    }
    best
}

/// Global decision from precomputed entry statistics.
pub fn test_from_entry_stats(entry_stats: DMatrix<f64>, alpha: f64, method_tag: &str) -> Result<TestResult> {
    let p = entry_stats.nrows();
    if p < 2 {
        return Err(Error::invalid(format!("need p >= 2, got {p}")));
    }
    let threshold = critical_value(alpha, p)?;
    let statistic = max_off_diagonal(&entry_stats);
    Ok(TestResult {
        statistic,
        threshold,
        p_value: max_stat_p_value(statistic, p),
        reject: statistic >= threshold,
        entry_stats,
        alpha,
        method_tag: method_tag.to_string(),
    })
}

/// `{(i, j) : M_ij >= tau log p, i < j}`.
pub fn support_from_entry_stats(entry_stats: &DMatrix<f64>, tau: f64) -> SupportSet {
    let p = entry_stats.nrows();
    let cut = tau * (p as f64).ln();
    let mut edges = BTreeSet::new();
    for j in 0..p {
        for i in 0..j {
            if entry_stats[(i, j)] >= cut {
                edges.insert((i + 1, j + 1));
            }
        }
    }
    SupportSet { edges, tau }
}

fn check_p(ds: &MatrixDataset) -> Result<()> {
    if ds.p() < 2 {
        return Err(Error::invalid(format!("need p >= 2, got {}", ds.p())));
    }
    Ok(())
}

fn check_pair(ds1: &MatrixDataset, ds2: &MatrixDataset) -> Result<()> {
    check_p(ds1)?;
    if ds1.p() != ds2.p() || ds1.q() != ds2.q() {
        return Err(Error::invalid(format!(
            "groups have different shapes: {}x{} vs {}x{}",
            ds1.p(),
            ds1.q(),
            ds2.p(),
            ds2.q()
        )));
    }
    Ok(())
}

pub fn one_sample_entries(ds: &MatrixDataset, b: &BEstimator) -> Result<DMatrix<f64>> {
    check_p(ds)?;
    entry_statistics_one(&whitened_stats(ds, b)?)
}

/// Tests `H0: A is diagonal`.
pub fn one_sample_test(ds: &MatrixDataset, alpha: f64, b: &BEstimator) -> Result<TestResult> {
    gumbel_quantile(alpha)?;
    test_from_entry_stats(one_sample_entries(ds, b)?, alpha, b.tag())
}

pub fn one_sample_support(ds: &MatrixDataset, tau: f64, b: &BEstimator) -> Result<SupportSet> {
    Ok(support_from_entry_stats(&one_sample_entries(ds, b)?, tau))
}

pub fn two_sample_entries(
    ds1: &MatrixDataset,
    ds2: &MatrixDataset,
    b1: &BEstimator,
    b2: &BEstimator,
) -> Result<TwoSampleEntries> {
    check_pair(ds1, ds2)?;
    entry_statistics_two(&whitened_stats(ds1, b1)?, &whitened_stats(ds2, b2)?)
}

/// Tests `H0: R_A1 = R_A2`. Each group is whitened by its own resolved `B`.
pub fn two_sample_test(
    ds1: &MatrixDataset,
    ds2: &MatrixDataset,
    alpha: f64,
    b1: &BEstimator,
    b2: &BEstimator,
) -> Result<TestResult> {
    gumbel_quantile(alpha)?;
    let entries = two_sample_entries(ds1, ds2, b1, b2)?;
    test_from_entry_stats(entries.stats, alpha, b1.tag())
}

pub fn two_sample_support(
    ds1: &MatrixDataset,
    ds2: &MatrixDataset,
    tau: f64,
    b1: &BEstimator,
    b2: &BEstimator,
) -> Result<SupportSet> {
    Ok(support_from_entry_stats(&two_sample_entries(ds1, ds2, b1, b2)?.stats, tau))
}

/// `sign(r1_ij - r2_ij)` on the recovered support, zero elsewhere.
pub fn sign_matrix_from_entries(entries: &TwoSampleEntries, tau: f64) -> Vec<Vec<i8>> {
    let p = entries.stats.nrows();
    let support = support_from_entry_stats(&entries.stats, tau);
    let mut out = vec![vec![0i8; p]; p];
    for &(i, j) in &support.edges {
        let d = entries.r1[(i - 1, j - 1)] - entries.r2[(i - 1, j - 1)];
        let s = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        out[i - 1][j - 1] = s;
        out[j - 1][i - 1] = s;
    }
    out
}

pub fn sign_matrix(
    ds1: &MatrixDataset,
    ds2: &MatrixDataset,
    tau: f64,
    b1: &BEstimator,
    b2: &BEstimator,
) -> Result<Vec<Vec<i8>>> {
    Ok(sign_matrix_from_entries(&two_sample_entries(ds1, ds2, b1, b2)?, tau))
}

pub const VECTOR_TAG: &str = "vector";

pub fn vector_entries_one(ds: &MatrixDataset) -> Result<DMatrix<f64>> {
    check_p(ds)?;
    entry_statistics_one(&unwhitened_stats(ds))
}

pub fn vector_entries_two(ds1: &MatrixDataset, ds2: &MatrixDataset) -> Result<TwoSampleEntries> {
    check_pair(ds1, ds2)?;
    entry_statistics_two(&unwhitened_stats(ds1), &unwhitened_stats(ds2))
}

/// One-sample covariance test treating the `nq` columns as i.i.d. vectors.
pub fn vector_baseline_one(ds: &MatrixDataset, alpha: f64) -> Result<TestResult> {
    gumbel_quantile(alpha)?;
    test_from_entry_stats(vector_entries_one(ds)?, alpha, VECTOR_TAG)
}

/// Two-sample correlation test treating the `nq` columns as i.i.d. vectors.
pub fn vector_baseline_two(ds1: &MatrixDataset, ds2: &MatrixDataset, alpha: f64) -> Result<TestResult> {
    gumbel_quantile(alpha)?;
    test_from_entry_stats(vector_entries_two(ds1, ds2)?.stats, alpha, VECTOR_TAG)
}
