//! Global minimum-variance portfolios on estimated covariance matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse_psd, SymMatrix, DEFAULT_REL_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub labels: Option<Vec<String>>,
}

impl WeightVector {
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} weights",
                labels.len(),
                self.weights.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }
}

/// `Sigma^{-1} 1 / (1^T Sigma^{-1} 1)`.
pub fn gmv_weights(sigma: &SymMatrix) -> Result<WeightVector> {
    let inv = inverse_psd(sigma, DEFAULT_REL_TOL)?;
    let raw = inv.as_matrix() * DVector::from_element(sigma.dim(), 1.0);
    let total = raw.sum();
    if !(total.is_finite() && total != 0.0) {
        return Err(Error::NumericalFailure(format!(
            "GMV normalizer is {total}"
        )));
    }
    Ok(WeightVector {
        weights: raw.iter().map(|w| w / total).collect(),
        labels: None,
    })
}

/// `D^{1/2} R D^{1/2}` with `D = diag(d_source)`: the correlation structure of
/// `r_target` on the variances of `d_source`.
pub fn blend_cov(d_source: &SymMatrix, r_target: &SymMatrix) -> Result<SymMatrix> {
    let p = d_source.dim();
    if r_target.dim() != p {
        return Err(Error::invalid(format!(
            "cannot blend a {p}x{p} covariance with a {0}x{0} correlation",
            r_target.dim()
        )));
    }
    let sd: Vec<f64> = d_source
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            if v > 0.0 {
                Ok(v.sqrt())
            } else {
                Err(Error::DegenerateVariance { index, value: v })
            }
        })
        .collect::<Result<_>>()?;
    if let Some(i) = r_target.diagonal().iter().position(|v| (v - 1.0).abs() > 1e-12) {
        return Err(Error::invalid(format!(
            "correlation matrix has diagonal entry {} at index {i}",
            r_target.get(i, i)
        )));
    }
    let r = r_target.as_matrix();
    Ok(SymMatrix::symmetrized(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            sd[i] * sd[i]
        } else {
            sd[i] * r[(i, j)] * sd[j]
        }
    })))
}

/// Sum of absolute positions.
pub fn leverage(w: &WeightVector) -> f64 {
    w.weights.iter().map(|v| v.abs()).sum()
}
