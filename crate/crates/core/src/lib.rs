//! Hypothesis tests and support recovery for the row covariance and row
//! correlation structure of matrix-normal observations.
//!
//! Observations are `p x q` matrices with `vec(X) ~ N(0, B ⊗ A)`. The column
//! covariance `B` is a nuisance: it is estimated (or supplied) and removed by
//! pre-whitening, after which max-type statistics over the off-diagonal of
//! the row covariance `A` (one sample) or of the difference of two row
//! correlation matrices (two samples) are compared against a Gumbel limit.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod models;
pub mod montecarlo;

pub use analysis::{blend_cov, gmv_weights, leverage, WeightVector};
pub use error::{Error, Result};
pub use estimators::{
    band_matrix, correlation_from_cov, naive_col_cov, select_bandwidth, whitened_stats, BEstimator,
    BandwidthChoice, MatrixDataset, WhitenedStats,
};
pub use inference::{
    gumbel_cdf, gumbel_quantile, one_sample_support, one_sample_test, sign_matrix, two_sample_support,
    two_sample_test, vector_baseline_one, vector_baseline_two, SupportSet, TestResult,
};
pub use linalg::{inv_sqrt_psd, inverse_psd, sym_eig, SymEigen, SymMatrix};
pub use models::{ar1_covariance, Design, MatNormParams, Method, ScenarioConfig};
pub use montecarlo::{run_study, similarity, MCResult, Table};

pub use nalgebra::DMatrix;
