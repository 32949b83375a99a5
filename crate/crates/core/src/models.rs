//! Matrix-normal sampling and the covariance scenarios of the simulation designs.
//!
//! `X ~ MN(0, A, B)` means `vec(X) ~ N(0, B ⊗ A)`: `A` is the `p x p` row
//! covariance, `B` the `q x q` column covariance. Samples are drawn as
//! `A^{1/2} Z B^{1/2}` with symmetric square roots.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sqrt_psd, sym_eig, SymMatrix, DEFAULT_REL_TOL};

/// Parameters of a matrix-normal law with precomputed square-root factors.
#[derive(Debug, Clone)]
pub struct MatNormParams {
    a: SymMatrix,
    b: SymMatrix,
    sqrt_a: DMatrix<f64>,
    sqrt_b: DMatrix<f64>,
}

impl MatNormParams {
    pub fn new(a: SymMatrix, b: SymMatrix) -> Result<Self> {
        let sqrt_a = sqrt_psd(&a, DEFAULT_REL_TOL)?.into_matrix();
        let sqrt_b = sqrt_psd(&b, DEFAULT_REL_TOL)?.into_matrix();
        Ok(Self {
            a,
            b,
            sqrt_a,
            sqrt_b,
        })
    }

    pub fn row_cov(&self) -> &SymMatrix {
        &self.a
    }

    pub fn col_cov(&self) -> &SymMatrix {
        &self.b
    }

    pub fn p(&self) -> usize {
        self.a.dim()
    }

    pub fn q(&self) -> usize {
        self.b.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let z = DMatrix::from_fn(self.p(), self.q(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.sqrt_a * z * &self.sqrt_b
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<DMatrix<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

pub fn sample_matrix_normal<R: Rng + ?Sized>(params: &MatNormParams, rng: &mut R) -> DMatrix<f64> {
    params.sample(rng)
}

/// AR(1) autocorrelation matrix, entry `(i, j) = rho^{|i-j|}`.
pub fn ar1_covariance(q: usize, rho: f64) -> Result<SymMatrix> {
    if q == 0 {
        return Err(Error::invalid("ar1 dimension must be positive"));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::invalid(format!("ar1 coefficient {rho} outside (-1, 1)")));
    }
    let m = DMatrix::from_fn(q, q, |i, j| rho.powi(i.abs_diff(j) as i32));
    Ok(SymMatrix::symmetrized(m))
}

/// How the nonzero entries of a sparse symmetric perturbation are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    /// Total nonzero count, counting both triangles; must be even.
    pub n_nonzero: usize,
    pub mag_low: f64,
    pub mag_high: f64,
    pub fixed_magnitude: bool,
    pub random_sign: bool,
}

/// Sparse symmetric perturbation with zero diagonal.
///
/// `n_nonzero / 2` lower-triangle positions are drawn uniformly without
/// replacement and mirrored. Per position the magnitude is drawn first
/// (skipped when fixed), then the sign.
#[allow(non_snake_case)]
pub fn perturbation_U<R: Rng + ?Sized>(
    p: usize,
    spec: &PerturbationSpec,
    rng: &mut R,
) -> Result<SymMatrix> {
    if !spec.n_nonzero.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "perturbation needs an even number of nonzero entries, got {}",
            spec.n_nonzero
        )));
    }
    let slots = p * p.saturating_sub(1) / 2;
    let pairs = spec.n_nonzero / 2;
    if pairs > slots {
        return Err(Error::invalid(format!(
            "{} nonzero entries do not fit in a {p}x{p} off-diagonal",
            spec.n_nonzero
        )));
    }
    if !(spec.mag_low.is_finite() && spec.mag_high.is_finite()) || spec.mag_low > spec.mag_high {
        return Err(Error::invalid("perturbation magnitude range is invalid"));
    }
    let mut u = DMatrix::zeros(p, p);
    if pairs == 0 {
        return Ok(SymMatrix::symmetrized(u));
    }
    let positions = index::sample(rng, slots, pairs).into_vec();
    for linear in positions {
        let (i, j) = lower_triangle_position(linear);
        let magnitude = if spec.fixed_magnitude || spec.mag_low == spec.mag_high {
            spec.mag_low
        } else {
            rng.random_range(spec.mag_low..=spec.mag_high)
        };
        let sign = if spec.random_sign && rng.random_bool(0.5) {
            -1.0
        } else {
            1.0
        };
        u[(i, j)] = sign * magnitude;
        u[(j, i)] = sign * magnitude;
    }
    Ok(SymMatrix::symmetrized(u))
}

/// Maps `0, 1, 2, ...` onto `(1,0), (2,0), (2,1), (3,0), ...`.
fn lower_triangle_position(linear: usize) -> (usize, usize) {
    let mut i = 1;
    let mut start = 0;
    while start + i <= linear {
        start += i;
        i += 1;
    }
    (i, linear - start)
}

/// `sqrt(log p / (n q))`, the unit of signal strength in the designs.
pub fn signal_unit(p: usize, nq: usize) -> f64 {
    ((p as f64).ln() / nq as f64).sqrt()
}

/// `(base + U + delta I) / (1 + delta)` with `delta = |lambda_min(base + U)| + 0.05`.
///
/// With `base = I` this is the one-sample alternative.
pub fn shifted_perturbation(base: &SymMatrix, u: &SymMatrix) -> Result<SymMatrix> {
    let sum = SymMatrix::symmetrized(base.as_matrix() + u.as_matrix());
    let delta = sym_eig(&sum)?.lambda_min().abs() + 0.05;
    Ok(shift_and_scale(&sum, delta))
}

fn shift_and_scale(m: &SymMatrix, delta: f64) -> SymMatrix {
    let dim = m.dim();
    let shifted = m.as_matrix() + DMatrix::<f64>::identity(dim, dim) * delta;
    SymMatrix::symmetrized(shifted / (1.0 + delta))
}

/// One-sample alternative row covariance; returns `(A, U)`.
#[allow(non_snake_case)]
pub fn one_sample_alt_A<R: Rng + ?Sized>(
    p: usize,
    nq_product: usize,
    rng: &mut R,
) -> Result<(SymMatrix, SymMatrix)> {
    let s = signal_unit(p, nq_product);
    let spec = PerturbationSpec {
        n_nonzero: 8,
        mag_low: 2.0 * s,
        mag_high: 4.0 * s,
        fixed_magnitude: false,
        random_sign: true,
    };
    let u = perturbation_U(p, &spec, rng)?;
    Ok((shifted_perturbation(&SymMatrix::identity(p), &u)?, u))
}

/// One-sample support-recovery row covariance; returns `(A, U)`.
#[allow(non_snake_case)]
pub fn one_sample_support_A<R: Rng + ?Sized>(
    p: usize,
    nq_product: usize,
    rng: &mut R,
) -> Result<(SymMatrix, SymMatrix)> {
    let s = signal_unit(p, nq_product);
    let spec = PerturbationSpec {
        n_nonzero: 50,
        mag_low: 4.0 * s,
        mag_high: 4.0 * s,
        fixed_magnitude: true,
        random_sign: true,
    };
    let u = perturbation_U(p, &spec, rng)?;
    Ok((shifted_perturbation(&SymMatrix::identity(p), &u)?, u))
}

/// Block-diagonal compound-symmetric covariance rescaled by `D^{1/2}`.
///
/// Blocks are 5x5 with unit diagonal and 0.5 off-diagonal; `D` has i.i.d.
/// `Unif(0.5, 2.5)` entries.
pub fn cai_model1_sigma<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<SymMatrix> {
    if p == 0 || !p.is_multiple_of(5) {
        return Err(Error::invalid(format!("dimension {p} is not a positive multiple of 5")));
    }
    let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.5)).collect();
    cai_model1_sigma_with_scales(&d)
}

/// Same as [`cai_model1_sigma`] with a caller-supplied diagonal `D`.
pub fn cai_model1_sigma_with_scales(d: &[f64]) -> Result<SymMatrix> {
    let p = d.len();
    if p == 0 || !p.is_multiple_of(5) {
        return Err(Error::invalid(format!("dimension {p} is not a positive multiple of 5")));
    }
    if d.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::invalid("scales must be positive"));
    }
    let m = DMatrix::from_fn(p, p, |i, j| {
        let base = if i == j {
            1.0
        } else if i / 5 == j / 5 {
            0.5
        } else {
            0.0
        };
        base * (d[i] * d[j]).sqrt()
    });
    Ok(SymMatrix::symmetrized(m))
}

/// Two-sample alternative pair from a given `Sigma` and perturbation `U`.
///
/// `delta = |min(lambda_min(Sigma), lambda_min(Sigma + U))| + 0.05`.
pub fn two_sample_pair_from(sigma: &SymMatrix, u: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let perturbed = SymMatrix::symmetrized(sigma.as_matrix() + u.as_matrix());
    let lo = sym_eig(sigma)?.lambda_min().min(sym_eig(&perturbed)?.lambda_min());
    let delta = lo.abs() + 0.05;
    Ok((shift_and_scale(sigma, delta), shift_and_scale(&perturbed, delta)))
}

/// Two-sample alternative: returns `(A1, A2, U)`. `Sigma` is drawn before `U`.
pub fn two_sample_pair<R: Rng + ?Sized>(
    p: usize,
    nq_product: usize,
    rng: &mut R,
) -> Result<(SymMatrix, SymMatrix, SymMatrix)> {
    let s = signal_unit(p, nq_product);
    let spec = PerturbationSpec {
        n_nonzero: 10,
        mag_low: 3.0 * s,
        mag_high: 5.0 * s,
        fixed_magnitude: false,
        random_sign: true,
    };
    let sigma = cai_model1_sigma(p, rng)?;
    let u = perturbation_U(p, &spec, rng)?;
    let (a1, a2) = two_sample_pair_from(&sigma, &u)?;
    Ok((a1, a2, u))
}

/// Two-sample support-recovery pair: 50 nonzero entries of magnitude `4 sqrt(log p/(nq))`.
pub fn two_sample_support_pair<R: Rng + ?Sized>(
    p: usize,
    nq_product: usize,
    rng: &mut R,
) -> Result<(SymMatrix, SymMatrix, SymMatrix)> {
    let s = signal_unit(p, nq_product);
    let spec = PerturbationSpec {
        n_nonzero: 50,
        mag_low: 4.0 * s,
        mag_high: 4.0 * s,
        fixed_magnitude: true,
        random_sign: true,
    };
    let sigma = cai_model1_sigma(p, rng)?;
    let u = perturbation_U(p, &spec, rng)?;
    let (a1, a2) = two_sample_pair_from(&sigma, &u)?;
    Ok((a1, a2, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    OneSampleNull,
    OneSampleAlt,
    OneSampleSupport,
    TwoSampleNull,
    TwoSampleAlt,
    TwoSampleSupport,
}

impl Design {
    pub fn is_two_sample(self) -> bool {
        matches!(
            self,
            Design::TwoSampleNull | Design::TwoSampleAlt | Design::TwoSampleSupport
        )
    }

    pub fn is_support(self) -> bool {
        matches!(self, Design::OneSampleSupport | Design::TwoSampleSupport)
    }

    pub fn name(self) -> &'static str {
        match self {
            Design::OneSampleNull => "one-sample-null",
            Design::OneSampleAlt => "one-sample-alt",
            Design::OneSampleSupport => "one-sample-support",
            Design::TwoSampleNull => "two-sample-null",
            Design::TwoSampleAlt => "two-sample-alt",
            Design::TwoSampleSupport => "two-sample-support",
        }
    }

    /// Column covariances: AR(1) 0.4 for the one-sample tests, 0.8 for one-sample
    /// support, 0.8 and 0.9 for the two groups.
    pub fn column_covariances(self, q: usize) -> Result<Vec<SymMatrix>> {
        match self {
            Design::OneSampleNull | Design::OneSampleAlt => Ok(vec![ar1_covariance(q, 0.4)?]),
            Design::OneSampleSupport => Ok(vec![ar1_covariance(q, 0.8)?]),
            _ => Ok(vec![ar1_covariance(q, 0.8)?, ar1_covariance(q, 0.9)?]),
        }
    }

    /// Draws the row covariances of one replicate. Returns the per-group `A`
    /// matrices and, for alternatives, the perturbation `U`.
    pub fn draw_row_covariances<R: Rng + ?Sized>(
        self,
        p: usize,
        nq_product: usize,
        rng: &mut R,
    ) -> Result<(Vec<SymMatrix>, Option<SymMatrix>)> {
        Ok(match self {
            Design::OneSampleNull => (vec![SymMatrix::identity(p)], None),
            Design::OneSampleAlt => {
                let (a, u) = one_sample_alt_A(p, nq_product, rng)?;
                (vec![a], Some(u))
            }
            Design::OneSampleSupport => {
                let (a, u) = one_sample_support_A(p, nq_product, rng)?;
                (vec![a], Some(u))
            }
            Design::TwoSampleNull => {
                let sigma = cai_model1_sigma(p, rng)?;
                (vec![sigma.clone(), sigma], None)
            }
            Design::TwoSampleAlt => {
                let (a1, a2, u) = two_sample_pair(p, nq_product, rng)?;
                (vec![a1, a2], Some(u))
            }
            Design::TwoSampleSupport => {
                let (a1, a2, u) = two_sample_support_pair(p, nq_product, rng)?;
                (vec![a1, a2], Some(u))
            }
        })
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which nuisance estimate a study plugs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Sample,
    Banded,
    Vector,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Oracle, Method::Sample, Method::Banded, Method::Vector];

    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Sample => "sample",
            Method::Banded => "banded",
            Method::Vector => "vector",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_reps() -> usize {
    1000
}

fn default_method() -> Method {
    Method::Sample
}

/// One simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub design: Design,
    pub p: usize,
    pub q: usize,
    pub n: usize,
    #[serde(default)]
    pub n1: Option<usize>,
    #[serde(default)]
    pub n2: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_method")]
    pub method: Method,
}

impl ScenarioConfig {
    pub fn new(design: Design, p: usize, q: usize, n: usize, method: Method, reps: usize, seed: u64) -> Self {
        Self {
            design,
            p,
            q,
            n,
            n1: None,
            n2: None,
            seed,
            reps,
            alpha: 0.05,
            method,
        }
    }

    /// Group sample sizes; two-sample groups default to `n` each.
    pub fn group_sizes(&self) -> Vec<usize> {
        if self.design.is_two_sample() {
            vec![self.n1.unwrap_or(self.n), self.n2.unwrap_or(self.n)]
        } else {
            vec![self.n]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid(format!("p must be at least 2, got {}", self.p)));
        }
        if self.q == 0 || self.n == 0 {
            return Err(Error::invalid("q and n must be positive"));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.design.is_two_sample() && !self.p.is_multiple_of(5) {
            return Err(Error::invalid(format!(
                "two-sample designs need p divisible by 5, got {}",
                self.p
            )));
        }
        for n in self.group_sizes() {
            if n == 0 {
                return Err(Error::invalid("group sizes must be positive"));
            }
            if n * self.p <= self.q {
                return Err(Error::invalid(format!(
                    "need n*p > q for an invertible column estimate (n = {n}, p = {}, q = {})",
                    self.p, self.q
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn ar1_examples() {
        assert_eq!(ar1_covariance(1, 0.7).unwrap().to_rows(), vec![vec![1.0]]);
        let m = ar1_covariance(3, 0.4).unwrap();
        let want = [[1.0, 0.4, 0.16], [0.4, 1.0, 0.4], [0.16, 0.4, 1.0]];
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert!((m.get(i, j) - w).abs() < 1e-15);
            }
        }
        assert_eq!(ar1_covariance(3, 0.0).unwrap(), SymMatrix::identity(3));
        assert!(ar1_covariance(3, 1.0).is_err());
    }

    #[test]
    fn ar1_is_pd() {
        for rho in [-0.95, -0.5, 0.0, 0.4, 0.8, 0.95] {
            let e = sym_eig(&ar1_covariance(20, rho).unwrap()).unwrap();
            assert!(e.lambda_min() > 0.0, "rho = {rho}");
        }
    }

    #[test]
    fn lower_triangle_enumeration() {
        let got: Vec<_> = (0..6).map(lower_triangle_position).collect();
        assert_eq!(got, vec![(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]);
    }

    #[test]
    fn perturbation_counts_and_shape() {
        let zero = PerturbationSpec {
            n_nonzero: 0,
            mag_low: 1.0,
            mag_high: 1.0,
            fixed_magnitude: true,
            random_sign: false,
        };
        let u = perturbation_U(10, &zero, &mut rng(1)).unwrap();
        assert_eq!(u.max_abs(), 0.0);

        let s = signal_unit(50, 500);
        let spec = PerturbationSpec {
            n_nonzero: 50,
            mag_low: 4.0 * s,
            mag_high: 4.0 * s,
            fixed_magnitude: true,
            random_sign: true,
        };
        let u = perturbation_U(50, &spec, &mut rng(2)).unwrap();
        let mut lower = 0;
        for i in 0..50 {
            assert_eq!(u.get(i, i), 0.0);
            for j in 0..i {
                assert_eq!(u.get(i, j), u.get(j, i));
                if u.get(i, j) != 0.0 {
                    lower += 1;
                    assert!((u.get(i, j).abs() - 4.0 * s).abs() < 1e-15);
                }
            }
        }
        assert_eq!(lower, 25);
    }

    #[test]
    fn perturbation_ranges() {
        let spec = PerturbationSpec {
            n_nonzero: 8,
            mag_low: 0.2,
            mag_high: 0.4,
            fixed_magnitude: false,
            random_sign: false,
        };
        let u = perturbation_U(6, &spec, &mut rng(3)).unwrap();
        let nz: Vec<f64> = u.as_matrix().iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 8);
        assert!(nz.iter().all(|v| (0.2..=0.4).contains(v)));
    }

    #[test]
    fn perturbation_rejects_bad_counts() {
        let mut spec = PerturbationSpec {
            n_nonzero: 7,
            mag_low: 1.0,
            mag_high: 1.0,
            fixed_magnitude: true,
            random_sign: true,
        };
        assert!(matches!(perturbation_U(5, &spec, &mut rng(0)), Err(Error::InvalidConfig(_))));
        spec.n_nonzero = 22; // 11 pairs > 10 slots
        assert!(matches!(perturbation_U(5, &spec, &mut rng(0)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_perturbation_gives_identity() {
        let zero = SymMatrix::symmetrized(DMatrix::zeros(4, 4));
        let a = shifted_perturbation(&SymMatrix::identity(4), &zero).unwrap();
        assert_eq!(a, SymMatrix::identity(4));
    }

    #[test]
    fn delta_formula_by_substitution() {
        // I + U with lambda_min = 0.3: U = [[0, 0.7], [0.7, 0]]
        let u = SymMatrix::from_rows(&[vec![0.0, 0.7], vec![0.7, 0.0]]).unwrap();
        let a = shifted_perturbation(&SymMatrix::identity(2), &u).unwrap();
        let delta = 0.35;
        assert!((a.get(0, 0) - (1.0 + delta) / (1.0 + delta)).abs() < 1e-12);
        assert!((a.get(0, 1) - 0.7 / (1.0 + delta)).abs() < 1e-12);
    }

    #[test]
    fn alternative_a_is_pd_with_bound() {
        let mut r = rng(11);
        for _ in 0..20 {
            let (a, u) = one_sample_alt_A(50, 500, &mut r).unwrap();
            let sum = SymMatrix::symmetrized(DMatrix::identity(50, 50) + u.as_matrix());
            let lmin_sum = sym_eig(&sum).unwrap().lambda_min();
            let delta = lmin_sum.abs() + 0.05;
            let lmin = sym_eig(&a).unwrap().lambda_min();
            assert!((lmin - (lmin_sum + delta) / (1.0 + delta)).abs() < 1e-10);
            assert!(lmin >= 0.05 / (1.0 + delta) - 1e-12);
        }
    }

    #[test]
    fn cai_sigma_structure() {
        let s = cai_model1_sigma_with_scales(&[1.0; 5]).unwrap();
        assert!((sym_eig(&s).unwrap().lambda_min() - 0.5).abs() < 1e-12);
        assert!((sym_eig(&s).unwrap().lambda_max() - 3.0).abs() < 1e-12);

        let d: Vec<f64> = (0..10).map(|i| 0.5 + 0.2 * i as f64).collect();
        let s = cai_model1_sigma_with_scales(&d).unwrap();
        assert_eq!(s.get(0, 5), 0.0);
        for (i, di) in d.iter().enumerate() {
            assert!((s.get(i, i) - di).abs() < 1e-15);
        }
        assert!(cai_model1_sigma(12, &mut rng(0)).is_err());
    }

    #[test]
    fn two_sample_pair_properties() {
        let mut r = rng(5);
        for _ in 0..10 {
            let (a1, a2, u) = two_sample_pair(50, 500, &mut r).unwrap();
            let diff = a1.as_matrix() - a2.as_matrix();
            // A1 - A2 = -U / (1 + delta): ratio is constant on the support
            let mut ratio: Option<f64> = None;
            for (d, uv) in diff.iter().zip(u.as_matrix().iter()) {
                if *uv == 0.0 {
                    assert!(d.abs() < 1e-14);
                } else {
                    let r = -d / uv;
                    if let Some(prev) = ratio {
                        assert!((r - prev).abs() < 1e-12);
                    }
                    ratio = Some(r);
                }
            }
            let delta = 1.0 / ratio.unwrap() - 1.0;
            for a in [&a1, &a2] {
                assert!(sym_eig(a).unwrap().lambda_min() >= 0.05 / (1.0 + delta) - 1e-12);
            }
        }
        let sigma = cai_model1_sigma(10, &mut r).unwrap();
        let zero = SymMatrix::symmetrized(DMatrix::zeros(10, 10));
        let (a1, a2) = two_sample_pair_from(&sigma, &zero).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn sampler_scalar_cases() {
        let params = MatNormParams::new(SymMatrix::from_diagonal(&[4.0]).unwrap(), SymMatrix::identity(5)).unwrap();
        let mut r = rng(9);
        let n = 40_000;
        let mut sum_sq = 0.0;
        for _ in 0..n / 5 {
            let x = params.sample(&mut r);
            sum_sq += x.iter().map(|v| v * v).sum::<f64>();
        }
        let var = sum_sq / n as f64;
        // SE of the variance estimate is 4 * sqrt(2 / n) ~= 0.028
        assert!((var - 4.0).abs() < 0.15, "var = {var}");
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = Design::TwoSampleAlt.draw_row_covariances(50, 500, &mut rng(77)).unwrap();
        let b = Design::TwoSampleAlt.draw_row_covariances(50, 500, &mut rng(77)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn config_json_field_names() {
        let cfg = ScenarioConfig::new(Design::OneSampleNull, 50, 50, 10, Method::Oracle, 1000, 7);
        let v: serde_json::Value = serde_json::to_value(&cfg).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["alpha", "design", "method", "n", "n1", "n2", "p", "q", "reps", "seed"]
        );
        assert_eq!(v["design"], "one-sample-null");
        let back: ScenarioConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ScenarioConfig::new(Design::OneSampleNull, 5, 60, 10, Method::Sample, 10, 1);
        assert!(cfg.validate().is_err()); // n*p = 50 <= q
        cfg.q = 49;
        assert!(cfg.validate().is_ok());
        cfg.design = Design::TwoSampleNull;
        cfg.n2 = Some(9);
        assert!(cfg.validate().is_err()); // 45 <= 49
    }
}
