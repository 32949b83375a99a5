use matcorr_core::inference::{
    max_stat_p_value, one_sample_entries, test_from_entry_stats, two_sample_entries, TestResult,
};
use matcorr_core::montecarlo::similarity;
use matcorr_core::{ar1_covariance, BEstimator, DMatrix, MatNormParams, MatrixDataset, SupportSet, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: u32 = 256;

fn random_dataset(p: usize, q: usize, n: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = rng.random_range(-0.6..0.8);
    let diag: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..3.0)).collect();
    let params = MatNormParams::new(SymMatrix::from_diagonal(&diag).unwrap(), ar1_covariance(q, rho).unwrap()).unwrap();
    params.sample_n(n, &mut rng)
}

fn rel_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    a.iter()
        .zip(b.iter())
        .all(|(x, y)| (x.is_nan() && y.is_nan()) || (x - y).abs() <= tol * y.abs().max(1.0))
}

fn dims() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (2usize..8, 2usize..7, 1usize..5, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn one_sample_scale_invariance((p, q, n, seed) in dims(), c in 0.01f64..100.0) {
        let xs = random_dataset(p, q, n, seed);
        let b = ar1_covariance(q, 0.3).unwrap();
        let base = MatrixDataset::centered(xs.clone()).unwrap();
        let scaled = MatrixDataset::centered(xs.iter().map(|x| x * c).collect()).unwrap();
        let oracle = BEstimator::Oracle(b);
        let m0 = one_sample_entries(&base, &oracle).unwrap();
        prop_assert!(rel_close(&one_sample_entries(&scaled, &oracle).unwrap(), &m0, 1e-9));
        if n * p > q {
            let s0 = one_sample_entries(&base, &BEstimator::Sample).unwrap();
            let s1 = one_sample_entries(&scaled, &BEstimator::Sample).unwrap();
            prop_assert!(rel_close(&s1, &s0, 1e-8));
        }
    }

    #[test]
    fn one_sample_row_scaling_invariance((p, q, n, seed) in dims()) {
        let xs = random_dataset(p, q, n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..10.0)).collect();
        let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        let oracle = BEstimator::Oracle(ar1_covariance(q, -0.2).unwrap());
        let m0 = one_sample_entries(&MatrixDataset::centered(xs.clone()).unwrap(), &oracle).unwrap();
        let m1 = one_sample_entries(&MatrixDataset::centered(xs.iter().map(|x| &dm * x).collect()).unwrap(), &oracle).unwrap();
        prop_assert!(rel_close(&m1, &m0, 1e-9));
    }

    #[test]
    fn one_sample_row_permutation((p, q, n, seed) in dims()) {
        let xs = random_dataset(p, q, n, seed);
        let mut perm: Vec<usize> = (0..p).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for i in (1..p).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<DMatrix<f64>> = xs.iter().map(|x| DMatrix::from_fn(p, q, |i, l| x[(perm[i], l)])).collect();
        let oracle = BEstimator::Oracle(ar1_covariance(q, 0.5).unwrap());
        let m0 = one_sample_entries(&MatrixDataset::centered(xs).unwrap(), &oracle).unwrap();
        let m1 = one_sample_entries(&MatrixDataset::centered(permuted).unwrap(), &oracle).unwrap();
        let expected = DMatrix::from_fn(p, p, |i, j| m0[(perm[i], perm[j])]);
        prop_assert!(rel_close(&m1, &expected, 1e-12));
    }

    #[test]
    fn two_sample_group_swap_and_scaling((p, q, n, seed) in dims(), c1 in 0.1f64..10.0, c2 in 0.1f64..10.0) {
        let x1 = random_dataset(p, q, n, seed);
        let x2 = random_dataset(p, q, n + 1, seed.wrapping_add(7));
        let b1 = BEstimator::Oracle(ar1_covariance(q, 0.8).unwrap());
        let b2 = BEstimator::Oracle(ar1_covariance(q, 0.9).unwrap());
        let d1 = MatrixDataset::centered(x1.clone()).unwrap();
        let d2 = MatrixDataset::centered(x2.clone()).unwrap();
        let m = two_sample_entries(&d1, &d2, &b1, &b2).unwrap().stats;
        let swapped = two_sample_entries(&d2, &d1, &b2, &b1).unwrap().stats;
        prop_assert!(rel_close(&swapped, &m, 1e-12));

        let s1 = MatrixDataset::centered(x1.iter().map(|x| x * c1).collect()).unwrap();
        let s2 = MatrixDataset::centered(x2.iter().map(|x| x * c2).collect()).unwrap();
        let scaled = two_sample_entries(&s1, &s2, &b1, &b2).unwrap().stats;
        prop_assert!(rel_close(&scaled, &m, 1e-8));
    }

    #[test]
    fn decision_threshold_and_p_value_agree((p, q, n, seed) in dims(), alpha in 0.001f64..0.5) {
        let ds = MatrixDataset::centered(random_dataset(p, q, n, seed)).unwrap();
        let m = one_sample_entries(&ds, &BEstimator::Oracle(ar1_covariance(q, 0.1).unwrap())).unwrap();
        let r = test_from_entry_stats(m, alpha, "oracle").unwrap();
        prop_assert_eq!(r.reject, r.statistic >= r.threshold);
        prop_assert!((r.p_value - max_stat_p_value(r.statistic, p)).abs() == 0.0);
        // away from the boundary the p-value and the threshold give the same decision
        if (r.p_value - alpha).abs() > 1e-12 {
            prop_assert_eq!(r.reject, r.p_value <= alpha);
        }
    }

    #[test]
    fn rejection_is_monotone_in_alpha((p, q, n, seed) in dims(), a1 in 0.001f64..0.9, a2 in 0.001f64..0.9) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let ds = MatrixDataset::centered(random_dataset(p, q, n, seed)).unwrap();
        let m = one_sample_entries(&ds, &BEstimator::Oracle(ar1_covariance(q, 0.1).unwrap())).unwrap();
        let r_lo = test_from_entry_stats(m.clone(), lo, "oracle").unwrap();
        let r_hi = test_from_entry_stats(m, hi, "oracle").unwrap();
        prop_assert!(r_lo.threshold >= r_hi.threshold);
        prop_assert!(!r_lo.reject || r_hi.reject);
    }

    #[test]
    fn test_result_json_round_trip((p, q, n, seed) in dims()) {
        let ds = MatrixDataset::centered(random_dataset(p, q, n, seed)).unwrap();
        let m = one_sample_entries(&ds, &BEstimator::Oracle(ar1_covariance(q, 0.0).unwrap())).unwrap();
        let r = test_from_entry_stats(m, 0.05, "oracle").unwrap();
        let back: TestResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn similarity_is_bounded_and_symmetric(
        a in proptest::collection::btree_set((1usize..6, 6usize..12), 0..10),
        b in proptest::collection::btree_set((1usize..6, 6usize..12), 0..10),
    ) {
        let sa = SupportSet { edges: a, tau: 4.0 };
        let sb = SupportSet { edges: b, tau: 4.0 };
        let s = similarity(&sa, &sb);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, similarity(&sb, &sa));
        prop_assert_eq!(similarity(&sa, &sa), 1.0);
    }
}

#[test]
fn similarity_closed_forms() {
    let set = |e: &[(usize, usize)]| SupportSet { edges: e.iter().copied().collect(), tau: 4.0 };
    assert_eq!(similarity(&set(&[]), &set(&[])), 1.0);
    assert_eq!(similarity(&set(&[(1, 2)]), &set(&[])), 0.0);
    assert_eq!(similarity(&set(&[]), &set(&[(1, 2)])), 0.0);
    assert_eq!(similarity(&set(&[(1, 2), (3, 4)]), &set(&[(1, 2), (3, 4)])), 1.0);
    let s = similarity(&set(&[(1, 2), (3, 4)]), &set(&[(1, 2), (5, 6), (7, 8)]));
    assert!((s - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    assert_eq!(similarity(&set(&[(1, 2)]), &set(&[(2, 3)])), 0.0);
}
