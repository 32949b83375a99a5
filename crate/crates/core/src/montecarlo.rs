//! Seeded replication engine for size, power and support-recovery studies.
//!
//! Replicate `r` of a study draws from its own ChaCha8 stream seeded with
//! `replicate_seed(master, r)`, so results do not depend on how replicates
//! are scheduled across threads. Within a replicate the draw order is fixed:
//! scenario matrices (`D`, then `U`), then group 1 data, then group 2 data,
//! then bandwidth cross-validation splits when the banded method is used.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    default_bandwidth_grid, select_bandwidth, BEstimator, MatrixDataset, DEFAULT_CV_SPLITS,
};
use crate::inference::{
    one_sample_entries, support_from_entry_stats, test_from_entry_stats, two_sample_entries,
    vector_entries_one, vector_entries_two, SupportSet, DEFAULT_TAU,
};
use crate::linalg::SymMatrix;
use crate::models::{Design, MatNormParams, Method, ScenarioConfig};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of `(master, replicate)`.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    mix64(mix64(master) ^ replicate.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn replicate_rng(master: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replicate_seed(master, replicate))
}

/// `|est ∩ truth| / sqrt(|est| |truth|)`; 1 when both are empty, 0 when only one is.
pub fn similarity(est: &SupportSet, truth: &SupportSet) -> f64 {
    match (est.is_empty(), truth.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let common = est.edges.intersection(&truth.edges).count() as f64;
            common / ((est.len() as f64) * (truth.len() as f64)).sqrt()
        }
    }
}

/// Aggregated study output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    pub scenario: ScenarioConfig,
    pub method_tag: String,
    pub reps: usize,
    pub rejection_rate: f64,
    pub rate_se: f64,
    pub mean_similarity: Option<f64>,
    pub similarity_se: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub reject: bool,
    pub similarity: Option<f64>,
}

fn estimator_for(
    method: Method,
    oracle: &SymMatrix,
    ds: &MatrixDataset,
    rng: &mut ChaCha8Rng,
) -> Result<BEstimator> {
    Ok(match method {
        Method::Oracle => BEstimator::Oracle(oracle.clone()),
        Method::Sample | Method::Vector => BEstimator::Sample,
        Method::Banded => {
            let choice = select_bandwidth(ds, &default_bandwidth_grid(ds.q()), DEFAULT_CV_SPLITS, rng)?;
            BEstimator::Banded {
                bandwidth: Some(choice.bandwidth),
            }
        }
    })
}

/// Runs one replicate of `cfg`.
pub fn run_replicate(cfg: &ScenarioConfig, replicate: usize) -> Result<ReplicateOutcome> {
    let mut rng = replicate_rng(cfg.seed, replicate as u64);
    let sizes = cfg.group_sizes();
    let nq = sizes[0] * cfg.q;

    let (row_covs, perturbation) = cfg.design.draw_row_covariances(cfg.p, nq, &mut rng)?;
    let col_covs = cfg.design.column_covariances(cfg.q)?;

    let mut datasets = Vec::with_capacity(sizes.len());
    for ((a, b), &n) in row_covs.iter().zip(&col_covs).zip(&sizes) {
        let params = MatNormParams::new(a.clone(), b.clone())?;
        datasets.push(MatrixDataset::centered(params.sample_n(n, &mut rng))?);
    }

    let stats = match (cfg.method, datasets.as_slice()) {
        (Method::Vector, [ds]) => vector_entries_one(ds)?,
        (Method::Vector, [ds1, ds2]) => vector_entries_two(ds1, ds2)?.stats,
        (method, [ds]) => {
            let b = estimator_for(method, &col_covs[0], ds, &mut rng)?;
            one_sample_entries(ds, &b)?
        }
        (method, [ds1, ds2]) => {
            let b1 = estimator_for(method, &col_covs[0], ds1, &mut rng)?;
            let b2 = estimator_for(method, &col_covs[1], ds2, &mut rng)?;
            two_sample_entries(ds1, ds2, &b1, &b2)?.stats
        }
        _ => unreachable!("designs have one or two groups"),
    };

    let similarity = if cfg.design.is_support() {
        let truth = match &perturbation {
            Some(u) => SupportSet::of_nonzero(u.as_matrix()),
            None => SupportSet::of_nonzero(&DMatrix::zeros(cfg.p, cfg.p)),
        };
        let est = support_from_entry_stats(&stats, DEFAULT_TAU);
        Some(similarity(&est, &truth))
    } else {
        None
    };
    let result = test_from_entry_stats(stats, cfg.alpha, cfg.method.name())?;
    Ok(ReplicateOutcome {
        reject: result.reject,
        similarity,
    })
}

/// Runs `cfg.reps` replicates on `workers` threads and aggregates them in
/// replicate order.
pub fn run_study(cfg: &ScenarioConfig, workers: usize) -> Result<MCResult> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<Result<ReplicateOutcome>> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| run_replicate(cfg, r))
            .collect()
    });

    let mut rejections = 0usize;
    let mut sims = Vec::new();
    for (replicate, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome.map_err(|e| Error::Replicate {
            replicate,
            source: Box::new(e),
        })?;
        rejections += outcome.reject as usize;
        if let Some(s) = outcome.similarity {
            sims.push(s);
        }
    }

    let reps = cfg.reps as f64;
    let rate = rejections as f64 / reps;
    let (mean_similarity, similarity_se) = if cfg.design.is_support() {
        let mean = sims.iter().sum::<f64>() / reps;
        let se = if sims.len() > 1 {
            let var = sims.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1.0);
            (var / reps).sqrt()
        } else {
            0.0
        };
        (Some(mean), Some(se))
    } else {
        (None, None)
    };
    Ok(MCResult {
        scenario: cfg.clone(),
        method_tag: cfg.method.name().to_string(),
        reps: cfg.reps,
        rejection_rate: rate,
        rate_se: (rate * (1.0 - rate) / reps).sqrt(),
        mean_similarity,
        similarity_se,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub const CSV_HEADER: &str =
    "design,p,q,n,n1,n2,method,reps,alpha,rate,rate_se,similarity,similarity_se,wall_seconds";

/// 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_full).unwrap_or_default()
}

impl MCResult {
    /// One CSV row; `wall_seconds` is left empty when `timing` is false.
    pub fn csv_row(&self, timing: bool) -> String {
        let s = &self.scenario;
        let (n1, n2) = if s.design.is_two_sample() {
            let g = s.group_sizes();
            (g[0].to_string(), g[1].to_string())
        } else {
            (String::new(), String::new())
        };
        [
            s.design.name().to_string(),
            s.p.to_string(),
            s.q.to_string(),
            s.n.to_string(),
            n1,
            n2,
            self.method_tag.clone(),
            self.reps.to_string(),
            fmt_full(s.alpha),
            fmt_full(self.rejection_rate),
            fmt_full(self.rate_se),
            fmt_opt(self.mean_similarity),
            fmt_opt(self.similarity_se),
            if timing {
                fmt_full(self.wall_seconds)
            } else {
                String::new()
            },
        ]
        .join(",")
    }
}

/// Which published grid to regenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    /// One-sample size and power.
    OneSampleTest,
    /// One-sample support recovery.
    OneSampleSupport,
    /// Two-sample size and power.
    TwoSampleTest,
    /// Two-sample support recovery.
    TwoSampleSupport,
}

impl Table {
    pub fn from_number(t: u8) -> Result<Self> {
        match t {
            2 => Ok(Table::OneSampleTest),
            4 => Ok(Table::OneSampleSupport),
            5 => Ok(Table::TwoSampleTest),
            6 => Ok(Table::TwoSampleSupport),
            _ => Err(Error::invalid(format!("no simulation grid for table {t}; use 2, 4, 5 or 6"))),
        }
    }

    pub fn designs(self) -> &'static [Design] {
        match self {
            Table::OneSampleTest => &[Design::OneSampleNull, Design::OneSampleAlt],
            Table::OneSampleSupport => &[Design::OneSampleSupport],
            Table::TwoSampleTest => &[Design::TwoSampleNull, Design::TwoSampleAlt],
            Table::TwoSampleSupport => &[Design::TwoSampleSupport],
        }
    }

    /// 1000 replicates for size/power, 100 for support recovery.
    pub fn default_reps(self) -> usize {
        match self {
            Table::OneSampleTest | Table::TwoSampleTest => 1000,
            _ => 100,
        }
    }

    /// Grid over `p, q in {50, 200}`, `n in {10, 50}`, ordered by p, design,
    /// method, n, q.
    pub fn configs(self, methods: &[Method], reps: Option<usize>, alpha: f64, seed: u64) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for p in [50, 200] {
            for &design in self.designs() {
                for &method in methods {
                    for n in [10, 50] {
                        for q in [50, 200] {
                            let mut cfg = ScenarioConfig::new(
                                design,
                                p,
                                q,
                                n,
                                method,
                                reps.unwrap_or(self.default_reps()),
                                seed,
                            );
                            cfg.alpha = alpha;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Runs configurations one after another and streams CSV rows to `out`.
pub fn run_grid<W: Write>(
    configs: &[ScenarioConfig],
    workers: usize,
    timing: bool,
    out: &mut W,
) -> Result<Vec<MCResult>> {
    let io_err = |e: std::io::Error| Error::Io {
        path: "<output>".into(),
        source: e,
    };
    writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
    let mut results = Vec::with_capacity(configs.len());
    for cfg in configs {
        let r = run_study(cfg, workers)?;
        writeln!(out, "{}", r.csv_row(timing)).map_err(io_err)?;
        out.flush().map_err(io_err)?;
        results.push(r);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(edges: &[(usize, usize)]) -> SupportSet {
        SupportSet {
            edges: edges.iter().copied().collect::<BTreeSet<_>>(),
            tau: 4.0,
        }
    }

    #[test]
    fn similarity_closed_forms() {
        let truth = set(&[(1, 2), (2, 3)]);
        assert_eq!(similarity(&truth, &truth), 1.0);
        assert_eq!(similarity(&set(&[(1, 3)]), &set(&[(1, 2)])), 0.0);
        let s = similarity(&set(&[(1, 2), (1, 3)]), &set(&[(1, 2)]));
        assert!((s - 0.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(similarity(&set(&[]), &set(&[])), 1.0);
        assert_eq!(similarity(&set(&[]), &truth), 0.0);
        assert_eq!(similarity(&truth, &set(&[])), 0.0);
    }

    #[test]
    fn seeds_differ_per_replicate() {
        let a = replicate_seed(7, 0);
        assert_ne!(a, replicate_seed(7, 1));
        assert_ne!(a, replicate_seed(8, 0));
        assert_eq!(a, replicate_seed(7, 0));
    }

    #[test]
    fn single_replicate_is_reproducible() {
        let cfg = ScenarioConfig::new(Design::OneSampleAlt, 10, 6, 3, Method::Sample, 1, 42);
        let a = run_study(&cfg, 1).unwrap();
        let b = run_study(&cfg, 1).unwrap();
        assert_eq!(a.rejection_rate, b.rejection_rate);
        assert_eq!(a.csv_row(false), b.csv_row(false));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        for method in Method::ALL {
            // banding a strongly correlated estimate can lose definiteness at this size
            let design = match method {
                Method::Banded => Design::OneSampleNull,
                _ => Design::TwoSampleSupport,
            };
            let mut cfg = ScenarioConfig::new(design, 10, 8, 12, method, 24, 3);
            cfg.alpha = 0.2;
            let a = run_study(&cfg, 1).unwrap();
            let b = run_study(&cfg, 4).unwrap();
            assert_eq!(a.csv_row(false), b.csv_row(false), "{method}");
        }
    }

    #[test]
    fn support_designs_report_similarity() {
        let cfg = ScenarioConfig::new(Design::OneSampleSupport, 10, 5, 4, Method::Oracle, 5, 1);
        let r = run_study(&cfg, 2).unwrap();
        let s = r.mean_similarity.unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert!(r.similarity_se.is_some());

        let cfg = ScenarioConfig::new(Design::OneSampleNull, 10, 5, 4, Method::Oracle, 5, 1);
        assert!(run_study(&cfg, 2).unwrap().mean_similarity.is_none());
    }

    #[test]
    fn csv_row_layout() {
        let cfg = ScenarioConfig::new(Design::TwoSampleNull, 10, 5, 4, Method::Vector, 3, 1);
        let r = run_study(&cfg, 1).unwrap();
        let row = r.csv_row(false);
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), CSV_HEADER.split(',').count());
        assert_eq!(&fields[..8], &["two-sample-null", "10", "5", "4", "4", "4", "vector", "3"]);
        assert_eq!(fields[11], "");
        assert_eq!(fields[13], "");
        assert!(r.csv_row(true).split(',').next_back().unwrap().parse::<f64>().is_ok());
    }

    #[test]
    fn invalid_configs_are_rejected_up_front() {
        let cfg = ScenarioConfig::new(Design::TwoSampleNull, 12, 5, 4, Method::Oracle, 3, 1);
        assert!(matches!(run_study(&cfg, 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn table_grids() {
        let cfgs = Table::from_number(2).unwrap().configs(&[Method::Oracle], None, 0.05, 1);
        assert_eq!(cfgs.len(), 16);
        assert!(cfgs.iter().all(|c| c.reps == 1000));
        let cfgs = Table::from_number(6).unwrap().configs(&Method::ALL, None, 0.05, 1);
        assert_eq!(cfgs.len(), 32);
        assert!(cfgs.iter().all(|c| c.reps == 100));
        assert!(Table::from_number(3).is_err());
    }
}
