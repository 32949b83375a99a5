//! `matcorr`: tests, support recovery, simulations and GMV portfolios for
//! matrix-normal data.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matcorr_core::analysis::{blend_cov, gmv_weights, leverage};
use matcorr_core::inference::{
    one_sample_entries, sign_matrix_from_entries, support_from_entry_stats, two_sample_entries,
    vector_baseline_one, vector_baseline_two, vector_entries_one, vector_entries_two, DEFAULT_TAU,
};
use matcorr_core::io::{load_dataset, read_sym_csv, write_sign_csv, LoadedDataset};
use matcorr_core::montecarlo::run_grid;
use matcorr_core::{
    one_sample_test, two_sample_test, BEstimator, Design, Error, Method, Result, ScenarioConfig, Table,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "matcorr", version, about = "Covariance and correlation tests for matrix-normal data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo studies and write one CSV row per configuration.
    Simulate(SimulateArgs),
    /// Test whether the row covariance of one group is diagonal.
    TestOne(TestOneArgs),
    /// Test whether two groups share the same row correlation matrix.
    TestTwo(TestTwoArgs),
    /// Recover the nonzero (one group) or differing (two groups) entries.
    Recover(RecoverArgs),
    /// Global minimum-variance weights for a covariance matrix.
    Portfolio(PortfolioArgs),
}

fn parse_design(s: &str) -> std::result::Result<Design, String> {
    serde_json::from_value(json!(s)).map_err(|_| {
        "expected one of one-sample-null, one-sample-alt, one-sample-support, \
         two-sample-null, two-sample-alt, two-sample-support"
            .to_string()
    })
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    serde_json::from_value(json!(s)).map_err(|_| "expected one of oracle, sample, banded, vector".to_string())
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (JSON ScenarioConfig); replaces the scenario flags.
    #[arg(long, conflicts_with_all = ["table", "design"])]
    config: Option<PathBuf>,
    /// Regenerate a whole grid: 2, 4, 5 or 6.
    #[arg(long, conflicts_with = "design")]
    table: Option<u8>,
    #[arg(long, value_parser = parse_design, required_unless_present_any = ["config", "table"])]
    design: Option<Design>,
    #[arg(long, required_unless_present_any = ["config", "table"])]
    p: Option<usize>,
    #[arg(long, required_unless_present_any = ["config", "table"])]
    q: Option<usize>,
    /// Sample size (of the first group for two-sample designs).
    #[arg(long, required_unless_present_any = ["config", "table"])]
    n: Option<usize>,
    /// Size of the second group; defaults to `n`.
    #[arg(long)]
    n2: Option<usize>,
    /// Replicates; defaults to 1000 (100 for support grids).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// With --table and no --method, every method is run.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the wall_seconds column empty so output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, default_value = "sample", value_parser = parse_method)]
    method: Method,
    /// Fixed bandwidth for the banded method; cross-validated when omitted.
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Transpose every observation, testing the column structure instead.
    #[arg(long)]
    transpose: bool,
}

#[derive(Args)]
struct TestOneArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Known column covariance (CSV), required by the oracle method.
    #[arg(long)]
    oracle_b: Option<PathBuf>,
}

#[derive(Args)]
struct TestTwoArgs {
    #[arg(long)]
    data1: PathBuf,
    #[arg(long)]
    data2: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long)]
    oracle_b1: Option<PathBuf>,
    #[arg(long)]
    oracle_b2: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverArgs {
    /// One manifest for a one-sample support, two for a two-sample support.
    #[arg(long, num_args = 1..=2, required = true)]
    data: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Known column covariance of each group (CSV), in --data order.
    #[arg(long, num_args = 1..=2)]
    oracle_b: Vec<PathBuf>,
    /// Write the signs of r1 - r2 on the recovered support (two groups only).
    #[arg(long)]
    sign_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct PortfolioArgs {
    /// Covariance matrix (CSV).
    #[arg(long)]
    cov: PathBuf,
    /// Replace the correlation structure of --cov with this correlation matrix (CSV).
    #[arg(long)]
    blend_corr: Option<PathBuf>,
    /// Comma-separated asset labels.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// Also write `label,weight` rows to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(io_err(Path::new("<stdout>")))
}

fn estimator(est: &EstimatorArgs, oracle: Option<&PathBuf>) -> Result<BEstimator> {
    Ok(match est.method {
        Method::Oracle => {
            let path = oracle.ok_or_else(|| invalid("the oracle method needs a known column covariance"))?;
            BEstimator::Oracle(read_sym_csv(path)?)
        }
        Method::Sample | Method::Vector => BEstimator::Sample,
        Method::Banded => BEstimator::Banded {
            bandwidth: est.bandwidth,
        },
    })
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let configs = if let Some(path) = &args.config {
        let file = File::open(path).map_err(io_err(path))?;
        vec![serde_json::from_reader::<_, ScenarioConfig>(io::BufReader::new(file))?]
    } else if let Some(t) = args.table {
        let methods = match args.method {
            Some(m) => vec![m],
            None => Method::ALL.to_vec(),
        };
        Table::from_number(t)?.configs(&methods, args.reps, args.alpha, args.seed)
    } else {
        let mut cfg = ScenarioConfig::new(
            args.design.expect("required by clap"),
            args.p.expect("required by clap"),
            args.q.expect("required by clap"),
            args.n.expect("required by clap"),
            args.method.unwrap_or(Method::Sample),
            args.reps.unwrap_or(1000),
            args.seed,
        );
        cfg.alpha = args.alpha;
        cfg.n2 = args.n2;
        vec![cfg]
    };
    for cfg in &configs {
        cfg.validate()?;
    }

    let timing = !args.no_timing;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            let results = run_grid(&configs, args.workers, timing, &mut BufWriter::new(file))?;
            print_json(&results)
        }
        None => {
            let stdout = io::stdout();
            run_grid(&configs, args.workers, timing, &mut stdout.lock())?;
            Ok(())
        }
    }
}

fn test_one(args: TestOneArgs) -> Result<()> {
    let LoadedDataset { dataset, .. } = load_dataset(&args.data, args.est.transpose)?;
    let result = match args.est.method {
        Method::Vector => vector_baseline_one(&dataset, args.alpha)?,
        _ => one_sample_test(&dataset, args.alpha, &estimator(&args.est, args.oracle_b.as_ref())?)?,
    };
    print_json(&result)
}

fn test_two(args: TestTwoArgs) -> Result<()> {
    let d1 = load_dataset(&args.data1, args.est.transpose)?.dataset;
    let d2 = load_dataset(&args.data2, args.est.transpose)?.dataset;
    let result = match args.est.method {
        Method::Vector => vector_baseline_two(&d1, &d2, args.alpha)?,
        _ => {
            let b1 = estimator(&args.est, args.oracle_b1.as_ref())?;
            let b2 = estimator(&args.est, args.oracle_b2.as_ref())?;
            two_sample_test(&d1, &d2, args.alpha, &b1, &b2)?
        }
    };
    print_json(&result)
}

fn recover(args: RecoverArgs) -> Result<()> {
    if !(args.tau > 0.0 && args.tau.is_finite()) {
        return Err(invalid(format!("tau must be positive, got {}", args.tau)));
    }
    let loaded: Vec<LoadedDataset> = args
        .data
        .iter()
        .map(|p| load_dataset(p, args.est.transpose))
        .collect::<Result<_>>()?;
    if args.sign_matrix.is_some() && loaded.len() != 2 {
        return Err(invalid("--sign-matrix needs two datasets"));
    }
    let b = |g: usize| estimator(&args.est, args.oracle_b.get(g));

    let (support, labels) = match loaded.as_slice() {
        [one] => {
            let stats = match args.est.method {
                Method::Vector => vector_entries_one(&one.dataset)?,
                _ => one_sample_entries(&one.dataset, &b(0)?)?,
            };
            (support_from_entry_stats(&stats, args.tau), one.row_labels.clone())
        }
        [g1, g2] => {
            let entries = match args.est.method {
                Method::Vector => vector_entries_two(&g1.dataset, &g2.dataset)?,
                _ => two_sample_entries(&g1.dataset, &g2.dataset, &b(0)?, &b(1)?)?,
            };
            if let Some(path) = &args.sign_matrix {
                let signs = sign_matrix_from_entries(&entries, args.tau);
                let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
                write_sign_csv(&signs, &mut out)
                    .and_then(|_| out.flush())
                    .map_err(io_err(path))?;
            }
            (
                support_from_entry_stats(&entries.stats, args.tau),
                g1.row_labels.clone().or_else(|| g2.row_labels.clone()),
            )
        }
        _ => unreachable!("clap limits --data to two values"),
    };

    let labeled: Option<Vec<[&str; 2]>> = labels.as_ref().map(|l| {
        support
            .edges
            .iter()
            .map(|&(i, j)| [l[i - 1].as_str(), l[j - 1].as_str()])
            .collect()
    });
    print_json(&json!({
        "tau": support.tau,
        "size": support.len(),
        "edges": support.edges,
        "labeled_edges": labeled,
    }))
}

fn portfolio(args: PortfolioArgs) -> Result<()> {
    let cov = read_sym_csv(&args.cov)?;
    let sigma = match &args.blend_corr {
        Some(path) => blend_cov(&cov, &read_sym_csv(path)?)?,
        None => cov,
    };
    let mut w = gmv_weights(&sigma)?;
    if let Some(labels) = args.labels {
        w = w.with_labels(labels)?;
    }
    if let Some(path) = &args.out {
        let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
        let write = |out: &mut BufWriter<File>| -> io::Result<()> {
            writeln!(out, "label,weight")?;
            for (i, v) in w.weights.iter().enumerate() {
                let label = w.labels.as_ref().map_or_else(|| (i + 1).to_string(), |l| l[i].clone());
                writeln!(out, "{label},{}", matcorr_core::montecarlo::fmt_full(*v))?;
            }
            out.flush()
        };
        write(&mut out).map_err(io_err(path))?;
    }
    eprintln!("leverage: {}", leverage(&w));
    print_json(&w)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::TestOne(a) => test_one(a),
        Command::TestTwo(a) => test_two(a),
        Command::Recover(a) => recover(a),
        Command::Portfolio(a) => portfolio(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
