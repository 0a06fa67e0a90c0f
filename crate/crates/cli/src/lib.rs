//! Batch command-line front end for `mxpbf`.
//!
//! Every command prints one JSON document (the run record) on stdout or to
//! `--out`; commands that produce tables (supports, ROC curves, simulated
//! matrices) write CSV to `--out` and the record to stdout. Records carry the
//! resolved hyperparameters and seed, and never the worker count, so reruns
//! are byte-identical regardless of `--threads`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use mxpbf::dataio::{center_columns, load_matrix, parse_table, transform_null};
use mxpbf::evalmetrics::{ks_distance, mc_null_statistics, roc_curve};
use mxpbf::hyptest::{
    c_np, diagonality_statistic, diagonality_test, gumbel_cdf, gumbel_quantile, one_sample_test,
    one_sample_test_gram, pairwise_independence_test, pairwise_independence_test_with_gamma,
};
use mxpbf::pairstats::build_gram;
use mxpbf::simulate::{sample_mvn_replicate, CovKind, CovModel};
use mxpbf::support::{
    confusion, cv_select_threshold, error_count, mcc, select_support, threshold_grid,
    DEFAULT_SPLITS,
};
use mxpbf::{
    default_hyperparams, CovarianceSpec, CvConfig, DataMatrix, DecisionRule, EmptyLoss, FitBetaOn,
    HyperParams, TableFormat, TestKind,
};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "MXPBF_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mxpbf::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// 0 success, 2 validation, 3 numeric degeneracy, 66 file errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric_degeneracy() => 3,
            CliError::Core(mxpbf::Error::Io { .. }) | CliError::Output { .. } => 66,
            CliError::Core(_) | CliError::Invalid(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "mxpbf",
    version,
    about = "Maximum pairwise Bayes factor tests for high-dimensional covariance structure"
)]
pub struct Cli {
    /// Worker threads [default: $MXPBF_THREADS, else all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-sample test of H0: Sigma = I (or Sigma = Sigma0 with --sigma0)
    TestOneSample(OneSampleArgs),
    /// Diagonality test of H0: all off-diagonal covariances are zero
    TestDiagonal(DiagonalArgs),
    /// Independence test for a single pair of variables
    TestPair(PairArgs),
    /// Estimate the covariance support by thresholding pairwise Bayes factors
    SelectSupport(SupportArgs),
    /// Choose the support threshold by repeated random-split cross-validation
    CvThreshold(CvArgs),
    /// Draw a multivariate normal sample from a covariance model
    Simulate(SimulateArgs),
    /// Monte Carlo check of the extreme-value null approximation
    NullCalibration(CalibrationArgs),
    /// ROC curve of a test statistic, from files or by simulation
    Roc(RocArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Observation matrix (rows = observations), CSV or TSV
    #[arg(long)]
    pub input: PathBuf,
    /// Table format [default: from the file extension]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Do not center columns before testing
    #[arg(long)]
    pub no_center: bool,
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Prior coefficient of variation of tau^2; a0 = 2 + K^-2
    #[arg(long = "K", alias = "k", default_value_t = 100.0)]
    pub k: f64,
    /// Dispersion exponent [default: 8.01(1 - 1/ln n) one-sample, 4.01(1 - 1/ln n) otherwise]
    #[arg(long, conflicts_with = "gamma", allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Prior dispersion, overriding the alpha policy
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OneSampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Null covariance; the data are whitened by its inverse square root first
    #[arg(long)]
    pub sigma0: Option<PathBuf>,
    /// Reject when 2 log B_max exceeds this value
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DiagonalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Reject when 2 log B~_max exceeds this value [default: 0]
    #[arg(long, conflicts_with = "size", allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Asymptotic level; uses the extreme-value limit and reports a p-value
    #[arg(long)]
    pub size: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// First variable (one-based)
    #[arg(long)]
    pub i: usize,
    /// Second variable (one-based)
    #[arg(long)]
    pub j: usize,
    /// Exponent in gamma = n^-alpha [default: 4.01(1 - 1/ln n)]
    #[arg(long, conflicts_with = "gamma", allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = -7.0, allow_hyphen_values = true)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub grid_step: f64,
    /// Random splits, each holding out ceil(n/3) rows
    #[arg(long, default_value_t = DEFAULT_SPLITS)]
    pub nsplits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows on which the held-out regression slope is fitted
    #[arg(long, value_enum, default_value_t = FitRows::Test)]
    pub fit_beta_on: FitRows,
    /// Loss charged to a variable with no selected partner
    #[arg(long, value_enum, default_value_t = EmptyCost::NullResidual)]
    pub empty_loss: EmptyCost,
}

#[derive(Debug, Args)]
pub struct SupportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Selection threshold on 2 log B~; chosen by cross-validation when absent
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Score each pair by one regression direction only (i on j, i < j)
    #[arg(long)]
    pub no_symmetrize: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    /// True covariance; adds confusion counts and MCC to the record
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Edge list CSV (one-based `i,j`)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub no_symmetrize: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also write the `threshold,mean_mse` curve as CSV
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    /// Correlation for compound-symmetry and two-entry models
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Substream of the seed to draw from
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    /// Sample matrix CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the covariance matrix as CSV
    #[arg(long)]
    pub cov_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrationArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Nominal level for the empirical-size check
    #[arg(long, default_value_t = 0.05)]
    pub size: f64,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Also write the replicate statistics as CSV
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    /// Null statistics, one per line (skips simulation)
    #[arg(long, requires = "alt")]
    pub null: Option<PathBuf>,
    /// Alternative statistics, one per line
    #[arg(long, requires = "null")]
    pub alt: Option<PathBuf>,
    /// Statistic to simulate
    #[arg(long, value_enum, default_value_t = Statistic::Diagonal)]
    pub test: Statistic,
    /// Alternative covariance model
    #[arg(long, value_enum, default_value_t = Model::TwoEntry)]
    pub model: Model,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Replicates per hypothesis
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// ROC curve CSV (`fpr,tpr,threshold`)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FitRows {
    Test,
    Train,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EmptyCost {
    NullResidual,
    Zero,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Model {
    Identity,
    CompoundSymmetry,
    TwoEntry,
    Banded1,
    Banded2,
}

impl From<Model> for CovKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Identity => CovKind::Identity,
            Model::CompoundSymmetry => CovKind::CompoundSymmetry,
            Model::TwoEntry => CovKind::TwoEntry,
            Model::Banded1 => CovKind::BandedSetting1,
            Model::Banded2 => CovKind::BandedSetting2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Statistic {
    OneSample,
    Diagonal,
}

/// Resolve the worker count: flag, then environment, then rayon's default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return if t == 0 {
            Err(CliError::Invalid("--threads must be positive".into()))
        } else {
            Ok(Some(t))
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Some)
            .ok_or_else(|| CliError::Invalid(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Run a parsed command line inside a pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(cli.threads)? {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::TestOneSample(a) => test_one_sample(a),
        Command::TestDiagonal(a) => test_diagonal(a),
        Command::TestPair(a) => test_pair(a),
        Command::SelectSupport(a) => select(a),
        Command::CvThreshold(a) => cv(a),
        Command::Simulate(a) => simulate(a),
        Command::NullCalibration(a) => null_calibration(a),
        Command::Roc(a) => roc(a),
    }
}

fn table_format(path: &Path, format: Option<Format>) -> TableFormat {
    match format {
        Some(Format::Csv) => TableFormat::Csv,
        Some(Format::Tsv) => TableFormat::Tsv,
        None => TableFormat::from_path(path),
    }
}

fn load_input(args: &InputArgs) -> Result<DataMatrix> {
    let data = load_matrix(&args.input, table_format(&args.input, args.format))?;
    Ok(if args.no_center {
        data
    } else {
        center_columns(&data)
    })
}

fn input_record(args: &InputArgs) -> Value {
    json!({
        "path": args.input.display().to_string(),
        "centered": !args.no_center,
    })
}

fn hyperparams(n: usize, p: usize, test: TestKind, prior: &PriorArgs) -> Result<HyperParams> {
    let hp = default_hyperparams(n, p, test, prior.k)?;
    Ok(match (prior.alpha, prior.gamma) {
        (_, Some(g)) => hp.with_gamma(g)?,
        (Some(a), None) => hp.with_alpha(a, n, p)?,
        (None, None) => hp,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON plus a trailing newline, to `out` or stdout.
fn emit<T: Serialize>(record: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(record)
        .map_err(|e| CliError::Invalid(format!("cannot serialize result: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => write_with(path, |w| w.write_all(text.as_bytes())),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|source| CliError::Output {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn test_one_sample(a: OneSampleArgs) -> Result<()> {
    let mut data = load_input(&a.input)?;
    if let Some(path) = &a.sigma0 {
        let sigma0 = CovarianceSpec::load(path, TableFormat::from_path(path))?;
        data = transform_null(&data, &sigma0)?;
    }
    let hp = hyperparams(data.n(), data.p(), TestKind::OneSample, &a.prior)?;
    let outcome = one_sample_test(&data, &hp, a.threshold)?;
    let record = json!({
        "command": "test-one-sample",
        "input": input_record(&a.input),
        "sigma0": a.sigma0.as_ref().map(|p| p.display().to_string()),
        "hyperparams": hp,
        "result": outcome,
    });
    emit(&record, a.out.out.as_deref())
}

fn test_diagonal(a: DiagonalArgs) -> Result<()> {
    let data = load_input(&a.input)?;
    let hp = hyperparams(data.n(), data.p(), TestKind::Diagonality, &a.prior)?;
    let rule = match a.size {
        Some(s) => DecisionRule::AsymptoticSize(s),
        None => DecisionRule::Threshold(a.threshold.unwrap_or(0.0)),
    };
    let outcome = diagonality_test(&data, &hp, rule)?;
    let record = json!({
        "command": "test-diagonal",
        "input": input_record(&a.input),
        "rule": rule,
        "hyperparams": hp,
        "result": outcome,
    });
    emit(&record, a.out.out.as_deref())
}

fn test_pair(a: PairArgs) -> Result<()> {
    if a.i == 0 || a.j == 0 {
        return Err(CliError::Invalid("--i and --j are one-based".into()));
    }
    let data = load_input(&a.input)?;
    let (i, j) = (a.i - 1, a.j - 1);
    let outcome = match a.gamma {
        Some(g) => pairwise_independence_test_with_gamma(&data, i, j, g, a.threshold)?,
        None => {
            let alpha = match a.alpha {
                Some(al) => al,
                None => default_hyperparams(data.n(), data.p(), TestKind::PairwiseIndependence, 100.0)?.alpha,
            };
            pairwise_independence_test(&data, i, j, alpha, a.threshold)?
        }
    };
    let record = json!({
        "command": "test-pair",
        "input": input_record(&a.input),
        "pair": [a.i, a.j],
        "result": outcome,
    });
    emit(&record, a.out.out.as_deref())
}

fn cv_config(grid: &GridArgs, symmetrize: bool) -> CvConfig {
    CvConfig {
        fit_beta_on: match grid.fit_beta_on {
            FitRows::Test => FitBetaOn::Test,
            FitRows::Train => FitBetaOn::Train,
        },
        empty_loss: match grid.empty_loss {
            EmptyCost::NullResidual => EmptyLoss::NullResidual,
            EmptyCost::Zero => EmptyLoss::Zero,
        },
        symmetrize,
    }
}

fn run_cv(data: &DataMatrix, hp: &HyperParams, grid: &GridArgs, symmetrize: bool) -> Result<mxpbf::CVReport> {
    let points = threshold_grid(grid.grid_min, grid.grid_max, grid.grid_step)?;
    Ok(cv_select_threshold(
        data,
        hp,
        &points,
        grid.nsplits,
        grid.seed,
        cv_config(grid, symmetrize),
    )?)
}

fn select(a: SupportArgs) -> Result<()> {
    let data = load_input(&a.input)?;
    let hp = hyperparams(data.n(), data.p(), TestKind::Support, &a.prior)?;
    let symmetrize = !a.no_symmetrize;
    let (threshold, cv) = match a.threshold {
        Some(t) => (t, None),
        None => {
            let report = run_cv(&data, &hp, &a.grid, symmetrize)?;
            (report.chosen, Some(report))
        }
    };
    let estimate = select_support(&data, &hp, threshold, symmetrize)?;
    write_with(&a.out, |w| estimate.write_edge_csv(w))?;

    let scoring = match &a.truth {
        Some(path) => {
            let truth = CovarianceSpec::load(path, TableFormat::from_path(path))?;
            let c = confusion(&estimate, &truth)?;
            Some(json!({
                "confusion": c,
                "mcc": mcc(&c),
                "error_count": error_count(&c),
            }))
        }
        None => None,
    };
    let record = json!({
        "command": "select-support",
        "input": input_record(&a.input),
        "hyperparams": hp,
        "threshold": threshold,
        "symmetrized": symmetrize,
        "cv": cv.map(|r| json!({
            "chosen": r.chosen,
            "splits": r.splits,
            "seed": r.seed,
            "config": r.config,
            "grid": [a.grid.grid_min, a.grid.grid_max, a.grid.grid_step],
        })),
        "pairs": estimate.pairs.len(),
        "edges": a.out.display().to_string(),
        "truth": scoring,
    });
    emit(&record, None)
}

fn cv(a: CvArgs) -> Result<()> {
    let data = load_input(&a.input)?;
    let hp = hyperparams(data.n(), data.p(), TestKind::Support, &a.prior)?;
    let report = run_cv(&data, &hp, &a.grid, !a.no_symmetrize)?;
    if let Some(path) = &a.curve_out {
        write_with(path, |w| report.write_csv(w))?;
    }
    let record = json!({
        "command": "cv-threshold",
        "input": input_record(&a.input),
        "hyperparams": hp,
        "result": report,
    });
    emit(&record, a.out.out.as_deref())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let model = CovModel::build(a.model.into(), a.p, a.rho)?;
    let data = sample_mvn_replicate(&model.spec, a.n, a.seed, a.replicate)?;
    write_with(&a.out, |w| mxpbf::dataio::write_matrix(&data, w, TableFormat::Csv, None))?;
    if let Some(path) = &a.cov_out {
        write_with(path, |w| model.spec.write(w, TableFormat::Csv))?;
    }
    let record = json!({
        "command": "simulate",
        "model": model,
        "n": a.n,
        "seed": a.seed,
        "replicate": a.replicate,
        "out": a.out.display().to_string(),
    });
    emit(&record, None)
}

fn null_calibration(a: CalibrationArgs) -> Result<()> {
    if !(a.size > 0.0 && a.size < 1.0) {
        return Err(CliError::Invalid(format!("--size must be in (0, 1), got {}", a.size)));
    }
    let hp = hyperparams(a.n, a.p, TestKind::Diagonality, &a.prior)?;
    let stats = mc_null_statistics(a.n, a.p, &hp, a.reps, a.seed)?;
    let c = c_np(a.n, a.p, hp.gamma)?;
    let centred: Vec<f64> = stats.iter().map(|s| s - c).collect();
    let cut = gumbel_quantile(1.0 - a.size)?;
    let rejections = centred.iter().filter(|&&z| z > cut).count();
    if let Some(path) = &a.stats_out {
        write_with(path, |w| {
            writeln!(w, "statistic")?;
            stats.iter().try_for_each(|s| writeln!(w, "{s}"))
        })?;
    }
    let record = json!({
        "command": "null-calibration",
        "n": a.n,
        "p": a.p,
        "reps": a.reps,
        "seed": a.seed,
        "hyperparams": hp,
        "c_np": c,
        "ks_distance": ks_distance(&centred, gumbel_cdf)?,
        "mean_centred": centred.iter().sum::<f64>() / centred.len() as f64,
        "nominal_size": a.size,
        "empirical_size": rejections as f64 / a.reps as f64,
    });
    emit(&record, a.out.out.as_deref())
}

/// One statistic per line; a non-numeric first line is taken as a header.
fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|source| mxpbf::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = parse_table(file, TableFormat::Csv)?;
    rows.into_iter()
        .enumerate()
        .map(|(k, r)| match r.as_slice() {
            [v] => Ok(*v),
            _ => Err(CliError::Core(mxpbf::Error::MalformedInput {
                line: k + 1,
                field: 2,
                message: "expected one value per line".into(),
            })),
        })
        .collect()
}

/// Stream offset separating alternative replicates from null replicates.
const ALT_STREAM: u64 = 1 << 32;

fn simulated_scores(a: &RocArgs) -> Result<(Vec<f64>, Vec<f64>, Value)> {
    let (n, p) = match (a.n, a.p) {
        (Some(n), Some(p)) => (n, p),
        _ => return Err(CliError::Invalid("simulation needs --n and --p (or pass --null/--alt)".into())),
    };
    if a.reps == 0 {
        return Err(CliError::Invalid("--reps must be positive".into()));
    }
    let kind = match a.test {
        Statistic::OneSample => TestKind::OneSample,
        Statistic::Diagonal => TestKind::Diagonality,
    };
    let hp = hyperparams(n, p, kind, &a.prior)?;
    let alt_model = CovModel::build(a.model.into(), p, a.rho)?;
    let null_spec = CovarianceSpec::identity(p);
    let statistic = |spec: &CovarianceSpec, stream: u64| -> mxpbf::Result<f64> {
        let data = sample_mvn_replicate(spec, n, a.seed, stream)?;
        let cache = build_gram(&data);
        match a.test {
            Statistic::OneSample => Ok(one_sample_test_gram(&cache, &hp, 0.0)?.statistic),
            Statistic::Diagonal => Ok(diagonality_statistic(&cache, hp.gamma)?.0),
        }
    };
    use rayon::prelude::*;
    let h0 = (0..a.reps as u64)
        .into_par_iter()
        .map(|r| statistic(&null_spec, r))
        .collect::<mxpbf::Result<Vec<_>>>()?;
    let h1 = (0..a.reps as u64)
        .into_par_iter()
        .map(|r| statistic(&alt_model.spec, ALT_STREAM + r))
        .collect::<mxpbf::Result<Vec<_>>>()?;
    let setup = json!({
        "test": match a.test { Statistic::OneSample => "one_sample", Statistic::Diagonal => "diagonal" },
        "model": alt_model,
        "n": n,
        "reps": a.reps,
        "seed": a.seed,
        "hyperparams": hp,
    });
    Ok((h0, h1, setup))
}

fn roc(a: RocArgs) -> Result<()> {
    let (h0, h1, setup) = match (&a.null, &a.alt) {
        (Some(np), Some(ap)) => (
            read_scores(np)?,
            read_scores(ap)?,
            json!({ "null": np.display().to_string(), "alt": ap.display().to_string() }),
        ),
        _ => simulated_scores(&a)?,
    };
    let curve = roc_curve(&h0, &h1)?;
    write_with(&a.out, |w| curve.write_csv(w))?;
    let record = json!({
        "command": "roc",
        "source": setup,
        "auc": curve.auc,
        "null_count": h0.len(),
        "alt_count": h1.len(),
        "curve": a.out.display().to_string(),
    });
    emit(&record, None)
}
