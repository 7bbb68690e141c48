//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rvolmin::inf_serde::parse_real;
use rvolmin::solver::InitStrategy;
use rvolmin::synth::SweepAxis;
use rvolmin::{BasisConstraint, RegularizerKind, SolverConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rvolmin",
    version,
    about = "Outlier-robust volume-minimization matrix factorization"
)]
pub struct Cli {
    /// Log progress at info level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factorize a data matrix X (M×L CSV) into B (M×K) and C (K×L).
    Factorize(FactorizeArgs),
    /// Generate a synthetic instance with ground truth.
    Synth(SynthArgs),
    /// Run a seeded Monte-Carlo sweep.
    Bench(BenchArgs),
    /// Certify whether coefficient columns (N×L CSV) are sufficiently scattered.
    CheckScatter(CheckScatterArgs),
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegularizerArg {
    Logdet,
    Det,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    DataColumns,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Fitting exponent in (0, 2].
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,
    /// Shift inside the log-det regularizer.
    #[arg(long, default_value_t = 1e-8)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = RegularizerArg::Logdet)]
    pub regularizer: RegularizerArg,
    /// Constrain the basis to be entrywise nonnegative.
    #[arg(long)]
    pub nonneg: bool,
    #[arg(long)]
    pub no_extrapolate: bool,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::DataColumns)]
    pub init: InitArg,
    /// Independent starts; the lowest final objective is kept.
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        let regularizer = match self.regularizer {
            RegularizerArg::Logdet => RegularizerKind::LogDet { tau: self.tau },
            RegularizerArg::Det => RegularizerKind::Det,
            RegularizerArg::Trace => RegularizerKind::TraceDist,
        };
        SolverConfig {
            p: self.p,
            lambda: self.lambda,
            epsilon: self.epsilon,
            regularizer,
            basis_constraint: if self.nonneg {
                BasisConstraint::Nonnegative
            } else {
                BasisConstraint::Unconstrained
            },
            extrapolate: !self.no_extrapolate,
            max_iter: self.max_iter,
            tol: self.tol,
            rng_seed: self.seed,
            ..SolverConfig::default()
        }
    }

    pub fn init(&self) -> InitStrategy {
        match self.init {
            InitArg::Random => InitStrategy::Random,
            InitArg::DataColumns => InitStrategy::DataColumns,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FactorizeArgs {
    /// Data matrix CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Number of basis columns.
    #[arg(long, short)]
    pub k: usize,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

pub fn real(text: &str) -> Result<f64, String> {
    parse_real(text).ok_or_else(|| format!("expected a number or inf, got {text:?}"))
}

/// Instance parameters; unset fields keep the defaults of the base design.
#[derive(Debug, Clone, Default, Args)]
pub struct SpecArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    /// Signal-to-noise ratio in dB, or inf.
    #[arg(long, value_parser = real, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    /// Signal-to-outlier ratio in dB, or inf.
    #[arg(long, value_parser = real, allow_hyphen_values = true)]
    pub sor: Option<f64>,
    /// Number of outlier columns.
    #[arg(long)]
    pub outliers: Option<usize>,
    /// Upper bound on every coefficient entry.
    #[arg(long)]
    pub purity: Option<f64>,
    /// Comma-separated singular values of the ground-truth basis.
    #[arg(long, value_parser = real, value_delimiter = ',', allow_hyphen_values = true)]
    pub singular_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Snr,
    Sor,
    K,
    NOutliers,
    Lambda,
    P,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Snr => SweepAxis::Snr,
            AxisArg::Sor => SweepAxis::Sor,
            AxisArg::K => SweepAxis::K,
            AxisArg::NOutliers => SweepAxis::NOutliers,
            AxisArg::Lambda => SweepAxis::Lambda,
            AxisArg::P => SweepAxis::P,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Named design: fig5, fig6, kvary, sorvary, novary or pvary.
    #[arg(long, conflicts_with_all = ["axis", "values"])]
    pub preset: Option<String>,
    #[arg(long, value_enum, requires = "values")]
    pub axis: Option<AxisArg>,
    /// Comma-separated axis values.
    #[arg(long, value_parser = real, value_delimiter = ',', allow_hyphen_values = true, requires = "axis")]
    pub values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "RVOLMIN_JOBS")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CheckScatterArgs {
    /// Coefficient matrix CSV, one column per sample.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Columns farther than this from the simplex are projected onto it.
    #[arg(long, default_value_t = 1e-6)]
    pub repair_tol: f64,
    /// Tolerance for extremeness and facet incidence.
    #[arg(long, default_value_t = rvolmin::identifiability::DEFAULT_TOL)]
    pub tol: f64,
}
