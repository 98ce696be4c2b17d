use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

/// Stationary points, Łojasiewicz exponents and descent rates for
/// `min ½xᵀAx + gᵀx` subject to `‖x‖ = 1`.
#[derive(Debug, Parser, Serialize)]
#[command(name = "lojax", version)]
pub struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Write a problem instance as JSON.
    Gen(GenArgs),
    /// Enumerate and classify every stationary point.
    Stationary(StationaryArgs),
    /// Estimate the exponent at one stationary point.
    Estimate(EstimateArgs),
    /// Run gradient descent and write the trace as CSV.
    Run(SolveArgs),
    /// Run gradient descent and fit the convergence rate.
    Rate(SolveArgs),
    /// Brute-force stationary points (n ≤ 3).
    Oracle(OracleArgs),
    /// Check the measured exponent against the prediction at every point.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Example1,
    Random,
    Gzero,
    Case3,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Dimension (ignored for example1).
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Eigenvalue range for random and gzero.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub eig_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub eig_hi: f64,
    /// Scale of the random linear term.
    #[arg(long, default_value_t = 1.0)]
    pub g_scale: f64,
    /// Multiplier of the constructed point for case3.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda_star: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StationaryArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value_t = lojax_core::stationary::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SamplingArgs {
    /// Strictly decreasing cap radii, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = lojax_core::loja::default_radii())]
    pub radii: Vec<f64>,
    /// Samples per radius.
    #[arg(long, default_value_t = lojax_core::loja::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Index into the enumerated stationary points.
    #[arg(long, default_value_t = 0)]
    pub point: usize,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Start point, comma separated; a seeded random start when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub grad_tol: f64,
    /// Initial trial step; defaults to 1/(‖A‖_F + 1).
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub backtrack_ratio: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub armijo_c: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Grid density; defaults to 10000 for n = 2 and 120 for n = 3.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, default_value_t = lojax_core::stationary::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lojax: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
