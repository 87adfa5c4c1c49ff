//! Command-line surface. Every value flag is optional here; required values
//! and defaults are resolved against the config file in each command.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pgica_core::distributions::SourceFamily;

use crate::config::{List, Size};
use crate::methods::{InitArg, Method};

#[derive(Debug, Parser)]
#[command(name = "pgica", version, about = "Bayesian ICA with Pólya-Gamma augmentation")]
pub struct Cli {
    /// key=value config file, or an output file whose embedded config to reuse.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset.
    Generate(GenerateArgs),
    /// Fit one method to a dataset.
    Fit(FitArgs),
    /// Run a benchmark grid.
    Bench(BenchArgs),
    /// Numerical checks of the asymptotic theory.
    Theory(TheoryArgs),
    /// Score an external estimate against a truth-bearing dataset.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// hierarchical | benchmark
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Prior standard deviation of the mixing entries (hierarchical).
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Make the first hierarchical source much smaller than the rest.
    #[arg(long)]
    pub hard: bool,
    /// sech | t3 | laplace | mixed (benchmark).
    #[arg(long)]
    pub family: Option<SourceFamily>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset file (JSON-lines) or a bare CSV matrix.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// gibbs-ice | gibbs-t | em | mackay | fastica
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Noise level for gibbs-ice (defaults to the dataset's).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// em | identity
    #[arg(long)]
    pub init: Option<InitArg>,
    #[arg(long)]
    pub anneal_from: Option<f64>,
    #[arg(long)]
    pub keep_sources: bool,
    /// Student-t degrees of freedom (gibbs-t).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Student-t scale (gibbs-t).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Natural-gradient step size (mackay).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Fit JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trace JSON-lines path for samplers.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Metrics CSV to append to.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Record wall-clock runtime (makes outputs non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub families: Option<List<SourceFamily>>,
    /// Comma-separated NxD sizes, e.g. 500x4,2000x8.
    #[arg(long)]
    pub sizes: Option<List<Size>>,
    #[arg(long)]
    pub sigmas: Option<List<f64>>,
    #[arg(long)]
    pub methods: Option<List<Method>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory for rows.csv and aggregate.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(subcommand)]
    pub check: TheoryCheck,
}

#[derive(Debug, Subcommand)]
pub enum TheoryCheck {
    /// Score identities E[ψ(S)Sᵀ] = −I and E U(W₀; X) = 0.
    Ibp(TheoryCommon),
    /// Fisher information and the information equality.
    Fisher(TheoryCommon),
    /// Decay of the local quadratic expansion remainder.
    Lan(LanArgs),
    /// Posterior covariance and contraction against the information bound.
    Bvm(BvmArgs),
}

#[derive(Debug, Args)]
pub struct TheoryCommon {
    #[arg(long)]
    pub family: Option<SourceFamily>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LanArgs {
    #[arg(long)]
    pub family: Option<SourceFamily>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub ns: Option<List<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub h_norm: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Monte Carlo size of the information estimate.
    #[arg(long)]
    pub fisher_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BvmArgs {
    #[arg(long)]
    pub family: Option<SourceFamily>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Single sample size (no contraction slope).
    #[arg(long, conflicts_with = "ns")]
    pub n: Option<usize>,
    #[arg(long)]
    pub ns: Option<List<usize>>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub prior_sd: Option<f64>,
    #[arg(long)]
    pub fisher_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Fit JSON, or a CSV matrix holding W.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    /// Dataset file with ground truth.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metrics CSV path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
