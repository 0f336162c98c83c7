use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bayescox", version, about = "Bayesian Cox proportional-hazards models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate replicated datasets from a reference scenario.
    Simulate(SimulateArgs),
    /// Fit one model to a dataset; writes draws.csv and summary.txt.
    Fit(FitArgs),
    /// Tabulate DIC, pD, LPML and pseudo Bayes factors of fitted models.
    Compare(CompareArgs),
    /// Posterior log-hazard and survival curves from a draws file.
    Curves(CurvesArgs),
    /// Replicated simulate-and-fit study with bias, coverage and RMSD.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// 1 (Weibull), 2 (piecewise constant) or 3 (Weibull mixture)
    #[arg(long)]
    pub scenario: u8,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// output directory
    #[arg(long)]
    pub out: PathBuf,
}

/// MCMC overrides shared by `fit` and `replicate`.
#[derive(Debug, Args, Default)]
pub struct McmcArgs {
    /// real (3 x 50000, burn-in 5000, thin 5) or simulation (3 x 22000, burn-in 2000, thin 10)
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// total iterations per chain, burn-in included
    #[arg(long)]
    pub iter: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// dataset CSV: time,status,<covariates...>
    #[arg(long)]
    pub data: PathBuf,
    /// we, pc or ps
    #[arg(long)]
    pub model: Option<String>,
    /// we, pc1..pc4 or ps1..ps3
    #[arg(long)]
    pub prior: Option<String>,
    /// number of intervals K
    #[arg(long)]
    pub knots: Option<usize>,
    /// right end of the knot grid (default: largest observed time)
    #[arg(long)]
    pub t_max: Option<f64>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// TOML config with [model], [mcmc], [prior] and [curves] sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// summary files written by `fit`
    #[arg(required = true, num_args = 1..)]
    pub summaries: Vec<PathBuf>,
    /// comparison CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long)]
    pub draws: PathBuf,
    /// summary.txt from the same fit (default: next to the draws file)
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// grid spacing (default: t_max / 500)
    #[arg(long)]
    pub step: Option<f64>,
    /// last grid time (default: end of the fitted grid or follow-up)
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[arg(long)]
    pub scenario: u8,
    /// comma-separated list such as we,pc4:5,ps2:15
    #[arg(long)]
    pub models: String,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
    /// `--seed` drives both data generation and the sampler
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// spacing of the RMSD grid
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// metrics CSV
    #[arg(long)]
    pub out: PathBuf,
}
