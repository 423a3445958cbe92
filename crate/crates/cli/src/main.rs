//! `gaussrot`: theory evaluators, exact Gaussian sweeps, toy training,
//! the spurious-projection search and plotting.

mod commands;
mod config;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::List;

/// An invalid argument or configuration value; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "gaussrot", version, about = "Gaussianization with random rotations: theory, exact simulation and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the layer-count bounds and rates for one dimension.
    Theory(TheoryArgs),
    /// Exact covariance-space sweep over spectra, dimensions and rotations.
    SimulateGaussian(GaussianArgs),
    /// Train iterative spline Gaussianization on the autoregressive toy family.
    TrainToy(ToyArgs),
    /// Search for a spurious bimodal projection of standard-normal data.
    Spurious(SpuriousArgs),
    /// Render a log-log scaling plot from a records CSV.
    Plot(PlotArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TheoryArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimension D.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: Option<u64>,
    /// Extra rotation parameters per dimension for the learned-rotation bound.
    #[arg(long)]
    pub k: Option<f64>,
    /// Loss ratio L'/L in (0, 1).
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Current loss for the coupling rate (low-loss limit when absent).
    #[arg(long)]
    pub loss: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GaussianArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimensions, comma separated (default: 10 geometric values in [10, 128]).
    #[arg(long)]
    pub dims: Option<List<usize>>,
    /// Spectrum cases 1-6, comma separated.
    #[arg(long)]
    pub cases: Option<List<u8>>,
    /// Initial rotations per spectrum.
    #[arg(long)]
    pub rotations: Option<usize>,
    /// Simulated layers as a multiple of D.
    #[arg(long)]
    pub layers_factor: Option<f64>,
    /// Depth of the rate measurement as a multiple of D.
    #[arg(long)]
    pub measure_at: Option<f64>,
    /// α values per side of one for cases 1-4.
    #[arg(long)]
    pub alphas_per_side: Option<usize>,
    /// Spectra per (random case, D).
    #[arg(long)]
    pub random_draws: Option<usize>,
    /// `last-two` or `full`.
    #[arg(long)]
    pub rate_method: Option<commands::RateArg>,
    /// Loss ratio for required layers.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Only write the per-run summary rows.
    #[arg(long)]
    pub summary_only: bool,
    /// Also write a scaling plot here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ToyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Toy cases 1-3, comma separated.
    #[arg(long)]
    pub cases: Option<List<u8>>,
    #[arg(long)]
    pub dims: Option<List<usize>>,
    /// Size of the dependent core.
    #[arg(long)]
    pub core: Option<usize>,
    /// Replicate seeds, comma separated.
    #[arg(long)]
    pub seeds: Option<List<u64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Inner blend towards the identity.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub alpha_tail: Option<f64>,
    /// Fresh samples the loss curve is measured on; 0 uses the training loss.
    #[arg(long)]
    pub eval_samples: Option<usize>,
    /// `curve`, `exact` or `mc:<samples>`.
    #[arg(long)]
    pub entropy: Option<commands::EntropyArg>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub summary_only: bool,
    /// Directory for trained models (one file per run).
    #[arg(long)]
    pub save_models: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpuriousArgs {
    #[command(flatten)]
    pub common: Common,
    /// `full` (N=60000, D=3072) or `ci` (N=10000, D=512).
    #[arg(long, value_enum)]
    pub scale: Option<commands::Scale>,
    /// Overrides the dimension of the preset.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Overrides the sample count of the preset.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Random directions for the baseline median.
    #[arg(long)]
    pub baseline_count: Option<usize>,
    /// Histogram bins.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: Common,
    /// Records CSV produced by `simulate-gaussian` or `train-toy`.
    #[arg(long)]
    pub input: PathBuf,
    /// Loss ratio of the theory overlay.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Skip the theory overlay.
    #[arg(long)]
    pub no_theory: bool,
    #[arg(long)]
    pub title: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Theory(a) => commands::theory(a),
        Command::SimulateGaussian(a) => commands::simulate_gaussian(a),
        Command::TrainToy(a) => commands::train_toy(a),
        Command::Spurious(a) => commands::spurious(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
