mod commands;
mod post;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Virtual identification laboratory: specimen preparation, identification
/// runs, Monte-Carlo campaigns and chain post-processing.
#[derive(Debug, Parser)]
#[command(name = "microid", version, about)]
pub struct Cli {
    /// TOML config file; `MICROID_<SECTION>__<KEY>` variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the specimen, solve both load cases and render the images.
    Prepare {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one identification on a prepared dataset.
    Identify(IdentifyArgs),
    /// Run the configured Monte-Carlo campaign.
    Campaign(CampaignArgs),
    /// Summarize chain files, optionally normalized by a pivot modulus.
    Post(PostArgs),
    /// Repeat the command recorded in a manifest and compare output digests.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args, Clone)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// idic, be-idic, mha, mha-relaxed or mha-nonnorm.
    #[arg(long)]
    pub method: String,
    /// tension or shear.
    #[arg(long, default_value = "tension")]
    pub test: String,
    /// Modulus held at its reference value.
    #[arg(long)]
    pub fix: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    /// Boundary-data error: none, smooth or noise.
    #[arg(long, default_value = "none")]
    pub perturbation: String,
    /// Pillbox diameter (smooth) or noise amplitude (noise).
    #[arg(long, default_value_t = 0.0)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
    /// Boundary reduction stride for runs with boundary unknowns.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Tune the proposal to the target acceptance rate before sampling.
    #[arg(long)]
    pub tune: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct CampaignArgs {
    /// Prepared dataset; prepared in memory from the config when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Restrict to these methods.
    #[arg(long)]
    pub method: Vec<String>,
    #[arg(long)]
    pub fix: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct PostArgs {
    /// Chain CSV files.
    #[arg(long = "chain", required = true)]
    pub chains: Vec<PathBuf>,
    /// Normalize every state so that this modulus takes `--pivot-value`.
    #[arg(long)]
    pub pivot: Option<String>,
    /// Defaults to the configured reference value of the pivot.
    #[arg(long = "pivot-value")]
    pub pivot_value: Option<f64>,
    /// Also summarize under every modulus as pivot, side by side.
    #[arg(long = "all-pivots")]
    pub all_pivots: bool,
    /// Probability mass of the credible intervals.
    #[arg(long = "level")]
    pub level: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let raw: Vec<String> = std::env::args().skip(1).collect();
    match commands::dispatch(cli, &raw) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

use std::error::Error as _;
