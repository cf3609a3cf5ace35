use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mvtrack_core::pipeline::DropoutMode;

#[derive(Debug, Clone, Parser)]
#[command(name = "mvtrack", version, about = "Multi-drone pedestrian tracking experiments")]
pub struct Cli {
    /// Base seed. Seeds run are `seed, seed+1, ...`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to run.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Scenario JSON with an optional `pipeline` section.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ground-plane match radius for scoring, meters.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Camera dropout probability in [0, 1).
    #[arg(long, global = true)]
    pub dropout: Option<f64>,
    /// `per_frame` or `per_sequence`.
    #[arg(long = "dropout-mode", global = true)]
    pub dropout_mode: Option<DropoutMode>,
    /// Suppress progress and summary output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write the dataset tree.
    Generate(ScenarioArgs),
    /// Run the pipeline for every seed and write per-seed outputs and reports.
    Run(RunArgs),
    /// Run the pipeline for each dropout rate and write `sweep.csv`.
    Sweep(SweepArgs),
    /// Render occupancy rasters and trajectory images from run outputs.
    Dump(DumpArgs),
    /// Schema-check a dataset and/or a config file.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Built-in scenario: `simple` or `complex`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override the number of captured frames.
    #[arg(long)]
    pub frames: Option<usize>,
}

/// Where a run gets its data: an existing dataset directory, or a scenario
/// simulated in memory once per seed with the seed as its RNG seed.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Dataset directory written by `generate`, shared by every seed.
    #[arg(long, conflicts_with_all = ["preset", "frames"])]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Also write per-frame occupancy rasters.
    #[arg(long)]
    pub heatmaps: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Ascending dropout rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75")]
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    /// Output directory of a previous `run`.
    #[arg(long)]
    pub run: PathBuf,
    /// Read ground truth from this dataset instead of the run's copy.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Dataset directory to check.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}
