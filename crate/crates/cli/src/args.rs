use std::path::PathBuf;
use std::time::Duration;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use windband::ingestion::{TrainSize, Units, DEFAULT_ASSIMILATION_WINDOW};
use windband::optimizer::{Formulation, SolverOptions};

#[derive(Debug, Parser)]
#[command(name = "windband", version, about = "Minimal-width confidence bands for wind power forecasts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset: actuals, two providers and the injected atypical days.
    Generate(GenerateArgs),
    /// Train a band on a seeded random subset of the aligned days.
    Train(TrainArgs),
    /// Evaluate a trained band on the days it was not trained on.
    Evaluate(EvaluateArgs),
    /// Search the convex combination of two trained bands.
    Combine(CombineArgs),
    /// Trace the mean band width over a grid of θ values.
    Pareto(ParetoArgs),
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not a finite non-negative number"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not a finite positive number"))
    }
}

fn horizon(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 2 {
        Ok(v)
    } else {
        Err("the horizon must be at least 2 hours".into())
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Write into an existing, non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitsArg {
    Plf,
    Mw,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Actual generation series (`day_id,t,value`).
    #[arg(long)]
    pub actuals: PathBuf,
    /// Additional provider files used only to restrict the days to those
    /// every provider covers.
    #[arg(long = "align-with")]
    pub align_with: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "plf")]
    pub units: UnitsArg,
    /// Installed capacity per day (`day_id,capacity_mw`), needed for MW data.
    #[arg(long)]
    pub capacity: Option<PathBuf>,
    /// Forecast horizon in hours.
    #[arg(long, default_value_t = windband::DEFAULT_HORIZON, value_parser = horizon)]
    pub horizon: usize,
    /// Hours over which forecasts are blended into the measured start state.
    #[arg(long, default_value_t = DEFAULT_ASSIMILATION_WINDOW)]
    pub assimilation_window: usize,
    /// Use forecasts as given, without assimilation.
    #[arg(long)]
    pub no_assimilation: bool,
}

impl DataArgs {
    pub fn units(&self) -> Units {
        match self.units {
            UnitsArg::Plf => Units::Plf,
            UnitsArg::Mw => Units::Mw,
        }
    }

    pub fn assimilation(&self) -> Option<usize> {
        (!self.no_assimilation).then_some(self.assimilation_window)
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Number of training days.
    #[arg(long, default_value_t = 120, conflicts_with = "train_fraction")]
    pub train_days: usize,
    /// Fraction of the aligned days used for training, rounded down.
    #[arg(long, value_parser = unit_interval)]
    pub train_fraction: Option<f64>,
    /// Seed of the train/test split.
    #[arg(long, default_value_t = 2016)]
    pub seed: u64,
}

impl SplitArgs {
    pub fn size(&self) -> TrainSize {
        match self.train_fraction {
            Some(f) => TrainSize::Fraction(f),
            None => TrainSize::Count(self.train_days),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormulationArg {
    Tightened,
    AsWritten,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Relative optimality and feasibility tolerance.
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub tolerance: f64,
    /// Maximum branch-and-bound nodes.
    #[arg(long, default_value_t = 100_000)]
    pub node_limit: usize,
    /// Wall-clock budget for the search, in seconds. Results stopped by it
    /// depend on machine speed.
    #[arg(long, value_parser = positive)]
    pub time_limit: Option<f64>,
    /// Upper bound on every relative half-width coefficient.
    #[arg(long, value_parser = non_negative)]
    pub x_cap: Option<f64>,
    #[arg(long, value_enum, default_value = "tightened")]
    pub formulation: FormulationArg,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            node_limit: Some(self.node_limit),
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            x_cap: self.x_cap,
            formulation: match self.formulation {
                FormulationArg::Tightened => Formulation::Tightened,
                FormulationArg::AsWritten => Formulation::AsWritten,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON generator configuration; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of days.
    #[arg(long)]
    pub days: Option<usize>,
    /// Hours per day.
    #[arg(long, value_parser = horizon)]
    pub horizon: Option<usize>,
    /// First day, `YYYY-MM-DD`.
    #[arg(long)]
    pub start_date: Option<NaiveDate>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Provider forecast series to train on.
    #[arg(long)]
    pub forecast: PathBuf,
    /// Off-band energy budget of a regular day.
    #[arg(long, value_parser = non_negative)]
    pub theta: f64,
    /// Minimum fraction of regular training days.
    #[arg(long, value_parser = unit_interval)]
    pub lambda: f64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Trained band (`band.json`).
    #[arg(long)]
    pub band: PathBuf,
    /// Provider forecast series the band belongs to.
    #[arg(long)]
    pub forecast: PathBuf,
    /// Atypical threshold; defaults to the band's training θ.
    #[arg(long, value_parser = non_negative)]
    pub theta: Option<f64>,
    /// Evaluate every aligned day, including the training days.
    #[arg(long)]
    pub all_days: bool,
    /// Skip the per-day `bands_<day>.csv` files.
    #[arg(long)]
    pub no_day_bands: bool,
    /// Histogram bins.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    /// The two trained bands, in provider order.
    #[arg(long, num_args = 2, required = true)]
    pub band: Vec<PathBuf>,
    /// The two providers' forecast series, in the same order.
    #[arg(long, num_args = 2, required = true)]
    pub forecast: Vec<PathBuf>,
    /// Evaluate this single weight instead of searching a grid.
    #[arg(long, value_parser = unit_interval, conflicts_with = "alpha_grid")]
    pub alpha: Option<f64>,
    /// Comma-separated weights; defaults to 0.00, 0.01, …, 1.00.
    #[arg(long, value_delimiter = ',', value_parser = unit_interval)]
    pub alpha_grid: Option<Vec<f64>>,
    /// Atypical threshold; defaults to the first band's θ.
    #[arg(long, value_parser = non_negative)]
    pub theta: Option<f64>,
    /// Largest admissible fraction of atypical training days.
    #[arg(long, default_value_t = 0.10, value_parser = unit_interval)]
    pub budget_atypical: f64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// Provider forecast series to train on.
    #[arg(long)]
    pub forecast: PathBuf,
    /// Minimum fraction of regular training days.
    #[arg(long, value_parser = unit_interval)]
    pub lambda: f64,
    /// Comma-separated, strictly increasing θ values.
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = non_negative,
        default_value = "0,0.005,0.01,0.02,0.035,0.05,0.1,0.15,0.2"
    )]
    pub theta_grid: Vec<f64>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}
