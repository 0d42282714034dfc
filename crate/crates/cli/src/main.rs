//! `windband`: train, evaluate and combine wind power confidence bands.

mod args;
mod commands;
mod data;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failures mapped onto the documented exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] windband::Error),
    /// Outputs were written, but the solver stopped at its node or time budget.
    #[error("{0}")]
    Limit(String),
    /// Outputs were written, but no α met the atypical budget.
    #[error("{0}")]
    NoFeasibleAlpha(String),
    #[error("cannot serialize {what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use windband::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Limit(_) => 4,
            CliError::NoFeasibleAlpha(_) => 1,
            CliError::Json { .. } => 3,
            CliError::Core(e) => match e {
                E::Infeasible { .. } => 1,
                E::EnumerationGuard { .. } | E::Lp(_) => 4,
                E::Dimension { .. }
                | E::Validation(_)
                | E::Parse { .. }
                | E::UndefinedCorrelation(_)
                | E::Io { .. }
                | E::Csv(_) => 3,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Combine(a) => commands::combine(&a),
        Command::Pareto(a) => commands::pareto(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("windband: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
