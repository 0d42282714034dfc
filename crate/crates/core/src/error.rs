use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced by the band library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error in {source_name}: {}", format_lines(.problems))]
    Parse {
        source_name: String,
        problems: Vec<LineProblem>,
    },

    #[error("instance is infeasible: day #{witness_day} ({day_id}) cannot meet its off-band budget at any admissible band")]
    Infeasible {
        witness_day: usize,
        day_id: NaiveDate,
    },

    #[error("enumeration refused: {days} days exceeds the oracle guard of {limit}")]
    EnumerationGuard { days: usize, limit: usize },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("linear programming failure: {0}")]
    Lp(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One offending line of an input file.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProblem {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub message: String,
}

/// Lines listed in a parse error message; the rest are only counted.
const LISTED_PROBLEMS: usize = 10;

fn format_lines(problems: &[LineProblem]) -> String {
    let mut text = problems
        .iter()
        .take(LISTED_PROBLEMS)
        .map(|p| format!("line {}: {}", p.line, p.message))
        .collect::<Vec<_>>()
        .join("; ");
    if problems.len() > LISTED_PROBLEMS {
        text.push_str(&format!("; and {} more", problems.len() - LISTED_PROBLEMS));
    }
    text
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn check_len(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context: context.to_string(),
            expected,
            found,
        })
    }
}
