//! One function per subcommand.

mod combine;
mod evaluate;
mod generate;
mod pareto;
mod train;

pub use combine::combine;
pub use evaluate::evaluate;
pub use generate::generate;
pub use pareto::pareto;
pub use train::train;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use windband::optimizer::{Formulation, SolveStatus};
use windband::BandCoefficients;

/// Contents of `band.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandFile {
    pub provider: String,
    pub horizon: usize,
    pub theta: f64,
    pub lambda: f64,
    /// Relative half-width coefficient per hour ahead.
    pub x: Vec<f64>,
    pub provenance: Provenance,
    pub solver: SolverReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub data_sha256: String,
    pub seed: u64,
    pub aligned_days: usize,
    pub assimilation_window: Option<usize>,
    pub train_day_ids: Vec<NaiveDate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolveStatus,
    pub objective: f64,
    /// `None` when no bound was proven within the budget.
    pub best_bound: Option<f64>,
    pub nodes: usize,
    pub regular_days: usize,
    pub discarded_day_ids: Vec<NaiveDate>,
    pub formulation: Formulation,
    pub tolerance: f64,
    pub node_limit: usize,
    pub time_limit_seconds: Option<f64>,
    pub x_cap: Option<f64>,
    pub warnings: Vec<String>,
}

impl BandFile {
    pub fn coefficients(&self) -> windband::Result<BandCoefficients> {
        BandCoefficients::new(self.x.clone(), self.theta, self.lambda)
    }

    pub fn load(path: &std::path::Path) -> crate::CliResult<Self> {
        let band: BandFile = crate::output::read_json(path)?;
        if band.x.len() != band.horizon {
            return Err(windband::Error::Dimension {
                context: format!("coefficients in {}", path.display()),
                expected: band.horizon,
                found: band.x.len(),
            }
            .into());
        }
        Ok(band)
    }

    /// Rejects data parsed with a different horizon than the band's.
    pub fn check_horizon(&self, horizon: usize) -> windband::Result<()> {
        if self.horizon == horizon {
            Ok(())
        } else {
            Err(windband::Error::Dimension {
                context: format!("horizon of band for {}", self.provider),
                expected: self.horizon,
                found: horizon,
            })
        }
    }
}

/// Shortest round-trip formatting of a float.
pub fn num(v: f64) -> String {
    v.to_string()
}
