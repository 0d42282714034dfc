//! Band training by mixed-integer optimization.
//!
//! For training days `D` with forecasts `p^d`, actuals `w^d` and mean profile
//! `ŵ`, the model is
//!
//! ```text
//! min  Σ_t ŵ_t x_t
//! s.t. p_t^d x_t - y_d + z_t^d >= |w_t^d - p_t^d| - 1     (i)   all d, t
//!      Σ_t z_t^d <= T (θ + 1 - y_d)                       (ii)  all d
//!      Σ_d y_d >= ⌈λ |D|⌉                                 (iii)
//!      y_d ∈ {0, 1},  x_t >= 0,  0 <= z_t^d <= 1
//! ```
//!
//! Days with `y_d = 1` are regular and must keep their off-band energy under
//! `θ`; the others are discarded as atypical. With `λ = 1` every `y_d` is
//! forced to one and the model is a linear program.
//!
//! The violations `z` are eliminated analytically: at any fixed `(x, y)` the
//! cheapest choice is `z_t^d = max(0, |w - p| - 1 + y_d - p x_t)`, so each
//! day contributes one convex piecewise-linear constraint in `(x, y_d)`. The
//! relaxation solver generates the linear pieces of those constraints on
//! demand (see [`relaxation`]) and branch-and-bound in [`branch`] closes the
//! integrality gap over `y`. [`oracle`] enumerates assignments against the
//! explicit formulation above for small instances.

mod branch;
pub mod oracle;
pub mod relaxation;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::band::{check_parameter, BandCoefficients, DayRecord, MeanProfile};
use crate::error::{check_len, validation, Result};

pub use branch::{solve, solve_from};
pub use oracle::{brute_force_oracle, explicit_program, ORACLE_DAY_LIMIT};
pub use relaxation::{solve_relaxation, LpSolution, RelaxationOutcome};

/// A fully materialized training instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProblem {
    pub days: Vec<DayRecord>,
    pub mean_profile: MeanProfile,
    pub theta: f64,
    pub lambda: f64,
}

/// Where the mean profile `ŵ` of the objective comes from.
#[derive(Debug, Clone)]
pub enum MeanSource<'a> {
    /// The training days themselves.
    Training,
    /// A separate historical record.
    Days(&'a [DayRecord]),
    Profile(MeanProfile),
}

/// Validates the inputs and assembles a [`BandProblem`].
pub fn build_instance(
    days: Vec<DayRecord>,
    mean_source: MeanSource<'_>,
    theta: f64,
    lambda: f64,
) -> Result<BandProblem> {
    if days.is_empty() {
        return Err(validation("training set is empty"));
    }
    check_parameter("theta", theta)?;
    check_parameter("lambda", lambda)?;
    let horizon = days[0].horizon();
    for day in &days {
        check_len("training day horizon", horizon, day.horizon())?;
    }
    let mean_profile = match mean_source {
        MeanSource::Training => MeanProfile::from_days(&days)?,
        MeanSource::Days(source) => MeanProfile::from_days(source)?,
        MeanSource::Profile(profile) => profile,
    };
    check_len("mean profile horizon", horizon, mean_profile.horizon())?;
    Ok(BandProblem {
        days,
        mean_profile,
        theta,
        lambda,
    })
}

impl BandProblem {
    pub fn horizon(&self) -> usize {
        self.mean_profile.horizon()
    }

    pub fn num_days(&self) -> usize {
        self.days.len()
    }

    /// Minimum number of regular days, `⌈λ |D|⌉`.
    pub fn required_regular(&self) -> usize {
        required_regular(self.lambda, self.days.len())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.days.is_empty() {
            return Err(validation("training set is empty"));
        }
        check_parameter("theta", self.theta)?;
        check_parameter("lambda", self.lambda)?;
        for day in &self.days {
            check_len("training day horizon", self.horizon(), day.horizon())?;
        }
        Ok(())
    }
}

pub(crate) fn required_regular(lambda: f64, days: usize) -> usize {
    // The small offset keeps products like 0.9 * 120 from rounding up.
    let k = (lambda * days as f64 - 1e-9).ceil().max(0.0) as usize;
    k.min(days)
}

/// Which linear relaxation of the model bounds the branch-and-bound nodes.
///
/// Both describe the same integer solutions. `AsWritten` relaxes the model
/// exactly as stated, with unit big-M terms in (i) and (ii). `Tightened`
/// replaces (i) by `p_t x_t + z_t >= |w_t - p_t| y_d` and (ii) by
/// `Σ_t z_t <= T θ y_d`, which agree with the original at `y_d ∈ {0, 1}`.
/// For a single day this is the convex hull of the two cases, so it gives
/// much stronger bounds at fractional `y_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    AsWritten,
    #[default]
    Tightened,
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Feasibility and relative optimality tolerance.
    pub tolerance: f64,
    /// Maximum number of branch-and-bound nodes.
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Upper bound on every `x_t`.
    pub x_cap: Option<f64>,
    pub formulation: Formulation,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            node_limit: Some(100_000),
            time_limit: None,
            x_cap: None,
            formulation: Formulation::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// The node or time budget ran out; the best incumbent is returned along
    /// with the best proven bound.
    IterationLimit,
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSolution {
    pub status: SolveStatus,
    pub coefficients: BandCoefficients,
    /// `y_d`: true for regular days.
    pub regular: Vec<bool>,
    /// `z_t^d` per day and hour; all zero on atypical days.
    pub violations: Vec<Vec<f64>>,
    /// `Σ_t ŵ_t x_t`.
    pub objective: f64,
    /// Best proven lower bound on the optimum.
    pub best_bound: f64,
    /// Branch-and-bound nodes explored (assignments enumerated by the oracle).
    pub nodes: usize,
    pub solve_seconds: f64,
    /// Regular-day hours with a zero forecast but positive generation; their
    /// violation cannot be reduced by any band.
    pub flagged_hours: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

impl BandSolution {
    pub fn num_regular(&self) -> usize {
        self.regular.iter().filter(|&&r| r).count()
    }

    /// Indices of the days discarded as atypical.
    pub fn atypical_days(&self) -> Vec<usize> {
        self.regular
            .iter()
            .enumerate()
            .filter(|(_, &r)| !r)
            .map(|(d, _)| d)
            .collect()
    }

    /// Largest violation of constraints (i)–(iii) of the model.
    pub fn max_constraint_violation(&self, problem: &BandProblem) -> f64 {
        let horizon = problem.horizon() as f64;
        let mut worst: f64 = 0.0;
        for (d, day) in problem.days.iter().enumerate() {
            let y = if self.regular[d] { 1.0 } else { 0.0 };
            let z = &self.violations[d];
            for t in 0..day.horizon() {
                let p = day.forecast[t];
                let rhs = (day.actual[t] - p).abs() - 1.0;
                let lhs = p * self.coefficients.x[t] - y + z[t];
                worst = worst.max(rhs - lhs);
                worst = worst.max(-z[t]).max(z[t] - 1.0);
            }
            let sum_z: f64 = z.iter().sum();
            worst = worst.max(sum_z - horizon * (problem.theta + 1.0 - y));
        }
        let shortfall = problem.required_regular() as f64 - self.num_regular() as f64;
        worst = worst.max(shortfall);
        for &x in &self.coefficients.x {
            worst = worst.max(-x);
        }
        worst
    }
}

/// Per-day data shared by the relaxation, heuristics and oracle.
#[derive(Debug, Clone)]
pub(crate) struct DayData {
    pub forecast: Vec<f64>,
    pub deviation: Vec<f64>,
}

pub(crate) fn day_data(problem: &BandProblem) -> Vec<DayData> {
    problem
        .days
        .iter()
        .map(|d| DayData {
            forecast: d.forecast.clone(),
            deviation: d.deviations(),
        })
        .collect()
}

/// Smallest off-band energy (times `T`) a day can reach as a regular day.
pub(crate) fn irreducible_violation(day: &DayData, x_cap: Option<f64>) -> f64 {
    day.forecast
        .iter()
        .zip(&day.deviation)
        .map(|(&p, &a)| match x_cap {
            Some(cap) => (a - p * cap).max(0.0),
            None if p > 0.0 => 0.0,
            None => a,
        })
        .sum()
}

/// Assembles the reported solution from a band and a day selection.
pub(crate) fn finish_solution(
    problem: &BandProblem,
    x: Vec<f64>,
    regular: Vec<bool>,
    status: SolveStatus,
    best_bound: f64,
    nodes: usize,
    solve_seconds: f64,
    mut warnings: Vec<String>,
) -> Result<BandSolution> {
    check_len("band coefficients", problem.horizon(), x.len())?;
    let coefficients = BandCoefficients::new(x, problem.theta, problem.lambda)?;
    let mut flagged_hours = Vec::new();
    let violations = problem
        .days
        .iter()
        .zip(&regular)
        .enumerate()
        .map(|(d, (day, &is_regular))| {
            if !is_regular {
                return vec![0.0; day.horizon()];
            }
            (0..day.horizon())
                .map(|t| {
                    let p = day.forecast[t];
                    let w = day.actual[t];
                    if p == 0.0 && w > 0.0 {
                        flagged_hours.push((d, t));
                    }
                    let xt = coefficients.x[t];
                    0.0f64.max(w - p * (1.0 + xt)).max(p * (1.0 - xt) - w)
                })
                .collect()
        })
        .collect();
    let objective = problem
        .mean_profile
        .w_bar
        .iter()
        .zip(&coefficients.x)
        .map(|(w, x)| w * x)
        .sum();
    if !flagged_hours.is_empty() {
        warnings.push(format!(
            "{} regular-day hours have a zero forecast with positive generation",
            flagged_hours.len()
        ));
    }
    Ok(BandSolution {
        status,
        coefficients,
        regular,
        violations,
        objective,
        best_bound: best_bound.min(objective),
        nodes,
        solve_seconds,
        flagged_hours,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn day(offset: i64, p: &[f64], w: &[f64]) -> DayRecord {
        let id = NaiveDate::from_ymd_opt(2016, 4, 5).unwrap() + chrono::Days::new(offset as u64);
        DayRecord::new(id, p.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn mean_profile_from_training_days() {
        let days = vec![day(0, &[0.2, 0.4], &[0.2, 0.4]), day(1, &[0.6, 0.8], &[0.6, 0.8])];
        let problem = build_instance(days, MeanSource::Training, 0.1, 1.0).unwrap();
        assert!((problem.mean_profile.w_bar[0] - 0.4).abs() < 1e-12);
        assert!((problem.mean_profile.w_bar[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn mean_profile_from_separate_record() {
        let days = vec![day(0, &[0.2, 0.4], &[0.2, 0.4])];
        let history = vec![day(5, &[0.0, 0.0], &[1.0, 0.0]), day(6, &[0.0, 0.0], &[0.0, 0.5])];
        let problem = build_instance(days, MeanSource::Days(&history), 0.1, 1.0).unwrap();
        assert_eq!(problem.mean_profile.w_bar, vec![0.5, 0.25]);
    }

    #[test]
    fn rejects_bad_instances() {
        let days = vec![day(0, &[0.2, 0.4], &[0.2, 0.4])];
        assert!(build_instance(days.clone(), MeanSource::Training, 1.2, 1.0).is_err());
        assert!(build_instance(days.clone(), MeanSource::Training, 0.1, -0.1).is_err());
        assert!(build_instance(vec![], MeanSource::Training, 0.1, 1.0).is_err());
        let mixed = vec![days[0].clone(), day(1, &[0.1, 0.1, 0.1], &[0.1, 0.1, 0.1])];
        assert!(build_instance(mixed, MeanSource::Training, 0.1, 1.0).is_err());
    }

    #[test]
    fn cardinality_rounds_up() {
        assert_eq!(required_regular(0.9, 120), 108);
        assert_eq!(required_regular(0.95, 120), 114);
        assert_eq!(required_regular(0.5, 3), 2);
        assert_eq!(required_regular(0.0, 3), 0);
        assert_eq!(required_regular(1.0, 7), 7);
    }
}
