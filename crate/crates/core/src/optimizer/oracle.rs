//! Exhaustive reference solver for small instances.
//!
//! Enumerates every day selection with at least `⌈λ |D|⌉` regular days and
//! solves the model with that selection fixed, keeping the explicit
//! violation columns `z_t^d` and the rows exactly as stated in the model. It
//! shares only the simplex core with [`super::solve`].

use std::time::Instant;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Sense};

use super::{
    day_data, finish_solution, irreducible_violation, BandProblem, BandSolution, SolveStatus,
    SolverOptions,
};

/// Largest training set the oracle will enumerate.
pub const ORACLE_DAY_LIMIT: usize = 12;

/// The model with the day selection fixed, with one explicit violation
/// column per day and hour and the rows exactly as stated: for every day
/// `p_t x_t - y + z_t >= |w_t - p_t| - 1` and `Σ_t z_t <= T (θ + 1 - y)`.
/// Columns `0..T` are `x`, followed by `T` violation columns per day.
pub fn explicit_program(problem: &BandProblem, regular: &[bool], x_cap: Option<f64>) -> LinearProgram {
    let horizon = problem.horizon();
    let mut lp = LinearProgram::new();
    let cap = x_cap.unwrap_or(f64::INFINITY);
    for &w in &problem.mean_profile.w_bar {
        lp.add_var(w, 0.0, cap);
    }
    for (day, &is_regular) in problem.days.iter().zip(regular) {
        let y = if is_regular { 1.0 } else { 0.0 };
        let z0 = lp.num_vars();
        for _ in 0..horizon {
            lp.add_var(0.0, 0.0, 1.0);
        }
        for t in 0..horizon {
            let p = day.forecast[t];
            let deviation = (day.actual[t] - p).abs();
            lp.add_row(vec![(t, p), (z0 + t, 1.0)], Sense::Ge, deviation - 1.0 + y);
        }
        lp.add_row(
            (0..horizon).map(|t| (z0 + t, 1.0)).collect(),
            Sense::Le,
            horizon as f64 * (problem.theta + 1.0 - y),
        );
    }
    lp
}

/// Minimum over all admissible day selections of the selection-fixed model.
/// `nodes` in the result counts the selections enumerated.
pub fn brute_force_oracle(problem: &BandProblem, options: &SolverOptions) -> Result<BandSolution> {
    problem.validate()?;
    let num_days = problem.num_days();
    if num_days > ORACLE_DAY_LIMIT {
        return Err(Error::EnumerationGuard {
            days: num_days,
            limit: ORACLE_DAY_LIMIT,
        });
    }
    let started = Instant::now();
    let required = problem.required_regular();
    let horizon = problem.horizon();
    let days = day_data(problem);

    let mut best: Option<(f64, Vec<f64>, Vec<bool>)> = None;
    let mut enumerated = 0usize;
    for mask in 0u32..(1 << num_days) {
        if (mask.count_ones() as usize) < required {
            continue;
        }
        enumerated += 1;
        let regular: Vec<bool> = (0..num_days).map(|d| mask >> d & 1 == 1).collect();

        let lp = explicit_program(problem, &regular, options.x_cap);
        let sol = lp.solve();
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            other => return Err(Error::Lp(format!("oracle LP stopped with status {other:?}"))),
        }
        if best.as_ref().is_none_or(|(obj, _, _)| sol.objective < *obj) {
            best = Some((sol.objective, sol.x[..horizon].to_vec(), regular));
        }
    }

    let Some((objective, x, regular)) = best else {
        let witness = days
            .iter()
            .position(|d| {
                irreducible_violation(d, options.x_cap) > horizon as f64 * problem.theta + 1e-9
            })
            .unwrap_or(0);
        return Err(Error::Infeasible {
            witness_day: witness,
            day_id: problem.days[witness].day_id,
        });
    };
    finish_solution(
        problem,
        x,
        regular,
        SolveStatus::Optimal,
        objective,
        enumerated,
        started.elapsed().as_secs_f64(),
        Vec::new(),
    )
}
