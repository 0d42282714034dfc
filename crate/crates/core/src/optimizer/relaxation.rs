//! Linear relaxation of the band model, solved by row generation.
//!
//! With `z` eliminated, day `d` imposes
//!
//! ```text
//! Σ_t max(0, c_t + e_t y_d - p_t x_t) + β y_d <= T θ + β
//! ```
//!
//! where `(c_t, e_t, β) = (a_t - 1, 1, T)` for the model as written and
//! `(0, a_t, -T θ)` for the tightened form, with `a_t = |w_t - p_t|`. This is
//! the intersection of one linear row per subset `S` of hours, with the sum
//! restricted to `S`. Only the rows that bind are ever needed: the solver adds
//! the most violated subset row of each day until none is violated, so the
//! final point is optimal for the full relaxation.
//!
//! Every subset row is valid for all `y_d ∈ [0, 1]`, so one linear program
//! serves a whole branch-and-bound search: nodes differ only in the bounds of
//! the `y` columns, and each node starts from the previous basis and rows.

use std::collections::HashSet;
use std::time::Instant;

use log::trace;

use crate::error::{check_len, Error, Result};
use crate::lp::{LinearProgram, LpStatus, Row, Sense, Simplex};

use super::{day_data, BandProblem, DayData, Formulation, SolverOptions};

/// Tolerance on a day's budget row before a new subset row is generated. It
/// sits above the simplex feasibility tolerance so a row that is satisfied to
/// simplex accuracy is never generated twice.
const SEPARATION_TOL: f64 = 1e-8;
const MAX_ROUNDS: usize = 5_000;
/// Weight of the LP optimum in the separation point.
const STABILIZATION: f64 = 0.5;
/// Rounds after which the optimum is separated directly.
const STABILIZED_ROUNDS: usize = 50;
/// Minimum number of rounds between purges within one solve.
const PURGE_SPACING: usize = 25;
/// Pooled rows re-activated per day and round.
const POOL_ROWS_PER_DAY: usize = 4;
const POOL_LIMIT: usize = 50_000;
/// Rows whose slack exceeds this are considered non-binding when purging.
const PURGE_SLACK: f64 = 1e-7;

/// Optimal point of the linear relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Relaxed `y_d`, equal to the fixing where one was given.
    pub y: Vec<f64>,
    /// Smallest violations consistent with `(x, y)`.
    pub z: Vec<Vec<f64>>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationOutcome {
    Optimal(LpSolution),
    /// No completion of the fixing satisfies the relaxation.
    Infeasible,
}

/// Solves the continuous relaxation with `y_d ∈ [0, 1]`, except for days
/// fixed by `fixed_y`. Its objective bounds every completion of the fixing
/// from below.
pub fn solve_relaxation(
    problem: &BandProblem,
    fixed_y: &[Option<bool>],
    options: &SolverOptions,
) -> Result<RelaxationOutcome> {
    problem.validate()?;
    check_len("fixed assignment", problem.num_days(), fixed_y.len())?;
    let mut model = CutModel::new(problem, options, problem.required_regular());
    let Some(node) = model.solve_node(fixed_y)? else {
        return Ok(RelaxationOutcome::Infeasible);
    };
    let z = (0..problem.num_days())
        .map(|d| {
            (0..model.horizon)
                .map(|t| model.term(d, t, &node.x, node.y[d]).max(0.0))
                .collect()
        })
        .collect();
    Ok(RelaxationOutcome::Optimal(LpSolution {
        x: node.x,
        y: node.y,
        z,
        objective: node.objective,
    }))
}

/// A subset row of one day's budget constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Cut {
    pub day: usize,
    pub hours: Vec<u16>,
}

#[derive(Debug, Clone)]
pub(crate) struct NodeSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
    /// Sum of the absolute multipliers of each day's rows: the marginal
    /// objective gain per unit of extra off-band budget on that day.
    pub day_weight: Vec<f64>,
}

/// The relaxation as one warm linear program: columns `x_0..x_{T-1}`, then
/// `y_0..y_{|D|-1}`, an optional cardinality row and the generated subset rows.
pub(crate) struct CutModel {
    pub days: Vec<DayData>,
    pub horizon: usize,
    theta: f64,
    formulation: Formulation,
    simplex: Simplex,
    /// What each simplex row is; `None` marks the cardinality row.
    rows: Vec<Option<Cut>>,
    present: HashSet<Cut>,
    /// Every row generated so far, including purged ones.
    pool: Vec<Cut>,
    pooled: HashSet<Cut>,
    /// A band wide enough for every admissible day, used to stabilize
    /// separation.
    interior: Vec<f64>,
    /// Node solves give up (reporting no solution) once this passes.
    pub deadline: Option<Instant>,
    /// Set when a node solve gave up at the deadline.
    pub timed_out: bool,
}

impl CutModel {
    pub fn new(problem: &BandProblem, options: &SolverOptions, required: usize) -> Self {
        let horizon = problem.horizon();
        let num_days = problem.num_days();
        let mut lp = LinearProgram::new();
        for &w in &problem.mean_profile.w_bar {
            lp.add_var(w, 0.0, options.x_cap.unwrap_or(f64::INFINITY));
        }
        for _ in 0..num_days {
            lp.add_var(0.0, 0.0, 1.0);
        }
        let mut rows = Vec::new();
        if required > 0 {
            let coeffs = (0..num_days).map(|d| (horizon + d, 1.0)).collect();
            lp.add_row(coeffs, Sense::Ge, required as f64);
            rows.push(None);
        }
        let days = day_data(problem);
        let interior = (0..horizon)
            .map(|t| {
                let widest = days
                    .iter()
                    .filter(|d| d.forecast[t] > 0.0)
                    .map(|d| d.deviation[t] / d.forecast[t])
                    .fold(0.0, f64::max);
                options.x_cap.map_or(widest, |cap| widest.min(cap))
            })
            .collect();
        Self {
            days,
            interior,
            horizon,
            theta: problem.theta,
            formulation: options.formulation,
            simplex: Simplex::new(&lp),
            rows,
            present: HashSet::new(),
            pool: Vec::new(),
            pooled: HashSet::new(),
            deadline: None,
            timed_out: false,
        }
    }

    fn num_cols(&self) -> usize {
        self.horizon + self.days.len()
    }

    fn constant(&self, d: usize, t: usize) -> f64 {
        match self.formulation {
            Formulation::AsWritten => self.days[d].deviation[t] - 1.0,
            Formulation::Tightened => 0.0,
        }
    }

    fn y_coeff(&self, d: usize, t: usize) -> f64 {
        match self.formulation {
            Formulation::AsWritten => 1.0,
            Formulation::Tightened => self.days[d].deviation[t],
        }
    }

    fn budget_y_coeff(&self) -> f64 {
        match self.formulation {
            Formulation::AsWritten => self.horizon as f64,
            Formulation::Tightened => -(self.horizon as f64) * self.theta,
        }
    }

    /// Lower bound on `z_t^d` at `(x, y_d)` before clipping at zero.
    pub fn term(&self, d: usize, t: usize, x: &[f64], y: f64) -> f64 {
        self.constant(d, t) + self.y_coeff(d, t) * y - self.days[d].forecast[t] * x[t]
    }

    /// Most violated subset row of day `d`, if any.
    fn separate(&self, d: usize, x: &[f64], y: f64) -> Option<Cut> {
        let mut lhs = self.budget_y_coeff() * y;
        let mut hours = Vec::new();
        for t in 0..self.horizon {
            let v = self.term(d, t, x, y);
            if v > 0.0 {
                lhs += v;
                hours.push(t as u16);
            }
        }
        let rhs = self.horizon as f64 * self.theta + self.budget_y_coeff();
        (lhs > rhs + SEPARATION_TOL).then_some(Cut { day: d, hours })
    }

    fn cut_row(&self, cut: &Cut) -> Row {
        let d = cut.day;
        let beta = self.budget_y_coeff();
        let mut coeffs = Vec::with_capacity(cut.hours.len() + 1);
        let mut rhs = self.horizon as f64 * self.theta + beta;
        let mut y_coef = beta;
        for &t in &cut.hours {
            let t = t as usize;
            let p = self.days[d].forecast[t];
            if p != 0.0 {
                coeffs.push((t, -p));
            }
            rhs -= self.constant(d, t);
            y_coef += self.y_coeff(d, t);
        }
        coeffs.push((self.horizon + d, y_coef));
        Row::new(coeffs, Sense::Le, rhs)
    }

    /// Violation of a subset row at `(x, y_d)`.
    fn cut_violation(&self, cut: &Cut, x: &[f64], y: f64) -> f64 {
        let beta = self.budget_y_coeff();
        let lhs = beta * y
            + cut
                .hours
                .iter()
                .map(|&t| self.term(cut.day, t as usize, x, y))
                .sum::<f64>();
        lhs - (self.horizon as f64 * self.theta + beta)
    }

    fn activate(&mut self, cut: Cut, rows: &mut Vec<Row>) {
        if self.present.insert(cut.clone()) {
            rows.push(self.cut_row(&cut));
            self.rows.push(Some(cut.clone()));
        }
        if self.pooled.insert(cut.clone()) {
            self.pool.push(cut);
        }
    }

    /// New rows violated at `(x, y)`: up to a few pooled rows per day plus
    /// the most violated fresh row of every day.
    fn violated_rows(&mut self, x: &[f64], y: &[f64]) -> Vec<Row> {
        let mut per_day: Vec<Vec<(f64, usize)>> = vec![Vec::new(); self.days.len()];
        for (i, cut) in self.pool.iter().enumerate() {
            if y[cut.day] <= 0.0 || self.present.contains(cut) {
                continue;
            }
            let v = self.cut_violation(cut, x, y[cut.day]);
            if v > SEPARATION_TOL {
                per_day[cut.day].push((v, i));
            }
        }
        let mut picked = Vec::new();
        for mut cands in per_day {
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            picked.extend(cands.into_iter().take(POOL_ROWS_PER_DAY).map(|(_, i)| i));
        }
        let mut rows = Vec::new();
        for i in picked {
            let cut = self.pool[i].clone();
            self.activate(cut, &mut rows);
        }
        for d in 0..self.days.len() {
            if y[d] <= 0.0 {
                continue;
            }
            if let Some(cut) = self.separate(d, x, y[d]) {
                self.activate(cut, &mut rows);
            }
        }
        if self.pool.len() > POOL_LIMIT {
            let present = &self.present;
            self.pool.retain(|c| present.contains(c));
            self.pooled = self.pool.iter().cloned().collect();
        }
        rows
    }

    /// Drops generated rows that are slack at the current point.
    fn purge(&mut self) {
        let drop: Vec<bool> = (0..self.simplex.num_rows())
            .map(|i| self.rows[i].is_some() && self.simplex.row_slack(i) > PURGE_SLACK)
            .collect();
        let map = self.simplex.drop_rows(&drop);
        let mut kept = Vec::with_capacity(self.rows.len());
        for (i, cut) in std::mem::take(&mut self.rows).into_iter().enumerate() {
            if map[i].is_some() {
                kept.push(cut);
            } else if let Some(cut) = cut {
                self.present.remove(&cut);
            }
        }
        self.rows = kept;
    }

    /// Solves the relaxation with the given days fixed. `None` means no
    /// completion of the fixing is feasible, or that the deadline passed, in
    /// which case `timed_out` is set.
    pub fn solve_node(&mut self, fixed: &[Option<bool>]) -> Result<Option<NodeSolution>> {
        for (d, f) in fixed.iter().enumerate() {
            let (lo, hi) = match f {
                Some(true) => (1.0, 1.0),
                Some(false) => (0.0, 0.0),
                None => (0.0, 1.0),
            };
            self.simplex.set_bounds(self.horizon + d, lo, hi);
        }
        let soft_limit = self.num_cols() + 32;
        if self.rows.len() > soft_limit && self.simplex.status() == LpStatus::Optimal {
            self.purge();
        }

        let pivots_before = self.simplex.iterations();
        let mut interior = std::mem::take(&mut self.interior);
        let mut status = self.simplex.solve();
        let mut objective_at_purge = f64::NEG_INFINITY;
        let mut last_purge = 0;
        for round in 0..MAX_ROUNDS {
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                self.timed_out = true;
                self.interior = interior;
                return Ok(None);
            }
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    self.interior = interior;
                    return Ok(None);
                }
                other => {
                    return Err(Error::Lp(format!("relaxation stopped with status {other:?}")))
                }
            }
            let values = self.simplex.values();
            let x = &values[..self.horizon];
            let y = &values[self.horizon..];
            // In-out separation: cut at a point between the LP optimum and
            // the interior band first; only when that point is clean is the
            // optimum itself separated, which keeps the result exact.
            let stabilization = if round < STABILIZED_ROUNDS { STABILIZATION } else { 1.0 };
            let probe: Vec<f64> = interior
                .iter()
                .zip(x)
                .map(|(i, v)| i + stabilization * (v - i))
                .collect();
            let mut new_rows = self.violated_rows(&probe, y);
            if new_rows.is_empty() {
                interior = probe;
                new_rows = self.violated_rows(x, y);
            }
            if new_rows.is_empty() {
                self.interior = interior;
                trace!(
                    "relaxation: {} rounds, {} rows, {} pivots, objective {:.6}",
                    round + 1,
                    self.rows.len(),
                    self.simplex.iterations() - pivots_before,
                    self.simplex.objective()
                );
                let duals = self.simplex.duals();
                let mut day_weight = vec![0.0; self.days.len()];
                for (cut, dual) in self.rows.iter().zip(&duals) {
                    if let Some(cut) = cut {
                        day_weight[cut.day] += dual.abs();
                    }
                }
                let y = fixed
                    .iter()
                    .zip(y)
                    .map(|(f, &v)| match f {
                        Some(true) => 1.0,
                        Some(false) => 0.0,
                        None => v.clamp(0.0, 1.0),
                    })
                    .collect();
                return Ok(Some(NodeSolution {
                    x: x.to_vec(),
                    y,
                    objective: self.simplex.objective(),
                    day_weight,
                }));
            }
            // Purging only after the objective has moved rules out cycling
            // between dropping a row and generating it again.
            let objective = self.simplex.objective();
            if self.rows.len() > 2 * soft_limit
                && round >= last_purge + PURGE_SPACING
                && objective > objective_at_purge + 1e-9 * objective.abs().max(1.0)
            {
                let fresh = new_rows.len();
                let pending: Vec<Option<Cut>> = self.rows.split_off(self.rows.len() - fresh);
                self.purge();
                self.rows.extend(pending);
                objective_at_purge = objective;
                last_purge = round;
            }
            status = self.simplex.add_rows(&new_rows);
        }
        Err(Error::Lp("row generation did not converge".into()))
    }
}
