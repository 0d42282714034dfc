//! Best-bound branch-and-bound over the day selection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::{debug, warn};

use crate::error::{check_len, Error, Result};

use super::relaxation::{CutModel, NodeSolution};
use super::{finish_solution, irreducible_violation, BandProblem, BandSolution, SolveStatus, SolverOptions};

/// Rounding heuristic frequency, in processed nodes.
const ROUNDING_EVERY: usize = 16;
const INTEGRALITY_TOL: f64 = 1e-6;

struct Node {
    bound: f64,
    order: u64,
    fixed: Vec<Option<bool>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node,
    // compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.order.cmp(&self.order))
    }
}

struct Incumbent {
    x: Vec<f64>,
    regular: Vec<bool>,
    objective: f64,
}

struct Search {
    model: CutModel,
    required: usize,
    incumbent: Option<Incumbent>,
}

impl Search {
    /// Solves the band LP with the given days regular and the rest discarded.
    fn evaluate(&mut self, regular: &[bool]) -> Result<Option<NodeSolution>> {
        let fixed: Vec<Option<bool>> = regular.iter().map(|&r| Some(r)).collect();
        self.model.solve_node(&fixed)
    }

    fn offer(&mut self, regular: Vec<bool>, sol: &NodeSolution) {
        let better = self
            .incumbent
            .as_ref()
            .is_none_or(|inc| sol.objective < inc.objective);
        if better {
            debug!("incumbent {:.6}", sol.objective);
            self.incumbent = Some(Incumbent {
                x: sol.x.clone(),
                regular,
                objective: sol.objective,
            });
        }
    }

    /// Greedy descent: starting from every admissible day, repeatedly
    /// discard the day whose budget row is most expensive at the optimum.
    /// Before the first step, the whole excess is discarded at once by the
    /// same ranking, which gives a cheap early incumbent.
    fn greedy(&mut self, admissible: &[bool]) -> Result<()> {
        let mut regular = admissible.to_vec();
        let mut first = true;
        loop {
            let Some(sol) = self.evaluate(&regular)? else {
                return Ok(());
            };
            self.offer(regular.clone(), &sol);
            let count = regular.iter().filter(|&&r| r).count();
            if count <= self.required {
                return Ok(());
            }
            if std::mem::take(&mut first) {
                let mut ranked: Vec<usize> = (0..regular.len()).filter(|&d| regular[d]).collect();
                ranked.sort_by(|&a, &b| {
                    sol.day_weight[b]
                        .total_cmp(&sol.day_weight[a])
                        .then_with(|| a.cmp(&b))
                });
                let mut shot = regular.clone();
                for &d in &ranked[..count - self.required] {
                    shot[d] = false;
                }
                if let Some(shot_sol) = self.evaluate(&shot)? {
                    self.offer(shot, &shot_sol);
                }
            }
            let worst = (0..regular.len())
                .filter(|&d| regular[d] && sol.day_weight[d] > 1e-12)
                .max_by(|&a, &b| {
                    sol.day_weight[a]
                        .total_cmp(&sol.day_weight[b])
                        .then_with(|| b.cmp(&a))
                });
            match worst {
                Some(d) => regular[d] = false,
                None => return Ok(()),
            }
        }
    }

    /// Keeps the days a fractional node favors most.
    fn round(&mut self, fixed: &[Option<bool>], y: &[f64]) -> Result<()> {
        let mut regular: Vec<bool> = fixed.iter().map(|f| *f == Some(true)).collect();
        let on = regular.iter().filter(|&&r| r).count();
        let mut free: Vec<usize> = (0..fixed.len()).filter(|&d| fixed[d].is_none()).collect();
        free.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then_with(|| a.cmp(&b)));
        let need = self.required.saturating_sub(on);
        for (rank, &d) in free.iter().enumerate() {
            if rank < need || y[d] >= 1.0 - INTEGRALITY_TOL {
                regular[d] = true;
            }
        }
        if let Some(sol) = self.evaluate(&regular)? {
            self.offer(regular, &sol);
        }
        Ok(())
    }
}

/// Solves the band model to optimality, or to the node/time budget.
///
/// With `λ = 1` the day selection is forced and a single linear program is
/// solved. Otherwise best-bound branch-and-bound runs over `y`, branching on
/// the most fractional day (ties to the lowest index), seeded with a greedy
/// incumbent. An infeasible instance is reported as [`Error::Infeasible`]
/// with a day that cannot be regular under any band.
pub fn solve(problem: &BandProblem, options: &SolverOptions) -> Result<BandSolution> {
    solve_from(problem, options, None)
}

/// [`solve`] with a known day selection offered as the first incumbent, for
/// example the selection optimal for a neighboring `θ` or `λ`. A selection
/// that is infeasible for this instance is ignored.
pub fn solve_from(
    problem: &BandProblem,
    options: &SolverOptions,
    start: Option<&[bool]>,
) -> Result<BandSolution> {
    problem.validate()?;
    if let Some(start) = start {
        check_len("starting selection", problem.num_days(), start.len())?;
    }
    let started = Instant::now();
    let num_days = problem.num_days();
    let required = problem.required_regular();
    let model = CutModel::new(problem, options, required);
    let horizon = problem.horizon() as f64;
    let tol = options.tolerance;

    // Regular days are coupled only through x, and a wider band never hurts,
    // so a day that fails at the widest admissible band can never be regular.
    let admissible: Vec<bool> = model
        .days
        .iter()
        .map(|d| irreducible_violation(d, options.x_cap) <= horizon * problem.theta + 1e-9)
        .collect();
    let admissible_count = admissible.iter().filter(|&&a| a).count();
    if admissible_count < required {
        let witness = admissible.iter().position(|&a| !a).expect("some day is inadmissible");
        return Err(Error::Infeasible {
            witness_day: witness,
            day_id: problem.days[witness].day_id,
        });
    }

    let mut warnings = Vec::new();
    if required == 0 {
        warnings.push("lambda admits discarding every day; the zero band is optimal".to_string());
        warn!("{}", warnings[0]);
    }

    let mut search = Search {
        model,
        required,
        incumbent: None,
    };

    if required == num_days {
        let regular = vec![true; num_days];
        let sol = search
            .evaluate(&regular)?
            .ok_or_else(|| Error::Lp("admissible λ = 1 instance reported infeasible".into()))?;
        return finish_solution(
            problem,
            sol.x,
            regular,
            SolveStatus::Optimal,
            sol.objective,
            1,
            started.elapsed().as_secs_f64(),
            warnings,
        );
    }

    if let Some(start) = start {
        let usable = start.iter().filter(|&&r| r).count() >= required
            && start.iter().zip(&admissible).all(|(&r, &a)| a || !r);
        if usable {
            if let Some(sol) = search.evaluate(start)? {
                search.offer(start.to_vec(), &sol);
            }
        }
    }
    // The all-admissible selection is always feasible, so it is solved
    // before the deadline applies and anchors the incumbent.
    if let Some(sol) = search.evaluate(&admissible)? {
        search.offer(admissible.clone(), &sol);
    }
    search.model.deadline = options.time_limit.map(|t| started + t);
    search.greedy(&admissible)?;

    let root_fixed: Vec<Option<bool>> = admissible
        .iter()
        .map(|&a| if a { None } else { Some(false) })
        .collect();
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        order,
        fixed: root_fixed,
    });
    let mut nodes = 0usize;
    let mut limited = false;

    let prune_above = |inc: &Option<Incumbent>| match inc {
        Some(inc) => inc.objective - tol * inc.objective.abs().max(1.0),
        None => f64::INFINITY,
    };

    while let Some(node) = heap.peek() {
        if node.bound >= prune_above(&search.incumbent) {
            // Best-first: every remaining node is dominated.
            heap.clear();
            break;
        }
        let out_of_nodes = options.node_limit.is_some_and(|n| nodes >= n);
        let out_of_time = search.model.timed_out
            || options.time_limit.is_some_and(|t| started.elapsed() >= t);
        if out_of_nodes || out_of_time {
            limited = true;
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes += 1;

        let Some(sol) = search.model.solve_node(&node.fixed)? else {
            if search.model.timed_out {
                heap.push(node);
                limited = true;
                break;
            }
            continue;
        };
        if sol.objective >= prune_above(&search.incumbent) {
            continue;
        }

        let branch_day = (0..num_days)
            .filter(|&d| node.fixed[d].is_none())
            .map(|d| (d, sol.y[d].min(1.0 - sol.y[d])))
            .filter(|&(_, frac)| frac > INTEGRALITY_TOL)
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .map(|(d, _)| d);

        let Some(day) = branch_day else {
            // Integral: re-solve with y rounded so the incumbent is exact.
            let regular: Vec<bool> = sol.y.iter().map(|&y| y > 0.5).collect();
            if let Some(exact) = search.evaluate(&regular)? {
                search.offer(regular, &exact);
            }
            continue;
        };

        if nodes == 1 || nodes % ROUNDING_EVERY == 0 {
            search.round(&node.fixed, &sol.y)?;
        }

        for value in [false, true] {
            let mut fixed = node.fixed.clone();
            fixed[day] = Some(value);
            order += 1;
            heap.push(Node {
                bound: sol.objective,
                order,
                fixed,
            });
        }
    }

    let incumbent = search
        .incumbent
        .ok_or_else(|| Error::Lp("search finished without an incumbent".into()))?;
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let best_bound = open_bound.min(incumbent.objective);
    let status = if limited {
        SolveStatus::IterationLimit
    } else {
        SolveStatus::Optimal
    };
    debug!(
        "branch-and-bound: {nodes} nodes, objective {:.6}, bound {:.6}",
        incumbent.objective, best_bound
    );
    finish_solution(
        problem,
        incumbent.x,
        incumbent.regular,
        status,
        best_bound,
        nodes,
        started.elapsed().as_secs_f64(),
        warnings,
    )
}
