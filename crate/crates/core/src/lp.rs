//! Dense bounded-variable simplex.
//!
//! Minimizes `c·x` subject to linear rows `a_i·x {<=, >=, =} b_i` and column
//! bounds `l_j <= x_j <= u_j` where every column has a finite lower bound or a
//! finite upper bound. Each row gets a slack `s_i = b_i - a_i·x` whose bounds
//! encode the row sense, so the initial basis is the slack identity.
//!
//! The tableau `B^-1 [A | I]` is kept explicitly. Rows can be appended to a
//! solved instance and re-optimized by the dual simplex, and rows whose slack
//! is basic can be dropped again; both keep the current basis. The basis
//! inverse is recomputed from the original data periodically and before a
//! result is reported.

use nalgebra::DMatrix;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 256;
const STALL_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }
}

/// A linear program in row form.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row::new(coeffs, sense, rhs));
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    /// Solves from scratch.
    pub fn solve(&self) -> LpSolution {
        let mut simplex = Simplex::new(self);
        simplex.solve();
        simplex.solution()
    }

    /// Objective of the Lagrangian dual at the multipliers `duals`:
    /// `b·y + Σ_j min over [l_j, u_j] of (c_j - A_j·y) x_j`. For optimal
    /// multipliers it equals the primal optimum; it is `-inf` when a reduced
    /// cost beyond the dual tolerance pushes toward an infinite bound.
    pub fn dual_objective(&self, duals: &[f64]) -> f64 {
        let mut reduced = self.cost.clone();
        let mut value = 0.0;
        for (row, &y) in self.rows.iter().zip(duals) {
            value += row.rhs * y;
            for &(j, a) in &row.coeffs {
                reduced[j] -= a * y;
            }
        }
        for (j, &r) in reduced.iter().enumerate() {
            let bound = if r > 0.0 { self.lower[j] } else { self.upper[j] };
            // Round-off in a reduced cost must not reach an infinite bound.
            if r != 0.0 && (bound.is_finite() || r.abs() > DUAL_TOL) {
                value += r * bound;
            }
        }
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `c_B B^-1`; for a minimization, binding `<=`
    /// rows carry `y <= 0` and binding `>=` rows `y >= 0`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// Simplex state over a dense tableau.
#[derive(Debug, Clone)]
pub struct Simplex {
    n: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    tab: Vec<Vec<f64>>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    d: Vec<f64>,
    status: LpStatus,
    iterations: usize,
    since_refactor: usize,
    pub max_iterations: usize,
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

impl Simplex {
    pub fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        assert_eq!(lp.lower.len(), n);
        assert_eq!(lp.upper.len(), n);
        for j in 0..n {
            assert!(
                lp.lower[j].is_finite() || lp.upper[j].is_finite(),
                "free columns are not supported"
            );
            assert!(lp.lower[j] <= lp.upper[j], "empty bound interval on column {j}");
        }
        let mut s = Self {
            n,
            a: Vec::new(),
            b: Vec::new(),
            cost: lp.cost.clone(),
            lower: lp.lower.clone(),
            upper: lp.upper.clone(),
            tab: Vec::new(),
            beta: Vec::new(),
            basis: Vec::new(),
            state: Vec::with_capacity(n),
            d: lp.cost.clone(),
            status: LpStatus::IterationLimit,
            iterations: 0,
            since_refactor: 0,
            max_iterations: 200_000,
        };
        for j in 0..n {
            let at_upper = !lp.lower[j].is_finite() || (lp.cost[j] < 0.0 && lp.upper[j].is_finite());
            s.state.push(if at_upper {
                VarState::AtUpper
            } else {
                VarState::AtLower
            });
        }
        s.append_rows(&lp.rows);
        s
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    fn cols(&self) -> usize {
        self.n + self.b.len()
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Basic(r) => self.beta[r],
        }
    }

    /// Value of column `j` (structural or slack) at the current basis.
    fn value(&self, j: usize) -> f64 {
        self.nonbasic_value(j)
    }

    /// Appends rows in terms of the current basis. Every new slack enters the
    /// basis, so dual feasibility is preserved.
    fn append_rows(&mut self, rows: &[Row]) {
        for row in rows {
            let mut dense = vec![0.0; self.n];
            for &(j, v) in &row.coeffs {
                assert!(j < self.n, "row references unknown column {j}");
                dense[j] += v;
            }
            let (lo, hi) = slack_bounds(row.sense);
            let slack_col = self.cols();
            for r in &mut self.tab {
                r.push(0.0);
            }
            self.cost.push(0.0);
            self.lower.push(lo);
            self.upper.push(hi);
            self.d.push(0.0);

            let mut tab_row = vec![0.0; slack_col + 1];
            tab_row[..self.n].copy_from_slice(&dense);
            tab_row[slack_col] = 1.0;
            for (i, &bj) in self.basis.iter().enumerate() {
                if bj < self.n {
                    let f = tab_row[bj];
                    if f != 0.0 {
                        for (t, v) in tab_row.iter_mut().zip(&self.tab[i]) {
                            *t -= f * v;
                        }
                        tab_row[bj] = 0.0;
                    }
                }
            }
            let activity: f64 = (0..self.n).map(|j| dense[j] * self.value(j)).sum();
            let new_row = self.b.len();
            self.a.push(dense);
            self.b.push(row.rhs);
            self.tab.push(tab_row);
            self.beta.push(row.rhs - activity);
            self.basis.push(slack_col);
            self.state.push(VarState::Basic(new_row));
        }
    }

    /// Appends rows and re-optimizes.
    pub fn add_rows(&mut self, rows: &[Row]) -> LpStatus {
        self.append_rows(rows);
        self.solve()
    }

    /// Changes the bounds of structural column `j`. A nonbasic column moves to
    /// the bound its reduced cost prefers, so dual feasibility is kept and
    /// the next [`Simplex::solve`] runs the dual simplex.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n, "bounds of unknown column {j}");
        assert!(lower <= upper, "empty bound interval on column {j}");
        assert!(lower.is_finite() || upper.is_finite(), "free columns are not supported");
        if self.lower[j] == lower && self.upper[j] == upper {
            return;
        }
        let old = self.value(j);
        self.lower[j] = lower;
        self.upper[j] = upper;
        if let VarState::Basic(_) = self.state[j] {
            return;
        }
        let at_upper = !lower.is_finite() || (self.d[j] < 0.0 && upper.is_finite());
        self.state[j] = if at_upper {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };
        let delta = self.value(j) - old;
        if delta != 0.0 {
            for (beta, row) in self.beta.iter_mut().zip(&self.tab) {
                *beta -= row[j] * delta;
            }
        }
        self.status = LpStatus::IterationLimit;
    }

    /// Slack `b_i - a_i·x` of original row `i`.
    pub fn row_slack(&self, i: usize) -> f64 {
        self.value(self.n + i)
    }

    /// Whether the slack of row `i` is in the basis (so the row can be dropped
    /// without disturbing the basis).
    pub fn row_is_basic(&self, i: usize) -> bool {
        matches!(self.state[self.n + i], VarState::Basic(_))
    }

    /// Drops the original rows for which `drop` is true. Rows whose slack is
    /// nonbasic are kept regardless. Returns the mapping from old row index to
    /// new row index.
    pub fn drop_rows(&mut self, drop: &[bool]) -> Vec<Option<usize>> {
        let m = self.num_rows();
        assert_eq!(drop.len(), m);
        let removed: Vec<bool> = (0..m).map(|i| drop[i] && self.row_is_basic(i)).collect();
        let mut row_map = vec![None; m];
        let mut next = 0;
        for i in 0..m {
            if !removed[i] {
                row_map[i] = Some(next);
                next += 1;
            }
        }
        if next == m {
            return row_map;
        }
        let col_map = |c: usize| -> Option<usize> {
            if c < self.n {
                Some(c)
            } else {
                row_map[c - self.n].map(|r| self.n + r)
            }
        };
        let keep_cols: Vec<usize> = (0..self.cols()).filter(|&c| col_map(c).is_some()).collect();
        let removed_tab_rows: Vec<bool> = self
            .basis
            .iter()
            .map(|&c| c >= self.n && removed[c - self.n])
            .collect();

        let mut tab = Vec::with_capacity(next);
        let mut beta = Vec::with_capacity(next);
        let mut basis = Vec::with_capacity(next);
        for (r, row) in self.tab.iter().enumerate() {
            if removed_tab_rows[r] {
                continue;
            }
            tab.push(keep_cols.iter().map(|&c| row[c]).collect::<Vec<_>>());
            beta.push(self.beta[r]);
            basis.push(col_map(self.basis[r]).expect("basic column survives"));
        }
        let pick = |v: &Vec<f64>| keep_cols.iter().map(|&c| v[c]).collect::<Vec<_>>();
        self.cost = pick(&self.cost);
        self.lower = pick(&self.lower);
        self.upper = pick(&self.upper);
        self.d = pick(&self.d);
        let mut state: Vec<VarState> = keep_cols.iter().map(|&c| self.state[c]).collect();
        for (r, &c) in basis.iter().enumerate() {
            state[c] = VarState::Basic(r);
        }
        self.state = state;
        self.a = (0..m).filter(|&i| !removed[i]).map(|i| self.a[i].clone()).collect();
        self.b = (0..m).filter(|&i| !removed[i]).map(|i| self.b[i]).collect();
        self.tab = tab;
        self.beta = beta;
        self.basis = basis;
        row_map
    }

    fn is_dual_feasible(&self) -> bool {
        (0..self.cols()).all(|j| match self.state[j] {
            VarState::Basic(_) => true,
            _ if self.lower[j] == self.upper[j] => true,
            VarState::AtLower => self.d[j] >= -DUAL_TOL,
            VarState::AtUpper => self.d[j] <= DUAL_TOL,
        })
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.beta)
            .map(|(&c, &v)| (self.lower[c] - v).max(v - self.upper[c]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest violation of `a_i·x + s_i = b_i` at the current point.
    fn residual(&self) -> f64 {
        let x = self.values();
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(i, (row, b))| {
                let act: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
                (act + self.value(self.n + i) - b).abs()
            })
            .fold(0.0, f64::max)
    }

    fn recompute_reduced_costs(&mut self) {
        let cols = self.cols();
        let mut d = self.cost.clone();
        for (i, &c) in self.basis.iter().enumerate() {
            let cb = self.cost[c];
            if cb != 0.0 {
                for (dj, t) in d.iter_mut().zip(&self.tab[i]) {
                    *dj -= cb * t;
                }
            }
        }
        for &c in &self.basis {
            d[c] = 0.0;
        }
        debug_assert_eq!(d.len(), cols);
        self.d = d;
    }

    /// Recomputes `B^-1 [A | I]`, the basic values and reduced costs from the
    /// original data. Returns false if the basis matrix is singular.
    ///
    /// With `S` the basic structural columns and `K` the rows whose slack is
    /// nonbasic, `B` is invertible iff the square block `A[K, S]` is, and only
    /// that block is inverted: structural rows of the tableau are
    /// `A[K, S]^-1 [A | I][K]`, and the row of a basic slack `i` is
    /// `[A | I][i] - A[i, S]` times those.
    fn refactor(&mut self) -> bool {
        self.since_refactor = 0;
        let m = self.num_rows();
        let n = self.n;
        let structural: Vec<(usize, usize)> = self
            .basis
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c < n)
            .map(|(r, &c)| (r, c))
            .collect();
        let tight: Vec<usize> = (0..m)
            .filter(|&i| !matches!(self.state[n + i], VarState::Basic(_)))
            .collect();
        let k = structural.len();
        if tight.len() != k {
            return false;
        }
        let block = DMatrix::from_fn(k, k, |a, b| self.a[tight[a]][structural[b].1]);
        let Some(inv) = block.try_inverse() else {
            return false;
        };

        let mut rhs = self.b.clone();
        for j in 0..self.cols() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v == 0.0 {
                continue;
            }
            if j < n {
                for (r, row) in rhs.iter_mut().zip(&self.a) {
                    *r -= row[j] * v;
                }
            } else {
                rhs[j - n] -= v;
            }
        }

        let cols = self.cols();
        let mut structural_rows: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut structural_values = Vec::with_capacity(k);
        for b in 0..k {
            let mut row = vec![0.0; cols];
            let mut value = 0.0;
            for (a, &i) in tight.iter().enumerate() {
                let f = inv[(b, a)];
                if f == 0.0 {
                    continue;
                }
                for (t, v) in row[..n].iter_mut().zip(&self.a[i]) {
                    *t += f * v;
                }
                row[n + i] = f;
                value += f * rhs[i];
            }
            structural_rows.push(row);
            structural_values.push(value);
        }

        let mut slot = vec![usize::MAX; self.basis.len()];
        for (b, &(r, _)) in structural.iter().enumerate() {
            slot[r] = b;
        }
        for r in 0..self.basis.len() {
            let c = self.basis[r];
            if c < n {
                let b = slot[r];
                self.tab[r].copy_from_slice(&structural_rows[b]);
                self.beta[r] = structural_values[b];
            } else {
                let i = c - n;
                let row = &mut self.tab[r];
                row.iter_mut().for_each(|v| *v = 0.0);
                row[..n].copy_from_slice(&self.a[i]);
                row[c] = 1.0;
                let mut value = rhs[i];
                for (b, &(_, sc)) in structural.iter().enumerate() {
                    let f = self.a[i][sc];
                    if f == 0.0 {
                        continue;
                    }
                    let srow = &structural_rows[b];
                    for (t, v) in row[..n].iter_mut().zip(&srow[..n]) {
                        *t -= f * v;
                    }
                    for &ti in &tight {
                        row[n + ti] -= f * srow[n + ti];
                    }
                    value -= f * structural_values[b];
                }
                self.beta[r] = value;
            }
            for (k2, &bc) in self.basis.iter().enumerate() {
                self.tab[r][bc] = if k2 == r { 1.0 } else { 0.0 };
            }
        }
        self.recompute_reduced_costs();
        true
    }

    /// Pivots column `q` into the basis at tableau row `r`; the leaving
    /// variable is placed at `leave_upper ? upper : lower`.
    fn pivot(&mut self, r: usize, q: usize, leave_upper: bool) {
        let leaving = self.basis[r];
        let target = if leave_upper {
            self.upper[leaving]
        } else {
            self.lower[leaving]
        };
        let alpha = self.tab[r][q];
        let delta = (self.beta[r] - target) / alpha;
        let entering_old = self.nonbasic_value(q);
        for i in 0..self.beta.len() {
            if i != r {
                self.beta[i] -= self.tab[i][q] * delta;
            }
        }
        self.beta[r] = entering_old + delta;

        let ratio = self.d[q] / alpha;
        if ratio != 0.0 {
            let pivot_row = &self.tab[r];
            for (dj, t) in self.d.iter_mut().zip(pivot_row) {
                *dj -= ratio * t;
            }
        }
        self.d[q] = 0.0;

        let inv = 1.0 / alpha;
        self.tab[r].iter_mut().for_each(|v| *v *= inv);
        self.tab[r][q] = 1.0;
        let pivot_row = std::mem::take(&mut self.tab[r]);
        for (i, row) in self.tab.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        }
        self.tab[r] = pivot_row;

        self.state[leaving] = if leave_upper {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };
        self.basis[r] = q;
        self.state[q] = VarState::Basic(r);
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    /// Dual simplex from a dual feasible basis.
    fn dual_simplex(&mut self) -> LpStatus {
        let mut stall = 0usize;
        let mut last_obj = f64::NEG_INFINITY;
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            let bland = stall > STALL_LIMIT;
            let mut leave: Option<(usize, bool)> = None;
            let mut worst = PRIMAL_TOL;
            for (i, (&c, &v)) in self.basis.iter().zip(&self.beta).enumerate() {
                let below = self.lower[c] - v;
                let above = v - self.upper[c];
                let (inf, to_upper) = if below > above {
                    (below, false)
                } else {
                    (above, true)
                };
                if inf > worst {
                    let better = match leave {
                        None => true,
                        Some((r, _)) => !bland || c < self.basis[r],
                    };
                    if better {
                        leave = Some((i, to_upper));
                        if !bland {
                            worst = inf;
                        }
                    }
                }
            }
            let Some((r, to_upper)) = leave else {
                return LpStatus::Optimal;
            };
            // Basic value must move up when it left through its lower bound.
            let increase = !to_upper;
            let row = &self.tab[r];
            let eligible = |j: usize| -> Option<f64> {
                if self.lower[j] == self.upper[j] {
                    return None;
                }
                let alpha = row[j];
                match self.state[j] {
                    VarState::Basic(_) => None,
                    VarState::AtLower => {
                        let ok = if increase { alpha < -PIVOT_TOL } else { alpha > PIVOT_TOL };
                        ok.then(|| self.d[j].max(0.0))
                    }
                    VarState::AtUpper => {
                        let ok = if increase { alpha > PIVOT_TOL } else { alpha < -PIVOT_TOL };
                        ok.then(|| (-self.d[j]).max(0.0))
                    }
                }
            };
            // Harris two-pass ratio test.
            let mut bound = f64::INFINITY;
            for j in 0..self.cols() {
                if let Some(dj) = eligible(j) {
                    bound = bound.min((dj + DUAL_TOL) / row[j].abs());
                }
            }
            if bound == f64::INFINITY {
                return LpStatus::Infeasible;
            }
            let mut entering: Option<usize> = None;
            let mut best_alpha = 0.0;
            for j in 0..self.cols() {
                if let Some(dj) = eligible(j) {
                    let a = row[j].abs();
                    if dj / a <= bound {
                        let better = if bland { entering.is_none() } else { a > best_alpha };
                        if better {
                            best_alpha = a;
                            entering = Some(j);
                        }
                    }
                }
            }
            let q = entering.expect("harris pass found a candidate");
            self.pivot(r, q, to_upper);
            let obj = self.objective();
            if obj > last_obj + 1e-12 {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
        }
    }

    /// Primal simplex from a primal feasible basis.
    fn primal_simplex(&mut self) -> LpStatus {
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            let bland = stall > STALL_LIMIT;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = DUAL_TOL;
            for j in 0..self.cols() {
                if self.lower[j] == self.upper[j] {
                    continue;
                }
                let (score, dir) = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLower => (-self.d[j], 1.0),
                    VarState::AtUpper => (self.d[j], -1.0),
                };
                if score > best {
                    entering = Some((j, dir));
                    if bland {
                        break;
                    }
                    best = score;
                }
            }
            let Some((q, dir)) = entering else {
                return LpStatus::Optimal;
            };

            let step_of = |i: usize, relax: f64| -> Option<f64> {
                let g = self.tab[i][q] * dir;
                let c = self.basis[i];
                if g > PIVOT_TOL && self.lower[c].is_finite() {
                    Some(((self.beta[i] - self.lower[c] + relax) / g).max(0.0))
                } else if g < -PIVOT_TOL && self.upper[c].is_finite() {
                    Some(((self.upper[c] - self.beta[i] + relax) / -g).max(0.0))
                } else {
                    None
                }
            };
            let mut bound = f64::INFINITY;
            for i in 0..self.beta.len() {
                if let Some(s) = step_of(i, PRIMAL_TOL) {
                    bound = bound.min(s);
                }
            }
            let flip = self.upper[q] - self.lower[q];
            if bound == f64::INFINITY && flip == f64::INFINITY {
                return LpStatus::Unbounded;
            }
            if flip <= bound {
                for i in 0..self.beta.len() {
                    self.beta[i] -= self.tab[i][q] * dir * flip;
                }
                self.state[q] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
            } else {
                let mut row: Option<usize> = None;
                let mut best_g = 0.0;
                for i in 0..self.beta.len() {
                    if let Some(s) = step_of(i, 0.0) {
                        let g = self.tab[i][q].abs();
                        let better = if bland {
                            row.is_none_or(|r| self.basis[i] < self.basis[r])
                        } else {
                            g > best_g
                        };
                        if s <= bound && better {
                            best_g = g;
                            row = Some(i);
                        }
                    }
                }
                let r = row.expect("harris pass found a row");
                let g = self.tab[r][q] * dir;
                // g > 0 means the basic variable decreased onto its lower bound.
                self.pivot(r, q, g < 0.0);
            }
            let obj = self.objective();
            if obj < last_obj - 1e-12 {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
        }
    }

    /// Optimizes from the current basis, choosing the algorithm by which kind
    /// of feasibility the basis already has.
    pub fn solve(&mut self) -> LpStatus {
        let mut status = self.solve_once();
        // Verify against freshly factored data; drift is repaired by another
        // pass from the refactored basis.
        for _ in 0..3 {
            if status != LpStatus::Optimal {
                break;
            }
            if self.since_refactor <= REFACTOR_EVERY / 2 && self.residual() <= PRIMAL_TOL {
                break;
            }
            if !self.refactor() {
                status = LpStatus::IterationLimit;
                break;
            }
            if self.max_primal_infeasibility() <= PRIMAL_TOL && self.is_dual_feasible() {
                break;
            }
            status = self.solve_once();
        }
        self.status = status;
        status
    }

    fn solve_once(&mut self) -> LpStatus {
        if self.is_dual_feasible() {
            return self.dual_simplex();
        }
        if self.max_primal_infeasibility() > PRIMAL_TOL {
            // Phase one: dual simplex on the zero objective finds a feasible
            // basis or proves there is none.
            self.d = vec![0.0; self.cols()];
            let status = self.dual_simplex();
            if status != LpStatus::Optimal {
                return status;
            }
            self.recompute_reduced_costs();
        }
        self.primal_simplex()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn status(&self) -> LpStatus {
        self.status
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.value(j)).sum()
    }

    /// Structural column values.
    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.value(j)).collect()
    }

    pub fn duals(&self) -> Vec<f64> {
        (0..self.num_rows()).map(|i| -self.d[self.n + i]).collect()
    }

    pub fn solution(&self) -> LpSolution {
        LpSolution {
            status: self.status,
            x: self.values(),
            objective: self.objective(),
            duals: self.duals(),
            iterations: self.iterations,
        }
    }
}
