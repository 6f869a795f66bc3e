//! Self-contained linear-programming core.
//!
//! A bounded-variable revised simplex over dense arithmetic: every pricing
//! and testing operation in the crate reduces to [`LinearProgram::solve`].
//! Deliberately dependency-free so that identical inputs always produce
//! identical bases, solutions, and duals.
//!
//! Tolerances: primal feasibility 1e-9, reduced-cost (dual) 1e-9, minimal
//! pivot magnitude 1e-10. Dantzig pricing with Bland's rule engaged after a
//! degeneracy streak keeps the solver fast and cycle-free.

use crate::error::EngineError;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance (dual feasibility).
const DJ_TOL: f64 = 1e-9;
/// Minimal acceptable pivot magnitude.
const PIVOT_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots before Bland's rule engages.
const DEGEN_STREAK: usize = 50;
/// Pivot cap across both phases.
const MAX_PIVOTS: usize = 1_000_000;
/// Basis-inverse refactorization interval.
const REFACTOR_EVERY: usize = 256;

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A linear program `min c·x` subject to equality rows, `A·x <= b` rows and
/// per-variable bounds (infinite bounds allowed).
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eq_rows: Vec<Vec<(usize, f64)>>,
    eq_rhs: Vec<f64>,
    le_rows: Vec<Vec<(usize, f64)>>,
    le_rhs: Vec<f64>,
}

/// Solution of a [`LinearProgram`].
///
/// `primal`, `objective`, `eq_duals`, `le_duals` and `basis` are meaningful
/// only when `status == Optimal`. For infeasible programs `eq_duals` /
/// `le_duals` carry the phase-one duals, a Farkas-type certificate.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// Dual value per equality row.
    pub eq_duals: Vec<f64>,
    /// Dual value per `<=` row (non-positive at optimality of a minimization).
    pub le_duals: Vec<f64>,
    /// Basic column indices, one per row, in the solver's internal column
    /// order (structural variables first, then slacks).
    pub basis: Vec<usize>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with objective coefficient `obj` and bounds
    /// `[lower, upper]`; returns its index.
    pub fn add_var(&mut self, obj: f64, lower: f64, upper: f64) -> usize {
        self.obj.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.obj.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    /// Adds an equality row `sum coeff * x = rhs`.
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.eq_rows.push(terms);
        self.eq_rhs.push(rhs);
    }

    /// Adds an inequality row `sum coeff * x <= rhs`.
    pub fn add_le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.le_rows.push(terms);
        self.le_rhs.push(rhs);
    }

    /// Adds an inequality row `sum coeff * x >= rhs` (stored negated).
    pub fn add_ge(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        let negated = terms.into_iter().map(|(j, c)| (j, -c)).collect();
        self.le_rows.push(negated);
        self.le_rhs.push(-rhs);
    }

    fn validate(&self) -> Result<(), EngineError> {
        let n = self.obj.len();
        let check_terms = |rows: &[Vec<(usize, f64)>], rhs: &[f64]| -> Result<(), EngineError> {
            for (row, r) in rows.iter().zip(rhs) {
                if r.is_nan() {
                    return Err(EngineError::structural("NaN right-hand side"));
                }
                for &(j, c) in row {
                    if j >= n {
                        return Err(EngineError::structural(format!(
                            "row references variable {} but only {} exist",
                            j, n
                        )));
                    }
                    if c.is_nan() {
                        return Err(EngineError::structural("NaN row coefficient"));
                    }
                }
            }
            Ok(())
        };
        check_terms(&self.eq_rows, &self.eq_rhs)?;
        check_terms(&self.le_rows, &self.le_rhs)?;
        for j in 0..n {
            if self.obj[j].is_nan() {
                return Err(EngineError::structural("NaN objective coefficient"));
            }
            if self.lower[j] > self.upper[j] + FEAS_TOL {
                return Err(EngineError::structural(format!(
                    "variable {}: lower bound {} exceeds upper bound {}",
                    j, self.lower[j], self.upper[j]
                )));
            }
        }
        Ok(())
    }

    /// Solves the program with the revised simplex method.
    ///
    /// `Err` is reserved for structural problems, the pivot cap, and
    /// numerical breakdown; infeasibility and unboundedness are reported
    /// through [`LpSolution::status`].
    pub fn solve(&self) -> Result<LpSolution, EngineError> {
        self.validate()?;
        Simplex::new(self).run()
    }
}

// Nonbasic rest state of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rest {
    Lower,
    Upper,
    Free,
    Basic,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    n_struct: usize,
    n_art: usize,
    m: usize,
    // columns in solver order: structural, slacks, artificials
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    state: Vec<Rest>,
    // value of each nonbasic column (its bound, or 0 for free)
    nb_value: Vec<f64>,
    basis: Vec<usize>,
    in_row: Vec<usize>,
    x_basic: Vec<f64>,
    binv: Vec<f64>, // row-major m x m
    pivots: usize,
    degen_streak: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let n_struct = lp.obj.len();
        let m_eq = lp.eq_rows.len();
        let m_le = lp.le_rows.len();
        let m = m_eq + m_le;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        for (i, row) in lp.eq_rows.iter().enumerate() {
            for &(j, c) in row {
                if c != 0.0 {
                    cols[j].push((i, c));
                }
            }
        }
        for (i, row) in lp.le_rows.iter().enumerate() {
            for &(j, c) in row {
                if c != 0.0 {
                    cols[j].push((m_eq + i, c));
                }
            }
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut cost = vec![0.0; n_struct];
        // slacks for <= rows
        for i in 0..m_le {
            cols.push(vec![(m_eq + i, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            cost.push(0.0);
        }
        let mut rhs = lp.eq_rhs.clone();
        rhs.extend_from_slice(&lp.le_rhs);
        Simplex {
            lp,
            n_struct,

            n_art: 0,
            m,
            cols,
            lower,
            upper,
            cost,
            rhs,
            state: Vec::new(),
            nb_value: Vec::new(),
            basis: Vec::new(),
            in_row: Vec::new(),
            x_basic: Vec::new(),
            binv: Vec::new(),
            pivots: 0,
            degen_streak: 0,
        }
    }

    fn n_cols(&self) -> usize {
        self.cols.len()
    }

    fn rest_value(&self, j: usize) -> f64 {
        match self.state[j] {
            Rest::Lower => self.lower[j],
            Rest::Upper => self.upper[j],
            Rest::Free => 0.0,
            Rest::Basic => self.x_basic[self.in_row[j]],
        }
    }

    fn run(mut self) -> Result<LpSolution, EngineError> {
        let m_eq = self.lp.eq_rows.len();
        // Rest every structural/slack column at a finite bound (lower
        // preferred), free columns at zero.
        let n0 = self.n_cols();
        self.state = Vec::with_capacity(n0);
        self.nb_value = Vec::with_capacity(n0);
        for j in 0..n0 {
            let (s, v) = if self.lower[j].is_finite() {
                (Rest::Lower, self.lower[j])
            } else if self.upper[j].is_finite() {
                (Rest::Upper, self.upper[j])
            } else {
                (Rest::Free, 0.0)
            };
            self.state.push(s);
            self.nb_value.push(v);
        }
        // Residual of each row at the rest point.
        let mut resid = self.rhs.clone();
        for j in 0..n0 {
            let v = self.nb_value[j];
            if v != 0.0 {
                for &(i, c) in &self.cols[j] {
                    resid[i] -= c * v;
                }
            }
        }
        // Crash basis: a slack absorbs a nonnegative residual of its <= row;
        // everything else gets an artificial.
        self.basis = vec![usize::MAX; self.m];
        self.x_basic = vec![0.0; self.m];
        let mut art_cost: Vec<f64> = Vec::new();
        for i in 0..self.m {
            let slack_col = if i >= m_eq {
                Some(self.n_struct + (i - m_eq))
            } else {
                None
            };
            if let Some(sj) = slack_col {
                if resid[i] >= -FEAS_TOL && self.state[sj] == Rest::Lower && self.lower[sj] == 0.0 {
                    self.basis[i] = sj;
                    self.x_basic[i] = resid[i].max(0.0);
                    continue;
                }
            }
            let sign = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
            let aj = self.n_cols();
            self.cols.push(vec![(i, sign)]);
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.cost.push(0.0);
            self.state.push(Rest::Basic);
            self.nb_value.push(0.0);
            art_cost.push(1.0);
            self.n_art += 1;
            self.basis[i] = aj;
            self.x_basic[i] = resid[i].abs();
        }
        self.in_row = vec![usize::MAX; self.n_cols()];
        for i in 0..self.m {
            self.state[self.basis[i]] = Rest::Basic;
            self.in_row[self.basis[i]] = i;
        }
        // Initial basis is (signed) unit columns, so the inverse is diagonal.
        self.binv = vec![0.0; self.m * self.m];
        for i in 0..self.m {
            let j = self.basis[i];
            let sign = self.cols[j][0].1;
            self.binv[i * self.m + i] = 1.0 / sign;
        }

        // Phase 1: minimize the sum of artificials.
        if self.n_art > 0 {
            let mut phase1_cost = vec![0.0; self.n_cols()];
            let art_start = self.n_cols() - self.n_art;
            for (k, c) in art_cost.iter().enumerate() {
                phase1_cost[art_start + k] = *c;
            }
            let status = self.iterate(&phase1_cost, true)?;
            debug_assert_eq!(status, LpStatus::Optimal);
            let infeas: f64 = (0..self.m)
                .map(|i| {
                    let j = self.basis[i];
                    if j >= art_start {
                        self.x_basic[i]
                    } else {
                        0.0
                    }
                })
                .sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if infeas > FEAS_TOL * scale {
                let y = self.duals(&phase1_cost);
                return Ok(self.report(LpStatus::Infeasible, &y));
            }
            // Pin artificials at zero and try to drive basic ones out.
            for k in 0..self.n_art {
                let j = art_start + k;
                self.upper[j] = 0.0;
                if self.state[j] != Rest::Basic {
                    self.state[j] = Rest::Lower;
                    self.nb_value[j] = 0.0;
                }
            }
            self.drive_out_artificials(art_start)?;
        }

        // Phase 2: the real objective.
        let mut cost = self.cost.clone();
        cost[..self.n_struct].copy_from_slice(&self.lp.obj);
        let status = self.iterate(&cost, false)?;
        self.refactorize()?;
        self.recompute_basics();
        let y = self.duals(&cost);
        Ok(self.report(status, &y))
    }

    /// After phase 1, pivot basic artificials out on any acceptable pivot;
    /// rows admitting none are redundant and keep a pinned artificial.
    fn drive_out_artificials(&mut self, art_start: usize) -> Result<(), EngineError> {
        for i in 0..self.m {
            if self.basis[i] < art_start {
                continue;
            }
            let mut entering = None;
            for j in 0..art_start {
                if self.state[j] == Rest::Basic {
                    continue;
                }
                let w_i = {
                    let mut v = 0.0;
                    for &(r, c) in &self.cols[j] {
                        v += self.binv[i * self.m + r] * c;
                    }
                    v
                };
                if w_i.abs() > 1e-8 {
                    entering = Some(j);
                    break;
                }
            }
            if let Some(j) = entering {
                let w = self.ftran(j);
                self.pivot(j, i, &w, self.nb_value[j]);
            }
        }
        Ok(())
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for &(i, c) in &self.cols[j] {
            let col = i;
            for r in 0..self.m {
                w[r] += self.binv[r * self.m + col] * c;
            }
        }
        w
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r * self.m..(r + 1) * self.m];
                for i in 0..self.m {
                    y[i] += cb * row[i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: &[f64]) -> f64 {
        let mut d = cost[j];
        for &(i, c) in &self.cols[j] {
            d -= y[i] * c;
        }
        d
    }

    fn iterate(&mut self, cost: &[f64], phase1: bool) -> Result<LpStatus, EngineError> {
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(EngineError::resource(format!(
                    "simplex pivot cap of {} reached",
                    MAX_PIVOTS
                )));
            }
            if self.pivots > 0 && self.pivots % REFACTOR_EVERY == 0 {
                self.refactorize()?;
                self.recompute_basics();
            }
            let y = self.duals(cost);
            let bland = self.degen_streak >= DEGEN_STREAK;
            let mut entering: Option<(usize, f64, f64)> = None; // (col, |d|, dir)
            for j in 0..self.n_cols() {
                if self.state[j] == Rest::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y, cost);
                let dir = match self.state[j] {
                    Rest::Lower if d < -DJ_TOL => 1.0,
                    Rest::Upper if d > DJ_TOL => -1.0,
                    Rest::Free if d < -DJ_TOL => 1.0,
                    Rest::Free if d > DJ_TOL => -1.0,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, d.abs(), dir));
                    break;
                }
                match entering {
                    Some((_, best, _)) if d.abs() <= best => {}
                    _ => entering = Some((j, d.abs(), dir)),
                }
            }
            let Some((j, _, dir)) = entering else {
                return Ok(LpStatus::Optimal);
            };

            let w = self.ftran(j);
            // Ratio test over basic bounds plus the entering column's own range.
            let mut theta = self.upper[j] - self.lower[j]; // may be inf
            let mut leave: Option<(usize, bool)> = None; // (row, hits_upper); None => bound flip
            let mut leave_pivot = 0.0;
            for r in 0..self.m {
                let delta = dir * w[r];
                let jb = self.basis[r];
                let (limit, hits_upper) = if delta > PIVOT_TOL {
                    (
                        if self.lower[jb].is_finite() {
                            (self.x_basic[r] - self.lower[jb]) / delta
                        } else {
                            f64::INFINITY
                        },
                        false,
                    )
                } else if delta < -PIVOT_TOL {
                    (
                        if self.upper[jb].is_finite() {
                            (self.upper[jb] - self.x_basic[r]) / (-delta)
                        } else {
                            f64::INFINITY
                        },
                        true,
                    )
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                if limit < theta - 1e-12 {
                    theta = limit;
                    leave = Some((r, hits_upper));
                    leave_pivot = w[r].abs();
                } else if limit < theta + 1e-12 {
                    // tie: prefer the larger pivot for stability, then the
                    // smaller basis index for determinism (and Bland safety)
                    if let Some((r0, _)) = leave {
                        let better = if bland {
                            self.basis[r] < self.basis[r0]
                        } else {
                            w[r].abs() > leave_pivot + 1e-12
                                || (w[r].abs() > leave_pivot - 1e-12
                                    && self.basis[r] < self.basis[r0])
                        };
                        if better {
                            theta = theta.min(limit);
                            leave = Some((r, hits_upper));
                            leave_pivot = w[r].abs();
                        }
                    } else if limit < theta {
                        theta = limit;
                        leave = Some((r, hits_upper));
                        leave_pivot = w[r].abs();
                    }
                }
            }
            if theta.is_infinite() {
                if phase1 {
                    return Err(EngineError::solver(
                        "phase-1 objective unbounded; numerical breakdown",
                    ));
                }
                return Ok(LpStatus::Unbounded);
            }
            if theta.abs() <= 1e-11 {
                self.degen_streak += 1;
            } else {
                self.degen_streak = 0;
            }
            let start = self.rest_value(j);
            match leave {
                None => {
                    // Bound flip: the entering column runs to its other bound.
                    for r in 0..self.m {
                        self.x_basic[r] -= theta * dir * w[r];
                    }
                    self.state[j] = if dir > 0.0 { Rest::Upper } else { Rest::Lower };
                    self.nb_value[j] = if dir > 0.0 {
                        self.upper[j]
                    } else {
                        self.lower[j]
                    };
                    self.pivots += 1;
                }
                Some((r, hits_upper)) => {
                    for rr in 0..self.m {
                        if rr != r {
                            self.x_basic[rr] -= theta * dir * w[rr];
                        }
                    }
                    self.pivot_to(j, r, &w, start + dir * theta, hits_upper);
                }
            }
        }
    }

    /// Replaces the basic variable of `row` with column `j` (entering at
    /// value `new_value`); the leaving variable rests at the bound it hit.
    fn pivot(&mut self, j: usize, row: usize, w: &[f64], new_value: f64) {
        let hits_upper = !self.lower[self.basis[row]].is_finite();
        self.pivot_to(j, row, w, new_value, hits_upper);
    }

    fn pivot_to(&mut self, j: usize, row: usize, w: &[f64], new_value: f64, hits_upper: bool) {
        let old = self.basis[row];
        self.state[old] = if hits_upper && self.upper[old].is_finite() {
            self.nb_value[old] = self.upper[old];
            Rest::Upper
        } else if !hits_upper && self.lower[old].is_finite() {
            self.nb_value[old] = self.lower[old];
            Rest::Lower
        } else {
            self.nb_value[old] = 0.0;
            Rest::Free
        };
        self.in_row[old] = usize::MAX;

        self.basis[row] = j;
        self.state[j] = Rest::Basic;
        self.in_row[j] = row;
        self.x_basic[row] = new_value;

        let pivot = w[row];
        let m = self.m;
        // binv[row] /= pivot, then eliminate w from the other rows.
        for col in 0..m {
            self.binv[row * m + col] /= pivot;
        }
        for r in 0..m {
            if r == row {
                continue;
            }
            let f = w[r];
            if f.abs() > 1e-14 {
                for col in 0..m {
                    self.binv[r * m + col] -= f * self.binv[row * m + col];
                }
            }
        }
        self.pivots += 1;
    }

    /// Rebuilds the basis inverse from scratch (Gauss-Jordan with partial
    /// pivoting) to shed accumulated drift.
    fn refactorize(&mut self) -> Result<(), EngineError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, c) in &self.cols[j] {
                a[i * m + r] = c;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut best = col;
            let mut best_abs = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best_abs {
                    best_abs = v;
                    best = r;
                }
            }
            if best_abs < 1e-12 {
                return Err(EngineError::solver("singular basis during refactorization"));
            }
            if best != col {
                for k in 0..m {
                    a.swap(col * m + k, best * m + k);
                    inv.swap(col * m + k, best * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        Ok(())
    }

    /// Recomputes basic values as `B^-1 (b - A_N x_N)`.
    fn recompute_basics(&mut self) {
        let mut resid = self.rhs.clone();
        for j in 0..self.n_cols() {
            if self.state[j] != Rest::Basic {
                let v = self.nb_value[j];
                if v != 0.0 {
                    for &(i, c) in &self.cols[j] {
                        resid[i] -= c * v;
                    }
                }
            }
        }
        let m = self.m;
        for r in 0..m {
            let mut v = 0.0;
            for i in 0..m {
                v += self.binv[r * m + i] * resid[i];
            }
            self.x_basic[r] = v;
        }
    }

    fn report(&self, status: LpStatus, y: &[f64]) -> LpSolution {
        let m_eq = self.lp.eq_rows.len();
        let mut primal = vec![0.0; self.n_struct];
        if status == LpStatus::Optimal {
            for j in 0..self.n_struct {
                primal[j] = self.rest_value(j);
            }
        }
        let objective = if status == LpStatus::Optimal {
            primal
                .iter()
                .zip(&self.lp.obj)
                .map(|(x, c)| x * c)
                .sum::<f64>()
        } else {
            f64::NAN
        };
        LpSolution {
            status,
            primal,
            objective,
            eq_duals: y[..m_eq].to_vec(),
            le_duals: y[m_eq..].to_vec(),
            basis: self.basis.clone(),
        }
    }
}

/// A bounded polytope in H-representation, the input of [`vertex_enumerate`].
#[derive(Debug, Clone)]
pub struct Polytope {
    pub dim: usize,
    pub eq_rows: Vec<(Vec<f64>, f64)>,
    pub le_rows: Vec<(Vec<f64>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Enumerates every vertex (basic feasible solution) of a small polytope by
/// brute force over active-set choices. Oracle support only: dimension is
/// capped at 12 and constraint rows at 24.
pub fn vertex_enumerate(p: &Polytope) -> Result<Vec<Vec<f64>>, EngineError> {
    const MAX_DIM: usize = 12;
    const MAX_ROWS: usize = 24;
    const MAX_WORK: u128 = 20_000_000;
    let d = p.dim;
    if d == 0 {
        return Err(EngineError::structural("zero-dimensional polytope"));
    }
    if d > MAX_DIM {
        return Err(EngineError::resource(format!(
            "vertex enumeration capped at dimension {MAX_DIM}, got {d}"
        )));
    }
    if p.eq_rows.len() + p.le_rows.len() > MAX_ROWS {
        return Err(EngineError::resource(format!(
            "vertex enumeration capped at {MAX_ROWS} rows, got {}",
            p.eq_rows.len() + p.le_rows.len()
        )));
    }
    if p.lower.len() != d || p.upper.len() != d {
        return Err(EngineError::structural("bound vectors do not match dimension"));
    }
    // Candidate active constraints: inequality rows plus finite bounds.
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, rhs) in &p.le_rows {
        candidates.push((row.clone(), *rhs));
    }
    for j in 0..d {
        if p.lower[j].is_finite() {
            let mut row = vec![0.0; d];
            row[j] = 1.0;
            candidates.push((row, p.lower[j]));
        }
        if p.upper[j].is_finite() {
            let mut row = vec![0.0; d];
            row[j] = 1.0;
            candidates.push((row, p.upper[j]));
        }
    }
    let m_eq = p.eq_rows.len();
    if m_eq > d {
        return Err(EngineError::structural(
            "more equality rows than dimensions; eliminate redundancy first",
        ));
    }
    let k = d - m_eq;
    if binomial(candidates.len(), k) > MAX_WORK {
        return Err(EngineError::resource(
            "vertex enumeration work cap exceeded; shrink the instance",
        ));
    }

    let feasible = |x: &[f64]| -> bool {
        for (row, rhs) in &p.le_rows {
            let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            if v > rhs + 1e-9 {
                return false;
            }
        }
        for j in 0..d {
            if x[j] < p.lower[j] - 1e-9 || x[j] > p.upper[j] + 1e-9 {
                return false;
            }
        }
        for (row, rhs) in &p.eq_rows {
            let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            if (v - rhs).abs() > 1e-9 {
                return false;
            }
        }
        true
    };

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut push_vertex = |x: Vec<f64>| {
        let dup = vertices.iter().any(|v| {
            v.iter()
                .zip(&x)
                .all(|(a, b)| (a - b).abs() <= 1e-9)
        });
        if !dup {
            vertices.push(x);
        }
    };

    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        // Assemble the square active system: equality rows + chosen actives.
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for (r, (row, rhs)) in p.eq_rows.iter().enumerate() {
            a[r * d..(r + 1) * d].copy_from_slice(row);
            b[r] = *rhs;
        }
        for (t, &ci) in combo.iter().enumerate() {
            let r = m_eq + t;
            a[r * d..(r + 1) * d].copy_from_slice(&candidates[ci].0);
            b[r] = candidates[ci].1;
        }
        if let Some(x) = solve_square(&mut a, &mut b, d) {
            if feasible(&x) {
                push_vertex(x);
            }
        }
        if k == 0 || !next_combination(&mut combo, candidates.len()) {
            break;
        }
    }
    Ok(vertices)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    acc
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - i) {
            combo[i] += 1;
            for t in i + 1..k {
                combo[t] = combo[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(a: &mut [f64], b: &mut [f64], d: usize) -> Option<Vec<f64>> {
    for col in 0..d {
        let mut best = col;
        let mut best_abs = a[col * d + col].abs();
        for r in col + 1..d {
            let v = a[r * d + col].abs();
            if v > best_abs {
                best_abs = v;
                best = r;
            }
        }
        if best_abs < 1e-11 {
            return None;
        }
        if best != col {
            for k in 0..d {
                a.swap(col * d + k, best * d + k);
            }
            b.swap(col, best);
        }
        let pivot = a[col * d + col];
        for r in col + 1..d {
            let f = a[r * d + col] / pivot;
            if f != 0.0 {
                for k in col..d {
                    a[r * d + k] -= f * a[col * d + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; d];
    for col in (0..d).rev() {
        let mut v = b[col];
        for k in col + 1..d {
            v -= a[col * d + k] * x[k];
        }
        x[col] = v / a[col * d + col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_with_lower_bound() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_ge(vec![(x, 1.0)], 3.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[x] - 3.0).abs() < 1e-9);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_direction() {
        let mut lp = LinearProgram::new();
        let _x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_box() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_le(vec![(x, 1.0)], -1.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_duals() {
        // min x + 2y s.t. x + y = 1, x,y >= 0  => x=1, y=0, dual of the row = 1
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(2.0, 0.0, f64::INFINITY);
        lp.add_eq(vec![(x, 1.0), (y, 1.0)], 1.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[x] - 1.0).abs() < 1e-9);
        assert!(sol.primal[y].abs() < 1e-9);
        assert!((sol.eq_duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bounded_variable_flip() {
        // max x + y on the unit square via minimize -(x+y)
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, 1.0);
        let y = lp.add_var(-1.0, 0.0, 1.0);
        lp.add_le(vec![(x, 1.0), (y, 1.0)], 10.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[x] - 1.0).abs() < 1e-9);
        assert!((sol.primal[y] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simplex_vertices() {
        let p = Polytope {
            dim: 3,
            eq_rows: vec![(vec![1.0, 1.0, 1.0], 1.0)],
            le_rows: vec![],
            lower: vec![0.0; 3],
            upper: vec![f64::INFINITY; 3],
        };
        let vs = vertex_enumerate(&p).unwrap();
        assert_eq!(vs.len(), 3);
        for v in &vs {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(v.iter().filter(|&&c| c > 0.5).count() == 1);
        }
    }

    #[test]
    fn unit_square_vertices() {
        let p = Polytope {
            dim: 2,
            eq_rows: vec![],
            le_rows: vec![],
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
        };
        let vs = vertex_enumerate(&p).unwrap();
        assert_eq!(vs.len(), 4);
    }

    #[test]
    fn truncated_simplex_vertices() {
        // simplex in 3 vars cut by x0 <= 0.4: four vertices
        let p = Polytope {
            dim: 3,
            eq_rows: vec![(vec![1.0, 1.0, 1.0], 1.0)],
            le_rows: vec![(vec![1.0, 0.0, 0.0], 0.4)],
            lower: vec![0.0; 3],
            upper: vec![f64::INFINITY; 3],
        };
        let vs = vertex_enumerate(&p).unwrap();
        assert_eq!(vs.len(), 4);
    }

    #[test]
    fn deterministic_resolve() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(1.0, 0.0, 2.0);
        let b = lp.add_var(-0.5, 0.0, 2.0);
        let c = lp.add_var(0.25, -1.0, 1.0);
        lp.add_le(vec![(a, 1.0), (b, 2.0), (c, -1.0)], 3.0);
        lp.add_eq(vec![(a, 1.0), (c, 1.0)], 0.5);
        let s1 = lp.solve().unwrap();
        let s2 = lp.solve().unwrap();
        assert_eq!(s1.basis, s2.basis);
        assert_eq!(s1.primal, s2.primal);
        assert_eq!(s1.objective, s2.objective);
    }
}
