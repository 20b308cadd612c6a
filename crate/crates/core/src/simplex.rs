//! Dense bounded-variable primal simplex. Every constraint row gets a slack
//! variable whose bounds encode the relation, so the all-slack basis is
//! always a valid starting point; rows whose slack value would violate its
//! bounds get a phase-1 artificial instead. The solver object keeps its
//! factorized tableau between solves, which makes re-solving after an
//! objective change a matter of re-pricing plus a few pivots.

use crate::error::{Error, Result};

/// Feasibility tolerance on bound and constraint violation.
pub const FEAS_TOL: f64 = 1e-6;
/// Reduced-cost threshold below which a column is not worth entering.
pub const OPT_TOL: f64 = 1e-7;
/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const BLAND_TRIGGER: u32 = 50;
const DEFAULT_ITERATION_LIMIT: u64 = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program in minimize sense over bounded variables.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `(lower, upper)`. Lower bounds must be finite; upper
    /// bounds may be `f64::INFINITY`.
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.bounds.len();
        if self.objective.len() != n {
            return Err(Error::InvalidLp(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                n
            )));
        }
        for (j, &(lo, up)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() {
                return Err(Error::InvalidLp(format!("x{j} has non-finite lower bound")));
            }
            if up.is_nan() || up < lo {
                return Err(Error::InvalidLp(format!("x{j} has empty bound range")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidLp("objective has non-finite coefficient".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::InvalidLp(format!(
                    "row {} has {} coefficients for {} variables",
                    i,
                    row.coeffs.len(),
                    n
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidLp(format!("row {i} has non-finite entry")));
            }
        }
        Ok(())
    }
}

/// A restorable simplex basis: which columns are basic (in row order) and
/// which nonbasic columns rest at their upper bound. Indices cover the
/// structural variables followed by one slack per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplexBasis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LpOutcome {
    /// Optimal structural variable values.
    pub assignment: Vec<f64>,
    /// Objective value at the optimum (minimize sense).
    pub objective: f64,
    /// Basis at the optimum, reusable to warmstart related solves.
    pub basis: SimplexBasis,
    /// Pivots plus bound flips spent on this solve.
    pub iterations: u64,
    /// Whether the solve started from reused factorized state or an
    /// imported basis rather than from scratch.
    pub warmstarted: bool,
}

const NOT_BASIC: usize = usize::MAX;

pub struct SimplexSolver {
    n: usize,
    m: usize,
    width: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    art_sign: Vec<f64>,
    iteration_limit: u64,

    t: Vec<Vec<f64>>,
    binv_b: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    basis_row: Vec<usize>,
    at_upper: Vec<bool>,
    factorized: bool,
}

enum Step {
    Optimal,
    Unbounded,
    Moved { degenerate: bool },
}

impl SimplexSolver {
    pub fn new(problem: &LpProblem) -> Result<Self> {
        problem.validate()?;
        let n = problem.n_vars();
        let m = problem.constraints.len();
        let width = n + 2 * m;

        let mut a = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        let mut lo = vec![0.0; width];
        let mut up = vec![0.0; width];
        let mut cost = vec![0.0; width];

        for j in 0..n {
            lo[j] = problem.bounds[j].0;
            up[j] = problem.bounds[j].1;
            cost[j] = problem.objective[j];
        }
        for (i, row) in problem.constraints.iter().enumerate() {
            a.push(row.coeffs.clone());
            b.push(row.rhs);
            let s = n + i;
            match row.relation {
                Relation::Le => {
                    lo[s] = 0.0;
                    up[s] = f64::INFINITY;
                }
                Relation::Ge => {
                    lo[s] = f64::NEG_INFINITY;
                    up[s] = 0.0;
                }
                Relation::Eq => {
                    lo[s] = 0.0;
                    up[s] = 0.0;
                }
            }
            // Artificial column, kept fixed at zero except during phase 1.
        }

        Ok(SimplexSolver {
            n,
            m,
            width,
            a,
            b,
            lo,
            up,
            cost,
            art_sign: vec![1.0; m],
            iteration_limit: DEFAULT_ITERATION_LIMIT,
            t: Vec::new(),
            binv_b: Vec::new(),
            beta: Vec::new(),
            basis: Vec::new(),
            basis_row: vec![NOT_BASIC; width],
            at_upper: vec![false; width],
            factorized: false,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    /// Swap in a new objective without disturbing the factorized state, so
    /// the next `solve` starts from the current optimal basis.
    pub fn set_objective(&mut self, objective: &[f64]) -> Result<()> {
        if objective.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: objective.len(),
            });
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidLp("objective has non-finite coefficient".into()));
        }
        self.cost[..self.n].copy_from_slice(objective);
        Ok(())
    }

    /// Tighten or relax one structural variable's bounds. Invalidates any
    /// factorized state, so the next solve starts cold.
    pub fn override_bound(&mut self, var: usize, lo: f64, up: f64) -> Result<()> {
        if var >= self.n {
            return Err(Error::InvalidLp(format!(
                "variable x{var} out of range for {} variables",
                self.n
            )));
        }
        if !lo.is_finite() || up.is_nan() || up < lo {
            return Err(Error::InvalidLp(format!("x{var} has empty bound range")));
        }
        self.lo[var] = lo;
        self.up[var] = up;
        self.factorized = false;
        Ok(())
    }

    pub fn set_iteration_limit(&mut self, limit: u64) {
        self.iteration_limit = limit;
    }

    /// Solve with whatever state is available: re-price and continue from
    /// the previous optimal basis if one is held, otherwise start cold.
    pub fn solve(&mut self) -> Result<LpOutcome> {
        if self.factorized {
            let mut iterations = 0;
            self.run_phase(false, &mut iterations)?;
            return Ok(self.outcome(iterations, true));
        }
        self.solve_cold()
    }

    /// Solve starting from an explicitly supplied basis. Falls back to a
    /// cold start if the basis does not fit this problem.
    pub fn solve_from(&mut self, basis: &SimplexBasis) -> Result<LpOutcome> {
        match self.import_basis(basis) {
            Ok(()) => {
                let mut iterations = 0;
                self.run_phase(false, &mut iterations)?;
                Ok(self.outcome(iterations, true))
            }
            Err(_) => self.solve_cold(),
        }
    }

    /// Solve from scratch: all-slack basis, phase 1 if needed, then phase 2.
    pub fn solve_cold(&mut self) -> Result<LpOutcome> {
        self.factorized = false;
        let mut iterations = 0;

        // Rest every nonbasic column at a finite bound.
        for j in 0..self.width {
            self.at_upper[j] = self.lo[j].is_infinite();
        }
        for i in 0..self.m {
            let z = self.art(i);
            self.lo[z] = 0.0;
            self.up[z] = 0.0;
        }

        let resting: Vec<f64> = (0..self.width).map(|j| self.rest_value(j)).collect();
        let mut needs_phase1 = false;
        let mut basis = Vec::with_capacity(self.m);
        for i in 0..self.m {
            let r: f64 = self.b[i]
                - (0..self.n)
                    .map(|j| self.a[i][j] * resting[j])
                    .sum::<f64>();
            let s = self.n + i;
            if r >= self.lo[s] - FEAS_TOL && r <= self.up[s] + FEAS_TOL {
                basis.push(s);
            } else {
                // Rest the slack at its bound nearest the violation and let
                // an artificial absorb the gap.
                let rest = if r < self.lo[s] { self.lo[s] } else { self.up[s] };
                self.at_upper[s] = rest == self.up[s] && self.lo[s] < self.up[s];
                let z = self.art(i);
                self.art_sign[i] = if r - rest >= 0.0 { 1.0 } else { -1.0 };
                self.up[z] = f64::INFINITY;
                basis.push(z);
                needs_phase1 = true;
            }
        }

        self.factorize(&basis)
            .map_err(|e| Error::BadBasis(format!("initial basis is singular: {e}")))?;

        if needs_phase1 {
            let saved = self.cost.clone();
            for c in self.cost.iter_mut() {
                *c = 0.0;
            }
            for i in 0..self.m {
                let z = self.art(i);
                if self.up[z] > 0.0 {
                    self.cost[z] = 1.0;
                }
            }
            let phase1 = self.run_phase(true, &mut iterations);
            let infeasibility: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.n + self.m)
                .map(|i| self.beta[i].max(0.0))
                .sum();
            self.cost = saved;
            phase1?;
            if infeasibility > FEAS_TOL {
                self.factorized = false;
                return Err(Error::Infeasible);
            }
            for i in 0..self.m {
                let z = self.art(i);
                self.up[z] = 0.0;
                if let Some(r) = self.row_of(z) {
                    self.beta[r] = self.beta[r].clamp(0.0, 0.0);
                }
            }
        }

        self.run_phase(false, &mut iterations)?;
        Ok(self.outcome(iterations, false))
    }

    fn art(&self, row: usize) -> usize {
        self.n + self.m + row
    }

    fn row_of(&self, var: usize) -> Option<usize> {
        match self.basis_row[var] {
            NOT_BASIC => None,
            r => Some(r),
        }
    }

    fn rest_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.up[j]
        } else {
            self.lo[j]
        }
    }

    /// Rebuild the tableau by Gauss-Jordan elimination on the requested
    /// basis, then recover the basic variable values.
    fn factorize(&mut self, basis: &[usize]) -> Result<()> {
        debug_assert_eq!(basis.len(), self.m);
        let m = self.m;
        let n = self.n;

        let mut t: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row = vec![0.0; self.width];
                row[..n].copy_from_slice(&self.a[i]);
                row[n + i] = 1.0;
                row[self.art(i)] = self.art_sign[i];
                row
            })
            .collect();
        let mut rhs = self.b.clone();

        for (k, &col) in basis.iter().enumerate() {
            let mut pivot_row = k;
            let mut pivot_abs = t[k][col].abs();
            for i in k + 1..m {
                let v = t[i][col].abs();
                if v > pivot_abs {
                    pivot_abs = v;
                    pivot_row = i;
                }
            }
            if pivot_abs < PIVOT_TOL {
                return Err(Error::BadBasis(format!("column {col} is dependent")));
            }
            t.swap(k, pivot_row);
            rhs.swap(k, pivot_row);

            let piv = t[k][col];
            for v in t[k].iter_mut() {
                *v /= piv;
            }
            rhs[k] /= piv;
            let pivot_vals = t[k].clone();
            let pivot_rhs = rhs[k];
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = t[i][col];
                if f == 0.0 {
                    continue;
                }
                for (dst, src) in t[i].iter_mut().zip(&pivot_vals) {
                    *dst -= f * src;
                }
                rhs[i] -= f * pivot_rhs;
            }
        }

        self.t = t;
        self.binv_b = rhs;
        self.basis = basis.to_vec();
        self.basis_row = vec![NOT_BASIC; self.width];
        for (i, &v) in basis.iter().enumerate() {
            self.basis_row[v] = i;
            self.at_upper[v] = false;
        }
        self.recompute_beta();
        self.factorized = true;
        Ok(())
    }

    fn recompute_beta(&mut self) {
        let mut beta = self.binv_b.clone();
        for j in 0..self.width {
            if self.basis_row[j] != NOT_BASIC {
                continue;
            }
            let x = self.rest_value(j);
            if x != 0.0 {
                for i in 0..self.m {
                    beta[i] -= self.t[i][j] * x;
                }
            }
        }
        self.beta = beta;
    }

    fn import_basis(&mut self, basis: &SimplexBasis) -> Result<()> {
        if basis.basic.len() != self.m {
            return Err(Error::BadBasis(format!(
                "basis holds {} columns for {} rows",
                basis.basic.len(),
                self.m
            )));
        }
        let limit = self.n + self.m;
        let mut seen = vec![false; limit];
        for &j in &basis.basic {
            if j >= limit || seen[j] {
                return Err(Error::BadBasis(format!("column {j} is out of range or repeated")));
            }
            seen[j] = true;
        }

        for j in 0..self.width {
            self.at_upper[j] = false;
        }
        for &j in &basis.at_upper {
            if j >= limit || seen[j] {
                return Err(Error::BadBasis(format!(
                    "at-upper column {j} is out of range or basic"
                )));
            }
            if !self.up[j].is_finite() {
                return Err(Error::BadBasis(format!("column {j} has no upper bound")));
            }
            self.at_upper[j] = true;
        }
        for i in 0..self.m {
            let z = self.art(i);
            self.lo[z] = 0.0;
            self.up[z] = 0.0;
        }
        for j in 0..limit {
            if !seen[j] && !self.at_upper[j] && self.lo[j].is_infinite() {
                return Err(Error::BadBasis(format!("column {j} has no resting bound")));
            }
        }

        self.factorize(&basis.basic)?;
        for i in 0..self.m {
            let v = self.basis[i];
            if self.beta[i] < self.lo[v] - FEAS_TOL || self.beta[i] > self.up[v] + FEAS_TOL {
                self.factorized = false;
                return Err(Error::BadBasis(format!("basic column {v} violates its bounds")));
            }
        }
        Ok(())
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for (dj, tij) in d.iter_mut().zip(&self.t[i]) {
                *dj -= cb * tij;
            }
        }
        d
    }

    fn run_phase(&mut self, phase1: bool, iterations: &mut u64) -> Result<()> {
        let mut d = self.reduced_costs();
        let mut bland = false;
        let mut degenerate_run: u32 = 0;

        loop {
            if *iterations >= self.iteration_limit {
                self.factorized = false;
                return Err(Error::IterationLimit(self.iteration_limit));
            }
            match self.step(&mut d, bland)? {
                Step::Optimal => return Ok(()),
                Step::Unbounded => {
                    if phase1 {
                        // Phase-1 objective is bounded below by zero; treat
                        // this as numerical trouble rather than looping.
                        self.factorized = false;
                        return Err(Error::BadBasis("phase 1 reported unbounded".into()));
                    }
                    self.factorized = false;
                    return Err(Error::Unbounded);
                }
                Step::Moved { degenerate } => {
                    *iterations += 1;
                    if degenerate {
                        degenerate_run += 1;
                        if degenerate_run >= BLAND_TRIGGER {
                            bland = true;
                        }
                    } else {
                        degenerate_run = 0;
                    }
                }
            }
        }
    }

    fn pick_entering(&self, d: &[f64], bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.width {
            if self.basis_row[j] != NOT_BASIC || self.lo[j] >= self.up[j] {
                continue;
            }
            let dj = d[j];
            let improving = if self.at_upper[j] { dj > OPT_TOL } else { dj < -OPT_TOL };
            if !improving {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                Some((_, score)) if dj.abs() <= score => {}
                _ => best = Some((j, dj.abs())),
            }
        }
        best.map(|(j, _)| j)
    }

    fn step(&mut self, d: &mut [f64], bland: bool) -> Result<Step> {
        let q = match self.pick_entering(d, bland) {
            Some(pick) => pick,
            None => return Ok(Step::Optimal),
        };
        let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

        let range = self.up[q] - self.lo[q];
        let mut best_t = if range.is_finite() { range } else { f64::INFINITY };
        let mut leave: Option<(usize, bool)> = None;
        let mut best_alpha = 0.0f64;

        for i in 0..self.m {
            let alpha = dir * self.t[i][q];
            let v = self.basis[i];
            let (limit, hits_upper) = if alpha > PIVOT_TOL {
                if self.lo[v].is_infinite() {
                    continue;
                }
                (((self.beta[i] - self.lo[v]) / alpha).max(0.0), false)
            } else if alpha < -PIVOT_TOL {
                if self.up[v].is_infinite() {
                    continue;
                }
                (((self.beta[i] - self.up[v]) / alpha).max(0.0), true)
            } else {
                continue;
            };

            let take = if bland {
                match leave {
                    _ if limit < best_t - 1e-12 => true,
                    Some((r, _)) if limit <= best_t + 1e-12 => self.basis[i] < self.basis[r],
                    None if limit <= best_t + 1e-12 => true,
                    _ => false,
                }
            } else if limit < best_t - 1e-12 {
                true
            } else {
                limit <= best_t + 1e-12 && alpha.abs() > best_alpha
            };
            if take {
                best_t = best_t.min(limit);
                leave = Some((i, hits_upper));
                best_alpha = alpha.abs();
            }
        }

        if best_t.is_infinite() {
            return Ok(Step::Unbounded);
        }

        match leave {
            None => {
                // Bound flip: q runs to its opposite bound, no basis change.
                for i in 0..self.m {
                    self.beta[i] -= dir * best_t * self.t[i][q];
                }
                self.at_upper[q] = !self.at_upper[q];
                Ok(Step::Moved {
                    degenerate: best_t < PIVOT_TOL,
                })
            }
            Some((r, hits_upper)) => {
                let entering_value = self.rest_value(q) + dir * best_t;
                for i in 0..self.m {
                    if i != r {
                        self.beta[i] -= dir * best_t * self.t[i][q];
                    }
                }
                self.beta[r] = entering_value;

                let p = self.basis[r];
                self.basis_row[p] = NOT_BASIC;
                self.at_upper[p] = hits_upper;
                self.basis[r] = q;
                self.basis_row[q] = r;
                self.at_upper[q] = false;

                let piv = self.t[r][q];
                for v in self.t[r].iter_mut() {
                    *v /= piv;
                }
                self.binv_b[r] /= piv;
                let pivot_vals = std::mem::take(&mut self.t[r]);
                let pivot_rhs = self.binv_b[r];
                for i in 0..self.m {
                    if i == r {
                        continue;
                    }
                    let f = self.t[i][q];
                    if f == 0.0 {
                        continue;
                    }
                    for (dst, src) in self.t[i].iter_mut().zip(&pivot_vals) {
                        *dst -= f * src;
                    }
                    self.binv_b[i] -= f * pivot_rhs;
                }
                let dq = d[q];
                if dq != 0.0 {
                    for (dj, src) in d.iter_mut().zip(&pivot_vals) {
                        *dj -= dq * src;
                    }
                }
                d[q] = 0.0;
                self.t[r] = pivot_vals;

                Ok(Step::Moved {
                    degenerate: best_t < PIVOT_TOL,
                })
            }
        }
    }

    fn outcome(&self, iterations: u64, warmstarted: bool) -> LpOutcome {
        let mut assignment = vec![0.0; self.n];
        for (j, slot) in assignment.iter_mut().enumerate() {
            *slot = match self.row_of(j) {
                Some(r) => self.beta[r],
                None => self.rest_value(j),
            };
        }
        let objective = assignment
            .iter()
            .zip(&self.cost[..self.n])
            .map(|(x, c)| x * c)
            .sum();
        let at_upper = (0..self.n + self.m)
            .filter(|&j| self.basis_row[j] == NOT_BASIC && self.at_upper[j])
            .collect();
        LpOutcome {
            assignment,
            objective,
            basis: SimplexBasis {
                basic: self.basis.clone(),
                at_upper,
            },
            iterations,
            warmstarted,
        }
    }
}

/// One-shot solve, optionally warmstarted from a previous basis.
pub fn solve_lp(problem: &LpProblem, warm: Option<&SimplexBasis>) -> Result<LpOutcome> {
    let mut solver = SimplexSolver::new(problem)?;
    match warm {
        Some(basis) => solver.solve_from(basis),
        None => solver.solve(),
    }
}

fn push_terms(out: &mut String, coeffs: &[f64]) {
    let mut first = true;
    for (j, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if first {
            if c < 0.0 {
                out.push_str("- ");
            }
            first = false;
        } else if c < 0.0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let mag = c.abs();
        if mag == 1.0 {
            out.push_str(&format!("x{j}"));
        } else {
            out.push_str(&format!("{mag} x{j}"));
        }
    }
    if first {
        out.push('0');
    }
}

/// Render a problem in LP text format for inspection and diffing.
pub fn lp_text(problem: &LpProblem) -> String {
    let mut out = String::from("Minimize\n obj: ");
    push_terms(&mut out, &problem.objective);
    out.push_str("\nSubject To\n");
    for (i, row) in problem.constraints.iter().enumerate() {
        out.push_str(&format!(" c{i}: "));
        push_terms(&mut out, &row.coeffs);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        out.push_str(&format!(" {rel} {}\n", row.rhs));
    }
    out.push_str("Bounds\n");
    for (j, &(lo, up)) in problem.bounds.iter().enumerate() {
        if lo == 0.0 && up.is_infinite() {
            continue;
        }
        if up.is_infinite() {
            out.push_str(&format!(" x{j} >= {lo}\n"));
        } else if lo == up {
            out.push_str(&format!(" x{j} = {lo}\n"));
        } else {
            out.push_str(&format!(" {lo} <= x{j} <= {up}\n"));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knapsack::{self, KnapsackData};
    use proptest::prelude::*;

    fn le(coeffs: Vec<f64>, rhs: f64) -> Constraint {
        Constraint {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }

    fn check_feasible(problem: &LpProblem, x: &[f64]) {
        for (j, &(lo, up)) in problem.bounds.iter().enumerate() {
            assert!(
                x[j] >= lo - FEAS_TOL && x[j] <= up + FEAS_TOL,
                "x{} = {} outside [{}, {}]",
                j,
                x[j],
                lo,
                up
            );
        }
        for (i, row) in problem.constraints.iter().enumerate() {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let ok = match row.relation {
                Relation::Le => lhs <= row.rhs + FEAS_TOL,
                Relation::Ge => lhs >= row.rhs - FEAS_TOL,
                Relation::Eq => (lhs - row.rhs).abs() <= FEAS_TOL,
            };
            assert!(ok, "row {} violated: lhs = {}, rhs = {}", i, lhs, row.rhs);
        }
    }

    #[test]
    fn two_variable_box_lp() {
        let problem = LpProblem {
            objective: vec![-1.0, -1.0],
            constraints: vec![le(vec![1.0, 1.0], 1.5)],
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        };
        let out = solve_lp(&problem, None).unwrap();
        assert!((out.objective + 1.5).abs() < 1e-9);
        assert_eq!(out.assignment, vec![1.0, 0.5]);
        check_feasible(&problem, &out.assignment);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        let problem = LpProblem {
            objective: vec![1.0, 1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0],
                    relation: Relation::Ge,
                    rhs: 1.0,
                },
                Constraint {
                    coeffs: vec![1.0, 2.0],
                    relation: Relation::Eq,
                    rhs: 1.4,
                },
            ],
            bounds: vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
        };
        let out = solve_lp(&problem, None).unwrap();
        assert!((out.objective - 1.0).abs() < 1e-9, "objective {}", out.objective);
        assert!((out.assignment[0] - 0.6).abs() < 1e-9);
        assert!((out.assignment[1] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn infeasible_is_reported() {
        let problem = LpProblem {
            objective: vec![0.0],
            constraints: vec![
                le(vec![1.0], 1.0),
                Constraint {
                    coeffs: vec![1.0],
                    relation: Relation::Ge,
                    rhs: 2.0,
                },
            ],
            bounds: vec![(0.0, f64::INFINITY)],
        };
        assert!(matches!(solve_lp(&problem, None), Err(Error::Infeasible)));
    }

    #[test]
    fn unbounded_is_reported() {
        let problem = LpProblem {
            objective: vec![-1.0],
            constraints: vec![],
            bounds: vec![(0.0, f64::INFINITY)],
        };
        assert!(matches!(solve_lp(&problem, None), Err(Error::Unbounded)));
    }

    #[test]
    fn no_rows_reduces_to_bound_selection() {
        let problem = LpProblem {
            objective: vec![1.0, -2.0, 0.0],
            constraints: vec![],
            bounds: vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
        };
        let out = solve_lp(&problem, None).unwrap();
        assert_eq!(out.assignment, vec![0.0, 1.0, 0.0]);
        assert_eq!(out.objective, -2.0);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Classic degenerate LP that cycles under naive pivoting.
        let problem = LpProblem {
            objective: vec![-0.75, 150.0, -0.02, 6.0],
            constraints: vec![
                le(vec![0.25, -60.0, -0.04, 9.0], 0.0),
                le(vec![0.5, -90.0, -0.02, 3.0], 0.0),
                le(vec![0.0, 0.0, 1.0, 0.0], 1.0),
            ],
            bounds: vec![(0.0, f64::INFINITY); 4],
        };
        let out = solve_lp(&problem, None).unwrap();
        assert!((out.objective + 0.05).abs() < 1e-9, "objective {}", out.objective);
        check_feasible(&problem, &out.assignment);
    }

    #[test]
    fn warm_resolve_with_same_objective_takes_no_pivots() {
        let problem = LpProblem {
            objective: vec![-3.0, -2.0, -4.0],
            constraints: vec![le(vec![2.0, 1.0, 3.0], 4.0), le(vec![1.0, 2.0, 1.0], 3.0)],
            bounds: vec![(0.0, 1.0); 3],
        };
        let mut solver = SimplexSolver::new(&problem).unwrap();
        let cold = solver.solve().unwrap();
        assert!(!cold.warmstarted);

        let warm = solver.solve().unwrap();
        assert!(warm.warmstarted);
        assert_eq!(warm.iterations, 0);
        assert_eq!(warm.objective, cold.objective);
        assert_eq!(warm.assignment, cold.assignment);
    }

    #[test]
    fn imported_basis_reproduces_the_optimum() {
        let problem = LpProblem {
            objective: vec![-5.0, -4.0, -3.0],
            constraints: vec![le(vec![2.0, 3.0, 1.0], 5.0), le(vec![4.0, 1.0, 2.0], 11.0)],
            bounds: vec![(0.0, f64::INFINITY); 3],
        };
        let first = solve_lp(&problem, None).unwrap();
        let again = solve_lp(&problem, Some(&first.basis)).unwrap();
        assert!(again.warmstarted);
        assert_eq!(again.iterations, 0);
        assert_eq!(again.assignment, first.assignment);
    }

    #[test]
    fn garbage_basis_falls_back_to_cold_start() {
        let problem = LpProblem {
            objective: vec![-1.0, -1.0],
            constraints: vec![le(vec![1.0, 1.0], 1.0)],
            bounds: vec![(0.0, 1.0); 2],
        };
        let bogus = SimplexBasis {
            basic: vec![17],
            at_upper: vec![],
        };
        let out = solve_lp(&problem, Some(&bogus)).unwrap();
        assert!(!out.warmstarted);
        assert!((out.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn objective_change_resolves_warm() {
        let problem = LpProblem {
            objective: vec![-1.0, -2.0, -3.0, -1.0],
            constraints: vec![
                le(vec![1.0, 1.0, 1.0, 1.0], 2.0),
                le(vec![2.0, 1.0, 0.0, 1.0], 2.5),
            ],
            bounds: vec![(0.0, 1.0); 4],
        };
        let mut solver = SimplexSolver::new(&problem).unwrap();
        let cold = solver.solve().unwrap();

        solver.set_objective(&[-1.1, -1.9, -3.2, -0.9]).unwrap();
        let warm = solver.solve().unwrap();
        assert!(warm.warmstarted);

        // Same objective through a fresh solver must agree.
        let fresh = solve_lp(
            &LpProblem {
                objective: vec![-1.1, -1.9, -3.2, -0.9],
                ..problem.clone()
            },
            None,
        )
        .unwrap();
        assert!((warm.objective - fresh.objective).abs() < 1e-9);
        assert!(cold.iterations > 0);
    }

    #[test]
    fn lp_text_lists_rows_and_bounds() {
        let problem = LpProblem {
            objective: vec![2.0, -3.5],
            constraints: vec![
                le(vec![1.0, 1.0], 5.0),
                Constraint {
                    coeffs: vec![-1.0, 2.0],
                    relation: Relation::Ge,
                    rhs: 0.5,
                },
            ],
            bounds: vec![(0.0, 1.0), (0.0, f64::INFINITY)],
        };
        let text = lp_text(&problem);
        let expected = "Minimize\n obj: 2 x0 - 3.5 x1\nSubject To\n c0: x0 + x1 <= 5\n c1: - x0 + 2 x1 >= 0.5\nBounds\n 0 <= x0 <= 1\nEnd\n";
        assert_eq!(text, expected);
    }

    fn knapsack_lp(data: &KnapsackData, values: &[f64]) -> LpProblem {
        LpProblem {
            objective: values.iter().map(|v| -v).collect(),
            constraints: vec![le(
                data.weights.iter().map(|w| *w as f64).collect(),
                data.capacity as f64,
            )],
            bounds: vec![(0.0, 1.0); values.len()],
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn agrees_with_fractional_knapsack(
            items in prop::collection::vec((1u32..12, -10.0f64..20.0), 1..12),
            capacity in 0u32..50,
        ) {
            let data = KnapsackData {
                weights: items.iter().map(|(w, _)| *w).collect(),
                capacity,
            };
            let values: Vec<f64> = items.iter().map(|(_, v)| *v).collect();
            let problem = knapsack_lp(&data, &values);

            let lp = solve_lp(&problem, None).unwrap();
            let relax = knapsack::solve_relaxation(&data, &values);
            prop_assert!((lp.objective + relax.objective).abs() < 1e-7,
                "simplex {} vs greedy relaxation {}", -lp.objective, relax.objective);
            check_feasible(&problem, &lp.assignment);
        }

        #[test]
        fn never_beaten_by_random_feasible_points(
            seed_point in prop::collection::vec(0.0f64..1.0, 2..6),
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2..6), 1..4),
            objective in prop::collection::vec(-5.0f64..5.0, 2..6),
            slack in prop::collection::vec(0.0f64..3.0, 1..4),
        ) {
            let n = seed_point.len().min(objective.len())
                .min(rows.iter().map(|r| r.len()).min().unwrap());
            let x0: Vec<f64> = seed_point[..n].to_vec();
            let problem = LpProblem {
                objective: objective[..n].to_vec(),
                constraints: rows.iter().zip(&slack).map(|(r, s)| {
                    let coeffs = r[..n].to_vec();
                    let lhs: f64 = coeffs.iter().zip(&x0).map(|(a, v)| a * v).sum();
                    le(coeffs, lhs + s)
                }).collect(),
                bounds: vec![(0.0, 1.0); n],
            };

            let out = solve_lp(&problem, None).unwrap();
            check_feasible(&problem, &out.assignment);
            let seed_obj: f64 = problem.objective.iter().zip(&x0).map(|(c, v)| c * v).sum();
            prop_assert!(out.objective <= seed_obj + 1e-7,
                "optimum {} beaten by constructed point {}", out.objective, seed_obj);
        }
    }
}
