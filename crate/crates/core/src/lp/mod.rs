//! Dense linear-program and mixed-integer linear-program solving.
//!
//! Problems are expressed in the standard dense form
//!
//! ```text
//! minimize    c' x
//! subject to  A_eq x  = b_eq
//!             A_in x <= b_in
//!             lo <= x <= hi        (entries may be +-infinity)
//! ```
//!
//! `solve_lp` is a two-phase dense primal simplex over bounded variables
//! with Bland's anti-cycling rule as the degeneracy safeguard. `solve_milp`
//! is a best-first branch-and-bound over LP relaxations with
//! most-fractional branching.

mod milp;
mod simplex;

pub use milp::{solve_milp, solve_milp_with_stats, MilpStats};

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;

use crate::{Error, Result};

/// Feasibility tolerance: optimal solutions satisfy every constraint to
/// within this absolute residual.
pub const FEAS_TOL: f64 = 1e-7;
/// Optimality tolerance on reduced costs.
pub const OPT_TOL: f64 = 1e-7;
/// A binary variable is integral when within this distance of 0 or 1.
pub const INT_TOL: f64 = 1e-6;

/// Dense standard-form linear program (minimization).
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: DVector<f64>,
    pub eq_lhs: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_lhs: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub var_lo: DVector<f64>,
    pub var_hi: DVector<f64>,
}

impl LpProblem {
    /// Problem over `n` variables with no rows and free variables.
    pub fn new(n: usize) -> Self {
        Self {
            objective: DVector::zeros(n),
            eq_lhs: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            ineq_lhs: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            var_lo: DVector::from_element(n, f64::NEG_INFINITY),
            var_hi: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.eq_lhs.ncols() != n && self.eq_lhs.nrows() > 0 {
            return Err(Error::MalformedProblem("equality matrix column count".into()));
        }
        if self.ineq_lhs.ncols() != n && self.ineq_lhs.nrows() > 0 {
            return Err(Error::MalformedProblem("inequality matrix column count".into()));
        }
        if self.eq_lhs.nrows() != self.eq_rhs.len() {
            return Err(Error::MalformedProblem("equality rhs length".into()));
        }
        if self.ineq_lhs.nrows() != self.ineq_rhs.len() {
            return Err(Error::MalformedProblem("inequality rhs length".into()));
        }
        if self.var_lo.len() != n || self.var_hi.len() != n {
            return Err(Error::MalformedProblem("bound vector length".into()));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&self.eq_lhs) || !finite(&self.ineq_lhs) {
            return Err(Error::MalformedProblem("non-finite constraint coefficient".into()));
        }
        if !self.eq_rhs.iter().all(|v| v.is_finite())
            || !self.ineq_rhs.iter().all(|v| v.is_finite())
            || !self.objective.iter().all(|v| v.is_finite())
        {
            return Err(Error::MalformedProblem("non-finite objective or rhs".into()));
        }
        for j in 0..n {
            if self.var_lo[j].is_nan() || self.var_hi[j].is_nan() {
                return Err(Error::MalformedProblem(format!("NaN bound on variable {j}")));
            }
            if self.var_lo[j] > self.var_hi[j] {
                return Err(Error::MalformedProblem(format!(
                    "variable {j} has lower bound {} above upper bound {}",
                    self.var_lo[j], self.var_hi[j]
                )));
            }
        }
        Ok(())
    }

    /// Largest absolute constraint or bound violation of `x`.
    pub fn max_residual(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        if self.eq_lhs.nrows() > 0 {
            let r = &self.eq_lhs * x - &self.eq_rhs;
            worst = worst.max(r.amax());
        }
        if self.ineq_lhs.nrows() > 0 {
            let r = &self.ineq_lhs * x - &self.ineq_rhs;
            worst = r.iter().fold(worst, |w, v| w.max(*v));
        }
        for j in 0..self.num_vars() {
            worst = worst.max(self.var_lo[j] - x[j]).max(x[j] - self.var_hi[j]);
        }
        worst
    }

    /// Plain-text dump for debugging.
    ///
    /// Layout: one `minimize` line with the cost vector, one line per
    /// equality row (`coeffs = rhs`), one line per inequality row
    /// (`coeffs <= rhs`), then one `lo <= x[j] <= hi` line per variable.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let row_str = |vals: &mut dyn Iterator<Item = &f64>| {
            vals.map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")
        };
        writeln!(out, "minimize {}", row_str(&mut self.objective.iter())).unwrap();
        for i in 0..self.eq_lhs.nrows() {
            writeln!(out, "eq {} = {:.6}", row_str(&mut self.eq_lhs.row(i).iter()), self.eq_rhs[i]).unwrap();
        }
        for i in 0..self.ineq_lhs.nrows() {
            writeln!(out, "ineq {} <= {:.6}", row_str(&mut self.ineq_lhs.row(i).iter()), self.ineq_rhs[i]).unwrap();
        }
        for j in 0..self.num_vars() {
            writeln!(out, "bound {} <= x[{j}] <= {}", self.var_lo[j], self.var_hi[j]).unwrap();
        }
        out
    }
}

/// Solution status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// MILP only: the time limit expired; `x` carries the incumbent if one
    /// was found.
    TimedOut,
}

/// Status-carrying solution.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: SolveStatus,
    pub x: Option<DVector<f64>>,
    pub objective_value: Option<f64>,
}

impl LpSolution {
    pub fn infeasible() -> Self {
        Self { status: SolveStatus::Infeasible, x: None, objective_value: None }
    }

    pub fn unbounded() -> Self {
        Self { status: SolveStatus::Unbounded, x: None, objective_value: None }
    }
}

/// Mixed-integer program: a base LP plus a set of variables constrained to
/// {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub base: LpProblem,
    pub binary_vars: BTreeSet<usize>,
}

impl MilpProblem {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if let Some(&j) = self.binary_vars.iter().next_back() {
            if j >= self.base.num_vars() {
                return Err(Error::MalformedProblem(format!(
                    "binary index {j} out of range for {} variables",
                    self.base.num_vars()
                )));
            }
        }
        Ok(())
    }
}

/// Solve a dense LP with the two-phase bounded-variable primal simplex.
///
/// Optimal solutions satisfy every constraint within [`FEAS_TOL`];
/// infeasibility is certified by a positive phase-1 optimum and
/// unboundedness by an improving ray.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let mut sx = simplex::Simplex::new(p, None)?;
    let sol = sx.solve()?;
    if sol.status == SolveStatus::Optimal {
        let x = sol.x.as_ref().expect("optimal solution carries x");
        let res = p.max_residual(x);
        if res > FEAS_TOL {
            return Err(Error::SolverFault(format!("optimal point violates constraints by {res:.3e}")));
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn bound_only_minimum() {
        // min x s.t. x >= 1
        let mut p = LpProblem::new(1);
        p.objective = dvector![1.0];
        p.var_lo = dvector![1.0];
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.x.unwrap()[0] - 1.0).abs() <= 1e-9);
        assert!((s.objective_value.unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn contradictory_bounds_and_rows_infeasible() {
        // min 0 s.t. x <= 0, x >= 1
        let mut p = LpProblem::new(1);
        p.ineq_lhs = dmatrix![1.0];
        p.ineq_rhs = dvector![0.0];
        p.var_lo = dvector![1.0];
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.x.is_none());
    }

    #[test]
    fn unbounded_direction_detected() {
        let mut p = LpProblem::new(1);
        p.objective = dvector![-1.0];
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }

    #[test]
    fn simple_equality_system() {
        // min x + y s.t. x + y = 2, x - y <= 0, 0 <= x, y <= 5
        let mut p = LpProblem::new(2);
        p.objective = dvector![1.0, 2.0];
        p.eq_lhs = dmatrix![1.0, 1.0];
        p.eq_rhs = dvector![2.0];
        p.ineq_lhs = dmatrix![1.0, -1.0];
        p.ineq_rhs = dvector![0.0];
        p.var_lo = dvector![0.0, 0.0];
        p.var_hi = dvector![5.0, 5.0];
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        let x = s.x.unwrap();
        // optimum at x = y = 1 (pushing x up to its x<=y limit)
        assert!((x[0] - 1.0).abs() < 1e-7, "{x:?}");
        assert!((x[1] - 1.0).abs() < 1e-7, "{x:?}");
        assert!((s.objective_value.unwrap() - 3.0).abs() < 1e-7);
    }

    #[test]
    fn malformed_dimensions_rejected() {
        let mut p = LpProblem::new(2);
        p.eq_lhs = dmatrix![1.0, 1.0];
        p.eq_rhs = dvector![1.0, 2.0];
        assert!(solve_lp(&p).is_err());
    }

    #[test]
    fn dump_contains_rows_and_bounds() {
        let mut p = LpProblem::new(1);
        p.objective = dvector![1.0];
        p.ineq_lhs = dmatrix![2.0];
        p.ineq_rhs = dvector![4.0];
        p.var_lo = dvector![0.0];
        let d = p.dump();
        assert!(d.contains("minimize"));
        assert!(d.contains("ineq"));
        assert!(d.contains("bound 0 <= x[0] <= inf"));
    }
}
