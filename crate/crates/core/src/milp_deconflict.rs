//! Centralized two-vehicle deconfliction MILP.
//!
//! Joint feasibility program over both vehicles' inputs, states, and a
//! binary side selector per timestep: big-M constraints activate the chosen
//! separating half-space, `sum_i b_ik >= 1` forces at least one active side
//! per step, and the objective is zero. Solutions provide the completeness
//! baseline and the training labels for the learned conflict-resolution
//! policy.

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;
use std::time::Duration;

use crate::dynamics::{rollout, ControlInput, DynamicsModel, Trajectory};
use crate::geometry::{side_constraint, DecisionSequence, RobustnessTube};
use crate::lp::{solve_milp, LpProblem, MilpProblem, SolveStatus};
use crate::{Error, Result};

/// Separation/containment slack allowed when re-checking solver output.
const RECHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeconflictStatus {
    Feasible,
    Infeasible,
    TimedOut,
}

/// Payload of a feasible deconfliction.
#[derive(Debug, Clone)]
pub struct DeconflictSolution {
    pub traj1_new: Trajectory,
    pub traj2_new: Trajectory,
    pub inputs1: Vec<ControlInput>,
    pub inputs2: Vec<ControlInput>,
    /// One row per timestep; entry `i` is the 0/1 activation of side `i+1`.
    pub binaries: Vec<[u8; 6]>,
    pub decisions: DecisionSequence,
}

#[derive(Debug, Clone)]
pub struct MilpDeconflictResult {
    pub status: DeconflictStatus,
    /// Present exactly when `status == Feasible`.
    pub solution: Option<DeconflictSolution>,
}

/// Big-M sufficient for the tube-constrained domain: the largest per-axis
/// extent of the union bounding box of both tubes, plus `delta`, plus one.
pub fn suggested_big_m(tube1: &RobustnessTube, tube2: &RobustnessTube, delta: f64) -> f64 {
    let mut extent: f64 = 0.0;
    for a in 0..3 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in tube1.boxes().iter().chain(tube2.boxes()) {
            lo = lo.min(b.lo[a]);
            hi = hi.max(b.hi[a]);
        }
        extent = extent.max(hi - lo);
    }
    extent + delta + 1.0
}

fn check_assumption_two(tube1: &RobustnessTube, tube2: &RobustnessTube, delta: f64) -> Result<()> {
    let min_half = tube1
        .boxes()
        .iter()
        .chain(tube2.boxes())
        .map(|b| b.min_half_extent())
        .fold(f64::INFINITY, f64::min);
    if min_half < delta / 2.0 - 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "tube radius {min_half} below delta/2 = {}",
            delta / 2.0
        )));
    }
    Ok(())
}

/// Variable layout of the deconfliction MILP: `(u1, u2, x1, x2, b)`.
struct Layout {
    h: usize,
}

impl Layout {
    fn u(&self, j: usize, k: usize, c: usize) -> usize {
        debug_assert!(j < 2 && k < self.h && c < 3);
        3 * self.h * j + 3 * k + c
    }
    fn x(&self, j: usize, k: usize, c: usize) -> usize {
        debug_assert!(j < 2 && k <= self.h && c < 6);
        6 * self.h + 6 * (self.h + 1) * j + 6 * k + c
    }
    fn b(&self, k: usize, i: usize) -> usize {
        debug_assert!(k <= self.h && i < 6);
        6 * self.h + 12 * (self.h + 1) + 6 * k + i
    }
    fn num_vars(&self) -> usize {
        6 * self.h + 18 * (self.h + 1)
    }
}

/// Encode the joint deconfliction MILP for two vehicles.
pub fn build_central_milp(
    x1: &Trajectory,
    x2: &Trajectory,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    model: &DynamicsModel,
    delta: f64,
    mu: f64,
) -> Result<MilpProblem> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("big-M must be positive, got {mu}")));
    }
    let n = x1.len();
    if x2.len() != n || tube1.len() != n || tube2.len() != n {
        return Err(Error::HorizonMismatch(n, x2.len().min(tube1.len()).min(tube2.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("deconfliction needs at least one step".into()));
    }
    check_assumption_two(tube1, tube2, delta)?;

    let h = n - 1;
    let lay = Layout { h };
    let nv = lay.num_vars();
    let mut p = LpProblem::new(nv);

    // bounds: inputs, pinned initial states, tube positions, velocity box,
    // binary relaxation
    for j in 0..2 {
        for k in 0..h {
            for c in 0..3 {
                p.var_lo[lay.u(j, k, c)] = model.input_bounds.lo[c];
                p.var_hi[lay.u(j, k, c)] = model.input_bounds.hi[c];
            }
        }
        let (traj, tube) = if j == 0 { (x1, tube1) } else { (x2, tube2) };
        let x0 = traj.state(0).as_vector();
        for c in 0..6 {
            p.var_lo[lay.x(j, 0, c)] = x0[c];
            p.var_hi[lay.x(j, 0, c)] = x0[c];
        }
        for k in 1..=h {
            let bx = tube.item(k);
            for c in 0..3 {
                p.var_lo[lay.x(j, k, c)] = bx.lo[c];
                p.var_hi[lay.x(j, k, c)] = bx.hi[c];
                p.var_lo[lay.x(j, k, c + 3)] = model.velocity_bounds.lo[c];
                p.var_hi[lay.x(j, k, c + 3)] = model.velocity_bounds.hi[c];
            }
        }
    }
    let mut binaries = BTreeSet::new();
    for k in 0..=h {
        for i in 0..6 {
            let col = lay.b(k, i);
            p.var_lo[col] = 0.0;
            p.var_hi[col] = 1.0;
            binaries.insert(col);
        }
    }

    // dynamics equalities for both vehicles
    let me = 12 * h;
    let mut eq = DMatrix::zeros(me, nv);
    for j in 0..2 {
        for k in 0..h {
            for r in 0..6 {
                let row = 6 * (h * j + k) + r;
                eq[(row, lay.x(j, k + 1, r))] = 1.0;
                for c in 0..6 {
                    eq[(row, lay.x(j, k, c))] -= model.a[(r, c)];
                }
                for c in 0..3 {
                    eq[(row, lay.u(j, k, c))] -= model.b[(r, c)];
                }
            }
        }
    }
    p.eq_lhs = eq;
    p.eq_rhs = DVector::zeros(me);

    // big-M side constraints and per-step side activation
    let mi = 6 * (h + 1) + (h + 1);
    let mut ineq = DMatrix::zeros(mi, nv);
    let mut rhs = DVector::zeros(mi);
    for k in 0..=h {
        for i in 0..6 {
            let row = 6 * k + i;
            let side = side_constraint((i + 1) as u8, delta)?;
            for c in 0..3 {
                ineq[(row, lay.x(0, k, c))] = side.normal[c];
                ineq[(row, lay.x(1, k, c))] = -side.normal[c];
            }
            ineq[(row, lay.b(k, i))] = mu;
            rhs[row] = side.offset + mu;
        }
        let row = 6 * (h + 1) + k;
        for i in 0..6 {
            ineq[(row, lay.b(k, i))] = -1.0;
        }
        rhs[row] = -1.0;
    }
    p.ineq_lhs = ineq;
    p.ineq_rhs = rhs;

    // feasibility problem: J = 0
    Ok(MilpProblem { base: p, binary_vars: binaries })
}

/// Lowest active side per timestep; rejects rows with no active side.
pub fn decisions_from_binaries(binaries: &[[u8; 6]]) -> Result<DecisionSequence> {
    let mut d = Vec::with_capacity(binaries.len());
    for (k, row) in binaries.iter().enumerate() {
        match row.iter().position(|&b| b == 1) {
            Some(i) => d.push((i + 1) as u8),
            None => {
                return Err(Error::InvalidArgument(format!("no active side at timestep {k}")));
            }
        }
    }
    DecisionSequence::new(d)
}

/// Solve the central MILP and independently re-check the geometric
/// postconditions of a feasible answer.
pub fn solve_central(
    x1: &Trajectory,
    x2: &Trajectory,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    model: &DynamicsModel,
    delta: f64,
    mu: f64,
    time_limit: Duration,
) -> Result<MilpDeconflictResult> {
    // a start outside its own tube can never satisfy the tube constraints
    for (traj, tube) in [(x1, tube1), (x2, tube2)] {
        if !tube.item(0).contains(&traj.position(0), 1e-9) {
            return Ok(MilpDeconflictResult { status: DeconflictStatus::Infeasible, solution: None });
        }
    }
    let milp = build_central_milp(x1, x2, tube1, tube2, model, delta, mu)?;
    let sol = solve_milp(&milp, time_limit)?;
    match sol.status {
        SolveStatus::Infeasible => {
            Ok(MilpDeconflictResult { status: DeconflictStatus::Infeasible, solution: None })
        }
        SolveStatus::TimedOut => {
            Ok(MilpDeconflictResult { status: DeconflictStatus::TimedOut, solution: None })
        }
        SolveStatus::Unbounded => Err(Error::SolverFault("feasibility MILP reported unbounded".into())),
        SolveStatus::Optimal => {
            let xv = sol.x.unwrap();
            let h = x1.horizon();
            let lay = Layout { h };
            let extract = |j: usize| -> Vec<ControlInput> {
                (0..h)
                    .map(|k| {
                        ControlInput::new(
                            xv[lay.u(j, k, 0)].clamp(model.input_bounds.lo[0], model.input_bounds.hi[0]),
                            xv[lay.u(j, k, 1)].clamp(model.input_bounds.lo[1], model.input_bounds.hi[1]),
                            xv[lay.u(j, k, 2)].clamp(model.input_bounds.lo[2], model.input_bounds.hi[2]),
                        )
                    })
                    .collect()
            };
            let inputs1 = extract(0);
            let inputs2 = extract(1);
            let traj1_new = rollout(model, x1.state(0), &inputs1)?;
            let traj2_new = rollout(model, x2.state(0), &inputs2)?;

            let mut binaries = vec![[0u8; 6]; h + 1];
            for k in 0..=h {
                for i in 0..6 {
                    binaries[k][i] = u8::from(xv[lay.b(k, i)].round() >= 1.0);
                }
            }
            let decisions = decisions_from_binaries(&binaries)?;

            // independent geometric re-check, not trusted from the solver
            if !tube1.contains_trajectory(&traj1_new, RECHECK_TOL)?
                || !tube2.contains_trajectory(&traj2_new, RECHECK_TOL)?
            {
                return Err(Error::DeconflictFailed("solution escaped its tube".into()));
            }
            if traj1_new.min_separation(&traj2_new)? < delta - RECHECK_TOL {
                return Err(Error::DeconflictFailed("solution violates separation".into()));
            }
            Ok(MilpDeconflictResult {
                status: DeconflictStatus::Feasible,
                solution: Some(DeconflictSolution {
                    traj1_new,
                    traj2_new,
                    inputs1,
                    inputs2,
                    binaries,
                    decisions,
                }),
            })
        }
    }
}
