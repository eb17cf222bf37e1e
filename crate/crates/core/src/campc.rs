//! Slack-minimizing collision-avoidance MPC for a single vehicle.
//!
//! Given a decision sequence of separating sides and the other vehicle's
//! (fixed) trajectory, the vehicle solves
//!
//! ```text
//! minimize    sum_k lambda_k
//! subject to  x'_0 = x_0
//!             x'_{k+1} = A x'_k + B u'_k
//!             C x'_k in P_k                          (tube)
//!             prty * M^{d_k} C (x_avoid_k - x'_k) <= q^{d_k} + lambda_k
//!             lambda_k >= 0,  u'_k in U,  x'_k in X
//! ```
//!
//! A zero optimal objective certifies that this vehicle alone achieved the
//! commanded side separation. The hover-linearized model decouples per
//! axis and each side constraint touches a single axis, so the LP splits
//! into three independent axis problems; `solve_campc` uses that fast path
//! whenever the model carries the canonical structure and falls back to
//! the single monolithic LP otherwise.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{rollout, ControlInput, DynamicsModel, Trajectory};
use crate::geometry::{side_constraint, DecisionSequence, RobustnessTube};
use crate::lp::{solve_lp, LpProblem, SolveStatus};
use crate::{Error, Result, EPS_SEP};

/// Which role the solving vehicle plays in the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Priority {
    /// Moves first (sign -1): avoids the other vehicle's pre-planned path.
    Low,
    /// Moves second (sign +1): avoids the first vehicle's updated path.
    High,
}

impl Priority {
    pub fn sign(self) -> f64 {
        match self {
            Priority::Low => -1.0,
            Priority::High => 1.0,
        }
    }
}

/// Slack tolerance when pinning the optimal slack sum for the
/// clearance-maximizing second pass.
const LEX_TOL: f64 = 1e-9;

/// Outcome of one avoidance solve.
#[derive(Debug, Clone)]
pub struct CampcResult {
    pub traj_new: Trajectory,
    pub inputs_new: Vec<ControlInput>,
    /// Per-timestep side-constraint violations, meters.
    pub slacks: Vec<f64>,
    pub slack_sum: f64,
}

impl CampcResult {
    pub fn is_zero_slack(&self) -> bool {
        self.slack_sum <= crate::ZERO_SLACK_TOL
    }
}

/// True when the trajectories keep inf-norm separation `delta` at every
/// timestep (within the shared separation tolerance).
pub fn verify_separation(t1: &Trajectory, t2: &Trajectory, delta: f64) -> Result<bool> {
    Ok(t1.min_separation(t2)? >= delta - EPS_SEP)
}

/// Per-axis image of the canonical hover-linearized model: for each axis,
/// the driving input index and its acceleration gain.
struct AxisModel {
    input: [usize; 3],
    gain: [f64; 3],
}

/// Detect the canonical block structure produced by `build_model`.
fn axis_model(model: &DynamicsModel) -> Option<AxisModel> {
    let dt = model.dt;
    let tol = 1e-12;
    // A = [[I, dt I], [0, I]]
    for i in 0..6 {
        for j in 0..6 {
            let want = if i == j {
                1.0
            } else if j == i + 3 {
                dt
            } else {
                0.0
            };
            if (model.a[(i, j)] - want).abs() > tol {
                return None;
            }
        }
    }
    // C selects positions
    for i in 0..3 {
        for j in 0..6 {
            let want = if i == j { 1.0 } else { 0.0 };
            if (model.c[(i, j)] - want).abs() > tol {
                return None;
            }
        }
    }
    // B: each axis driven by exactly one input, each input driving one axis
    let mut input = [usize::MAX; 3];
    let mut gain = [0.0; 3];
    let mut used = [false; 3];
    for a in 0..3 {
        let mut found = None;
        for j in 0..3 {
            let bv = model.b[(a + 3, j)];
            if bv.abs() > tol {
                if found.is_some() {
                    return None;
                }
                found = Some((j, bv / dt));
            }
        }
        let (j, g) = found?;
        if used[j] {
            return None;
        }
        used[j] = true;
        // position block must be dt^2/2 * gain
        if (model.b[(a, j)] - 0.5 * dt * dt * g).abs() > tol {
            return None;
        }
        for other in 0..3 {
            if other != a && model.b[(other, j)].abs() > tol {
                return None;
            }
            if other != a && model.b[(other + 3, j)].abs() > tol {
                return None;
            }
        }
        input[a] = j;
        gain[a] = g;
    }
    Some(AxisModel { input, gain })
}

fn validate_inputs(
    xj: &Trajectory,
    x_avoid: &Trajectory,
    tube: &RobustnessTube,
    d: &DecisionSequence,
) -> Result<usize> {
    let n = xj.len();
    if x_avoid.len() != n {
        return Err(Error::HorizonMismatch(n, x_avoid.len()));
    }
    if tube.len() != n {
        return Err(Error::HorizonMismatch(n, tube.len()));
    }
    if d.len() != n {
        return Err(Error::HorizonMismatch(n, d.len()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("avoidance needs a horizon of at least one step".into()));
    }
    if !tube.item(0).contains(&xj.position(0), 1e-9) {
        return Err(Error::CampcInfeasible("initial position outside the tube".into()));
    }
    Ok(n - 1)
}

/// Solve the avoidance LP. `xj` is this vehicle's pre-planned trajectory,
/// `x_avoid` the trajectory to separate from, `d` the commanded sides, and
/// `prty` the vehicle's role sign.
pub fn solve_campc(
    xj: &Trajectory,
    x_avoid: &Trajectory,
    tube: &RobustnessTube,
    d: &DecisionSequence,
    prty: Priority,
    model: &DynamicsModel,
    delta: f64,
) -> Result<CampcResult> {
    let h = validate_inputs(xj, x_avoid, tube, d)?;
    match axis_model(model) {
        Some(am) => solve_decomposed(xj, x_avoid, tube, d, prty, model, delta, h, &am),
        None => solve_campc_monolithic(xj, x_avoid, tube, d, prty, model, delta),
    }
}

/// Reference single-LP route: builds the full program with explicit state,
/// input, and slack variables. `solve_campc` delegates here when the model
/// lacks the canonical per-axis structure; tests cross-check both routes.
pub fn solve_campc_monolithic(
    xj: &Trajectory,
    x_avoid: &Trajectory,
    tube: &RobustnessTube,
    d: &DecisionSequence,
    prty: Priority,
    model: &DynamicsModel,
    delta: f64,
) -> Result<CampcResult> {
    let h = validate_inputs(xj, x_avoid, tube, d)?;
    let n_states = h + 1;
    let nu = 3 * h;
    let nx = 6 * n_states;
    let nl = n_states;
    let nv = nu + nx + nl;
    let u_at = |k: usize, c: usize| 3 * k + c;
    let x_at = |k: usize, c: usize| nu + 6 * k + c;
    let l_at = |k: usize| nu + nx + k;

    let mut p = LpProblem::new(nv);
    for k in 0..n_states {
        p.objective[l_at(k)] = 1.0;
        p.var_lo[l_at(k)] = 0.0;
        p.var_hi[l_at(k)] = f64::INFINITY;
    }
    for k in 0..h {
        for c in 0..3 {
            p.var_lo[u_at(k, c)] = model.input_bounds.lo[c];
            p.var_hi[u_at(k, c)] = model.input_bounds.hi[c];
        }
    }
    let x0 = xj.state(0).as_vector();
    for c in 0..6 {
        p.var_lo[x_at(0, c)] = x0[c];
        p.var_hi[x_at(0, c)] = x0[c];
    }
    for k in 1..n_states {
        let bx = tube.item(k);
        for c in 0..3 {
            p.var_lo[x_at(k, c)] = bx.lo[c];
            p.var_hi[x_at(k, c)] = bx.hi[c];
            p.var_lo[x_at(k, c + 3)] = model.velocity_bounds.lo[c];
            p.var_hi[x_at(k, c + 3)] = model.velocity_bounds.hi[c];
        }
    }

    // dynamics equalities: x_{k+1} - A x_k - B u_k = 0
    let me = 6 * h;
    let mut eq = DMatrix::zeros(me, nv);
    for k in 0..h {
        for r in 0..6 {
            let row = 6 * k + r;
            eq[(row, x_at(k + 1, r))] = 1.0;
            for c in 0..6 {
                eq[(row, x_at(k, c))] -= model.a[(r, c)];
            }
            for c in 0..3 {
                eq[(row, u_at(k, c))] -= model.b[(r, c)];
            }
        }
    }
    p.eq_lhs = eq;
    p.eq_rhs = DVector::zeros(me);

    // side constraints: -prty * M . p'_k - lambda_k <= q - prty * M . p_avoid_k
    let s = prty.sign();
    let mut ineq = DMatrix::zeros(n_states, nv);
    let mut rhs = DVector::zeros(n_states);
    let mut clearance = Vec::with_capacity(3 * n_states);
    for k in 0..n_states {
        let side = side_constraint(d.get(k), delta)?;
        for c in 0..3 {
            ineq[(k, x_at(k, c))] = -s * side.normal[c];
            if side.normal[c] != 0.0 && prty == Priority::Low {
                clearance.push((x_at(k, c), -s * side.normal[c]));
            }
        }
        ineq[(k, l_at(k))] = -1.0;
        rhs[k] = side.offset - s * side.normal.dot(&x_avoid.position(k));
    }
    p.ineq_lhs = ineq;
    p.ineq_rhs = rhs;

    let lambda_cols: Vec<usize> = (0..n_states).map(l_at).collect();
    let sol = solve_lexicographic(&mut p, &lambda_cols, &clearance)?;
    let x = match sol.status {
        SolveStatus::Optimal => sol.x.unwrap(),
        SolveStatus::Infeasible => {
            return Err(Error::CampcInfeasible(
                "tube, dynamics, and initial state admit no trajectory".into(),
            ))
        }
        other => return Err(Error::SolverFault(format!("unexpected LP status {other:?}"))),
    };

    let inputs: Vec<ControlInput> = (0..h)
        .map(|k| clamp_input(model, x[u_at(k, 0)], x[u_at(k, 1)], x[u_at(k, 2)]))
        .collect();
    let slacks: Vec<f64> = (0..n_states).map(|k| x[l_at(k)].max(0.0)).collect();
    finish(xj, model, inputs, slacks, tube)
}

#[allow(clippy::too_many_arguments)]
fn solve_decomposed(
    xj: &Trajectory,
    x_avoid: &Trajectory,
    tube: &RobustnessTube,
    d: &DecisionSequence,
    prty: Priority,
    model: &DynamicsModel,
    delta: f64,
    h: usize,
    am: &AxisModel,
) -> Result<CampcResult> {
    let n_states = h + 1;
    let s = prty.sign();
    let mut inputs = vec![ControlInput::zero(); h];
    let mut slacks = vec![0.0; n_states];

    for axis in 0..3 {
        // timesteps whose commanded side separates along this axis
        let mut ks: Vec<(usize, f64, f64)> = Vec::new(); // (k, sign, rhs)
        for k in 0..n_states {
            let side = side_constraint(d.get(k), delta)?;
            if side.axis() == axis {
                let sign = side.normal[axis];
                let rhs = side.offset - s * sign * x_avoid.position(k)[axis];
                ks.push((k, sign, rhs));
            }
        }

        let nl = ks.len();
        let nv = h + 2 * n_states + nl;
        let u_at = |k: usize| k;
        let p_at = |k: usize| h + k;
        let v_at = |k: usize| h + n_states + k;
        let l_at = |i: usize| h + 2 * n_states + i;

        let iu = am.input[axis];
        let gain = am.gain[axis];
        let dt = model.dt;

        let mut p = LpProblem::new(nv);
        for (i, _) in ks.iter().enumerate() {
            p.objective[l_at(i)] = 1.0;
            p.var_lo[l_at(i)] = 0.0;
        }
        for k in 0..h {
            p.var_lo[u_at(k)] = model.input_bounds.lo[iu];
            p.var_hi[u_at(k)] = model.input_bounds.hi[iu];
        }
        p.var_lo[p_at(0)] = xj.position(0)[axis];
        p.var_hi[p_at(0)] = xj.position(0)[axis];
        p.var_lo[v_at(0)] = xj.state(0).v[axis];
        p.var_hi[v_at(0)] = xj.state(0).v[axis];
        for k in 1..n_states {
            p.var_lo[p_at(k)] = tube.item(k).lo[axis];
            p.var_hi[p_at(k)] = tube.item(k).hi[axis];
            p.var_lo[v_at(k)] = model.velocity_bounds.lo[axis];
            p.var_hi[v_at(k)] = model.velocity_bounds.hi[axis];
        }

        let mut eq = DMatrix::zeros(2 * h, nv);
        for k in 0..h {
            let pr = 2 * k;
            eq[(pr, p_at(k + 1))] = 1.0;
            eq[(pr, p_at(k))] = -1.0;
            eq[(pr, v_at(k))] = -dt;
            eq[(pr, u_at(k))] = -0.5 * dt * dt * gain;
            let vr = 2 * k + 1;
            eq[(vr, v_at(k + 1))] = 1.0;
            eq[(vr, v_at(k))] = -1.0;
            eq[(vr, u_at(k))] = -dt * gain;
        }
        p.eq_lhs = eq;
        p.eq_rhs = DVector::zeros(2 * h);

        let mut ineq = DMatrix::zeros(nl, nv);
        let mut rhs = DVector::zeros(nl);
        let mut clearance = Vec::with_capacity(nl);
        for (i, &(k, sign, r)) in ks.iter().enumerate() {
            ineq[(i, p_at(k))] = -s * sign;
            ineq[(i, l_at(i))] = -1.0;
            rhs[i] = r;
            if prty == Priority::Low {
                clearance.push((p_at(k), -s * sign));
            }
        }
        p.ineq_lhs = ineq;
        p.ineq_rhs = rhs;

        let lambda_cols: Vec<usize> = (0..nl).map(l_at).collect();
        let sol = solve_lexicographic(&mut p, &lambda_cols, &clearance)?;
        let x = match sol.status {
            SolveStatus::Optimal => sol.x.unwrap(),
            SolveStatus::Infeasible => {
                return Err(Error::CampcInfeasible(format!(
                    "axis {axis}: tube, dynamics, and initial state admit no trajectory"
                )))
            }
            other => return Err(Error::SolverFault(format!("unexpected LP status {other:?}"))),
        };

        for k in 0..h {
            let v = x[u_at(k)];
            match iu {
                0 => inputs[k].roll = v,
                1 => inputs[k].pitch = v,
                _ => inputs[k].thrust = v,
            }
        }
        for (i, &(k, _, _)) in ks.iter().enumerate() {
            slacks[k] = x[l_at(i)].max(0.0);
        }
    }

    let inputs = inputs
        .into_iter()
        .map(|u| clamp_input(model, u.roll, u.pitch, u.thrust))
        .collect();
    finish(xj, model, inputs, slacks, tube)
}

/// Solve the slack LP lexicographically: first minimize the slack sum,
/// then, with the optimal sum pinned, push the trajectory as far onto the
/// commanded side as the tube allows. The second pass picks the most
/// separation-friendly point of the optimal face, which keeps the second
/// vehicle's follow-up solve feasible whenever the decisions came from a
/// feasible joint program; the slack optimum is unchanged.
fn solve_lexicographic(
    p: &mut LpProblem,
    lambda_cols: &[usize],
    clearance: &[(usize, f64)],
) -> Result<crate::lp::LpSolution> {
    let first = solve_lp(p)?;
    if first.status != SolveStatus::Optimal || clearance.is_empty() {
        return Ok(first);
    }
    let v = first.objective_value.expect("optimal carries value");
    let nv = p.num_vars();
    let mut row = DMatrix::zeros(1, nv);
    for &c in lambda_cols {
        row[(0, c)] = 1.0;
    }
    let extra = DMatrix::from_rows(&[row.row(0)]);
    let mut pinned = p.clone();
    pinned.ineq_lhs = stack_rows(&p.ineq_lhs, &extra);
    pinned.ineq_rhs = {
        let mut r = DVector::zeros(p.ineq_rhs.len() + 1);
        r.rows_mut(0, p.ineq_rhs.len()).copy_from(&p.ineq_rhs);
        r[p.ineq_rhs.len()] = v + LEX_TOL;
        r
    };
    pinned.objective = DVector::zeros(nv);
    for &(c, w) in clearance {
        pinned.objective[c] += w;
    }
    let second = solve_lp(&pinned)?;
    match second.status {
        // report the slack optimum, not the clearance objective
        SolveStatus::Optimal => Ok(crate::lp::LpSolution {
            status: SolveStatus::Optimal,
            objective_value: Some(v),
            x: second.x,
        }),
        // numerically pinched pin row: fall back to the first answer
        _ => Ok(first),
    }
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), b.ncols());
    if a.nrows() > 0 {
        out.rows_mut(0, a.nrows()).copy_from(a);
    }
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Snap LP round-off on the input box so the rollout input check passes.
fn clamp_input(model: &DynamicsModel, roll: f64, pitch: f64, thrust: f64) -> ControlInput {
    let lo = &model.input_bounds.lo;
    let hi = &model.input_bounds.hi;
    ControlInput::new(
        roll.clamp(lo[0], hi[0]),
        pitch.clamp(lo[1], hi[1]),
        thrust.clamp(lo[2], hi[2]),
    )
}

/// Re-roll the trajectory from the optimized inputs (dynamics hold exactly)
/// and package the result.
fn finish(
    xj: &Trajectory,
    model: &DynamicsModel,
    inputs: Vec<ControlInput>,
    slacks: Vec<f64>,
    tube: &RobustnessTube,
) -> Result<CampcResult> {
    let traj_new = rollout(model, xj.state(0), &inputs)?;
    if !tube.contains_trajectory(&traj_new, crate::lp::FEAS_TOL * 10.0)? {
        return Err(Error::SolverFault("optimized trajectory escaped its tube".into()));
    }
    let slack_sum = slacks.iter().sum();
    Ok(CampcResult { traj_new, inputs_new: inputs, slacks, slack_sum })
}

/// Recompute the slack a returned trajectory actually needs at step `k`;
/// used by the soundness property tests.
pub fn implied_slack(
    traj: &Trajectory,
    x_avoid: &Trajectory,
    d: &DecisionSequence,
    prty: Priority,
    delta: f64,
    k: usize,
) -> Result<f64> {
    let side = side_constraint(d.get(k), delta)?;
    let z = x_avoid.position(k) - traj.position(k);
    Ok((prty.sign() * side.normal.dot(&z) - side.offset).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{min_jerk_trajectory, DynamicsModel, Trajectory, UasState};
    use crate::geometry::tube_from_trajectory;
    use nalgebra::Vector3;

    fn hover(p: Vector3<f64>, len: usize) -> Trajectory {
        Trajectory::new(vec![UasState::at_rest(p); len], 0.1).unwrap()
    }

    fn all_fives(n: usize) -> DecisionSequence {
        DecisionSequence::new(vec![5; n]).unwrap()
    }

    #[test]
    fn already_separated_gives_zero_slack() {
        let model = DynamicsModel::default_model();
        let delta = 0.1;
        // side 5 demands p1 below p2 by delta; start already separated
        let xj = hover(Vector3::new(0.0, 0.0, -0.2), 11);
        let x_avoid = hover(Vector3::zeros(), 11);
        let tube = tube_from_trajectory(&xj, 0.055).unwrap();
        let r = solve_campc(&xj, &x_avoid, &tube, &all_fives(11), Priority::Low, &model, delta).unwrap();
        assert!(r.is_zero_slack(), "slack sum {}", r.slack_sum);
        assert!(tube.contains_trajectory(&r.traj_new, 1e-7).unwrap());
    }

    #[test]
    fn tight_tube_identical_trajectories_hand_computed_optimum() {
        // Both hover at the origin; tube radius 0.01 < delta / 2. The best
        // the vehicle can do is dive to the tube floor: lambda_0 = delta
        // (pinned start), lambda_k = delta - rho afterwards.
        let model = DynamicsModel::default_model();
        let delta = 0.1;
        let rho = 0.01;
        let xj = hover(Vector3::zeros(), 3);
        let x_avoid = hover(Vector3::zeros(), 3);
        let tube = tube_from_trajectory(&xj, rho).unwrap();
        let r = solve_campc(&xj, &x_avoid, &tube, &all_fives(3), Priority::Low, &model, delta).unwrap();
        let expected = delta + 2.0 * (delta - rho);
        assert!(
            (r.slack_sum - expected).abs() <= 1e-6,
            "slack {} vs hand-computed {expected}",
            r.slack_sum
        );
        assert!(r.slack_sum > 0.0);
    }

    #[test]
    fn decomposed_matches_monolithic() {
        let model = DynamicsModel::default_model();
        let delta = 0.1;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for trial in 0..12 {
            let a0 = Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 0.0);
            let b0 = -a0 + Vector3::new(0.02, -0.01, 0.01);
            let xj = min_jerk_trajectory(a0, -a0, 2.0, 0.1).unwrap();
            let xa = min_jerk_trajectory(b0, -b0, 2.0, 0.1).unwrap();
            let tube = tube_from_trajectory(&xj, 0.07).unwrap();
            let d = DecisionSequence::new((0..xj.len()).map(|_| rng.gen_range(1..=6)).collect()).unwrap();
            for prty in [Priority::Low, Priority::High] {
                let fast = solve_campc(&xj, &xa, &tube, &d, prty, &model, delta);
                let full = solve_campc_monolithic(&xj, &xa, &tube, &d, prty, &model, delta);
                match (fast, full) {
                    (Ok(fast), Ok(full)) => assert!(
                        (fast.slack_sum - full.slack_sum).abs() <= 1e-6,
                        "trial {trial}: decomposed {} vs monolithic {}",
                        fast.slack_sum,
                        full.slack_sum
                    ),
                    (Err(Error::CampcInfeasible(_)), Err(Error::CampcInfeasible(_))) => {}
                    (a, b) => panic!("trial {trial}: routes disagree: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn slack_soundness_recomputed_from_trajectory() {
        let model = DynamicsModel::default_model();
        let delta = 0.1;
        let xj = hover(Vector3::zeros(), 6);
        let x_avoid = hover(Vector3::new(0.03, 0.0, 0.0), 6);
        let tube = tube_from_trajectory(&xj, 0.04).unwrap();
        let d = DecisionSequence::new(vec![1; 6]).unwrap();
        let r = solve_campc(&xj, &x_avoid, &tube, &d, Priority::Low, &model, delta).unwrap();
        for k in 0..6 {
            let implied = implied_slack(&r.traj_new, &x_avoid, &d, Priority::Low, delta, k).unwrap();
            assert!(
                (r.slacks[k] - implied).abs() <= 1e-6,
                "k={k}: reported {} vs implied {implied}",
                r.slacks[k]
            );
        }
    }

    #[test]
    fn tube_monotonicity_in_rho() {
        let model = DynamicsModel::default_model();
        let delta = 0.1;
        let xj = hover(Vector3::zeros(), 5);
        let x_avoid = hover(Vector3::new(0.0, 0.02, 0.0), 5);
        let d = DecisionSequence::new(vec![3; 5]).unwrap();
        let mut last = f64::INFINITY;
        for rho in [0.01, 0.03, 0.055, 0.12] {
            let tube = tube_from_trajectory(&xj, rho).unwrap();
            let r = solve_campc(&xj, &x_avoid, &tube, &d, Priority::Low, &model, delta).unwrap();
            assert!(r.slack_sum <= last + 1e-9, "slack grew with rho {rho}");
            last = r.slack_sum;
        }
    }

    #[test]
    fn verify_separation_cases() {
        let t1 = hover(Vector3::zeros(), 4);
        let t2 = hover(Vector3::new(0.1, 0.0, 0.0), 4);
        assert!(verify_separation(&t1, &t2, 0.1).unwrap());
        assert!(!verify_separation(&t1, &t1, 0.1).unwrap());
    }

    #[test]
    fn infeasible_when_start_outside_tube() {
        let model = DynamicsModel::default_model();
        let xj = hover(Vector3::zeros(), 4);
        let x_avoid = hover(Vector3::zeros(), 4);
        let far = hover(Vector3::new(1.0, 0.0, 0.0), 4);
        let tube = tube_from_trajectory(&far, 0.05).unwrap();
        let err = solve_campc(&xj, &x_avoid, &tube, &all_fives(4), Priority::Low, &model, 0.1);
        assert!(matches!(err, Err(Error::CampcInfeasible(_))));
    }
}
