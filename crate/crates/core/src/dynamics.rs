//! Discrete-time linearized multirotor model, rollout utilities, and
//! minimum-jerk pre-planned trajectory generation.
//!
//! The vehicle is linearized around hover with inputs `u = (roll, pitch,
//! thrust)` expressed as deviations from the hover trim `(0, 0, m*g)`. The
//! continuous model is a per-axis double integrator driven by attitude and
//! thrust; because the continuous state matrix is nilpotent, the zero-order
//! hold discretization has an exact closed form.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Box3;
use crate::{Error, Result};

/// Tolerance on input-box membership checks; aligned with the LP
/// feasibility tolerance so LP-extracted inputs always pass.
const INPUT_TOL: f64 = 1e-7;

/// Full vehicle state: position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UasState {
    /// Position, meters.
    pub p: Vector3<f64>,
    /// Velocity, m/s.
    pub v: Vector3<f64>,
}

impl UasState {
    pub fn new(p: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { p, v }
    }

    pub fn at_rest(p: Vector3<f64>) -> Self {
        Self::new(p, Vector3::zeros())
    }

    pub fn as_vector(&self) -> SMatrix<f64, 6, 1> {
        SMatrix::<f64, 6, 1>::new(self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z)
    }

    pub fn from_vector(x: &SMatrix<f64, 6, 1>) -> Self {
        Self::new(Vector3::new(x[0], x[1], x[2]), Vector3::new(x[3], x[4], x[5]))
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }
}

/// Control input as deviation from hover: roll and pitch in radians,
/// thrust in newtons relative to `m*g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub roll: f64,
    pub pitch: f64,
    pub thrust: f64,
}

impl ControlInput {
    pub fn new(roll: f64, pitch: f64, thrust: f64) -> Self {
        Self { roll, pitch, thrust }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Component order matches the columns of the input matrix B.
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.thrust)
    }

    pub fn from_vector(u: &Vector3<f64>) -> Self {
        Self::new(u.x, u.y, u.z)
    }
}

/// Discrete-time linear model `x_{k+1} = A x_k + B u_k`, `p_k = C x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    /// 6x6 state matrix (exact ZOH discretization).
    pub a: SMatrix<f64, 6, 6>,
    /// 6x3 input matrix (exact ZOH discretization).
    pub b: SMatrix<f64, 6, 3>,
    /// 3x6 observation matrix selecting the position block.
    pub c: SMatrix<f64, 3, 6>,
    /// Sampling period, seconds.
    pub dt: f64,
    /// Vehicle mass, kg.
    pub m: f64,
    /// Gravity, m/s^2.
    pub g: f64,
    /// Input box U over (roll, pitch, thrust deviation).
    pub input_bounds: Box3,
    /// Velocity box (positions are constrained elsewhere, by the tubes).
    pub velocity_bounds: Box3,
}

impl DynamicsModel {
    /// Continuous-time input block: rows give (x_ddot, y_ddot, z_ddot) as a
    /// function of (roll, pitch, thrust deviation).
    fn input_block(m: f64, g: f64) -> Matrix3<f64> {
        Matrix3::new(0.0, g, 0.0, -g, 0.0, 0.0, 0.0, 0.0, 1.0 / m)
    }

    pub fn contains_input(&self, u: &ControlInput) -> bool {
        self.input_bounds.contains(&u.as_vector(), INPUT_TOL)
    }

    /// Default desk-scale model: dt = 0.1 s, m = 1 kg, g = 9.81 m/s^2,
    /// roll/pitch within +-0.5236 rad, thrust deviation within +-0.5*m*g,
    /// velocities within +-5 m/s per axis.
    pub fn default_model() -> Self {
        let m = 1.0;
        let g = 9.81;
        let tilt = 0.5236;
        let thrust = 0.5 * m * g;
        let input_bounds = Box3::new(
            Vector3::new(-tilt, -tilt, -thrust),
            Vector3::new(tilt, tilt, thrust),
        )
        .expect("static bounds");
        let velocity_bounds = Box3::cube(Vector3::zeros(), 5.0);
        build_model(0.1, m, g, input_bounds, velocity_bounds).expect("static model")
    }
}

/// Build the exact zero-order-hold discretization of the hover-linearized
/// model. The continuous matrices are `A_c = [[0, I], [0, 0]]` and
/// `B_c = [[0], [B2]]`; since `A_c` is nilpotent of index 2 the discrete
/// matrices are `A = [[I, dt*I], [0, I]]` and `B = [[dt^2/2 * B2], [dt * B2]]`.
pub fn build_model(
    dt: f64,
    m: f64,
    g: f64,
    input_bounds: Box3,
    velocity_bounds: Box3,
) -> Result<DynamicsModel> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("mass must be positive, got {m}")));
    }
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidArgument(format!("gravity must be positive, got {g}")));
    }

    let b2 = DynamicsModel::input_block(m, g);
    let mut a = SMatrix::<f64, 6, 6>::identity();
    let mut b = SMatrix::<f64, 6, 3>::zeros();
    for i in 0..3 {
        a[(i, i + 3)] = dt;
        for j in 0..3 {
            b[(i, j)] = 0.5 * dt * dt * b2[(i, j)];
            b[(i + 3, j)] = dt * b2[(i, j)];
        }
    }
    let mut c = SMatrix::<f64, 3, 6>::zeros();
    for i in 0..3 {
        c[(i, i)] = 1.0;
    }

    Ok(DynamicsModel { a, b, c, dt, m, g, input_bounds, velocity_bounds })
}

/// Advance one step: `A x + B u`. Rejects inputs outside U.
pub fn step(model: &DynamicsModel, x: &UasState, u: &ControlInput) -> Result<UasState> {
    if !model.contains_input(u) {
        return Err(Error::InputOutOfBounds(format!("{u:?}")));
    }
    Ok(step_unchecked(model, x, u))
}

/// `A x + B u` without the input-box check.
pub fn step_unchecked(model: &DynamicsModel, x: &UasState, u: &ControlInput) -> UasState {
    let xv = model.a * x.as_vector() + model.b * u.as_vector();
    UasState::from_vector(&xv)
}

/// Time-indexed sequence of vehicle states at fixed step `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    states: Vec<UasState>,
    dt: f64,
}

impl Trajectory {
    pub fn new(states: Vec<UasState>, dt: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("trajectory must contain at least one state".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !states.iter().all(UasState::is_finite) {
            return Err(Error::InvalidArgument("trajectory contains non-finite state".into()));
        }
        Ok(Self { states, dt })
    }

    pub fn states(&self) -> &[UasState] {
        &self.states
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of samples (horizon H + 1).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Horizon H: number of steps between the first and last sample.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, k: usize) -> &UasState {
        &self.states[k]
    }

    pub fn position(&self, k: usize) -> Vector3<f64> {
        self.states[k].p
    }

    /// Remaining trajectory after discarding the first `n` samples.
    pub fn suffix(&self, n: usize) -> Result<Self> {
        if n >= self.states.len() {
            return Err(Error::InvalidArgument(format!(
                "suffix start {n} out of range for trajectory of length {}",
                self.states.len()
            )));
        }
        Trajectory::new(self.states[n..].to_vec(), self.dt)
    }

    /// Largest inf-norm distance violation helper: minimum over timesteps of
    /// the pairwise inf-norm distance to `other`.
    pub fn min_separation(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::HorizonMismatch(self.len(), other.len()));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a.p - b.p).amax())
            .fold(f64::INFINITY, f64::min))
    }
}

/// Apply `step` sequentially from `x0`. The result has `inputs.len() + 1`
/// states.
pub fn rollout(model: &DynamicsModel, x0: &UasState, inputs: &[ControlInput]) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(*x0);
    let mut x = *x0;
    for u in inputs {
        x = step(model, &x, u)?;
        states.push(x);
    }
    Trajectory::new(states, model.dt)
}

/// Quintic rest-to-rest position profile: s(0)=0, s(1)=1, zero velocity and
/// acceleration at both ends.
fn quintic(tau: f64) -> (f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let t5 = t4 * tau;
    let s = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let sdot = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    (s, sdot)
}

fn steps_of(t_total: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_total > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration and dt must be positive, got T={t_total}, dt={dt}"
        )));
    }
    let n = (t_total / dt).round();
    if (t_total - n * dt).abs() > 1e-9 * t_total.max(1.0) || n < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "duration {t_total} is not a positive multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

/// Jerk-minimizing rest-to-rest trajectory from `start` to `goal` over `T`
/// seconds, sampled every `dt`. Velocities come from the analytic
/// derivative of the quintic.
pub fn min_jerk_trajectory(
    start: Vector3<f64>,
    goal: Vector3<f64>,
    t_total: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = steps_of(t_total, dt)?;
    let delta = goal - start;
    let mut states = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let tau = k as f64 / n as f64;
        let (s, sdot) = quintic(tau);
        // endpoints are exact: sdot vanishes at both ends and the final
        // position is pinned to the goal rather than start + delta
        let p = if k == n { goal } else { start + delta * s };
        states.push(UasState::new(p, delta * (sdot / t_total)));
    }
    Trajectory::new(states, dt)
}

/// Concatenation of rest-to-rest segments through `points`, with per-segment
/// durations `segment_steps[i] * dt`. Interior waypoints are sampled once.
pub fn min_jerk_through(points: &[Vector3<f64>], segment_steps: &[usize], dt: f64) -> Result<Trajectory> {
    if points.len() < 2 || segment_steps.len() != points.len() - 1 {
        return Err(Error::InvalidArgument(
            "need at least two waypoints and one duration per segment".into(),
        ));
    }
    let mut states: Vec<UasState> = Vec::new();
    for (i, w) in points.windows(2).enumerate() {
        let n = segment_steps[i];
        if n == 0 {
            return Err(Error::InvalidArgument("segment must span at least one step".into()));
        }
        let seg = min_jerk_trajectory(w[0], w[1], n as f64 * dt, dt)?;
        let skip = usize::from(i > 0);
        states.extend_from_slice(&seg.states()[skip..]);
    }
    Trajectory::new(states, dt)
}
