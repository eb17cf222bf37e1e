//! Scenario descriptions, their JSON schema, and the generators for the
//! colliding-pair, position-swap, and unit-cube experiments.
//!
//! A scenario stores the generative description (starts, goals, optional
//! via waypoints); pre-planned trajectories are rebuilt deterministically
//! with the minimum-jerk planner, so a scenario file fully reproduces a
//! run.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{min_jerk_through, min_jerk_trajectory, Trajectory};
use crate::geometry::{conflict_indices, tube_from_trajectory, Box3, RobustnessTube};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One vehicle's mission entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioUas {
    pub id: u32,
    /// Total order; lower value moves first during pairwise resolution.
    pub priority: i32,
    pub start: [f64; 3],
    pub goal: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<[f64; 3]>>,
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_total: f64,
    pub delta: f64,
    pub rho: f64,
    pub seed: u64,
    pub uas: Vec<ScenarioUas>,
    pub nofly: Vec<Box3>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported scenario schema version {}",
                self.schema_version
            )));
        }
        if !(self.dt > 0.0) || !(self.t_total > 0.0) || !(self.delta > 0.0) || !(self.rho > 0.0) {
            return Err(Error::InvalidArgument("dt, T, delta, rho must be positive".into()));
        }
        if self.rho < self.delta / 2.0 - 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "tube radius {} below delta/2 = {}",
                self.rho,
                self.delta / 2.0
            )));
        }
        if self.uas.is_empty() {
            return Err(Error::InvalidArgument("scenario has no vehicles".into()));
        }
        let mut prios: Vec<i32> = self.uas.iter().map(|u| u.priority).collect();
        prios.sort_unstable();
        prios.dedup();
        if prios.len() != self.uas.len() {
            return Err(Error::InvalidArgument("priorities must be distinct".into()));
        }
        let mut ids: Vec<u32> = self.uas.iter().map(|u| u.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.uas.len() {
            return Err(Error::InvalidArgument("vehicle ids must be distinct".into()));
        }
        for b in &self.nofly {
            if !b.is_finite() {
                return Err(Error::InvalidArgument("no-fly boxes must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn horizon_steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    /// Rebuild every vehicle's pre-planned trajectory.
    pub fn build_trajectories(&self) -> Result<Vec<Trajectory>> {
        self.uas.iter().map(|u| build_plan(u, self.t_total, self.dt)).collect()
    }

    /// Tubes of radius `rho` (or an override) around the pre-plans.
    pub fn build_tubes(&self, trajectories: &[Trajectory], rho: Option<f64>) -> Result<Vec<RobustnessTube>> {
        trajectories
            .iter()
            .map(|t| tube_from_trajectory(t, rho.unwrap_or(self.rho)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario =
            serde_json::from_str(s).map_err(|e| Error::CorruptFile(format!("scenario JSON: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }
}

fn build_plan(u: &ScenarioUas, t_total: f64, dt: f64) -> Result<Trajectory> {
    let start = Vector3::from(u.start);
    let goal = Vector3::from(u.goal);
    match &u.waypoints {
        None => min_jerk_trajectory(start, goal, t_total, dt),
        Some(ws) => {
            let mut pts = Vec::with_capacity(ws.len() + 2);
            pts.push(start);
            pts.extend(ws.iter().map(|w| Vector3::from(*w)));
            pts.push(goal);
            let steps = split_steps(&pts, (t_total / dt).round() as usize);
            min_jerk_through(&pts, &steps, dt)
        }
    }
}

/// Split `total` steps across segments proportionally to their lengths,
/// keeping every segment at least one step.
fn split_steps(points: &[Vector3<f64>], total: usize) -> Vec<usize> {
    let nseg = points.len() - 1;
    let lens: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).norm().max(1e-9)).collect();
    let sum: f64 = lens.iter().sum();
    let mut steps: Vec<usize> = lens
        .iter()
        .map(|l| ((l / sum * total as f64).round() as usize).max(1))
        .collect();
    // fix rounding drift on the last segment
    let assigned: usize = steps.iter().sum();
    if assigned != total {
        let last = nseg - 1;
        let correction = total as isize - assigned as isize + steps[last] as isize;
        steps[last] = correction.max(1) as usize;
        // if the correction drove another segment negative-equivalent,
        // rebalance from the largest segment
        let assigned: usize = steps.iter().sum();
        if assigned != total {
            let (imax, _) = steps.iter().enumerate().max_by_key(|(_, &s)| s).unwrap();
            steps[imax] = (steps[imax] as isize + total as isize - assigned as isize).max(1) as usize;
        }
    }
    steps
}

fn sample_cube(rng: &mut ChaCha8Rng, center: Vector3<f64>, half: f64) -> Vector3<f64> {
    Vector3::new(
        center.x + rng.gen_range(-half..half),
        center.y + rng.gen_range(-half..half),
        center.z + rng.gen_range(-half..half),
    )
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random conflicting pair: starts and goals sampled from two cubes of
/// half-width `cube_half_width` placed on opposite sides of
/// `collision_point` along a random direction; the two vehicles fly in
/// opposite directions so the pre-plans meet near the midpoint. Resamples
/// until the pre-plans actually conflict.
#[allow(clippy::too_many_arguments)]
pub fn gen_colliding_pair(
    seed: u64,
    collision_point: Vector3<f64>,
    cube_half_width: f64,
    t_total: f64,
    dt: f64,
    delta: f64,
    rho: f64,
) -> Result<Scenario> {
    if !(cube_half_width > 0.0) {
        return Err(Error::InvalidArgument("cube half-width must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = 3.0 * cube_half_width;
    let budget = 500;
    for _ in 0..budget {
        let dir = random_unit(&mut rng);
        let ca = collision_point - dir * offset;
        let cb = collision_point + dir * offset;
        let s1 = sample_cube(&mut rng, ca, cube_half_width);
        let g1 = sample_cube(&mut rng, cb, cube_half_width);
        let s2 = sample_cube(&mut rng, cb, cube_half_width);
        let g2 = sample_cube(&mut rng, ca, cube_half_width);
        let t1 = min_jerk_trajectory(s1, g1, t_total, dt)?;
        let t2 = min_jerk_trajectory(s2, g2, t_total, dt)?;
        if conflict_indices(&t1, &t2, delta)?.is_empty() {
            continue;
        }
        let sc = Scenario {
            schema_version: SCHEMA_VERSION,
            dt,
            t_total,
            delta,
            rho,
            seed,
            uas: vec![
                ScenarioUas { id: 1, priority: 1, start: s1.into(), goal: g1.into(), waypoints: None },
                ScenarioUas { id: 2, priority: 2, start: s2.into(), goal: g2.into(), waypoints: None },
            ],
            nofly: Vec::new(),
        };
        sc.validate()?;
        return Ok(sc);
    }
    Err(Error::ResampleBudget(budget))
}

/// The fixed four-vehicle position-swap case: goals on the unit circle,
/// starts antipodal, simultaneous crossing at the origin at T/2.
pub fn gen_position_swap() -> Scenario {
    let goals = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
    let uas = goals
        .iter()
        .enumerate()
        .map(|(i, g)| ScenarioUas {
            id: (i + 1) as u32,
            priority: (i + 1) as i32,
            start: [-g[0], -g[1], -g[2]],
            goal: *g,
            waypoints: None,
        })
        .collect();
    Scenario {
        schema_version: SCHEMA_VERSION,
        dt: 0.1,
        t_total: 4.0,
        delta: 0.1,
        rho: 0.055,
        seed: 0,
        uas,
        nofly: Vec::new(),
    }
}

/// High-density scenario: vehicles cross a unit cube between opposite
/// random faces while avoiding a central no-fly box of side 0.2. Straight
/// pre-plans that clip the no-fly box get a single lateral via-point
/// detour.
pub fn gen_unit_cube(n_uas: usize, seed: u64, delta: f64, rho: f64) -> Result<Scenario> {
    if n_uas < 2 {
        return Err(Error::InvalidArgument("unit-cube scenario needs at least two vehicles".into()));
    }
    let dt = 0.1;
    let t_total = 4.0;
    let nofly = Box3::cube(Vector3::new(0.5, 0.5, 0.5), 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uas = Vec::with_capacity(n_uas);
    let budget = 200 * n_uas;
    let mut attempts = 0;
    while uas.len() < n_uas {
        attempts += 1;
        if attempts > budget {
            return Err(Error::ResampleBudget(budget));
        }
        let axis = rng.gen_range(0..3usize);
        let side = rng.gen_range(0..2usize) as f64;
        let mut start = Vector3::new(rng.gen(), rng.gen(), rng.gen());
        let mut goal = Vector3::new(rng.gen(), rng.gen(), rng.gen());
        start[axis] = side;
        goal[axis] = 1.0 - side;

        let entry = match plan_around(&start, &goal, &nofly, t_total, dt)? {
            Some(waypoints) => ScenarioUas {
                id: (uas.len() + 1) as u32,
                priority: (uas.len() + 1) as i32,
                start: start.into(),
                goal: goal.into(),
                waypoints,
            },
            None => continue,
        };
        uas.push(entry);
    }
    let sc = Scenario {
        schema_version: SCHEMA_VERSION,
        dt,
        t_total,
        delta,
        rho,
        seed,
        uas,
        nofly: vec![nofly],
    };
    sc.validate()?;
    Ok(sc)
}

/// Find a pre-plan from start to goal that clears the no-fly box: straight
/// if possible, otherwise the first single-via-point detour that works.
/// Returns the waypoint list (None entry = straight), or None when no
/// candidate works and the caller should resample.
fn plan_around(
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    nofly: &Box3,
    t_total: f64,
    dt: f64,
) -> Result<Option<Option<Vec<[f64; 3]>>>> {
    let clear = |t: &Trajectory| t.states().iter().all(|s| !nofly.contains(&s.p, 0.0));
    let straight = min_jerk_trajectory(*start, *goal, t_total, dt)?;
    if clear(&straight) {
        return Ok(Some(None));
    }
    let mid = (start + goal) * 0.5;
    let n = (t_total / dt).round() as usize;
    // lateral offsets past the box face, both signs, each free axis
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut via = mid;
            via[axis] = 0.5 + sign * 0.35;
            if !(0.0..=1.0).contains(&via[axis]) {
                continue;
            }
            let pts = [*start, via, *goal];
            let steps = split_steps(&pts, n);
            let t = min_jerk_through(&pts, &steps, dt)?;
            if clear(&t) {
                return Ok(Some(Some(vec![via.into()])));
            }
        }
    }
    Ok(None)
}
