//! Pairwise two-stage collision avoidance, decision repair, and the
//! multi-vehicle loop with priorities, tube shrinking, and receding-horizon
//! application.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::campc::{solve_campc, verify_separation, Priority};
use crate::dynamics::{ControlInput, DynamicsModel, Trajectory};
use crate::geometry::{conflict_indices, shrink_tubes, DecisionSequence, RobustnessTube};
use crate::policy::{repair_sequences, CrOutput, CrPolicy};
use crate::{Error, Result, ZERO_SLACK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStatus {
    /// The lower-priority vehicle separated alone; the other keeps its plan.
    Stage1Separated,
    /// The higher-priority vehicle's follow-up solve certified separation.
    Stage2Separated,
    /// Neither stage reached zero slack, but the resulting trajectories are
    /// separated anyway (the side constraints are conservative).
    SeparatedDespiteSlack,
    Failed,
}

impl PairStatus {
    pub fn separated(self) -> bool {
        self != PairStatus::Failed
    }

    pub fn token(self) -> &'static str {
        match self {
            PairStatus::Stage1Separated => "stage1",
            PairStatus::Stage2Separated => "stage2",
            PairStatus::SeparatedDespiteSlack => "slack_sep",
            PairStatus::Failed => "failed",
        }
    }
}

/// Outcome of one pairwise resolution attempt.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub status: PairStatus,
    pub traj1_new: Trajectory,
    pub traj2_new: Trajectory,
    /// `None` means the vehicle keeps its current plan unchanged.
    pub inputs1: Option<Vec<ControlInput>>,
    pub inputs2: Option<Vec<ControlInput>>,
    /// Stage slack sums; the second entry is present only when stage 2 ran.
    pub slack_sums: (f64, Option<f64>),
    pub decisions_used: DecisionSequence,
    pub repairs_attempted: u8,
    /// Failure detail (infeasible stage, re-check mismatch).
    pub diagnostic: Option<String>,
}

/// Run the two stages for a fixed decision sequence.
#[allow(clippy::too_many_arguments)]
fn attempt_pair(
    x1: &Trajectory,
    x2: &Trajectory,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    out: &CrOutput,
    d: &DecisionSequence,
    model: &DynamicsModel,
    delta: f64,
) -> Result<PairOutcome> {
    let base = |status: PairStatus| PairOutcome {
        status,
        traj1_new: x1.clone(),
        traj2_new: x2.clone(),
        inputs1: None,
        inputs2: None,
        slack_sums: (f64::NAN, None),
        decisions_used: d.clone(),
        repairs_attempted: 0,
        diagnostic: None,
    };
    let _ = out;

    let stage1 = match solve_campc(x1, x2, tube1, d, Priority::Low, model, delta) {
        Ok(s) => s,
        Err(Error::CampcInfeasible(m)) => {
            let mut o = base(PairStatus::Failed);
            o.diagnostic = Some(format!("stage 1 infeasible: {m}"));
            return Ok(o);
        }
        Err(e) => return Err(e),
    };

    if stage1.slack_sum <= ZERO_SLACK_TOL {
        let mut o = base(PairStatus::Stage1Separated);
        o.traj1_new = stage1.traj_new;
        o.inputs1 = Some(stage1.inputs_new);
        o.slack_sums = (stage1.slack_sum, None);
        return Ok(verify_outcome(o, tube1, tube2, delta));
    }

    let stage2 = match solve_campc(x2, &stage1.traj_new, tube2, d, Priority::High, model, delta) {
        Ok(s) => s,
        Err(Error::CampcInfeasible(m)) => {
            let mut o = base(PairStatus::Failed);
            o.traj1_new = stage1.traj_new;
            o.slack_sums = (stage1.slack_sum, None);
            o.diagnostic = Some(format!("stage 2 infeasible: {m}"));
            return Ok(o);
        }
        Err(e) => return Err(e),
    };

    let mut o = base(PairStatus::Failed);
    o.traj1_new = stage1.traj_new;
    o.traj2_new = stage2.traj_new;
    o.inputs1 = Some(stage1.inputs_new);
    o.inputs2 = Some(stage2.inputs_new);
    o.slack_sums = (stage1.slack_sum, Some(stage2.slack_sum));

    if stage2.slack_sum <= ZERO_SLACK_TOL {
        o.status = PairStatus::Stage2Separated;
    } else if verify_separation(&o.traj1_new, &o.traj2_new, delta)? {
        o.status = PairStatus::SeparatedDespiteSlack;
    } else {
        o.status = PairStatus::Failed;
        return Ok(o);
    }
    Ok(verify_outcome(o, tube1, tube2, delta))
}

/// Independent re-check of the separation and containment claims carried by
/// a non-failed status; any mismatch demotes the outcome.
fn verify_outcome(
    mut o: PairOutcome,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    delta: f64,
) -> PairOutcome {
    let tol = 1e-6;
    let ok = verify_separation(&o.traj1_new, &o.traj2_new, delta).unwrap_or(false)
        && tube1.contains_trajectory(&o.traj1_new, tol).unwrap_or(false)
        && tube2.contains_trajectory(&o.traj2_new, tol).unwrap_or(false);
    if !ok {
        o.diagnostic = Some(format!("re-check failed for claimed status {:?}", o.status));
        o.status = PairStatus::Failed;
    }
    o
}

/// Two-stage pairwise collision avoidance for a conflicting pair: the
/// lower-priority vehicle moves first against the other's plan; if it
/// cannot reach zero slack the other vehicle solves against the updated
/// trajectory.
pub fn deconflict_pair(
    x1: &Trajectory,
    x2: &Trajectory,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    cr: &CrPolicy,
    model: &DynamicsModel,
    delta: f64,
) -> Result<PairOutcome> {
    if conflict_indices(x1, x2, delta)?.is_empty() {
        return Err(Error::NoConflict);
    }
    let out = cr.decide(x1, x2, tube1, tube2, model, delta)?;
    let d = out.decisions.clone();
    attempt_pair(x1, x2, tube1, tube2, &out, &d, model, delta)
}

/// [`deconflict_pair`], retrying failed outcomes with the five repaired
/// decision sequences (the s-th most probable class at every colliding
/// timestep, s = 2..=6). The first non-failed attempt wins; if all fail the
/// original outcome is returned with `repairs_attempted = 5`.
pub fn deconflict_pair_with_repair(
    x1: &Trajectory,
    x2: &Trajectory,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    cr: &CrPolicy,
    model: &DynamicsModel,
    delta: f64,
) -> Result<PairOutcome> {
    if conflict_indices(x1, x2, delta)?.is_empty() {
        return Err(Error::NoConflict);
    }
    let out = cr.decide(x1, x2, tube1, tube2, model, delta)?;
    let d = out.decisions.clone();
    let first = attempt_pair(x1, x2, tube1, tube2, &out, &d, model, delta)?;
    if first.status.separated() {
        return Ok(first);
    }

    let collisions = conflict_indices(&first.traj1_new, &first.traj2_new, delta)?;
    if collisions.is_empty() {
        // failed status with no remaining conflict cannot happen (a failed
        // outcome is exactly a separation violation), but stay defensive
        return Ok(first);
    }
    let candidates = repair_sequences(&d, &out.probabilities, &collisions)?;
    for (idx, dd) in candidates.iter().enumerate() {
        let mut retry = attempt_pair(x1, x2, tube1, tube2, &out, dd, model, delta)?;
        if retry.status.separated() {
            retry.repairs_attempted = (idx + 1) as u8;
            return Ok(retry);
        }
    }
    let mut failed = first;
    failed.repairs_attempted = 5;
    Ok(failed)
}

/// One vehicle's current plan inside a fleet.
#[derive(Debug, Clone)]
pub struct UasPlan {
    pub id: u32,
    /// Total order; lower priority moves first in pairwise resolution.
    pub priority: i32,
    pub traj: Trajectory,
    pub tube: RobustnessTube,
}

/// The fleet's shared view: one plan per vehicle, equal horizons.
#[derive(Debug, Clone)]
pub struct FleetState {
    uas: Vec<UasPlan>,
}

impl FleetState {
    pub fn new(uas: Vec<UasPlan>) -> Result<Self> {
        if uas.is_empty() {
            return Err(Error::InvalidArgument("fleet is empty".into()));
        }
        let len = uas[0].traj.len();
        let dt = uas[0].traj.dt();
        let mut prios = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for u in &uas {
            if u.traj.len() != len || u.tube.len() != len {
                return Err(Error::HorizonMismatch(u.traj.len(), len));
            }
            if (u.traj.dt() - dt).abs() > 1e-12 {
                return Err(Error::InvalidArgument("fleet trajectories disagree on dt".into()));
            }
            if !prios.insert(u.priority) {
                return Err(Error::InvalidArgument(format!("duplicate priority {}", u.priority)));
            }
            if !ids.insert(u.id) {
                return Err(Error::InvalidArgument(format!("duplicate id {}", u.id)));
            }
        }
        Ok(Self { uas })
    }

    pub fn plans(&self) -> &[UasPlan] {
        &self.uas
    }

    pub fn len(&self) -> usize {
        self.uas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uas.is_empty()
    }

    pub fn by_id(&self, id: u32) -> Option<&UasPlan> {
        self.uas.iter().find(|u| u.id == id)
    }

    fn index_of(&self, id: u32) -> usize {
        self.uas.iter().position(|u| u.id == id).expect("known id")
    }

    /// Vehicle ids sorted by ascending priority.
    pub fn priority_order(&self) -> Vec<u32> {
        let mut ids: Vec<(i32, u32)> = self.uas.iter().map(|u| (u.priority, u.id)).collect();
        ids.sort_unstable();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    /// Smallest pairwise inf-norm separation across the fleet.
    pub fn min_pairwise_separation(&self) -> Result<f64> {
        let mut best = f64::INFINITY;
        for i in 0..self.uas.len() {
            for j in i + 1..self.uas.len() {
                best = best.min(self.uas[i].traj.min_separation(&self.uas[j].traj)?);
            }
        }
        Ok(best)
    }

    /// Drop the first sample of every plan (receding-horizon advance).
    pub fn advance(&self) -> Result<FleetState> {
        let uas = self
            .uas
            .iter()
            .map(|u| {
                Ok(UasPlan {
                    id: u.id,
                    priority: u.priority,
                    traj: u.traj.suffix(1)?,
                    tube: u.tube.suffix(1)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FleetState::new(uas)
    }
}

/// Ids of vehicles in conflict with `id`, ordered by ascending priority.
pub fn detect_conflicts(fleet: &FleetState, id: u32, delta: f64) -> Result<Vec<u32>> {
    let me = fleet
        .by_id(id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown vehicle id {id}")))?;
    let mut found: Vec<(i32, u32)> = Vec::new();
    for other in &fleet.uas {
        if other.id == id {
            continue;
        }
        if !conflict_indices(&me.traj, &other.traj, delta)?.is_empty() {
            found.push((other.priority, other.id));
        }
    }
    found.sort_unstable();
    Ok(found.into_iter().map(|(_, id)| id).collect())
}

/// Per-pair record of one resolution attempt inside a fleet step.
#[derive(Debug, Clone)]
pub struct PairRecord {
    pub uas_i: u32,
    pub uas_j: u32,
    pub status: PairStatus,
    pub slack1: f64,
    pub slack2: Option<f64>,
    pub repairs: u8,
    /// Pair separation after the attempt.
    pub min_sep: f64,
    pub micros: u128,
    pub note: Option<String>,
}

/// Result of one fleet resolution step.
#[derive(Debug, Clone)]
pub struct FleetStepResult {
    pub fleet: FleetState,
    pub outcomes: Vec<PairRecord>,
    pub l2f_call_count: usize,
    pub unresolved: Vec<(u32, u32)>,
}

/// One pass of pairwise resolution over the fleet: every vehicle, in
/// priority order, resolves its conflict set; each resolved pair's tubes
/// are shrunk before later pairs run, which is what prevents later fixes
/// from re-colliding earlier ones. Each unordered pair is attempted at most
/// once, so the number of pairwise applications is at most n(n-1)/2.
pub fn fleet_step(
    fleet: &FleetState,
    cr: &CrPolicy,
    model: &DynamicsModel,
    delta: f64,
    repair: bool,
) -> Result<FleetStepResult> {
    let mut state = fleet.clone();
    let mut outcomes = Vec::new();
    let mut unresolved = Vec::new();
    let mut attempted: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut calls = 0usize;
    let n = state.len();

    for i in state.priority_order() {
        for j in detect_conflicts(&state, i, delta)? {
            let key = (i.min(j), i.max(j));
            if attempted.contains(&key) {
                continue;
            }
            // roles: the lower-priority vehicle moves first
            let (pi, pj) = (state.by_id(i).unwrap().priority, state.by_id(j).unwrap().priority);
            let (id1, id2) = if pi < pj { (i, j) } else { (j, i) };
            let (a, b) = (state.index_of(id1), state.index_of(id2));

            // commits from earlier pairs may have already separated this one
            if conflict_indices(&state.uas[a].traj, &state.uas[b].traj, delta)?.is_empty() {
                continue;
            }
            attempted.insert(key);
            calls += 1;

            let t0 = Instant::now();
            let run = if repair {
                deconflict_pair_with_repair(
                    &state.uas[a].traj,
                    &state.uas[b].traj,
                    &state.uas[a].tube,
                    &state.uas[b].tube,
                    cr,
                    model,
                    delta,
                )
            } else {
                deconflict_pair(
                    &state.uas[a].traj,
                    &state.uas[b].traj,
                    &state.uas[a].tube,
                    &state.uas[b].tube,
                    cr,
                    model,
                    delta,
                )
            };
            let micros = t0.elapsed().as_micros();

            match run {
                Ok(out) if out.status.separated() => {
                    match shrink_tubes(
                        &out.traj1_new,
                        &out.traj2_new,
                        &state.uas[a].tube,
                        &state.uas[b].tube,
                        delta,
                    ) {
                        Ok((s1, s2)) => {
                            let min_sep = out.traj1_new.min_separation(&out.traj2_new)?;
                            state.uas[a].traj = out.traj1_new;
                            state.uas[b].traj = out.traj2_new;
                            state.uas[a].tube = s1;
                            state.uas[b].tube = s2;
                            outcomes.push(PairRecord {
                                uas_i: id1,
                                uas_j: id2,
                                status: out.status,
                                slack1: out.slack_sums.0,
                                slack2: out.slack_sums.1,
                                repairs: out.repairs_attempted,
                                min_sep,
                                micros,
                                note: None,
                            });
                        }
                        Err(e) => {
                            unresolved.push(key);
                            outcomes.push(PairRecord {
                                uas_i: id1,
                                uas_j: id2,
                                status: PairStatus::Failed,
                                slack1: out.slack_sums.0,
                                slack2: out.slack_sums.1,
                                repairs: out.repairs_attempted,
                                min_sep: out.traj1_new.min_separation(&out.traj2_new)?,
                                micros,
                                note: Some(format!("shrink failed: {e}")),
                            });
                        }
                    }
                }
                Ok(out) => {
                    unresolved.push(key);
                    outcomes.push(PairRecord {
                        uas_i: id1,
                        uas_j: id2,
                        status: PairStatus::Failed,
                        slack1: out.slack_sums.0,
                        slack2: out.slack_sums.1,
                        repairs: out.repairs_attempted,
                        min_sep: out.traj1_new.min_separation(&out.traj2_new)?,
                        micros,
                        note: out.diagnostic,
                    });
                }
                Err(e) => {
                    unresolved.push(key);
                    outcomes.push(PairRecord {
                        uas_i: id1,
                        uas_j: id2,
                        status: PairStatus::Failed,
                        slack1: f64::NAN,
                        slack2: None,
                        repairs: 0,
                        min_sep: state.uas[a].traj.min_separation(&state.uas[b].traj)?,
                        micros,
                        note: Some(format!("resolution error: {e}")),
                    });
                }
            }
        }
    }

    assert!(
        calls <= n * (n - 1) / 2,
        "pairwise applications {calls} exceed the n(n-1)/2 bound for n = {n}"
    );
    Ok(FleetStepResult { fleet: state, outcomes, l2f_call_count: calls, unresolved })
}

/// Line format of the run log: comma-separated
/// `step,uas_i,uas_j,status,slack1,slack2,repairs,min_sep,micros`, one line
/// per pair attempt; `slack2` is `na` when stage 2 never ran.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub step: usize,
    pub uas_i: u32,
    pub uas_j: u32,
    pub status: String,
    pub slack1: f64,
    pub slack2: Option<f64>,
    pub repairs: u8,
    pub min_sep: f64,
    pub micros: u128,
}

impl RunRecord {
    pub fn to_line(&self) -> String {
        let s2 = self.slack2.map_or_else(|| "na".to_string(), |v| format!("{v:.9}"));
        format!(
            "{},{},{},{},{:.9},{},{},{:.9},{}",
            self.step, self.uas_i, self.uas_j, self.status, self.slack1, s2, self.repairs,
            self.min_sep, self.micros
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() != 9 {
            return Err(Error::CorruptFile(format!("run record needs 9 fields: {line}")));
        }
        let bad = |what: &str| Error::CorruptFile(format!("bad {what} in run record: {line}"));
        Ok(RunRecord {
            step: parts[0].parse().map_err(|_| bad("step"))?,
            uas_i: parts[1].parse().map_err(|_| bad("uas_i"))?,
            uas_j: parts[2].parse().map_err(|_| bad("uas_j"))?,
            status: parts[3].to_string(),
            slack1: parts[4].parse().map_err(|_| bad("slack1"))?,
            slack2: if parts[5] == "na" {
                None
            } else {
                Some(parts[5].parse().map_err(|_| bad("slack2"))?)
            },
            repairs: parts[6].parse().map_err(|_| bad("repairs"))?,
            min_sep: parts[7].parse().map_err(|_| bad("min_sep"))?,
            micros: parts[8].parse().map_err(|_| bad("micros"))?,
        })
    }
}

/// Per-step metrics of a receding-horizon run.
#[derive(Debug, Clone)]
pub struct StepMetrics {
    pub step: usize,
    pub min_separation: f64,
    pub l2f_calls: usize,
    pub wall_micros: u128,
    pub unresolved: usize,
}

/// Full receding-horizon simulation result.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub fleet: FleetState,
    pub records: Vec<RunRecord>,
    pub steps: Vec<StepMetrics>,
    /// States actually flown, one per vehicle, accumulated step by step.
    pub flown: Vec<Trajectory>,
}

/// Repeat: resolve conflicts, apply the first control of every plan, and
/// advance trajectories and tubes by one step. Unresolved conflicts are
/// logged, not fatal.
pub fn simulate_receding_horizon(
    fleet: &FleetState,
    cr: &CrPolicy,
    model: &DynamicsModel,
    delta: f64,
    n_steps: usize,
    repair: bool,
) -> Result<SimulationOutcome> {
    let mut state = fleet.clone();
    let mut records = Vec::new();
    let mut steps = Vec::new();
    let mut flown: Vec<Vec<crate::dynamics::UasState>> =
        fleet.plans().iter().map(|u| vec![*u.traj.state(0)]).collect();

    for step in 0..n_steps {
        let t0 = Instant::now();
        let res = fleet_step(&state, cr, model, delta, repair)?;
        let wall = t0.elapsed().as_micros();
        for o in &res.outcomes {
            records.push(RunRecord {
                step,
                uas_i: o.uas_i,
                uas_j: o.uas_j,
                status: o.status.token().to_string(),
                slack1: o.slack1,
                slack2: o.slack2,
                repairs: o.repairs,
                min_sep: o.min_sep,
                micros: o.micros,
            });
        }
        steps.push(StepMetrics {
            step,
            min_separation: res.fleet.min_pairwise_separation()?,
            l2f_calls: res.l2f_call_count,
            wall_micros: wall,
            unresolved: res.unresolved.len(),
        });
        // apply the first control: every vehicle moves to the next sample
        // of its committed plan
        state = res.fleet;
        if state.plans()[0].traj.len() < 2 {
            break;
        }
        state = state.advance()?;
        for (f, u) in flown.iter_mut().zip(state.plans()) {
            f.push(*u.traj.state(0));
        }
    }

    let dt = fleet.plans()[0].traj.dt();
    let flown = flown
        .into_iter()
        .map(|states| Trajectory::new(states, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationOutcome { fleet: state, records, steps, flown })
}
