//! Conflict-resolution decision sources: random, greedy, MILP-oracle, and
//! learned, plus top-s extraction and the naive repair-sequence generator.
//!
//! Every policy produces per-timestep 6-way class probabilities; decisions
//! are the per-row argmax. Non-probabilistic policies emit one-hot rows so
//! the repair machinery works uniformly.

use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{DynamicsModel, Trajectory};
use crate::geometry::{side_constraint, ConflictSet, DecisionSequence, RobustnessTube};
use crate::learning::{predict, SequenceClassifier};
use crate::milp_deconflict::{solve_central, suggested_big_m, DeconflictStatus};
use crate::{Error, Result};

/// Per-timestep 6-way class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CrProbabilities {
    eta: Vec<[f64; 6]>,
}

impl CrProbabilities {
    pub fn new(eta: Vec<[f64; 6]>) -> Result<Self> {
        for (k, row) in eta.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!("invalid probability at step {k}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "probability row {k} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self { eta })
    }

    pub fn one_hot(d: &DecisionSequence) -> Self {
        let eta = d
            .decisions()
            .iter()
            .map(|&i| {
                let mut row = [0.0; 6];
                row[(i - 1) as usize] = 1.0;
                row
            })
            .collect();
        Self { eta }
    }

    pub fn rows(&self) -> &[[f64; 6]] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64; 6] {
        &self.eta[k]
    }

    /// Per-row argmax as a decision sequence (ties to the lowest class).
    pub fn argmax_decisions(&self) -> DecisionSequence {
        let d = self.eta.iter().map(|row| argmax_row(row) + 1).collect();
        DecisionSequence::new(d).expect("argmax is always in 1..=6")
    }
}

fn argmax_row(row: &[f64; 6]) -> u8 {
    let mut best = 0usize;
    for i in 1..6 {
        if row[i] > row[best] {
            best = i;
        }
    }
    best as u8
}

/// Decisions together with the probabilities that produced them.
#[derive(Debug, Clone)]
pub struct CrOutput {
    pub decisions: DecisionSequence,
    pub probabilities: CrProbabilities,
}

impl CrOutput {
    fn from_probabilities(probabilities: CrProbabilities) -> Self {
        Self { decisions: probabilities.argmax_decisions(), probabilities }
    }

    fn from_decisions(decisions: DecisionSequence) -> Self {
        let probabilities = CrProbabilities::one_hot(&decisions);
        Self { decisions, probabilities }
    }
}

/// Uniform random side per timestep; `h` is the horizon (h + 1 decisions).
pub fn random_policy(seed: u64, h: usize) -> CrOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<u8> = (0..=h).map(|_| rng.gen_range(1..=6u8)).collect();
    CrOutput::from_decisions(DecisionSequence::new(d).expect("generated in range"))
}

/// Pick, per timestep, the side with the largest margin
/// `r_i = q_i - M_i (p1 - p2)`; fall back to `preset` when every side is
/// violated (the vehicles are in conflict at that step).
pub fn greedy_policy(x1: &Trajectory, x2: &Trajectory, delta: f64, preset: u8) -> Result<CrOutput> {
    if x1.len() != x2.len() {
        return Err(Error::HorizonMismatch(x1.len(), x2.len()));
    }
    if !(1..=6).contains(&preset) {
        return Err(Error::InvalidArgument(format!("preset {preset} out of range 1..=6")));
    }
    let mut d = Vec::with_capacity(x1.len());
    for k in 0..x1.len() {
        let z = x1.position(k) - x2.position(k);
        let mut best: Option<(u8, f64)> = None;
        for i in 1..=6u8 {
            let side = side_constraint(i, delta)?;
            let r = side.offset - side.normal.dot(&z);
            if r >= 0.0 && best.map_or(true, |(_, br)| r > br) {
                best = Some((i, r));
            }
        }
        d.push(best.map_or(preset, |(i, _)| i));
    }
    Ok(CrOutput::from_decisions(DecisionSequence::new(d)?))
}

/// Decisions extracted from the centralized MILP solution.
pub fn oracle_policy(
    x1: &Trajectory,
    x2: &Trajectory,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    model: &DynamicsModel,
    delta: f64,
    time_limit: Duration,
) -> Result<CrOutput> {
    let mu = suggested_big_m(tube1, tube2, delta);
    let r = solve_central(x1, x2, tube1, tube2, model, delta, mu, time_limit)?;
    match r.status {
        DeconflictStatus::Feasible => {
            let sol = r.solution.expect("feasible result carries a solution");
            Ok(CrOutput::from_decisions(sol.decisions))
        }
        DeconflictStatus::Infeasible => {
            Err(Error::DeconflictFailed("oracle MILP infeasible".into()))
        }
        DeconflictStatus::TimedOut => Err(Error::DeconflictFailed("oracle MILP timed out".into())),
    }
}

/// Class with the `s`-th highest probability, excluding the classes chosen
/// for all smaller `s`; ties go to the lowest class index.
pub fn top_s_decision(eta_row: &[f64; 6], s: u8) -> Result<u8> {
    if !(1..=6).contains(&s) {
        return Err(Error::InvalidArgument(format!("rank {s} out of range 1..=6")));
    }
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| eta_row[b].partial_cmp(&eta_row[a]).unwrap().then(a.cmp(&b)));
    Ok((order[(s - 1) as usize] + 1) as u8)
}

/// The five naive repair candidates: for `s = 2..=6`, replace the decision
/// at every colliding timestep with the `s`-th most probable class.
pub fn repair_sequences(
    d: &DecisionSequence,
    eta: &CrProbabilities,
    collisions: &ConflictSet,
) -> Result<Vec<DecisionSequence>> {
    if collisions.is_empty() {
        return Err(Error::InvalidArgument("repair needs a non-empty collision set".into()));
    }
    if d.len() != eta.len() {
        return Err(Error::HorizonMismatch(d.len(), eta.len()));
    }
    if let Some(&k) = collisions.indices().iter().next_back() {
        if k >= d.len() {
            return Err(Error::InvalidArgument(format!("collision index {k} out of range")));
        }
    }
    let mut out = Vec::with_capacity(5);
    for s in 2..=6u8 {
        let mut dd = d.decisions().to_vec();
        for &k in collisions.indices() {
            dd[k] = top_s_decision(eta.row(k), s)?;
        }
        out.push(DecisionSequence::new(dd)?);
    }
    Ok(out)
}

/// A reusable conflict-resolution policy.
#[derive(Debug, Clone)]
pub enum CrPolicy {
    /// Uniform random decisions; the per-call seed mixes the base seed with
    /// a hash of the two trajectories so repeated calls stay deterministic
    /// but distinct across pairs.
    Random { seed: u64 },
    Greedy { preset: u8 },
    Oracle { time_limit: Duration },
    Learned(Arc<SequenceClassifier>),
}

/// Default preset maneuver: side 5 (+z, fly over).
pub const DEFAULT_PRESET: u8 = 5;

fn mix_seed(seed: u64, x1: &Trajectory, x2: &Trajectory) -> u64 {
    // FNV-1a over the position bytes of both trajectories
    let mut h = 0xcbf29ce484222325u64 ^ seed;
    let mut eat = |t: &Trajectory| {
        for s in t.states() {
            for c in 0..3 {
                for b in s.p[c].to_le_bytes() {
                    h = (h ^ u64::from(b)).wrapping_mul(0x100000001b3);
                }
            }
        }
    };
    eat(x1);
    eat(x2);
    h
}

impl CrPolicy {
    pub fn decide(
        &self,
        x1: &Trajectory,
        x2: &Trajectory,
        tube1: &RobustnessTube,
        tube2: &RobustnessTube,
        model: &DynamicsModel,
        delta: f64,
    ) -> Result<CrOutput> {
        match self {
            CrPolicy::Random { seed } => Ok(random_policy(mix_seed(*seed, x1, x2), x1.horizon())),
            CrPolicy::Greedy { preset } => greedy_policy(x1, x2, delta, *preset),
            CrPolicy::Oracle { time_limit } => {
                oracle_policy(x1, x2, tube1, tube2, model, delta, *time_limit)
            }
            CrPolicy::Learned(classifier) => {
                let z: Vec<[f64; 3]> = (0..x1.len())
                    .map(|k| {
                        let d = x1.position(k) - x2.position(k);
                        [d.x, d.y, d.z]
                    })
                    .collect();
                let probabilities = predict(classifier, &z)?;
                Ok(CrOutput::from_probabilities(probabilities))
            }
        }
    }

    /// Short stable name used in reports and logs.
    pub fn name(&self) -> &'static str {
        match self {
            CrPolicy::Random { .. } => "random",
            CrPolicy::Greedy { .. } => "greedy",
            CrPolicy::Oracle { .. } => "oracle",
            CrPolicy::Learned(_) => "learned",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Trajectory, UasState};
    use nalgebra::Vector3;
    use std::collections::BTreeSet;

    fn hover(p: Vector3<f64>, len: usize) -> Trajectory {
        Trajectory::new(vec![UasState::at_rest(p); len], 0.1).unwrap()
    }

    #[test]
    fn random_policy_is_reproducible_and_sized() {
        let a = random_policy(99, 40);
        let b = random_policy(99, 40);
        assert_eq!(a.decisions, b.decisions);
        assert_eq!(a.decisions.len(), 41);
        for (k, row) in a.probabilities.rows().iter().enumerate() {
            assert_eq!(row[(a.decisions.get(k) - 1) as usize], 1.0);
        }
    }

    #[test]
    fn random_policy_is_roughly_uniform() {
        let mut counts = [0usize; 6];
        let n = 100_000;
        let out = random_policy(7, n - 1);
        for &d in out.decisions.decisions() {
            counts[(d - 1) as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn greedy_picks_most_separated_side() {
        // z = p1 - p2 = (0, 0, 0.2): side 6 (normal -e3) has margin
        // r = -0.1 - (-0.2) = 0.1 >= 0 and wins.
        let x1 = hover(Vector3::new(0.0, 0.0, 0.2), 1);
        let x2 = hover(Vector3::zeros(), 1);
        let out = greedy_policy(&x1, &x2, 0.1, DEFAULT_PRESET).unwrap();
        assert_eq!(out.decisions.get(0), 6);
    }

    #[test]
    fn greedy_falls_back_to_preset_in_conflict() {
        let x = hover(Vector3::zeros(), 3);
        let out = greedy_policy(&x, &x, 0.1, 4).unwrap();
        assert_eq!(out.decisions.decisions(), &[4, 4, 4]);
    }

    #[test]
    fn greedy_breaks_ties_to_lowest_index() {
        // z = (-0.2, -0.2, 0): sides 1 (+e1) and 3 (+e2) tie at r = 0.1.
        let x1 = hover(Vector3::new(-0.2, -0.2, 0.0), 1);
        let x2 = hover(Vector3::zeros(), 1);
        let out = greedy_policy(&x1, &x2, 0.1, DEFAULT_PRESET).unwrap();
        assert_eq!(out.decisions.get(0), 1);
    }

    #[test]
    fn greedy_depends_only_on_difference() {
        let shift = Vector3::new(0.4, -0.2, 0.9);
        let x1 = hover(Vector3::new(0.05, 0.3, -0.1), 4);
        let x2 = hover(Vector3::new(-0.1, 0.0, 0.2), 4);
        let y1 = hover(Vector3::new(0.05, 0.3, -0.1) + shift, 4);
        let y2 = hover(Vector3::new(-0.1, 0.0, 0.2) + shift, 4);
        let a = greedy_policy(&x1, &x2, 0.1, 5).unwrap();
        let b = greedy_policy(&y1, &y2, 0.1, 5).unwrap();
        assert_eq!(a.decisions, b.decisions);
    }

    #[test]
    fn top_s_examples() {
        let row = [0.5, 0.2, 0.1, 0.1, 0.05, 0.05];
        assert_eq!(top_s_decision(&row, 1).unwrap(), 1);
        assert_eq!(top_s_decision(&row, 2).unwrap(), 2);
        assert_eq!(top_s_decision(&row, 3).unwrap(), 3); // tie 3 vs 4 -> lowest
        assert!(top_s_decision(&row, 0).is_err());
        assert!(top_s_decision(&row, 7).is_err());
    }

    #[test]
    fn top_s_enumerates_a_permutation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut row = [0.0; 6];
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = rng.gen_range(0.0..1.0);
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
            let mut seen: Vec<u8> = (1..=6).map(|s| top_s_decision(&row, s).unwrap()).collect();
            seen.sort_unstable();
            assert_eq!(seen, vec![1, 2, 3, 4, 5, 6]);
        }
    }

    #[test]
    fn repair_worked_example() {
        // five steps, all-ones decisions, collisions at steps 2 and 3;
        // second-best classes there are 3 and 5, third-best 2 and 3
        let d = DecisionSequence::new(vec![1, 1, 1, 1, 1]).unwrap();
        let mut eta = vec![[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; 5];
        eta[2] = [0.40, 0.20, 0.30, 0.04, 0.03, 0.03];
        eta[3] = [0.40, 0.02, 0.20, 0.03, 0.30, 0.05];
        let eta = CrProbabilities::new(eta).unwrap();
        let ups = ConflictSet::new(BTreeSet::from([2, 3]));
        let reps = repair_sequences(&d, &eta, &ups).unwrap();
        assert_eq!(reps.len(), 5);
        assert_eq!(reps[0].decisions(), &[1, 1, 3, 5, 1]);
        assert_eq!(reps[1].decisions(), &[1, 1, 2, 3, 1]);
        // entries only differ from d on the collision set
        for rep in &reps {
            for k in [0usize, 1, 4] {
                assert_eq!(rep.get(k), 1);
            }
        }
        // no class repeats at a collision index across ranks
        for k in [2usize, 3] {
            let mut used: Vec<u8> = reps.iter().map(|r| r.get(k)).collect();
            used.push(d.get(k));
            used.sort_unstable();
            used.dedup();
            assert_eq!(used.len(), 6);
        }
    }

    #[test]
    fn repair_rejects_empty_collision_set() {
        let d = DecisionSequence::new(vec![1, 1]).unwrap();
        let eta = CrProbabilities::one_hot(&d);
        assert!(repair_sequences(&d, &eta, &ConflictSet::default()).is_err());
    }

    #[test]
    fn one_hot_repairs_differ_only_on_collisions() {
        let d = DecisionSequence::new(vec![2, 5, 3]).unwrap();
        let eta = CrProbabilities::one_hot(&d);
        let ups = ConflictSet::new(BTreeSet::from([1]));
        let reps = repair_sequences(&d, &eta, &ups).unwrap();
        for rep in &reps {
            assert_eq!(rep.get(0), 2);
            assert_eq!(rep.get(2), 3);
            assert_ne!(rep.get(1), 5);
        }
    }
}
