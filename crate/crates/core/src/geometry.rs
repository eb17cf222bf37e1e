//! Boxes, robustness tubes, conflict detection, separating-side constraints,
//! inf-norm set distance, and the tube-shrinking procedure that keeps already
//! deconflicted pairs apart during later pairwise fixes.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::dynamics::Trajectory;
use crate::{Error, Result, EPS_SEP};

/// Axis-aligned box in R^3. Components may be +-infinity (slabs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub lo: Vector3<f64>,
    pub hi: Vector3<f64>,
}

impl Box3 {
    pub fn new(lo: Vector3<f64>, hi: Vector3<f64>) -> Result<Self> {
        for a in 0..3 {
            if !(lo[a] <= hi[a]) {
                return Err(Error::InvalidArgument(format!(
                    "box lower bound exceeds upper bound on axis {a}: {} > {}",
                    lo[a], hi[a]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Cube of half-width `half` centered at `center`.
    pub fn cube(center: Vector3<f64>, half: f64) -> Self {
        let h = Vector3::repeat(half);
        Self { lo: center - h, hi: center + h }
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] - tol && p[a] <= self.hi[a] + tol)
    }

    /// Smallest half-extent across axes; infinite for slabs.
    pub fn min_half_extent(&self) -> f64 {
        (0..3).map(|a| 0.5 * (self.hi[a] - self.lo[a])).fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(self.hi.iter()).all(|c| c.is_finite())
    }
}

/// Per-timestep boxes a trajectory must stay inside; one box per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessTube {
    boxes: Vec<Box3>,
}

impl RobustnessTube {
    pub fn new(boxes: Vec<Box3>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidArgument("tube must contain at least one box".into()));
        }
        Ok(Self { boxes })
    }

    pub fn boxes(&self) -> &[Box3] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn item(&self, k: usize) -> &Box3 {
        &self.boxes[k]
    }

    /// True when every trajectory sample lies inside its box.
    pub fn contains_trajectory(&self, traj: &Trajectory, tol: f64) -> Result<bool> {
        if traj.len() != self.len() {
            return Err(Error::HorizonMismatch(traj.len(), self.len()));
        }
        Ok(traj
            .states()
            .iter()
            .zip(&self.boxes)
            .all(|(s, b)| b.contains(&s.p, tol)))
    }

    /// True when every box of `self` is contained in the matching box of
    /// `other`.
    pub fn subset_of(&self, other: &RobustnessTube, tol: f64) -> bool {
        self.len() == other.len()
            && self.boxes.iter().zip(&other.boxes).all(|(a, b)| {
                (0..3).all(|ax| a.lo[ax] >= b.lo[ax] - tol && a.hi[ax] <= b.hi[ax] + tol)
            })
    }

    /// Drop the first `n` boxes (receding-horizon advance).
    pub fn suffix(&self, n: usize) -> Result<Self> {
        if n >= self.boxes.len() {
            return Err(Error::InvalidArgument(format!(
                "suffix start {n} out of range for tube of length {}",
                self.boxes.len()
            )));
        }
        RobustnessTube::new(self.boxes[n..].to_vec())
    }
}

/// One of the six separating half-spaces of the inf-norm ball: the
/// constraint `normal . z <= offset` with `normal` equal to a signed
/// coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideConstraint {
    /// Row vector with exactly one nonzero entry, equal to +-1.
    pub normal: Vector3<f64>,
    /// Right-hand side, meters (equals `-delta`).
    pub offset: f64,
}

impl SideConstraint {
    /// Axis index (0, 1, 2) the constraint separates along.
    pub fn axis(&self) -> usize {
        (0..3).find(|&a| self.normal[a] != 0.0).expect("side constraint has a nonzero entry")
    }

    /// Evaluate `normal . z - offset`; non-positive means satisfied.
    pub fn violation(&self, z: &Vector3<f64>) -> f64 {
        self.normal.dot(z) - self.offset
    }
}

/// Separating-side choice per timestep; entries in 1..=6.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSequence {
    d: Vec<u8>,
}

impl DecisionSequence {
    pub fn new(d: Vec<u8>) -> Result<Self> {
        if d.iter().any(|&i| !(1..=6).contains(&i)) {
            return Err(Error::InvalidArgument("decision out of range 1..=6".into()));
        }
        Ok(Self { d })
    }

    pub fn decisions(&self) -> &[u8] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn get(&self, k: usize) -> u8 {
        self.d[k]
    }
}

/// Sorted set of timestep indices where a pair is in conflict.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConflictSet {
    indices: BTreeSet<usize>,
}

impl ConflictSet {
    pub fn new(indices: BTreeSet<usize>) -> Self {
        Self { indices }
    }

    pub fn indices(&self) -> &BTreeSet<usize> {
        &self.indices
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.contains(&k)
    }
}

/// Timesteps where the two trajectories are closer than `delta` in inf-norm:
/// `{k : ||p1_k - p2_k||_inf < delta - EPS_SEP}`.
pub fn conflict_indices(t1: &Trajectory, t2: &Trajectory, delta: f64) -> Result<ConflictSet> {
    if t1.len() != t2.len() {
        return Err(Error::HorizonMismatch(t1.len(), t2.len()));
    }
    let mut set = BTreeSet::new();
    for k in 0..t1.len() {
        if (t1.position(k) - t2.position(k)).amax() < delta - EPS_SEP {
            set.insert(k);
        }
    }
    Ok(ConflictSet::new(set))
}

/// The `i`-th separating side, `i` in 1..=6, enumerated as
/// `+e1, -e1, +e2, -e2, +e3, -e3` with offset `-delta`. Satisfying
/// `normal . (p1 - p2) <= -delta` implies `||p1 - p2||_inf >= delta`.
pub fn side_constraint(i: u8, delta: f64) -> Result<SideConstraint> {
    if !(1..=6).contains(&i) {
        return Err(Error::InvalidArgument(format!("side index {i} out of range 1..=6")));
    }
    let axis = usize::from((i - 1) / 2);
    let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
    let mut normal = Vector3::zeros();
    normal[axis] = sign;
    Ok(SideConstraint { normal, offset: -delta })
}

/// Tube of cubes of radius `rho` around each trajectory sample.
pub fn tube_from_trajectory(traj: &Trajectory, rho: f64) -> Result<RobustnessTube> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    RobustnessTube::new(traj.states().iter().map(|s| Box3::cube(s.p, rho)).collect())
}

/// Inf-norm distance between two boxes: the largest per-axis interval gap.
/// Equals `inf { ||a - b||_inf : a in A, b in B }` because the axes
/// decouple.
pub fn box_distance_inf(a: &Box3, b: &Box3) -> f64 {
    (0..3)
        .map(|ax| (b.lo[ax] - a.hi[ax]).max(a.lo[ax] - b.hi[ax]).max(0.0))
        .fold(0.0, f64::max)
}

/// True when the tubes keep an inf-norm distance of at least `delta` at
/// every timestep.
pub fn tubes_delta_separate(t1: &RobustnessTube, t2: &RobustnessTube, delta: f64) -> Result<bool> {
    if t1.len() != t2.len() {
        return Err(Error::HorizonMismatch(t1.len(), t2.len()));
    }
    Ok(t1
        .boxes
        .iter()
        .zip(&t2.boxes)
        .all(|(a, b)| box_distance_inf(a, b) >= delta - EPS_SEP))
}

/// Keep the connected sub-box of `bx` on `point`'s side of the slab
/// `[slab_lo, slab_hi]` on `axis`. Fails when the point is strictly inside
/// the slab.
///
/// The slab thickness never exceeds the separation along `axis`, so for
/// consistent inputs the point is always on or outside the slab boundary;
/// the failure branch guards against rounding on exact ties.
fn cut_box(bx: &Box3, axis: usize, slab_lo: f64, slab_hi: f64, point: &Vector3<f64>) -> Option<Box3> {
    let mut out = bx.clone();
    if point[axis] >= slab_hi - EPS_SEP {
        // rounding can push the cut a hair past the far face; the surviving
        // interval is never genuinely empty because the point lies in both
        out.lo[axis] = out.lo[axis].max(slab_hi).min(out.hi[axis]);
        Some(out)
    } else if point[axis] <= slab_lo + EPS_SEP {
        out.hi[axis] = out.hi[axis].min(slab_lo).max(out.lo[axis]);
        Some(out)
    } else {
        None
    }
}

/// Shrink two tubes around freshly deconflicted trajectories.
///
/// For each timestep whose boxes are closer than `delta`, a slab of
/// thickness `min(msep, delta)` (where `msep` is the minimum pairwise
/// trajectory separation) is removed between the trajectories along the
/// axis of their maximum separation; each box keeps the connected piece
/// containing its own trajectory point. Boxes already `delta`-separate are
/// left unchanged.
pub fn shrink_tubes(
    x1new: &Trajectory,
    x2new: &Trajectory,
    tube1: &RobustnessTube,
    tube2: &RobustnessTube,
    delta: f64,
) -> Result<(RobustnessTube, RobustnessTube)> {
    if x1new.len() != x2new.len() {
        return Err(Error::HorizonMismatch(x1new.len(), x2new.len()));
    }
    if tube1.len() != x1new.len() || tube2.len() != x2new.len() {
        return Err(Error::HorizonMismatch(tube1.len(), x1new.len()));
    }
    for (j, (traj, tube)) in [(x1new, tube1), (x2new, tube2)].iter().enumerate() {
        if !tube.contains_trajectory(traj, 1e-9)? {
            return Err(Error::InvalidArgument(format!(
                "trajectory of vehicle {} is not inside its tube",
                j + 1
            )));
        }
    }

    let msep = x1new.min_separation(x2new)?;
    let thickness = msep.min(delta);

    let mut out1 = Vec::with_capacity(tube1.len());
    let mut out2 = Vec::with_capacity(tube2.len());
    for k in 0..tube1.len() {
        let b1 = tube1.item(k);
        let b2 = tube2.item(k);
        if box_distance_inf(b1, b2) >= delta - EPS_SEP {
            out1.push(b1.clone());
            out2.push(b2.clone());
            continue;
        }
        let p1 = x1new.position(k);
        let p2 = x2new.position(k);
        // Axis of maximum separation; ties go to the lowest axis index.
        let mut axis = 0;
        let mut best = -1.0;
        for a in 0..3 {
            let sep = (p1[a] - p2[a]).abs();
            if sep > best {
                best = sep;
                axis = a;
            }
        }
        let mid = 0.5 * (p1[axis] + p2[axis]);
        let slab_lo = mid - 0.5 * thickness;
        let slab_hi = mid + 0.5 * thickness;
        let c1 = cut_box(b1, axis, slab_lo, slab_hi, &p1)
            .ok_or(Error::DegenerateShrink { step: k, uas: 1 })?;
        let c2 = cut_box(b2, axis, slab_lo, slab_hi, &p2)
            .ok_or(Error::DegenerateShrink { step: k, uas: 2 })?;
        out1.push(c1);
        out2.push(c2);
    }
    Ok((RobustnessTube::new(out1)?, RobustnessTube::new(out2)?))
}
