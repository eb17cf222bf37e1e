//! Best-first branch-and-bound over LP relaxations.
//!
//! Binaries are relaxed to [0, 1]; nodes tighten them back to a single
//! value. Branching picks the most fractional binary (ties to the lowest
//! index) and the node queue orders by (relaxation bound, deeper first,
//! up-branch first). A rounding probe at each node fixes every binary to
//! its nearest integer and re-solves; when that restricted LP is feasible
//! it supplies an incumbent early, which closes feasibility-style problems
//! after a handful of nodes.

use nalgebra::DVector;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::{simplex::Simplex, LpSolution, MilpProblem, SolveStatus, INT_TOL};
use crate::{Error, Result};

/// Diagnostics from a branch-and-bound run.
#[derive(Debug, Clone, Default)]
pub struct MilpStats {
    /// Nodes whose LP relaxation was solved.
    pub nodes: usize,
    /// Objective of each accepted incumbent, in discovery order.
    pub incumbents: Vec<f64>,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; invert so the pop order is lowest bound,
    // then deepest, then earliest sequence number.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Solve a MILP by branch-and-bound; `time_limit` must be positive.
pub fn solve_milp(p: &MilpProblem, time_limit: Duration) -> Result<LpSolution> {
    solve_milp_with_stats(p, time_limit).map(|(sol, _)| sol)
}

pub fn solve_milp_with_stats(p: &MilpProblem, time_limit: Duration) -> Result<(LpSolution, MilpStats)> {
    if time_limit <= Duration::ZERO {
        return Err(Error::InvalidArgument("time limit must be positive".into()));
    }
    p.validate()?;
    let start = Instant::now();
    let mut stats = MilpStats::default();

    // Root bounds: intersect declared bounds with [0, 1] on binaries.
    let mut lo = p.base.var_lo.clone();
    let mut hi = p.base.var_hi.clone();
    for &j in &p.binary_vars {
        lo[j] = lo[j].max(0.0);
        hi[j] = hi[j].min(1.0);
        if lo[j] > hi[j] {
            return Ok((LpSolution::infeasible(), stats));
        }
    }

    if p.binary_vars.is_empty() {
        let sol = solve_node(&p.base, &lo, &hi)?;
        stats.nodes = 1;
        return Ok((sol, stats));
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: f64::NEG_INFINITY, depth: 0, seq, lo, hi });

    let mut incumbent: Option<(f64, DVector<f64>)> = None;

    while let Some(node) = heap.pop() {
        if start.elapsed() > time_limit {
            return Ok((timed_out(incumbent), stats));
        }
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - 1e-9 {
                continue;
            }
        }

        let relax = solve_node(&p.base, &node.lo, &node.hi)?;
        stats.nodes += 1;
        let (value, x) = match relax.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                // An unbounded relaxation at the root means the MILP itself
                // is unbounded or infeasible; report unbounded.
                return Ok((LpSolution::unbounded(), stats));
            }
            SolveStatus::Optimal => (relax.objective_value.unwrap(), relax.x.unwrap()),
            SolveStatus::TimedOut => unreachable!("LP solve does not time out"),
        };
        if let Some((best, _)) = &incumbent {
            if value >= best - 1e-9 {
                continue;
            }
        }

        // Most fractional binary, ties to the lowest index.
        let mut branch: Option<(usize, f64)> = None;
        for &j in &p.binary_vars {
            let f = x[j] - x[j].round();
            if f.abs() > INT_TOL {
                let score = 0.5 - (x[j].fract() - 0.5).abs();
                if branch.map_or(true, |(_, s)| score > s) {
                    branch = Some((j, score));
                }
            }
        }

        match branch {
            None => {
                // Integral relaxation: new incumbent.
                accept_incumbent(&mut incumbent, &mut stats, value, snap(x, &p.binary_vars));
                continue;
            }
            Some((j, _)) => {
                // Rounding probe: fix all binaries to their nearest integer
                // and re-solve; a feasible result is an incumbent.
                let nfrac = p.binary_vars.iter().filter(|&&b| (x[b] - x[b].round()).abs() > INT_TOL).count();
                if nfrac <= 6 {
                    let mut plo = node.lo.clone();
                    let mut phi = node.hi.clone();
                    for &b in &p.binary_vars {
                        let r = x[b].round().clamp(plo[b], phi[b]);
                        plo[b] = r;
                        phi[b] = r;
                    }
                    if let Ok(probe) = solve_node(&p.base, &plo, &phi) {
                        if probe.status == SolveStatus::Optimal {
                            let pv = probe.objective_value.unwrap();
                            let better = incumbent.as_ref().map_or(true, |(b, _)| pv < b - 1e-9);
                            if better {
                                accept_incumbent(
                                    &mut incumbent,
                                    &mut stats,
                                    pv,
                                    snap(probe.x.unwrap(), &p.binary_vars),
                                );
                            }
                        }
                    }
                    if let Some((best, _)) = &incumbent {
                        if value >= best - 1e-9 {
                            continue;
                        }
                    }
                }

                for &up in &[true, false] {
                    let mut lo = node.lo.clone();
                    let mut hi = node.hi.clone();
                    if up {
                        lo[j] = 1.0;
                        hi[j] = 1.0;
                    } else {
                        lo[j] = 0.0;
                        hi[j] = 0.0;
                    }
                    seq += 1;
                    heap.push(Node { bound: value, depth: node.depth + 1, seq, lo, hi });
                }
            }
        }
    }

    let sol = match incumbent {
        Some((value, x)) => LpSolution { status: SolveStatus::Optimal, x: Some(x), objective_value: Some(value) },
        None => LpSolution::infeasible(),
    };
    Ok((sol, stats))
}

fn accept_incumbent(
    incumbent: &mut Option<(f64, DVector<f64>)>,
    stats: &mut MilpStats,
    value: f64,
    x: DVector<f64>,
) {
    stats.incumbents.push(value);
    *incumbent = Some((value, x));
}

/// Round near-integral binaries exactly onto {0, 1}.
fn snap(mut x: DVector<f64>, binaries: &std::collections::BTreeSet<usize>) -> DVector<f64> {
    for &j in binaries {
        x[j] = x[j].round();
    }
    x
}

fn timed_out(incumbent: Option<(f64, DVector<f64>)>) -> LpSolution {
    match incumbent {
        Some((value, x)) => {
            LpSolution { status: SolveStatus::TimedOut, x: Some(x), objective_value: Some(value) }
        }
        None => LpSolution { status: SolveStatus::TimedOut, x: None, objective_value: None },
    }
}

fn solve_node(base: &super::LpProblem, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<LpSolution> {
    let mut sx = Simplex::new(base, Some((lo, hi)))?;
    sx.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpProblem;
    use nalgebra::{dmatrix, dvector};
    use std::collections::BTreeSet;

    fn limit() -> Duration {
        Duration::from_secs(10)
    }

    #[test]
    fn no_binaries_matches_lp() {
        let mut p = LpProblem::new(2);
        p.objective = dvector![1.0, 1.0];
        p.var_lo = dvector![0.5, 1.5];
        p.var_hi = dvector![2.0, 2.0];
        let milp = MilpProblem { base: p.clone(), binary_vars: BTreeSet::new() };
        let a = crate::lp::solve_lp(&p).unwrap();
        let b = solve_milp(&milp, limit()).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(b.status, SolveStatus::Optimal);
        assert!((a.objective_value.unwrap() - b.objective_value.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn fractional_relaxation_forces_integral_branch() {
        // min -b subject to b <= 0.5, b binary: relaxation gives b = 0.5,
        // the only integral point is b = 0.
        let mut p = LpProblem::new(1);
        p.objective = dvector![-1.0];
        p.ineq_lhs = dmatrix![1.0];
        p.ineq_rhs = dvector![0.5];
        let milp = MilpProblem { base: p, binary_vars: BTreeSet::from([0]) };
        let s = solve_milp(&milp, limit()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        let x = s.x.unwrap();
        assert!(x[0].abs() <= 1e-9, "expected b = 0, got {}", x[0]);
    }

    #[test]
    fn rejects_nonpositive_time_limit() {
        let milp = MilpProblem { base: LpProblem::new(1), binary_vars: BTreeSet::new() };
        assert!(solve_milp(&milp, Duration::ZERO).is_err());
    }

    #[test]
    fn incumbents_monotonically_improve() {
        // Small knapsack-style instance with several incumbent updates.
        let mut p = LpProblem::new(4);
        p.objective = dvector![-5.0, -4.0, -3.0, -2.0];
        p.ineq_lhs = dmatrix![4.0, 3.0, 2.0, 1.0];
        p.ineq_rhs = dvector![6.0];
        let milp = MilpProblem { base: p, binary_vars: BTreeSet::from([0, 1, 2, 3]) };
        let (s, stats) = solve_milp_with_stats(&milp, limit()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        for w in stats.incumbents.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "incumbents not monotone: {:?}", stats.incumbents);
        }
    }
}
