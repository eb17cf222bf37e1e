//! Two-phase dense primal simplex over bounded variables.
//!
//! Variables (structural and slack) carry individual bounds, so box
//! constraints never become tableau rows. Phase 1 starts from a slack basis
//! with one artificial per infeasible row and minimizes the artificial sum;
//! artificial columns are implicit (they never re-enter, so only their basic
//! values are tracked). Pricing is most-negative-reduced-cost with Bland's
//! rule engaged as the anti-cycling safeguard after a run of degenerate
//! pivots.

use nalgebra::DVector;

use super::{LpProblem, LpSolution, SolveStatus};
use crate::{Error, Result};

/// Reduced-cost tolerance for entering candidates.
const ENTER_TOL: f64 = 1e-9;
/// Smallest acceptable pivot magnitude.
const PIVOT_TOL: f64 = 1e-9;
/// Phase-1 objective at or below this value certifies feasibility.
const PHASE1_TOL: f64 = 1e-9;
/// A step this small counts as degenerate for the Bland trigger.
const DEGEN_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLo,
    AtHi,
    /// Free variable resting at value 0.
    Free,
    /// lo == hi; never enters the basis.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BasisEntry {
    Col(usize),
    /// Artificial for this row; stored with the sign it was added with.
    Artificial,
}

pub(crate) struct Simplex {
    m: usize,
    ncols: usize,
    nstruct: usize,
    /// Row-major m x ncols tableau holding B^-1 A for the real columns.
    tab: Vec<f64>,
    /// Basic variable values, one per row.
    xb: Vec<f64>,
    basis: Vec<BasisEntry>,
    state: Vec<VarState>,
    /// Nonbasic values (meaningful for AtLo/AtHi/Free/Fixed entries).
    val: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Phase-2 cost over all columns (slack costs are zero).
    cost: Vec<f64>,
    /// Phase-1 reduced costs.
    d1: Vec<f64>,
    /// Phase-2 reduced costs.
    d2: Vec<f64>,
    artificials: usize,
    degen_run: usize,
    bland: bool,
    pub iterations: usize,
}

impl Simplex {
    /// Build the initial slack/artificial basis. `bounds_override` replaces
    /// the problem's variable bounds (used by branch-and-bound nodes).
    pub fn new(p: &LpProblem, bounds_override: Option<(&DVector<f64>, &DVector<f64>)>) -> Result<Self> {
        let n = p.num_vars();
        let me = p.eq_lhs.nrows();
        let mi = p.ineq_lhs.nrows();
        let m = me + mi;
        let ncols = n + mi;

        let (plo, phi) = match bounds_override {
            Some((l, h)) => (l, h),
            None => (&p.var_lo, &p.var_hi),
        };

        let mut lo = vec![0.0; ncols];
        let mut hi = vec![f64::INFINITY; ncols];
        for j in 0..n {
            if plo[j] > phi[j] {
                return Err(Error::MalformedProblem(format!("variable {j} has empty domain")));
            }
            lo[j] = plo[j];
            hi[j] = phi[j];
        }

        let mut state = vec![VarState::AtLo; ncols];
        let mut val = vec![0.0; ncols];
        for j in 0..n {
            let (l, h) = (lo[j], hi[j]);
            if l == h {
                state[j] = VarState::Fixed;
                val[j] = l;
            } else if l.is_finite() && h.is_finite() {
                // start at the bound closer to zero
                if l.abs() <= h.abs() {
                    state[j] = VarState::AtLo;
                    val[j] = l;
                } else {
                    state[j] = VarState::AtHi;
                    val[j] = h;
                }
            } else if l.is_finite() {
                state[j] = VarState::AtLo;
                val[j] = l;
            } else if h.is_finite() {
                state[j] = VarState::AtHi;
                val[j] = h;
            } else {
                state[j] = VarState::Free;
                val[j] = 0.0;
            }
        }

        let mut cost = vec![0.0; ncols];
        for j in 0..n {
            cost[j] = p.objective[j];
        }

        // Row activities at the initial nonbasic point.
        let mut act = vec![0.0; m];
        for i in 0..me {
            let mut s = 0.0;
            for j in 0..n {
                s += p.eq_lhs[(i, j)] * val[j];
            }
            act[i] = s;
        }
        for i in 0..mi {
            let mut s = 0.0;
            for j in 0..n {
                s += p.ineq_lhs[(i, j)] * val[j];
            }
            act[me + i] = s;
        }

        let mut tab = vec![0.0; m * ncols];
        let mut xb = vec![0.0; m];
        let mut basis = vec![BasisEntry::Artificial; m];
        let mut artificials = 0usize;

        // Equality rows always start with an artificial scaled so its value
        // is non-negative.
        for i in 0..me {
            let resid = p.eq_rhs[i] - act[i];
            let sign = if resid < 0.0 { -1.0 } else { 1.0 };
            let row = &mut tab[i * ncols..(i + 1) * ncols];
            for j in 0..n {
                row[j] = sign * p.eq_lhs[(i, j)];
            }
            xb[i] = sign * resid;
            basis[i] = BasisEntry::Artificial;
            artificials += 1;
        }
        // Inequality rows take their slack as the basic variable when the
        // slack value is feasible, otherwise an artificial.
        for i in 0..mi {
            let r = me + i;
            let slack_col = n + i;
            let resid = p.ineq_rhs[i] - act[r];
            let sign = if resid < -1e-12 { -1.0 } else { 1.0 };
            let row = &mut tab[r * ncols..(r + 1) * ncols];
            for j in 0..n {
                row[j] = sign * p.ineq_lhs[(i, j)];
            }
            row[slack_col] = sign;
            if resid >= -1e-12 {
                basis[r] = BasisEntry::Col(slack_col);
                state[slack_col] = VarState::Basic(r);
                xb[r] = resid.max(0.0);
            } else {
                basis[r] = BasisEntry::Artificial;
                artificials += 1;
                xb[r] = -resid;
            }
        }

        // Phase-1 reduced costs: d1_j = -sum of tableau rows with an
        // artificial basic. Phase-2 reduced costs start at the raw costs
        // because the initial basic variables all have zero phase-2 cost.
        let mut d1 = vec![0.0; ncols];
        for i in 0..m {
            if basis[i] == BasisEntry::Artificial {
                let row = &tab[i * ncols..(i + 1) * ncols];
                for j in 0..ncols {
                    d1[j] -= row[j];
                }
            }
        }
        let d2 = cost.clone();

        Ok(Self {
            m,
            ncols,
            nstruct: n,
            tab,
            xb,
            basis,
            state,
            val,
            lo,
            hi,
            cost,
            d1,
            d2,
            artificials,
            degen_run: 0,
            bland: false,
            iterations: 0,
        })
    }

    fn phase1_objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(b, _)| **b == BasisEntry::Artificial)
            .map(|(_, v)| v.max(0.0))
            .sum()
    }

    fn choose_entering_phase1(&self) -> Option<(usize, f64)> {
        self.choose_entering(&self.d1)
    }

    fn choose_entering_phase2(&self) -> Option<(usize, f64)> {
        self.choose_entering(&self.d2)
    }

    /// Entering column and direction (+1 increase, -1 decrease), or None at
    /// optimality for the given reduced costs.
    fn choose_entering(&self, d: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            let (dir, score) = match self.state[j] {
                VarState::AtLo => {
                    if d[j] < -ENTER_TOL {
                        (1.0, -d[j])
                    } else {
                        continue;
                    }
                }
                VarState::AtHi => {
                    if d[j] > ENTER_TOL {
                        (-1.0, d[j])
                    } else {
                        continue;
                    }
                }
                VarState::Free => {
                    if d[j] < -ENTER_TOL {
                        (1.0, -d[j])
                    } else if d[j] > ENTER_TOL {
                        (-1.0, d[j])
                    } else {
                        continue;
                    }
                }
                VarState::Basic(_) | VarState::Fixed => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            match best {
                Some((_, _, s)) if s >= score => {}
                _ => best = Some((j, dir, score)),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn column(&self, e: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for i in 0..self.m {
            w[i] = self.tab[i * self.ncols + e];
        }
        w
    }

    /// One bounded-simplex step for the entering column; returns false when
    /// the problem is unbounded along it.
    fn ratio_and_pivot(&mut self, e: usize, dir: f64) -> Result<bool> {
        let w = self.column(e);

        // own-range bound flip distance
        let range = self.hi[e] - self.lo[e];
        let mut t_star = if range.is_finite() { range } else { f64::INFINITY };
        let mut leave: Option<usize> = None; // blocking row

        for i in 0..self.m {
            let s = dir * w[i];
            if s.abs() <= PIVOT_TOL {
                continue;
            }
            let (bl, bh) = self.basic_bounds(i);
            let t = if s > 0.0 {
                if bl.is_finite() {
                    (self.xb[i] - bl) / s
                } else {
                    continue;
                }
            } else if bh.is_finite() {
                (self.xb[i] - bh) / s
            } else {
                continue;
            };
            let t = t.max(0.0);
            if t < t_star - 1e-12 {
                t_star = t;
                leave = Some(i);
            } else if (t - t_star).abs() <= 1e-12 && t_star.is_finite() {
                // tie-break: prefer kicking artificials, then the larger
                // pivot for stability; in Bland mode the lowest variable
                // index wins.
                let better = match (leave, self.bland) {
                    (None, _) => true,
                    (Some(l), true) => self.basis_index(i) < self.basis_index(l),
                    (Some(l), false) => {
                        let art_i = self.basis[i] == BasisEntry::Artificial;
                        let art_l = self.basis[l] == BasisEntry::Artificial;
                        art_i && !art_l || (art_i == art_l && w[i].abs() > w[l].abs())
                    }
                };
                if better {
                    leave = Some(i);
                }
            }
        }

        if !t_star.is_finite() {
            return Ok(false);
        }

        self.iterations += 1;
        if t_star <= DEGEN_TOL {
            self.degen_run += 1;
            if self.degen_run > BLAND_TRIGGER {
                self.bland = true;
            }
        } else {
            self.degen_run = 0;
        }

        match leave {
            None => {
                // bound flip: the entering variable crosses its whole range
                for i in 0..self.m {
                    self.xb[i] -= dir * t_star * w[i];
                }
                if dir > 0.0 {
                    self.state[e] = VarState::AtHi;
                    self.val[e] = self.hi[e];
                } else {
                    self.state[e] = VarState::AtLo;
                    self.val[e] = self.lo[e];
                }
            }
            Some(r) => {
                let new_val = self.val[e] + dir * t_star;
                for i in 0..self.m {
                    if i != r {
                        self.xb[i] -= dir * t_star * w[i];
                    }
                }
                // leaving variable lands exactly on the bound it blocked at
                let s = dir * w[r];
                match self.basis[r] {
                    BasisEntry::Artificial => {
                        self.artificials -= 1;
                    }
                    BasisEntry::Col(l) => {
                        if s > 0.0 {
                            self.state[l] = VarState::AtLo;
                            self.val[l] = self.lo[l];
                        } else {
                            self.state[l] = VarState::AtHi;
                            self.val[l] = self.hi[l];
                        }
                    }
                }
                self.basis[r] = BasisEntry::Col(e);
                self.state[e] = VarState::Basic(r);
                self.xb[r] = new_val;
                self.eliminate(r, e);
            }
        }
        Ok(true)
    }

    fn basic_bounds(&self, i: usize) -> (f64, f64) {
        match self.basis[i] {
            BasisEntry::Artificial => (0.0, f64::INFINITY),
            BasisEntry::Col(j) => (self.lo[j], self.hi[j]),
        }
    }

    fn basis_index(&self, i: usize) -> usize {
        match self.basis[i] {
            BasisEntry::Col(j) => j,
            BasisEntry::Artificial => self.ncols + i,
        }
    }

    /// Gauss-Jordan elimination of column `e` around pivot row `r`,
    /// applied to the tableau and both reduced-cost rows. Early tableaus
    /// are very sparse, so row updates run over the pivot row's nonzero
    /// index list whenever that list is short.
    fn eliminate(&mut self, r: usize, e: usize) {
        let ncols = self.ncols;
        let pivot = self.tab[r * ncols + e];
        debug_assert!(pivot.abs() > PIVOT_TOL * 1e-3, "tiny pivot {pivot}");
        let inv = 1.0 / pivot;
        let mut nz: Vec<usize> = Vec::new();
        {
            let row = &mut self.tab[r * ncols..(r + 1) * ncols];
            for (j, v) in row.iter_mut().enumerate() {
                *v *= inv;
                if v.abs() < 1e-14 {
                    *v = 0.0;
                } else {
                    nz.push(j);
                }
            }
            row[e] = 1.0;
        }
        let sparse = nz.len() * 3 < ncols;
        let (before, rest) = self.tab.split_at_mut(r * ncols);
        let (prow, after) = rest.split_at_mut(ncols);
        let apply = |row: &mut [f64]| {
            let f = row[e];
            if f == 0.0 {
                return;
            }
            if sparse {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
            } else {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
            row[e] = 0.0;
        };
        for chunk in before.chunks_exact_mut(ncols) {
            apply(chunk);
        }
        for chunk in after.chunks_exact_mut(ncols) {
            apply(chunk);
        }
        apply(&mut self.d1);
        apply(&mut self.d2);
    }

    /// Drive any basic artificial out after phase 1, or leave it pinned at
    /// zero on a redundant row.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] != BasisEntry::Artificial {
                continue;
            }
            let row = &self.tab[r * self.ncols..(r + 1) * self.ncols];
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.ncols {
                if matches!(self.state[j], VarState::Basic(_) | VarState::Fixed) {
                    continue;
                }
                let a = row[j].abs();
                if a > 1e-7 && best.map_or(true, |(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                self.artificials -= 1;
                self.basis[r] = BasisEntry::Col(j);
                let v = self.val[j];
                self.state[j] = VarState::Basic(r);
                self.xb[r] = v;
                self.eliminate(r, j);
            }
            // else: redundant row; the artificial stays basic at zero and
            // its row never produces a usable pivot.
        }
    }

    /// Rebuild phase-2 reduced costs from the current tableau.
    fn refresh_d2(&mut self) {
        self.d2.copy_from_slice(&self.cost);
        for i in 0..self.m {
            if let BasisEntry::Col(b) = self.basis[i] {
                let cb = self.cost[b];
                if cb != 0.0 {
                    let row = &self.tab[i * self.ncols..(i + 1) * self.ncols];
                    for (d, a) in self.d2.iter_mut().zip(row.iter()) {
                        *d -= cb * a;
                    }
                }
            }
        }
    }

    fn max_iterations(&self) -> usize {
        50 * (self.m + self.ncols) + 10_000
    }

    pub fn solve(&mut self) -> Result<LpSolution> {
        let cap = self.max_iterations();

        // Phase 1: drive the artificial sum to zero.
        if self.artificials > 0 {
            loop {
                if self.phase1_objective() <= PHASE1_TOL {
                    break;
                }
                if self.iterations > cap {
                    return Err(Error::SolverFault("phase 1 iteration limit".into()));
                }
                match self.choose_entering_phase1() {
                    None => {
                        if self.phase1_objective() > PHASE1_TOL {
                            return Ok(LpSolution::infeasible());
                        }
                        break;
                    }
                    Some((e, dir)) => {
                        // Phase-1 objective is bounded below by zero, so an
                        // unbounded ray cannot appear here.
                        if !self.ratio_and_pivot(e, dir)? {
                            return Err(Error::SolverFault("unbounded phase-1 direction".into()));
                        }
                    }
                }
            }
            self.expel_artificials();
        }
        self.refresh_d2();
        self.degen_run = 0;

        // Phase 2: optimize the true objective.
        loop {
            if self.iterations > cap {
                return Err(Error::SolverFault("phase 2 iteration limit".into()));
            }
            match self.choose_entering_phase2() {
                None => break,
                Some((e, dir)) => {
                    if !self.ratio_and_pivot(e, dir)? {
                        debug_assert!(self.unbounded_ray_improves(e, dir));
                        return Ok(LpSolution::unbounded());
                    }
                }
            }
        }

        let x = self.extract();
        let objective_value = x.iter().zip(self.cost.iter()).map(|(a, c)| a * c).sum();
        Ok(LpSolution { status: SolveStatus::Optimal, x: Some(x), objective_value: Some(objective_value) })
    }

    /// Sanity check for the unbounded status: moving along the entering
    /// direction improves the objective and never blocks.
    fn unbounded_ray_improves(&self, e: usize, dir: f64) -> bool {
        dir * self.d2[e] < 0.0
    }

    fn extract(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.nstruct);
        for j in 0..self.nstruct {
            x[j] = match self.state[j] {
                VarState::Basic(r) => self.xb[r],
                _ => self.val[j],
            };
        }
        x
    }
}
