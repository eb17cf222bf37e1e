//! Shared brute-force oracles for the integration suites. Everything here
//! is deliberately independent of the solver implementations it checks.

use nalgebra::{DMatrix, DVector};
use veer_core::lp::LpProblem;

/// Exhaustive basic-solution enumeration for small LPs with finite variable
/// bounds. Returns the optimal objective value, or None when no feasible
/// basic solution exists.
pub fn enumerate_lp_optimum(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    // constraint list: (row, rhs, is_equality)
    let mut rows: Vec<(DVector<f64>, f64, bool)> = Vec::new();
    for i in 0..p.eq_lhs.nrows() {
        rows.push((p.eq_lhs.row(i).transpose(), p.eq_rhs[i], true));
    }
    for i in 0..p.ineq_lhs.nrows() {
        rows.push((p.ineq_lhs.row(i).transpose(), p.ineq_rhs[i], false));
    }
    for j in 0..n {
        if p.var_lo[j].is_finite() {
            let mut a = DVector::zeros(n);
            a[j] = -1.0;
            rows.push((a, -p.var_lo[j], false));
        }
        if p.var_hi[j].is_finite() {
            let mut a = DVector::zeros(n);
            a[j] = 1.0;
            rows.push((a, p.var_hi[j], false));
        }
    }

    let feasible = |x: &DVector<f64>| p.max_residual(x) <= 1e-8;

    let m = rows.len();
    if m < n {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    // iterate over all n-combinations of constraint indices
    for i in 0..n {
        pick[i] = i;
    }
    loop {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (r, &ci) in pick.iter().enumerate() {
            a.row_mut(r).copy_from(&rows[ci].0.transpose());
            b[r] = rows[ci].1;
        }
        if let Some(x) = a.lu().solve(&b) {
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                let obj = p.objective.dot(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let mut i = n;
        let mut advanced = false;
        while i > 0 {
            i -= 1;
            if pick[i] != i + m - n {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            return best;
        }
    }
}

/// Exhaustive MILP oracle: try every 0/1 assignment of the binaries and
/// solve the continuous rest.
pub fn enumerate_milp_optimum(p: &veer_core::lp::MilpProblem) -> Option<f64> {
    let bins: Vec<usize> = p.binary_vars.iter().copied().collect();
    assert!(bins.len() <= 16, "oracle limited to small binary counts");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut q = p.base.clone();
        for (t, &j) in bins.iter().enumerate() {
            let v = f64::from((mask >> t) & 1);
            if v < q.var_lo[j] - 1e-12 || v > q.var_hi[j] + 1e-12 {
                // assignment conflicts with the declared bounds
                continue;
            }
            q.var_lo[j] = v;
            q.var_hi[j] = v;
        }
        // skip masks that clashed with bounds
        if bins
            .iter()
            .any(|&j| q.var_lo[j] != q.var_hi[j] || (q.var_lo[j] != 0.0 && q.var_lo[j] != 1.0))
        {
            continue;
        }
        let sol = veer_core::lp::solve_lp(&q).expect("oracle sub-LP well formed");
        if sol.status == veer_core::lp::SolveStatus::Optimal {
            let obj = sol.objective_value.unwrap();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}
