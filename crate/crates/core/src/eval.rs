//! Batch evaluation: run the conflict-resolution policies over a pool of
//! conflicting pair scenarios at several tube-to-separation ratios and
//! measure separation rates and computation times.

use rayon::prelude::*;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::dynamics::DynamicsModel;
use crate::engine::{deconflict_pair, deconflict_pair_with_repair};
use crate::learning::SequenceClassifier;
use crate::milp_deconflict::{solve_central, suggested_big_m, DeconflictStatus};
use crate::policy::{CrPolicy, DEFAULT_PRESET};
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Policies the harness can evaluate. `LearnedRepair` is the learned
/// policy with the naive repair loop; `Oracle` is the centralized MILP
/// itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPolicy {
    Random,
    Greedy,
    Learned,
    LearnedRepair,
    Oracle,
}

impl EvalPolicy {
    pub fn name(self) -> &'static str {
        match self {
            EvalPolicy::Random => "random",
            EvalPolicy::Greedy => "greedy",
            EvalPolicy::Learned => "learned",
            EvalPolicy::LearnedRepair => "repair",
            EvalPolicy::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(EvalPolicy::Random),
            "greedy" => Ok(EvalPolicy::Greedy),
            "learned" => Ok(EvalPolicy::Learned),
            "repair" | "learned-repair" | "l2f+rep" => Ok(EvalPolicy::LearnedRepair),
            "oracle" | "milp" => Ok(EvalPolicy::Oracle),
            other => Err(Error::InvalidArgument(format!("unknown policy {other}"))),
        }
    }
}

/// One (policy, ratio) row of the report.
#[derive(Debug, Clone)]
pub struct EvalCell {
    pub policy: String,
    pub rho_over_delta: f64,
    /// Instances the rate is computed over (for the oracle: instances it
    /// reported feasible).
    pub n: usize,
    pub separation_rate: f64,
    pub failure_rate: f64,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Instances excluded from the rate (oracle infeasible or timed out).
    pub skipped: usize,
    pub violations_before: usize,
    pub violations_after: usize,
}

/// Per-instance outcome line; the summary rates can be re-counted from
/// these records exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    pub policy: String,
    pub rho_over_delta: f64,
    pub instance: usize,
    pub status: String,
    pub separated: bool,
    pub millis: f64,
}

impl OutcomeRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6}",
            self.policy, self.rho_over_delta, self.instance, self.status, self.separated, self.millis
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let p: Vec<&str> = line.trim().split(',').collect();
        if p.len() != 6 {
            return Err(Error::CorruptFile(format!("outcome record needs 6 fields: {line}")));
        }
        let bad = |w: &str| Error::CorruptFile(format!("bad {w} in outcome record: {line}"));
        Ok(OutcomeRecord {
            policy: p[0].to_string(),
            rho_over_delta: p[1].parse().map_err(|_| bad("ratio"))?,
            instance: p[2].parse().map_err(|_| bad("instance"))?,
            status: p[3].to_string(),
            separated: p[4].parse().map_err(|_| bad("separated"))?,
            millis: p[5].parse().map_err(|_| bad("millis"))?,
        })
    }
}

/// Full evaluation report.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    /// Stable CSV: `policy,rho_over_delta,n,separation_rate,mean_ms,std_ms`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,rho_over_delta,n,separation_rate,mean_ms,std_ms\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.4},{:.4}\n",
                c.policy, c.rho_over_delta, c.n, c.separation_rate, c.mean_ms, c.std_ms
            ));
        }
        out
    }

    pub fn cell(&self, policy: EvalPolicy, ratio: f64) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.policy == policy.name() && (c.rho_over_delta - ratio).abs() < 1e-12)
    }
}

/// Recompute separation rates from per-instance records; used to
/// cross-check the in-process aggregation.
pub fn recount_rates(records: &[OutcomeRecord]) -> Vec<(String, f64, usize, f64)> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(p, q)| *p == r.policy && (*q - r.rho_over_delta).abs() < 1e-12) {
            keys.push((r.policy.clone(), r.rho_over_delta));
        }
    }
    keys.into_iter()
        .map(|(p, q)| {
            let rs: Vec<&OutcomeRecord> = records
                .iter()
                .filter(|r| r.policy == p && (r.rho_over_delta - q).abs() < 1e-12)
                .filter(|r| r.status != "skipped")
                .collect();
            let n = rs.len();
            let sep = rs.iter().filter(|r| r.separated).count();
            (p, q, n, sep as f64 / n.max(1) as f64)
        })
        .collect()
}

struct InstanceOutcome {
    status: String,
    separated: bool,
    millis: f64,
}

fn run_instance(
    sc: &Scenario,
    policy: EvalPolicy,
    ratio: f64,
    model: &DynamicsModel,
    classifier: Option<&Arc<SequenceClassifier>>,
    base_seed: u64,
    instance: usize,
    oracle_time_limit: Duration,
) -> Result<InstanceOutcome> {
    let ts = sc.build_trajectories()?;
    if ts.len() != 2 {
        return Err(Error::InvalidArgument("evaluation pool must contain pair scenarios".into()));
    }
    let rho = ratio * sc.delta;
    let tubes = sc.build_tubes(&ts, Some(rho))?;

    if policy == EvalPolicy::Oracle {
        let mu = suggested_big_m(&tubes[0], &tubes[1], sc.delta);
        let t0 = Instant::now();
        let r = solve_central(&ts[0], &ts[1], &tubes[0], &tubes[1], model, sc.delta, mu, oracle_time_limit)?;
        let millis = t0.elapsed().as_secs_f64() * 1e3;
        return Ok(match r.status {
            DeconflictStatus::Feasible => {
                let sol = r.solution.expect("feasible carries solution");
                let separated =
                    crate::campc::verify_separation(&sol.traj1_new, &sol.traj2_new, sc.delta)?;
                InstanceOutcome { status: "feasible".into(), separated, millis }
            }
            DeconflictStatus::Infeasible => {
                InstanceOutcome { status: "skipped".into(), separated: false, millis }
            }
            DeconflictStatus::TimedOut => {
                InstanceOutcome { status: "skipped".into(), separated: false, millis }
            }
        });
    }

    let cr = match policy {
        EvalPolicy::Random => CrPolicy::Random { seed: base_seed ^ (instance as u64).wrapping_mul(0x9e37) },
        EvalPolicy::Greedy => CrPolicy::Greedy { preset: DEFAULT_PRESET },
        EvalPolicy::Learned | EvalPolicy::LearnedRepair => {
            let c = classifier.ok_or_else(|| {
                Error::InvalidArgument("learned policy requested without a classifier".into())
            })?;
            CrPolicy::Learned(Arc::clone(c))
        }
        EvalPolicy::Oracle => unreachable!(),
    };

    let t0 = Instant::now();
    let out = if policy == EvalPolicy::LearnedRepair {
        deconflict_pair_with_repair(&ts[0], &ts[1], &tubes[0], &tubes[1], &cr, model, sc.delta)
    } else {
        deconflict_pair(&ts[0], &ts[1], &tubes[0], &tubes[1], &cr, model, sc.delta)
    };
    let millis = t0.elapsed().as_secs_f64() * 1e3;
    let (status, separated) = match out {
        Ok(o) => (o.status.token().to_string(), o.status.separated()),
        Err(Error::NoConflict) => {
            return Err(Error::InvalidArgument("evaluation pool scenario has no conflict".into()))
        }
        Err(e) => (format!("error:{e}"), false),
    };
    Ok(InstanceOutcome { status, separated, millis })
}

/// Evaluate `policies` x `ratios` over the scenario pool. Tubes are rebuilt
/// at `rho = ratio * delta` per cell, so one pool serves every ratio.
/// Timing covers conflict resolution plus the avoidance solves, excluding
/// scenario construction.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policies(
    pool: &[Scenario],
    policies: &[EvalPolicy],
    ratios: &[f64],
    model: &DynamicsModel,
    classifier: Option<&Arc<SequenceClassifier>>,
    base_seed: u64,
    oracle_time_limit: Duration,
) -> Result<(EvalReport, Vec<OutcomeRecord>)> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("evaluation pool is empty".into()));
    }
    for r in ratios {
        if *r < 0.5 - 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "ratio {r} violates the minimum tube radius of delta/2"
            )));
        }
    }
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for &policy in policies {
        for &ratio in ratios {
            let outcomes: Vec<Result<InstanceOutcome>> = pool
                .par_iter()
                .enumerate()
                .map(|(i, sc)| {
                    run_instance(sc, policy, ratio, model, classifier, base_seed, i, oracle_time_limit)
                })
                .collect();
            let mut ok = Vec::with_capacity(outcomes.len());
            for (i, o) in outcomes.into_iter().enumerate() {
                let o = o?;
                records.push(OutcomeRecord {
                    policy: policy.name().to_string(),
                    rho_over_delta: ratio,
                    instance: i,
                    status: o.status.clone(),
                    separated: o.separated,
                    millis: o.millis,
                });
                ok.push(o);
            }
            let counted: Vec<&InstanceOutcome> = ok.iter().filter(|o| o.status != "skipped").collect();
            let n = counted.len();
            let separated = counted.iter().filter(|o| o.separated).count();
            let times: Vec<f64> = counted.iter().map(|o| o.millis).collect();
            let mean = times.iter().sum::<f64>() / n.max(1) as f64;
            let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
            let rate = separated as f64 / n.max(1) as f64;
            cells.push(EvalCell {
                policy: policy.name().to_string(),
                rho_over_delta: ratio,
                n,
                separation_rate: rate,
                failure_rate: 1.0 - rate,
                mean_ms: mean,
                std_ms: var.sqrt(),
                skipped: ok.len() - n,
                violations_before: ok.len(),
                violations_after: n - separated,
            });
        }
    }
    Ok((EvalReport { cells }, records))
}
