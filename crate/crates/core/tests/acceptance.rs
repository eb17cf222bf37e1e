//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Shared pools are built lazily and reused across criteria.

use nalgebra::Vector3;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use veer_core::*;

const DELTA: f64 = 0.1;
const RATIOS: [f64; 3] = [0.5, 0.95, 1.15];

fn model() -> &'static DynamicsModel {
    static M: OnceLock<DynamicsModel> = OnceLock::new();
    M.get_or_init(DynamicsModel::default_model)
}

fn report(name: &str, ok: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

/// Shared pool of conflicting pair scenarios (tubes are rebuilt per ratio).
fn pair_pool() -> &'static Vec<Scenario> {
    static POOL: OnceLock<Vec<Scenario>> = OnceLock::new();
    POOL.get_or_init(|| {
        (0..1000u64)
            .map(|i| {
                gen_colliding_pair(40_000 + i, Vector3::zeros(), 0.25, 4.0, 0.1, DELTA, 0.055)
                    .expect("pair generation")
            })
            .collect()
    })
}

/// MILP pool: 100 instances per ratio, solved centrally.
type MilpCase = (Scenario, f64, MilpDeconflictResult);
fn milp_pool() -> &'static Vec<MilpCase> {
    static POOL: OnceLock<Vec<MilpCase>> = OnceLock::new();
    POOL.get_or_init(|| {
        use rayon::prelude::*;
        let mut jobs = Vec::new();
        for (ri, ratio) in RATIOS.iter().enumerate() {
            for i in 0..100u64 {
                jobs.push((*ratio, 70_000 + 1000 * ri as u64 + i));
            }
        }
        jobs.par_iter()
            .map(|&(ratio, seed)| {
                let sc = gen_colliding_pair(seed, Vector3::zeros(), 0.25, 4.0, 0.1, DELTA, ratio * DELTA)
                    .expect("pair generation");
                let ts = sc.build_trajectories().unwrap();
                let tubes = sc.build_tubes(&ts, None).unwrap();
                let mu = suggested_big_m(&tubes[0], &tubes[1], DELTA);
                let res = solve_central(
                    &ts[0],
                    &ts[1],
                    &tubes[0],
                    &tubes[1],
                    model(),
                    DELTA,
                    mu,
                    Duration::from_secs(300),
                )
                .expect("central solve");
                (sc, ratio, res)
            })
            .collect()
    })
}

/// Labeled training data at the reference training ratio (rho = 0.055).
fn training_data() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        let params = PairGenParams::default();
        generate_dataset(300, &params, model(), DELTA, 0.055, 90_001).expect("dataset generation")
    })
}

fn classifier() -> &'static Arc<SequenceClassifier> {
    static C: OnceLock<Arc<SequenceClassifier>> = OnceLock::new();
    C.get_or_init(|| {
        let cfg = TrainConfig { seed: 7, ..TrainConfig::default() };
        Arc::new(train(training_data(), &cfg).expect("training").classifier)
    })
}

/// The full policy-by-ratio evaluation used by criteria 4 and 5.
fn eval_report() -> &'static EvalReport {
    static R: OnceLock<EvalReport> = OnceLock::new();
    R.get_or_init(|| {
        let policies = [
            EvalPolicy::Random,
            EvalPolicy::Greedy,
            EvalPolicy::Learned,
            EvalPolicy::LearnedRepair,
        ];
        let (report, records) = evaluate_policies(
            pair_pool(),
            &policies,
            &RATIOS,
            model(),
            Some(classifier()),
            2024,
            Duration::from_secs(300),
        )
        .expect("evaluation");
        // the aggregated rates must match an independent re-count of the
        // per-instance records
        for (policy, ratio, n, rate) in recount_rates(&records) {
            let cell = report
                .cells
                .iter()
                .find(|c| c.policy == policy && (c.rho_over_delta - ratio).abs() < 1e-12)
                .expect("cell");
            assert_eq!(cell.n, n);
            assert_eq!(cell.separation_rate, rate);
        }
        report
    })
}

/// Zero-slack pairwise outcomes (greedy CR) across the ratios, paired with
/// the tubes they ran in.
struct ZeroSlackCase {
    traj1: Trajectory,
    traj2: Trajectory,
    tube1: RobustnessTube,
    tube2: RobustnessTube,
}
fn zero_slack_outcomes() -> &'static Vec<ZeroSlackCase> {
    static Z: OnceLock<Vec<ZeroSlackCase>> = OnceLock::new();
    Z.get_or_init(|| {
        use rayon::prelude::*;
        let pool = pair_pool();
        let cr = CrPolicy::Greedy { preset: DEFAULT_PRESET };
        let mut out = Vec::new();
        for ratio in RATIOS {
            let cases: Vec<Option<ZeroSlackCase>> = pool[..400]
                .par_iter()
                .map(|sc| {
                    let ts = sc.build_trajectories().unwrap();
                    let tubes = sc.build_tubes(&ts, Some(ratio * DELTA)).unwrap();
                    let r = deconflict_pair(&ts[0], &ts[1], &tubes[0], &tubes[1], &cr, model(), DELTA);
                    match r {
                        Ok(o)
                            if matches!(
                                o.status,
                                PairStatus::Stage1Separated | PairStatus::Stage2Separated
                            ) =>
                        {
                            let [tube1, tube2]: [RobustnessTube; 2] =
                                tubes.try_into().expect("two tubes");
                            Some(ZeroSlackCase { traj1: o.traj1_new, traj2: o.traj2_new, tube1, tube2 })
                        }
                        _ => None,
                    }
                })
                .collect();
            out.extend(cases.into_iter().flatten());
        }
        out
    })
}

#[test]
fn criterion_01_zero_slack_outcomes_are_separated_and_contained() {
    let t0 = Instant::now();
    let cases = zero_slack_outcomes();
    let mut violations = 0usize;
    for c in cases.iter() {
        if !verify_separation(&c.traj1, &c.traj2, DELTA).unwrap() {
            violations += 1;
        }
        if !c.tube1.contains_trajectory(&c.traj1, 1e-7).unwrap()
            || !c.tube2.contains_trajectory(&c.traj2, 1e-7).unwrap()
        {
            violations += 1;
        }
    }
    let elapsed = t0.elapsed();
    let ok = cases.len() >= 500 && violations == 0 && elapsed <= Duration::from_secs(120);
    report(
        "criterion 1 (zero-slack separation/containment)",
        ok,
        &format!("{} zero-slack outcomes, {violations} violations, {:.1} s", cases.len(), elapsed.as_secs_f64()),
    );
    assert!(ok, "outcomes {}, violations {violations}, {:?}", cases.len(), elapsed);
}

#[test]
fn criterion_02_milp_decisions_give_zero_slack_second_stage() {
    let feasible: Vec<&MilpCase> = milp_pool()
        .iter()
        .filter(|(_, _, r)| r.status == DeconflictStatus::Feasible)
        .collect();
    let mut failures = 0usize;
    let mut checked = 0usize;
    for (sc, ratio, r) in feasible.iter() {
        let sol = r.solution.as_ref().unwrap();
        let ts = sc.build_trajectories().unwrap();
        let tubes = sc.build_tubes(&ts, Some(ratio * DELTA)).unwrap();
        let stage1 = match solve_campc(&ts[0], &ts[1], &tubes[0], &sol.decisions, Priority::Low, model(), DELTA)
        {
            Ok(s) => s,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        checked += 1;
        if stage1.slack_sum <= 1e-6 {
            continue;
        }
        match solve_campc(
            &ts[1],
            &stage1.traj_new,
            &tubes[1],
            &sol.decisions,
            Priority::High,
            model(),
            DELTA,
        ) {
            Ok(stage2) => {
                if stage2.slack_sum > 1e-6 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let ok = checked >= 200 && failures == 0;
    report(
        "criterion 2 (MILP decisions imply zero-slack two-stage)",
        ok,
        &format!(
            "{checked} MILP-feasible instances replayed, {failures} failures{}",
            if failures > 0 {
                "; a slack-optimal first stage can provably preclude any zero-slack second stage on rare instances (see tests/theorem_gap.rs)"
            } else {
                ""
            }
        ),
    );
    assert!(ok, "checked {checked}, failures {failures}");
}

#[test]
fn criterion_03_milp_separation_rate_is_one() {
    let pool = milp_pool();
    let mut detail = String::new();
    let mut all_ok = true;
    for ratio in RATIOS {
        let cases: Vec<&MilpCase> =
            pool.iter().filter(|(_, r, _)| (*r - ratio).abs() < 1e-12).collect();
        let feasible: Vec<&&MilpCase> =
            cases.iter().filter(|(_, _, r)| r.status == DeconflictStatus::Feasible).collect();
        let separated = feasible
            .iter()
            .filter(|(_, _, r)| {
                let s = r.solution.as_ref().unwrap();
                verify_separation(&s.traj1_new, &s.traj2_new, DELTA).unwrap()
            })
            .count();
        let rate = separated as f64 / feasible.len().max(1) as f64;
        all_ok &= rate == 1.0 && !feasible.is_empty();
        detail.push_str(&format!(
            "ratio {ratio}: {} feasible of {}, rate {rate}; ",
            feasible.len(),
            cases.len()
        ));
    }
    let total: usize = pool.len();
    all_ok &= total >= 300;
    report("criterion 3 (MILP separation rate 1.0)", all_ok, &format!("{total} instances; {detail}"));
    assert!(all_ok, "{detail}");
}

#[test]
fn criterion_04_policy_ordering_at_low_ratio() {
    let r = eval_report();
    let rate = |p: EvalPolicy| r.cell(p, 0.5).expect("cell").separation_rate;
    let (rnd, grd, lrn, rep) = (
        rate(EvalPolicy::Random),
        rate(EvalPolicy::Greedy),
        rate(EvalPolicy::Learned),
        rate(EvalPolicy::LearnedRepair),
    );
    let n = r.cell(EvalPolicy::Random, 0.5).unwrap().n;
    let ok = n >= 1000 && rnd < grd && grd < lrn && lrn <= rep && rep >= 0.98;
    report(
        "criterion 4 (policy ordering at rho/delta = 0.5)",
        ok,
        &format!("n {n}: random {rnd:.3} < greedy {grd:.3} < learned {lrn:.3} <= repair {rep:.3} (floor 0.98)"),
    );
    assert!(ok, "random {rnd}, greedy {grd}, learned {lrn}, repair {rep}");
}

#[test]
fn criterion_05_rates_monotone_in_tube_ratio() {
    let r = eval_report();
    let mut ok = true;
    let mut detail = String::new();
    for p in [EvalPolicy::Random, EvalPolicy::Greedy, EvalPolicy::Learned, EvalPolicy::LearnedRepair] {
        let rates: Vec<f64> = RATIOS
            .iter()
            .map(|q| r.cell(p, *q).expect("cell").separation_rate)
            .collect();
        ok &= rates[0] <= rates[1] && rates[1] <= rates[2];
        detail.push_str(&format!("{}: {:.3}/{:.3}/{:.3}; ", p.name(), rates[0], rates[1], rates[2]));
    }
    let greedy_high = r.cell(EvalPolicy::Greedy, 1.15).unwrap().separation_rate;
    ok &= greedy_high >= 0.96;
    report(
        "criterion 5 (monotonicity in rho/delta; greedy >= 0.96 at 1.15)",
        ok,
        &format!("{detail}greedy@1.15 {greedy_high:.3}"),
    );
    assert!(ok, "{detail} greedy@1.15 {greedy_high}");
}

fn three_uas_plans() -> Vec<(Trajectory, RobustnessTube)> {
    (0..3)
        .map(|i| {
            let ang = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
            let start = Vector3::new(ang.cos(), ang.sin(), 0.0);
            let t = min_jerk_trajectory(start, -start, 4.0, 0.1).unwrap();
            let tube = tube_from_trajectory(&t, 0.055).unwrap();
            (t, tube)
        })
        .collect()
}

#[test]
fn criterion_06_three_uas_live_lock_and_rts_fix() {
    let cr = CrPolicy::Greedy { preset: DEFAULT_PRESET };
    // sequential pairwise fixes, tubes never shrink
    let plans = three_uas_plans();
    let mut ts: Vec<Trajectory> = plans.iter().map(|(t, _)| t.clone()).collect();
    let tubes: Vec<RobustnessTube> = plans.iter().map(|(_, tu)| tu.clone()).collect();
    for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
        if conflict_indices(&ts[a], &ts[b], DELTA).unwrap().is_empty() {
            continue;
        }
        let out = deconflict_pair_with_repair(&ts[a], &ts[b], &tubes[a], &tubes[b], &cr, model(), DELTA)
            .unwrap();
        assert!(out.status.separated(), "pairwise application failed: {:?}", out.diagnostic);
        ts[a] = out.traj1_new;
        ts[b] = out.traj2_new;
    }
    let naive_min = [(0usize, 1usize), (0, 2), (1, 2)]
        .iter()
        .map(|&(a, b)| ts[a].min_separation(&ts[b]).unwrap())
        .fold(f64::INFINITY, f64::min);
    let live_lock = naive_min < DELTA - EPS_SEP;

    // the same scenario through the fleet step with tube shrinking
    let fleet = FleetState::new(
        plans
            .into_iter()
            .enumerate()
            .map(|(i, (traj, tube))| UasPlan { id: (i + 1) as u32, priority: (i + 1) as i32, traj, tube })
            .collect(),
    )
    .unwrap();
    let res = fleet_step(&fleet, &cr, model(), DELTA, true).unwrap();
    let rts_min = res.fleet.min_pairwise_separation().unwrap();
    let rts_ok = res.unresolved.is_empty() && rts_min >= DELTA - EPS_SEP;

    let ok = live_lock && rts_ok;
    report(
        "criterion 6 (3-UAS live-lock without RTS, resolved with RTS)",
        ok,
        &format!("naive min separation {naive_min:.4} (< {DELTA}), with RTS {rts_min:.4}"),
    );
    assert!(ok, "naive {naive_min}, rts {rts_min}, unresolved {:?}", res.unresolved);
}

#[test]
fn criterion_07_position_swap_resolves_in_six_applications() {
    let sc = gen_position_swap();
    let ts = sc.build_trajectories().unwrap();
    let tubes = sc.build_tubes(&ts, None).unwrap();
    let fleet = FleetState::new(
        ts.into_iter()
            .zip(tubes)
            .enumerate()
            .map(|(i, (traj, tube))| UasPlan { id: (i + 1) as u32, priority: (i + 1) as i32, traj, tube })
            .collect(),
    )
    .unwrap();
    let cr = CrPolicy::Greedy { preset: DEFAULT_PRESET };
    let res = fleet_step(&fleet, &cr, model(), sc.delta, true).unwrap();
    let min_sep = res.fleet.min_pairwise_separation().unwrap();
    let ok = res.l2f_call_count <= 6 && res.unresolved.is_empty() && min_sep >= sc.delta - EPS_SEP;
    report(
        "criterion 7 (4-UAS position swap)",
        ok,
        &format!(
            "{} pairwise applications (bound 6), min separation {min_sep:.4}",
            res.l2f_call_count
        ),
    );
    assert!(ok, "calls {}, unresolved {:?}, min {min_sep}", res.l2f_call_count, res.unresolved);
}

#[test]
fn criterion_08_fleet_step_never_exceeds_pair_bound() {
    use rayon::prelude::*;
    let cr = CrPolicy::Greedy { preset: DEFAULT_PRESET };
    let mut worst = 0usize;
    let mut runs = 0usize;
    for n in [5usize, 10, 20] {
        let bound = n * (n - 1) / 2;
        let maxima: Vec<usize> = (0..34u64)
            .into_par_iter()
            .map(|seed| {
                let sc = gen_unit_cube(n, 10_000 + seed, DELTA, 0.055).expect("cube scenario");
                let ts = sc.build_trajectories().unwrap();
                let tubes = sc.build_tubes(&ts, None).unwrap();
                let fleet = FleetState::new(
                    ts.into_iter()
                        .zip(tubes)
                        .enumerate()
                        .map(|(i, (traj, tube))| UasPlan {
                            id: (i + 1) as u32,
                            priority: (i + 1) as i32,
                            traj,
                            tube,
                        })
                        .collect(),
                )
                .unwrap();
                // fleet_step itself asserts the bound; simulate two receding
                // steps and take the per-step maximum
                let sim = simulate_receding_horizon(&fleet, &cr, model(), DELTA, 2, true).unwrap();
                sim.steps.iter().map(|s| s.l2f_calls).max().unwrap_or(0)
            })
            .collect();
        runs += maxima.len();
        let m = maxima.into_iter().max().unwrap_or(0);
        assert!(m <= bound, "n = {n}: {m} calls exceeds bound {bound}");
        worst = worst.max(m);
    }
    let ok = runs >= 100;
    report(
        "criterion 8 (per-step pairwise application bound)",
        ok,
        &format!("{runs} instrumented runs over n in {{5, 10, 20}}, worst per-step calls {worst}"),
    );
    assert!(ok, "only {runs} runs");
}

#[test]
fn criterion_09_tube_shrinking_properties() {
    use rand::Rng as _;
    use rand::SeedableRng as _;
    let cases = zero_slack_outcomes();
    let mut violations = 0usize;
    for c in cases.iter() {
        match shrink_tubes(&c.traj1, &c.traj2, &c.tube1, &c.tube2, DELTA) {
            Ok((s1, s2)) => {
                if !s1.subset_of(&c.tube1, 1e-12) || !s2.subset_of(&c.tube2, 1e-12) {
                    violations += 1;
                }
                if !tubes_delta_separate(&s1, &s2, DELTA).unwrap() {
                    violations += 1;
                }
                if !s1.contains_trajectory(&c.traj1, 1e-9).unwrap()
                    || !s2.contains_trajectory(&c.traj2, 1e-9).unwrap()
                {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }

    // any pair of trajectories inside delta-separate shrunk tubes stays
    // separated at every timestep
    let c = &cases[0];
    let (s1, s2) = shrink_tubes(&c.traj1, &c.traj2, &c.tube1, &c.tube2, DELTA).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(505);
    let mut sample_violations = 0usize;
    for _ in 0..1000 {
        let sample = |tube: &RobustnessTube, rng: &mut rand_chacha::ChaCha8Rng| {
            let states: Vec<UasState> = tube
                .boxes()
                .iter()
                .map(|b| {
                    UasState::at_rest(Vector3::new(
                        rng.gen_range(b.lo.x..=b.hi.x),
                        rng.gen_range(b.lo.y..=b.hi.y),
                        rng.gen_range(b.lo.z..=b.hi.z),
                    ))
                })
                .collect();
            Trajectory::new(states, 0.1).unwrap()
        };
        let a = sample(&s1, &mut rng);
        let b = sample(&s2, &mut rng);
        if a.min_separation(&b).unwrap() < DELTA - EPS_SEP {
            sample_violations += 1;
        }
    }

    let ok = cases.len() >= 500 && violations == 0 && sample_violations == 0;
    report(
        "criterion 9 (tube-shrinking subset/separation/containment)",
        ok,
        &format!(
            "{} zero-slack cases, {violations} violations; 1000 sampled trajectory pairs, {sample_violations} violations",
            cases.len()
        ),
    );
    assert!(ok, "cases {}, violations {violations}, samples {sample_violations}", cases.len());
}

#[test]
fn criterion_10_pairwise_call_time_under_50ms() {
    let cr = CrPolicy::Learned(Arc::clone(classifier()));
    let pool = pair_pool();
    let mut times = Vec::new();
    for sc in pool[..100].iter() {
        let ts = sc.build_trajectories().unwrap();
        let tubes = sc.build_tubes(&ts, Some(0.5 * DELTA)).unwrap();
        let t0 = Instant::now();
        let _ = deconflict_pair(&ts[0], &ts[1], &tubes[0], &tubes[1], &cr, model(), DELTA);
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let ok = mean <= 50.0;
    report(
        "criterion 10 (pairwise call wall time)",
        ok,
        &format!(
            "mean {mean:.2} ms over {} calls at H = 40 (reference implementation reports 8.6-9.7 ms)",
            times.len()
        ),
    );
    assert!(ok, "mean {mean} ms");
}

#[test]
fn criterion_11_learning_gradients_and_heldin_accuracy() {
    // finite-difference gradient check on a small model
    use rand::Rng as _;
    use rand::SeedableRng as _;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let hidden = 4;
    let nparams = hidden * (3 + hidden + 1 + 6) + 6;
    let params: Vec<f64> = (0..nparams).map(|_| rng.gen_range(-0.4..0.4)).collect();
    let z: Vec<[f64; 3]> = (0..5)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let labels: Vec<u8> = (0..5).map(|_| rng.gen_range(1..=6)).collect();
    let batch: Vec<(&[[f64; 3]], &[u8])> = vec![(z.as_slice(), labels.as_slice())];
    let (_, grad) = learning::batch_loss_and_grad(&params, hidden, &batch);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus[i] += eps;
        let mut minus = params.clone();
        minus[i] -= eps;
        let fd = (learning::batch_loss(&plus, hidden, &batch)
            - learning::batch_loss(&minus, hidden, &batch))
            / (2.0 * eps);
        let denom = grad[i].abs().max(fd.abs()).max(1e-8);
        worst = worst.max((grad[i] - fd).abs() / denom);
    }
    let grad_ok = worst <= 1e-4;

    // training on 200 labeled instances reaches the held-in accuracy bar
    let full = training_data();
    let ds200 = Dataset {
        h: full.h,
        dt: full.dt,
        delta: full.delta,
        rho: full.rho,
        seed: full.seed,
        examples: full.examples[..200].to_vec(),
    };
    let out = train(&ds200, &TrainConfig { seed: 3, ..TrainConfig::default() }).unwrap();
    let acc = accuracy(&out.classifier, &ds200.examples).unwrap();
    let acc_ok = acc >= 0.85;

    let ok = grad_ok && acc_ok;
    report(
        "criterion 11 (gradient check and held-in accuracy)",
        ok,
        &format!("worst relative gradient error {worst:.2e}; held-in accuracy {acc:.3} on 200 instances"),
    );
    assert!(ok, "gradient err {worst}, accuracy {acc}");
}
