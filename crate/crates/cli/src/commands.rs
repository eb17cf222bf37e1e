//! Subcommand implementations.

use nalgebra::Vector3;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use veer_core::{
    evaluate_policies, gen_colliding_pair, gen_position_swap, gen_unit_cube, generate_dataset,
    load_model, save_model, train, CrPolicy, Dataset, DynamicsModel, Error, EvalPolicy,
    FleetState, PairGenParams, RunRecord, Scenario, TrainConfig, Trajectory, UasPlan, EPS_SEP,
};

type Result<T> = std::result::Result<T, Error>;

/// Validation problems exit 1; solver and training faults exit 2.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SolverFault(_) | Error::TrainingDiverged(_) | Error::DeconflictFailed(_) => 2,
        _ => 1,
    }
}

fn duration_secs(s: f64) -> Result<Duration> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("time limit must be positive".into()));
    }
    Ok(Duration::from_secs_f64(s))
}

#[allow(clippy::too_many_arguments)]
pub fn generate_data(
    n: usize,
    seed: u64,
    delta: f64,
    rho: f64,
    horizon: usize,
    dt: f64,
    cube_half_width: f64,
    time_limit: f64,
    out: &Path,
) -> Result<()> {
    let params = PairGenParams {
        collision_point: Vector3::zeros(),
        cube_half_width,
        t_total: horizon as f64 * dt,
        dt,
        milp_time_limit: duration_secs(time_limit)?,
    };
    let model = DynamicsModel::default_model();
    let ds = generate_dataset(n, &params, &model, delta, rho, seed)?;
    ds.save(out)?;
    println!("wrote {} labeled instances to {}", ds.examples.len(), out.display());
    Ok(())
}

pub fn train_cr(
    data: &Path,
    out: &Path,
    epochs: usize,
    batch: usize,
    lr: f64,
    hidden: usize,
    seed: u64,
) -> Result<()> {
    let ds = Dataset::load(data)?;
    let cfg = TrainConfig {
        epochs,
        batch_size: batch,
        learning_rate: lr,
        hidden,
        seed,
        ..TrainConfig::default()
    };
    let res = train(&ds, &cfg)?;
    save_model(&res.classifier, out)?;
    let acc = veer_core::accuracy(&res.classifier, &ds.examples)?;
    println!(
        "trained on {} instances: final loss {:.4}, per-step accuracy {:.3}; model at {}",
        ds.examples.len(),
        res.final_loss,
        acc,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    policies: &str,
    ratios: &str,
    n: usize,
    seed: u64,
    delta: f64,
    horizon: usize,
    dt: f64,
    model_path: Option<&Path>,
    oracle_time_limit: f64,
    out: &Path,
    outcomes: Option<&Path>,
) -> Result<()> {
    let policies = policies
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(EvalPolicy::parse)
        .collect::<Result<Vec<_>>>()?;
    if policies.is_empty() {
        return Err(Error::InvalidArgument("no policies requested".into()));
    }
    let ratios = ratios
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad ratio {s}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let classifier = match model_path {
        Some(p) => Some(Arc::new(load_model(p)?)),
        None => None,
    };

    let t_total = horizon as f64 * dt;
    let pool: Vec<Scenario> = (0..n)
        .map(|i| {
            gen_colliding_pair(
                seed.wrapping_add(i as u64),
                Vector3::zeros(),
                0.25,
                t_total,
                dt,
                delta,
                0.55 * delta,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let model = DynamicsModel::default_model();
    let (report, records) = evaluate_policies(
        &pool,
        &policies,
        &ratios,
        &model,
        classifier.as_ref(),
        seed,
        duration_secs(oracle_time_limit)?,
    )?;
    fs::write(out, report.to_csv())?;
    if let Some(p) = outcomes {
        let mut f = std::io::BufWriter::new(fs::File::create(p)?);
        writeln!(f, "# policy,rho_over_delta,instance,status,separated,millis")?;
        for r in &records {
            writeln!(f, "{}", r.to_line())?;
        }
    }
    print!("{}", report.to_csv());
    Ok(())
}

fn policy_from_flag(policy: &str, seed: u64, model_path: Option<&Path>) -> Result<CrPolicy> {
    match policy.trim().to_ascii_lowercase().as_str() {
        "random" => Ok(CrPolicy::Random { seed }),
        "greedy" => Ok(CrPolicy::Greedy { preset: veer_core::DEFAULT_PRESET }),
        "learned" => {
            let p = model_path.ok_or_else(|| {
                Error::InvalidArgument("the learned policy needs --model".into())
            })?;
            Ok(CrPolicy::Learned(Arc::new(load_model(p)?)))
        }
        other => Err(Error::InvalidArgument(format!("unknown simulation policy {other}"))),
    }
}

/// Trajectory CSV columns: `step,t,uas_id,px,py,pz,vx,vy,vz`, grouped by
/// vehicle with steps ascending.
fn write_trajectories(path: &Path, fleet_ids: &[u32], dt: f64, flown: &[Trajectory]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "step,t,uas_id,px,py,pz,vx,vy,vz")?;
    for (id, traj) in fleet_ids.iter().zip(flown) {
        for (k, s) in traj.states().iter().enumerate() {
            writeln!(
                f,
                "{},{:.3},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
                k,
                k as f64 * dt,
                id,
                s.p.x,
                s.p.y,
                s.p.z,
                s.v.x,
                s.v.y,
                s.v.z
            )?;
        }
    }
    Ok(())
}

fn read_trajectories(path: &Path, dt: f64) -> Result<Vec<(u32, Trajectory)>> {
    let text = fs::read_to_string(path)?;
    let mut per_uas: Vec<(u32, Vec<veer_core::UasState>)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(Error::CorruptFile(format!("trajectory row needs 9 fields: {line}")));
        }
        let bad = |w: &str| Error::CorruptFile(format!("bad {w} in trajectory row {ln}"));
        let id: u32 = parts[2].parse().map_err(|_| bad("uas_id"))?;
        let mut nums = [0.0f64; 6];
        for (i, v) in nums.iter_mut().enumerate() {
            *v = parts[3 + i].parse().map_err(|_| bad("coordinate"))?;
        }
        let state = veer_core::UasState::new(
            Vector3::new(nums[0], nums[1], nums[2]),
            Vector3::new(nums[3], nums[4], nums[5]),
        );
        match per_uas.iter_mut().find(|(u, _)| *u == id) {
            Some((_, v)) => v.push(state),
            None => per_uas.push((id, vec![state])),
        }
    }
    per_uas
        .into_iter()
        .map(|(id, states)| Ok((id, Trajectory::new(states, dt)?)))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    scenario: &Path,
    policy: &str,
    repair: bool,
    model_path: Option<&Path>,
    steps: Option<usize>,
    seed: u64,
    rho: Option<f64>,
    out_dir: &Path,
) -> Result<()> {
    let sc = Scenario::from_json(&fs::read_to_string(scenario)?)?;
    if let Some(r) = rho {
        if r < sc.delta / 2.0 - 1e-12 {
            return Err(Error::InvalidArgument(format!("rho {r} below delta/2")));
        }
    }
    let cr = policy_from_flag(policy, seed, model_path)?;
    let ts = sc.build_trajectories()?;
    let tubes = sc.build_tubes(&ts, rho)?;
    let ids: Vec<u32> = sc.uas.iter().map(|u| u.id).collect();
    let plans: Vec<UasPlan> = sc
        .uas
        .iter()
        .zip(ts.into_iter().zip(tubes))
        .map(|(u, (traj, tube))| UasPlan { id: u.id, priority: u.priority, traj, tube })
        .collect();
    let fleet = FleetState::new(plans)?;
    let model = DynamicsModel::default_model();
    let n_steps = steps.unwrap_or_else(|| sc.horizon_steps());

    let sim = veer_core::simulate_receding_horizon(&fleet, &cr, &model, sc.delta, n_steps, repair)?;

    fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join("run.log");
    let mut f = std::io::BufWriter::new(fs::File::create(&log_path)?);
    writeln!(f, "# step,uas_i,uas_j,status,slack1,slack2,repairs,min_sep,micros")?;
    for r in &sim.records {
        writeln!(f, "{}", r.to_line())?;
    }
    drop(f);

    // completed flight path: flown states plus the untouched remainder of
    // the final committed plan
    let mut full: Vec<Trajectory> = Vec::with_capacity(sim.flown.len());
    for (flown, plan) in sim.flown.iter().zip(sim.fleet.plans()) {
        let mut states = flown.states().to_vec();
        states.extend_from_slice(&plan.traj.states()[1..]);
        full.push(Trajectory::new(states, sc.dt)?);
    }
    let traj_path = out_dir.join("trajectories.csv");
    write_trajectories(&traj_path, &ids, sc.dt, &full)?;

    let failures = sim.records.iter().filter(|r| r.status == "failed").count();
    let min_sep = sim
        .steps
        .iter()
        .map(|s| s.min_separation)
        .fold(f64::INFINITY, f64::min);
    println!(
        "simulated {} steps: {} pair resolutions, {} failures, min committed separation {:.4} m",
        sim.steps.len(),
        sim.records.len(),
        failures,
        min_sep
    );
    println!("run log: {}", log_path.display());
    println!("trajectories: {}", traj_path.display());
    Ok(())
}

pub fn replay(scenario: &Path, trajectories: &Path, log: &Path) -> Result<()> {
    let sc = Scenario::from_json(&fs::read_to_string(scenario)?)?;
    let flown = read_trajectories(trajectories, sc.dt)?;
    if flown.is_empty() {
        return Err(Error::CorruptFile("trajectory file holds no rows".into()));
    }
    let records: Vec<RunRecord> = fs::read_to_string(log)?
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(RunRecord::parse_line)
        .collect::<Result<Vec<_>>>()?;

    // starts must match the scenario's pre-plans
    for u in &sc.uas {
        let t = &flown
            .iter()
            .find(|(id, _)| *id == u.id)
            .ok_or_else(|| Error::CorruptFile(format!("vehicle {} missing from CSV", u.id)))?
            .1;
        let start = Vector3::from(u.start);
        if (t.position(0) - start).amax() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "vehicle {} does not start at its scenario start",
                u.id
            )));
        }
    }

    // a pair whose log records are all non-failed must stay separated from
    // its first resolution step onward; pairs never logged must never have
    // been in conflict at flown samples
    let mut violations = 0usize;
    let mut checks = 0usize;
    for a in 0..flown.len() {
        for b in a + 1..flown.len() {
            let (ia, ta) = &flown[a];
            let (ib, tb) = &flown[b];
            let (lo, hi) = (*ia.min(ib), *ia.max(ib));
            let pair_records: Vec<&RunRecord> = records
                .iter()
                .filter(|r| (r.uas_i.min(r.uas_j), r.uas_i.max(r.uas_j)) == (lo, hi))
                .collect();
            let from = if pair_records.is_empty() {
                0
            } else if pair_records.iter().any(|r| r.status == "failed") {
                continue; // acknowledged failure; nothing to verify
            } else {
                pair_records.iter().map(|r| r.step).min().unwrap() + 1
            };
            for k in from..ta.len().min(tb.len()) {
                checks += 1;
                if (ta.position(k) - tb.position(k)).amax() < sc.delta - EPS_SEP {
                    violations += 1;
                    eprintln!("separation violation: pair ({lo},{hi}) at step {k}");
                }
            }
        }
    }
    println!("replay: {checks} separation checks, {violations} violations, {} records", records.len());
    if violations > 0 {
        return Err(Error::InvalidArgument(format!("{violations} separation checks failed")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn gen_scenario(
    kind: &str,
    n_uas: usize,
    seed: u64,
    delta: f64,
    rho: f64,
    horizon: usize,
    dt: f64,
    out: &Path,
) -> Result<()> {
    let sc = match kind.trim().to_ascii_lowercase().as_str() {
        "swap" => gen_position_swap(),
        "cube" => gen_unit_cube(n_uas, seed, delta, rho)?,
        "pair" => gen_colliding_pair(
            seed,
            Vector3::zeros(),
            0.25,
            horizon as f64 * dt,
            dt,
            delta,
            rho,
        )?,
        other => return Err(Error::InvalidArgument(format!("unknown scenario kind {other}"))),
    };
    fs::write(out, sc.to_json())?;
    println!("wrote {} scenario with {} vehicles to {}", kind, sc.uas.len(), out.display());
    Ok(())
}
