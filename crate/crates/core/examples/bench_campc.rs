//! Quick timing probe for the avoidance LP and the deconfliction MILP at
//! the standard horizon.

use nalgebra::Vector3;
use std::time::{Duration, Instant};
use veer_core::*;

fn main() {
    let model = DynamicsModel::default_model();
    let delta = 0.1;
    let xj = min_jerk_trajectory(Vector3::new(-1.0, 0.05, 0.0), Vector3::new(1.0, -0.05, 0.0), 4.0, 0.1)
        .unwrap();
    let xa = min_jerk_trajectory(Vector3::new(1.0, 0.0, 0.02), Vector3::new(-1.0, 0.0, -0.02), 4.0, 0.1)
        .unwrap();
    let tube = tube_from_trajectory(&xj, 0.055).unwrap();
    let d = DecisionSequence::new((0..41).map(|k| (k % 6 + 1) as u8).collect()).unwrap();

    for _ in 0..3 {
        let _ = solve_campc(&xj, &xa, &tube, &d, Priority::Low, &model, delta).unwrap();
    }
    let t0 = Instant::now();
    let n = 50;
    for _ in 0..n {
        let _ = solve_campc(&xj, &xa, &tube, &d, Priority::Low, &model, delta).unwrap();
    }
    println!("decomposed campc H=40: {:.2} ms/solve", t0.elapsed().as_secs_f64() * 1000.0 / n as f64);

    let t0 = Instant::now();
    let n2 = 5;
    for _ in 0..n2 {
        let _ = solve_campc_monolithic(&xj, &xa, &tube, &d, Priority::Low, &model, delta).unwrap();
    }
    println!("monolithic campc H=40: {:.2} ms/solve", t0.elapsed().as_secs_f64() * 1000.0 / n2 as f64);

    // deconfliction MILP on a head-on colliding pair
    let tube_a = tube_from_trajectory(&xj, 0.055).unwrap();
    let tube_b = tube_from_trajectory(&xa, 0.055).unwrap();
    let conflicts = conflict_indices(&xj, &xa, delta).unwrap();
    println!("conflicting steps: {}", conflicts.len());
    let mu = suggested_big_m(&tube_a, &tube_b, delta);
    let t0 = Instant::now();
    let r = solve_central(&xj, &xa, &tube_a, &tube_b, &model, delta, mu, Duration::from_secs(300)).unwrap();
    println!("central MILP H=40: {:.1} ms, status {:?}", t0.elapsed().as_secs_f64() * 1000.0, r.status);

    // worst case: exact head-on along one line (many conflicting steps)
    let h1 = min_jerk_trajectory(Vector3::new(-1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), 4.0, 0.1)
        .unwrap();
    let h2 = min_jerk_trajectory(Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0), 4.0, 0.1)
        .unwrap();
    let ta = tube_from_trajectory(&h1, 0.05).unwrap();
    let tb = tube_from_trajectory(&h2, 0.05).unwrap();
    println!("head-on conflicting steps: {}", conflict_indices(&h1, &h2, delta).unwrap().len());
    let mu = suggested_big_m(&ta, &tb, delta);
    let t0 = Instant::now();
    let r = solve_central(&h1, &h2, &ta, &tb, &model, delta, mu, Duration::from_secs(600)).unwrap();
    println!("head-on central MILP H=40 (rho/delta=0.5): {:.1} ms, status {:?}", t0.elapsed().as_secs_f64() * 1000.0, r.status);
}
