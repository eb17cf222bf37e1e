//! Decentralized, mission-aware multi-vehicle collision avoidance.
//!
//! Each vehicle flies a pre-planned trajectory surrounded by a per-timestep
//! *robustness tube*: as long as the vehicle stays inside its tube, its
//! mission remains satisfied. When two trajectories are predicted to come
//! closer than a minimum separation `delta` (inf-norm), the pair runs a
//! two-stage, priority-ordered avoidance procedure: a conflict-resolution
//! policy picks, per timestep, one of six separating half-spaces, and each
//! vehicle in turn solves a slack-minimizing linear program that respects its
//! dynamics, its tube, and the commanded side. A zero-slack outcome certifies
//! separation. Fleets of more than two vehicles are handled by applying the
//! pairwise procedure in priority order while shrinking the tubes of every
//! resolved pair so later fixes cannot re-collide them.
//!
//! The crate also contains the centralized MILP used both as a completeness
//! baseline and as the label source for training the learned
//! conflict-resolution policy, a small from-scratch recurrent sequence
//! classifier, scenario generators, and a batch evaluation harness.

pub mod campc;
pub mod dynamics;
pub mod engine;
pub mod eval;
pub mod geometry;
pub mod learning;
pub mod lp;
pub mod milp_deconflict;
pub mod policy;
pub mod scenario;

pub use campc::{
    implied_slack, solve_campc, solve_campc_monolithic, verify_separation, CampcResult, Priority,
};
pub use dynamics::{
    build_model, min_jerk_trajectory, rollout, step, ControlInput, DynamicsModel, Trajectory,
    UasState,
};
pub use engine::{
    deconflict_pair, deconflict_pair_with_repair, detect_conflicts, fleet_step,
    simulate_receding_horizon, FleetState, FleetStepResult, PairOutcome, PairRecord, PairStatus,
    RunRecord, SimulationOutcome, StepMetrics, UasPlan,
};
pub use eval::{
    evaluate_policies, recount_rates, EvalCell, EvalPolicy, EvalReport, OutcomeRecord,
};
pub use geometry::{
    box_distance_inf, conflict_indices, shrink_tubes, side_constraint, tube_from_trajectory,
    tubes_delta_separate, Box3, ConflictSet, DecisionSequence, RobustnessTube, SideConstraint,
};
pub use learning::{
    accuracy, generate_dataset, load_model, predict, save_model, train, Dataset, PairGenParams,
    SequenceClassifier, TrainConfig, TrainResult, TrainingExample,
};
pub use lp::{solve_lp, solve_milp, LpProblem, LpSolution, MilpProblem, SolveStatus};
pub use policy::{
    greedy_policy, oracle_policy, random_policy, repair_sequences, top_s_decision, CrOutput,
    CrPolicy, CrProbabilities, DEFAULT_PRESET,
};
pub use scenario::{
    gen_colliding_pair, gen_position_swap, gen_unit_cube, Scenario, ScenarioUas, SCHEMA_VERSION,
};
pub use milp_deconflict::{
    build_central_milp, decisions_from_binaries, solve_central, suggested_big_m,
    DeconflictSolution, DeconflictStatus, MilpDeconflictResult,
};

/// Tolerance used when comparing inf-norm separations against `delta`.
/// Conflicts use strict inequality (`dist < delta - EPS_SEP`), separation
/// checks use `dist >= delta - EPS_SEP`.
pub const EPS_SEP: f64 = 1e-9;

/// A slack sum at or below this threshold counts as a zero-slack solution.
pub const ZERO_SLACK_TOL: f64 = 1e-6;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trajectory horizons differ: {0} vs {1}")]
    HorizonMismatch(usize, usize),
    #[error("control input outside the input box U: {0}")]
    InputOutOfBounds(String),
    #[error("malformed linear program: {0}")]
    MalformedProblem(String),
    #[error("degenerate shrink: trajectory point lies strictly inside the separating slab at step {step} for vehicle {uas}")]
    DegenerateShrink { step: usize, uas: usize },
    #[error("avoidance LP infeasible: {0}")]
    CampcInfeasible(String),
    #[error("deconfliction MILP did not produce a usable solution: {0}")]
    DeconflictFailed(String),
    #[error("no conflict between the given trajectories; nothing to resolve")]
    NoConflict,
    #[error("resample budget exhausted after {0} attempts")]
    ResampleBudget(usize),
    #[error("training diverged: loss became non-finite at epoch {0}")]
    TrainingDiverged(usize),
    #[error("model file version mismatch: expected {expected}, found {found}")]
    ModelVersion { expected: u32, found: u32 },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver fault: {0}")]
    SolverFault(String),
}

pub type Result<T> = std::result::Result<T, Error>;
