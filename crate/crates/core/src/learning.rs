//! Offline training of the learned conflict-resolution policy: a small
//! recurrent sequence classifier mapping planned position differences to
//! per-timestep 6-way side probabilities, trained on labels extracted from
//! the centralized MILP.
//!
//! The network is a single tanh recurrent cell of configurable width with
//! a time-distributed dense softmax head, trained by full backpropagation
//! through time with the adaptive-moment (Adam) update. Everything is
//! plain `f64` so gradients can be validated against central finite
//! differences.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use crate::campc::{solve_campc, Priority};
use crate::dynamics::DynamicsModel;
use crate::geometry::{conflict_indices, DecisionSequence};
use crate::milp_deconflict::{solve_central, suggested_big_m, DeconflictStatus};
use crate::policy::CrProbabilities;
use crate::scenario::gen_colliding_pair;
use crate::{Error, Result, ZERO_SLACK_TOL};

const MODEL_VERSION: u32 = 1;
const DATASET_VERSION: u32 = 1;
const CLASSES: usize = 6;
const INPUT_DIM: usize = 3;

/// One supervised instance: planned position differences and the oracle's
/// side decision per timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    /// `p1_k - p2_k` for every timestep, length H + 1.
    pub z: Vec<[f64; 3]>,
    /// Oracle decisions, entries in 1..=6, same length as `z`.
    pub d: Vec<u8>,
}

impl TrainingExample {
    pub fn new(z: Vec<[f64; 3]>, labels: &DecisionSequence) -> Result<Self> {
        if z.len() != labels.len() {
            return Err(Error::HorizonMismatch(z.len(), labels.len()));
        }
        Ok(Self { z, d: labels.decisions().to_vec() })
    }
}

/// A labeled dataset plus the generation parameters it was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub h: usize,
    pub dt: f64,
    pub delta: f64,
    pub rho: f64,
    pub seed: u64,
    pub examples: Vec<TrainingExample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    format: String,
    version: u32,
    h: usize,
    dt: f64,
    delta: f64,
    rho: f64,
    seed: u64,
}

impl Dataset {
    /// Line-delimited JSON: a header line, then one example per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header = DatasetHeader {
            format: "cr-dataset".into(),
            version: DATASET_VERSION,
            h: self.h,
            dt: self.dt,
            delta: self.delta,
            rho: self.rho,
            seed: self.seed,
        };
        writeln!(f, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        for ex in &self.examples {
            writeln!(f, "{}", serde_json::to_string(ex).expect("example serializes"))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header_line =
            lines.next().ok_or_else(|| Error::CorruptFile("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::CorruptFile(format!("dataset header: {e}")))?;
        if header.format != "cr-dataset" {
            return Err(Error::CorruptFile(format!("unexpected format tag {}", header.format)));
        }
        if header.version != DATASET_VERSION {
            return Err(Error::ModelVersion { expected: DATASET_VERSION, found: header.version });
        }
        let mut examples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ex: TrainingExample = serde_json::from_str(&line)
                .map_err(|e| Error::CorruptFile(format!("dataset record: {e}")))?;
            if ex.z.len() != header.h + 1 || ex.d.len() != header.h + 1 {
                return Err(Error::CorruptFile("record length mismatch".into()));
            }
            examples.push(ex);
        }
        Ok(Dataset {
            h: header.h,
            dt: header.dt,
            delta: header.delta,
            rho: header.rho,
            seed: header.seed,
            examples,
        })
    }
}

/// Training hyperparameters. Defaults follow the reference setup scaled to
/// desk size: Adam with alpha 1e-3, beta1 0.9, beta2 0.999.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    /// Recurrent state width (architecture choice, serialized with the
    /// model).
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            seed: 0,
            hidden: 32,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument("epochs, batch size, hidden must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        for b in [self.beta1, self.beta2] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::InvalidArgument("betas must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// Recurrent sequence classifier with per-axis input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceClassifier {
    version: u32,
    pub hidden: usize,
    /// Expected input length (H + 1) the model was trained on.
    pub horizon_len: usize,
    /// Flat parameter vector; see the layout accessors.
    pub params: Vec<f64>,
    pub mean: [f64; 3],
    pub scale: [f64; 3],
}

/// Offsets into the flat parameter vector.
#[derive(Clone, Copy)]
struct ParamLayout {
    hidden: usize,
}

impl ParamLayout {
    fn wx(self) -> std::ops::Range<usize> {
        0..self.hidden * INPUT_DIM
    }
    fn wh(self) -> std::ops::Range<usize> {
        let s = self.hidden * INPUT_DIM;
        s..s + self.hidden * self.hidden
    }
    fn bh(self) -> std::ops::Range<usize> {
        let s = self.hidden * (INPUT_DIM + self.hidden);
        s..s + self.hidden
    }
    fn wo(self) -> std::ops::Range<usize> {
        let s = self.hidden * (INPUT_DIM + self.hidden + 1);
        s..s + CLASSES * self.hidden
    }
    fn bo(self) -> std::ops::Range<usize> {
        let s = self.hidden * (INPUT_DIM + self.hidden + 1 + CLASSES);
        s..s + CLASSES
    }
    fn total(self) -> usize {
        self.hidden * (INPUT_DIM + self.hidden + 1 + CLASSES) + CLASSES
    }
}

impl SequenceClassifier {
    fn layout(&self) -> ParamLayout {
        ParamLayout { hidden: self.hidden }
    }

    fn standardize(&self, z: &[[f64; 3]]) -> Vec<[f64; 3]> {
        z.iter()
            .map(|row| {
                let mut out = [0.0; 3];
                for a in 0..3 {
                    out[a] = (row[a] - self.mean[a]) / self.scale[a];
                }
                out
            })
            .collect()
    }
}

fn softmax(logits: &[f64; CLASSES]) -> [f64; CLASSES] {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = [0.0; CLASSES];
    let mut sum = 0.0;
    for i in 0..CLASSES {
        out[i] = (logits[i] - m).exp();
        sum += out[i];
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Forward pass over a standardized sequence: hidden states and per-step
/// class probabilities.
fn forward(
    params: &[f64],
    lay: ParamLayout,
    zn: &[[f64; 3]],
) -> (Vec<Vec<f64>>, Vec<[f64; CLASSES]>) {
    let hid = lay.hidden;
    let wx = &params[lay.wx()];
    let wh = &params[lay.wh()];
    let bh = &params[lay.bh()];
    let wo = &params[lay.wo()];
    let bo = &params[lay.bo()];

    let mut hs: Vec<Vec<f64>> = Vec::with_capacity(zn.len());
    let mut probs = Vec::with_capacity(zn.len());
    let mut h_prev = vec![0.0; hid];
    for z in zn {
        let mut h = vec![0.0; hid];
        for i in 0..hid {
            let mut a = bh[i];
            for (c, zc) in z.iter().enumerate() {
                a += wx[i * INPUT_DIM + c] * zc;
            }
            let row = &wh[i * hid..(i + 1) * hid];
            for (w, hp) in row.iter().zip(h_prev.iter()) {
                a += w * hp;
            }
            h[i] = a.tanh();
        }
        let mut logits = [0.0; CLASSES];
        for (cls, logit) in logits.iter_mut().enumerate() {
            let row = &wo[cls * hid..(cls + 1) * hid];
            *logit = bo[cls] + row.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f64>();
        }
        probs.push(softmax(&logits));
        hs.push(h.clone());
        h_prev = h;
    }
    (hs, probs)
}

/// Mean per-timestep categorical cross-entropy over the batch.
pub fn batch_loss(params: &[f64], hidden: usize, batch: &[(&[[f64; 3]], &[u8])]) -> f64 {
    let lay = ParamLayout { hidden };
    let mut loss = 0.0;
    for (zn, labels) in batch {
        let (_, probs) = forward(params, lay, zn);
        let t = zn.len() as f64;
        for (p, &y) in probs.iter().zip(labels.iter()) {
            loss -= (p[(y - 1) as usize].max(1e-300)).ln() / t;
        }
    }
    loss / batch.len() as f64
}

/// Loss and gradient of [`batch_loss`] by backpropagation through time.
pub fn batch_loss_and_grad(
    params: &[f64],
    hidden: usize,
    batch: &[(&[[f64; 3]], &[u8])],
) -> (f64, Vec<f64>) {
    let lay = ParamLayout { hidden };
    let hid = hidden;
    let wh = params[lay.wh()].to_vec();
    let wo = params[lay.wo()].to_vec();
    let mut grad = vec![0.0; lay.total()];
    let mut loss = 0.0;
    let bscale = 1.0 / batch.len() as f64;

    for (zn, labels) in batch {
        let (hs, probs) = forward(params, lay, zn);
        let t_len = zn.len();
        let tscale = bscale / t_len as f64;
        for (p, &y) in probs.iter().zip(labels.iter()) {
            loss -= (p[(y - 1) as usize].max(1e-300)).ln() * tscale;
        }

        let mut dh_next = vec![0.0; hid];
        for t in (0..t_len).rev() {
            // softmax + cross-entropy: dlogits = p - onehot(y)
            let mut dlog = probs[t];
            dlog[(labels[t] - 1) as usize] -= 1.0;
            for v in dlog.iter_mut() {
                *v *= tscale;
            }

            let h = &hs[t];
            let mut dh = dh_next.clone();
            {
                let gwo = &mut grad[lay.wo()];
                for cls in 0..CLASSES {
                    for i in 0..hid {
                        gwo[cls * hid + i] += dlog[cls] * h[i];
                    }
                }
            }
            {
                let gbo = &mut grad[lay.bo()];
                for cls in 0..CLASSES {
                    gbo[cls] += dlog[cls];
                }
            }
            for i in 0..hid {
                let mut s = 0.0;
                for cls in 0..CLASSES {
                    s += wo[cls * hid + i] * dlog[cls];
                }
                dh[i] += s;
            }

            // through tanh
            let mut da = vec![0.0; hid];
            for i in 0..hid {
                da[i] = dh[i] * (1.0 - h[i] * h[i]);
            }

            let z = &zn[t];
            {
                let gwx = &mut grad[lay.wx()];
                for i in 0..hid {
                    for c in 0..INPUT_DIM {
                        gwx[i * INPUT_DIM + c] += da[i] * z[c];
                    }
                }
            }
            if t > 0 {
                let hp = &hs[t - 1];
                let gwh = &mut grad[lay.wh()];
                for i in 0..hid {
                    for j in 0..hid {
                        gwh[i * hid + j] += da[i] * hp[j];
                    }
                }
            }
            {
                let gbh = &mut grad[lay.bh()];
                for i in 0..hid {
                    gbh[i] += da[i];
                }
            }

            // recurrent path into h_{t-1}
            let mut dhp = vec![0.0; hid];
            for i in 0..hid {
                let dai = da[i];
                if dai != 0.0 {
                    let row = &wh[i * hid..(i + 1) * hid];
                    for (j, w) in row.iter().enumerate() {
                        dhp[j] += w * dai;
                    }
                }
            }
            dh_next = dhp;
        }
    }
    (loss, grad)
}

/// Train outcome: the classifier and the final full-dataset loss.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub classifier: SequenceClassifier,
    pub final_loss: f64,
}

/// Train a classifier with seeded initialization and batch order; identical
/// seed and data give identical weights.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainResult> {
    config.validate()?;
    if dataset.examples.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let len = dataset.h + 1;
    for ex in &dataset.examples {
        if ex.z.len() != len || ex.d.len() != len {
            return Err(Error::HorizonMismatch(ex.z.len(), len));
        }
    }

    // per-axis standardization statistics
    let mut mean = [0.0; 3];
    let mut count = 0.0;
    for ex in &dataset.examples {
        for z in &ex.z {
            for a in 0..3 {
                mean[a] += z[a];
            }
            count += 1.0;
        }
    }
    for m in mean.iter_mut() {
        *m /= count;
    }
    let mut var = [0.0; 3];
    for ex in &dataset.examples {
        for z in &ex.z {
            for a in 0..3 {
                var[a] += (z[a] - mean[a]).powi(2);
            }
        }
    }
    let mut scale = [0.0; 3];
    for a in 0..3 {
        scale[a] = (var[a] / count).sqrt().max(1e-6);
    }

    let lay = ParamLayout { hidden: config.hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let r = 1.0 / (config.hidden as f64).sqrt();
    let mut params: Vec<f64> = (0..lay.total()).map(|_| rng.gen_range(-r..r)).collect();

    let model_stub = SequenceClassifier {
        version: MODEL_VERSION,
        hidden: config.hidden,
        horizon_len: len,
        params: Vec::new(),
        mean,
        scale,
    };
    let standardized: Vec<Vec<[f64; 3]>> =
        dataset.examples.iter().map(|ex| model_stub.standardize(&ex.z)).collect();

    let mut m = vec![0.0; lay.total()];
    let mut v = vec![0.0; lay.total()];
    let mut step = 0usize;
    let nex = dataset.examples.len();
    let mut order: Vec<usize> = (0..nex).collect();

    for epoch in 0..config.epochs {
        // deterministic shuffle
        for i in (1..nex).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[[f64; 3]], &[u8])> = chunk
                .iter()
                .map(|&i| (standardized[i].as_slice(), dataset.examples[i].d.as_slice()))
                .collect();
            let (loss, grad) = batch_loss_and_grad(&params, config.hidden, &batch);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged(epoch));
            }
            step += 1;
            let b1t = 1.0 - config.beta1.powi(step as i32);
            let b2t = 1.0 - config.beta2.powi(step as i32);
            for i in 0..params.len() {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
                let mhat = m[i] / b1t;
                let vhat = v[i] / b2t;
                params[i] -= config.learning_rate * mhat / (vhat.sqrt() + 1e-8);
            }
        }
    }

    let all: Vec<(&[[f64; 3]], &[u8])> = standardized
        .iter()
        .zip(&dataset.examples)
        .map(|(z, ex)| (z.as_slice(), ex.d.as_slice()))
        .collect();
    let final_loss = batch_loss(&params, config.hidden, &all);
    if !final_loss.is_finite() {
        return Err(Error::TrainingDiverged(config.epochs));
    }

    Ok(TrainResult {
        classifier: SequenceClassifier { params, ..model_stub },
        final_loss,
    })
}

/// Per-timestep class probabilities for a difference sequence whose length
/// matches the trained horizon.
pub fn predict(model: &SequenceClassifier, z: &[[f64; 3]]) -> Result<CrProbabilities> {
    if z.len() != model.horizon_len {
        return Err(Error::HorizonMismatch(z.len(), model.horizon_len));
    }
    let zn = model.standardize(z);
    let (_, probs) = forward(&model.params, model.layout(), &zn);
    CrProbabilities::new(probs)
}

/// Fraction of timesteps across `examples` where the argmax prediction
/// matches the label.
pub fn accuracy(model: &SequenceClassifier, examples: &[TrainingExample]) -> Result<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for ex in examples {
        let probs = predict(model, &ex.z)?;
        let d = probs.argmax_decisions();
        for (k, &y) in ex.d.iter().enumerate() {
            hit += usize::from(d.get(k) == y);
            total += 1;
        }
    }
    Ok(hit as f64 / total as f64)
}

pub fn save_model(model: &SequenceClassifier, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let s = serde_json::to_string_pretty(model).expect("model serializes");
    f.write_all(s.as_bytes())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SequenceClassifier> {
    let s = std::fs::read_to_string(path)?;
    // peek the version before strict decoding so mismatches are reported
    // as such rather than as corruption
    #[derive(Deserialize)]
    struct VersionPeek {
        version: u32,
    }
    let peek: VersionPeek =
        serde_json::from_str(&s).map_err(|e| Error::CorruptFile(format!("model file: {e}")))?;
    if peek.version != MODEL_VERSION {
        return Err(Error::ModelVersion { expected: MODEL_VERSION, found: peek.version });
    }
    let model: SequenceClassifier =
        serde_json::from_str(&s).map_err(|e| Error::CorruptFile(format!("model file: {e}")))?;
    let expect = model.layout().total();
    if model.params.len() != expect {
        return Err(Error::CorruptFile(format!(
            "parameter vector has {} entries, expected {expect}",
            model.params.len()
        )));
    }
    Ok(model)
}

/// Pair-generation parameters for dataset construction.
#[derive(Debug, Clone)]
pub struct PairGenParams {
    pub collision_point: Vector3<f64>,
    pub cube_half_width: f64,
    pub t_total: f64,
    pub dt: f64,
    pub milp_time_limit: Duration,
}

impl Default for PairGenParams {
    fn default() -> Self {
        Self {
            collision_point: Vector3::zeros(),
            cube_half_width: 0.25,
            t_total: 4.0,
            dt: 0.1,
            milp_time_limit: Duration::from_secs(120),
        }
    }
}

/// Generate `n_instances` labeled conflicting pairs. Labels come from the
/// centralized MILP; instances whose MILP is infeasible or times out are
/// resampled, and labels that fail the zero-slack two-stage replay are
/// dropped the same way so every stored label certifies separation.
pub fn generate_dataset(
    n_instances: usize,
    params: &PairGenParams,
    model: &DynamicsModel,
    delta: f64,
    rho: f64,
    seed: u64,
) -> Result<Dataset> {
    if rho < delta / 2.0 - 1e-12 {
        return Err(Error::InvalidArgument(format!("rho {rho} below delta/2")));
    }
    let attempts_per_instance = 20u64;
    let results: Vec<Result<TrainingExample>> = (0..n_instances as u64)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..attempts_per_instance {
                let pair_seed = seed
                    .wrapping_mul(0x9e3779b97f4a7c15)
                    .wrapping_add(i * attempts_per_instance + attempt);
                let ex = try_instance(pair_seed, params, model, delta, rho)?;
                if let Some(ex) = ex {
                    return Ok(ex);
                }
            }
            Err(Error::ResampleBudget(attempts_per_instance as usize))
        })
        .collect();

    let mut examples = Vec::with_capacity(n_instances);
    for r in results {
        examples.push(r?);
    }
    Ok(Dataset {
        h: (params.t_total / params.dt).round() as usize,
        dt: params.dt,
        delta,
        rho,
        seed,
        examples,
    })
}

fn try_instance(
    pair_seed: u64,
    params: &PairGenParams,
    model: &DynamicsModel,
    delta: f64,
    rho: f64,
) -> Result<Option<TrainingExample>> {
    let sc = gen_colliding_pair(
        pair_seed,
        params.collision_point,
        params.cube_half_width,
        params.t_total,
        params.dt,
        delta,
        rho,
    )?;
    let ts = sc.build_trajectories()?;
    let tubes = sc.build_tubes(&ts, None)?;
    debug_assert!(!conflict_indices(&ts[0], &ts[1], delta)?.is_empty());

    let mu = suggested_big_m(&tubes[0], &tubes[1], delta);
    let r = solve_central(&ts[0], &ts[1], &tubes[0], &tubes[1], model, delta, mu, params.milp_time_limit)?;
    if r.status != DeconflictStatus::Feasible {
        return Ok(None);
    }
    let sol = r.solution.expect("feasible carries solution");

    // zero-slack replay filter: the stored label must steer the two-stage
    // avoidance to a certified separation
    let stage1 = match solve_campc(&ts[0], &ts[1], &tubes[0], &sol.decisions, Priority::Low, model, delta)
    {
        Ok(s) => s,
        Err(Error::CampcInfeasible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if stage1.slack_sum > ZERO_SLACK_TOL {
        let stage2 = match solve_campc(
            &ts[1],
            &stage1.traj_new,
            &tubes[1],
            &sol.decisions,
            Priority::High,
            model,
            delta,
        ) {
            Ok(s) => s,
            Err(Error::CampcInfeasible(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if stage2.slack_sum > ZERO_SLACK_TOL {
            return Ok(None);
        }
    }

    let z: Vec<[f64; 3]> = (0..ts[0].len())
        .map(|k| {
            let d = ts[0].position(k) - ts[1].position(k);
            [d.x, d.y, d.z]
        })
        .collect();
    Ok(Some(TrainingExample::new(z, &sol.decisions)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset(n: usize, len: usize, seed: u64) -> Dataset {
        // synthetic separable task: label follows the dominant difference axis
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut examples = Vec::new();
        for _ in 0..n {
            let mut z = Vec::with_capacity(len);
            let mut d = Vec::with_capacity(len);
            for _ in 0..len {
                let row: [f64; 3] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let mut axis = 0;
                for a in 1..3 {
                    if row[a].abs() > row[axis].abs() {
                        axis = a;
                    }
                }
                let side = if row[axis] >= 0.0 { 2 * axis + 2 } else { 2 * axis + 1 };
                z.push(row);
                d.push(side as u8);
            }
            examples.push(TrainingExample { z, d });
        }
        Dataset { h: len - 1, dt: 0.1, delta: 0.1, rho: 0.055, seed, examples }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let ds = toy_dataset(3, 4, 11);
        let hidden = 4;
        let lay = ParamLayout { hidden };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params: Vec<f64> = (0..lay.total()).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let batch: Vec<(&[[f64; 3]], &[u8])> =
            ds.examples.iter().map(|e| (e.z.as_slice(), e.d.as_slice())).collect();
        let (_, grad) = batch_loss_and_grad(&params, hidden, &batch);
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += eps;
            let mut minus = params.clone();
            minus[i] -= eps;
            let fd =
                (batch_loss(&plus, hidden, &batch) - batch_loss(&minus, hidden, &batch)) / (2.0 * eps);
            let denom = grad[i].abs().max(fd.abs()).max(1e-8);
            worst = worst.max((grad[i] - fd).abs() / denom);
        }
        assert!(worst <= 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_dataset(8, 5, 3);
        let cfg = TrainConfig { epochs: 5, batch_size: 4, hidden: 6, ..TrainConfig::default() };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.classifier.params, b.classifier.params);
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    }

    #[test]
    fn training_reduces_loss_and_memorizes_single_example() {
        let mut ds = toy_dataset(1, 6, 9);
        ds.examples = vec![ds.examples[0].clone()];
        let cfg = TrainConfig { epochs: 300, batch_size: 8, hidden: 12, ..TrainConfig::default() };
        let init_loss = {
            let lay = ParamLayout { hidden: cfg.hidden };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let r = 1.0 / (cfg.hidden as f64).sqrt();
            let params: Vec<f64> = (0..lay.total()).map(|_| rng.gen_range(-r..r)).collect();
            // standardization differs slightly, but this is only a sanity bound
            let batch: Vec<(&[[f64; 3]], &[u8])> =
                ds.examples.iter().map(|e| (e.z.as_slice(), e.d.as_slice())).collect();
            batch_loss(&params, cfg.hidden, &batch)
        };
        let out = train(&ds, &cfg).unwrap();
        assert!(out.final_loss < init_loss, "{} !< {init_loss}", out.final_loss);
        let acc = accuracy(&out.classifier, &ds.examples).unwrap();
        assert_eq!(acc, 1.0, "single example must be memorized, got {acc}");
    }

    #[test]
    fn predictions_are_valid_distributions_and_length_checked() {
        let ds = toy_dataset(6, 5, 21);
        let cfg = TrainConfig { epochs: 3, batch_size: 4, hidden: 5, ..TrainConfig::default() };
        let out = train(&ds, &cfg).unwrap();
        let probs = predict(&out.classifier, &ds.examples[0].z).unwrap();
        for row in probs.rows() {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() <= 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
        let short = vec![[0.0; 3]; 3];
        assert!(predict(&out.classifier, &short).is_err());
    }

    #[test]
    fn model_roundtrip_is_bit_exact() {
        let ds = toy_dataset(4, 5, 2);
        let cfg = TrainConfig { epochs: 2, batch_size: 4, hidden: 5, ..TrainConfig::default() };
        let out = train(&ds, &cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("veer-model-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        save_model(&out.classifier, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(out.classifier, back);
        let a = predict(&out.classifier, &ds.examples[0].z).unwrap();
        let b = predict(&back, &ds.examples[0].z).unwrap();
        for (ra, rb) in a.rows().iter().zip(b.rows()) {
            for (x, y) in ra.iter().zip(rb.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn corrupt_and_mismatched_model_files_are_rejected() {
        let dir = std::env::temp_dir().join(format!("veer-model-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let truncated = dir.join("t.json");
        std::fs::write(&truncated, "{\"version\": 1, \"hidden\": 4").unwrap();
        assert!(matches!(load_model(&truncated), Err(Error::CorruptFile(_))));
        let wrong = dir.join("v.json");
        std::fs::write(&wrong, "{\"version\": 99, \"hidden\": 4, \"horizon_len\": 2, \"params\": [], \"mean\": [0,0,0], \"scale\": [1,1,1]}").unwrap();
        assert!(matches!(load_model(&wrong), Err(Error::ModelVersion { found: 99, .. })));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn dataset_roundtrip() {
        let ds = toy_dataset(5, 4, 7);
        let dir = std::env::temp_dir().join(format!("veer-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.jsonl");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(ds, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
