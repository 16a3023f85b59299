//! A one-hidden-layer MLP with seeded, bitwise-reproducible training.
//!
//! The network is `input -> hidden (ReLU, optional dropout) -> output`,
//! with the output activation chosen by task: sigmoid per head for
//! binary and multilabel targets, softmax for multiclass, identity for
//! regression. Training is full-batch AdamW with decoupled weight
//! decay; every random choice (initialization, dropout masks) comes
//! from a caller-supplied seed, so the same configuration and data
//! always produce the same parameters bit for bit.
//!
//! Losses are computed from pre-activations in log-sum-exp form, which
//! keeps them finite at saturation and makes the analytic gradients
//! agree with central differences to high precision — the property
//! [`Model::gradient_check`] verifies.
//!
//! Regression targets are standardized internally using the dataset's
//! target statistics ([`Model::set_target_stats`]); predictions are
//! always reported back in natural units.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Labels;
use crate::knowledge::TaskKind;

/// Magic bytes opening a model snapshot file.
const SNAPSHOT_MAGIC: [u8; 4] = *b"KALM";

/// Default hidden width.
pub const DEFAULT_HIDDEN: usize = 100;

/// Shape and randomness of a fresh model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub task: TaskKind,
    /// Probability of dropping a hidden unit (inverted dropout).
    pub dropout: f64,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(input_dim: usize, output_dim: usize, task: TaskKind) -> Self {
        ModelConfig { input_dim, hidden: DEFAULT_HIDDEN, output_dim, task, dropout: 0.0, seed: 0 }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Optimizer settings for one training call. AdamW: first/second
/// moment averaging with bias correction, plus weight decay applied
/// directly to the parameters (decoupled from the gradient).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seed for dropout masks drawn during this call.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

/// What a training call reports back.
#[derive(Clone, Copy, Debug)]
pub struct TrainReport {
    /// Loss over the batch after the final step.
    pub final_loss: f64,
    pub epochs_run: usize,
}

/// Deterministic or Monte-Carlo predictions.
#[derive(Clone, Debug)]
pub struct Prediction {
    /// Natural-unit predictions, one row per sample: probabilities for
    /// classification heads, real values for regression.
    pub mean: Array2<f64>,
    /// Individual dropout passes when Monte-Carlo sampling was used.
    pub passes: Option<Vec<Array2<f64>>>,
}

impl Prediction {
    /// Number of Monte-Carlo passes behind `mean` (zero when
    /// deterministic).
    pub fn pass_count(&self) -> usize {
        self.passes.as_ref().map_or(0, Vec::len)
    }
}

/// Settings for the finite-difference gradient check.
#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Hidden pre-activations closer to zero than this get their bias
    /// nudged first, stepping the probe off the ReLU kink.
    pub kink_guard: f64,
    /// Floor for the relative-error denominator, so near-zero
    /// gradients are compared absolutely rather than amplifying
    /// difference-quotient noise.
    pub denom_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { step: 1e-5, kink_guard: 1e-4, denom_floor: 1e-6 }
    }
}

/// Result of a gradient check.
#[derive(Clone, Copy, Debug)]
pub struct GradCheckReport {
    /// Largest relative error between analytic and numeric gradients.
    pub max_rel_error: f64,
    /// How many parameters were probed.
    pub params_checked: usize,
}

/// Model and snapshot failures.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("labels do not fit the task: {0}")]
    LabelMismatch(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{0} is not supported for this task")]
    UnsupportedForTask(&'static str),
    #[error("snapshot i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad snapshot: {0}")]
    BadSnapshot(String),
}

/// The network. All parameters are `f64` in memory; snapshots store
/// `f32`.
#[derive(Clone, Debug)]
pub struct Model {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    task: TaskKind,
    dropout: f64,
    /// `(mean, std)` for standardizing regression targets.
    target_stats: Option<(f64, f64)>,
}

impl Model {
    /// A fresh network: uniform He-style fan-in initialization for the
    /// ReLU layer, Xavier for the output layer, zero biases.
    pub fn new(cfg: &ModelConfig) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (d, h, c) = (cfg.input_dim, cfg.hidden, cfg.output_dim);
        let lim1 = (6.0 / d as f64).sqrt();
        let lim2 = (6.0 / (h + c) as f64).sqrt();
        let mut uniform = |lim: f64| -> f64 { (rng.random::<f64>() * 2.0 - 1.0) * lim };
        let w1 = Array2::from_shape_fn((d, h), |_| uniform(lim1));
        let w2 = Array2::from_shape_fn((h, c), |_| uniform(lim2));
        Model {
            w1,
            b1: Array1::zeros(h),
            w2,
            b2: Array1::zeros(c),
            task: cfg.task,
            dropout: cfg.dropout,
            target_stats: None,
        }
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// Installs the target mean and standard deviation used to
    /// standardize regression targets during training and to convert
    /// predictions back to natural units.
    pub fn set_target_stats(&mut self, mean: f64, std: f64) {
        self.target_stats = Some((mean, std.max(1e-12)));
    }

    pub fn target_stats(&self) -> Option<(f64, f64)> {
        self.target_stats
    }

    /// Full-batch AdamW for `cfg.epochs` steps. Optimizer moments are
    /// fresh per call; parameters warm-start from wherever the model
    /// currently is.
    pub fn train(
        &mut self,
        x: ArrayView2<f64>,
        labels: &Labels,
        cfg: &TrainConfig,
    ) -> Result<TrainReport, ModelError> {
        if x.nrows() == 0 {
            return Err(ModelError::EmptyTrainingSet);
        }
        let targets = self.targets_from(labels, x.nrows())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut opt = AdamW::new(self, cfg);
        let mut final_loss = f64::NAN;
        for _ in 0..cfg.epochs {
            let mask = self.sample_mask(x.nrows(), &mut rng);
            let cache = self.forward(x, mask.as_ref());
            final_loss = self.loss_from_cache(&cache, &targets);
            let grads = self.backward(x, &cache, &targets);
            opt.step(self, &grads);
        }
        Ok(TrainReport { final_loss, epochs_run: cfg.epochs })
    }

    /// Deterministic natural-unit predictions (dropout off).
    pub fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let cache = self.forward(x, None);
        self.to_natural(cache.output)
    }

    /// Monte-Carlo dropout predictions: `passes` stochastic forward
    /// passes with dropout active, averaged. Zero passes (or a model
    /// without dropout) falls back to the deterministic prediction.
    pub fn predict_mc(&self, x: ArrayView2<f64>, passes: usize, seed: u64) -> Prediction {
        if passes == 0 || self.dropout == 0.0 {
            return Prediction { mean: self.predict(x), passes: None };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut all = Vec::with_capacity(passes);
        let mut mean = Array2::zeros((x.nrows(), self.output_dim()));
        for _ in 0..passes {
            let mask = self.sample_mask(x.nrows(), &mut rng);
            let cache = self.forward(x, mask.as_ref());
            let out = self.to_natural(cache.output);
            mean += &out;
            all.push(out);
        }
        mean /= passes as f64;
        Prediction { mean, passes: Some(all) }
    }

    /// Gradient of the per-sample supervised loss at `x_row` (one
    /// sample) with respect to the *input*, taking `class` as the true
    /// label. Classification only. Used by gradient-based attackers.
    pub fn input_gradient(&self, x_row: ArrayView1<f64>, class: usize) -> Result<Array1<f64>, ModelError> {
        if !self.task.is_classification() {
            return Err(ModelError::UnsupportedForTask("input gradients"));
        }
        let x = x_row.insert_axis(Axis(0));
        let cache = self.forward(x, None);
        let mut target = Array2::zeros((1, self.output_dim()));
        match self.task {
            TaskKind::Multiclass => target[[0, class]] = 1.0,
            _ => {
                if class > 0 {
                    target[[0, 0]] = 1.0;
                }
            }
        }
        // d loss / d z2 has the same sigmoid/softmax-minus-target form
        // for every classification head.
        let dz2 = &cache.output - &target;
        let da1 = dz2.dot(&self.w2.t());
        let dz1 = &da1 * &cache.z1.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        Ok(dz1.dot(&self.w1.t()).remove_axis(Axis(0)))
    }

    /// Compares analytic gradients against central differences of the
    /// loss over every parameter. Dropout is disabled for the probe; if
    /// any hidden pre-activation sits within `cfg.kink_guard` of zero,
    /// that unit's bias is nudged first so the finite difference does
    /// not straddle the ReLU kink.
    pub fn gradient_check(
        &self,
        x: ArrayView2<f64>,
        labels: &Labels,
        cfg: &GradCheckConfig,
    ) -> Result<GradCheckReport, ModelError> {
        let mut probe = self.clone();
        probe.dropout = 0.0;
        let targets = probe.targets_from(labels, x.nrows())?;
        // Step off ReLU kinks: the check perturbs parameters by
        // `step`, so any pre-activation within the guard of zero could
        // change activation pattern mid-difference. Nudging a bias
        // moves every sample on that unit, so re-check until clean.
        for _ in 0..16 {
            let z1 = x.dot(&probe.w1) + &probe.b1;
            let mut nudged = false;
            for j in 0..probe.b1.len() {
                if z1.column(j).iter().any(|z| z.abs() < cfg.kink_guard) {
                    probe.b1[j] += 3.0 * cfg.kink_guard;
                    nudged = true;
                }
            }
            if !nudged {
                break;
            }
        }

        let cache = probe.forward(x, None);
        let grads = probe.backward(x, &cache, &targets);
        let mut max_rel = 0.0f64;
        let mut checked = 0usize;

        let mut check_tensor = |probe: &mut Model, which: Tensor, analytic: &[f64]| {
            for (i, &a) in analytic.iter().enumerate() {
                let original = probe.param(which, i);
                probe.set_param(which, i, original + cfg.step);
                let up = probe.loss_at(x, &targets);
                probe.set_param(which, i, original - cfg.step);
                let down = probe.loss_at(x, &targets);
                probe.set_param(which, i, original);
                let numeric = (up - down) / (2.0 * cfg.step);
                let denom = (a.abs() + numeric.abs()).max(cfg.denom_floor);
                max_rel = max_rel.max((a - numeric).abs() / denom);
                checked += 1;
            }
        };
        let g = grads;
        check_tensor(&mut probe, Tensor::W1, g.w1.as_slice().unwrap());
        check_tensor(&mut probe, Tensor::B1, g.b1.as_slice().unwrap());
        check_tensor(&mut probe, Tensor::W2, g.w2.as_slice().unwrap());
        check_tensor(&mut probe, Tensor::B2, g.b2.as_slice().unwrap());
        Ok(GradCheckReport { max_rel_error: max_rel, params_checked: checked })
    }

    /// Writes a snapshot: 16-byte header (magic, input, hidden, output
    /// dims as little-endian u32) followed by all parameters as a flat
    /// little-endian f32 array in `w1, b1, w2, b2` order (row-major).
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut file = std::fs::File::create(path)?;
        let mut header = Vec::with_capacity(16);
        header.extend_from_slice(&SNAPSHOT_MAGIC);
        for dim in [self.input_dim(), self.hidden_dim(), self.output_dim()] {
            header.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        file.write_all(&header)?;
        let mut buf = Vec::new();
        for tensor in [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ] {
            for &v in tensor {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        file.write_all(&buf)?;
        Ok(())
    }

    /// Reads a snapshot written by [`Model::save`]. The task kind is
    /// not stored in the file and must be supplied; dropout and target
    /// statistics reset to their defaults.
    pub fn load(path: &Path, task: TaskKind) -> Result<Model, ModelError> {
        let mut file = std::fs::File::open(path)?;
        let mut header = [0u8; 16];
        file.read_exact(&mut header)
            .map_err(|_| ModelError::BadSnapshot("file shorter than its header".into()))?;
        if header[..4] != SNAPSHOT_MAGIC {
            return Err(ModelError::BadSnapshot("magic bytes missing".into()));
        }
        let dim = |i: usize| -> usize {
            u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
        };
        let (d, h, c) = (dim(0), dim(1), dim(2));
        if d == 0 || h == 0 || c == 0 {
            return Err(ModelError::BadSnapshot(format!("degenerate dims {d}x{h}x{c}")));
        }
        let expected = d * h + h + h * c + c;
        let mut body = Vec::new();
        file.read_to_end(&mut body)?;
        if body.len() != expected * 4 {
            return Err(ModelError::BadSnapshot(format!(
                "expected {} parameter bytes, found {}",
                expected * 4,
                body.len()
            )));
        }
        let mut values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64);
        let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
        let w1 = Array2::from_shape_vec((d, h), take(d * h)).unwrap();
        let b1 = Array1::from_vec(take(h));
        let w2 = Array2::from_shape_vec((h, c), take(h * c)).unwrap();
        let b2 = Array1::from_vec(take(c));
        Ok(Model { w1, b1, w2, b2, task, dropout: 0.0, target_stats: None })
    }

    // ---- internals ----

    fn sample_mask(&self, rows: usize, rng: &mut ChaCha8Rng) -> Option<Array2<f64>> {
        if self.dropout <= 0.0 {
            return None;
        }
        let keep = 1.0 - self.dropout;
        let scale = 1.0 / keep;
        Some(Array2::from_shape_fn((rows, self.hidden_dim()), |_| {
            if rng.random::<f64>() < keep { scale } else { 0.0 }
        }))
    }

    fn forward(&self, x: ArrayView2<f64>, mask: Option<&Array2<f64>>) -> ForwardCache {
        let z1 = x.dot(&self.w1) + &self.b1;
        let mut a1 = z1.mapv(|z| z.max(0.0));
        if let Some(mask) = mask {
            a1 *= mask;
        }
        let z2 = a1.dot(&self.w2) + &self.b2;
        let output = match self.task {
            TaskKind::Binary | TaskKind::Multilabel => z2.mapv(sigmoid),
            TaskKind::Multiclass => softmax_rows(&z2),
            TaskKind::Regression => z2.clone(),
        };
        ForwardCache { z1, a1, z2, output, mask: mask.cloned() }
    }

    /// Converts network-space output (probabilities, or standardized
    /// regression values) into natural units.
    fn to_natural(&self, output: Array2<f64>) -> Array2<f64> {
        match (self.task, self.target_stats) {
            (TaskKind::Regression, Some((mean, std))) => output.mapv(|v| v * std + mean),
            _ => output,
        }
    }

    /// Loss from pre-activations, numerically stable at saturation.
    fn loss_from_cache(&self, cache: &ForwardCache, targets: &Array2<f64>) -> f64 {
        let n = cache.z2.nrows() as f64;
        match self.task {
            TaskKind::Binary | TaskKind::Multilabel => {
                // BCE from logits: ln(1 + e^z) - y z, summed over heads.
                let mut total = 0.0;
                for (z, y) in cache.z2.iter().zip(targets.iter()) {
                    total += softplus(*z) - y * z;
                }
                total / n
            }
            TaskKind::Multiclass => {
                let mut total = 0.0;
                for (row, target) in cache.z2.outer_iter().zip(targets.outer_iter()) {
                    let lse = log_sum_exp(row.as_slice().unwrap());
                    for (z, y) in row.iter().zip(target.iter()) {
                        total += y * (lse - z);
                    }
                }
                total / n
            }
            TaskKind::Regression => {
                let mut total = 0.0;
                for (o, y) in cache.z2.iter().zip(targets.iter()) {
                    total += (o - y).powi(2);
                }
                total / n
            }
        }
    }

    fn loss_at(&self, x: ArrayView2<f64>, targets: &Array2<f64>) -> f64 {
        let cache = self.forward(x, None);
        self.loss_from_cache(&cache, targets)
    }

    fn backward(&self, x: ArrayView2<f64>, cache: &ForwardCache, targets: &Array2<f64>) -> Grads {
        let n = x.nrows() as f64;
        // For every task the output-layer gradient collapses to
        // (activation - target) / n, times 2 for squared error.
        let mut dz2 = (&cache.output - targets) / n;
        if self.task == TaskKind::Regression {
            dz2 *= 2.0;
        }
        let gw2 = cache.a1.t().dot(&dz2);
        let gb2 = dz2.sum_axis(Axis(0));
        let mut da1 = dz2.dot(&self.w2.t());
        if let Some(mask) = &cache.mask {
            da1 *= mask;
        }
        let dz1 = &da1 * &cache.z1.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        let gw1 = x.t().dot(&dz1);
        let gb1 = dz1.sum_axis(Axis(0));
        Grads { w1: gw1, b1: gb1, w2: gw2, b2: gb2 }
    }

    /// Shapes `labels` into a target matrix for this task, with
    /// regression targets standardized.
    fn targets_from(&self, labels: &Labels, rows: usize) -> Result<Array2<f64>, ModelError> {
        if labels.len() != rows {
            return Err(ModelError::LabelMismatch(format!(
                "{} labels for {rows} samples",
                labels.len()
            )));
        }
        let c = self.output_dim();
        match (self.task, labels) {
            (TaskKind::Binary, Labels::Classes(classes)) => {
                if c != 1 {
                    return Err(ModelError::LabelMismatch(format!(
                        "binary task with {c} output heads"
                    )));
                }
                let mut t = Array2::zeros((rows, 1));
                for (i, &class) in classes.iter().enumerate() {
                    if class > 1 {
                        return Err(ModelError::LabelMismatch(format!(
                            "class {class} in a binary task"
                        )));
                    }
                    t[[i, 0]] = class as f64;
                }
                Ok(t)
            }
            (TaskKind::Multiclass, Labels::Classes(classes)) => {
                let mut t = Array2::zeros((rows, c));
                for (i, &class) in classes.iter().enumerate() {
                    if class >= c {
                        return Err(ModelError::LabelMismatch(format!(
                            "class {class} with only {c} heads"
                        )));
                    }
                    t[[i, class]] = 1.0;
                }
                Ok(t)
            }
            (TaskKind::Multilabel, Labels::Bitmap(bits)) => {
                if bits.ncols() != c {
                    return Err(ModelError::LabelMismatch(format!(
                        "{} label columns with {c} heads",
                        bits.ncols()
                    )));
                }
                Ok(bits.clone())
            }
            (TaskKind::Regression, Labels::Real(values)) => {
                if c != 1 {
                    return Err(ModelError::UnsupportedForTask("multi-head regression"));
                }
                let (mean, std) = self.target_stats.unwrap_or((0.0, 1.0));
                let mut t = Array2::zeros((rows, 1));
                for (i, &v) in values.iter().enumerate() {
                    t[[i, 0]] = (v - mean) / std;
                }
                Ok(t)
            }
            (task, labels) => Err(ModelError::LabelMismatch(format!(
                "{:?} labels cannot supervise a {} task",
                label_shape(labels),
                task.id()
            ))),
        }
    }

    fn param(&self, which: Tensor, i: usize) -> f64 {
        match which {
            Tensor::W1 => self.w1.as_slice().unwrap()[i],
            Tensor::B1 => self.b1[i],
            Tensor::W2 => self.w2.as_slice().unwrap()[i],
            Tensor::B2 => self.b2[i],
        }
    }

    fn set_param(&mut self, which: Tensor, i: usize, value: f64) {
        match which {
            Tensor::W1 => self.w1.as_slice_mut().unwrap()[i] = value,
            Tensor::B1 => self.b1[i] = value,
            Tensor::W2 => self.w2.as_slice_mut().unwrap()[i] = value,
            Tensor::B2 => self.b2[i] = value,
        }
    }
}

#[derive(Clone, Copy)]
enum Tensor {
    W1,
    B1,
    W2,
    B2,
}

fn label_shape(labels: &Labels) -> &'static str {
    match labels {
        Labels::Classes(_) => "class-index",
        Labels::Bitmap(_) => "bitmap",
        Labels::Real(_) => "real-valued",
    }
}

struct ForwardCache {
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    output: Array2<f64>,
    mask: Option<Array2<f64>>,
}

struct Grads {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

/// Decoupled-weight-decay Adam over the four parameter tensors.
struct AdamW {
    m: Grads,
    v: Grads,
    t: usize,
    lr: f64,
    wd: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamW {
    fn new(model: &Model, cfg: &TrainConfig) -> AdamW {
        let zero = || Grads {
            w1: Array2::zeros(model.w1.raw_dim()),
            b1: Array1::zeros(model.b1.raw_dim()),
            w2: Array2::zeros(model.w2.raw_dim()),
            b2: Array1::zeros(model.b2.raw_dim()),
        };
        AdamW {
            m: zero(),
            v: zero(),
            t: 0,
            lr: cfg.learning_rate,
            wd: cfg.weight_decay,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    fn step(&mut self, model: &mut Model, grads: &Grads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (lr, wd, b1, b2, eps) = (self.lr, self.wd, self.beta1, self.beta2, self.eps);
        let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *param -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *param);
        };
        for (((p, &g), m), v) in model
            .w1
            .iter_mut()
            .zip(grads.w1.iter())
            .zip(self.m.w1.iter_mut())
            .zip(self.v.w1.iter_mut())
        {
            update(p, g, m, v);
        }
        for (((p, &g), m), v) in model
            .b1
            .iter_mut()
            .zip(grads.b1.iter())
            .zip(self.m.b1.iter_mut())
            .zip(self.v.b1.iter_mut())
        {
            update(p, g, m, v);
        }
        for (((p, &g), m), v) in model
            .w2
            .iter_mut()
            .zip(grads.w2.iter())
            .zip(self.m.w2.iter_mut())
            .zip(self.v.w2.iter_mut())
        {
            update(p, g, m, v);
        }
        for (((p, &g), m), v) in model
            .b2
            .iter_mut()
            .zip(grads.b2.iter())
            .zip(self.m.b2.iter_mut())
            .zip(self.v.b2.iter_mut())
        {
            update(p, g, m, v);
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_sum_exp(zs: &[f64]) -> f64 {
    let max = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + zs.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.outer_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
