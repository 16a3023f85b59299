//! Pool-based annotation strategies.
//!
//! Every strategy answers the same question: given a trained model and
//! an unlabeled pool, which `p` samples are worth annotating next?
//! [`Strategy::select`] scores the pool, ranks it (ties broken toward
//! the lower pool position, everywhere, so equal-scored strategies are
//! exactly interchangeable), and returns the chosen dataset row
//! indices together with the full score vector and wall-clock time.
//!
//! The knowledge-driven strategy scores each sample by the total
//! violation its current prediction inflicts on the rule set, and can
//! spread a batch across rules: each sample belongs to the rule it
//! violates hardest, and a per-rule cap keeps one rule from filling
//! the whole batch. The rest of the roster is the usual active
//! learning field — uncertainty sampling in three flavors, dropout
//! disagreement, core-set geometry, clustering, a supervised-loss
//! skyline, and a gradient-based adversarial distance probe.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::Labels;
use crate::knowledge::TaskKind;
use crate::lowering::CompiledKnowledge;
use crate::model::{Model, Prediction};

/// Numerical floor for probabilities before taking logarithms.
const PROB_CLIP: f64 = 1e-12;

/// Iterations and step size of the adversarial probe.
const BIM_STEP: f64 = 0.05;
const BIM_MAX_ITERS: usize = 10;

/// Default per-rule cap when batch diversity is on.
pub fn default_group_cap(p: usize) -> usize {
    (p / 2).max(1)
}

/// Everything a strategy may look at when scoring the pool.
pub struct SelectionContext<'a> {
    /// Model-space features for the whole dataset (row per sample).
    pub x_model: ArrayView2<'a, f64>,
    /// Natural-unit features for the whole dataset, used when
    /// evaluating rules.
    pub x_pred: ArrayView2<'a, f64>,
    /// Dataset row indices currently unlabeled, in pool order.
    pub unlabeled: &'a [usize],
    /// Dataset row indices already annotated.
    pub labeled: &'a [usize],
    /// Predictions for the unlabeled rows, aligned with `unlabeled`.
    /// Carries per-pass outputs when Monte-Carlo dropout was used.
    pub preds: &'a Prediction,
    /// Compiled rules, for the knowledge-driven strategies.
    pub kb: Option<&'a CompiledKnowledge>,
    /// The current model, for strategies that probe it directly.
    pub model: &'a Model,
    /// Ground-truth labels for the whole dataset. Only available in
    /// benchmark mode, and only the supervised-loss skyline reads it.
    pub labels: Option<&'a Labels>,
    /// Batch size to select.
    pub p: usize,
    /// Per-rule batch cap; `None` disables diversity balancing.
    pub cap: Option<usize>,
    /// Seed for any randomness the strategy needs.
    pub seed: u64,
    /// Whether ground truth may be consulted.
    pub benchmark: bool,
}

/// Outcome of one selection round.
#[derive(Clone, Debug)]
pub struct SelectionResult {
    /// Chosen dataset row indices, in selection order.
    pub chosen: Vec<usize>,
    /// Scores aligned with the context's `unlabeled` slice (higher
    /// means picked earlier).
    pub scores: Vec<f64>,
    /// For knowledge-driven selection: the rule index each unlabeled
    /// sample violates hardest, aligned with `unlabeled`.
    pub groups: Option<Vec<usize>>,
    /// Wall-clock time the strategy spent.
    pub elapsed: Duration,
}

/// Why a strategy could not run.
#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("the unlabeled pool is empty")]
    EmptyPool,
    #[error("this strategy needs a compiled rule set with at least one rule")]
    NeedsKnowledge,
    #[error("this strategy needs Monte-Carlo predictions (multiple dropout passes)")]
    NeedsMcPasses,
    #[error("this strategy reads ground truth and only runs in benchmark mode")]
    NeedsBenchmark,
    #[error("this strategy is driven by the rule-extraction selector, not directly")]
    NeedsXaiDriver,
    #[error("{0}")]
    UnsupportedTask(&'static str),
}

/// The strategy roster. String ids follow the common benchmark
/// shorthand: a `_d` suffix marks the Monte-Carlo dropout variant of
/// the same score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Total rule violation of the current predictions.
    Kal,
    /// Rule violation of the Monte-Carlo mean prediction.
    KalDropout,
    /// Rule violation against a rule set re-extracted from the model
    /// each round. Dispatched by the rule-extraction selector.
    KalXai,
    /// Predictive entropy.
    Entropy,
    EntropyDropout,
    /// Negative gap between the two most probable classes.
    Margin,
    MarginDropout,
    /// One minus the top-class probability.
    LeastConf,
    LeastConfDropout,
    /// Mutual information between parameters and label under dropout.
    Bald,
    /// Greedy core-set cover distance.
    KCenter,
    /// Per-cluster representatives from seeded k-means.
    KMeans,
    /// True supervised loss — an oracle skyline, benchmark only.
    SupLoss,
    /// Negative distance to the nearest adversarial flip.
    AdvBim,
    /// Uniform without replacement.
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 15] = [
        Strategy::Kal,
        Strategy::KalDropout,
        Strategy::KalXai,
        Strategy::Entropy,
        Strategy::EntropyDropout,
        Strategy::Margin,
        Strategy::MarginDropout,
        Strategy::LeastConf,
        Strategy::LeastConfDropout,
        Strategy::Bald,
        Strategy::KCenter,
        Strategy::KMeans,
        Strategy::SupLoss,
        Strategy::AdvBim,
        Strategy::Random,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Strategy::Kal => "kal",
            Strategy::KalDropout => "kal_d",
            Strategy::KalXai => "kal_xai",
            Strategy::Entropy => "entropy",
            Strategy::EntropyDropout => "entropy_d",
            Strategy::Margin => "margin",
            Strategy::MarginDropout => "margin_d",
            Strategy::LeastConf => "leastconf",
            Strategy::LeastConfDropout => "leastconf_d",
            Strategy::Bald => "bald",
            Strategy::KCenter => "kcenter",
            Strategy::KMeans => "kmeans",
            Strategy::SupLoss => "suploss",
            Strategy::AdvBim => "adv_bim",
            Strategy::Random => "random",
        }
    }

    /// Whether the harness should hand this strategy Monte-Carlo
    /// predictions instead of a single deterministic pass.
    pub fn wants_mc(self) -> bool {
        matches!(
            self,
            Strategy::KalDropout
                | Strategy::EntropyDropout
                | Strategy::MarginDropout
                | Strategy::LeastConfDropout
                | Strategy::Bald
        )
    }

    /// Whether this strategy reads ground-truth labels.
    pub fn wants_labels(self) -> bool {
        self == Strategy::SupLoss
    }

    /// Scores and ranks the pool, returning the batch.
    pub fn select(self, ctx: &SelectionContext) -> Result<SelectionResult, StrategyError> {
        if ctx.unlabeled.is_empty() {
            return Err(StrategyError::EmptyPool);
        }
        assert_eq!(
            ctx.preds.mean.nrows(),
            ctx.unlabeled.len(),
            "predictions must align with the unlabeled pool"
        );
        let start = Instant::now();
        let mut result = match self {
            Strategy::Kal | Strategy::KalDropout => select_kal(ctx)?,
            Strategy::KalXai => return Err(StrategyError::NeedsXaiDriver),
            Strategy::Entropy | Strategy::EntropyDropout => {
                by_score(ctx, uncertainty_scores(ctx, UncertaintyScore::Entropy)?)
            }
            Strategy::Margin | Strategy::MarginDropout => {
                by_score(ctx, uncertainty_scores(ctx, UncertaintyScore::Margin)?)
            }
            Strategy::LeastConf | Strategy::LeastConfDropout => {
                by_score(ctx, uncertainty_scores(ctx, UncertaintyScore::LeastConf)?)
            }
            Strategy::Bald => by_score(ctx, bald_scores(ctx)?),
            Strategy::KCenter => select_kcenter(ctx),
            Strategy::KMeans => select_kmeans(ctx),
            Strategy::SupLoss => by_score(ctx, suploss_scores(ctx)?),
            Strategy::AdvBim => by_score(ctx, adv_bim_scores(ctx)?),
            Strategy::Random => select_random(ctx),
        };
        result.elapsed = start.elapsed();
        Ok(result)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|strategy| strategy.id() == s)
            .ok_or_else(|| {
                let ids: Vec<&str> = Strategy::ALL.iter().map(|s| s.id()).collect();
                format!("unknown strategy {s:?}; expected one of {}", ids.join(", "))
            })
    }
}

/// Pool positions sorted by score, best first. Ties go to the lower
/// position, which makes strategies with order-equivalent scores
/// produce byte-identical batches.
pub fn ranked_indices(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Top-`p` by score, mapped from pool positions to dataset indices.
fn by_score(ctx: &SelectionContext, scores: Vec<f64>) -> SelectionResult {
    let order = ranked_indices(&scores);
    let chosen = order
        .into_iter()
        .take(ctx.p.min(ctx.unlabeled.len()))
        .map(|pos| ctx.unlabeled[pos])
        .collect();
    SelectionResult { chosen, scores, groups: None, elapsed: Duration::ZERO }
}

// ---- knowledge-driven selection ----

fn select_kal(ctx: &SelectionContext) -> Result<SelectionResult, StrategyError> {
    let kb = match ctx.kb {
        Some(kb) if !kb.rules().is_empty() => kb,
        _ => return Err(StrategyError::NeedsKnowledge),
    };
    let x_pred = gather_rows(ctx.x_pred, ctx.unlabeled);
    let violations = kb.violation_matrix(x_pred.view(), ctx.preds.mean.view());
    let mut scores = Vec::with_capacity(ctx.unlabeled.len());
    let mut groups = Vec::with_capacity(ctx.unlabeled.len());
    for row in violations.outer_iter() {
        scores.push(row.sum());
        let mut best = 0usize;
        for (r, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = r;
            }
        }
        groups.push(best);
    }
    let order = ranked_indices(&scores);
    let p = ctx.p.min(ctx.unlabeled.len());
    let positions = match ctx.cap {
        Some(cap) => capped_walk(&order, &groups, p, cap),
        None => order.into_iter().take(p).collect(),
    };
    let chosen = positions.into_iter().map(|pos| ctx.unlabeled[pos]).collect();
    Ok(SelectionResult { chosen, scores, groups: Some(groups), elapsed: Duration::ZERO })
}

/// Walks the ranked order accepting at most `cap` samples per group;
/// if the cap exhausts the walk before the batch fills, the remainder
/// is topped up purely by score.
fn capped_walk(order: &[usize], groups: &[usize], p: usize, cap: usize) -> Vec<usize> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    let mut taken = vec![false; order.len()];
    let mut chosen = Vec::with_capacity(p);
    for &pos in order {
        if chosen.len() == p {
            break;
        }
        let count = counts.entry(groups[pos]).or_insert(0);
        if *count < cap {
            *count += 1;
            taken[pos] = true;
            chosen.push(pos);
        }
    }
    if chosen.len() < p {
        for &pos in order {
            if chosen.len() == p {
                break;
            }
            if !taken[pos] {
                taken[pos] = true;
                chosen.push(pos);
            }
        }
    }
    chosen
}

// ---- uncertainty family ----

#[derive(Clone, Copy)]
enum UncertaintyScore {
    Entropy,
    Margin,
    LeastConf,
}

fn uncertainty_scores(
    ctx: &SelectionContext,
    kind: UncertaintyScore,
) -> Result<Vec<f64>, StrategyError> {
    let task = ctx.model.task();
    let mut scores = Vec::with_capacity(ctx.unlabeled.len());
    for row in ctx.preds.mean.outer_iter() {
        let dist = class_distribution(task, row)?;
        scores.push(match kind {
            UncertaintyScore::Entropy => entropy(&dist),
            UncertaintyScore::Margin => {
                let (top, second) = two_largest(&dist);
                -(top - second)
            }
            UncertaintyScore::LeastConf => 1.0 - dist.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(scores)
}

/// Turns one prediction row into a distribution over the main
/// classes: binary heads become the two-class split, softmax rows
/// pass through, and independent multilabel heads are squashed
/// through a softmax over their logits.
fn class_distribution(task: TaskKind, row: ArrayView1<f64>) -> Result<Vec<f64>, StrategyError> {
    let clip = |v: f64| v.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    match task {
        TaskKind::Binary => {
            let f = clip(row[0]);
            Ok(vec![1.0 - f, f])
        }
        TaskKind::Multiclass => Ok(row.iter().map(|&v| clip(v)).collect()),
        TaskKind::Multilabel => {
            let logits: Vec<f64> = row
                .iter()
                .map(|&v| {
                    let p = clip(v);
                    p.ln() - (1.0 - p).ln()
                })
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            Ok(exps.into_iter().map(|e| e / sum).collect())
        }
        TaskKind::Regression => Err(StrategyError::UnsupportedTask(
            "uncertainty scores need classification outputs",
        )),
    }
}

fn entropy(dist: &[f64]) -> f64 {
    -dist.iter().map(|&p| p * p.ln()).sum::<f64>()
}

fn two_largest(dist: &[f64]) -> (f64, f64) {
    let mut top = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &p in dist {
        if p > top {
            second = top;
            top = p;
        } else if p > second {
            second = p;
        }
    }
    (top, second)
}

fn argmax_class(task: TaskKind, row: ArrayView1<f64>) -> usize {
    match task {
        TaskKind::Binary => usize::from(row[0] >= 0.5),
        _ => {
            let mut best = 0usize;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        }
    }
}

// ---- dropout disagreement ----

fn bald_scores(ctx: &SelectionContext) -> Result<Vec<f64>, StrategyError> {
    let passes = ctx.preds.passes.as_ref().ok_or(StrategyError::NeedsMcPasses)?;
    if passes.len() < 2 {
        return Err(StrategyError::NeedsMcPasses);
    }
    let task = ctx.model.task();
    let t = passes.len() as f64;
    let mut scores = Vec::with_capacity(ctx.unlabeled.len());
    for pos in 0..ctx.unlabeled.len() {
        let mut mean_dist: Vec<f64> = Vec::new();
        let mut mean_entropy = 0.0;
        for pass in passes {
            let dist = class_distribution(task, pass.row(pos))?;
            if mean_dist.is_empty() {
                mean_dist = vec![0.0; dist.len()];
            }
            for (m, d) in mean_dist.iter_mut().zip(&dist) {
                *m += d / t;
            }
            mean_entropy += entropy(&dist) / t;
        }
        scores.push(entropy(&mean_dist) - mean_entropy);
    }
    Ok(scores)
}

// ---- geometry ----

/// Greedy core-set cover: each pick maximizes the squared distance to
/// the nearest already-covered point (labeled or previously chosen).
/// Distances are recomputed from scratch on every pick — the strategy
/// is kept literal rather than cached.
fn select_kcenter(ctx: &SelectionContext) -> SelectionResult {
    let p = ctx.p.min(ctx.unlabeled.len());
    let mut centers: Vec<usize> = ctx.labeled.to_vec();
    let mut taken = vec![false; ctx.unlabeled.len()];
    let mut chosen = Vec::with_capacity(p);

    // Reported scores: distance to the labeled set before any picks.
    let scores: Vec<f64> = ctx
        .unlabeled
        .iter()
        .map(|&idx| min_sq_dist(ctx.x_model, idx, ctx.labeled))
        .collect();

    for _ in 0..p {
        let mut best_pos: Option<usize> = None;
        let mut best_dist = f64::NEG_INFINITY;
        for (pos, &idx) in ctx.unlabeled.iter().enumerate() {
            if taken[pos] {
                continue;
            }
            let d = min_sq_dist(ctx.x_model, idx, &centers);
            if d > best_dist {
                best_dist = d;
                best_pos = Some(pos);
            }
        }
        let pos = best_pos.expect("pool has candidates left");
        taken[pos] = true;
        centers.push(ctx.unlabeled[pos]);
        chosen.push(ctx.unlabeled[pos]);
    }
    SelectionResult { chosen, scores, groups: None, elapsed: Duration::ZERO }
}

fn min_sq_dist(x: ArrayView2<f64>, from: usize, to: &[usize]) -> f64 {
    let row = x.row(from);
    let mut best = f64::INFINITY;
    for &idx in to {
        let mut d = 0.0;
        for (a, b) in row.iter().zip(x.row(idx).iter()) {
            d += (a - b) * (a - b);
        }
        best = best.min(d);
    }
    best
}

/// Seeded k-means over the pool with one representative per cluster:
/// k-means++ initialization, Lloyd iterations to a movement tolerance,
/// empty clusters reseeded to the point farthest from its centroid.
fn select_kmeans(ctx: &SelectionContext) -> SelectionResult {
    let m = ctx.unlabeled.len();
    let k = ctx.p.min(m);
    let points = gather_rows(ctx.x_model, ctx.unlabeled);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);

    // k-means++ seeding.
    let mut centroids: Vec<Array1<f64>> = Vec::with_capacity(k);
    centroids.push(points.row(rng.random_range(0..m)).to_owned());
    while centroids.len() < k {
        let d2: Vec<f64> = (0..m)
            .map(|i| nearest_centroid(points.row(i), &centroids).1)
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            rng.random_range(0..m)
        };
        centroids.push(points.row(next).to_owned());
    }

    // Lloyd iterations.
    let mut assignment = vec![0usize; m];
    for _ in 0..100 {
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = nearest_centroid(points.row(i), &centroids).0;
        }
        let dim = points.ncols();
        let mut sums = vec![Array1::<f64>::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums[c] += &points.row(i);
            counts[c] += 1;
        }
        let mut shift = 0.0;
        for c in 0..k {
            let new = if counts[c] > 0 {
                &sums[c] / counts[c] as f64
            } else {
                // Reseed an empty cluster at the point farthest from
                // its current centroid (lowest index on ties).
                let mut far = 0usize;
                let mut far_d = f64::NEG_INFINITY;
                for i in 0..m {
                    let d = sq_dist(points.row(i), centroids[assignment[i]].view());
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                points.row(far).to_owned()
            };
            shift += sq_dist(new.view(), centroids[c].view());
            centroids[c] = new;
        }
        if shift < 1e-6 {
            break;
        }
    }

    // One representative per centroid: the nearest not-yet-chosen
    // pool point, scanning in pool order.
    let mut taken = vec![false; m];
    let mut chosen = Vec::with_capacity(k);
    for centroid in &centroids {
        let mut best: Option<usize> = None;
        let mut best_d = f64::INFINITY;
        for (i, taken_flag) in taken.iter().enumerate() {
            if *taken_flag {
                continue;
            }
            let d = sq_dist(points.row(i), centroid.view());
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        if let Some(pos) = best {
            taken[pos] = true;
            chosen.push(ctx.unlabeled[pos]);
        }
    }
    let scores: Vec<f64> = (0..m)
        .map(|i| -nearest_centroid(points.row(i), &centroids).1)
        .collect();
    SelectionResult { chosen, scores, groups: None, elapsed: Duration::ZERO }
}

fn nearest_centroid(point: ArrayView1<f64>, centroids: &[Array1<f64>]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid.view());
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---- oracle skyline ----

fn suploss_scores(ctx: &SelectionContext) -> Result<Vec<f64>, StrategyError> {
    if !ctx.benchmark {
        return Err(StrategyError::NeedsBenchmark);
    }
    let labels = ctx.labels.ok_or(StrategyError::NeedsBenchmark)?;
    let task = ctx.model.task();
    let mut scores = Vec::with_capacity(ctx.unlabeled.len());
    for (pos, &idx) in ctx.unlabeled.iter().enumerate() {
        let row = ctx.preds.mean.row(pos);
        let loss = match (task, labels) {
            (TaskKind::Binary | TaskKind::Multiclass, Labels::Classes(classes)) => {
                let dist = class_distribution(task, row)?;
                -dist[classes[idx]].ln()
            }
            (TaskKind::Multilabel, Labels::Bitmap(bits)) => {
                let mut total = 0.0;
                for (head, &y) in bits.row(idx).iter().enumerate() {
                    let f = row[head].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                    total -= y * f.ln() + (1.0 - y) * (1.0 - f).ln();
                }
                total
            }
            (TaskKind::Regression, Labels::Real(values)) => (row[0] - values[idx]).powi(2),
            _ => {
                return Err(StrategyError::UnsupportedTask(
                    "labels do not match the model task",
                ));
            }
        };
        scores.push(loss);
    }
    Ok(scores)
}

// ---- adversarial distance ----

/// Iterative sign-gradient perturbation: ascend the supervised loss of
/// the currently predicted class until the prediction flips, and score
/// by how little perturbation that took (closer flips rank higher).
/// Samples that never flip within the iteration budget rank last.
fn adv_bim_scores(ctx: &SelectionContext) -> Result<Vec<f64>, StrategyError> {
    let task = ctx.model.task();
    if !task.is_classification() {
        return Err(StrategyError::UnsupportedTask(
            "adversarial distance needs classification outputs",
        ));
    }
    let mut scores = Vec::with_capacity(ctx.unlabeled.len());
    for (pos, &idx) in ctx.unlabeled.iter().enumerate() {
        let origin = ctx.x_model.row(idx).to_owned();
        let start_class = argmax_class(task, ctx.preds.mean.row(pos));
        let mut x = origin.clone();
        let mut score = f64::NEG_INFINITY;
        for _ in 0..BIM_MAX_ITERS {
            let grad = ctx
                .model
                .input_gradient(x.view(), start_class)
                .expect("classification model provides input gradients");
            x.zip_mut_with(&grad, |xi, g| *xi += BIM_STEP * g.signum());
            let out = ctx.model.predict(x.view().insert_axis(Axis(0)));
            if argmax_class(task, out.row(0)) != start_class {
                let eps = &x - &origin;
                score = -eps.iter().map(|e| e * e).sum::<f64>().sqrt();
                break;
            }
        }
        scores.push(score);
    }
    Ok(scores)
}

// ---- random ----

fn select_random(ctx: &SelectionContext) -> SelectionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let p = ctx.p.min(ctx.unlabeled.len());
    let mut positions: Vec<usize> = (0..ctx.unlabeled.len()).collect();
    // Partial Fisher-Yates: the first p slots become the sample.
    for i in 0..p {
        let j = rng.random_range(i..positions.len());
        positions.swap(i, j);
    }
    let chosen = positions[..p].iter().map(|&pos| ctx.unlabeled[pos]).collect();
    SelectionResult {
        chosen,
        scores: vec![0.0; ctx.unlabeled.len()],
        groups: None,
        elapsed: Duration::ZERO,
    }
}

// ---- shared helpers ----

/// Copies the given dataset rows into a dense matrix, in order.
pub fn gather_rows(x: ArrayView2<f64>, indices: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((indices.len(), x.ncols()));
    for (row, &idx) in indices.iter().enumerate() {
        out.row_mut(row).assign(&x.row(idx));
    }
    out
}
