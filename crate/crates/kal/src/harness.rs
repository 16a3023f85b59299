//! The benchmark harness: cross-validated annotation-budget
//! experiments.
//!
//! One *trial* fixes a fold and a seed, starts from a small labeled
//! set, and alternates training with batch selection until the budget
//! `b = n + p*q` is spent. After every training pass the model is
//! scored on the held-out fold, giving a learning curve over labeled
//! counts; the curve's normalized area (AUBC) is the headline number —
//! it rewards strategies that reach good models *early*. An
//! experiment averages trials over `folds x seeds`, tracks per-round
//! selection time against a resampled uniform baseline, and audits how
//! much the final model violates the domain rules on held-out data.
//!
//! Everything is deterministic given the configuration: folds,
//! initial labeled sets, training, and selection all derive from fixed
//! seeds, so any two strategies see byte-identical starting states.

use std::time::Instant;

use ndarray::ArrayView2;
use serde::Serialize;
use thiserror::Error;

use crate::data::{DataError, Dataset, Fold, Labels, fold_plan};
use crate::knowledge::{KnowledgeBase, KnowledgeError, TaskKind, add_uncertainty_rule};
use crate::lowering::{CompiledKnowledge, Generator, LoweringError, TNorm, compile};
use crate::model::{Model, ModelConfig, ModelError, Prediction, TrainConfig};
use crate::strategies::{
    SelectionContext, Strategy, StrategyError, default_group_cap,
};
use crate::xai::{XaiConfig, XaiError, predicted_classes, select_kal_xai};

/// Seed for the fold split, shared by every experiment so that all
/// strategies compare on identical folds.
pub const DEFAULT_FOLD_SEED: u64 = 17;

/// Monte-Carlo passes for the dropout-based strategies.
pub const DEFAULT_MC_PASSES: usize = 10;

/// How many times the uniform baseline is resampled per round when
/// measuring selection overhead.
const RANDOM_TIMING_REPS: u32 = 5;

/// How the per-rule batch cap is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiversityCap {
    /// `max(1, p/2)`.
    Auto,
    /// No balancing: pure top-`p`.
    Off,
    Fixed(usize),
}

impl DiversityCap {
    fn resolve(self, p: usize) -> Option<usize> {
        match self {
            DiversityCap::Auto => Some(default_group_cap(p)),
            DiversityCap::Off => None,
            DiversityCap::Fixed(cap) => Some(cap),
        }
    }
}

/// Annotation budget and optimizer settings for one dataset.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Budget {
    /// Initial labeled count.
    pub n: usize,
    /// Samples annotated per round.
    pub p: usize,
    /// Selection rounds.
    pub q: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Budget {
    /// Total labeled count at the end: `n + p*q`.
    pub fn final_labeled(&self) -> usize {
        self.n + self.p * self.q
    }
}

/// Named budget presets reproducing the benchmark tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// The headline comparison.
    Table1,
    /// The long-budget appendix runs.
    Appendix,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table1" => Ok(Preset::Table1),
            "appendix" => Ok(Preset::Appendix),
            other => Err(format!("unknown preset {other:?}; expected table1 or appendix")),
        }
    }
}

/// The budget a preset assigns to a bundled dataset, by name.
pub fn preset_budget(dataset: &str, preset: Preset) -> Option<Budget> {
    let b = |n, p, q, epochs, learning_rate| Budget { n, p, q, epochs, learning_rate };
    match (dataset, preset) {
        ("xor", Preset::Table1) => Some(b(10, 5, 18, 250, 1e-3)),
        ("iris", Preset::Table1) => Some(b(10, 5, 8, 200, 3e-3)),
        ("insurance", Preset::Table1) => Some(b(10, 10, 29, 200, 3e-3)),
        ("xor", Preset::Appendix) => Some(b(10, 5, 78, 250, 1e-3)),
        ("iris", Preset::Appendix) => Some(b(5, 5, 14, 200, 3e-3)),
        ("insurance", Preset::Appendix) => Some(b(10, 10, 29, 200, 3e-3)),
        _ => None,
    }
}

/// Full specification of an experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub budget: Budget,
    pub tnorm: TNorm,
    pub generator: Generator,
    /// Cross-validation folds.
    pub folds: usize,
    /// Run only the first this-many folds when set.
    pub fold_limit: Option<usize>,
    /// Model seeds; trials = folds x seeds.
    pub seeds: Vec<u64>,
    pub fold_seed: u64,
    pub mc_passes: usize,
    pub diversity: DiversityCap,
    /// Append the predict-confidently rule on classification tasks.
    pub uncertainty_rule: bool,
    /// Keep only the first `ceil(fraction * rules)` domain rules.
    pub knowledge_fraction: f64,
    pub hidden: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    /// Settings for the rule-extraction strategy.
    pub xai: XaiConfig,
    /// Worker threads; 1 runs trials serially.
    pub jobs: usize,
    /// Save each trial's final model here when set.
    pub snapshot_dir: Option<std::path::PathBuf>,
}

impl ExperimentConfig {
    pub fn new(strategy: Strategy, budget: Budget) -> ExperimentConfig {
        ExperimentConfig {
            strategy,
            budget,
            tnorm: TNorm::Product,
            generator: Generator::OneMinus,
            folds: 10,
            fold_limit: None,
            seeds: vec![0],
            fold_seed: DEFAULT_FOLD_SEED,
            mc_passes: DEFAULT_MC_PASSES,
            diversity: DiversityCap::Auto,
            uncertainty_rule: true,
            knowledge_fraction: 1.0,
            hidden: crate::model::DEFAULT_HIDDEN,
            dropout: 0.1,
            weight_decay: 1e-4,
            xai: XaiConfig::default(),
            jobs: 1,
            snapshot_dir: None,
        }
    }

    /// The preset configuration for a bundled dataset, if it has one.
    pub fn for_dataset(
        dataset: &Dataset,
        strategy: Strategy,
        preset: Preset,
    ) -> Option<ExperimentConfig> {
        preset_budget(&dataset.name, preset).map(|budget| ExperimentConfig::new(strategy, budget))
    }
}

/// Everything that can go wrong while running an experiment.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Lowering(#[from] LoweringError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Xai(#[from] XaiError),
}

/// One point of a learning curve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    /// Labeled samples when the model was scored.
    pub labeled: usize,
    /// Macro-F1 for classification, R^2 (natural units) for
    /// regression.
    pub primary: f64,
    /// Accuracy, on classification tasks.
    pub aux: Option<f64>,
}

/// Violations of one rule on held-out data.
#[derive(Clone, Debug, Serialize)]
pub struct RuleViolation {
    pub rule: String,
    pub violation: f64,
}

/// Rule violations of the final model on the held-out fold.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub per_rule: Vec<RuleViolation>,
    pub total: f64,
}

/// Relative change of an audited total against a reference, in
/// percent.
pub fn audit_pct_change(total: f64, reference: f64) -> f64 {
    (total - reference) / reference * 100.0
}

/// Sums rule violations of `preds` over `x_pred`, per rule and total.
pub fn knowledge_audit(
    kb: &CompiledKnowledge,
    x_pred: ArrayView2<f64>,
    preds: ArrayView2<f64>,
) -> AuditReport {
    let matrix = kb.violation_matrix(x_pred, preds);
    let per_rule: Vec<RuleViolation> = kb
        .rule_ids()
        .iter()
        .enumerate()
        .map(|(r, id)| RuleViolation { rule: id.to_string(), violation: matrix.column(r).sum() })
        .collect();
    let total = per_rule.iter().map(|r| r.violation).sum();
    AuditReport { per_rule, total }
}

/// Outcome of one fold x seed trial.
#[derive(Clone, Debug, Serialize)]
pub struct TrialOutcome {
    pub fold: usize,
    pub seed: u64,
    /// `q + 1` curve points, one per training pass.
    pub curve: Vec<CurvePoint>,
    /// Normalized area under the primary curve.
    pub aubc: f64,
    /// Normalized area under the accuracy curve, when classification.
    pub aubc_aux: Option<f64>,
    /// Mean wall-clock seconds one selection round took.
    pub selection_secs: f64,
    /// Mean seconds a uniform draw took on the same pools.
    pub random_secs: f64,
    /// Rule violations of the final model on the held-out fold.
    pub audit: Option<AuditReport>,
    /// Rule set extracted on the last round, for the
    /// rule-extraction strategy.
    pub extracted_rules: Option<String>,
}

/// Aggregated experiment results.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub strategy: String,
    pub tnorm: String,
    pub generator: String,
    pub budget: Budget,
    pub folds_run: usize,
    pub seeds: Vec<u64>,
    pub mean_aubc: f64,
    pub std_aubc: f64,
    pub mean_aubc_aux: Option<f64>,
    /// Curve of per-checkpoint means across trials.
    pub mean_curve: Vec<CurvePoint>,
    /// Mean seconds per selection round, and the uniform baseline.
    pub mean_selection_secs: f64,
    pub mean_random_secs: f64,
    /// Selection overhead relative to a uniform draw.
    pub time_ratio: f64,
    /// Mean audited violation totals across trials, when the dataset
    /// carries rules.
    pub mean_audit_total: Option<f64>,
    pub trials: Vec<TrialOutcome>,
}

// ---- metrics ----

/// Macro-averaged F1 over `class_count` classes. Classes absent from
/// both truth and prediction contribute zero, like the common
/// benchmark convention.
pub fn macro_f1(truth: &[usize], pred: &[usize], class_count: usize) -> f64 {
    assert_eq!(truth.len(), pred.len());
    let mut tp = vec![0usize; class_count];
    let mut fp = vec![0usize; class_count];
    let mut fn_ = vec![0usize; class_count];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    for c in 0..class_count {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom > 0 {
            sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    sum / class_count as f64
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    assert_eq!(truth.len(), pred.len());
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / truth.len() as f64
}

/// Coefficient of determination in natural units. Constant truth
/// yields 1 for a perfect fit and 0 otherwise. Can be negative.
pub fn r2(truth: &[f64], pred: &[f64]) -> f64 {
    assert_eq!(truth.len(), pred.len());
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Normalized area under a learning curve: the trapezoid integral
/// over labeled counts divided by the budget span, i.e. the average
/// metric level across the run.
pub fn aubc(curve: &[(usize, f64)]) -> f64 {
    assert!(curve.len() >= 2, "a curve needs at least two checkpoints");
    let mut area = 0.0;
    for pair in curve.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        assert!(x1 > x0, "labeled counts must increase");
        area += (x1 - x0) as f64 * (y0 + y1) / 2.0;
    }
    let span = (curve[curve.len() - 1].0 - curve[0].0) as f64;
    area / span
}

// ---- the experiment loop ----

/// Splits into a fixed sequence of per-trial seeds.
fn trial_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn round_seed(base: u64, round: usize, salt: u64) -> u64 {
    base.wrapping_add((round as u64).wrapping_mul(0x100_0000_01b3)).wrapping_add(salt)
}

/// Builds the rule set a trial selects with: the dataset rules cut to
/// the configured fraction, plus the predict-confidently rule on
/// classification tasks when enabled.
fn selection_knowledge(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<Option<KnowledgeBase>, HarnessError> {
    let base = dataset.knowledge()?;
    let keep = (cfg.knowledge_fraction * base.rules().len() as f64).ceil() as usize;
    let mut kb = base.with_rule_prefix(keep);
    if cfg.uncertainty_rule && dataset.schema.task.is_classification() {
        add_uncertainty_rule(&mut kb)?;
    }
    if kb.rules().is_empty() { Ok(None) } else { Ok(Some(kb)) }
}

/// The rule set audits run against: the dataset rules as authored,
/// cut to the configured fraction, never including the
/// predict-confidently rule.
fn audit_knowledge(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<Option<KnowledgeBase>, HarnessError> {
    let base = dataset.knowledge()?;
    let keep = (cfg.knowledge_fraction * base.rules().len() as f64).ceil() as usize;
    let kb = base.with_rule_prefix(keep);
    if kb.rules().is_empty() { Ok(None) } else { Ok(Some(kb)) }
}

fn validate(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let err = |msg: String| Err(HarnessError::Config(msg));
    if cfg.budget.n == 0 {
        return err("the initial labeled count n must be positive".into());
    }
    if cfg.budget.p == 0 || cfg.budget.q == 0 {
        return err("both the batch size p and round count q must be positive".into());
    }
    if cfg.seeds.is_empty() {
        return err("at least one seed is required".into());
    }
    if !(0.0..=1.0).contains(&cfg.knowledge_fraction) {
        return err(format!(
            "knowledge fraction {} is outside [0, 1]",
            cfg.knowledge_fraction
        ));
    }
    if let Some(limit) = cfg.fold_limit
        && limit == 0
    {
        return err("fold limit must be positive when set".into());
    }
    let smallest_train = dataset.len() - dataset.len().div_ceil(cfg.folds.max(1));
    if cfg.budget.final_labeled() > smallest_train {
        return err(format!(
            "budget n + p*q = {} exceeds the smallest training split (~{smallest_train} samples)",
            cfg.budget.final_labeled()
        ));
    }
    Ok(())
}

/// Runs the full grid of fold x seed trials and aggregates.
pub fn run_experiment(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, HarnessError> {
    validate(dataset, cfg)?;
    let plan = fold_plan(&dataset.labels, cfg.folds, cfg.fold_seed)?;
    let folds_run = cfg.fold_limit.map_or(plan.k(), |limit| limit.min(plan.k()));

    let selection_kb = match cfg.strategy {
        // The rule-extraction strategy builds its own rules.
        Strategy::KalXai => None,
        _ => selection_knowledge(dataset, cfg)?,
    };
    let compiled_selection = selection_kb
        .as_ref()
        .map(|kb| compile(kb, cfg.tnorm, cfg.generator))
        .transpose()?;
    let compiled_audit = audit_knowledge(dataset, cfg)?
        .as_ref()
        .map(|kb| compile(kb, cfg.tnorm, cfg.generator))
        .transpose()?;

    let mut jobs: Vec<(usize, u64)> = Vec::new();
    for fold_idx in 0..folds_run {
        for &seed in &cfg.seeds {
            jobs.push((fold_idx, seed));
        }
    }

    let run_one = |&(fold_idx, seed): &(usize, u64)| -> Result<TrialOutcome, HarnessError> {
        run_trial(
            dataset,
            cfg,
            compiled_selection.as_ref(),
            compiled_audit.as_ref(),
            &plan.folds[fold_idx],
            fold_idx,
            seed,
        )
    };

    let trials: Result<Vec<TrialOutcome>, HarnessError> = if cfg.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_one).collect())
    } else {
        jobs.iter().map(run_one).collect()
    };
    let trials = trials?;

    Ok(aggregate(dataset, cfg, folds_run, trials))
}

fn aggregate(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    folds_run: usize,
    trials: Vec<TrialOutcome>,
) -> ExperimentReport {
    let count = trials.len() as f64;
    let mean_aubc = trials.iter().map(|t| t.aubc).sum::<f64>() / count;
    let std_aubc = (trials.iter().map(|t| (t.aubc - mean_aubc).powi(2)).sum::<f64>() / count)
        .sqrt();
    let mean_aubc_aux = trials
        .iter()
        .map(|t| t.aubc_aux)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / count);
    let mut mean_curve: Vec<CurvePoint> = trials[0]
        .curve
        .iter()
        .map(|point| CurvePoint { labeled: point.labeled, primary: 0.0, aux: point.aux.map(|_| 0.0) })
        .collect();
    for trial in &trials {
        for (mean_point, point) in mean_curve.iter_mut().zip(&trial.curve) {
            mean_point.primary += point.primary / count;
            if let (Some(mean_aux), Some(aux)) = (mean_point.aux.as_mut(), point.aux) {
                *mean_aux += aux / count;
            }
        }
    }
    let mean_selection_secs = trials.iter().map(|t| t.selection_secs).sum::<f64>() / count;
    let mean_random_secs = trials.iter().map(|t| t.random_secs).sum::<f64>() / count;
    let audited: Vec<f64> = trials.iter().filter_map(|t| t.audit.as_ref().map(|a| a.total)).collect();
    let mean_audit_total = if audited.is_empty() {
        None
    } else {
        Some(audited.iter().sum::<f64>() / audited.len() as f64)
    };
    ExperimentReport {
        dataset: dataset.name.clone(),
        strategy: cfg.strategy.id().to_string(),
        tnorm: cfg.tnorm.id().to_string(),
        generator: cfg.generator.id().to_string(),
        budget: cfg.budget,
        folds_run,
        seeds: cfg.seeds.clone(),
        mean_aubc,
        std_aubc,
        mean_aubc_aux,
        mean_curve,
        mean_selection_secs,
        mean_random_secs,
        time_ratio: mean_selection_secs / mean_random_secs.max(1e-12),
        mean_audit_total,
        trials,
    }
}

/// Runs one fold x seed trial.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    selection_kb: Option<&CompiledKnowledge>,
    audit_kb: Option<&CompiledKnowledge>,
    fold: &Fold,
    fold_idx: usize,
    seed: u64,
) -> Result<TrialOutcome, HarnessError> {
    use rand::{RngExt, SeedableRng};
    let base_seed = trial_seed(seed, fold_idx);
    let task = dataset.schema.task;

    // Initial labeled set: a uniform draw from the training split.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base_seed);
    let mut train_indices = fold.train.clone();
    for i in 0..cfg.budget.n {
        let j = rng.random_range(i..train_indices.len());
        train_indices.swap(i, j);
    }
    let mut labeled: Vec<usize> = train_indices[..cfg.budget.n].to_vec();
    labeled.sort_unstable();
    let mut pool: Vec<usize> = train_indices[cfg.budget.n..].to_vec();
    pool.sort_unstable();

    let mut model = Model::new(
        &ModelConfig::new(dataset.schema.input_dim, dataset.schema.output_dim, task)
            .with_hidden(cfg.hidden)
            .with_dropout(cfg.dropout)
            .with_seed(base_seed),
    );
    if let Some((mean, std)) = dataset.target_stats {
        model.set_target_stats(mean, std);
    }

    let mut curve: Vec<CurvePoint> = Vec::with_capacity(cfg.budget.q + 1);
    let mut selection_secs = 0.0f64;
    let mut random_secs = 0.0f64;
    let mut extracted_rules = None;

    for round in 0..=cfg.budget.q {
        let train_cfg = TrainConfig {
            epochs: cfg.budget.epochs,
            learning_rate: cfg.budget.learning_rate,
            weight_decay: cfg.weight_decay,
            seed: round_seed(base_seed, round, 1),
            ..TrainConfig::default()
        };
        let x_train = crate::strategies::gather_rows(dataset.x_model.view(), &labeled);
        let y_train = dataset.labels.subset(&labeled);
        model.train(x_train.view(), &y_train, &train_cfg)?;
        curve.push(evaluate(&model, dataset, &fold.test, labeled.len()));

        if round == cfg.budget.q {
            break;
        }

        // Predictions over the pool, Monte-Carlo when the strategy
        // wants dropout disagreement.
        let x_pool = crate::strategies::gather_rows(dataset.x_model.view(), &pool);
        let preds = if cfg.strategy.wants_mc() {
            model.predict_mc(x_pool.view(), cfg.mc_passes, round_seed(base_seed, round, 2))
        } else {
            Prediction { mean: model.predict(x_pool.view()), passes: None }
        };

        let ctx = SelectionContext {
            x_model: dataset.x_model.view(),
            x_pred: dataset.x_pred.view(),
            unlabeled: &pool,
            labeled: &labeled,
            preds: &preds,
            kb: selection_kb,
            model: &model,
            labels: Some(&dataset.labels),
            p: cfg.budget.p,
            cap: cfg.diversity.resolve(cfg.budget.p),
            seed: round_seed(base_seed, round, 3),
            benchmark: true,
        };

        let result = match cfg.strategy {
            Strategy::KalXai => {
                let (result, kb) = select_kal_xai(&ctx, &dataset.class_names, &cfg.xai)?;
                extracted_rules = Some(kb.to_dsl());
                result
            }
            strategy => strategy.select(&ctx)?,
        };
        selection_secs += result.elapsed.as_secs_f64();

        // Throwaway uniform draws on the same pool, for the overhead
        // ratio.
        let timer = Instant::now();
        for rep in 0..RANDOM_TIMING_REPS {
            let throwaway_ctx = SelectionContext {
                x_model: dataset.x_model.view(),
                x_pred: dataset.x_pred.view(),
                unlabeled: &pool,
                labeled: &labeled,
                preds: &preds,
                kb: None,
                model: &model,
                labels: None,
                p: cfg.budget.p,
                cap: None,
                seed: round_seed(base_seed, round, 100 + rep as u64),
                benchmark: false,
            };
            let _ = Strategy::Random.select(&throwaway_ctx)?;
        }
        random_secs += timer.elapsed().as_secs_f64() / RANDOM_TIMING_REPS as f64;

        // Annotate: move the batch from the pool to the labeled set.
        let mut chosen = result.chosen;
        chosen.sort_unstable();
        pool.retain(|idx| !chosen.contains(idx));
        labeled.extend_from_slice(&chosen);
        labeled.sort_unstable();
    }

    let primary_curve: Vec<(usize, f64)> =
        curve.iter().map(|point| (point.labeled, point.primary)).collect();
    let aubc_primary = aubc(&primary_curve);
    let aubc_aux = curve
        .iter()
        .map(|point| point.aux.map(|aux| (point.labeled, aux)))
        .collect::<Option<Vec<(usize, f64)>>>()
        .map(|aux_curve| aubc(&aux_curve));

    // Audit the final model on the held-out fold.
    let audit = audit_kb.map(|kb| {
        let x_test = crate::strategies::gather_rows(dataset.x_model.view(), &fold.test);
        let x_test_pred = crate::strategies::gather_rows(dataset.x_pred.view(), &fold.test);
        let preds = model.predict(x_test.view());
        knowledge_audit(kb, x_test_pred.view(), preds.view())
    });

    if let Some(dir) = &cfg.snapshot_dir {
        model.save(&dir.join(format!("model_fold{fold_idx}_seed{seed}.bin")))?;
    }

    let q = cfg.budget.q as f64;
    Ok(TrialOutcome {
        fold: fold_idx,
        seed,
        curve,
        aubc: aubc_primary,
        aubc_aux,
        selection_secs: selection_secs / q,
        random_secs: random_secs / q,
        audit,
        extracted_rules,
    })
}

/// Scores the current model on the held-out rows.
fn evaluate(model: &Model, dataset: &Dataset, test: &[usize], labeled_count: usize) -> CurvePoint {
    let x_test = crate::strategies::gather_rows(dataset.x_model.view(), test);
    let outputs = model.predict(x_test.view());
    match (&dataset.labels, dataset.schema.task) {
        (Labels::Real(values), TaskKind::Regression) => {
            let truth: Vec<f64> = test.iter().map(|&i| values[i]).collect();
            let pred: Vec<f64> = outputs.column(0).to_vec();
            CurvePoint { labeled: labeled_count, primary: r2(&truth, &pred), aux: None }
        }
        (Labels::Classes(classes), task) => {
            let truth: Vec<usize> = test.iter().map(|&i| classes[i]).collect();
            let pred = predicted_classes(task, &outputs);
            let class_count = if task == TaskKind::Binary { 2 } else { dataset.schema.output_dim };
            CurvePoint {
                labeled: labeled_count,
                primary: macro_f1(&truth, &pred, class_count),
                aux: Some(accuracy(&truth, &pred)),
            }
        }
        _ => unreachable!("bundled datasets pair labels with their task"),
    }
}

/// Reruns an experiment at several knowledge fractions.
pub struct AblationPoint {
    pub fraction: f64,
    pub report: ExperimentReport,
}

pub fn knowledge_fraction_ablation(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    fractions: &[f64],
) -> Result<Vec<AblationPoint>, HarnessError> {
    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut step_cfg = cfg.clone();
        step_cfg.knowledge_fraction = fraction;
        let report = run_experiment(dataset, &step_cfg)?;
        points.push(AblationPoint { fraction, report });
    }
    Ok(points)
}
