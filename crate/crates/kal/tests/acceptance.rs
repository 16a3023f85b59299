//! The acceptance gate: one test per criterion, each printing a
//! single PASS/FAIL line with the measured numbers.
//!
//! Run `cargo test --test acceptance -- --nocapture` to watch the
//! lines appear; without `--nocapture` they only surface on failure.
//! The benchmark runs behind criteria 5, 8, and 11 are computed once
//! and shared. Every run is seeded, so each verdict reproduces
//! bitwise on the same build.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kal::data::{Dataset, Labels, insurance, iris, make_xor};
use kal::harness::{
    Budget, DiversityCap, ExperimentConfig, ExperimentReport, Preset, knowledge_fraction_ablation,
    preset_budget, run_experiment,
};
use kal::knowledge::{Formula, Schema, TaskKind, add_uncertainty_rule, parse_knowledge};
use kal::lowering::{Generator, TNorm, compile, formula_truth};
use kal::model::{GradCheckConfig, Model, ModelConfig, Prediction, TrainConfig};
use kal::strategies::{SelectionContext, Strategy, default_group_cap, gather_rows};

/// Prints the criterion's verdict line, then enforces it.
fn verdict(number: usize, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number:>2} {tag}  {name}: {detail}");
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

// ---- 1: the fuzzy semantics agree with classical logic on boolean
// corners ----

fn classical_truth(formula: &Formula, assign: &impl Fn(&str) -> bool) -> bool {
    match formula {
        Formula::Atom(name) => assign(name),
        Formula::Not(inner) => !classical_truth(inner, assign),
        Formula::And(parts) => parts.iter().all(|part| classical_truth(part, assign)),
        Formula::Or(parts) => parts.iter().any(|part| classical_truth(part, assign)),
        Formula::ExactlyOne(parts) => {
            parts.iter().filter(|part| classical_truth(part, assign)).count() == 1
        }
        Formula::Implies(a, b) => !classical_truth(a, assign) || classical_truth(b, assign),
        Formula::Iff(a, b) => classical_truth(a, assign) == classical_truth(b, assign),
    }
}

/// A random formula over `atoms`, with `xor` held at two operands so
/// every conjunction family can evaluate it.
fn random_formula(rng: &mut ChaCha8Rng, atoms: &[String], depth: usize) -> Formula {
    if depth == 0 || rng.random::<f64>() < 0.3 {
        return Formula::atom(&atoms[rng.random_range(0..atoms.len())]);
    }
    let pair = |rng: &mut ChaCha8Rng| {
        (random_formula(rng, atoms, depth - 1), random_formula(rng, atoms, depth - 1))
    };
    match rng.random_range(0..6) {
        0 => Formula::not(random_formula(rng, atoms, depth - 1)),
        1 | 2 => {
            let arity = 2 + rng.random_range(0..2);
            let parts = (0..arity).map(|_| random_formula(rng, atoms, depth - 1)).collect();
            if rng.random::<bool>() { Formula::and(parts) } else { Formula::or(parts) }
        }
        3 => {
            let (a, b) = pair(rng);
            Formula::exactly_one(vec![a, b])
        }
        4 => {
            let (a, b) = pair(rng);
            Formula::implies(a, b)
        }
        _ => {
            let (a, b) = pair(rng);
            Formula::iff(a, b)
        }
    }
}

#[test]
fn criterion_01_boolean_corner_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0usize;
    let mut worst = 0.0f64;

    for _ in 0..500 {
        let atom_count = 2 + rng.random_range(0..5); // up to 6 variables
        let atoms: Vec<String> = (0..atom_count).map(|i| format!("a{i}")).collect();
        let formula = random_formula(&mut rng, &atoms, 3);

        for corner in 0u32..(1 << atom_count) {
            let bit = |name: &str| {
                let index: usize = name[1..].parse().unwrap();
                corner >> index & 1 == 1
            };
            let expected = f64::from(classical_truth(&formula, &bit));
            for tnorm in [TNorm::Product, TNorm::Lukasiewicz, TNorm::Goedel] {
                let lookup = |name: &str| f64::from(bit(name));
                let truth = formula_truth(&formula, &lookup, tnorm).unwrap();
                worst = worst.max((truth - expected).abs());
                checked += 1;
            }
        }
    }

    let elapsed = start.elapsed();
    verdict(
        1,
        "boolean corners match classical logic",
        worst < 1e-12 && elapsed < Duration::from_secs(10),
        &format!(
            "500 formulas, {checked} corner evaluations, worst gap {worst:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---- 2: the lowered exclusive-or rule matches its closed form ----

#[test]
fn criterion_02_xor_rule_matches_closed_form() {
    let dataset = make_xor(4, 0);
    let kb = dataset.knowledge().unwrap();
    let compiled = compile(&kb, TNorm::Product, Generator::OneMinus).unwrap();

    let sigma = |v: f64| 1.0 / (1.0 + (-10.0 * (v - 0.5)).exp());
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (x1, x2, f) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let x_pred = Array2::from_shape_vec((1, 2), vec![x1, x2]).unwrap();
        let preds = Array2::from_shape_vec((1, 1), vec![f]).unwrap();
        let computed = compiled.violation_matrix(x_pred.view(), preds.view())[[0, 0]];

        // Hand-built: the one-hot truth of `x1 xor x2` against the
        // head, violated in both implication directions.
        let (a, b) = (sigma(x1), sigma(x2));
        let one_hot = a * (1.0 - b) + b * (1.0 - a);
        let expected = one_hot * (1.0 - f) + f * (1.0 - one_hot);
        worst = worst.max((computed - expected).abs());
    }

    verdict(
        2,
        "exclusive-or rule equals its closed form",
        worst <= 1e-12,
        &format!("1000 random triples, worst gap {worst:.2e}"),
    );
}

// ---- 3: analytic gradients survive a numeric check ----

#[test]
fn criterion_03_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let x = Array2::from_shape_fn((6, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
    let mut worst = 0.0f64;
    let mut details = Vec::new();

    let cases: Vec<(TaskKind, usize, Labels)> = vec![
        (TaskKind::Binary, 1, Labels::Classes(vec![0, 1, 1, 0, 1, 0])),
        (TaskKind::Multiclass, 3, Labels::Classes(vec![0, 1, 2, 2, 1, 0])),
        (
            TaskKind::Multilabel,
            2,
            Labels::Bitmap(
                Array2::from_shape_vec(
                    (6, 2),
                    vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
                )
                .unwrap(),
            ),
        ),
        (TaskKind::Regression, 1, Labels::Real(vec![0.3, -1.2, 0.8, 2.0, -0.4, 1.1])),
    ];

    for (task, output_dim, labels) in cases {
        let model = Model::new(
            &ModelConfig::new(3, output_dim, task).with_hidden(8).with_dropout(0.25).with_seed(7),
        );
        let report = model.gradient_check(x.view(), &labels, &GradCheckConfig::default()).unwrap();
        worst = worst.max(report.max_rel_error);
        details.push(format!("{} {:.2e}", task.id(), report.max_rel_error));
    }

    verdict(3, "gradient checks under 1e-4 for every task kind", worst < 1e-4, &details.join(", "));
}

// ---- shared benchmark runs (criteria 5, 8, 11) ----

/// The headline comparison at the paper's budgets: ten folds, one
/// seed, default configuration.
struct BenchRuns {
    xor_kal: ExperimentReport,
    xor_random: ExperimentReport,
    xor_entropy: ExperimentReport,
    iris_kal: ExperimentReport,
    iris_random: ExperimentReport,
    iris_entropy: ExperimentReport,
    iris_xai: ExperimentReport,
    insurance_kal: ExperimentReport,
    insurance_random: ExperimentReport,
}

static BENCH_RUNS: OnceLock<BenchRuns> = OnceLock::new();

fn bench_runs() -> &'static BenchRuns {
    BENCH_RUNS.get_or_init(|| {
        let run = |dataset: &Dataset, strategy| {
            let cfg = ExperimentConfig::new(
                strategy,
                preset_budget(&dataset.name, Preset::Appendix).unwrap(),
            );
            run_experiment(dataset, &cfg).unwrap()
        };
        let xor = make_xor(2000, 29);
        let iris = iris();
        let insurance = insurance();
        BenchRuns {
            xor_kal: run(&xor, Strategy::Kal),
            xor_random: run(&xor, Strategy::Random),
            xor_entropy: run(&xor, Strategy::Entropy),
            iris_kal: run(&iris, Strategy::Kal),
            iris_random: run(&iris, Strategy::Random),
            iris_entropy: run(&iris, Strategy::Entropy),
            iris_xai: run(&iris, Strategy::KalXai),
            insurance_kal: run(&insurance, Strategy::Kal),
            insurance_random: run(&insurance, Strategy::Random),
        }
    })
}

// ---- 4: a fresh model solves the exclusive-or task in ten rounds ----

#[test]
fn criterion_04_xor_sample_efficiency() {
    let start = Instant::now();
    // The introductory demonstration: selection ranks purely by the
    // authored rule's violation — no confidence rule, no diversity
    // cap, no dropout.
    let dataset = make_xor(5_000, 29);
    let mut cfg = ExperimentConfig::new(
        Strategy::Kal,
        Budget { n: 10, p: 5, q: 15, epochs: 250, learning_rate: 1e-3 },
    );
    cfg.fold_limit = Some(1);
    cfg.seeds = (0..10).collect();
    cfg.uncertainty_rule = false;
    cfg.diversity = DiversityCap::Off;
    cfg.dropout = 0.0;
    let kal = run_experiment(&dataset, &cfg).unwrap();
    cfg.strategy = Strategy::Random;
    let random = run_experiment(&dataset, &cfg).unwrap();

    // Selection rounds until held-out accuracy first reaches 95%; one
    // past the horizon when it never does.
    let mean_rounds = |report: &ExperimentReport| {
        report
            .trials
            .iter()
            .map(|t| {
                t.curve.iter().position(|p| p.aux.unwrap_or(0.0) >= 0.95).unwrap_or(t.curve.len())
            })
            .sum::<usize>() as f64
            / report.trials.len() as f64
    };
    let kal_rounds = mean_rounds(&kal);
    let random_rounds = mean_rounds(&random);

    let elapsed = start.elapsed();
    verdict(
        4,
        "95% accuracy within ten rounds, ahead of uniform",
        kal_rounds <= 10.0 && kal_rounds < random_rounds && elapsed < Duration::from_secs(300),
        &format!(
            "rule-driven {kal_rounds:.1} rounds vs uniform {random_rounds:.1} over 10 seeds, \
             {:.0}s total",
            elapsed.as_secs_f64()
        ),
    );
}

// ---- 5: area under the budget curve beats the baselines ----

#[test]
fn criterion_05_aubc_beats_baselines() {
    let runs = bench_runs();
    for report in [&runs.xor_kal, &runs.iris_kal, &runs.insurance_kal] {
        assert!(report.trials.len() >= 10, "need ten trials, had {}", report.trials.len());
    }
    let pairs = [
        ("xor kal>random", runs.xor_kal.mean_aubc, runs.xor_random.mean_aubc),
        ("xor kal>entropy", runs.xor_kal.mean_aubc, runs.xor_entropy.mean_aubc),
        ("iris kal>random", runs.iris_kal.mean_aubc, runs.iris_random.mean_aubc),
        ("iris kal>entropy", runs.iris_kal.mean_aubc, runs.iris_entropy.mean_aubc),
        ("insurance kal>random", runs.insurance_kal.mean_aubc, runs.insurance_random.mean_aubc),
    ];
    let pass = pairs.iter().all(|(_, ours, theirs)| ours > theirs);
    let detail: Vec<String> =
        pairs.iter().map(|(name, ours, theirs)| format!("{name} {ours:.3}/{theirs:.3}")).collect();
    verdict(5, "mean AUBC beats uniform and entropy", pass, &detail.join(", "));
}

// ---- 6: withholding the rules costs measurable area ----

#[test]
fn criterion_06_iris_knowledge_ablation_gap() {
    let dataset = iris();
    // The five-initial-label budget: with so few starting labels a
    // class is often unrepresented, and only the authored rules can
    // steer annotation toward it.
    let mut cfg =
        ExperimentConfig::new(Strategy::Kal, preset_budget("iris", Preset::Appendix).unwrap());
    cfg.seeds = (0..10).collect();
    let points = knowledge_fraction_ablation(&dataset, &cfg, &[0.0, 1.0]).unwrap();
    let gap_points = (points[1].report.mean_aubc - points[0].report.mean_aubc) * 100.0;
    verdict(
        6,
        "full rules beat no rules by three AUBC points on iris",
        gap_points >= 3.0,
        &format!(
            "AUBC {:.3}±{:.3} at 100% vs {:.3}±{:.3} at 0% over 100 trials: \
             gap {gap_points:.1} points",
            points[1].report.mean_aubc,
            points[1].report.std_aubc,
            points[0].report.mean_aubc,
            points[0].report.std_aubc
        ),
    );
}

// ---- 7: with only the confidence rule, knowledge-driven selection
// is least-confidence ----

#[test]
fn criterion_07_uncertainty_only_matches_least_confidence() {
    let dataset = make_xor(1000, 31);
    let mut kb = dataset.knowledge().unwrap().with_rule_prefix(0);
    add_uncertainty_rule(&mut kb).unwrap();
    let compiled = compile(&kb, TNorm::Product, Generator::OneMinus).unwrap();

    let mut rounds_checked = 0usize;
    for cap in [None, Some(default_group_cap(5))] {
        let mut model = Model::new(
            &ModelConfig::new(2, 1, TaskKind::Binary)
                .with_hidden(32)
                .with_dropout(0.1)
                .with_seed(9),
        );
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..10 {
            let j = rng.random_range(i..order.len());
            order.swap(i, j);
        }
        let mut labeled: Vec<usize> = order[..10].to_vec();
        labeled.sort_unstable();
        let mut pool: Vec<usize> = order[10..].to_vec();
        pool.sort_unstable();

        for round in 0..10u64 {
            let x_train = gather_rows(dataset.x_model.view(), &labeled);
            let train_cfg = TrainConfig {
                epochs: 60,
                learning_rate: 3e-3,
                seed: round,
                ..TrainConfig::default()
            };
            model.train(x_train.view(), &dataset.labels.subset(&labeled), &train_cfg).unwrap();

            let x_pool = gather_rows(dataset.x_model.view(), &pool);
            let preds = Prediction { mean: model.predict(x_pool.view()), passes: None };
            let ctx = SelectionContext {
                x_model: dataset.x_model.view(),
                x_pred: dataset.x_pred.view(),
                unlabeled: &pool,
                labeled: &labeled,
                preds: &preds,
                kb: Some(&compiled),
                model: &model,
                labels: None,
                p: 5,
                cap,
                seed: round,
                benchmark: false,
            };
            let by_rule = Strategy::Kal.select(&ctx).unwrap();
            let by_confidence = Strategy::LeastConf.select(&ctx).unwrap();
            assert_eq!(
                by_rule.chosen, by_confidence.chosen,
                "round {round} with cap {cap:?} diverged"
            );
            rounds_checked += 1;

            let mut batch = by_rule.chosen;
            batch.sort_unstable();
            pool.retain(|idx| !batch.contains(idx));
            labeled.extend_from_slice(&batch);
            labeled.sort_unstable();
        }
    }

    verdict(
        7,
        "confidence-rule-only selection equals least-confidence",
        rounds_checked == 20,
        &format!("{rounds_checked} rounds identical, capped and uncapped"),
    );
}

// ---- 8: knowledge-driven selection leaves fewer violations ----

#[test]
fn criterion_08_kal_lowers_audited_violations() {
    let runs = bench_runs();
    let totals = |report: &ExperimentReport| -> Vec<f64> {
        report.trials.iter().map(|t| t.audit.as_ref().unwrap().total).collect()
    };
    let kal = totals(&runs.xor_kal);
    let random = totals(&runs.xor_random);
    let trials = kal.len();
    let wins = kal.iter().zip(&random).filter(|(ours, theirs)| ours < theirs).count();
    verdict(
        8,
        "lower audited violation on at least 8 of 10 runs",
        wins >= 8,
        &format!(
            "{wins}/{trials} runs cleaner; mean total {:.2} vs {:.2}",
            kal.iter().sum::<f64>() / trials as f64,
            random.iter().sum::<f64>() / trials as f64
        ),
    );
}

// ---- 9: the diversity cap bounds what one rule may contribute ----

#[test]
fn criterion_09_diversity_cap_bounds_group_share() {
    const TWO_RULES: &str = "input x1 = feature(0) > 0.5\n\
                             input x2 = feature(1) > 0.5\n\
                             output f = class(0)\n\
                             rule keep_first_low: not x1\n\
                             rule keep_second_low: not x2\n";
    let schema = Schema::new(2, 1, TaskKind::Binary).unwrap();
    let kb = parse_knowledge(TWO_RULES, &schema).unwrap();
    let compiled = compile(&kb, TNorm::Product, Generator::OneMinus).unwrap();

    // Twenty-four samples violating the first rule hardest, six the
    // second: an unbalanced pool a plain top-p would drain one-sided.
    let mut rows = Vec::new();
    for _ in 0..24 {
        rows.extend_from_slice(&[1.0, 0.0]);
    }
    for _ in 0..6 {
        rows.extend_from_slice(&[0.0, 0.9]);
    }
    let x = Array2::from_shape_vec((30, 2), rows).unwrap();
    let model = Model::new(&ModelConfig::new(2, 1, TaskKind::Binary).with_hidden(4).with_seed(1));
    let preds = Prediction { mean: model.predict(x.view()), passes: None };
    let pool: Vec<usize> = (0..30).collect();

    let p = 6;
    let cap = default_group_cap(p);
    assert_eq!(cap, 3, "half the batch");
    let select = |cap: Option<usize>| {
        let ctx = SelectionContext {
            x_model: x.view(),
            x_pred: x.view(),
            unlabeled: &pool,
            labeled: &[],
            preds: &preds,
            kb: Some(&compiled),
            model: &model,
            labels: None,
            p,
            cap,
            seed: 0,
            benchmark: false,
        };
        let result = Strategy::Kal.select(&ctx).unwrap();
        let groups = result.groups.clone().unwrap();
        // Chosen indices are pool positions here (the pool is 0..30).
        let mut per_group = [0usize; 2];
        for &chosen in &result.chosen {
            per_group[groups[chosen]] += 1;
        }
        (result.chosen.len(), per_group)
    };

    let (capped_count, capped_groups) = select(Some(cap));
    let (uncapped_count, uncapped_groups) = select(None);
    let pass = capped_count == p
        && capped_groups.iter().all(|&count| count <= cap)
        && uncapped_count == p
        && uncapped_groups.iter().any(|&count| count > cap);
    verdict(
        9,
        "cap holds every rule to half the batch",
        pass,
        &format!("capped split {capped_groups:?} (cap {cap}), uncapped {uncapped_groups:?}"),
    );
}

// ---- 10: rule scoring costs less than the expensive baselines ----

#[test]
fn criterion_10_selection_cost_below_alternatives() {
    let dataset = make_xor(12_500, 37);
    let time_one = |strategy| {
        let mut cfg = ExperimentConfig::new(
            strategy,
            Budget { n: 100, p: 10, q: 5, epochs: 30, learning_rate: 1e-2 },
        );
        cfg.folds = 5;
        cfg.fold_limit = Some(1);
        let report = run_experiment(&dataset, &cfg).unwrap();
        report.time_ratio
    };
    let kal_ratio = time_one(Strategy::Kal);
    let kcenter_ratio = time_one(Strategy::KCenter);
    let bim_ratio = time_one(Strategy::AdvBim);

    verdict(
        10,
        "overhead ratio below core-set and adversarial selection",
        kal_ratio < kcenter_ratio && kal_ratio < bim_ratio,
        &format!(
            "on a ~10k pool, time over uniform: rules {kal_ratio:.0}x, \
             core-set {kcenter_ratio:.0}x, adversarial {bim_ratio:.0}x"
        ),
    );
}

// ---- 11: extracted rules recover most of the authored advantage ----

#[test]
fn criterion_11_extracted_rules_recover_most_of_kal() {
    let runs = bench_runs();
    let (xai, random, kal) =
        (runs.iris_xai.mean_aubc, runs.iris_random.mean_aubc, runs.iris_kal.mean_aubc);
    verdict(
        11,
        "self-extracted rules match uniform and trail authored rules by under 4 points",
        xai >= random && xai >= kal - 0.04,
        &format!("extraction {xai:.3}, uniform {random:.3}, authored {kal:.3}"),
    );
}
