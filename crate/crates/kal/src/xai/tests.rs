use super::*;
use crate::data::Labels;
use crate::knowledge::parse_knowledge;
use crate::model::{Model, ModelConfig, Prediction, TrainConfig};
use ndarray::array;

fn names(raw: &[&str]) -> Vec<String> {
    raw.iter().map(|s| s.to_string()).collect()
}

/// Four clusters at the quadrant midpoints with exclusive-or labels;
/// a depth-2 tree separates them exactly.
fn xor_grid(copies: usize) -> (Array2<f64>, Vec<usize>) {
    let corners = [(0.25, 0.25, 0), (0.25, 0.75, 1), (0.75, 0.25, 1), (0.75, 0.75, 0)];
    let mut rows = Vec::new();
    let mut classes = Vec::new();
    for _ in 0..copies {
        for &(a, b, y) in &corners {
            rows.extend_from_slice(&[a, b]);
            classes.push(y);
        }
    }
    (Array2::from_shape_vec((4 * copies, 2), rows).unwrap(), classes)
}

#[test]
fn tree_learns_exclusive_or_exactly() {
    let (x, classes) = xor_grid(5);
    let tree = SurrogateTree::fit(x.view(), &classes, 2, 2);
    assert_eq!(tree.depth(), 2);
    assert_eq!(tree.predict(x.view()), classes);
    // The only useful thresholds are the midpoints at one half.
    for path in tree.paths() {
        for (_, threshold, _) in path.conditions {
            assert!((threshold - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn tree_respects_the_depth_budget() {
    let (x, classes) = xor_grid(5);
    let stump = SurrogateTree::fit(x.view(), &classes, 2, 1);
    assert!(stump.depth() <= 1);
    let free = SurrogateTree::fit(x.view(), &classes, 2, 0);
    assert_eq!(free.depth(), 0);
}

#[test]
fn tree_split_prefers_the_lower_feature_on_ties() {
    // Both columns carry the same values, so both admit identical
    // splits; the scan keeps feature 0.
    let x = array![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]];
    let classes = vec![0, 0, 1, 1];
    let tree = SurrogateTree::fit(x.view(), &classes, 2, 3);
    match &tree.root {
        Node::Split { feature, threshold, .. } => {
            assert_eq!(*feature, 0);
            assert!((threshold - 0.5).abs() < 1e-12);
        }
        Node::Leaf { .. } => panic!("expected a split"),
    }
}

#[test]
fn tree_majority_breaks_ties_toward_the_lower_class() {
    // One of each class and no way to split: majority must pick 0.
    let x = array![[0.5], [0.5]];
    let tree = SurrogateTree::fit(x.view(), &[1, 0], 2, 3);
    assert_eq!(tree.predict_one(x.row(0)), 0);
}

#[test]
fn extracted_rules_describe_the_tree_and_round_trip() {
    let (x, classes) = xor_grid(5);
    let tree = SurrogateTree::fit(x.view(), &classes, 2, 2);
    let kb = extract_rules(&tree, 2, TaskKind::Binary, &names(&["off", "on"])).unwrap();

    // Atoms: one class head plus the two deduplicated thresholds.
    let binding_names: Vec<&str> = kb.bindings().iter().map(|b| b.name.as_str()).collect();
    assert!(binding_names.contains(&"on"));
    assert!(binding_names.contains(&"x0_gt_0p5"));
    assert!(binding_names.contains(&"x1_gt_0p5"));
    assert_eq!(binding_names.len(), 3, "{binding_names:?}");

    // Rules: a description per class plus the exclusivity constraint.
    let rule_ids: Vec<&str> = kb.rules().iter().map(|r| r.id.as_str()).collect();
    assert_eq!(rule_ids, vec!["explain_off", "explain_on", "one_class"]);

    // Round trip through the printer and parser.
    let source = kb.to_dsl();
    let reparsed = parse_knowledge(&source, kb.schema()).unwrap();
    assert_eq!(reparsed.to_dsl(), source);

    // And the reparsed base compiles.
    compile(&reparsed, TNorm::Product, Generator::OneMinus).unwrap();
}

#[test]
fn extracted_rules_score_network_agreement() {
    // The tree's own predictions should violate the extracted rules
    // far less than anti-predictions do.
    let (x, classes) = xor_grid(5);
    let tree = SurrogateTree::fit(x.view(), &classes, 2, 2);
    let kb = extract_rules(&tree, 2, TaskKind::Binary, &names(&["off", "on"])).unwrap();
    let compiled = compile(&kb, TNorm::Product, Generator::OneMinus).unwrap();
    let agree = Array2::from_shape_fn((classes.len(), 1), |(i, _)| classes[i] as f64);
    let disagree = agree.mapv(|v| 1.0 - v);
    let v_agree = compiled.violation_matrix(x.view(), agree.view()).sum();
    let v_disagree = compiled.violation_matrix(x.view(), disagree.view()).sum();
    // Perfect agreement still accrues a little violation because the
    // threshold predicates are soft at this tau; the gap to active
    // disagreement stays wide.
    assert!(
        v_agree < 0.25 * v_disagree,
        "agree {v_agree} should be far below disagree {v_disagree}"
    );
}

#[test]
fn extraction_skips_classes_the_tree_never_predicts() {
    // Three names, but the data only shows classes 0 and 1.
    let x = array![[0.0], [0.1], [0.9], [1.0]];
    let classes = vec![0, 0, 1, 1];
    let tree = SurrogateTree::fit(x.view(), &classes, 3, 2);
    let kb = extract_rules(&tree, 1, TaskKind::Multiclass, &names(&["a", "b", "c"])).unwrap();
    let rule_ids: Vec<&str> = kb.rules().iter().map(|r| r.id.as_str()).collect();
    assert_eq!(rule_ids, vec!["explain_a", "explain_b", "one_class"]);
    // All three classes still appear as bindings for the constraint.
    assert!(kb.bindings().iter().any(|b| b.name == "c"));
}

#[test]
fn extraction_mangles_awkward_class_names() {
    let x = array![[0.0], [1.0]];
    let tree = SurrogateTree::fit(x.view(), &[0, 1], 2, 1);
    let kb =
        extract_rules(&tree, 1, TaskKind::Binary, &names(&["Iris-Setosa", "2nd Class"])).unwrap();
    let binding_names: Vec<&str> = kb.bindings().iter().map(|b| b.name.as_str()).collect();
    assert!(binding_names.contains(&"c1_2nd_class"), "{binding_names:?}");
    let source = kb.to_dsl();
    parse_knowledge(&source, kb.schema()).unwrap();
}

#[test]
fn extraction_tags_negative_thresholds() {
    assert_eq!(threshold_tag(0.45), "0p45");
    assert_eq!(threshold_tag(-1.5), "m1p5");
    assert_eq!(threshold_tag(2.0), "2");
}

#[test]
fn extraction_rejects_regression() {
    let x = array![[0.0], [1.0]];
    let tree = SurrogateTree::fit(x.view(), &[0, 1], 2, 1);
    assert!(matches!(
        extract_rules(&tree, 1, TaskKind::Regression, &names(&["lo", "hi"])),
        Err(XaiError::UnsupportedTask(_))
    ));
}

// ---- the selector ----

fn trained_xor_fixture() -> (Array2<f64>, Model) {
    let (x, classes) = xor_grid(10);
    let mut model = Model::new(
        &ModelConfig::new(2, 1, TaskKind::Binary).with_hidden(24).with_seed(2),
    );
    model
        .train(
            x.view(),
            &Labels::Classes(classes),
            &TrainConfig { epochs: 800, learning_rate: 1e-2, ..TrainConfig::default() },
        )
        .unwrap();
    (x, model)
}

#[test]
fn kal_xai_selects_a_full_deterministic_batch() {
    let (x, model) = trained_xor_fixture();
    let unlabeled: Vec<usize> = (0..x.nrows()).collect();
    let preds = Prediction { mean: model.predict(x.view()), passes: None };
    let ctx = SelectionContext {
        x_model: x.view(),
        x_pred: x.view(),
        unlabeled: &unlabeled,
        labeled: &[],
        preds: &preds,
        kb: None,
        model: &model,
        labels: None,
        p: 5,
        cap: None,
        seed: 11,
        benchmark: false,
    };
    let class_names = names(&["off", "on"]);
    let (result, kb) = select_kal_xai(&ctx, &class_names, &XaiConfig::default()).unwrap();
    assert_eq!(result.chosen.len(), 5);
    let mut sorted = result.chosen.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 5, "no duplicates");
    assert!(result.chosen.iter().all(|&i| i < x.nrows()));

    // The uncertainty rule rides along by default.
    assert!(kb.rules().iter().any(|r| r.is_uncertainty));

    // Same context, same batch.
    let (again, _) = select_kal_xai(&ctx, &class_names, &XaiConfig::default()).unwrap();
    assert_eq!(result.chosen, again.chosen);
}

#[test]
fn kal_xai_mixes_knowledge_and_uniform_picks() {
    let (x, model) = trained_xor_fixture();
    let unlabeled: Vec<usize> = (0..x.nrows()).collect();
    let preds = Prediction { mean: model.predict(x.view()), passes: None };
    let ctx = SelectionContext {
        x_model: x.view(),
        x_pred: x.view(),
        unlabeled: &unlabeled,
        labeled: &[],
        preds: &preds,
        kb: None,
        model: &model,
        labels: None,
        p: 10,
        cap: None,
        seed: 3,
        benchmark: false,
    };
    let class_names = names(&["off", "on"]);
    // With the knowledge share at zero every pick is uniform; the
    // head of the batch must then differ from a full knowledge run.
    let uniform_cfg = XaiConfig { kal_fraction: 0.0, ..XaiConfig::default() };
    let (uniform, _) = select_kal_xai(&ctx, &class_names, &uniform_cfg).unwrap();
    assert_eq!(uniform.chosen.len(), 10);

    let full_cfg = XaiConfig { kal_fraction: 1.0, ..XaiConfig::default() };
    let (full, _) = select_kal_xai(&ctx, &class_names, &full_cfg).unwrap();
    assert_eq!(full.chosen.len(), 10);
    // A 0.6 mix takes ceil(0.6 * 10) = 6 by score: its head matches
    // the full knowledge ranking.
    let (mixed, _) = select_kal_xai(&ctx, &class_names, &XaiConfig::default()).unwrap();
    assert_eq!(mixed.chosen[..6], full.chosen[..6]);
}

#[test]
fn kal_xai_rejects_regression() {
    let x = array![[0.0], [1.0]];
    let model = Model::new(&ModelConfig::new(1, 1, TaskKind::Regression).with_hidden(4).with_seed(0));
    let unlabeled = vec![0, 1];
    let preds = Prediction { mean: model.predict(x.view()), passes: None };
    let ctx = SelectionContext {
        x_model: x.view(),
        x_pred: x.view(),
        unlabeled: &unlabeled,
        labeled: &[],
        preds: &preds,
        kb: None,
        model: &model,
        labels: None,
        p: 1,
        cap: None,
        seed: 0,
        benchmark: false,
    };
    assert!(matches!(
        select_kal_xai(&ctx, &names(&["lo", "hi"]), &XaiConfig::default()),
        Err(XaiError::UnsupportedTask(_))
    ));
}

#[test]
fn predicted_classes_match_argmax() {
    let outputs = array![[0.2, 0.5, 0.3], [0.7, 0.2, 0.1]];
    assert_eq!(predicted_classes(TaskKind::Multiclass, &outputs), vec![1, 0]);
    let binary = array![[0.4], [0.6]];
    assert_eq!(predicted_classes(TaskKind::Binary, &binary), vec![0, 1]);
}
