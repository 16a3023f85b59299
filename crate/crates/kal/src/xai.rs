//! Rule extraction: distilling a trained network into the rule
//! language, and the selection strategy built on top of it.
//!
//! When no domain rules exist, the network can explain itself: a small
//! decision tree is fitted to the network's *predicted* classes over
//! the interpretable feature space, each root-to-leaf path becomes a
//! conjunction of threshold predicates, and every class gets a rule
//! `class <=> DNF of its paths`. The extracted base always closes with
//! an exactly-one constraint over the main classes, and it round-trips
//! through the rule parser, so extracted knowledge is ordinary
//! knowledge.
//!
//! [`select_kal_xai`] refits the tree and re-extracts rules from the
//! current model on every call, scores the pool against those rules,
//! and mixes knowledge-driven picks with uniform ones so selection
//! never collapses onto the surrogate's blind spots.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::knowledge::{
    DEFAULT_TAU, Direction, Formula, KnowledgeBase, KnowledgeError, PredicateBinding, Schema,
    TaskKind, add_uncertainty_rule, is_keyword,
};
use crate::lowering::{Generator, LoweringError, TNorm, compile};
use crate::strategies::{SelectionContext, SelectionResult, Strategy, StrategyError};

/// Default depth of the surrogate tree.
pub const DEFAULT_SURROGATE_DEPTH: usize = 3;

/// Fraction of each batch chosen by rule violation; the rest is
/// uniform.
pub const DEFAULT_KAL_FRACTION: f64 = 0.6;

/// Failures specific to rule extraction.
#[derive(Debug, Error)]
pub enum XaiError {
    #[error("{0}")]
    UnsupportedTask(&'static str),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Lowering(#[from] LoweringError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// A depth-limited CART classifier used as an interpretable surrogate
/// for the network. Splits minimize Gini impurity; the search scans
/// features in index order and candidate thresholds in ascending
/// order, keeping the first of any tied minima, so fitting is fully
/// deterministic.
#[derive(Clone, Debug)]
pub struct SurrogateTree {
    root: Node,
    class_count: usize,
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// One root-to-leaf conjunction: `(feature, threshold, above)` terms
/// and the leaf's majority class.
struct Path {
    conditions: Vec<(usize, f64, bool)>,
    class: usize,
}

impl SurrogateTree {
    /// Fits to `classes` (one label per row of `x`) with at most
    /// `max_depth` levels of splits.
    pub fn fit(
        x: ArrayView2<f64>,
        classes: &[usize],
        class_count: usize,
        max_depth: usize,
    ) -> SurrogateTree {
        assert_eq!(x.nrows(), classes.len(), "one class per sample");
        assert!(classes.iter().all(|&c| c < class_count), "class out of range");
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let root = grow(x, classes, class_count, &rows, max_depth);
        SurrogateTree { root, class_count }
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn predict_one(&self, row: ArrayView1<f64>) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] > *threshold { right } else { left };
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        x.outer_iter().map(|row| self.predict_one(row)).collect()
    }

    /// Number of split levels along the deepest branch.
    pub fn depth(&self) -> usize {
        fn walk(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }

    fn paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        fn walk(node: &Node, prefix: &mut Vec<(usize, f64, bool)>, out: &mut Vec<Path>) {
            match node {
                Node::Leaf { class } => {
                    out.push(Path { conditions: prefix.clone(), class: *class });
                }
                Node::Split { feature, threshold, left, right } => {
                    prefix.push((*feature, *threshold, false));
                    walk(left, prefix, out);
                    prefix.pop();
                    prefix.push((*feature, *threshold, true));
                    walk(right, prefix, out);
                    prefix.pop();
                }
            }
        }
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn counts_of(classes: &[usize], rows: &[usize], class_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; class_count];
    for &r in rows {
        counts[classes[r]] += 1;
    }
    counts
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0usize;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

fn grow(
    x: ArrayView2<f64>,
    classes: &[usize],
    class_count: usize,
    rows: &[usize],
    depth_left: usize,
) -> Node {
    let counts = counts_of(classes, rows, class_count);
    let node_impurity = gini(&counts, rows.len());
    let leaf = Node::Leaf { class: majority(&counts) };
    if depth_left == 0 || node_impurity == 0.0 || rows.len() < 2 {
        return leaf;
    }

    // Best split: lowest weighted child impurity, scanning features
    // and thresholds in ascending order so ties keep the first found.
    // Zero-gain splits are accepted on impure nodes — the payoff can
    // come a level deeper, as it does for exclusive-or.
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, weighted)
    let n = rows.len() as f64;
    for feature in 0..x.ncols() {
        let mut ordered: Vec<(f64, usize)> =
            rows.iter().map(|&r| (x[[r, feature]], classes[r])).collect();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_counts = vec![0usize; class_count];
        let mut right_counts = counts.clone();
        for i in 0..ordered.len() - 1 {
            let (value, class) = ordered[i];
            left_counts[class] += 1;
            right_counts[class] -= 1;
            let next = ordered[i + 1].0;
            if next == value {
                continue;
            }
            let threshold = value + (next - value) / 2.0;
            let left_n = i + 1;
            let right_n = ordered.len() - left_n;
            let weighted = (left_n as f64 * gini(&left_counts, left_n)
                + right_n as f64 * gini(&right_counts, right_n))
                / n;
            if best.is_none_or(|(_, _, w)| weighted < w) {
                best = Some((feature, threshold, weighted));
            }
        }
    }

    match best {
        Some((feature, threshold, _)) => {
            let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
            for &r in rows {
                if x[[r, feature]] > threshold {
                    right_rows.push(r);
                } else {
                    left_rows.push(r);
                }
            }
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(x, classes, class_count, &left_rows, depth_left - 1)),
                right: Box::new(grow(x, classes, class_count, &right_rows, depth_left - 1)),
            }
        }
        _ => leaf,
    }
}

// ---- rule extraction ----

/// Renders a threshold as an identifier fragment: `0.45` becomes
/// `0p45`, `-1.5` becomes `m1p5`.
fn threshold_tag(t: f64) -> String {
    format!("{t}").replace('.', "p").replace('-', "m")
}

/// Lowercases a class name into a valid rule-language identifier.
fn mangle_name(raw: &str, class: usize) -> String {
    let mut name: String = raw
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    let starts_well = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    if !starts_well {
        name = format!("c{class}_{name}");
    }
    if is_keyword(&name) {
        name = format!("c_{name}");
    }
    name
}

/// Turns every class of a fitted surrogate into a rule
/// `class <=> DNF of its leaf paths`, plus an exactly-one constraint
/// over the main classes. Classes the tree never predicts get no
/// descriptive rule (but still appear in the exactly-one constraint).
/// The result parses, validates, and compiles like hand-written
/// knowledge.
pub fn extract_rules(
    tree: &SurrogateTree,
    input_dim: usize,
    task: TaskKind,
    class_names: &[String],
) -> Result<KnowledgeBase, XaiError> {
    if !matches!(task, TaskKind::Binary | TaskKind::Multiclass) {
        return Err(XaiError::UnsupportedTask(
            "rule extraction needs a binary or multiclass model",
        ));
    }
    assert_eq!(class_names.len(), tree.class_count(), "one name per class");
    let output_dim = match task {
        TaskKind::Binary => 1,
        _ => tree.class_count(),
    };
    let schema = Schema::new(input_dim, output_dim, task)?;
    let mut kb = KnowledgeBase::new(schema);

    // Class atoms. A binary model has one head: the positive class
    // appears as the atom itself, the negative class as its negation.
    let class_heads: Vec<Formula> = match task {
        TaskKind::Binary => {
            let name = mangle_name(&class_names[1], 1);
            kb.add_binding(&name, PredicateBinding::OutputClass { class: 0 })?;
            vec![Formula::not(Formula::atom(&name)), Formula::atom(&name)]
        }
        _ => {
            let mut heads = Vec::with_capacity(tree.class_count());
            for (k, raw) in class_names.iter().enumerate() {
                let name = mangle_name(raw, k);
                kb.add_binding(&name, PredicateBinding::OutputClass { class: k })?;
                heads.push(Formula::atom(&name));
            }
            heads
        }
    };

    // Threshold atoms, deduplicated by (feature, threshold).
    let mut atom_names: std::collections::HashMap<(usize, u64), String> =
        std::collections::HashMap::new();
    let paths = tree.paths();
    for path in &paths {
        for &(feature, threshold, _) in &path.conditions {
            let key = (feature, threshold.to_bits());
            if atom_names.contains_key(&key) {
                continue;
            }
            let name = format!("x{feature}_gt_{}", threshold_tag(threshold));
            kb.add_binding(
                &name,
                PredicateBinding::InputThreshold {
                    feature,
                    direction: Direction::Above,
                    threshold,
                    tau: DEFAULT_TAU,
                },
            )?;
            atom_names.insert(key, name);
        }
    }

    // One rule per predicted class: head <=> DNF of its paths. A path
    // with no conditions means the tree is a single leaf; that class
    // covers everything and gets no descriptive rule.
    for (k, head) in class_heads.iter().enumerate() {
        let mut conjunctions = Vec::new();
        for path in &paths {
            if path.class != k || path.conditions.is_empty() {
                continue;
            }
            let terms: Vec<Formula> = path
                .conditions
                .iter()
                .map(|&(feature, threshold, above)| {
                    let atom = Formula::atom(&atom_names[&(feature, threshold.to_bits())]);
                    if above { atom } else { Formula::not(atom) }
                })
                .collect();
            conjunctions.push(if terms.len() == 1 {
                terms.into_iter().next().unwrap()
            } else {
                Formula::and(terms)
            });
        }
        if conjunctions.is_empty() {
            continue;
        }
        let dnf = if conjunctions.len() == 1 {
            conjunctions.into_iter().next().unwrap()
        } else {
            Formula::or(conjunctions)
        };
        let id = format!("explain_{}", mangle_name(&class_names[k], k));
        kb.add_rule(&id, Formula::iff(head.clone(), dnf))?;
    }

    // The main classes exclude each other no matter what the tree saw.
    let one_class = match task {
        TaskKind::Binary => Formula::exactly_one(vec![class_heads[1].clone(), class_heads[0].clone()]),
        _ => Formula::exactly_one(class_heads),
    };
    kb.add_rule("one_class", one_class)?;
    Ok(kb)
}

// ---- the selection strategy ----

/// Knobs for [`select_kal_xai`].
#[derive(Clone, Debug)]
pub struct XaiConfig {
    pub max_depth: usize,
    /// Append the predict-confidently rule to the extracted base.
    pub add_uncertainty: bool,
    pub tnorm: TNorm,
    pub generator: Generator,
    /// Fraction of the batch chosen by rule violation (ceil), the
    /// rest drawn uniformly from the remaining pool.
    pub kal_fraction: f64,
}

impl Default for XaiConfig {
    fn default() -> Self {
        XaiConfig {
            max_depth: DEFAULT_SURROGATE_DEPTH,
            add_uncertainty: true,
            tnorm: TNorm::Product,
            generator: Generator::OneMinus,
            kal_fraction: DEFAULT_KAL_FRACTION,
        }
    }
}

/// Selection without domain knowledge: refit a surrogate tree to the
/// current model, extract rules, score the pool against them, and fill
/// the batch with a knowledge-driven head and a uniform tail. Returns
/// the batch alongside the extracted base (worth inspecting or
/// dumping). The tree is refitted on every call, so the rules track
/// the model as it learns.
pub fn select_kal_xai(
    ctx: &SelectionContext,
    class_names: &[String],
    cfg: &XaiConfig,
) -> Result<(SelectionResult, KnowledgeBase), XaiError> {
    let task = ctx.model.task();
    if !matches!(task, TaskKind::Binary | TaskKind::Multiclass) {
        return Err(XaiError::UnsupportedTask(
            "rule-extraction selection needs a binary or multiclass model",
        ));
    }
    let started = std::time::Instant::now();

    // Distill the model over the full dataset.
    let outputs = ctx.model.predict(ctx.x_model);
    let classes: Vec<usize> = outputs.outer_iter().map(|row| argmax_class(task, row)).collect();
    let class_count = match task {
        TaskKind::Binary => 2,
        _ => ctx.model.output_dim(),
    };
    let tree = SurrogateTree::fit(ctx.x_pred, &classes, class_count, cfg.max_depth);
    let mut kb = extract_rules(&tree, ctx.x_pred.ncols(), task, class_names)?;
    if cfg.add_uncertainty {
        add_uncertainty_rule(&mut kb)?;
    }
    let compiled = compile(&kb, cfg.tnorm, cfg.generator)?;

    // Knowledge-driven head of the batch.
    let p = ctx.p.min(ctx.unlabeled.len());
    let kal_p = ((cfg.kal_fraction * p as f64).ceil() as usize).min(p);
    let kal_ctx = SelectionContext {
        x_model: ctx.x_model,
        x_pred: ctx.x_pred,
        unlabeled: ctx.unlabeled,
        labeled: ctx.labeled,
        preds: ctx.preds,
        kb: Some(&compiled),
        model: ctx.model,
        labels: ctx.labels,
        p: kal_p,
        cap: ctx.cap,
        seed: ctx.seed,
        benchmark: ctx.benchmark,
    };
    let mut result = Strategy::Kal.select(&kal_ctx)?;

    // Uniform tail from whatever remains.
    let missing = p - result.chosen.len().min(p);
    if missing > 0 {
        let mut residual: Vec<usize> = ctx
            .unlabeled
            .iter()
            .copied()
            .filter(|idx| !result.chosen.contains(idx))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x9e37_79b9_7f4a_7c15);
        for i in 0..missing.min(residual.len()) {
            let j = rng.random_range(i..residual.len());
            residual.swap(i, j);
            result.chosen.push(residual[i]);
        }
    }
    result.elapsed = started.elapsed();
    Ok((result, kb))
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

/// Predicted class per row, exposed for harness metrics.
pub fn predicted_classes(task: TaskKind, outputs: &Array2<f64>) -> Vec<usize> {
    outputs.outer_iter().map(|row| argmax_class(task, row)).collect()
}

#[cfg(test)]
mod tests;
