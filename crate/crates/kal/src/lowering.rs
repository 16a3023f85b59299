//! Compiling rules into graded violation scores.
//!
//! A rule is lowered in three steps:
//!
//! 1. Each predicate is evaluated on a sample: threshold predicates
//!    become a steep logistic `sigma(tau * (v - t))` (flipped for `<`),
//!    class predicates read the predicted probability directly. All
//!    values land in `[0, 1]`.
//! 2. The formula combines those graded truths under a T-norm: Product,
//!    Łukasiewicz, or Gödel, each with the standard involutive negation
//!    `1 - x` and its S-implication/residuum as listed below.
//! 3. An additive generator turns the rule's truth `t` into a violation
//!    `g(t)` that is zero exactly when the rule is satisfied: `1 - t`,
//!    or `-ln t` for an unbounded penalty.
//!
//! | connective | Product       | Łukasiewicz        | Gödel               |
//! |------------|---------------|--------------------|---------------------|
//! | `x and y`  | `x·y`         | `max(0, x + y − 1)`| `min(x, y)`         |
//! | `x or y`   | `x + y − x·y` | `min(1, x + y)`    | `max(x, y)`         |
//! | `not x`    | `1 − x`       | `1 − x`            | `1 − x`             |
//! | `x => y`   | `1 − x·(1−y)` | `min(1, 1 − x + y)`| `y if x > y else 1` |
//!
//! `xor` is exactly-one. Under Product it has a closed n-ary form (the
//! probability that exactly one of n independent events holds); under
//! Łukasiewicz and Gödel only the two-operand form
//! `(a or b) and not (a and b)` is supported, and compiling a wider
//! `xor` fails with [`LoweringError::UnsupportedExactlyOne`].
//!
//! A rule whose top-level connective is `<=>` is scored as the *sum* of
//! its two directional implication violations, so disagreement in
//! either direction contributes; nested `<=>` below the root uses the
//! T-norm conjunction of the two implications.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{
    Direction, Formula, KnowledgeBase, NamedBinding, PredicateBinding, Rule, Schema,
};

/// Fuzzy conjunction family used to ground the connectives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TNorm {
    #[default]
    Product,
    Lukasiewicz,
    Goedel,
}

impl TNorm {
    /// Stable lowercase identifier (`product`, `lukasiewicz`, `goedel`).
    pub fn id(self) -> &'static str {
        match self {
            TNorm::Product => "product",
            TNorm::Lukasiewicz => "lukasiewicz",
            TNorm::Goedel => "goedel",
        }
    }

    /// Binary conjunction.
    pub fn and2(self, x: f64, y: f64) -> f64 {
        match self {
            TNorm::Product => x * y,
            TNorm::Lukasiewicz => (x + y - 1.0).max(0.0),
            TNorm::Goedel => x.min(y),
        }
    }

    /// Binary disjunction (the dual co-norm).
    pub fn or2(self, x: f64, y: f64) -> f64 {
        match self {
            TNorm::Product => x + y - x * y,
            TNorm::Lukasiewicz => (x + y).min(1.0),
            TNorm::Goedel => x.max(y),
        }
    }

    /// Implication: the S-implication for Product and Łukasiewicz, the
    /// residuum for Gödel.
    pub fn implies2(self, x: f64, y: f64) -> f64 {
        match self {
            TNorm::Product => 1.0 - x * (1.0 - y),
            TNorm::Lukasiewicz => (1.0 - x + y).min(1.0),
            TNorm::Goedel => {
                if x <= y {
                    1.0
                } else {
                    y
                }
            }
        }
    }

    /// Involutive negation, shared by all three families.
    pub fn not(self, x: f64) -> f64 {
        1.0 - x
    }
}

impl std::str::FromStr for TNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "product" => Ok(TNorm::Product),
            "lukasiewicz" => Ok(TNorm::Lukasiewicz),
            "goedel" => Ok(TNorm::Goedel),
            other => Err(format!("unknown t-norm `{other}`")),
        }
    }
}

/// Additive generator mapping a truth value to a violation: strictly
/// decreasing with `g(1) = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `g(t) = 1 - t`: bounded violations in `[0, 1]` per implication.
    #[default]
    OneMinus,
    /// `g(t) = -ln t`: unbounded, punishing hard violations harder.
    NegLog,
}

impl Generator {
    /// Stable lowercase identifier (`one_minus`, `neg_log`).
    pub fn id(self) -> &'static str {
        match self {
            Generator::OneMinus => "one_minus",
            Generator::NegLog => "neg_log",
        }
    }

    /// Applies the generator to a truth value clamped into `[0, 1]`.
    /// `NegLog` returns `+inf` at exactly zero truth.
    pub fn apply(self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            Generator::OneMinus => 1.0 - t,
            Generator::NegLog => -t.ln(),
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "one_minus" => Ok(Generator::OneMinus),
            "neg_log" => Ok(Generator::NegLog),
            other => Err(format!("unknown generator `{other}`")),
        }
    }
}

/// Errors raised while lowering rules.
#[derive(Debug, Error)]
pub enum LoweringError {
    #[error(
        "rule `{rule_id}`: xor over {arity} operands has no {tnorm} lowering \
         (only the product t-norm supports more than two)"
    )]
    UnsupportedExactlyOne { rule_id: String, arity: usize, tnorm: &'static str },
    #[error("atom `{0}` is not declared")]
    UnboundAtom(String),
}

/// A formula with atoms resolved to binding indices.
#[derive(Clone, Debug)]
enum Node {
    Atom(usize),
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
    ExactlyOne(Vec<Node>),
    Implies(Box<Node>, Box<Node>),
    Iff(Box<Node>, Box<Node>),
}

/// One rule compiled against a binding table.
#[derive(Clone, Debug)]
pub struct CompiledRule {
    pub id: String,
    pub is_uncertainty: bool,
    root: Node,
}

/// A whole knowledge base lowered under one T-norm and generator.
#[derive(Clone, Debug)]
pub struct CompiledKnowledge {
    schema: Schema,
    bindings: Vec<NamedBinding>,
    rules: Vec<CompiledRule>,
    tnorm: TNorm,
    generator: Generator,
}

/// Evaluates one predicate on a sample: `x` are the features in
/// predicate units, `f` the network outputs in natural units. The
/// result is a graded truth in `[0, 1]`.
pub fn eval_predicate(p: &PredicateBinding, x: &[f64], f: &[f64]) -> f64 {
    match *p {
        PredicateBinding::InputThreshold { feature, direction, threshold, tau } => {
            steep_logistic(x[feature], direction, threshold, tau)
        }
        PredicateBinding::OutputClass { class } => f[class].clamp(0.0, 1.0),
        PredicateBinding::OutputThreshold { head, direction, threshold, tau } => {
            steep_logistic(f[head], direction, threshold, tau)
        }
    }
}

fn steep_logistic(value: f64, direction: Direction, threshold: f64, tau: f64) -> f64 {
    let signed = match direction {
        Direction::Above => value - threshold,
        Direction::Below => threshold - value,
    };
    1.0 / (1.0 + (-tau * signed).exp())
}

/// Compiles every rule of `kb` under the given T-norm and generator.
pub fn compile(
    kb: &KnowledgeBase,
    tnorm: TNorm,
    generator: Generator,
) -> Result<CompiledKnowledge, LoweringError> {
    let rules = kb
        .rules()
        .iter()
        .map(|rule| {
            Ok(CompiledRule {
                id: rule.id.clone(),
                is_uncertainty: rule.is_uncertainty,
                root: resolve(&rule.formula, kb, rule, tnorm)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CompiledKnowledge {
        schema: kb.schema().clone(),
        bindings: kb.bindings().to_vec(),
        rules,
        tnorm,
        generator,
    })
}

fn resolve(f: &Formula, kb: &KnowledgeBase, rule: &Rule, tnorm: TNorm) -> Result<Node, LoweringError> {
    Ok(match f {
        Formula::Atom(name) => Node::Atom(
            kb.binding_index(name).ok_or_else(|| LoweringError::UnboundAtom(name.clone()))?,
        ),
        Formula::Not(inner) => Node::Not(Box::new(resolve(inner, kb, rule, tnorm)?)),
        Formula::And(xs) => Node::And(resolve_all(xs, kb, rule, tnorm)?),
        Formula::Or(xs) => Node::Or(resolve_all(xs, kb, rule, tnorm)?),
        Formula::ExactlyOne(xs) => {
            if xs.len() > 2 && tnorm != TNorm::Product {
                return Err(LoweringError::UnsupportedExactlyOne {
                    rule_id: rule.id.clone(),
                    arity: xs.len(),
                    tnorm: tnorm.id(),
                });
            }
            Node::ExactlyOne(resolve_all(xs, kb, rule, tnorm)?)
        }
        Formula::Implies(a, b) => Node::Implies(
            Box::new(resolve(a, kb, rule, tnorm)?),
            Box::new(resolve(b, kb, rule, tnorm)?),
        ),
        Formula::Iff(a, b) => Node::Iff(
            Box::new(resolve(a, kb, rule, tnorm)?),
            Box::new(resolve(b, kb, rule, tnorm)?),
        ),
    })
}

fn resolve_all(
    xs: &[Formula],
    kb: &KnowledgeBase,
    rule: &Rule,
    tnorm: TNorm,
) -> Result<Vec<Node>, LoweringError> {
    xs.iter().map(|x| resolve(x, kb, rule, tnorm)).collect()
}

/// Graded truth of a resolved formula given per-binding truths.
fn node_truth(node: &Node, atoms: &[f64], t: TNorm) -> f64 {
    match node {
        Node::Atom(i) => atoms[*i],
        Node::Not(inner) => t.not(node_truth(inner, atoms, t)),
        Node::And(xs) => {
            xs.iter().map(|x| node_truth(x, atoms, t)).reduce(|a, b| t.and2(a, b)).unwrap()
        }
        Node::Or(xs) => {
            xs.iter().map(|x| node_truth(x, atoms, t)).reduce(|a, b| t.or2(a, b)).unwrap()
        }
        Node::ExactlyOne(xs) => {
            let truths: Vec<f64> = xs.iter().map(|x| node_truth(x, atoms, t)).collect();
            exactly_one_truth(&truths, t)
        }
        Node::Implies(a, b) => t.implies2(node_truth(a, atoms, t), node_truth(b, atoms, t)),
        Node::Iff(a, b) => {
            let (ta, tb) = (node_truth(a, atoms, t), node_truth(b, atoms, t));
            t.and2(t.implies2(ta, tb), t.implies2(tb, ta))
        }
    }
}

/// Exactly-one over graded truths. Product: the closed n-ary form
/// `sum_i p_i * prod_{j != i} (1 - p_j)`. Otherwise: arity two only,
/// grounded as `(a or b) and not (a and b)` (callers reject wider).
fn exactly_one_truth(truths: &[f64], t: TNorm) -> f64 {
    match t {
        TNorm::Product => {
            let mut total = 0.0;
            for i in 0..truths.len() {
                let mut term = truths[i];
                for (j, &p) in truths.iter().enumerate() {
                    if j != i {
                        term *= 1.0 - p;
                    }
                }
                total += term;
            }
            total
        }
        _ => {
            debug_assert_eq!(truths.len(), 2, "wider xor is rejected at compile time");
            let (a, b) = (truths[0], truths[1]);
            t.and2(t.or2(a, b), t.not(t.and2(a, b)))
        }
    }
}

/// Graded truth of an unresolved formula under `lookup` for atom
/// truths. Intended for tests and tools; returns an error for an
/// exactly-one the T-norm cannot ground.
pub fn formula_truth(
    formula: &Formula,
    lookup: &impl Fn(&str) -> f64,
    tnorm: TNorm,
) -> Result<f64, LoweringError> {
    Ok(match formula {
        Formula::Atom(name) => lookup(name),
        Formula::Not(inner) => tnorm.not(formula_truth(inner, lookup, tnorm)?),
        Formula::And(xs) => {
            let mut acc: Option<f64> = None;
            for x in xs {
                let v = formula_truth(x, lookup, tnorm)?;
                acc = Some(match acc {
                    None => v,
                    Some(a) => tnorm.and2(a, v),
                });
            }
            acc.unwrap()
        }
        Formula::Or(xs) => {
            let mut acc: Option<f64> = None;
            for x in xs {
                let v = formula_truth(x, lookup, tnorm)?;
                acc = Some(match acc {
                    None => v,
                    Some(a) => tnorm.or2(a, v),
                });
            }
            acc.unwrap()
        }
        Formula::ExactlyOne(xs) => {
            if xs.len() > 2 && tnorm != TNorm::Product {
                return Err(LoweringError::UnsupportedExactlyOne {
                    rule_id: "<formula>".into(),
                    arity: xs.len(),
                    tnorm: tnorm.id(),
                });
            }
            let truths =
                xs.iter().map(|x| formula_truth(x, lookup, tnorm)).collect::<Result<Vec<_>, _>>()?;
            exactly_one_truth(&truths, tnorm)
        }
        Formula::Implies(a, b) => {
            tnorm.implies2(formula_truth(a, lookup, tnorm)?, formula_truth(b, lookup, tnorm)?)
        }
        Formula::Iff(a, b) => {
            let ta = formula_truth(a, lookup, tnorm)?;
            let tb = formula_truth(b, lookup, tnorm)?;
            tnorm.and2(tnorm.implies2(ta, tb), tnorm.implies2(tb, ta))
        }
    })
}

impl CompiledRule {
    /// Violation given per-binding truths: a top-level `<=>` sums its
    /// two directional implication violations, everything else is
    /// `g(truth)`.
    pub fn violation_from_truths(&self, atoms: &[f64], tnorm: TNorm, generator: Generator) -> f64 {
        match &self.root {
            Node::Iff(a, b) => {
                let (ta, tb) = (node_truth(a, atoms, tnorm), node_truth(b, atoms, tnorm));
                generator.apply(tnorm.implies2(ta, tb)) + generator.apply(tnorm.implies2(tb, ta))
            }
            other => generator.apply(node_truth(other, atoms, tnorm)),
        }
    }
}

impl CompiledKnowledge {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn tnorm(&self) -> TNorm {
        self.tnorm
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn rules(&self) -> &[CompiledRule] {
        &self.rules
    }

    pub fn bindings(&self) -> &[NamedBinding] {
        &self.bindings
    }

    /// Ids of the compiled rules, in order.
    pub fn rule_ids(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.id.as_str()).collect()
    }

    /// Truth of every binding on one sample.
    pub fn atom_truths(&self, x: &[f64], f: &[f64]) -> Vec<f64> {
        self.bindings.iter().map(|b| eval_predicate(&b.predicate, x, f)).collect()
    }

    /// Violation of every rule on one sample.
    pub fn violation_row(&self, x: &[f64], f: &[f64]) -> Vec<f64> {
        let atoms = self.atom_truths(x, f);
        self.rules
            .iter()
            .map(|r| r.violation_from_truths(&atoms, self.tnorm, self.generator))
            .collect()
    }

    /// Violation matrix: one row per sample of `x`/`f`, one column per
    /// rule. `x` holds features in predicate units, `f` predictions in
    /// natural units; both must have the same number of rows.
    pub fn violation_matrix(&self, x: ArrayView2<f64>, f: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), f.nrows(), "feature and prediction row counts differ");
        let mut out = Array2::zeros((x.nrows(), self.rules.len()));
        for (i, (xr, fr)) in x.outer_iter().zip(f.outer_iter()).enumerate() {
            let xs = xr.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| xr.to_vec());
            let fs = fr.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| fr.to_vec());
            let row = self.violation_row(&xs, &fs);
            out.row_mut(i).iter_mut().zip(row).for_each(|(slot, v)| *slot = v);
        }
        out
    }

    /// Renders each rule's violation as a closed-form expression over
    /// predicate symbols, followed by a legend explaining each symbol.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&format!("rule {}:\n  {}\n", rule.id, self.render_violation(rule)));
        }
        out.push_str("where:\n");
        for b in &self.bindings {
            out.push_str(&format!("  {} := {}\n", b.name, render_predicate(&b.predicate)));
        }
        out
    }

    fn render_violation(&self, rule: &CompiledRule) -> String {
        match &rule.root {
            Node::Iff(a, b) => format!(
                "{} + {}",
                self.render_implication_violation(a, b),
                self.render_implication_violation(b, a)
            ),
            other => self.render_generator(&self.render_truth(other)),
        }
    }

    fn render_implication_violation(&self, premise: &Node, conclusion: &Node) -> String {
        let (tp, tc) = (self.render_truth(premise), self.render_truth(conclusion));
        match (self.generator, self.tnorm) {
            // g(1 - p*(1 - c)) simplifies to p*(1 - c).
            (Generator::OneMinus, TNorm::Product) => format!("{tp}·(1 − {tc})"),
            _ => self.render_generator(&self.render_implies(&tp, &tc)),
        }
    }

    fn render_generator(&self, truth: &str) -> String {
        match self.generator {
            Generator::OneMinus => format!("1 − {truth}"),
            Generator::NegLog => format!("−ln {truth}"),
        }
    }

    fn render_implies(&self, a: &str, b: &str) -> String {
        match self.tnorm {
            TNorm::Product => format!("(1 − {a}·(1 − {b}))"),
            TNorm::Lukasiewicz => format!("min(1, 1 − {a} + {b})"),
            TNorm::Goedel => format!("({a} ≤ {b} ? 1 : {b})"),
        }
    }

    fn render_truth(&self, node: &Node) -> String {
        match node {
            Node::Atom(i) => self.bindings[*i].name.clone(),
            Node::Not(inner) => format!("(1 − {})", self.render_truth(inner)),
            Node::And(xs) => self.render_chain(xs, |a, b| match self.tnorm {
                TNorm::Product => format!("{a}·{b}"),
                TNorm::Lukasiewicz => format!("max(0, {a} + {b} − 1)"),
                TNorm::Goedel => format!("min({a}, {b})"),
            }),
            Node::Or(xs) => self.render_chain(xs, |a, b| match self.tnorm {
                TNorm::Product => format!("({a} + {b} − {a}·{b})"),
                TNorm::Lukasiewicz => format!("min(1, {a} + {b})"),
                TNorm::Goedel => format!("max({a}, {b})"),
            }),
            Node::ExactlyOne(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| self.render_truth(x)).collect();
                match self.tnorm {
                    TNorm::Product => {
                        let terms: Vec<String> = (0..parts.len())
                            .map(|i| {
                                let mut factors = vec![parts[i].clone()];
                                for (j, p) in parts.iter().enumerate() {
                                    if j != i {
                                        factors.push(format!("(1 − {p})"));
                                    }
                                }
                                factors.join("·")
                            })
                            .collect();
                        format!("({})", terms.join(" + "))
                    }
                    _ => {
                        let (a, b) = (&parts[0], &parts[1]);
                        let or = match self.tnorm {
                            TNorm::Lukasiewicz => format!("min(1, {a} + {b})"),
                            _ => format!("max({a}, {b})"),
                        };
                        let and = match self.tnorm {
                            TNorm::Lukasiewicz => format!("max(0, {a} + {b} − 1)"),
                            _ => format!("min({a}, {b})"),
                        };
                        match self.tnorm {
                            TNorm::Lukasiewicz => format!("max(0, {or} + (1 − {and}) − 1)"),
                            _ => format!("min({or}, 1 − {and})"),
                        }
                    }
                }
            }
            Node::Implies(a, b) => {
                let (ta, tb) = (self.render_truth(a), self.render_truth(b));
                self.render_implies(&ta, &tb)
            }
            Node::Iff(a, b) => {
                let (ta, tb) = (self.render_truth(a), self.render_truth(b));
                let fwd = self.render_implies(&ta, &tb);
                let back = self.render_implies(&tb, &ta);
                match self.tnorm {
                    TNorm::Product => format!("{fwd}·{back}"),
                    TNorm::Lukasiewicz => format!("max(0, {fwd} + {back} − 1)"),
                    TNorm::Goedel => format!("min({fwd}, {back})"),
                }
            }
        }
    }

    fn render_chain(&self, xs: &[Node], combine: impl Fn(&str, &str) -> String) -> String {
        let mut acc = self.render_truth(&xs[0]);
        for x in &xs[1..] {
            let next = self.render_truth(x);
            acc = combine(&acc, &next);
        }
        acc
    }
}

fn render_predicate(p: &PredicateBinding) -> String {
    match *p {
        PredicateBinding::InputThreshold { feature, direction, threshold, tau } => {
            let arg = match direction {
                Direction::Above => format!("x[{feature}] − {threshold}"),
                Direction::Below => format!("{threshold} − x[{feature}]"),
            };
            format!("σ({tau}·({arg}))")
        }
        PredicateBinding::OutputClass { class } => format!("P(class {class})"),
        PredicateBinding::OutputThreshold { head, direction, threshold, tau } => {
            let arg = match direction {
                Direction::Above => format!("y[{head}] − {threshold}"),
                Direction::Below => format!("{threshold} − y[{head}]"),
            };
            format!("σ({tau}·({arg}))")
        }
    }
}
