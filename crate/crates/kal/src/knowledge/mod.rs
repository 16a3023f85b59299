//! The rule language: schemas, predicate bindings, formulas, parsing,
//! and printing.
//!
//! A knowledge base is a list of named predicates plus a list of rules
//! over them. Predicates turn a raw feature or a network output into a
//! graded truth value (via a steep logistic around a threshold, or the
//! predicted class probability directly); rules combine predicates with
//! `and`, `or`, `not`, `xor` (exactly-one), `=>`, and `<=>`.
//!
//! Source text looks like:
//!
//! ```text
//! # comments run to end of line
//! input x1 = feature(0) > 0.5
//! input x2 = feature(1) > 0.5
//! output f = class(0)
//!
//! rule xor_iff: x1 xor x2 <=> f
//! ```
//!
//! [`parse_knowledge`] turns source text into a validated
//! [`KnowledgeBase`]; [`KnowledgeBase::to_dsl`] prints it back in a
//! canonical form that re-parses to a structurally identical base.

mod ast;
mod parser;
mod printer;

pub use ast::{DEFAULT_TAU, DEFAULT_THRESHOLD, Direction, Formula, PredicateBinding, Rule};
pub use parser::parse_knowledge;
pub(crate) use parser::is_keyword;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The id reserved for the self-uncertainty rule appended by
/// [`add_uncertainty_rule`].
pub const UNCERTAINTY_RULE_ID: &str = "uncertainty";

/// What kind of prediction the network makes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// One sigmoid head; class 0 probability is the head itself.
    Binary,
    /// Softmax over two or more mutually exclusive classes.
    Multiclass,
    /// Independent sigmoid heads.
    Multilabel,
    /// Identity heads predicting real values.
    Regression,
}

impl TaskKind {
    /// True for tasks whose outputs are class probabilities.
    pub fn is_classification(self) -> bool {
        !matches!(self, TaskKind::Regression)
    }

    /// Stable lowercase identifier (`binary`, `multiclass`, ...).
    pub fn id(self) -> &'static str {
        match self {
            TaskKind::Binary => "binary",
            TaskKind::Multiclass => "multiclass",
            TaskKind::Multilabel => "multilabel",
            TaskKind::Regression => "regression",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary" => Ok(TaskKind::Binary),
            "multiclass" => Ok(TaskKind::Multiclass),
            "multilabel" => Ok(TaskKind::Multilabel),
            "regression" => Ok(TaskKind::Regression),
            other => Err(format!("unknown task kind `{other}`")),
        }
    }
}

/// Input/output shape a knowledge base is written against: how many
/// features exist, how many output heads, and what the heads mean.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub input_dim: usize,
    pub output_dim: usize,
    pub task: TaskKind,
}

impl Schema {
    /// Builds a schema, rejecting head counts that contradict the task
    /// kind (a binary task has exactly one head, a multiclass task at
    /// least two).
    pub fn new(input_dim: usize, output_dim: usize, task: TaskKind) -> Result<Self, KnowledgeError> {
        if input_dim == 0 {
            return Err(KnowledgeError::Schema("input_dim must be at least 1".into()));
        }
        let head_ok = match task {
            TaskKind::Binary => output_dim == 1,
            TaskKind::Multiclass => output_dim >= 2,
            TaskKind::Multilabel | TaskKind::Regression => output_dim >= 1,
        };
        if !head_ok {
            return Err(KnowledgeError::Schema(format!(
                "{} task cannot have {output_dim} output head(s)",
                task.id()
            )));
        }
        Ok(Schema { input_dim, output_dim, task })
    }

    /// Schema for a single sigmoid head over `input_dim` features.
    pub fn binary(input_dim: usize) -> Self {
        Schema { input_dim, output_dim: 1, task: TaskKind::Binary }
    }

    /// Schema for `classes` softmax classes over `input_dim` features.
    pub fn multiclass(input_dim: usize, classes: usize) -> Self {
        Schema { input_dim, output_dim: classes, task: TaskKind::Multiclass }
    }

    /// Schema for one real-valued head over `input_dim` features.
    pub fn regression(input_dim: usize) -> Self {
        Schema { input_dim, output_dim: 1, task: TaskKind::Regression }
    }

    /// Number of class heads a classification task exposes to rules.
    pub fn class_count(&self) -> usize {
        if self.task.is_classification() { self.output_dim } else { 0 }
    }
}

/// Everything that can go wrong while building or checking a knowledge
/// base.
#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("predicate `{name}`: {message}")]
    Binding { name: String, message: String },
    #[error("rule `{id}`: {message}")]
    Rule { id: String, message: String },
    #[error("the uncertainty rule needs class probabilities; this is a regression task")]
    UncertaintyOnRegression,
    #[error("rule id `{UNCERTAINTY_RULE_ID}` is reserved for the generated uncertainty rule")]
    ReservedRuleId,
}

/// A predicate binding together with the name rules refer to it by.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedBinding {
    pub name: String,
    pub predicate: PredicateBinding,
}

/// A validated set of predicate bindings and rules over one schema.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeBase {
    schema: Schema,
    bindings: Vec<NamedBinding>,
    rules: Vec<Rule>,
    name_index: HashMap<String, usize>,
}

impl KnowledgeBase {
    /// An empty base over `schema`; add bindings and rules to it.
    pub fn new(schema: Schema) -> Self {
        KnowledgeBase { schema, bindings: Vec::new(), rules: Vec::new(), name_index: HashMap::new() }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Bindings in declaration order.
    pub fn bindings(&self) -> &[NamedBinding] {
        &self.bindings
    }

    /// Rules in declaration order.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Index of the binding named `name`, if any.
    pub fn binding_index(&self, name: &str) -> Option<usize> {
        self.name_index.get(name).copied()
    }

    /// Declares a predicate under `name`, rejecting duplicates and
    /// predicates that fall outside the schema.
    pub fn add_binding(&mut self, name: &str, predicate: PredicateBinding) -> Result<usize, KnowledgeError> {
        if self.name_index.contains_key(name) {
            return Err(KnowledgeError::Binding {
                name: name.to_string(),
                message: "declared twice".into(),
            });
        }
        check_name(name).map_err(|message| KnowledgeError::Binding { name: name.to_string(), message })?;
        check_predicate(&predicate, &self.schema)
            .map_err(|message| KnowledgeError::Binding { name: name.to_string(), message })?;
        let index = self.bindings.len();
        self.bindings.push(NamedBinding { name: name.to_string(), predicate });
        self.name_index.insert(name.to_string(), index);
        Ok(index)
    }

    /// Appends a rule, rejecting duplicate ids, unbound atoms, and
    /// malformed connectives.
    pub fn add_rule(&mut self, id: &str, formula: Formula) -> Result<(), KnowledgeError> {
        self.add_rule_inner(id, formula, false)
    }

    fn add_rule_inner(&mut self, id: &str, formula: Formula, is_uncertainty: bool) -> Result<(), KnowledgeError> {
        if !is_uncertainty && id == UNCERTAINTY_RULE_ID {
            return Err(KnowledgeError::ReservedRuleId);
        }
        if self.rules.iter().any(|r| r.id == id) {
            return Err(KnowledgeError::Rule { id: id.to_string(), message: "declared twice".into() });
        }
        check_name(id).map_err(|message| KnowledgeError::Rule { id: id.to_string(), message })?;
        check_formula(&formula, &self.name_index)
            .map_err(|message| KnowledgeError::Rule { id: id.to_string(), message })?;
        self.rules.push(Rule { id: id.to_string(), formula, is_uncertainty });
        Ok(())
    }

    /// Re-checks every invariant: bindings fit the schema, rule atoms
    /// resolve, connectives have enough operands. Useful after building
    /// a base programmatically.
    pub fn validate(&self) -> Result<(), KnowledgeError> {
        for b in &self.bindings {
            check_predicate(&b.predicate, &self.schema)
                .map_err(|message| KnowledgeError::Binding { name: b.name.clone(), message })?;
        }
        for r in &self.rules {
            check_formula(&r.formula, &self.name_index)
                .map_err(|message| KnowledgeError::Rule { id: r.id.clone(), message })?;
        }
        Ok(())
    }

    /// A copy keeping only the first `keep` non-uncertainty rules (the
    /// uncertainty rule, if present, always survives). Bindings are
    /// kept as-is; unused ones are harmless.
    pub fn with_rule_prefix(&self, keep: usize) -> KnowledgeBase {
        let mut kept = Vec::new();
        let mut remaining = keep;
        for rule in &self.rules {
            if rule.is_uncertainty {
                kept.push(rule.clone());
            } else if remaining > 0 {
                kept.push(rule.clone());
                remaining -= 1;
            }
        }
        KnowledgeBase {
            schema: self.schema.clone(),
            bindings: self.bindings.clone(),
            rules: kept,
            name_index: self.name_index.clone(),
        }
    }

    /// True if the generated uncertainty rule is present.
    pub fn has_uncertainty_rule(&self) -> bool {
        self.rules.iter().any(|r| r.is_uncertainty)
    }
}

/// Appends the self-uncertainty rule: every class head should commit to
/// 0 or 1, expressed as `f xor not f` per head (joined with `and` when
/// there are several heads). Under the Product T-norm with the `1 - t`
/// generator a single head contributes `2 f (1 - f)`, which peaks at
/// maximally undecided predictions.
///
/// Classification only: a regression head has no probability to be
/// undecided about, and the call fails on a regression schema.
pub fn add_uncertainty_rule(kb: &mut KnowledgeBase) -> Result<(), KnowledgeError> {
    if kb.schema.task == TaskKind::Regression {
        return Err(KnowledgeError::UncertaintyOnRegression);
    }
    if kb.has_uncertainty_rule() {
        return Err(KnowledgeError::Rule {
            id: UNCERTAINTY_RULE_ID.to_string(),
            message: "already present".into(),
        });
    }
    let heads = kb.schema.class_count();
    let mut parts = Vec::with_capacity(heads);
    for class in 0..heads {
        let name = class_atom_name(kb, class)?;
        let head = Formula::atom(&name);
        parts.push(Formula::exactly_one(vec![head.clone(), Formula::not(head)]));
    }
    let formula = if parts.len() == 1 { parts.pop().unwrap() } else { Formula::and(parts) };
    kb.add_rule_inner(UNCERTAINTY_RULE_ID, formula, true)
}

/// Name of a binding for `class(class)`, reusing an existing one when
/// the base already declares it and minting `_f{class}` otherwise.
fn class_atom_name(kb: &mut KnowledgeBase, class: usize) -> Result<String, KnowledgeError> {
    for b in &kb.bindings {
        if b.predicate == (PredicateBinding::OutputClass { class }) {
            return Ok(b.name.clone());
        }
    }
    let mut name = format!("_f{class}");
    while kb.name_index.contains_key(&name) {
        name.push('_');
    }
    kb.add_binding(&name, PredicateBinding::OutputClass { class })?;
    Ok(name)
}

fn check_name(name: &str) -> Result<(), String> {
    let mut chars = name.chars();
    let ok_head = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    let ok_tail = name.chars().skip(1).all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ok_head || !ok_tail {
        return Err(format!("`{name}` is not a valid identifier"));
    }
    if parser::is_keyword(name) {
        return Err(format!("`{name}` is a keyword"));
    }
    Ok(())
}

fn check_predicate(p: &PredicateBinding, schema: &Schema) -> Result<(), String> {
    match *p {
        PredicateBinding::InputThreshold { feature, tau, .. } => {
            if feature >= schema.input_dim {
                return Err(format!(
                    "feature({feature}) is out of range for {} input feature(s)",
                    schema.input_dim
                ));
            }
            check_tau(tau)
        }
        PredicateBinding::OutputClass { class } => {
            if !schema.task.is_classification() {
                return Err("class(...) makes no sense for a regression task".into());
            }
            if class >= schema.class_count() {
                return Err(format!(
                    "class({class}) is out of range for {} class head(s)",
                    schema.class_count()
                ));
            }
            Ok(())
        }
        PredicateBinding::OutputThreshold { head, tau, .. } => {
            if head >= schema.output_dim {
                return Err(format!(
                    "value({head}) is out of range for {} output head(s)",
                    schema.output_dim
                ));
            }
            check_tau(tau)
        }
    }
}

fn check_tau(tau: f64) -> Result<(), String> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(format!("tau must be a positive finite number, got {tau}"))
    }
}

fn check_formula(f: &Formula, names: &HashMap<String, usize>) -> Result<(), String> {
    match f {
        Formula::Atom(name) => {
            if names.contains_key(name) {
                Ok(())
            } else {
                Err(format!("atom `{name}` is not declared"))
            }
        }
        Formula::Not(inner) => check_formula(inner, names),
        Formula::And(xs) | Formula::Or(xs) | Formula::ExactlyOne(xs) => {
            if xs.len() < 2 {
                return Err("n-ary connective needs at least two operands".into());
            }
            xs.iter().try_for_each(|x| check_formula(x, names))
        }
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            check_formula(a, names)?;
            check_formula(b, names)
        }
    }
}
