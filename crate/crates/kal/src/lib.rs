//! Knowledge-driven active learning.
//!
//! This crate selects which unlabeled samples are worth sending to an
//! annotator by measuring how strongly a trained network *contradicts*
//! domain knowledge on each sample. Domain knowledge is written as
//! first-order rules over input features and network outputs, compiled
//! into differentiable violation scores through a fuzzy-logic T-norm,
//! and the pool is ranked by total violation: the sample the network
//! gets "most wrong" with respect to the rules is labeled next.
//!
//! The pieces, bottom to top:
//!
//! * [`knowledge`] — a small rule language (threshold predicates over
//!   features and outputs, boolean connectives, `xor` as exactly-one)
//!   with a parser, canonical printer, and validation.
//! * [`lowering`] — compiles rules into violation evaluators under the
//!   Product, Łukasiewicz, or Gödel T-norm with a choice of additive
//!   generator.
//! * [`model`] — a seeded one-hidden-layer MLP with AdamW, optional
//!   Monte-Carlo dropout, a finite-difference gradient check, and a
//!   compact snapshot format.
//! * [`data`] — bundled tabular tasks (a two-feature exclusive-or
//!   problem, the iris flowers, a medical-charges regression) plus CSV
//!   loaders and deterministic cross-validation fold plans.
//! * [`strategies`] — the knowledge-driven selector with a diversity
//!   cap, and the classic baselines it is benchmarked against
//!   (uncertainty sampling, BALD, core-set pickers, adversarial
//!   distance, supervised-loss oracle, random).
//! * [`xai`] — mines rules back out of a fitted network through a
//!   shallow decision-tree surrogate, so selection can run even when
//!   no expert rules exist.
//! * [`harness`] — cross-validated active-learning experiments:
//!   label-budget curves, area under the budget curve, selection
//!   timing, rule-violation audits, and knowledge ablations.
//!
//! Everything is seeded and deterministic: the same configuration and
//! data produce bitwise-identical models and selections.

pub mod data;
pub mod harness;
pub mod knowledge;
pub mod lowering;
pub mod model;
pub mod strategies;
pub mod xai;

mod book;

pub use knowledge::{Formula, KnowledgeBase, PredicateBinding, Rule, Schema, TaskKind};
pub use lowering::{CompiledKnowledge, Generator, TNorm};
