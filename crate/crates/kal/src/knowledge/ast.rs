//! Formula and predicate syntax trees.

use serde::{Deserialize, Serialize};

/// Default steepness of the logistic that grades a threshold predicate.
pub const DEFAULT_TAU: f64 = 10.0;

/// Default threshold when a feature or value predicate omits one.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Which side of a threshold a predicate asserts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// True when the value exceeds the threshold (`>`).
    Above,
    /// True when the value falls below the threshold (`<`).
    Below,
}

impl Direction {
    /// The comparison glyph used in source text.
    pub fn symbol(self) -> char {
        match self {
            Direction::Above => '>',
            Direction::Below => '<',
        }
    }
}

/// How an atom name maps onto data: a graded threshold over an input
/// feature, a predicted class probability, or a graded threshold over
/// an output head.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredicateBinding {
    /// `feature(i) > t` (or `< t`), graded by a logistic of slope `tau`.
    InputThreshold { feature: usize, direction: Direction, threshold: f64, tau: f64 },
    /// `class(k)`: the predicted probability of class `k`, used as-is.
    OutputClass { class: usize },
    /// `value(k) > t` (or `< t`) over output head `k` in natural units,
    /// graded by a logistic of slope `tau`.
    OutputThreshold { head: usize, direction: Direction, threshold: f64, tau: f64 },
}

impl PredicateBinding {
    /// Threshold predicate over input feature `feature` with the
    /// default threshold and steepness.
    pub fn feature_above(feature: usize) -> Self {
        PredicateBinding::InputThreshold {
            feature,
            direction: Direction::Above,
            threshold: DEFAULT_THRESHOLD,
            tau: DEFAULT_TAU,
        }
    }
}

/// A rule formula. Connectives with a variable number of operands
/// (`And`, `Or`, `ExactlyOne`) always hold at least two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    /// Reference to a declared predicate.
    Atom(String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    /// `xor` in source text: exactly one operand holds.
    ExactlyOne(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    // Named for the connective, like its siblings, not for `ops::Not`.
    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula) -> Formula {
        Formula::Not(Box::new(inner))
    }

    /// Conjunction of `parts` (panics on fewer than two operands).
    pub fn and(parts: Vec<Formula>) -> Formula {
        assert!(parts.len() >= 2, "and needs at least two operands");
        Formula::And(parts)
    }

    /// Disjunction of `parts` (panics on fewer than two operands).
    pub fn or(parts: Vec<Formula>) -> Formula {
        assert!(parts.len() >= 2, "or needs at least two operands");
        Formula::Or(parts)
    }

    /// Exactly-one over `parts` (panics on fewer than two operands).
    pub fn exactly_one(parts: Vec<Formula>) -> Formula {
        assert!(parts.len() >= 2, "xor needs at least two operands");
        Formula::ExactlyOne(parts)
    }

    pub fn implies(premise: Formula, conclusion: Formula) -> Formula {
        Formula::Implies(Box::new(premise), Box::new(conclusion))
    }

    pub fn iff(left: Formula, right: Formula) -> Formula {
        Formula::Iff(Box::new(left), Box::new(right))
    }

    /// Every atom name in the formula, left to right, duplicates kept.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Atom(name) => out.push(name),
            Formula::Not(inner) => inner.collect_atoms(out),
            Formula::And(xs) | Formula::Or(xs) | Formula::ExactlyOne(xs) => {
                xs.iter().for_each(|x| x.collect_atoms(out));
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

/// A named rule over a knowledge base's predicates.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub id: String,
    pub formula: Formula,
    /// True for the generated self-uncertainty rule, which ablations
    /// keep regardless of how much expert knowledge they drop.
    pub is_uncertainty: bool,
}
