//! Canonical source rendering for knowledge bases.
//!
//! The printed text re-parses to a structurally identical base: every
//! threshold and steepness is written explicitly, floats use Rust's
//! shortest round-trip formatting, and operands that are not strictly
//! tighter than their parent connective are parenthesized (so a nested
//! `And` inside an `And` keeps its own grouping).

use super::KnowledgeBase;
use super::ast::{Formula, PredicateBinding};

/// Binding power, loosest to tightest. A child is printed bare only
/// when its own level is strictly tighter than what its position
/// requires.
fn level(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => 1,
        Formula::Implies(..) => 2,
        Formula::ExactlyOne(..) => 3,
        Formula::Or(..) => 4,
        Formula::And(..) => 5,
        Formula::Not(..) => 6,
        Formula::Atom(..) => 7,
    }
}

impl KnowledgeBase {
    /// Renders the base in canonical rule-language form.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        for binding in self.bindings() {
            match &binding.predicate {
                PredicateBinding::InputThreshold { feature, direction, threshold, tau } => {
                    out.push_str(&format!(
                        "input {} = feature({feature}) {} {threshold} tau {tau}\n",
                        binding.name,
                        direction.symbol(),
                    ));
                }
                PredicateBinding::OutputClass { class } => {
                    out.push_str(&format!("output {} = class({class})\n", binding.name));
                }
                PredicateBinding::OutputThreshold { head, direction, threshold, tau } => {
                    out.push_str(&format!(
                        "output {} = value({head}) {} {threshold} tau {tau}\n",
                        binding.name,
                        direction.symbol(),
                    ));
                }
            }
        }
        if !self.bindings().is_empty() && !self.rules().is_empty() {
            out.push('\n');
        }
        for rule in self.rules() {
            out.push_str(&format!("rule {}: {}\n", rule.id, render(&rule.formula)));
        }
        out
    }
}

/// Renders one formula with minimal parentheses.
pub fn render(formula: &Formula) -> String {
    let mut out = String::new();
    write_formula(formula, 0, &mut out);
    out
}

/// `min_level` is the loosest binding power allowed to appear bare at
/// this position; anything at or below it gets parentheses.
fn write_formula(f: &Formula, min_level: u8, out: &mut String) {
    let wrap = level(f) <= min_level;
    if wrap {
        out.push('(');
    }
    match f {
        Formula::Atom(name) => out.push_str(name),
        Formula::Not(inner) => {
            out.push_str("not ");
            // `not` nests (`not not a`), so its own level is permitted.
            write_formula(inner, level(f) - 1, out);
        }
        Formula::And(xs) => write_chain(xs, " and ", level(f), out),
        Formula::Or(xs) => write_chain(xs, " or ", level(f), out),
        Formula::ExactlyOne(xs) => write_chain(xs, " xor ", level(f), out),
        Formula::Implies(a, b) => {
            // Right-associative: a bare `=>` on the right re-parses
            // into the same tree, on the left it would not.
            write_formula(a, level(f), out);
            out.push_str(" => ");
            write_formula(b, level(f) - 1, out);
        }
        Formula::Iff(a, b) => {
            // Left-associative: mirror image of `=>`.
            write_formula(a, level(f) - 1, out);
            out.push_str(" <=> ");
            write_formula(b, level(f), out);
        }
    }
    if wrap {
        out.push(')');
    }
}

/// N-ary chains re-parse flat, so operands must bind strictly tighter
/// than the chain itself.
fn write_chain(xs: &[Formula], sep: &str, own_level: u8, out: &mut String) {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write_formula(x, own_level, out);
    }
}

