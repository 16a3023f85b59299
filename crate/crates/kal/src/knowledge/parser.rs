//! Hand-rolled lexer and recursive-descent parser for rule source text.
//!
//! Statements are line-oriented: one binding declaration or one rule
//! per line, `#` comments running to end of line. Operator precedence,
//! loosest to tightest: `<=>` (left-associative), `=>`
//! (right-associative), `xor`, `or`, `and` (n-ary, flattened), `not`.

use super::ast::{DEFAULT_TAU, DEFAULT_THRESHOLD, Direction, Formula, PredicateBinding};
use super::{KnowledgeBase, KnowledgeError, Schema};

const KEYWORDS: &[&str] =
    &["input", "output", "feature", "class", "value", "rule", "tau", "and", "or", "not", "xor"];

/// True if `word` is reserved by the language.
pub(crate) fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Parses rule source text into a validated knowledge base over
/// `schema`. Errors carry the 1-based line and column they were
/// detected at.
pub fn parse_knowledge(source: &str, schema: &Schema) -> Result<KnowledgeBase, KnowledgeError> {
    let tokens = lex(source)?;
    Parser { tokens, pos: 0, kb: KnowledgeBase::new(schema.clone()) }.parse()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    LParen,
    RParen,
    Eq,
    Colon,
    Lt,
    Gt,
    Minus,
    FatArrow,
    IffArrow,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Minus => "`-`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::IffArrow => "`<=>`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err_at(line: usize, column: usize, message: impl Into<String>) -> KnowledgeError {
    KnowledgeError::Parse { line, column, message: message.into() }
}

fn lex(source: &str) -> Result<Vec<Token>, KnowledgeError> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! push {
        ($tok:expr, $col:expr) => {
            tokens.push(Token { tok: $tok, line, column: $col })
        };
    }

    while let Some(&c) = chars.peek() {
        let start = column;
        match c {
            '\n' => {
                chars.next();
                push!(Tok::Newline, start);
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '(' | ')' | ':' | '-' => {
                chars.next();
                column += 1;
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ':' => Tok::Colon,
                    _ => Tok::Minus,
                };
                push!(tok, start);
            }
            '=' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    column += 1;
                    push!(Tok::FatArrow, start);
                } else {
                    push!(Tok::Eq, start);
                }
            }
            '<' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    column += 1;
                    if chars.next() != Some('>') {
                        return Err(err_at(line, start, "expected `<=>`"));
                    }
                    column += 1;
                    push!(Tok::IffArrow, start);
                } else {
                    push!(Tok::Lt, start);
                }
            }
            '>' => {
                chars.next();
                column += 1;
                push!(Tok::Gt, start);
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    let take = c.is_ascii_digit()
                        || c == '.'
                        || c == 'e'
                        || c == 'E'
                        || ((c == '+' || c == '-') && matches!(text.chars().last(), Some('e' | 'E')));
                    if !take {
                        break;
                    }
                    text.push(c);
                    chars.next();
                    column += 1;
                }
                push!(Tok::Number(text), start);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if !(c.is_ascii_alphanumeric() || c == '_') {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    column += 1;
                }
                push!(Tok::Word(word), start);
            }
            other => return Err(err_at(line, start, format!("unexpected character `{other}`"))),
        }
    }
    tokens.push(Token { tok: Tok::Eof, line, column });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    kb: KnowledgeBase,
}

impl Parser {
    fn parse(mut self) -> Result<KnowledgeBase, KnowledgeError> {
        loop {
            while self.peek() == &Tok::Newline {
                self.pos += 1;
            }
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Word(w) if w == "input" || w == "output" => self.declaration(w == "input")?,
                Tok::Word(w) if w == "rule" => self.rule()?,
                _ => {
                    let t = self.current();
                    return Err(err_at(
                        t.line,
                        t.column,
                        format!("expected `input`, `output`, or `rule`, found {}", t.tok.describe()),
                    ));
                }
            }
            self.end_of_statement()?;
        }
        Ok(self.kb)
    }

    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Token, KnowledgeError> {
        let t = self.advance();
        if t.tok == want {
            Ok(t)
        } else {
            Err(err_at(
                t.line,
                t.column,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            ))
        }
    }

    /// Consumes a non-keyword identifier.
    fn name(&mut self, what: &str) -> Result<(String, Token), KnowledgeError> {
        let t = self.advance();
        match &t.tok {
            Tok::Word(w) if !is_keyword(w) => Ok((w.clone(), t.clone())),
            other => {
                Err(err_at(t.line, t.column, format!("expected {what}, found {}", other.describe())))
            }
        }
    }

    fn end_of_statement(&mut self) -> Result<(), KnowledgeError> {
        let t = self.advance();
        match t.tok {
            Tok::Newline | Tok::Eof => Ok(()),
            other => Err(err_at(
                t.line,
                t.column,
                format!("expected end of line, found {}", other.describe()),
            )),
        }
    }

    /// `input NAME = feature(i) [> t | < t] [tau r]` and the `output`
    /// forms over `class(k)` / `value(k)`.
    fn declaration(&mut self, is_input: bool) -> Result<(), KnowledgeError> {
        self.pos += 1; // `input` / `output`
        let (name, name_tok) = self.name("a predicate name")?;
        self.expect(Tok::Eq)?;
        let kind = self.advance();
        let kind_word = match &kind.tok {
            Tok::Word(w) if w == "feature" || w == "class" || w == "value" => w.clone(),
            other => {
                return Err(err_at(
                    kind.line,
                    kind.column,
                    format!("expected `feature`, `class`, or `value`, found {}", other.describe()),
                ));
            }
        };
        self.expect(Tok::LParen)?;
        let index = self.integer()?;
        self.expect(Tok::RParen)?;

        let direction_threshold = match self.peek() {
            Tok::Gt => {
                self.pos += 1;
                Some((Direction::Above, self.real()?))
            }
            Tok::Lt => {
                self.pos += 1;
                Some((Direction::Below, self.real()?))
            }
            _ => None,
        };
        let tau = match self.peek() {
            Tok::Word(w) if w == "tau" => {
                self.pos += 1;
                Some(self.real()?)
            }
            _ => None,
        };

        let wrong_space = |message: &str| err_at(kind.line, kind.column, message.to_string());
        let predicate = match (is_input, kind_word.as_str()) {
            (true, "feature") => {
                let (direction, threshold) =
                    direction_threshold.unwrap_or((Direction::Above, DEFAULT_THRESHOLD));
                PredicateBinding::InputThreshold {
                    feature: index,
                    direction,
                    threshold,
                    tau: tau.unwrap_or(DEFAULT_TAU),
                }
            }
            (false, "class") => {
                if direction_threshold.is_some() || tau.is_some() {
                    return Err(wrong_space("class(...) takes no threshold or tau"));
                }
                PredicateBinding::OutputClass { class: index }
            }
            (false, "value") => {
                let (direction, threshold) =
                    direction_threshold.unwrap_or((Direction::Above, DEFAULT_THRESHOLD));
                PredicateBinding::OutputThreshold {
                    head: index,
                    direction,
                    threshold,
                    tau: tau.unwrap_or(DEFAULT_TAU),
                }
            }
            (true, _) => return Err(wrong_space("an `input` predicate must bind feature(...)")),
            (false, _) => {
                return Err(wrong_space("an `output` predicate must bind class(...) or value(...)"));
            }
        };
        self.kb.add_binding(&name, predicate).map(|_| ()).map_err(|e| at_token(e, &name_tok))
    }

    /// `rule ID : expr`
    fn rule(&mut self) -> Result<(), KnowledgeError> {
        self.pos += 1; // `rule`
        let (id, id_tok) = self.name("a rule id")?;
        self.expect(Tok::Colon)?;
        let formula = self.iff_expr()?;
        self.kb.add_rule(&id, formula).map_err(|e| at_token(e, &id_tok))
    }

    fn integer(&mut self) -> Result<usize, KnowledgeError> {
        let t = self.advance();
        match &t.tok {
            Tok::Number(text) => text
                .parse::<usize>()
                .map_err(|_| err_at(t.line, t.column, format!("expected an integer, found `{text}`"))),
            other => {
                Err(err_at(t.line, t.column, format!("expected an integer, found {}", other.describe())))
            }
        }
    }

    fn real(&mut self) -> Result<f64, KnowledgeError> {
        let negative = if self.peek() == &Tok::Minus {
            self.pos += 1;
            true
        } else {
            false
        };
        let t = self.advance();
        match &t.tok {
            Tok::Number(text) => {
                let value = text
                    .parse::<f64>()
                    .map_err(|_| err_at(t.line, t.column, format!("expected a number, found `{text}`")))?;
                Ok(if negative { -value } else { value })
            }
            other => {
                Err(err_at(t.line, t.column, format!("expected a number, found {}", other.describe())))
            }
        }
    }

    /// `<=>`, left-associative.
    fn iff_expr(&mut self) -> Result<Formula, KnowledgeError> {
        let mut acc = self.implies_expr()?;
        while self.peek() == &Tok::IffArrow {
            self.pos += 1;
            let rhs = self.implies_expr()?;
            acc = Formula::iff(acc, rhs);
        }
        Ok(acc)
    }

    /// `=>`, right-associative.
    fn implies_expr(&mut self) -> Result<Formula, KnowledgeError> {
        let mut parts = vec![self.xor_expr()?];
        while self.peek() == &Tok::FatArrow {
            self.pos += 1;
            parts.push(self.xor_expr()?);
        }
        let mut acc = parts.pop().unwrap();
        while let Some(premise) = parts.pop() {
            acc = Formula::implies(premise, acc);
        }
        Ok(acc)
    }

    fn xor_expr(&mut self) -> Result<Formula, KnowledgeError> {
        let mut parts = vec![self.or_expr()?];
        while matches!(self.peek(), Tok::Word(w) if w == "xor") {
            self.pos += 1;
            parts.push(self.or_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::ExactlyOne(parts) })
    }

    fn or_expr(&mut self) -> Result<Formula, KnowledgeError> {
        let mut parts = vec![self.and_expr()?];
        while matches!(self.peek(), Tok::Word(w) if w == "or") {
            self.pos += 1;
            parts.push(self.and_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn and_expr(&mut self) -> Result<Formula, KnowledgeError> {
        let mut parts = vec![self.unary_expr()?];
        while matches!(self.peek(), Tok::Word(w) if w == "and") {
            self.pos += 1;
            parts.push(self.unary_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary_expr(&mut self) -> Result<Formula, KnowledgeError> {
        match self.peek().clone() {
            Tok::Word(w) if w == "not" => {
                self.pos += 1;
                Ok(Formula::not(self.unary_expr()?))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.iff_expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Word(w) if !is_keyword(&w) => {
                self.pos += 1;
                Ok(Formula::Atom(w))
            }
            other => {
                let t = self.current();
                Err(err_at(
                    t.line,
                    t.column,
                    format!("expected an atom, `not`, or `(`, found {}", other.describe()),
                ))
            }
        }
    }
}

/// Re-anchors a validation error produced by the knowledge base onto
/// the token that triggered it, so every parse failure carries a
/// position.
fn at_token(e: KnowledgeError, t: &Token) -> KnowledgeError {
    match e {
        KnowledgeError::Parse { .. } => e,
        other => err_at(t.line, t.column, other.to_string()),
    }
}
