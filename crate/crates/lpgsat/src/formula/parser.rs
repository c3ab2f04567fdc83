//! Recursive-descent parser for the clause-file grammar.
//!
//! ```text
//! clauseset := (clause terminator)*   terminator := ";" | newline
//! clause    := rational "<=" formula "<=" rational
//! formula   := impl
//! impl      := or ( ("->l"|"->p"|"->g") impl )?     right-assoc
//! or        := and ( ("|l"|"|p"|"|g") and )*        left-assoc
//! and       := unary ( ("&l"|"&p"|"&g") unary )*    left-assoc
//! unary     := ("!l"|"!p"|"!g") unary | atom
//! atom      := identifier | rational | "(" formula ")"
//! rational  := decimal | integer "/" integer
//! ```
//!
//! `#` starts a comment running to the end of the line. Clauses do not span
//! lines.

use num::{One, Signed};
use thiserror::Error;

use super::{Clause, ClauseSet, Formula, FormulaError, Logic};
use crate::rat::{format_rat, parse_rat, Rat};

/// Syntax or semantic error with its 1-based source position.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Le,
    LParen,
    RParen,
    Ident(String),
    Number(Rat),
    Not(Logic),
    And(Logic),
    Or(Logic),
    Implies(Logic),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Le => "`<=`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(r) => format!("rational `{}`", format_rat(r)),
            Tok::Not(l) => format!("`!{}`", l.suffix()),
            Tok::And(l) => format!("`&{}`", l.suffix()),
            Tok::Or(l) => format!("`|{}`", l.suffix()),
            Tok::Implies(l) => format!("`->{}`", l.suffix()),
        }
    }
}

fn logic_for(c: char) -> Option<Logic> {
    match c {
        'l' => Some(Logic::Lukasiewicz),
        'p' => Some(Logic::Product),
        'g' => Some(Logic::Goedel),
        _ => None,
    }
}

fn tokenize(line: usize, col0: usize, text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let col = col0 + i + 1;
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, col));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, col));
                i += 1;
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    toks.push((Tok::Le, col));
                    i += 2;
                } else {
                    return Err(ParseError::new(line, col, "expected `<=`"));
                }
            }
            '-' => {
                if chars.get(i + 1) != Some(&'>') {
                    return Err(ParseError::new(line, col, "expected `->` after `-`"));
                }
                let logic = chars
                    .get(i + 2)
                    .copied()
                    .and_then(logic_for)
                    .ok_or_else(|| {
                        ParseError::new(line, col, "`->` needs a logic suffix l, p or g")
                    })?;
                toks.push((Tok::Implies(logic), col));
                i += 3;
            }
            '&' | '|' | '!' => {
                let logic = chars
                    .get(i + 1)
                    .copied()
                    .and_then(logic_for)
                    .ok_or_else(|| {
                        ParseError::new(
                            line,
                            col,
                            format!("`{c}` needs a logic suffix l, p or g"),
                        )
                    })?;
                toks.push((
                    match c {
                        '&' => Tok::And(logic),
                        '|' => Tok::Or(logic),
                        _ => Tok::Not(logic),
                    },
                    col,
                ));
                i += 2;
            }
            d if d.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == '.' || chars[i] == '/') {
                    i += 1;
                    let digits_start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == digits_start {
                        return Err(ParseError::new(
                            line,
                            col0 + i + 1,
                            "expected digits after `.` or `/`",
                        ));
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = parse_rat(&text)
                    .map_err(|e| ParseError::new(line, col, e))?;
                toks.push((Tok::Number(value), col));
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            other => {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or(self.end_col)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.here(), message)
    }

    fn expect_le(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            Some(Tok::Le) => Ok(()),
            Some(t) => Err(ParseError::new(
                self.line,
                self.here(),
                format!("expected `<=`, found {}", t.describe()),
            )),
            None => Err(self.err("expected `<=`")),
        }
    }

    fn rational(&mut self) -> Result<Rat, ParseError> {
        match self.bump() {
            Some(Tok::Number(r)) => {
                if r.is_negative() || r > Rat::one() {
                    Err(self.err(format!(
                        "constant {} lies outside [0,1]",
                        format_rat(&r)
                    )))
                } else {
                    Ok(r)
                }
            }
            Some(t) => Err(self.err(format!("expected a rational, found {}", t.describe()))),
            None => Err(self.err("expected a rational")),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        self.implication()
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if let Some(Tok::Implies(logic)) = self.peek().cloned() {
            self.bump();
            let rhs = self.implication()?;
            return Ok(Formula::implies(logic, lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while let Some(Tok::Or(logic)) = self.peek().cloned() {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(logic, lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::And(logic)) = self.peek().cloned() {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(logic, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if let Some(Tok::Not(logic)) = self.peek().cloned() {
            self.bump();
            let sub = self.unary()?;
            return Ok(Formula::not(logic, sub));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        match self.bump() {
            Some(Tok::Ident(name)) => Ok(Formula::Var(name)),
            Some(Tok::Number(r)) => {
                if r.is_negative() || r > Rat::one() {
                    Err(self.err(format!(
                        "constant {} lies outside [0,1]",
                        format_rat(&r)
                    )))
                } else {
                    Ok(Formula::Const(r))
                }
            }
            Some(Tok::LParen) => {
                let inner = self.formula()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    Some(t) => Err(self.err(format!("expected `)`, found {}", t.describe()))),
                    None => Err(self.err("expected `)`")),
                }
            }
            Some(t) => Err(self.err(format!(
                "expected a variable, constant or `(`, found {}",
                t.describe()
            ))),
            None => Err(self.err("expected a formula")),
        }
    }
}

fn parse_segment(
    line: usize,
    col0: usize,
    text: &str,
) -> Result<Option<Clause>, ParseError> {
    let toks = tokenize(line, col0, text)?;
    if toks.is_empty() {
        return Ok(None);
    }
    let end_col = col0 + text.chars().count() + 1;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        end_col,
    };
    let start_col = p.here();
    let lower = p.rational()?;
    p.expect_le()?;
    let body = p.formula()?;
    p.expect_le()?;
    let upper = p.rational()?;
    if let Some(t) = p.peek() {
        let msg = format!("unexpected {} after clause", t.describe());
        return Err(p.err(msg));
    }
    match Clause::new(lower, body, upper) {
        Ok(c) => Ok(Some(c)),
        Err(FormulaError::BoundsOutOfOrder(l, u)) => Err(ParseError::new(
            line,
            start_col,
            format!("clause lower bound {l} exceeds upper bound {u}"),
        )),
        Err(e) => Err(ParseError::new(line, start_col, e.to_string())),
    }
}

/// Parses a clause file into a [`ClauseSet`].
pub fn parse(text: &str) -> Result<ClauseSet, ParseError> {
    let mut clauses = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut col0 = 0;
        for segment in content.split(';') {
            if let Some(c) = parse_segment(line_no, col0, segment)? {
                clauses.push(c);
            }
            col0 += segment.chars().count() + 1;
        }
    }
    Ok(ClauseSet::new(clauses))
}

/// Parses a single formula (no bounds), mainly for tests and interactive use.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = tokenize(1, 0, text)?;
    let end_col = text.chars().count() + 1;
    let mut p = Parser {
        toks,
        pos: 0,
        line: 1,
        end_col,
    };
    let f = p.formula()?;
    if let Some(t) = p.peek() {
        let msg = format!("unexpected {} after formula", t.describe());
        return Err(p.err(msg));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::render;
    use crate::rat::rat;

    #[test]
    fn parses_the_product_regression_clause() {
        let set = parse("0.75 <= !p (x1 ->p x2) ->p x3 <= 0.75").unwrap();
        assert_eq!(set.clauses().len(), 1);
        let c = &set.clauses()[0];
        assert_eq!(c.lower(), &rat(3, 4));
        assert_eq!(c.upper(), &rat(3, 4));
        let expected = Formula::implies(
            Logic::Product,
            Formula::not(
                Logic::Product,
                Formula::implies(Logic::Product, Formula::var("x1"), Formula::var("x2")),
            ),
            Formula::var("x3"),
        );
        assert_eq!(c.body(), &expected);
    }

    #[test]
    fn parses_plain_variable_clause() {
        let set = parse("0 <= x <= 1").unwrap();
        assert_eq!(set.clauses()[0].body(), &Formula::var("x"));
        assert_eq!(set.clauses()[0].lower(), &rat(0, 1));
        assert_eq!(set.clauses()[0].upper(), &rat(1, 1));
    }

    #[test]
    fn parses_mixed_logic_with_exact_fractional_bounds() {
        let set = parse("1/3 <= (a &l b) |g c <= 2/3").unwrap();
        let c = &set.clauses()[0];
        assert_eq!(c.lower(), &rat(1, 3));
        assert_eq!(c.upper(), &rat(2, 3));
        let expected = Formula::or(
            Logic::Goedel,
            Formula::and(Logic::Lukasiewicz, Formula::var("a"), Formula::var("b")),
            Formula::var("c"),
        );
        assert_eq!(c.body(), &expected);
    }

    #[test]
    fn respects_precedence_and_associativity() {
        // -> is right-associative and binds loosest.
        let f = parse_formula("a ->l b ->l c").unwrap();
        assert_eq!(
            f,
            Formula::implies(
                Logic::Lukasiewicz,
                Formula::var("a"),
                Formula::implies(Logic::Lukasiewicz, Formula::var("b"), Formula::var("c")),
            )
        );
        // & binds tighter than |.
        let f = parse_formula("a |p b &g c").unwrap();
        assert_eq!(
            f,
            Formula::or(
                Logic::Product,
                Formula::var("a"),
                Formula::and(Logic::Goedel, Formula::var("b"), Formula::var("c")),
            )
        );
        // Left associativity of & chains, even across logics.
        let f = parse_formula("a &l b &p c").unwrap();
        assert_eq!(
            f,
            Formula::and(
                Logic::Product,
                Formula::and(Logic::Lukasiewicz, Formula::var("a"), Formula::var("b")),
                Formula::var("c"),
            )
        );
    }

    #[test]
    fn semicolons_newlines_and_comments_separate_clauses() {
        let text = "# vocabulary: x, y\n0 <= x <= 1; 1/2 <= y <= 1\n\n1 <= x ->g y <= 1 # tail comment\n";
        let set = parse(text).unwrap();
        assert_eq!(set.clauses().len(), 3);
        assert_eq!(
            set.vocabulary().iter().cloned().collect::<Vec<_>>(),
            vec!["x".to_string(), "y".to_string()]
        );
    }

    #[test]
    fn reports_position_of_syntax_errors() {
        let err = parse("0 <= x & y <= 1").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.col, 8);

        let err = parse("0 <= x <= 1\n0 <= (a &l <= 1").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn rejects_out_of_range_constants_and_bad_bounds() {
        let err = parse("0 <= 1.5 <= 1").unwrap_err();
        assert!(err.message.contains("outside [0,1]"));
        let err = parse("2 <= x <= 1").unwrap_err();
        assert!(err.message.contains("outside [0,1]"));
        let err = parse("3/4 <= x <= 1/4").unwrap_err();
        assert!(err.message.contains("exceeds upper bound"));
    }

    #[test]
    fn render_round_trips_structurally() {
        let texts = [
            "0.75 <= !p (x1 ->p x2) ->p x3 <= 0.75",
            "0 <= x <= 1",
            "1/3 <= (a &l b) |g c <= 2/3",
            "0 <= (a ->l b) ->l c <= 1",
            "0 <= a &l (b &p c) <= 1",
            "1/2 <= !g !l a |p 0.25 <= 1",
        ];
        for t in texts {
            let set = parse(t).unwrap();
            let rendered = render(&set);
            let back = parse(&rendered).unwrap();
            assert_eq!(set, back, "round-trip failed for `{t}` -> `{rendered}`");
        }
    }
}
