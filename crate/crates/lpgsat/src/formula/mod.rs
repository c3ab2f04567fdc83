//! Fuzzy-formula AST, exact semantics and the clause data model.
//!
//! Formulas are finite trees over three logics; every connective carries the
//! logic it belongs to, so mixed-logic formulas are first-class. Truth values
//! are exact rationals in `[0, 1]` and evaluation follows the standard
//! operator tables:
//!
//! | logic       | x ∧ y            | x ∨ y            | x → y                  | ¬x              |
//! |-------------|------------------|------------------|------------------------|-----------------|
//! | Łukasiewicz | max(0, x+y-1)    | min(1, x+y)      | x ≤ y ? 1 : 1-x+y      | 1-x             |
//! | Product     | x·y              | x+y-x·y          | x ≤ y ? 1 : y/x        | x = 0 ? 1 : 0   |
//! | Gödel       | min(x, y)        | max(x, y)        | x ≤ y ? 1 : y          | x = 0 ? 1 : 0   |

mod parser;

pub use parser::{parse, parse_formula, ParseError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::rat::{format_rat, Rat};

/// The three supported fuzzy logics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Logic {
    Lukasiewicz,
    Product,
    Goedel,
}

impl Logic {
    /// Suffix letter used by the concrete syntax (`&l`, `->p`, `!g`, ...).
    pub fn suffix(self) -> char {
        match self {
            Logic::Lukasiewicz => 'l',
            Logic::Product => 'p',
            Logic::Goedel => 'g',
        }
    }

    pub const ALL: [Logic; 3] = [Logic::Lukasiewicz, Logic::Product, Logic::Goedel];
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Logic::Lukasiewicz => write!(f, "lukasiewicz"),
            Logic::Product => write!(f, "product"),
            Logic::Goedel => write!(f, "goedel"),
        }
    }
}

/// Fuzzy formula. Subformula identity is positional: two syntactically equal
/// subtrees are still distinct occurrences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Var(String),
    Const(Rat),
    Not(Logic, Box<Formula>),
    And(Logic, Box<Formula>, Box<Formula>),
    Or(Logic, Box<Formula>, Box<Formula>),
    Implies(Logic, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(name: impl Into<String>) -> Formula {
        Formula::Var(name.into())
    }

    /// Truth constant; the value must lie in `[0, 1]`.
    pub fn constant(k: Rat) -> Result<Formula, FormulaError> {
        if k.is_negative() || k > Rat::one() {
            return Err(FormulaError::ValueOutOfRange(format_rat(&k)));
        }
        Ok(Formula::Const(k))
    }

    pub fn not(logic: Logic, sub: Formula) -> Formula {
        Formula::Not(logic, Box::new(sub))
    }

    pub fn and(logic: Logic, lhs: Formula, rhs: Formula) -> Formula {
        Formula::And(logic, Box::new(lhs), Box::new(rhs))
    }

    pub fn or(logic: Logic, lhs: Formula, rhs: Formula) -> Formula {
        Formula::Or(logic, Box::new(lhs), Box::new(rhs))
    }

    pub fn implies(logic: Logic, lhs: Formula, rhs: Formula) -> Formula {
        Formula::Implies(logic, Box::new(lhs), Box::new(rhs))
    }

    /// Collects the variable names occurring in the formula.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Var(name) => {
                out.insert(name.clone());
            }
            Formula::Const(_) => {}
            Formula::Not(_, sub) => sub.collect_variables(out),
            Formula::And(_, a, b) | Formula::Or(_, a, b) | Formula::Implies(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    /// Number of connectives (internal nodes).
    pub fn connective_count(&self) -> usize {
        match self {
            Formula::Var(_) | Formula::Const(_) => 0,
            Formula::Not(_, sub) => 1 + sub.connective_count(),
            Formula::And(_, a, b) | Formula::Or(_, a, b) | Formula::Implies(_, a, b) => {
                1 + a.connective_count() + b.connective_count()
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", render_formula(self))
    }
}

/// Errors raised by evaluation and by the domain-type constructors.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("variable `{0}` is not bound by the valuation")]
    UnboundVariable(String),
    #[error("value {0} lies outside [0,1]")]
    ValueOutOfRange(String),
    #[error("clause bounds out of order: {0} > {1}")]
    BoundsOutOfOrder(String, String),
}

/// Total map from variable names to exact truth values in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation(BTreeMap<String, Rat>);

impl Valuation {
    pub fn new() -> Valuation {
        Valuation(BTreeMap::new())
    }

    /// Builds a valuation, rejecting any value outside `[0, 1]`.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Valuation, FormulaError>
    where
        I: IntoIterator<Item = (S, Rat)>,
        S: Into<String>,
    {
        let mut v = Valuation::new();
        for (name, value) in pairs {
            v.insert(name.into(), value)?;
        }
        Ok(v)
    }

    pub fn insert(&mut self, name: String, value: Rat) -> Result<(), FormulaError> {
        if value.is_negative() || value > Rat::one() {
            return Err(FormulaError::ValueOutOfRange(format_rat(&value)));
        }
        self.0.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Rat> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rat)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every name in `names` is bound.
    pub fn is_total_on<'a>(&self, names: impl IntoIterator<Item = &'a String>) -> bool {
        names.into_iter().all(|n| self.0.contains_key(n))
    }
}

/// Bounded formula `lower <= body <= upper`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    lower: Rat,
    body: Formula,
    upper: Rat,
}

impl Clause {
    pub fn new(lower: Rat, body: Formula, upper: Rat) -> Result<Clause, FormulaError> {
        for b in [&lower, &upper] {
            if b.is_negative() || *b > Rat::one() {
                return Err(FormulaError::ValueOutOfRange(format_rat(b)));
            }
        }
        if lower > upper {
            return Err(FormulaError::BoundsOutOfOrder(
                format_rat(&lower),
                format_rat(&upper),
            ));
        }
        Ok(Clause { lower, body, upper })
    }

    pub fn lower(&self) -> &Rat {
        &self.lower
    }

    pub fn body(&self) -> &Formula {
        &self.body
    }

    pub fn upper(&self) -> &Rat {
        &self.upper
    }
}

/// Finite set of clauses plus the vocabulary they range over.
///
/// The vocabulary always contains every variable occurring in a clause and
/// may declare extra (unconstrained) names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClauseSet {
    clauses: Vec<Clause>,
    vocabulary: BTreeSet<String>,
}

impl ClauseSet {
    pub fn new(clauses: Vec<Clause>) -> ClauseSet {
        let mut vocabulary = BTreeSet::new();
        for c in &clauses {
            c.body.collect_variables(&mut vocabulary);
        }
        ClauseSet {
            clauses,
            vocabulary,
        }
    }

    /// Extends the vocabulary with declared-but-unused names.
    pub fn with_extra_vocabulary<I, S>(mut self, names: I) -> ClauseSet
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.vocabulary.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }
}

/// Exact truth value of `phi` under `v`.
pub fn eval(v: &Valuation, phi: &Formula) -> Result<Rat, FormulaError> {
    match phi {
        Formula::Var(name) => v
            .get(name)
            .cloned()
            .ok_or_else(|| FormulaError::UnboundVariable(name.clone())),
        Formula::Const(k) => Ok(k.clone()),
        Formula::Not(logic, sub) => {
            let x = eval(v, sub)?;
            Ok(match logic {
                Logic::Lukasiewicz => Rat::one() - x,
                Logic::Product | Logic::Goedel => {
                    if x.is_zero() {
                        Rat::one()
                    } else {
                        Rat::zero()
                    }
                }
            })
        }
        Formula::And(logic, a, b) => {
            let x = eval(v, a)?;
            let y = eval(v, b)?;
            Ok(match logic {
                Logic::Lukasiewicz => {
                    let s = x + y - Rat::one();
                    if s.is_negative() {
                        Rat::zero()
                    } else {
                        s
                    }
                }
                Logic::Product => x * y,
                Logic::Goedel => x.min(y),
            })
        }
        Formula::Or(logic, a, b) => {
            let x = eval(v, a)?;
            let y = eval(v, b)?;
            Ok(match logic {
                Logic::Lukasiewicz => {
                    let s = x + y;
                    if s > Rat::one() {
                        Rat::one()
                    } else {
                        s
                    }
                }
                Logic::Product => &x + &y - x * y,
                Logic::Goedel => x.max(y),
            })
        }
        Formula::Implies(logic, a, b) => {
            let x = eval(v, a)?;
            let y = eval(v, b)?;
            if x <= y {
                return Ok(Rat::one());
            }
            Ok(match logic {
                Logic::Lukasiewicz => Rat::one() - x + y,
                // x > y >= 0 here, so the division is well defined.
                Logic::Product => y / x,
                Logic::Goedel => y,
            })
        }
    }
}

/// Floating-point evaluation used by the solver's residual checks.
pub fn eval_f64(values: &BTreeMap<String, f64>, phi: &Formula) -> Result<f64, FormulaError> {
    match phi {
        Formula::Var(name) => values
            .get(name)
            .copied()
            .ok_or_else(|| FormulaError::UnboundVariable(name.clone())),
        Formula::Const(k) => Ok(crate::rat::rat_to_f64(k)),
        Formula::Not(logic, sub) => {
            let x = eval_f64(values, sub)?;
            Ok(match logic {
                Logic::Lukasiewicz => 1.0 - x,
                Logic::Product | Logic::Goedel => {
                    if x == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
        }
        Formula::And(logic, a, b) => {
            let x = eval_f64(values, a)?;
            let y = eval_f64(values, b)?;
            Ok(match logic {
                Logic::Lukasiewicz => (x + y - 1.0).max(0.0),
                Logic::Product => x * y,
                Logic::Goedel => x.min(y),
            })
        }
        Formula::Or(logic, a, b) => {
            let x = eval_f64(values, a)?;
            let y = eval_f64(values, b)?;
            Ok(match logic {
                Logic::Lukasiewicz => (x + y).min(1.0),
                Logic::Product => x + y - x * y,
                Logic::Goedel => x.max(y),
            })
        }
        Formula::Implies(logic, a, b) => {
            let x = eval_f64(values, a)?;
            let y = eval_f64(values, b)?;
            if x <= y {
                return Ok(1.0);
            }
            Ok(match logic {
                Logic::Lukasiewicz => 1.0 - x + y,
                Logic::Product => y / x,
                Logic::Goedel => y,
            })
        }
    }
}

/// True iff `lower <= eval(v, body) <= upper`, compared exactly.
pub fn eval_clause(v: &Valuation, c: &Clause) -> Result<bool, FormulaError> {
    let value = eval(v, c.body())?;
    Ok(c.lower() <= &value && &value <= c.upper())
}

/// Wraps a formula as the single-clause set `{k <= phi <= 1}`, the clause
/// form of the k-SAT question (`k = 1` asks for 1-SAT).
pub fn sat_query(phi: Formula, k: Rat) -> Result<ClauseSet, FormulaError> {
    let clause = Clause::new(k, phi, Rat::one())?;
    Ok(ClauseSet::new(vec![clause]))
}

// Rendering. Precedence levels: implication 1 (right-assoc), or 2, and 3,
// unary 4, atoms 5. A child is parenthesised when its level is below what its
// position requires, so `parse(render(s)) == s` structurally.

fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Var(_) | Formula::Const(_) => 5,
        Formula::Not(..) => 4,
        Formula::And(..) => 3,
        Formula::Or(..) => 2,
        Formula::Implies(..) => 1,
    }
}

fn render_into(f: &Formula, min_prec: u8, out: &mut String) {
    let prec = precedence(f);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match f {
        Formula::Var(name) => out.push_str(name),
        Formula::Const(k) => out.push_str(&format_rat(k)),
        Formula::Not(logic, sub) => {
            out.push('!');
            out.push(logic.suffix());
            out.push(' ');
            render_into(sub, 4, out);
        }
        Formula::And(logic, a, b) => {
            render_into(a, 3, out);
            out.push_str(&format!(" &{} ", logic.suffix()));
            render_into(b, 4, out);
        }
        Formula::Or(logic, a, b) => {
            render_into(a, 2, out);
            out.push_str(&format!(" |{} ", logic.suffix()));
            render_into(b, 3, out);
        }
        Formula::Implies(logic, a, b) => {
            render_into(a, 2, out);
            out.push_str(&format!(" ->{} ", logic.suffix()));
            render_into(b, 1, out);
        }
    }
    if parens {
        out.push(')');
    }
}

/// Canonical concrete syntax for a formula.
pub fn render_formula(f: &Formula) -> String {
    let mut out = String::new();
    render_into(f, 1, &mut out);
    out
}

/// Canonical clause-file rendering; `parse(render(s)) == s`.
pub fn render(set: &ClauseSet) -> String {
    let mut out = String::new();
    for c in set.clauses() {
        out.push_str(&format_rat(c.lower()));
        out.push_str(" <= ");
        out.push_str(&render_formula(c.body()));
        out.push_str(" <= ");
        out.push_str(&format_rat(c.upper()));
        out.push('\n');
    }
    out
}
