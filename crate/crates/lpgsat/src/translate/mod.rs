//! Translation of clause sets into mixed-integer bilinear feasibility
//! problems.
//!
//! Every subformula `phi` gets a fresh continuous variable `x_phi` in
//! `[0, 1]`; each piecewise operator introduces one indicator binary that is
//! pushed towards zero by the objective, so that at optimal assignments the
//! active case of every operator matches the exact semantics. All emitted
//! constraints have polynomial degree at most two.
//!
//! Per-connective constraint sets (`a`, `b` are the operand value variables,
//! `x` the node value, `z` the indicator, `w` the product auxiliary):
//!
//! | node   | constraints                                              | minimized |
//! |--------|----------------------------------------------------------|-----------|
//! | `->l`  | `z >= a-b`, `x = (1-z) + z(1-a+b)`                       | `z`       |
//! | `&p`   | `x = a*b`                                                | –         |
//! | `\|p`  | `x = a + b - a*b`                                        | –         |
//! | `->p`  | `z >= a-b`, `w <= z`, `w*a = z*b`, `x = w*z + (1-z)`     | `z`       |
//! | `!p !g`| `z >= a`, `x = 1 - z`                                    | `z`       |
//! | `!l`   | `x = 1 - a`                                              | –         |
//! | `&l`   | `z >= a+b-1`, `x = z(a+b-1)`                             | `z`       |
//! | `\|l`  | `z >= a+b-1`, `x = a+b - z(a+b-1)`                       | `z`       |
//! | `&g`   | `z >= a-b`, `x = (1-z)a + zb`                            | `z`       |
//! | `\|g`  | `z >= a-b`, `x = za + (1-z)b`                            | `z`       |
//! | `->g`  | `z >= a-b`, `x = (1-z) + zb`                             | `z`       |

mod problem;

pub use problem::{
    Assignment, Constraint, Problem, ProblemError, Relation, VarDef, VarId, VarKind,
};

use std::collections::BTreeSet;

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::formula::{eval, ClauseSet, Formula, FormulaError, Logic, Valuation};
use crate::rat::Rat;

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("no translated variable at path `{0}`")]
    MissingPath(String),
}

/// How compound connectives outside the core dispatch are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RewriteMode {
    /// Dedicated indicator encoding per connective (the table above).
    #[default]
    Native,
    /// Rewrite `!l`, `&l`, `|l`, `&g`, `|g` and `|p` into `->l`, `&p` and the
    /// constant 0 before translating. `->p`, `!p`, `->g` and `!g` stay native
    /// (their case split is discontinuous and has no continuous Łukasiewicz
    /// definition). Useful for differential testing of the encodings.
    LukBase,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TranslateOptions {
    pub rewrite: RewriteMode,
}

/// Rewrites derivable connectives into `->l`, `&p` and the constant 0.
pub fn rewrite_luk_base(f: &Formula) -> Formula {
    let zero = || Formula::Const(Rat::zero());
    let l = Logic::Lukasiewicz;
    match f {
        Formula::Var(_) | Formula::Const(_) => f.clone(),
        Formula::Not(logic, sub) => {
            let s = rewrite_luk_base(sub);
            match logic {
                // ¬x = x -> 0
                Logic::Lukasiewicz => Formula::implies(l, s, zero()),
                Logic::Product | Logic::Goedel => Formula::not(*logic, s),
            }
        }
        Formula::And(logic, a, b) => {
            let a = rewrite_luk_base(a);
            let b = rewrite_luk_base(b);
            match logic {
                // x ∧ y = ¬(x -> ¬y) = (x -> (y -> 0)) -> 0
                Logic::Lukasiewicz => Formula::implies(
                    l,
                    Formula::implies(l, a, Formula::implies(l, b, zero())),
                    zero(),
                ),
                Logic::Product => Formula::and(Logic::Product, a, b),
                // min(x, y) = x ∧Ł (x ->Ł y), then expand ∧Ł
                Logic::Goedel => {
                    let imp = Formula::implies(l, a.clone(), b);
                    Formula::implies(
                        l,
                        Formula::implies(l, a, Formula::implies(l, imp, zero())),
                        zero(),
                    )
                }
            }
        }
        Formula::Or(logic, a, b) => {
            let a = rewrite_luk_base(a);
            let b = rewrite_luk_base(b);
            match logic {
                // min(1, x+y) = ¬x -> y
                Logic::Lukasiewicz => {
                    Formula::implies(l, Formula::implies(l, a, zero()), b)
                }
                // x + y - xy = ¬(¬x ∧p ¬y)
                Logic::Product => Formula::implies(
                    l,
                    Formula::and(
                        Logic::Product,
                        Formula::implies(l, a, zero()),
                        Formula::implies(l, b, zero()),
                    ),
                    zero(),
                ),
                // max(x, y) = (x -> y) -> y
                Logic::Goedel => {
                    let imp = Formula::implies(l, a, b.clone());
                    Formula::implies(l, imp, b)
                }
            }
        }
        Formula::Implies(logic, a, b) => Formula::implies(
            *logic,
            rewrite_luk_base(a),
            rewrite_luk_base(b),
        ),
    }
}

fn unit() -> (Rat, Rat) {
    (Rat::zero(), Rat::one())
}

fn fresh_value_var(p: &mut Problem, path: &str) -> VarId {
    let (lb, ub) = unit();
    let id = p
        .add_var(format!("x@{path}"), VarKind::Continuous, lb, ub)
        .expect("fresh value variable name collides");
    p.origin.insert(path.to_string(), id);
    id
}

fn fresh_indicator(p: &mut Problem, path: &str) -> VarId {
    let (lb, ub) = unit();
    let id = p
        .add_var(format!("b@{path}"), VarKind::Binary, lb, ub)
        .expect("fresh indicator name collides");
    p.integers.insert(id);
    p.minimize.insert(id);
    p.indicators.insert(path.to_string(), id);
    id
}

fn fresh_aux(p: &mut Problem, path: &str) -> VarId {
    let (lb, ub) = unit();
    let id = p
        .add_var(format!("aux@{path}"), VarKind::Continuous, lb, ub)
        .expect("fresh auxiliary name collides");
    p.aux.insert(path.to_string(), id);
    id
}

/// Translates one formula into constraints on `problem`, returning the
/// variable that carries the formula's truth value. `path` names the
/// formula's position (`c0`, `c0.1`, ...); recursive calls extend it.
pub fn to_minlp(problem: &mut Problem, phi: &Formula, path: &str) -> VarId {
    let one = Rat::one;
    let neg = || -Rat::one();
    match phi {
        Formula::Var(name) => {
            let id = match problem.var_by_name(name) {
                Some(id) => id,
                None => {
                    let (lb, ub) = unit();
                    problem
                        .add_var(name.clone(), VarKind::Continuous, lb, ub)
                        .expect("source variable registered twice")
                }
            };
            problem.origin.insert(path.to_string(), id);
            id
        }
        Formula::Const(k) => {
            let x = fresh_value_var(problem, path);
            problem.constraints.push(Constraint::linear_terms(
                vec![(one(), x)],
                Relation::Eq,
                k.clone(),
            ));
            x
        }
        Formula::Not(logic, sub) => {
            let a = to_minlp(problem, sub, &format!("{path}.0"));
            let x = fresh_value_var(problem, path);
            match logic {
                Logic::Lukasiewicz => {
                    // x = 1 - a
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), x), (one(), a)],
                        Relation::Eq,
                        one(),
                    ));
                }
                Logic::Product | Logic::Goedel => {
                    let z = fresh_indicator(problem, path);
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), z), (neg(), a)],
                        Relation::Ge,
                        Rat::zero(),
                    ));
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), x), (one(), z)],
                        Relation::Eq,
                        one(),
                    ));
                }
            }
            x
        }
        Formula::And(logic, lhs, rhs) => {
            let a = to_minlp(problem, lhs, &format!("{path}.0"));
            let b = to_minlp(problem, rhs, &format!("{path}.1"));
            let x = fresh_value_var(problem, path);
            match logic {
                Logic::Product => {
                    // x = a*b
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x)],
                        vec![(neg(), a, b)],
                        Relation::Eq,
                        Rat::zero(),
                    ));
                }
                Logic::Lukasiewicz => {
                    let z = fresh_indicator(problem, path);
                    // z >= a + b - 1
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), z), (neg(), a), (neg(), b)],
                        Relation::Ge,
                        -one(),
                    ));
                    // x = z*(a + b - 1)
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x), (one(), z)],
                        vec![(neg(), z, a), (neg(), z, b)],
                        Relation::Eq,
                        Rat::zero(),
                    ));
                }
                Logic::Goedel => {
                    let z = fresh_indicator(problem, path);
                    // z >= a - b
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), z), (neg(), a), (one(), b)],
                        Relation::Ge,
                        Rat::zero(),
                    ));
                    // x = (1-z)*a + z*b
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x), (neg(), a)],
                        vec![(one(), z, a), (neg(), z, b)],
                        Relation::Eq,
                        Rat::zero(),
                    ));
                }
            }
            x
        }
        Formula::Or(logic, lhs, rhs) => {
            let a = to_minlp(problem, lhs, &format!("{path}.0"));
            let b = to_minlp(problem, rhs, &format!("{path}.1"));
            let x = fresh_value_var(problem, path);
            match logic {
                Logic::Product => {
                    // x = a + b - a*b
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x), (neg(), a), (neg(), b)],
                        vec![(one(), a, b)],
                        Relation::Eq,
                        Rat::zero(),
                    ));
                }
                Logic::Lukasiewicz => {
                    let z = fresh_indicator(problem, path);
                    // z >= a + b - 1
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), z), (neg(), a), (neg(), b)],
                        Relation::Ge,
                        -one(),
                    ));
                    // x = a + b - z*(a + b - 1)
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x), (neg(), a), (neg(), b), (neg(), z)],
                        vec![(one(), z, a), (one(), z, b)],
                        Relation::Eq,
                        Rat::zero(),
                    ));
                }
                Logic::Goedel => {
                    let z = fresh_indicator(problem, path);
                    // z >= a - b
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), z), (neg(), a), (one(), b)],
                        Relation::Ge,
                        Rat::zero(),
                    ));
                    // x = z*a + (1-z)*b
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x), (neg(), b)],
                        vec![(neg(), z, a), (one(), z, b)],
                        Relation::Eq,
                        Rat::zero(),
                    ));
                }
            }
            x
        }
        Formula::Implies(logic, lhs, rhs) => {
            let a = to_minlp(problem, lhs, &format!("{path}.0"));
            let b = to_minlp(problem, rhs, &format!("{path}.1"));
            let x = fresh_value_var(problem, path);
            let z = fresh_indicator(problem, path);
            // Shared guard: z >= a - b
            problem.constraints.push(Constraint::linear_terms(
                vec![(one(), z), (neg(), a), (one(), b)],
                Relation::Ge,
                Rat::zero(),
            ));
            match logic {
                Logic::Lukasiewicz => {
                    // x = (1-z) + z*(1 - a + b), expanded: x + z*a - z*b = 1
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x)],
                        vec![(one(), z, a), (neg(), z, b)],
                        Relation::Eq,
                        one(),
                    ));
                }
                Logic::Product => {
                    let w = fresh_aux(problem, path);
                    // w <= z
                    problem.constraints.push(Constraint::linear_terms(
                        vec![(one(), w), (neg(), z)],
                        Relation::Le,
                        Rat::zero(),
                    ));
                    // w*a = z*b
                    problem.constraints.push(Constraint::with_bilinear(
                        Vec::new(),
                        vec![(one(), w, a), (neg(), z, b)],
                        Relation::Eq,
                        Rat::zero(),
                    ));
                    // x = w*z + (1-z), expanded: x - w*z + z = 1
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x), (one(), z)],
                        vec![(neg(), w, z)],
                        Relation::Eq,
                        one(),
                    ));
                }
                Logic::Goedel => {
                    // x = (1-z) + z*b, expanded: x + z - z*b = 1
                    problem.constraints.push(Constraint::with_bilinear(
                        vec![(one(), x), (one(), z)],
                        vec![(neg(), z, b)],
                        Relation::Eq,
                        one(),
                    ));
                }
            }
            x
        }
    }
}

/// Builds the MINLP problem for a clause set: per-clause translations over a
/// shared registry plus the bound rows `x_phi >= l` and `x_phi <= u`.
pub fn build_problem(set: &ClauseSet) -> Problem {
    build_problem_with(set, &TranslateOptions::default())
}

pub fn build_problem_with(set: &ClauseSet, opts: &TranslateOptions) -> Problem {
    let mut problem = Problem::new();
    for (i, clause) in set.clauses().iter().enumerate() {
        let path = format!("c{i}");
        let body;
        let body_ref = match opts.rewrite {
            RewriteMode::Native => clause.body(),
            RewriteMode::LukBase => {
                body = rewrite_luk_base(clause.body());
                &body
            }
        };
        let root = to_minlp(&mut problem, body_ref, &path);
        problem.constraints.push(Constraint::linear_terms(
            vec![(Rat::one(), root)],
            Relation::Ge,
            clause.lower().clone(),
        ));
        problem.constraints.push(Constraint::linear_terms(
            vec![(Rat::one(), root)],
            Relation::Le,
            clause.upper().clone(),
        ));
        problem.clause_roots.push(root);
    }
    // Declared-but-unused vocabulary still becomes a problem variable so
    // restrictions to the vocabulary stay total.
    for name in set.vocabulary() {
        if problem.var_by_name(name).is_none() {
            let (lb, ub) = unit();
            problem
                .add_var(name.clone(), VarKind::Continuous, lb, ub)
                .expect("vocabulary variable registered twice");
        }
    }
    problem
}

fn extend_node(
    problem: &Problem,
    phi: &Formula,
    path: &str,
    v: &Valuation,
    out: &mut Assignment,
) -> Result<Rat, TranslateError> {
    let origin = *problem
        .origin
        .get(path)
        .ok_or_else(|| TranslateError::MissingPath(path.to_string()))?;
    let value = match phi {
        Formula::Var(name) => v
            .get(name)
            .cloned()
            .ok_or_else(|| FormulaError::UnboundVariable(name.clone()))?,
        Formula::Const(k) => k.clone(),
        Formula::Not(logic, sub) => {
            let a = extend_node(problem, sub, &format!("{path}.0"), v, out)?;
            match logic {
                Logic::Lukasiewicz => Rat::one() - a,
                Logic::Product | Logic::Goedel => {
                    let z = *problem
                        .indicators
                        .get(path)
                        .ok_or_else(|| TranslateError::MissingPath(path.to_string()))?;
                    if a.is_zero() {
                        out.set(z, Rat::zero());
                        Rat::one()
                    } else {
                        out.set(z, Rat::one());
                        Rat::zero()
                    }
                }
            }
        }
        Formula::And(logic, lhs, rhs) | Formula::Or(logic, lhs, rhs) => {
            let a = extend_node(problem, lhs, &format!("{path}.0"), v, out)?;
            let b = extend_node(problem, rhs, &format!("{path}.1"), v, out)?;
            let is_and = matches!(phi, Formula::And(..));
            match logic {
                Logic::Product => {
                    if is_and {
                        &a * &b
                    } else {
                        &a + &b - a * b
                    }
                }
                Logic::Lukasiewicz => {
                    let z = *problem
                        .indicators
                        .get(path)
                        .ok_or_else(|| TranslateError::MissingPath(path.to_string()))?;
                    let excess = &a + &b - Rat::one();
                    // Indicator minimized: 0 whenever the guard z >= a+b-1 allows.
                    let zv = if excess.is_negative() || excess.is_zero() {
                        Rat::zero()
                    } else {
                        Rat::one()
                    };
                    out.set(z, zv.clone());
                    if is_and {
                        &zv * &excess
                    } else {
                        &a + &b - zv * excess
                    }
                }
                Logic::Goedel => {
                    let z = *problem
                        .indicators
                        .get(path)
                        .ok_or_else(|| TranslateError::MissingPath(path.to_string()))?;
                    let zv = if a <= b { Rat::zero() } else { Rat::one() };
                    out.set(z, zv);
                    if is_and {
                        a.min(b)
                    } else {
                        a.max(b)
                    }
                }
            }
        }
        Formula::Implies(logic, lhs, rhs) => {
            let a = extend_node(problem, lhs, &format!("{path}.0"), v, out)?;
            let b = extend_node(problem, rhs, &format!("{path}.1"), v, out)?;
            let z = *problem
                .indicators
                .get(path)
                .ok_or_else(|| TranslateError::MissingPath(path.to_string()))?;
            let guard_allows_zero = a <= b;
            out.set(
                z,
                if guard_allows_zero {
                    Rat::zero()
                } else {
                    Rat::one()
                },
            );
            match logic {
                Logic::Lukasiewicz => {
                    if guard_allows_zero {
                        Rat::one()
                    } else {
                        Rat::one() - a + b
                    }
                }
                Logic::Product => {
                    let w = *problem
                        .aux
                        .get(path)
                        .ok_or_else(|| TranslateError::MissingPath(path.to_string()))?;
                    if guard_allows_zero {
                        out.set(w, Rat::zero());
                        Rat::one()
                    } else {
                        // a > b >= 0 here, so a > 0.
                        let q = &b / &a;
                        out.set(w, q.clone());
                        q
                    }
                }
                Logic::Goedel => {
                    if guard_allows_zero {
                        Rat::one()
                    } else {
                        b
                    }
                }
            }
        }
    };
    out.set(origin, value.clone());
    Ok(value)
}

/// Extends a valuation of the source variables to a full assignment of the
/// translated problem, following the constructive bottom-up case analysis:
/// every `x_phi` is set to `eval(v, phi)`, every indicator to its minimizing
/// value (0 whenever the guard allows) and every product auxiliary to `b/a`
/// in the `a > b` case and 0 otherwise. The result is feasible and
/// binary-minimal.
pub fn extend_valuation(
    problem: &Problem,
    set: &ClauseSet,
    v: &Valuation,
) -> Result<Assignment, TranslateError> {
    let mut out = Assignment::new();
    for name in set.vocabulary() {
        let value = v
            .get(name)
            .cloned()
            .ok_or_else(|| FormulaError::UnboundVariable(name.clone()))?;
        if let Some(id) = problem.var_by_name(name) {
            out.set(id, value);
        }
    }
    for (i, clause) in set.clauses().iter().enumerate() {
        extend_node(problem, clause.body(), &format!("c{i}"), v, &mut out)?;
    }
    Ok(out)
}

/// Restriction `f|X`: the valuation agreeing with `f` on the named source
/// variables.
pub fn restrict(
    f: &Assignment,
    names: &BTreeSet<String>,
    problem: &Problem,
) -> Result<Valuation, TranslateError> {
    let mut v = Valuation::new();
    for name in names {
        let id = problem
            .var_by_name(name)
            .ok_or_else(|| ProblemError::UnknownVariable(name.clone()))?;
        let value = f
            .get(id)
            .ok_or_else(|| ProblemError::MissingValue(name.clone()))?;
        v.insert(name.clone(), value.clone())?;
    }
    Ok(v)
}

/// Checks the stronger half of the value-preservation property directly:
/// every subformula's origin variable must carry exactly `eval(v, phi)`.
pub fn assignment_matches_semantics(
    problem: &Problem,
    set: &ClauseSet,
    f: &Assignment,
) -> Result<bool, TranslateError> {
    let v = restrict(f, set.vocabulary(), problem)?;
    fn walk(
        problem: &Problem,
        phi: &Formula,
        path: &str,
        v: &Valuation,
        f: &Assignment,
    ) -> Result<bool, TranslateError> {
        let origin = *problem
            .origin
            .get(path)
            .ok_or_else(|| TranslateError::MissingPath(path.to_string()))?;
        let expect = eval(v, phi)?;
        let got = f
            .get(origin)
            .ok_or_else(|| ProblemError::MissingValue(path.to_string()))?;
        if *got != expect {
            return Ok(false);
        }
        match phi {
            Formula::Var(_) | Formula::Const(_) => Ok(true),
            Formula::Not(_, sub) => walk(problem, sub, &format!("{path}.0"), v, f),
            Formula::And(_, a, b) | Formula::Or(_, a, b) | Formula::Implies(_, a, b) => {
                Ok(walk(problem, a, &format!("{path}.0"), v, f)?
                    && walk(problem, b, &format!("{path}.1"), v, f)?)
            }
        }
    }
    for (i, clause) in set.clauses().iter().enumerate() {
        if !walk(problem, clause.body(), &format!("c{i}"), &v, f)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, sat_query};
    use crate::rat::rat;

    fn translate_formula(phi: &Formula) -> (Problem, VarId) {
        let mut p = Problem::new();
        let root = to_minlp(&mut p, phi, "c0");
        (p, root)
    }

    #[test]
    fn lukasiewicz_implication_emits_guard_and_value_rows() {
        let phi = Formula::implies(Logic::Lukasiewicz, Formula::var("a"), Formula::var("b"));
        let (p, root) = translate_formula(&phi);
        assert_eq!(p.constraints.len(), 2);
        assert_eq!(p.integers.len(), 1);
        assert_eq!(p.minimize.len(), 1);
        let a = p.var_by_name("a").unwrap();
        let b = p.var_by_name("b").unwrap();
        let z = *p.integers.iter().next().unwrap();
        // guard z - a + b >= 0, i.e. z >= a - b
        let guard = &p.constraints[0];
        assert_eq!(guard.relation, Relation::Ge);
        assert_eq!(guard.constant, rat(0, 1));
        assert_eq!(
            guard.linear,
            vec![(rat(1, 1), z), (rat(-1, 1), a), (rat(1, 1), b)]
        );
        assert!(guard.bilinear.is_empty());
        // value row references the root.
        assert!(p.constraints[1].linear.iter().any(|(_, v)| *v == root));
    }

    #[test]
    fn product_conjunction_is_one_bilinear_row_without_binaries() {
        let phi = Formula::and(Logic::Product, Formula::var("a"), Formula::var("b"));
        let (p, root) = translate_formula(&phi);
        assert_eq!(p.constraints.len(), 1);
        assert!(p.integers.is_empty());
        let row = &p.constraints[0];
        assert_eq!(row.relation, Relation::Eq);
        assert_eq!(row.linear, vec![(rat(1, 1), root)]);
        assert_eq!(row.bilinear.len(), 1);
    }

    #[test]
    fn constant_pins_its_value_variable() {
        let phi = Formula::constant(rat(1, 2)).unwrap();
        let (p, root) = translate_formula(&phi);
        assert_eq!(p.constraints.len(), 1);
        let row = &p.constraints[0];
        assert_eq!(row.relation, Relation::Eq);
        assert_eq!(row.constant, rat(1, 2));
        assert_eq!(row.linear, vec![(rat(1, 1), root)]);
    }

    #[test]
    fn product_implication_emits_four_rows_and_one_minimized_binary() {
        let phi = Formula::implies(Logic::Product, Formula::var("a"), Formula::var("b"));
        let (p, _) = translate_formula(&phi);
        assert_eq!(p.constraints.len(), 4);
        assert_eq!(p.integers.len(), 1, "only the indicator is integer");
        assert_eq!(p.minimize.len(), 1);
        assert_eq!(p.aux.len(), 1);
        // The coupling row w*a = z*b is purely bilinear.
        let coupling = p
            .constraints
            .iter()
            .find(|c| c.linear.is_empty() && c.bilinear.len() == 2)
            .expect("coupling row present");
        assert_eq!(coupling.relation, Relation::Eq);
        assert_eq!(coupling.constant, rat(0, 1));
    }

    #[test]
    fn build_problem_of_single_variable_clause_has_only_bound_rows() {
        let set = parse("0 <= x <= 1").unwrap();
        let p = build_problem(&set);
        assert_eq!(p.n_vars(), 1);
        assert_eq!(p.constraints.len(), 2);
        assert!(p.minimize.is_empty());
        assert_eq!(p.clause_roots.len(), 1);
    }

    #[test]
    fn build_problem_shares_source_variables_across_clauses() {
        let set = parse("1 <= a ->l b <= 1\n1 <= a <= 1").unwrap();
        let p = build_problem(&set);
        assert_eq!(p.var_by_name("a").into_iter().count(), 1);
        // 2 translation rows + 2 bound rows for clause 0 + 2 bound rows for clause 1
        assert_eq!(p.constraints.len(), 6);
        assert_eq!(p.integers.len(), 1);
    }

    #[test]
    fn footnote_instance_builds_per_algorithm_case_counts() {
        // ¬p(x1 ->p x2) ->p x3 contains two ->p nodes (indicator + auxiliary
        // each) and one ¬p node (indicator), so 3 binaries and 2 auxiliaries.
        let set = parse("0.75 <= !p (x1 ->p x2) ->p x3 <= 0.75\n0 <= x3 <= 0.5").unwrap();
        let p = build_problem(&set);
        assert_eq!(p.var_by_name("x1").into_iter().count(), 1);
        assert_eq!(p.var_by_name("x2").into_iter().count(), 1);
        assert_eq!(p.var_by_name("x3").into_iter().count(), 1);
        assert_eq!(p.integers.len(), 3);
        assert_eq!(p.aux.len(), 2);
        assert_eq!(p.minimize.len(), 3);
        // Clause bounds appear as explicit rows: 0.75-pinned root and x3 <= 1/2.
        let root = p.clause_roots[0];
        assert!(p.constraints.iter().any(|c| c.relation == Relation::Ge
            && c.constant == rat(3, 4)
            && c.linear == vec![(rat(1, 1), root)]));
        let x3 = p.var_by_name("x3").unwrap();
        assert!(p.constraints.iter().any(|c| c.relation == Relation::Le
            && c.constant == rat(1, 2)
            && c.linear == vec![(rat(1, 1), x3)]));
    }

    #[test]
    fn extension_is_exactly_feasible_and_matches_semantics() {
        let cases = [
            "0 <= a ->l b <= 1",
            "0 <= a ->p b <= 1",
            "0 <= !p a <= 1",
            "0 <= a &l b <= 1",
            "0 <= a |l b <= 1",
            "0 <= a &g b <= 1",
            "0 <= a |g b <= 1",
            "0 <= a ->g b <= 1",
            "0 <= !g a <= 1",
            "0 <= !l a <= 1",
            "0 <= a |p b <= 1",
            "0 <= a &p b <= 1",
            "0 <= (a ->p b) &l !g (a |p b) <= 1",
        ];
        let grid: Vec<Rat> = (0..=4).map(|i| rat(i, 4)).collect();
        for text in cases {
            let set = parse(text).unwrap();
            let p = build_problem(&set);
            for a in &grid {
                for b in &grid {
                    let mut v = Valuation::new();
                    for (name, value) in [("a", a), ("b", b)] {
                        if set.vocabulary().contains(name) {
                            v.insert(name.to_string(), value.clone()).unwrap();
                        }
                    }
                    let f = extend_valuation(&p, &set, &v).unwrap();
                    assert!(
                        p.assignment_feasible_exact(&f).unwrap(),
                        "extension infeasible for {text} at a={a}, b={b}"
                    );
                    assert!(assignment_matches_semantics(&p, &set, &f).unwrap());
                    let back = restrict(&f, set.vocabulary(), &p).unwrap();
                    assert_eq!(back, v);
                }
            }
        }
    }

    #[test]
    fn extension_examples_from_the_constructive_cases() {
        // a ->l b at a=0.7, b=0.2: indicator 1, value 0.5
        let set = parse("0 <= a ->l b <= 1").unwrap();
        let p = build_problem(&set);
        let v = Valuation::from_pairs([("a", rat(7, 10)), ("b", rat(1, 5))]).unwrap();
        let f = extend_valuation(&p, &set, &v).unwrap();
        let z = *p.indicators.get("c0").unwrap();
        let x = *p.origin.get("c0").unwrap();
        assert_eq!(f.get(z), Some(&rat(1, 1)));
        assert_eq!(f.get(x), Some(&rat(1, 2)));

        // !p a at a=0: indicator 0, value 1
        let set = parse("0 <= !p a <= 1").unwrap();
        let p = build_problem(&set);
        let v = Valuation::from_pairs([("a", rat(0, 1))]).unwrap();
        let f = extend_valuation(&p, &set, &v).unwrap();
        let z = *p.indicators.get("c0").unwrap();
        let x = *p.origin.get("c0").unwrap();
        assert_eq!(f.get(z), Some(&rat(0, 1)));
        assert_eq!(f.get(x), Some(&rat(1, 1)));

        // a &p b at 1/2, 1/3: value 1/6
        let set = parse("0 <= a &p b <= 1").unwrap();
        let p = build_problem(&set);
        let v = Valuation::from_pairs([("a", rat(1, 2)), ("b", rat(1, 3))]).unwrap();
        let f = extend_valuation(&p, &set, &v).unwrap();
        let x = *p.origin.get("c0").unwrap();
        assert_eq!(f.get(x), Some(&rat(1, 6)));
        assert!(p.assignment_feasible_exact(&f).unwrap());

        // ->p auxiliary: b/a when a > b, 0 otherwise
        let set = parse("0 <= a ->p b <= 1").unwrap();
        let p = build_problem(&set);
        let w = *p.aux.get("c0").unwrap();
        let v = Valuation::from_pairs([("a", rat(1, 2)), ("b", rat(1, 4))]).unwrap();
        let f = extend_valuation(&p, &set, &v).unwrap();
        assert_eq!(f.get(w), Some(&rat(1, 2)));
        let v = Valuation::from_pairs([("a", rat(1, 4)), ("b", rat(1, 2))]).unwrap();
        let f = extend_valuation(&p, &set, &v).unwrap();
        assert_eq!(f.get(w), Some(&rat(0, 1)));
    }

    #[test]
    fn restriction_projects_source_variables() {
        let set = parse("0 <= x &p x <= 1").unwrap();
        let p = build_problem(&set);
        let v = Valuation::from_pairs([("x", rat(2, 5))]).unwrap();
        let f = extend_valuation(&p, &set, &v).unwrap();
        let back = restrict(&f, set.vocabulary(), &p).unwrap();
        assert_eq!(back, v);
        // Empty restriction is the empty valuation.
        let empty = restrict(&f, &BTreeSet::new(), &p).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn pure_lukasiewicz_problems_are_linear_after_binary_substitution() {
        let set = parse(
            "0 <= (a ->l b) &l (b |l c) <= 1\n1/2 <= !l a |l (c ->l a) <= 1",
        )
        .unwrap();
        let p = build_problem(&set);
        let binaries: Vec<VarId> = p.integers.iter().copied().collect();
        assert!(!binaries.is_empty());
        for mask in 0..(1u32 << binaries.len()) {
            let pattern: std::collections::BTreeMap<VarId, bool> = binaries
                .iter()
                .enumerate()
                .map(|(i, id)| (*id, mask & (1 << i) != 0))
                .collect();
            for c in &p.constraints {
                let sub = c.substitute_binaries(&pattern);
                assert!(
                    sub.bilinear.is_empty(),
                    "bilinear residue after substitution: {sub:?}"
                );
            }
        }
    }

    #[test]
    fn origin_covers_every_subformula_and_every_var_is_referenced() {
        let set = parse("1/4 <= (a ->p b) |g !l (c &l 0.5) <= 3/4").unwrap();
        let p = build_problem(&set);
        fn count_nodes(f: &Formula) -> usize {
            match f {
                Formula::Var(_) | Formula::Const(_) => 1,
                Formula::Not(_, s) => 1 + count_nodes(s),
                Formula::And(_, a, b)
                | Formula::Or(_, a, b)
                | Formula::Implies(_, a, b) => 1 + count_nodes(a) + count_nodes(b),
            }
        }
        let nodes: usize = set.clauses().iter().map(|c| count_nodes(c.body())).sum();
        assert_eq!(p.origin.len(), nodes);
        let mut referenced = BTreeSet::new();
        for c in &p.constraints {
            for (_, v) in &c.linear {
                referenced.insert(*v);
            }
            for (_, a, b) in &c.bilinear {
                referenced.insert(*a);
                referenced.insert(*b);
            }
        }
        for def in p.vars() {
            assert!(
                referenced.contains(&def.id),
                "unreferenced variable {}",
                def.name
            );
        }
    }

    #[test]
    fn luk_base_rewriting_preserves_semantics_on_grid() {
        let texts = [
            "0 <= !l a <= 1",
            "0 <= a &l b <= 1",
            "0 <= a |l b <= 1",
            "0 <= a &g b <= 1",
            "0 <= a |g b <= 1",
            "0 <= a |p b <= 1",
            "0 <= !g (a |l b) ->p (a &g b) <= 1",
        ];
        let grid: Vec<Rat> = (0..=4).map(|i| rat(i, 4)).collect();
        for text in texts {
            let set = parse(text).unwrap();
            let body = set.clauses()[0].body();
            let rewritten = rewrite_luk_base(body);
            for a in &grid {
                for b in &grid {
                    let v = Valuation::from_pairs([("a", a.clone()), ("b", b.clone())])
                        .unwrap();
                    assert_eq!(
                        eval(&v, body).unwrap(),
                        eval(&v, &rewritten).unwrap(),
                        "rewrite changed semantics of {text}"
                    );
                }
            }
        }
    }

    #[test]
    fn sat_query_problem_extension_round_trip() {
        // restrict(extend(v)) == v for the k-SAT wrapper of a mixed formula.
        let phi = parse("0 <= (x ->g y) &p !l x <= 1")
            .unwrap()
            .clauses()[0]
            .body()
            .clone();
        let set = sat_query(phi, rat(0, 1)).unwrap();
        let p = build_problem(&set);
        let v = Valuation::from_pairs([("x", rat(3, 7)), ("y", rat(1, 9))]).unwrap();
        let f = extend_valuation(&p, &set, &v).unwrap();
        assert_eq!(restrict(&f, set.vocabulary(), &p).unwrap(), v);
    }
}
