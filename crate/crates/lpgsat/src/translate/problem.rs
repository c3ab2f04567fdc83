//! Mixed-integer bilinear problem representation.
//!
//! Constraints are kept as explicit term lists (linear + bilinear + relation
//! + right-hand constant) rather than a matrix: problems are sparse,
//! heterogeneous and consumed by a constraint-directed search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{One, Zero};
use thiserror::Error;

use crate::rat::{format_rat, Rat};

/// Index of a variable inside its owning [`Problem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Variable declaration: name, kind and exact bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDef {
    pub id: VarId,
    pub name: String,
    pub kind: VarKind,
    pub lb: Rat,
    pub ub: Rat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Le => write!(f, "le"),
            Relation::Ge => write!(f, "ge"),
            Relation::Eq => write!(f, "eq"),
        }
    }
}

/// Polynomial constraint of degree at most two:
/// `sum(linear) + sum(bilinear) REL constant`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub linear: Vec<(Rat, VarId)>,
    pub bilinear: Vec<(Rat, VarId, VarId)>,
    pub constant: Rat,
    pub relation: Relation,
}

impl Constraint {
    pub fn linear_terms(
        linear: Vec<(Rat, VarId)>,
        relation: Relation,
        constant: Rat,
    ) -> Constraint {
        Constraint {
            linear,
            bilinear: Vec::new(),
            constant,
            relation,
        }
    }

    pub fn with_bilinear(
        linear: Vec<(Rat, VarId)>,
        bilinear: Vec<(Rat, VarId, VarId)>,
        relation: Relation,
        constant: Rat,
    ) -> Constraint {
        // Canonical factor order keeps serialization deterministic.
        let bilinear = bilinear
            .into_iter()
            .map(|(c, a, b)| if a <= b { (c, a, b) } else { (c, b, a) })
            .collect();
        Constraint {
            linear,
            bilinear,
            constant,
            relation,
        }
    }

    /// Exact left-hand side value under a total assignment.
    pub fn lhs_exact(&self, value_of: &dyn Fn(VarId) -> Rat) -> Rat {
        let mut sum = Rat::zero();
        for (c, v) in &self.linear {
            sum += c * value_of(*v);
        }
        for (c, a, b) in &self.bilinear {
            sum += c * value_of(*a) * value_of(*b);
        }
        sum
    }

    /// Exact satisfaction check.
    pub fn holds_exact(&self, value_of: &dyn Fn(VarId) -> Rat) -> bool {
        let lhs = self.lhs_exact(value_of);
        match self.relation {
            Relation::Le => lhs <= self.constant,
            Relation::Ge => lhs >= self.constant,
            Relation::Eq => lhs == self.constant,
        }
    }

    /// Substitutes fixed 0/1 values for the given binaries, folding constant
    /// parts into the right-hand side and degrading bilinear terms that lose
    /// a factor into linear ones.
    pub fn substitute_binaries(&self, pattern: &BTreeMap<VarId, bool>) -> Constraint {
        let as_rat = |on: bool| if on { Rat::one() } else { Rat::zero() };
        let mut linear: Vec<(Rat, VarId)> = Vec::new();
        let mut bilinear = Vec::new();
        let mut constant = self.constant.clone();
        for (c, v) in &self.linear {
            match pattern.get(v) {
                Some(&on) => constant -= c * as_rat(on),
                None => linear.push((c.clone(), *v)),
            }
        }
        for (c, a, b) in &self.bilinear {
            match (pattern.get(a), pattern.get(b)) {
                (Some(&x), Some(&y)) => constant -= c * as_rat(x) * as_rat(y),
                (Some(&x), None) => {
                    let coef = c * as_rat(x);
                    if !coef.is_zero() {
                        linear.push((coef, *b));
                    }
                }
                (None, Some(&y)) => {
                    let coef = c * as_rat(y);
                    if !coef.is_zero() {
                        linear.push((coef, *a));
                    }
                }
                (None, None) => bilinear.push((c.clone(), *a, *b)),
            }
        }
        Constraint {
            linear,
            bilinear,
            constant,
            relation: self.relation,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProblemError {
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` is not part of the problem")]
    UnknownVariable(String),
    #[error("assignment is missing a value for `{0}`")]
    MissingValue(String),
}

/// MINLP instance: variable registry, constraint list, integer set `Z`,
/// minimized set `M` (objective `min Σ_{x∈M} x`) and the bookkeeping that
/// ties translated variables back to subformula positions.
///
/// Subformula positions are path strings: clause `i` roots at `c{i}` and
/// children append `.0` / `.1`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Problem {
    vars: Vec<VarDef>,
    by_name: BTreeMap<String, VarId>,
    pub constraints: Vec<Constraint>,
    pub integers: BTreeSet<VarId>,
    pub minimize: BTreeSet<VarId>,
    /// Subformula path -> the continuous variable carrying its truth value.
    pub origin: BTreeMap<String, VarId>,
    /// Subformula path -> indicator binary introduced for it, if any.
    pub indicators: BTreeMap<String, VarId>,
    /// Subformula path -> auxiliary continuous variable, if any.
    pub aux: BTreeMap<String, VarId>,
    /// Root variable of each clause, in clause order.
    pub clause_roots: Vec<VarId>,
}

impl Problem {
    pub fn new() -> Problem {
        Problem::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lb: Rat,
        ub: Rat,
    ) -> Result<VarId, ProblemError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(ProblemError::DuplicateVariable(name));
        }
        let id = VarId(self.vars.len());
        self.by_name.insert(name.clone(), id);
        self.vars.push(VarDef {
            id,
            name,
            kind,
            lb,
            ub,
        });
        Ok(id)
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &VarDef {
        &self.vars[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    /// Exact objective value `Σ_{x∈M} f(x)`.
    pub fn objective_exact(&self, f: &Assignment) -> Result<Rat, ProblemError> {
        let mut sum = Rat::zero();
        for id in &self.minimize {
            sum += f
                .get(*id)
                .ok_or_else(|| ProblemError::MissingValue(self.var(*id).name.clone()))?
                .clone();
        }
        Ok(sum)
    }

    /// Checks bounds, integrality and every constraint exactly.
    pub fn assignment_feasible_exact(&self, f: &Assignment) -> Result<bool, ProblemError> {
        for def in &self.vars {
            let value = f
                .get(def.id)
                .ok_or_else(|| ProblemError::MissingValue(def.name.clone()))?;
            if value < &def.lb || value > &def.ub {
                return Ok(false);
            }
            if self.integers.contains(&def.id) && !value.is_integer() {
                return Ok(false);
            }
        }
        let lookup = |id: VarId| f.get(id).cloned().expect("checked above");
        Ok(self.constraints.iter().all(|c| c.holds_exact(&lookup)))
    }

    /// Structural equality of the MINLP content (variables by name, bounds,
    /// kinds, constraints, integer and minimized sets), ignoring the
    /// subformula bookkeeping and tolerant of variable reordering.
    pub fn same_model(&self, other: &Problem) -> bool {
        if self.vars.len() != other.vars.len()
            || self.constraints.len() != other.constraints.len()
        {
            return false;
        }
        // Map other's ids into ours by name.
        let mut map = Vec::with_capacity(other.vars.len());
        for def in &other.vars {
            match self.var_by_name(&def.name) {
                Some(id) => {
                    let mine = self.var(id);
                    if mine.kind != def.kind || mine.lb != def.lb || mine.ub != def.ub {
                        return false;
                    }
                    map.push(id);
                }
                None => return false,
            }
        }
        let remap = |id: VarId| map[id.0];
        let theirs: Vec<Constraint> = other
            .constraints
            .iter()
            .map(|c| Constraint {
                linear: c.linear.iter().map(|(k, v)| (k.clone(), remap(*v))).collect(),
                bilinear: c
                    .bilinear
                    .iter()
                    .map(|(k, a, b)| {
                        let (a, b) = (remap(*a), remap(*b));
                        if a <= b {
                            (k.clone(), a, b)
                        } else {
                            (k.clone(), b, a)
                        }
                    })
                    .collect(),
                constant: c.constant.clone(),
                relation: c.relation,
            })
            .collect();
        if self.constraints != theirs {
            return false;
        }
        let remap_set = |s: &BTreeSet<VarId>| s.iter().map(|id| remap(*id)).collect::<BTreeSet<_>>();
        self.integers == remap_set(&other.integers) && self.minimize == remap_set(&other.minimize)
    }
}

/// Total map from problem variables to exact rational values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<VarId, Rat>);

impl Assignment {
    pub fn new() -> Assignment {
        Assignment(BTreeMap::new())
    }

    pub fn set(&mut self, id: VarId, value: Rat) {
        self.0.insert(id, value);
    }

    pub fn get(&self, id: VarId) -> Option<&Rat> {
        self.0.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &Rat)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (id, v) in &self.0 {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "#{} = {}", id.0, format_rat(v))?;
            first = false;
        }
        Ok(())
    }
}
