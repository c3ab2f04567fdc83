//! Forward-backward interval propagation (hull consistency) over the
//! compiled constraint list.
//!
//! The contractor never discards a feasible point: all arithmetic is
//! outward-rounded and binary domains are only snapped to the integer values
//! they still contain.

use crate::translate::{Problem, Relation, VarKind};

use super::interval::{Interval, IntervalBox};

/// f64 view of one constraint: coefficient enclosures for rigorous work and
/// nearest-double midpoints for residual checks.
#[derive(Clone, Debug)]
pub struct CompiledConstraint {
    pub linear: Vec<(Interval, usize)>,
    pub bilinear: Vec<(Interval, usize, usize)>,
    pub relation: Relation,
    pub rhs: Interval,
    pub linear_mid: Vec<(f64, usize)>,
    pub bilinear_mid: Vec<(f64, usize, usize)>,
    pub rhs_mid: f64,
}

/// f64 view of a whole problem.
#[derive(Clone, Debug)]
pub struct CompiledProblem {
    pub constraints: Vec<CompiledConstraint>,
    pub bounds: Vec<Interval>,
    pub is_binary: Vec<bool>,
    pub binaries: Vec<usize>,
    /// Number of constraints mentioning each variable.
    pub occurrence: Vec<usize>,
}

pub fn compile(problem: &Problem) -> CompiledProblem {
    let n = problem.n_vars();
    let mut occurrence = vec![0usize; n];
    let mut constraints = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        let linear: Vec<(Interval, usize)> = c
            .linear
            .iter()
            .map(|(k, v)| (Interval::from_rat(k), v.0))
            .collect();
        let bilinear: Vec<(Interval, usize, usize)> = c
            .bilinear
            .iter()
            .map(|(k, a, b)| (Interval::from_rat(k), a.0, b.0))
            .collect();
        let mut seen = Vec::new();
        for (_, v) in &linear {
            seen.push(*v);
        }
        for (_, a, b) in &bilinear {
            seen.push(*a);
            seen.push(*b);
        }
        seen.sort_unstable();
        seen.dedup();
        for v in seen {
            occurrence[v] += 1;
        }
        constraints.push(CompiledConstraint {
            linear_mid: linear.iter().map(|(k, v)| (k.midpoint(), *v)).collect(),
            bilinear_mid: bilinear
                .iter()
                .map(|(k, a, b)| (k.midpoint(), *a, *b))
                .collect(),
            rhs: Interval::from_rat(&c.constant),
            rhs_mid: Interval::from_rat(&c.constant).midpoint(),
            linear,
            bilinear,
            relation: c.relation,
        });
    }
    let mut is_binary = vec![false; n];
    let mut binaries = Vec::new();
    let mut bounds = Vec::with_capacity(n);
    for def in problem.vars() {
        if matches!(def.kind, VarKind::Binary) {
            is_binary[def.id.0] = true;
            binaries.push(def.id.0);
        }
        let lb = Interval::from_rat(&def.lb);
        let ub = Interval::from_rat(&def.ub);
        bounds.push(Interval::new(lb.lo, ub.hi));
    }
    CompiledProblem {
        constraints,
        bounds,
        is_binary,
        binaries,
        occurrence,
    }
}

impl CompiledProblem {
    pub fn initial_box(&self) -> IntervalBox {
        IntervalBox::new(self.bounds.clone())
    }

    /// Largest violation of any constraint at a point (0 means feasible up
    /// to f64 arithmetic).
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max(violation(c, point).abs());
        }
        worst
    }
}

/// Signed residual used by the polisher: 0 when the constraint holds.
pub fn violation(c: &CompiledConstraint, point: &[f64]) -> f64 {
    let mut lhs = 0.0;
    for (k, v) in &c.linear_mid {
        lhs += k * point[*v];
    }
    for (k, a, b) in &c.bilinear_mid {
        lhs += k * point[*a] * point[*b];
    }
    match c.relation {
        Relation::Eq => lhs - c.rhs_mid,
        Relation::Le => (lhs - c.rhs_mid).max(0.0),
        Relation::Ge => (c.rhs_mid - lhs).max(0.0),
    }
}

fn term_interval(c: &CompiledConstraint, idx: usize, bx: &IntervalBox) -> Interval {
    if idx < c.linear.len() {
        let (k, v) = &c.linear[idx];
        k.mul(&bx.get(*v))
    } else {
        let (k, a, b) = &c.bilinear[idx - c.linear.len()];
        k.mul(&bx.get(*a)).mul(&bx.get(*b))
    }
}

fn sum_excluding(c: &CompiledConstraint, skip: usize, n_terms: usize, bx: &IntervalBox) -> Interval {
    let mut acc = Interval::point(0.0);
    for i in 0..n_terms {
        if i != skip {
            acc = acc.add(&term_interval(c, i, bx));
        }
    }
    acc
}

/// One forward-backward pass over a single constraint. Returns `false` when
/// the constraint is shown infeasible on the box.
fn revise(c: &CompiledConstraint, bx: &mut IntervalBox, changed: &mut bool) -> bool {
    let n_terms = c.linear.len() + c.bilinear.len();
    let mut total = Interval::point(0.0);
    for i in 0..n_terms {
        total = total.add(&term_interval(c, i, bx));
    }
    let target = match c.relation {
        Relation::Eq => c.rhs,
        Relation::Le => Interval::new(f64::NEG_INFINITY, c.rhs.hi),
        Relation::Ge => Interval::new(c.rhs.lo, f64::INFINITY),
    };
    let feasible_sum = match total.intersect(&target) {
        Some(t) => t,
        None => return false,
    };
    for i in 0..n_terms {
        let others = sum_excluding(c, i, n_terms, bx);
        let term_range = feasible_sum.sub(&others);
        if i < c.linear.len() {
            let (k, v) = &c.linear[i];
            if let Some(value_range) = term_range.div(k) {
                match bx.get(*v).intersect(&value_range) {
                    Some(iv) => {
                        if iv != bx.get(*v) {
                            bx.set(*v, iv);
                            *changed = true;
                        }
                    }
                    None => return false,
                }
            }
        } else {
            let (k, a, b) = &c.bilinear[i - c.linear.len()];
            let product_range = match term_range.div(k) {
                Some(p) => p,
                None => continue,
            };
            if a == b {
                // Square term: x^2 in P with x >= 0 on our domains.
                if bx.get(*a).lo >= 0.0 {
                    if let Some(root) = product_range.sqrt_nonneg() {
                        match bx.get(*a).intersect(&root) {
                            Some(iv) => {
                                if iv != bx.get(*a) {
                                    bx.set(*a, iv);
                                    *changed = true;
                                }
                            }
                            None => return false,
                        }
                    } else {
                        // x^2 must be negative: impossible.
                        return false;
                    }
                }
                continue;
            }
            for (this, other) in [(*a, *b), (*b, *a)] {
                if let Some(q) = product_range.div(&bx.get(other)) {
                    match bx.get(this).intersect(&q) {
                        Some(iv) => {
                            if iv != bx.get(this) {
                                bx.set(this, iv);
                                *changed = true;
                            }
                        }
                        None => return false,
                    }
                }
            }
        }
    }
    true
}

/// Snaps binary domains onto the integer values they still contain. Returns
/// `false` when a binary domain contains neither 0 nor 1.
fn snap_binaries(cp: &CompiledProblem, bx: &mut IntervalBox, changed: &mut bool) -> bool {
    for &v in &cp.binaries {
        let iv = bx.get(v);
        let has0 = iv.contains(0.0);
        let has1 = iv.contains(1.0);
        match (has0, has1) {
            (true, true) => {}
            (true, false) => {
                if !iv.is_point() {
                    bx.set(v, Interval::point(0.0));
                    *changed = true;
                }
            }
            (false, true) => {
                if !iv.is_point() {
                    bx.set(v, Interval::point(1.0));
                    *changed = true;
                }
            }
            (false, false) => return false,
        }
    }
    true
}

/// Contracts the box to hull-consistency fixpoint (or until a pass improves
/// total width by less than 1%). `None` means the box holds no feasible
/// point. `steps` counts constraint revisions.
pub fn contract_compiled(
    cp: &CompiledProblem,
    bx: &IntervalBox,
    steps: &mut u64,
) -> Option<IntervalBox> {
    let mut out = bx.clone();
    let mut changed = true;
    if !snap_binaries(cp, &mut out, &mut changed) {
        return None;
    }
    for _pass in 0..64 {
        if !changed {
            break;
        }
        changed = false;
        let before = out.total_width();
        for c in &cp.constraints {
            *steps += 1;
            if !revise(c, &mut out, &mut changed) {
                return None;
            }
        }
        if !snap_binaries(cp, &mut out, &mut changed) {
            return None;
        }
        let after = out.total_width();
        if before.is_finite() && before > 0.0 && (before - after) < 0.01 * before {
            break;
        }
    }
    Some(out)
}
