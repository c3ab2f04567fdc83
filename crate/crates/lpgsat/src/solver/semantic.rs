//! Semantic box refutation.
//!
//! The translated constraint system is a closed relaxation of the clause
//! semantics: at case boundaries (`!p`/`!g` at 0, `->p`/`->g` at equality)
//! it admits assignments whose value variables disagree with the exact
//! operator tables, so constraint propagation alone cannot refute every
//! unsatisfiable box. This module evaluates the clause bodies themselves
//! over the source-variable box, representing each discontinuous operator's
//! image as a small union of outward-rounded intervals. A box whose value
//! set misses a clause's bounds contains no witness and can be discarded
//! rigorously.

use crate::formula::{Clause, Formula, Logic};
use crate::rat::Rat;

use super::interval::{next_down, next_up, Interval};

/// Maximum number of disjoint pieces tracked per node before hull-merging.
const MAX_PIECES: usize = 12;

/// Sorted union of closed intervals enclosing the achievable values.
#[derive(Clone, Debug)]
pub struct ValueSet {
    pieces: Vec<Interval>,
}

impl ValueSet {
    fn single(iv: Interval) -> ValueSet {
        ValueSet { pieces: vec![iv] }
    }

    fn from_pieces(mut pieces: Vec<Interval>) -> ValueSet {
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(pieces.len());
        for p in pieces {
            match merged.last_mut() {
                Some(last) if p.lo <= last.hi => {
                    last.hi = last.hi.max(p.hi);
                }
                _ => merged.push(p),
            }
        }
        // Cap the piece count by merging the closest neighbours (a sound
        // over-approximation).
        while merged.len() > MAX_PIECES {
            let mut best = 0;
            let mut best_gap = f64::INFINITY;
            for i in 0..merged.len() - 1 {
                let gap = merged[i + 1].lo - merged[i].hi;
                if gap < best_gap {
                    best_gap = gap;
                    best = i;
                }
            }
            let hi = merged[best + 1].hi;
            merged[best].hi = hi;
            merged.remove(best + 1);
        }
        ValueSet { pieces: merged }
    }

    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    pub fn intersects(&self, window: &Interval) -> bool {
        self.pieces
            .iter()
            .any(|p| p.lo <= window.hi && window.lo <= p.hi)
    }
}

fn map_pairs(a: &ValueSet, b: &ValueSet, f: impl Fn(Interval, Interval, &mut Vec<Interval>)) -> ValueSet {
    let mut out = Vec::with_capacity(a.pieces.len() * b.pieces.len());
    for x in &a.pieces {
        for y in &b.pieces {
            f(*x, *y, &mut out);
        }
    }
    ValueSet::from_pieces(out)
}

fn map_single(a: &ValueSet, f: impl Fn(Interval, &mut Vec<Interval>)) -> ValueSet {
    let mut out = Vec::with_capacity(a.pieces.len() * 2);
    for x in &a.pieces {
        f(*x, &mut out);
    }
    ValueSet::from_pieces(out)
}

/// Achievable-value enclosure of `phi` over per-variable source intervals.
pub fn value_set(phi: &Formula, lookup: &dyn Fn(&str) -> Interval) -> ValueSet {
    match phi {
        Formula::Var(name) => ValueSet::single(lookup(name)),
        Formula::Const(k) => ValueSet::single(Interval::from_rat(k)),
        Formula::Not(logic, sub) => {
            let a = value_set(sub, lookup);
            match logic {
                Logic::Lukasiewicz => map_single(&a, |x, out| {
                    out.push(Interval::new(next_down(1.0 - x.hi), next_up(1.0 - x.lo)))
                }),
                Logic::Product | Logic::Goedel => map_single(&a, |x, out| {
                    if x.lo > 0.0 {
                        out.push(Interval::point(0.0));
                    } else if x.hi == 0.0 {
                        out.push(Interval::point(1.0));
                    } else {
                        out.push(Interval::point(0.0));
                        out.push(Interval::point(1.0));
                    }
                }),
            }
        }
        Formula::And(logic, lhs, rhs) => {
            let a = value_set(lhs, lookup);
            let b = value_set(rhs, lookup);
            match logic {
                Logic::Lukasiewicz => map_pairs(&a, &b, |x, y, out| {
                    out.push(Interval::new(
                        next_down(x.lo + y.lo - 1.0).max(0.0),
                        next_up(x.hi + y.hi - 1.0).clamp(0.0, 1.0),
                    ))
                }),
                Logic::Product => map_pairs(&a, &b, |x, y, out| {
                    out.push(Interval::new(
                        next_down(x.lo * y.lo).max(0.0),
                        next_up(x.hi * y.hi),
                    ))
                }),
                Logic::Goedel => map_pairs(&a, &b, |x, y, out| {
                    out.push(Interval::new(x.lo.min(y.lo), x.hi.min(y.hi)))
                }),
            }
        }
        Formula::Or(logic, lhs, rhs) => {
            let a = value_set(lhs, lookup);
            let b = value_set(rhs, lookup);
            match logic {
                Logic::Lukasiewicz => map_pairs(&a, &b, |x, y, out| {
                    out.push(Interval::new(
                        next_down(x.lo + y.lo).clamp(0.0, 1.0),
                        next_up(x.hi + y.hi).min(1.0),
                    ))
                }),
                Logic::Product => map_pairs(&a, &b, |x, y, out| {
                    out.push(Interval::new(
                        next_down(x.lo + y.lo - x.lo * y.lo),
                        next_up(x.hi + y.hi - x.hi * y.hi),
                    ))
                }),
                Logic::Goedel => map_pairs(&a, &b, |x, y, out| {
                    out.push(Interval::new(x.lo.max(y.lo), x.hi.max(y.hi)))
                }),
            }
        }
        Formula::Implies(logic, lhs, rhs) => {
            let a = value_set(lhs, lookup);
            let b = value_set(rhs, lookup);
            match logic {
                // min(1, 1-x+y) is continuous: antitone in x, monotone in y.
                Logic::Lukasiewicz => map_pairs(&a, &b, |x, y, out| {
                    out.push(Interval::new(
                        next_down(1.0 - x.hi + y.lo).clamp(0.0, 1.0),
                        next_up(1.0 - x.lo + y.hi).min(1.0),
                    ))
                }),
                Logic::Product => map_pairs(&a, &b, |x, y, out| {
                    if x.lo <= y.hi {
                        out.push(Interval::point(1.0));
                    }
                    // Strict case x > y needs x > 0.
                    if x.hi > y.lo && x.hi > 0.0 {
                        let lo = next_down(y.lo / x.hi).max(0.0);
                        let hi = if y.hi < x.lo && x.lo > 0.0 {
                            next_up(y.hi / x.lo).min(1.0)
                        } else {
                            1.0
                        };
                        out.push(Interval::new(lo.min(hi), hi));
                    }
                    if out.is_empty() {
                        out.push(Interval::new(0.0, 1.0));
                    }
                }),
                Logic::Goedel => map_pairs(&a, &b, |x, y, out| {
                    if x.lo <= y.hi {
                        out.push(Interval::point(1.0));
                    }
                    if x.hi > y.lo {
                        out.push(Interval::new(y.lo, y.hi.min(x.hi)));
                    }
                    if out.is_empty() {
                        out.push(Interval::new(0.0, 1.0));
                    }
                }),
            }
        }
    }
}

/// Outward window for a clause's bounds.
fn bound_window(lower: &Rat, upper: &Rat) -> Interval {
    let lo = Interval::from_rat(lower).lo;
    let hi = Interval::from_rat(upper).hi;
    Interval::new(lo, hi)
}

/// True when the clause provably has no witness with source values inside
/// the given per-variable intervals.
pub fn clause_refuted(clause: &Clause, lookup: &dyn Fn(&str) -> Interval) -> bool {
    let values = value_set(clause.body(), lookup);
    !values.intersects(&bound_window(clause.lower(), clause.upper()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn boxed<'a>(vals: &'a [(&'a str, f64, f64)]) -> impl Fn(&str) -> Interval + 'a {
        move |name: &str| {
            vals.iter()
                .find(|(n, _, _)| *n == name)
                .map(|(_, lo, hi)| Interval::new(*lo, *hi))
                .unwrap_or(Interval::new(0.0, 1.0))
        }
    }

    #[test]
    fn product_negation_splits_into_two_points() {
        let set = parse("0 <= !p x <= 1").unwrap();
        let body = set.clauses()[0].body();
        let lookup = boxed(&[("x", 0.0, 1.0)]);
        let vs = value_set(body, &lookup);
        assert_eq!(vs.pieces().len(), 2);
        assert_eq!(vs.pieces()[0], Interval::point(0.0));
        assert_eq!(vs.pieces()[1], Interval::point(1.0));
    }

    #[test]
    fn pathological_instance_refutes_at_the_root_box() {
        let set = parse("0.75 <= !p (x1 ->p x2) ->p x3 <= 0.75").unwrap();
        let clause = &set.clauses()[0];
        // x3 already narrowed to [0, 0.5] by the companion clause.
        let lookup = boxed(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0), ("x3", 0.0, 0.5)]);
        assert!(clause_refuted(clause, &lookup));
    }

    #[test]
    fn witness_boxes_are_never_refuted() {
        let set = parse("1 <= x |l !l x <= 1").unwrap();
        let clause = &set.clauses()[0];
        let lookup = boxed(&[("x", 0.25, 0.75)]);
        assert!(!clause_refuted(clause, &lookup));

        // Point box at an exact witness of a Goedel implication bound.
        let set = parse("0.3 <= x ->g y <= 0.3").unwrap();
        let clause = &set.clauses()[0];
        let lookup = boxed(&[("x", 0.7, 0.7), ("y", 0.3, 0.3)]);
        assert!(!clause_refuted(clause, &lookup));
    }

    #[test]
    fn goedel_implication_cases_stay_separate() {
        let set = parse("0 <= x ->g y <= 1").unwrap();
        let body = set.clauses()[0].body();
        // x in [0.6, 1], y in [0.1, 0.2]: strictly x > y, so value = y only.
        let lookup = boxed(&[("x", 0.6, 1.0), ("y", 0.1, 0.2)]);
        let vs = value_set(body, &lookup);
        assert_eq!(vs.pieces().len(), 1);
        let p = vs.pieces()[0];
        assert!(p.lo >= 0.1 && p.hi <= 0.2);
    }
}
