//! Outward-rounded f64 interval arithmetic and the search-box state.
//!
//! Every arithmetic endpoint is widened by one ulp after round-to-nearest
//! evaluation, so computed intervals always enclose the exact result and
//! emptiness proofs are rigorous. Rational constants that are not exactly
//! representable are enclosed with a two-ulp margin.

use num::Zero;

use crate::rat::{rat_from_f64, rat_to_f64, Rat};

/// Next representable f64 above `x`.
pub fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

/// Next representable f64 below `x`.
pub fn next_down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    if x == 0.0 {
        return -f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits - 1 } else { bits + 1 })
}

/// Closed, non-empty f64 interval. Emptiness is signalled by `Option` at the
/// API boundary rather than by an inverted pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    pub const WHOLE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Rigorous enclosure of a rational: a point when the value is exactly
    /// representable, otherwise the nearest double widened by two ulps.
    pub fn from_rat(r: &Rat) -> Interval {
        let x = rat_to_f64(r);
        match rat_from_f64(x) {
            Some(back) if back == *r => Interval::point(x),
            _ => Interval::new(next_down(next_down(x)), next_up(next_up(x))),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        m.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: next_down(self.lo + other.lo),
            hi: next_up(self.hi + other.hi),
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        Interval {
            lo: next_down(self.lo - other.hi),
            hi: next_up(self.hi - other.lo),
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let candidates = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in candidates {
            // 0 * inf occurs only with degenerate inputs; treat as 0.
            let c = if c.is_nan() { 0.0 } else { c };
            lo = lo.min(c);
            hi = hi.max(c);
        }
        Interval {
            lo: next_down(lo),
            hi: next_up(hi),
        }
    }

    /// Division; `None` when the divisor spans zero (no information).
    pub fn div(&self, other: &Interval) -> Option<Interval> {
        if other.lo <= 0.0 && other.hi >= 0.0 {
            return None;
        }
        let candidates = [
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in candidates {
            let c = if c.is_nan() { 0.0 } else { c };
            lo = lo.min(c);
            hi = hi.max(c);
        }
        Some(Interval {
            lo: next_down(lo),
            hi: next_up(hi),
        })
    }

    /// Enclosure of `sqrt` restricted to the non-negative part.
    pub fn sqrt_nonneg(&self) -> Option<Interval> {
        if self.hi < 0.0 {
            return None;
        }
        let lo = self.lo.max(0.0);
        Some(Interval {
            lo: next_down(lo.sqrt()).max(0.0),
            hi: next_up(self.hi.sqrt()),
        })
    }
}

/// Search state: one interval per problem variable. Binary variables use the
/// sub-intervals of `[0, 1]` that still contain an admissible integer value.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalBox {
    vals: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(vals: Vec<Interval>) -> IntervalBox {
        IntervalBox { vals }
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn get(&self, i: usize) -> Interval {
        self.vals[i]
    }

    pub fn set(&mut self, i: usize, value: Interval) {
        self.vals[i] = value;
    }

    /// Sum of finite widths; used for the contractor's progress measure.
    pub fn total_width(&self) -> f64 {
        self.vals.iter().map(|v| v.width()).sum()
    }

    /// Exact rational endpoints of a coordinate (f64 endpoints are exact
    /// binary rationals).
    pub fn rational_hull(&self, i: usize) -> Option<(Rat, Rat)> {
        let iv = self.vals[i];
        let lo = rat_from_f64(iv.lo)?;
        let hi = rat_from_f64(iv.hi)?;
        Some((lo.max(Rat::zero()), hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn ulp_stepping_brackets_every_sum() {
        let a = Interval::point(0.1);
        let b = Interval::point(0.2);
        let s = a.add(&b);
        assert!(s.lo < 0.1 + 0.2 && 0.1 + 0.2 < s.hi || s.contains(0.3));
        assert!(s.contains(0.1 + 0.2));
    }

    #[test]
    fn rational_enclosure_is_tight_for_exact_doubles() {
        assert_eq!(Interval::from_rat(&rat(3, 4)), Interval::point(0.75));
        let third = Interval::from_rat(&rat(1, 3));
        assert!(third.lo < 1.0 / 3.0 && 1.0 / 3.0 < third.hi);
        assert!(third.width() < 1e-15);
    }

    #[test]
    fn multiplication_encloses_products() {
        let a = Interval::new(-0.5, 0.25);
        let b = Interval::new(0.1, 0.3);
        let p = a.mul(&b);
        for (x, y) in [(-0.5, 0.3), (0.25, 0.3), (-0.5, 0.1), (0.2, 0.2)] {
            assert!(p.contains(x * y));
        }
    }

    #[test]
    fn division_declines_zero_spanning_divisors() {
        let a = Interval::new(1.0, 2.0);
        assert!(a.div(&Interval::new(-1.0, 1.0)).is_none());
        let q = a.div(&Interval::new(0.5, 1.0)).unwrap();
        assert!(q.contains(2.0) && q.contains(1.0) && q.contains(4.0));
    }

    #[test]
    fn sqrt_contracts_squares() {
        let sq = Interval::new(0.5, 0.5);
        let r = sq.sqrt_nonneg().unwrap();
        assert!(r.contains(std::f64::consts::FRAC_1_SQRT_2));
        assert!(r.width() < 1e-15);
    }
}
