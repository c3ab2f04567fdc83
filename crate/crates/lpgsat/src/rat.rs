//! Exact rational arithmetic helpers shared across the crate.
//!
//! Truth values, clause bounds and constraint coefficients are all
//! `BigRational`s so that evaluation and certificate checking are decidable
//! without tolerances.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

/// Exact rational number used for truth values, bounds and coefficients.
pub type Rat = BigRational;

/// Builds a rational from an integer pair. Panics on a zero denominator.
pub fn rat(p: i64, q: i64) -> Rat {
    assert!(q != 0, "zero denominator");
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Canonical `p/q` rendering. The denominator is always written, even for
/// integers, so model files and `assign` lines stay bit-exact.
pub fn format_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q`, a decimal literal (`0.75`) or a bare integer, with an
/// optional leading sign.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational".to_string());
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let value = if let Some((num, den)) = body.split_once('/') {
        let p: BigInt = num
            .parse()
            .map_err(|_| format!("bad numerator `{num}`"))?;
        let q: BigInt = den
            .parse()
            .map_err(|_| format!("bad denominator `{den}`"))?;
        if q.is_zero() {
            return Err("zero denominator".to_string());
        }
        Rat::new(p, q)
    } else if let Some((int, frac)) = body.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal `{body}`"));
        }
        let int: BigInt = if int.is_empty() {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| format!("bad decimal `{body}`"))?
        };
        let digits: BigInt = frac
            .parse()
            .map_err(|_| format!("bad decimal `{body}`"))?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        Rat::from_integer(int) + Rat::new(digits, scale)
    } else {
        let p: BigInt = body
            .parse()
            .map_err(|_| format!("bad integer `{body}`"))?;
        Rat::from_integer(p)
    };
    Ok(if negative { -value } else { value })
}

/// Nearest-f64 conversion (round to nearest, may be inexact).
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a component-wise division for extreme magnitudes.
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Exact rational image of a finite f64.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// True when the rational is exactly representable as an f64.
pub fn rat_is_exact_f64(r: &Rat, x: f64) -> bool {
    match Rat::from_float(x) {
        Some(back) => back == *r,
        None => false,
    }
}

/// Simplest rational (minimal denominator, then minimal numerator magnitude)
/// in the closed interval `[lo, hi]`. Requires `lo <= hi`.
///
/// This is the Stern-Brocot / continued-fraction construction; the result of
/// a width-`w` query has denominator at most about `1/w`, so rounding a
/// solver candidate through a `1e-6` window keeps denominators near or below
/// a million.
pub fn simplest_in_interval(lo: &Rat, hi: &Rat) -> Rat {
    assert!(lo <= hi, "empty interval");
    if lo <= &Rat::zero() && &Rat::zero() <= hi {
        return Rat::zero();
    }
    if hi < &Rat::zero() {
        return -simplest_nonneg(&-hi.clone(), &-lo.clone());
    }
    simplest_nonneg(lo, hi)
}

fn simplest_nonneg(lo: &Rat, hi: &Rat) -> Rat {
    // 0 < lo <= hi
    let fl = lo.floor();
    let ceil_lo = lo.ceil();
    if ceil_lo <= *hi {
        return ceil_lo;
    }
    // lo and hi share the same integer part and neither is an integer.
    let frac_lo = lo - &fl;
    let frac_hi = hi - &fl;
    let inner = simplest_nonneg(&frac_hi.recip(), &frac_lo.recip());
    fl + inner.recip()
}

/// Simplest rational within `window` of `x`, or `None` when the result
/// exceeds `max_den` or `x` is not finite.
pub fn round_to_rational(x: f64, window: f64, max_den: u64) -> Option<Rat> {
    if !x.is_finite() {
        return None;
    }
    let centre = rat_from_f64(x)?;
    let w = rat_from_f64(window.abs())?;
    let r = simplest_in_interval(&(&centre - &w), &(&centre + &w));
    if r.denom() <= &BigInt::from(max_den) {
        Some(r)
    } else {
        None
    }
}

/// Clamps a rational into `[0, 1]`.
pub fn clamp_unit(r: Rat) -> Rat {
    if r.is_negative() {
        Rat::zero()
    } else if r > Rat::one() {
        Rat::one()
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_forms() {
        assert_eq!(parse_rat("0.75").unwrap(), rat(3, 4));
        assert_eq!(parse_rat("1").unwrap(), rat(1, 1));
        assert_eq!(parse_rat("2/3").unwrap(), rat(2, 3));
        assert_eq!(parse_rat("-1/2").unwrap(), rat(-1, 2));
        assert_eq!(parse_rat(".5").unwrap(), rat(1, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn canonical_rendering_always_includes_denominator() {
        assert_eq!(format_rat(&rat(1, 1)), "1/1");
        assert_eq!(format_rat(&rat(6, 8)), "3/4");
        assert_eq!(format_rat(&rat(0, 5)), "0/1");
    }

    #[test]
    fn simplest_rational_picks_minimal_denominator() {
        // The only denominator-<=16 rational in a tight window is recovered.
        let lo = parse_rat("0.7499").unwrap();
        let hi = parse_rat("0.7501").unwrap();
        assert_eq!(simplest_in_interval(&lo, &hi), rat(3, 4));
        // Zero wins whenever it is inside.
        assert_eq!(simplest_in_interval(&rat(-1, 3), &rat(1, 7)), rat(0, 1));
        // Integer shortcut.
        assert_eq!(simplest_in_interval(&rat(3, 2), &rat(7, 2)), rat(2, 1));
    }

    #[test]
    fn rounding_respects_denominator_cap() {
        let r = round_to_rational(0.333333333, 1e-6, 1_000_000).unwrap();
        assert_eq!(r, rat(1, 3));
        assert!(round_to_rational(0.5f64.sqrt(), 1e-12, 10).is_none());
    }
}
