//! Exact rational helpers and their JSON wire form.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{invalid, Result};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn pow(base: &Rational, exp: u32) -> Rational {
    num_traits::pow(base.clone(), exp as usize)
}

/// Parses `"3"`, `"-3/4"` or a finite decimal such as `"0.125"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .or_else(|_| invalid(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .or_else(|_| invalid(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return invalid(format!("zero denominator in {s:?}"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches('-'), frac);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return invalid(format!("bad decimal {s:?}"));
        }
        let n: BigInt = digits.parse().expect("digits only");
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = s
        .parse()
        .or_else(|_| invalid(format!("bad rational {s:?}")))?;
    Ok(Rational::from_integer(n))
}

fn bigint_json(n: &BigInt) -> Value {
    match n.to_i64() {
        Some(v) => json!(v),
        None => json!(n.to_string()),
    }
}

/// `{"num": .., "den": ..}`; integers beyond 64 bits are emitted as strings.
pub fn to_json(r: &Rational) -> Value {
    json!({ "num": bigint_json(r.numer()), "den": bigint_json(r.denom()) })
}

pub fn to_f64(r: &Rational) -> f64 {
    // scale down big operands so the division stays finite
    let (mut n, mut d) = (r.numer().clone(), r.denom().clone());
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift = (nb.max(db) - 1000).max(0) as usize;
    if shift > 0 {
        n >>= shift;
        d >>= shift;
        if d.is_zero() {
            return if r.is_positive() {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
    }
    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
}

pub fn from_f64_exact(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("1/10").unwrap(), rat(1, 10));
        assert_eq!(parse_rational("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse_rational("-2.50").unwrap(), rat(-5, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn json_form_is_reduced() {
        assert_eq!(to_json(&rat(14, 32)), json!({"num": 7, "den": 16}));
        let big = pow(&int(10), 30);
        assert_eq!(
            to_json(&big)["num"],
            json!("1000000000000000000000000000000")
        );
    }

    #[test]
    fn f64_conversion_handles_huge_operands() {
        let x = pow(&rat(3, 7), 2000);
        assert_eq!(to_f64(&x), 0.0);
        assert!((to_f64(&rat(1, 3)) - 1.0 / 3.0).abs() < 1e-16);
        let y = pow(&rat(10, 1), 400) / (pow(&rat(10, 1), 400) * int(4));
        assert!((to_f64(&y) - 0.25).abs() < 1e-12);
    }
}
