//! Directed-rounding decimals for irrational bound values.
//!
//! Every value produced here is an upper bound on the real number it
//! represents, so inequalities of the form `exact <= bound` stay sound.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::ratio::{to_f64, Rational};

/// Significant digits used for reported roots.
pub const DIGITS: u32 = 50;

/// `mantissa / 10^scale`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decimal {
    pub mantissa: BigInt,
    pub scale: u32,
}

impl Decimal {
    pub fn to_rational(&self) -> Rational {
        Rational::new(
            self.mantissa.clone(),
            num_traits::pow(BigInt::from(10), self.scale as usize),
        )
    }

    pub fn significant_digits(&self) -> u32 {
        let s = self.mantissa.abs().to_string();
        if self.mantissa.is_zero() {
            1
        } else {
            s.len() as u32
        }
    }

    /// Rational `x` rounded up to `digits` significant digits.
    pub fn ceil_of(x: &Rational, digits: u32) -> Decimal {
        root_ceil(x, 1, digits)
    }

    pub fn to_json(&self) -> Value {
        json!({ "decimal": self.to_string(), "digits": self.significant_digits() })
    }
}

impl std::fmt::Display for Decimal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let neg = self.mantissa.is_negative();
        let mut s = self.mantissa.abs().to_string();
        let scale = self.scale as usize;
        if scale > 0 {
            if s.len() <= scale {
                s = format!("{}{}", "0".repeat(scale + 1 - s.len()), s);
            }
            s.insert(s.len() - scale, '.');
        }
        if neg {
            write!(f, "-{s}")
        } else {
            write!(f, "{s}")
        }
    }
}

/// Smallest decimal with `digits` significant digits that is `>= x^(1/n)`.
///
/// `x` must be nonnegative and `n >= 1`.
pub fn root_ceil(x: &Rational, n: u32, digits: u32) -> Decimal {
    assert!(n >= 1, "root index must be positive");
    assert!(!x.is_negative(), "root of a negative number");
    if x.is_zero() {
        return Decimal {
            mantissa: BigInt::zero(),
            scale: 0,
        };
    }
    let digits = digits.max(1);
    // decimal exponent estimate of the root, corrected below if off by one
    let est = log10_rational(x) / n as f64;
    let mut p: i64 = digits as i64 - 1 - est.floor() as i64;
    loop {
        let m = scaled_root_ceil(x, n, p);
        let len = m.to_string().len() as i64;
        if len > digits as i64 {
            p -= len - digits as i64;
            continue;
        }
        if len < digits as i64 {
            p += digits as i64 - len;
            // a rescaled root can gain a digit exactly at a power of ten
            let m2 = scaled_root_ceil(x, n, p);
            if m2.to_string().len() as i64 <= digits as i64 {
                return normalize(m2, p);
            }
            p -= 1;
            return normalize(scaled_root_ceil(x, n, p), p);
        }
        return normalize(m, p);
    }
}

fn normalize(m: BigInt, p: i64) -> Decimal {
    if p >= 0 {
        Decimal {
            mantissa: m,
            scale: p as u32,
        }
    } else {
        Decimal {
            mantissa: m * num_traits::pow(BigInt::from(10), (-p) as usize),
            scale: 0,
        }
    }
}

/// Smallest integer `m` with `m^n >= x * 10^(p n)`.
fn scaled_root_ceil(x: &Rational, n: u32, p: i64) -> BigInt {
    let ten = BigInt::from(10);
    let (mut num, mut den) = (x.numer().clone(), x.denom().clone());
    let e = (p.unsigned_abs() as usize) * n as usize;
    if p >= 0 {
        num *= num_traits::pow(ten, e);
    } else {
        den *= num_traits::pow(ten, e);
    }
    // m^n * den >= num
    let q = (&num + &den - BigInt::one()) / &den;
    let mut m = q.nth_root(n);
    let pow_n = |m: &BigInt| num_traits::pow(m.clone(), n as usize);
    while pow_n(&m) * &den < num {
        m += 1;
    }
    while m > BigInt::zero() && pow_n(&(&m - 1)) * &den >= num {
        m -= 1;
    }
    m
}

fn log10_rational(x: &Rational) -> f64 {
    let nb = x.numer().to_string().len() as f64;
    let db = x.denom().to_string().len() as f64;
    if nb < 300.0 && db < 300.0 {
        to_f64(x).log10()
    } else {
        nb - db
    }
}

/// A rational upper bound on Euler's number, exceeding it by less than 1e-40.
pub fn e_upper() -> Rational {
    // e = 2.71828182845904523536028747135266249775724709369995..., rounded up
    Rational::new(
        "271828182845904523536028747135266249775724710"
            .parse()
            .unwrap(),
        num_traits::pow(BigInt::from(10), 44),
    )
}
