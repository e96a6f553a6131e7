//! Exact rational scalars used throughout program construction.
//!
//! Coefficients stay exact from parsing through coefficient matching; the
//! only conversion to floating point happens at the SDP boundary.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational coefficient.
pub type Rat = BigRational;

/// Rational zero.
pub fn zero() -> Rat {
    Rat::zero()
}

/// Rational one.
pub fn one() -> Rat {
    Rat::one()
}

/// Rational from a machine integer.
pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational `n/d`.
pub fn frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Correctly rounded conversion to `f64`; `0.0` for the zero rational.
pub fn to_f64(q: &Rat) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion from a finite `f64` (every finite double is dyadic).
pub fn from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

/// Parse a decimal or rational literal into an exact rational.
///
/// Accepts `42`, `-3`, `0.9025` (read as 9025/10000), and `n/d`.
pub fn parse_literal(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let neg = int_part.trim_start().starts_with('-');
        let int_part: BigInt = if int_part.is_empty() || int_part == "-" {
            BigInt::zero()
        } else {
            int_part.parse().ok()?
        };
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let numer: BigInt = frac_part.parse().ok()?;
        let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac = Rat::new(numer, denom);
        let whole = Rat::from_integer(int_part);
        return Some(if neg { whole - frac } else { whole + frac });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rat::from_integer(n))
}

/// Render a rational canonically: `n` when integral, `n/d` otherwise.
pub fn render(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Absolute value.
pub fn abs(q: &Rat) -> Rat {
    q.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_literal("0.9025").unwrap(), frac(9025, 10000));
        assert_eq!(parse_literal("0.9025").unwrap(), frac(361, 400));
        assert_eq!(parse_literal("-1.5").unwrap(), frac(-3, 2));
        assert_eq!(parse_literal("-0.25").unwrap(), frac(-1, 4));
        assert_eq!(parse_literal("12").unwrap(), int(12));
        assert_eq!(parse_literal("7/4").unwrap(), frac(7, 4));
        assert!(parse_literal("1/0").is_none());
        assert!(parse_literal("1.2.3").is_none());
    }

    #[test]
    fn float_round_trip_is_exact() {
        for x in [0.1, -3.5, 1e-9, 12345.6789, 2.0f64.powi(-40)] {
            assert_eq!(to_f64(&from_f64(x)), x);
        }
    }

    #[test]
    fn rendering() {
        assert_eq!(render(&frac(361, 400)), "361/400");
        assert_eq!(render(&int(-7)), "-7");
    }
}
