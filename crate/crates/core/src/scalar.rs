//! Arithmetic backend: exact rationals or IEEE doubles, one per model.
//!
//! Everything downstream is generic over [`Scalar`]. In exact mode the
//! library asserts its identities with `==`; in float mode the same
//! assertions run against small absolute tolerances.

use std::fmt;
use std::ops::{Div, Neg, Sub};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// A field element the analysis can run over.
///
/// `Zero + One` bring in addition and multiplication; subtraction,
/// division and negation are required separately. Values are cloned
/// freely, so implementations should make `Clone` cheap or acceptable
/// (`BigRational` allocates; tables stay small enough for that).
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Neg<Output = Self>
    + Sub<Output = Self>
    + Div<Output = Self>
{
    /// True when equality of computed values is exact (rational mode).
    const EXACT: bool;

    /// The fraction `numer/denom`. `denom` must be nonzero.
    fn from_ratio(numer: i64, denom: i64) -> Self;

    /// Parses `p/q`, an integer, or a decimal with optional exponent.
    fn parse_number(text: &str) -> Result<Self>;

    fn to_f64(&self) -> f64;

    /// Exact rational value of this scalar. For `f64` this is the exact
    /// dyadic rational the bit pattern denotes; the value must be finite.
    fn to_exact(&self) -> BigRational;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }

    /// Exact equality in rational mode, absolute tolerance otherwise.
    fn close_to(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.to_f64() - other.to_f64()).abs() <= tol
        }
    }
}

/// Parses `p/q`, an integer, or a decimal such as `0.35` or `1.2e-3`,
/// into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((numer, denom)) = t.split_once('/') {
        let n = BigInt::from_str(numer.trim())
            .map_err(|_| Error::Parse(format!("bad numerator in `{t}`")))?;
        let d = BigInt::from_str(denom.trim())
            .map_err(|_| Error::Parse(format!("bad denominator in `{t}`")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{t}`")));
        }
        return Ok(BigRational::new(n, d));
    }

    // Decimal form: [sign] digits [. digits] [e|E [sign] digits].
    let (mantissa, exponent) = match t.split_once(['e', 'E']) {
        Some((m, e)) => {
            let exp = i32::from_str(e.trim())
                .map_err(|_| Error::Parse(format!("bad exponent in `{t}`")))?;
            (m.trim(), exp)
        }
        None => (t, 0),
    };
    let (sign, unsigned) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match unsigned.split_once('.') {
        Some((i, f)) => (i, f),
        None => (unsigned, ""),
    };
    let digits: String = int_part.chars().chain(frac_part.chars()).collect();
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("cannot parse number `{t}`")));
    }
    let mut numer = BigInt::from_str(&digits).expect("digits only") * BigInt::from(sign);
    let mut denom = BigInt::from(10u8).pow(frac_part.len() as u32);
    if exponent >= 0 {
        numer *= BigInt::from(10u8).pow(exponent as u32);
    } else {
        denom *= BigInt::from(10u8).pow(exponent.unsigned_abs());
    }
    Ok(BigRational::new(numer, denom))
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn parse_number(text: &str) -> Result<Self> {
        parse_rational(text)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_exact(&self) -> BigRational {
        self.clone()
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        numer as f64 / denom as f64
    }

    fn parse_number(text: &str) -> Result<Self> {
        // Route through the exact parser so both modes accept the same
        // grammar and agree on `p/q` inputs.
        Ok(Scalar::to_f64(&parse_rational(text)?))
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_exact(&self) -> BigRational {
        BigRational::from_float(*self).expect("finite float")
    }
}

/// Pairwise (tree) summation. Exact mode is indifferent to the order;
/// float mode gets an O(eps log n) error bound and a fixed, deterministic
/// association, which the 1e-12 mass checks on large tables rely on.
pub fn pairwise_sum<N: Scalar>(values: &[N]) -> N {
    match values.len() {
        0 => N::zero(),
        1 => values[0].clone(),
        2 => values[0].clone() + values[1].clone(),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        let half: BigRational = Scalar::from_ratio(1, 2);
        assert_eq!(parse_rational("1/2").unwrap(), half);
        assert_eq!(parse_rational(" 0.5 ").unwrap(), half);
        assert_eq!(parse_rational("5e-1").unwrap(), half);
        assert_eq!(parse_rational("-3/10").unwrap(), Scalar::from_ratio(-3, 10));
        assert_eq!(parse_rational("0.35").unwrap(), Scalar::from_ratio(7, 20));
        assert_eq!(parse_rational("2").unwrap(), Scalar::from_ratio(2, 1));
        assert_eq!(parse_rational(".25").unwrap(), Scalar::from_ratio(1, 4));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("one half").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn float_mode_shares_the_grammar() {
        assert_eq!(<f64 as Scalar>::parse_number("7/10").unwrap(), 0.7);
        assert_eq!(<f64 as Scalar>::parse_number("0.7").unwrap(), 0.7);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_rationals() {
        let v: Vec<BigRational> = (1..=20).map(|k| Scalar::from_ratio(1, k)).collect();
        let naive = v.iter().cloned().fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(pairwise_sum(&v), naive);
    }

    #[test]
    fn rational_display_is_p_over_q() {
        let x: BigRational = Scalar::from_ratio(7, 10);
        assert_eq!(x.to_string(), "7/10");
        let one: BigRational = Scalar::from_ratio(1, 1);
        assert_eq!(one.to_string(), "1");
    }
}
