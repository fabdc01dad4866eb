//! Arithmetic backends.
//!
//! Every probability computation in the crate is generic over [`Scalar`], which
//! is implemented for `f64`, `f32` and the arbitrary-precision [`Rational`].
//! Exact mode admits no rounding, so identities such as "probabilities sum to
//! one" hold with equality; float mode carries [`Scalar::SUM_TOLERANCE`].

use std::fmt::Debug;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{NumAssignRef, NumRef, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub trait Scalar:
    NumRef + NumAssignRef + Clone + PartialOrd + Debug + Send + Sync + 'static
{
    /// `true` when arithmetic is exact (no rounding anywhere).
    const EXACT: bool;

    /// Tolerance for "sums to one" style identities. Zero in exact mode.
    const SUM_TOLERANCE: f64;

    /// `num / den`; `den` must be non-zero.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Converts an exact rational into this backend, rounding if inexact.
    fn from_rational(r: &Rational) -> Self;

    fn to_f64(&self) -> f64;

    /// Canonical text form: `"num/den"` for rationals, shortest round-trip
    /// decimal for floats.
    fn to_repr(&self) -> String;

    fn parse_repr(s: &str) -> Result<Self>;

    fn from_u64(n: u64) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn half() -> Self {
        Self::from_ratio(1, 2)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const SUM_TOLERANCE: f64 = 1e-12;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_repr(&self) -> String {
        format!("{self:?}")
    }

    fn parse_repr(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('/') {
            return parse_rational(s).map(|r| rational_to_f64(&r));
        }
        s.parse::<f64>()
            .map_err(|e| Error::parse(s, e.to_string()))
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;
    const SUM_TOLERANCE: f64 = 1e-5;

    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r) as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn to_repr(&self) -> String {
        format!("{self:?}")
    }

    fn parse_repr(s: &str) -> Result<Self> {
        f64::parse_repr(s).map(|v| v as f32)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const SUM_TOLERANCE: f64 = 0.0;

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn to_repr(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn parse_repr(s: &str) -> Result<Self> {
        parse_rational(s)
    }
}

/// Parses `"num/den"`, an integer, or a terminating decimal (optionally with
/// an exponent, e.g. `1.5e-3`) into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::parse(s, "empty input"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::parse(s, "numerator is not an integer"))?;
        let den: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::parse(s, "denominator is not an integer"))?;
        if den.is_zero() {
            return Err(Error::parse(s, "zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(idx) => {
            let exp: i64 = s[idx + 1..]
                .parse()
                .map_err(|_| Error::parse(s, "malformed exponent"))?;
            (&s[..idx], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::parse(s, "no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::parse(s, "not a decimal number"));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(all_digits.parse::<BigInt>().unwrap_or_default());
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 10_000 {
        return Err(Error::parse(s, "exponent too large"));
    }
    let ten = BigInt::from(10u32);
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= Rational::from_integer(factor);
    } else {
        value /= Rational::from_integer(factor);
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Correctly scaled conversion that does not overflow when numerator and
/// denominator individually exceed the f64 range.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let numer = r.numer();
    let denom = r.denom();
    let nb = numer.bits() as i64;
    let db = denom.bits() as i64;
    if nb < 1000 && db < 1000 {
        if let (Some(n), Some(d)) = (numer.to_f64(), denom.to_f64()) {
            return n / d;
        }
    }
    // Keep ~64 significant bits of the quotient, then rescale.
    let shift = nb - db - 64;
    let (n, d) = if shift >= 0 {
        (numer.clone(), denom << shift as usize)
    } else {
        (numer << (-shift) as usize, denom.clone())
    };
    let q = (&n / &d).to_f64().unwrap_or(f64::NAN);
    let sign = if numer.sign() == Sign::Minus { -1.0 } else { 1.0 };
    let half = shift / 2;
    sign * q.abs() * 2f64.powi(half as i32) * 2f64.powi((shift - half) as i32)
}

/// `1 - x`.
pub fn complement<S: Scalar>(x: &S) -> S {
    S::one() - x.clone()
}

/// Absolute value through the ordering, usable for every backend.
pub fn abs<S: Scalar>(x: S) -> S {
    if x < S::zero() {
        S::zero() - x
    } else {
        x
    }
}

/// `serialize_with` helpers writing scalars in their canonical text form.
pub mod repr {
    use serde::ser::{SerializeSeq, Serializer};

    use super::Scalar;

    pub fn one<S: Scalar, Ser: Serializer>(value: &S, ser: Ser) -> Result<Ser::Ok, Ser::Error> {
        ser.serialize_str(&value.to_repr())
    }

    pub fn many<S: Scalar, Ser: Serializer>(values: &[S], ser: Ser) -> Result<Ser::Ok, Ser::Error> {
        let mut seq = ser.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&v.to_repr())?;
        }
        seq.end()
    }
}
