//! The exact ordered field every analysis component is parameterised over.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, Zero};

/// An exact ordered field with integer rounding.
///
/// Implemented for every `Ratio<T>` over a signed integer type. The analysis
/// itself always runs on [`BigRational`]; the fixed-width instantiations are
/// handy for small hand-checked examples.
pub trait Scalar:
    Clone + Ord + Hash + Debug + Display + Signed + Send + Sync + 'static
{
    fn from_int(value: i64) -> Self;
    fn floor(&self) -> Self;
    fn ceil(&self) -> Self;
    fn is_integral(&self) -> bool;
    /// The denominator of the reduced fraction, as a scalar.
    fn denom_scalar(&self) -> Self;
    /// The numerator of the reduced fraction, as a scalar.
    fn numer_scalar(&self) -> Self;
}

impl<T> Scalar for Ratio<T>
where
    T: Clone + Integer + Signed + Hash + Debug + Display + From<i64> + Send + Sync + 'static,
{
    fn from_int(value: i64) -> Self {
        Ratio::from_integer(T::from(value))
    }

    fn floor(&self) -> Self {
        Ratio::floor(self)
    }

    fn ceil(&self) -> Self {
        Ratio::ceil(self)
    }

    fn is_integral(&self) -> bool {
        Ratio::is_integer(self)
    }

    fn denom_scalar(&self) -> Self {
        Ratio::from_integer(self.denom().clone())
    }

    fn numer_scalar(&self) -> Self {
        Ratio::from_integer(self.numer().clone())
    }
}

/// Greatest common divisor of two integral scalars (non-negative result).
pub fn gcd<S: Scalar>(a: &S, b: &S) -> S {
    let mut a = a.abs();
    let mut b = b.abs();
    while !b.is_zero() {
        let r = a.clone() % b.clone();
        a = b;
        b = r;
    }
    a
}

/// Smallest positive factor that makes every value integral.
pub fn common_denominator<'a, S: Scalar>(values: impl IntoIterator<Item = &'a S>) -> S {
    let mut scale = S::one();
    for v in values {
        let d = (v.clone() * scale.clone()).denom_scalar();
        if !d.is_one() {
            scale = scale * d;
        }
    }
    scale
}

/// Parses an integer or decimal literal (`42`, `-3`, `0.01`, `1/3`) into an
/// exact rational.
pub fn parse_rat(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_rat(num)?;
        let den = parse_rat(den)?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    if body.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if negative { -value } else { value })
}
