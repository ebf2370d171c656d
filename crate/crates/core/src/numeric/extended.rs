use std::fmt;

use super::Scalar;

/// A scalar extended with both infinities.
///
/// The derived order is the intended one: `NegInf < Finite(_) < PosInf`,
/// with finite values compared by the scalar order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Extended<S> {
    NegInf,
    Finite(S),
    PosInf,
}

impl<S: Scalar> Extended<S> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<&S> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Sum of two extended values; `None` for `-oo + +oo`.
    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        use Extended::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Finite(a.clone() + b.clone())),
            (NegInf, PosInf) | (PosInf, NegInf) => None,
            (NegInf, _) | (_, NegInf) => Some(NegInf),
            (PosInf, _) | (_, PosInf) => Some(PosInf),
        }
    }

    /// Product with a finite scalar; `0 * oo` is taken to be `0`.
    pub fn scale(&self, factor: &S) -> Self {
        use Extended::*;
        if factor.is_zero() {
            return Finite(S::zero());
        }
        match self {
            Finite(a) => Finite(a.clone() * factor.clone()),
            NegInf if factor.is_positive() => NegInf,
            NegInf => PosInf,
            PosInf if factor.is_positive() => PosInf,
            PosInf => NegInf,
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Extended::NegInf => Extended::PosInf,
            Extended::Finite(a) => Extended::Finite(-a.clone()),
            Extended::PosInf => Extended::NegInf,
        }
    }
}

impl<S: Scalar> From<S> for Extended<S> {
    fn from(value: S) -> Self {
        Extended::Finite(value)
    }
}

impl<S: fmt::Display> fmt::Display for Extended<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => write!(f, "-oo"),
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInf => write!(f, "oo"),
        }
    }
}
