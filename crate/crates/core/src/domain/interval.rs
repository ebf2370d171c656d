use std::fmt;

use crate::numeric::{Extended, Scalar};
use crate::Sort;

/// An interval with exact, possibly infinite, possibly strict bounds.
///
/// Values are always normalised: non-empty, infinite ends are never strict,
/// a degenerate interval is closed.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Interval<S> {
    pub lo: Extended<S>,
    pub hi: Extended<S>,
    pub strict_lo: bool,
    pub strict_hi: bool,
}

/// `true` iff lower bound `(a, sa)` admits every value lower bound `(b, sb)`
/// admits.
fn lower_looser<S: Scalar>(a: &Extended<S>, sa: bool, b: &Extended<S>, sb: bool) -> bool {
    a < b || (a == b && (!sa || sb))
}

fn upper_looser<S: Scalar>(a: &Extended<S>, sa: bool, b: &Extended<S>, sb: bool) -> bool {
    a > b || (a == b && (!sa || sb))
}

impl<S: Scalar> Interval<S> {
    pub fn top() -> Self {
        Interval { lo: Extended::NegInf, hi: Extended::PosInf, strict_lo: false, strict_hi: false }
    }

    pub fn point(v: S) -> Self {
        Interval { lo: Extended::Finite(v.clone()), hi: Extended::Finite(v), strict_lo: false, strict_hi: false }
    }

    /// `[lo, hi]`; `None` when empty.
    pub fn closed(lo: Extended<S>, hi: Extended<S>) -> Option<Self> {
        Self::new(lo, hi, false, false)
    }

    /// Builds and normalises an interval; `None` when empty.
    pub fn new(lo: Extended<S>, hi: Extended<S>, strict_lo: bool, strict_hi: bool) -> Option<Self> {
        let strict_lo = strict_lo && lo.is_finite();
        let strict_hi = strict_hi && hi.is_finite();
        if lo == Extended::PosInf || hi == Extended::NegInf {
            return None;
        }
        if lo > hi || (lo == hi && (strict_lo || strict_hi)) {
            return None;
        }
        Some(Interval { lo, hi, strict_lo, strict_hi })
    }

    /// Rounds bounds inward for integer variables; `None` when that empties
    /// the interval.
    pub fn normalized(self, sort: Sort) -> Option<Self> {
        if sort == Sort::Rat {
            return Self::new(self.lo, self.hi, self.strict_lo, self.strict_hi);
        }
        let lo = match &self.lo {
            Extended::Finite(v) if self.strict_lo => Extended::Finite(v.floor() + S::one()),
            Extended::Finite(v) => Extended::Finite(v.ceil()),
            other => other.clone(),
        };
        let hi = match &self.hi {
            Extended::Finite(v) if self.strict_hi => Extended::Finite(v.ceil() - S::one()),
            Extended::Finite(v) => Extended::Finite(v.floor()),
            other => other.clone(),
        };
        Self::closed(lo, hi)
    }

    pub fn is_top(&self) -> bool {
        self.lo == Extended::NegInf && self.hi == Extended::PosInf
    }

    pub fn contains(&self, v: &S) -> bool {
        let v = Extended::Finite(v.clone());
        let above = if self.strict_lo { self.lo < v } else { self.lo <= v };
        let below = if self.strict_hi { v < self.hi } else { v <= self.hi };
        above && below
    }

    /// `self ⊇ other`.
    pub fn includes(&self, other: &Self) -> bool {
        lower_looser(&self.lo, self.strict_lo, &other.lo, other.strict_lo)
            && upper_looser(&self.hi, self.strict_hi, &other.hi, other.strict_hi)
    }

    /// Interval hull.
    pub fn join(&self, other: &Self) -> Self {
        let (lo, strict_lo) = if lower_looser(&self.lo, self.strict_lo, &other.lo, other.strict_lo) {
            (self.lo.clone(), self.strict_lo)
        } else {
            (other.lo.clone(), other.strict_lo)
        };
        let (hi, strict_hi) = if upper_looser(&self.hi, self.strict_hi, &other.hi, other.strict_hi) {
            (self.hi.clone(), self.strict_hi)
        } else {
            (other.hi.clone(), other.strict_hi)
        };
        Interval { lo, hi, strict_lo, strict_hi }
    }

    /// Keeps each bound of `self` that `other` does not loosen, and sends
    /// the others to infinity. Returns the number of bounds extrapolated.
    pub fn widen(&self, other: &Self) -> (Self, usize) {
        let mut out = self.clone();
        let mut moved = 0;
        if !lower_looser(&self.lo, self.strict_lo, &other.lo, other.strict_lo) {
            out.lo = Extended::NegInf;
            out.strict_lo = false;
            moved += 1;
        }
        if !upper_looser(&self.hi, self.strict_hi, &other.hi, other.strict_hi) {
            out.hi = Extended::PosInf;
            out.strict_hi = false;
            moved += 1;
        }
        (out, moved)
    }

    /// Intersects with a lower bound; `None` when empty.
    pub fn with_lower(&self, lo: Extended<S>, strict: bool) -> Option<Self> {
        if lower_looser(&lo, strict, &self.lo, self.strict_lo) {
            return Some(self.clone());
        }
        Self::new(lo, self.hi.clone(), strict, self.strict_hi)
    }

    /// Intersects with an upper bound; `None` when empty.
    pub fn with_upper(&self, hi: Extended<S>, strict: bool) -> Option<Self> {
        if upper_looser(&hi, strict, &self.hi, self.strict_hi) {
            return Some(self.clone());
        }
        Self::new(self.lo.clone(), hi, self.strict_lo, strict)
    }

    pub fn meet(&self, other: &Self) -> Option<Self> {
        self.with_lower(other.lo.clone(), other.strict_lo)?.with_upper(other.hi.clone(), other.strict_hi)
    }

    /// Minkowski sum.
    pub fn add(&self, other: &Self) -> Self {
        // -oo + oo cannot occur: lower ends are never +oo, upper never -oo
        Interval {
            lo: self.lo.checked_add(&other.lo).unwrap_or(Extended::NegInf),
            hi: self.hi.checked_add(&other.hi).unwrap_or(Extended::PosInf),
            strict_lo: self.strict_lo || other.strict_lo,
            strict_hi: self.strict_hi || other.strict_hi,
        }
        .fix_infinite()
    }

    pub fn scale(&self, factor: &S) -> Self {
        if factor.is_zero() {
            return Self::point(S::zero());
        }
        if factor.is_positive() {
            Interval {
                lo: self.lo.scale(factor),
                hi: self.hi.scale(factor),
                strict_lo: self.strict_lo,
                strict_hi: self.strict_hi,
            }
        } else {
            Interval {
                lo: self.hi.scale(factor),
                hi: self.lo.scale(factor),
                strict_lo: self.strict_hi,
                strict_hi: self.strict_lo,
            }
        }
    }

    pub fn shift(&self, by: &S) -> Self {
        self.add(&Self::point(by.clone()))
    }

    fn fix_infinite(mut self) -> Self {
        self.strict_lo &= self.lo.is_finite();
        self.strict_hi &= self.hi.is_finite();
        self
    }
}

impl<S: Scalar> fmt::Debug for Interval<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.strict_lo || !self.lo.is_finite() { '(' } else { '[' };
        let close = if self.strict_hi || !self.hi.is_finite() { ')' } else { ']' };
        write!(f, "{open}{}, {}{close}", self.lo, self.hi)
    }
}
