//! Numeric invariant generation for control-flow graphs.
//!
//! Abstract interpretation over interval boxes, where each fixpoint step is
//! focused on a single feasible path between abstraction points. Paths are
//! found by bounded model checking: the loop-free "disconnected" graph is
//! encoded as one SMT formula, and every model of a reachability query names
//! exactly one path. Classical worklist iteration is available as a baseline.
//!
//! The numeric kernel, the interval domain and the simplex core are generic
//! over an exact [`Scalar`]; the aliases below fix the instantiation the
//! analysis uses.

pub mod domain;
pub mod encode;
pub mod engine;
pub mod ir;
pub mod numeric;
pub mod report;
pub mod smt;

pub use numeric::{Scalar, Sort, VarId};

/// Arbitrary-precision rational.
pub type Rat = num_rational::BigRational;
/// Rational extended with `-oo` and `+oo`.
pub type ExtRat = numeric::Extended<Rat>;
/// Affine expression over program variables.
pub type Expr = numeric::LinExpr<VarId, Rat>;
/// Linear constraint over program variables.
pub type Constraint = numeric::LinConstraint<VarId, Rat>;
/// Rational interval.
pub type RatInterval = domain::Interval<Rat>;
/// Box of rational intervals, one per program variable.
pub type RatBox = domain::IntervalBox<Rat>;

/// Convenience constructor for small rational literals.
pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(numer.into(), denom.into())
}
