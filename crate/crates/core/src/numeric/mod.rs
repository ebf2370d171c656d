//! Exact numeric kernel: scalars, extended scalars, affine expressions and
//! linear constraints.

mod extended;
mod linear;
mod scalar;

use std::fmt;

use thiserror::Error;

pub use extended::Extended;
pub use linear::{LinConstraint, LinExpr, Rel};
pub use scalar::{common_denominator, gcd, parse_rat, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
}

/// Index of a program variable; dense `0..n` within one program.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Value sort of a numeric variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Int,
    Rat,
}
