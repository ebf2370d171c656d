use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use super::scalar::{common_denominator, gcd};
use super::{NumericError, Scalar};

/// An affine expression `sum(c_i * v_i) + constant`.
///
/// Zero coefficients are never stored, so structural equality is semantic
/// equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinExpr<V: Ord, S> {
    coeffs: BTreeMap<V, S>,
    constant: S,
}

impl<V: Ord + Copy + fmt::Debug, S: Scalar> LinExpr<V, S> {
    pub fn zero() -> Self {
        LinExpr { coeffs: BTreeMap::new(), constant: S::zero() }
    }

    pub fn constant(value: S) -> Self {
        LinExpr { coeffs: BTreeMap::new(), constant: value }
    }

    pub fn var(v: V) -> Self {
        Self::term(S::one(), v)
    }

    pub fn term(coeff: S, v: V) -> Self {
        let mut e = Self::zero();
        e.add_term(v, coeff);
        e
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (V, S)>, constant: S) -> Self {
        let mut e = Self::constant(constant);
        for (v, c) in terms {
            e.add_term(v, c);
        }
        e
    }

    pub fn add_term(&mut self, v: V, coeff: S) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(v).or_insert_with(S::zero);
        *entry = entry.clone() + coeff;
        if entry.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    pub fn add_constant(&mut self, value: &S) {
        self.constant = self.constant.clone() + value.clone();
    }

    pub fn coeff(&self, v: V) -> S {
        self.coeffs.get(&v).cloned().unwrap_or_else(S::zero)
    }

    pub fn constant_term(&self) -> &S {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (V, &S)> + '_ {
        self.coeffs.iter().map(|(v, c)| (*v, c))
    }

    pub fn vars(&self) -> impl Iterator<Item = V> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn mentions(&self, v: V) -> bool {
        self.coeffs.contains_key(&v)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn scaled(&self, factor: &S) -> Self {
        if factor.is_zero() {
            return Self::zero();
        }
        LinExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (*v, c.clone() * factor.clone())).collect(),
            constant: self.constant.clone() * factor.clone(),
        }
    }

    /// Exact evaluation; fails on the first variable `env` does not bind.
    pub fn eval_with(&self, mut env: impl FnMut(V) -> Option<S>) -> Result<S, NumericError> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            let value = env(*v).ok_or_else(|| NumericError::UnboundVariable(format!("{v:?}")))?;
            acc = acc + c.clone() * value;
        }
        Ok(acc)
    }

    pub fn eval(&self, env: &BTreeMap<V, S>) -> Result<S, NumericError> {
        self.eval_with(|v| env.get(&v).cloned())
    }

    /// Replaces `v` by `replacement` and re-normalises.
    pub fn substitute(&self, v: V, replacement: &LinExpr<V, S>) -> Self {
        let Some(c) = self.coeffs.get(&v) else {
            return self.clone();
        };
        let mut out = self.clone();
        out.coeffs.remove(&v);
        out + replacement.scaled(c)
    }

    /// Substitutes every variable at once (`None` keeps the variable).
    pub fn substitute_all(&self, mut map: impl FnMut(V) -> Option<LinExpr<V, S>>) -> Self {
        let mut out = Self::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            match map(*v) {
                Some(r) => out = out + r.scaled(c),
                None => out.add_term(*v, c.clone()),
            }
        }
        out
    }

    /// Renames variables into another key space.
    pub fn map_vars<W: Ord + Copy + fmt::Debug>(&self, mut f: impl FnMut(V) -> W) -> LinExpr<W, S> {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            out.add_term(f(*v), c.clone());
        }
        out
    }

    /// Every coefficient and the constant are integers.
    pub fn is_integral(&self) -> bool {
        self.constant.is_integral() && self.coeffs.values().all(Scalar::is_integral)
    }
}

impl<V: Ord + Copy + fmt::Debug, S: Scalar> Add for LinExpr<V, S> {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        for (v, c) in rhs.coeffs {
            self.add_term(v, c);
        }
        self.constant = self.constant + rhs.constant;
        self
    }
}

impl<V: Ord + Copy + fmt::Debug, S: Scalar> Sub for LinExpr<V, S> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<V: Ord + Copy + fmt::Debug, S: Scalar> Neg for LinExpr<V, S> {
    type Output = Self;

    fn neg(self) -> Self {
        self.scaled(&-S::one())
    }
}

impl<V: Ord + fmt::Debug, S: fmt::Display + num_traits::Zero + num_traits::Signed> fmt::Debug
    for LinExpr<V, S>
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*{v:?}")?;
        }
        if first || !self.constant.is_zero() {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "{}", self.constant)?;
        }
        Ok(())
    }
}

/// Relation of a constraint against zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    /// `expr <= 0`
    Le,
    /// `expr < 0`
    Lt,
    /// `expr = 0`
    Eq,
}

/// A linear constraint in canonical form `expr REL 0`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinConstraint<V: Ord, S> {
    pub expr: LinExpr<V, S>,
    pub rel: Rel,
}

impl<V: Ord + Copy + fmt::Debug, S: Scalar> LinConstraint<V, S> {
    pub fn new(expr: LinExpr<V, S>, rel: Rel) -> Self {
        LinConstraint { expr, rel }
    }

    /// `lhs <= rhs`
    pub fn le(lhs: LinExpr<V, S>, rhs: LinExpr<V, S>) -> Self {
        Self::new(lhs - rhs, Rel::Le)
    }

    /// `lhs < rhs`
    pub fn lt(lhs: LinExpr<V, S>, rhs: LinExpr<V, S>) -> Self {
        Self::new(lhs - rhs, Rel::Lt)
    }

    /// `lhs >= rhs`
    pub fn ge(lhs: LinExpr<V, S>, rhs: LinExpr<V, S>) -> Self {
        Self::new(rhs - lhs, Rel::Le)
    }

    /// `lhs > rhs`
    pub fn gt(lhs: LinExpr<V, S>, rhs: LinExpr<V, S>) -> Self {
        Self::new(rhs - lhs, Rel::Lt)
    }

    /// `lhs = rhs`
    pub fn eq(lhs: LinExpr<V, S>, rhs: LinExpr<V, S>) -> Self {
        Self::new(lhs - rhs, Rel::Eq)
    }

    pub fn holds_at(&self, value: &S) -> bool {
        match self.rel {
            Rel::Le => !value.is_positive(),
            Rel::Lt => value.is_negative(),
            Rel::Eq => value.is_zero(),
        }
    }

    pub fn holds_with(&self, env: impl FnMut(V) -> Option<S>) -> Result<bool, NumericError> {
        Ok(self.holds_at(&self.expr.eval_with(env)?))
    }

    pub fn holds(&self, env: &BTreeMap<V, S>) -> Result<bool, NumericError> {
        self.holds_with(|v| env.get(&v).cloned())
    }

    /// The complement as a disjunction: one constraint for `<=`/`<`, two for `=`.
    pub fn negate(&self) -> Vec<Self> {
        let flipped = -self.expr.clone();
        match self.rel {
            Rel::Le => vec![Self::new(flipped, Rel::Lt)],
            Rel::Lt => vec![Self::new(flipped, Rel::Le)],
            Rel::Eq => vec![Self::new(self.expr.clone(), Rel::Lt), Self::new(flipped, Rel::Lt)],
        }
    }

    pub fn substitute(&self, v: V, replacement: &LinExpr<V, S>) -> Self {
        Self::new(self.expr.substitute(v, replacement), self.rel)
    }

    pub fn map_vars<W: Ord + Copy + fmt::Debug>(&self, f: impl FnMut(V) -> W) -> LinConstraint<W, S> {
        LinConstraint::new(self.expr.map_vars(f), self.rel)
    }

    pub fn vars(&self) -> BTreeSet<V> {
        self.expr.vars().collect()
    }

    /// Multiplies through by a positive factor so that every coefficient and
    /// the constant are integers with no common divisor.
    pub fn scaled_to_integers(&self) -> Self {
        let scale = common_denominator(
            self.expr.terms().map(|(_, c)| c).chain(std::iter::once(self.expr.constant_term())),
        );
        let scaled = self.expr.scaled(&scale);
        let mut g = scaled.constant_term().abs();
        for (_, c) in scaled.terms() {
            g = gcd(&g, c);
        }
        if g.is_zero() || g.is_one() {
            Self::new(scaled, self.rel)
        } else {
            Self::new(scaled.scaled(&(S::one() / g)), self.rel)
        }
    }

    /// Rewrites the constraint for integer-valued variables: strict
    /// inequalities become `e + 1 <= 0` after scaling to integer
    /// coefficients. Only sound when every variable ranges over integers.
    pub fn tightened_for_integers(&self) -> Self {
        match self.rel {
            Rel::Lt => {
                let scaled = self.scaled_to_integers();
                let mut expr = scaled.expr;
                expr.add_constant(&S::one());
                Self::new(expr, Rel::Le)
            }
            _ => self.clone(),
        }
    }
}

impl<V: Ord + fmt::Debug, S: fmt::Display + num_traits::Zero + num_traits::Signed> fmt::Debug
    for LinConstraint<V, S>
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.rel {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
        };
        write!(f, "{:?} {rel} 0", self.expr)
    }
}
