//! Interval boxes with exact bounds, and the abstract transformers over them.

mod interval;
mod loops;

use std::fmt;

use thiserror::Error;

use crate::ir::Command;
use crate::numeric::{Extended, LinConstraint, LinExpr, Rel, Scalar};
use crate::{Sort, VarId};

pub use interval::Interval;
pub use loops::{accelerate, loopiter, LoopResult};

/// Round cap for [`IntervalDomain::propagate`].
pub const PROPAGATION_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("loop iteration result violates its contract: {0}")]
    PostconditionViolation(String),
}

/// An abstract value: empty, or one interval per program variable.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum IntervalBox<S> {
    Bottom,
    Value(Vec<Interval<S>>),
}

impl<S: Scalar> IntervalBox<S> {
    pub fn is_bottom(&self) -> bool {
        matches!(self, IntervalBox::Bottom)
    }

    pub fn intervals(&self) -> Option<&[Interval<S>]> {
        match self {
            IntervalBox::Bottom => None,
            IntervalBox::Value(v) => Some(v),
        }
    }

    pub fn get(&self, v: VarId) -> Option<&Interval<S>> {
        self.intervals().map(|iv| &iv[v.index()])
    }

    pub fn contains_point(&self, point: &[S]) -> bool {
        match self {
            IntervalBox::Bottom => false,
            IntervalBox::Value(iv) => iv.iter().zip(point).all(|(i, x)| i.contains(x)),
        }
    }

    /// One constraint per finite bound, lower before upper, in variable order.
    /// `None` for the empty box.
    pub fn to_constraints(&self) -> Option<Vec<LinConstraint<VarId, S>>> {
        let iv = self.intervals()?;
        let mut out = Vec::new();
        for (i, itv) in iv.iter().enumerate() {
            let x = LinExpr::var(VarId(i as u32));
            if let Extended::Finite(lo) = &itv.lo {
                let c = LinExpr::constant(lo.clone()) - x.clone();
                out.push(LinConstraint::new(c, if itv.strict_lo { Rel::Lt } else { Rel::Le }));
            }
            if let Extended::Finite(hi) = &itv.hi {
                let c = x - LinExpr::constant(hi.clone());
                out.push(LinConstraint::new(c, if itv.strict_hi { Rel::Lt } else { Rel::Le }));
            }
        }
        Some(out)
    }
}

impl<S: Scalar> fmt::Debug for IntervalBox<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalBox::Bottom => write!(f, "bottom"),
            IntervalBox::Value(iv) => f.debug_list().entries(iv).finish(),
        }
    }
}

/// The operations a fixpoint engine needs from an abstract domain.
pub trait AbstractDomain {
    type Value: Clone + PartialEq + fmt::Debug;
    type Command;

    fn top(&self) -> Self::Value;
    fn bottom(&self) -> Self::Value;
    /// `a ⊇ b`.
    fn includes(&self, a: &Self::Value, b: &Self::Value) -> bool;
    fn join(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn widen(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn post(&self, a: &Self::Value, path: &[Self::Command]) -> Self::Value;
}

/// Interval boxes over a fixed list of variable sorts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalDomain<S> {
    sorts: Vec<Sort>,
    _scalar: std::marker::PhantomData<S>,
}

impl<S: Scalar> IntervalDomain<S> {
    pub fn new(sorts: Vec<Sort>) -> Self {
        IntervalDomain { sorts, _scalar: std::marker::PhantomData }
    }

    pub fn sorts(&self) -> &[Sort] {
        &self.sorts
    }

    pub fn dims(&self) -> usize {
        self.sorts.len()
    }

    pub fn top(&self) -> IntervalBox<S> {
        IntervalBox::Value(vec![Interval::top(); self.dims()])
    }

    pub fn bottom(&self) -> IntervalBox<S> {
        IntervalBox::Bottom
    }

    /// Normalises every interval by its variable's sort.
    pub fn normalize(&self, intervals: Vec<Interval<S>>) -> IntervalBox<S> {
        let mut out = Vec::with_capacity(intervals.len());
        for (itv, sort) in intervals.into_iter().zip(&self.sorts) {
            match itv.normalized(*sort) {
                Some(i) => out.push(i),
                None => return IntervalBox::Bottom,
            }
        }
        IntervalBox::Value(out)
    }

    /// The box `{point}`.
    pub fn point(&self, point: &[S]) -> IntervalBox<S> {
        IntervalBox::Value(point.iter().cloned().map(Interval::point).collect())
    }

    /// Over-approximation of a conjunction of constraints.
    pub fn from_constraints(&self, cs: &[LinConstraint<VarId, S>]) -> IntervalBox<S> {
        self.propagate(&self.top(), cs)
    }

    pub fn includes(&self, a: &IntervalBox<S>, b: &IntervalBox<S>) -> bool {
        match (a, b) {
            (_, IntervalBox::Bottom) => true,
            (IntervalBox::Bottom, _) => false,
            (IntervalBox::Value(x), IntervalBox::Value(y)) => x.iter().zip(y).all(|(i, j)| i.includes(j)),
        }
    }

    pub fn join(&self, a: &IntervalBox<S>, b: &IntervalBox<S>) -> IntervalBox<S> {
        match (a, b) {
            (IntervalBox::Bottom, other) | (other, IntervalBox::Bottom) => other.clone(),
            (IntervalBox::Value(x), IntervalBox::Value(y)) => {
                IntervalBox::Value(x.iter().zip(y).map(|(i, j)| i.join(j)).collect())
            }
        }
    }

    pub fn widen(&self, a: &IntervalBox<S>, b: &IntervalBox<S>) -> IntervalBox<S> {
        self.widen_counting(a, b).0
    }

    /// Widening that also reports how many bounds were sent to infinity.
    pub fn widen_counting(&self, a: &IntervalBox<S>, b: &IntervalBox<S>) -> (IntervalBox<S>, usize) {
        match (a, b) {
            (IntervalBox::Bottom, other) => (other.clone(), 0),
            (other, IntervalBox::Bottom) => (other.clone(), 0),
            (IntervalBox::Value(x), IntervalBox::Value(y)) => {
                let mut moved = 0;
                let iv = x
                    .iter()
                    .zip(y)
                    .map(|(i, j)| {
                        let (w, m) = i.widen(j);
                        moved += m;
                        w
                    })
                    .collect();
                (IntervalBox::Value(iv), moved)
            }
        }
    }

    /// Interval evaluation of an affine expression. `None` on the empty box.
    pub fn eval(&self, b: &IntervalBox<S>, e: &LinExpr<VarId, S>) -> Option<Interval<S>> {
        let iv = b.intervals()?;
        let mut acc = Interval::point(e.constant_term().clone());
        for (v, c) in e.terms() {
            acc = acc.add(&iv[v.index()].scale(c));
        }
        Some(acc)
    }

    /// One bound-tightening pass of `c` over `b`.
    pub fn meet_constraint(&self, b: &IntervalBox<S>, c: &LinConstraint<VarId, S>) -> IntervalBox<S> {
        match c.rel {
            Rel::Eq => {
                let le = LinConstraint::new(c.expr.clone(), Rel::Le);
                let ge = LinConstraint::new(-c.expr.clone(), Rel::Le);
                let once = self.meet_inequality(b, &le);
                self.meet_inequality(&once, &ge)
            }
            _ => self.meet_inequality(b, c),
        }
    }

    fn meet_inequality(&self, b: &IntervalBox<S>, c: &LinConstraint<VarId, S>) -> IntervalBox<S> {
        let IntervalBox::Value(iv) = b else { return IntervalBox::Bottom };
        let strict = c.rel == Rel::Lt;
        if c.expr.is_constant() {
            return if c.holds_at(c.expr.constant_term()) { b.clone() } else { IntervalBox::Bottom };
        }
        let mut iv = iv.clone();
        let terms: Vec<(VarId, S)> = c.expr.terms().map(|(v, s)| (v, s.clone())).collect();
        for (v, a) in &terms {
            // a*v + rest REL 0  =>  a*v REL -min(rest)
            let mut rest_lo = Extended::Finite(c.expr.constant_term().clone());
            let mut rest_strict = false;
            for (w, bw) in &terms {
                if w == v {
                    continue;
                }
                let s = iv[w.index()].scale(bw);
                rest_lo = rest_lo.checked_add(&s.lo).unwrap_or(Extended::NegInf);
                rest_strict |= s.strict_lo;
            }
            let Extended::Finite(rest_lo) = rest_lo else { continue };
            let bound = Extended::Finite(-rest_lo / a.clone());
            let strict = strict || rest_strict;
            let current = &iv[v.index()];
            let tightened = if a.is_positive() {
                current.with_upper(bound, strict)
            } else {
                current.with_lower(bound, strict)
            };
            match tightened.and_then(|t| t.normalized(self.sorts[v.index()])) {
                Some(t) => iv[v.index()] = t,
                None => return IntervalBox::Bottom,
            }
        }
        IntervalBox::Value(iv)
    }

    /// Round-robin tightening until stable or [`PROPAGATION_ROUNDS`] rounds.
    pub fn propagate(&self, b: &IntervalBox<S>, cs: &[LinConstraint<VarId, S>]) -> IntervalBox<S> {
        let mut cur = b.clone();
        for _ in 0..PROPAGATION_ROUNDS {
            let before = cur.clone();
            for c in cs {
                cur = self.meet_constraint(&cur, c);
                if cur.is_bottom() {
                    return cur;
                }
            }
            if cur == before {
                break;
            }
        }
        cur
    }

    pub fn post_command(&self, b: &IntervalBox<S>, cmd: &Command<S>) -> IntervalBox<S> {
        let IntervalBox::Value(iv) = b else { return IntervalBox::Bottom };
        match cmd {
            Command::Assume(c) => self.meet_constraint(b, c),
            Command::Assign { target, rhs } => {
                let value = self.eval(b, rhs).expect("non-empty box");
                let mut iv = iv.clone();
                iv[target.index()] = value;
                self.normalize(iv)
            }
            Command::Havoc { target, lo, hi, strict_lo, strict_hi } => {
                let Some(value) = Interval::new(lo.clone(), hi.clone(), *strict_lo, *strict_hi) else {
                    return IntervalBox::Bottom;
                };
                let mut iv = iv.clone();
                iv[target.index()] = value;
                self.normalize(iv)
            }
        }
    }

    /// Abstract post of a command sequence. Guards whose variables are not
    /// overwritten later in the sequence are re-applied at the end.
    pub fn post_path(&self, b: &IntervalBox<S>, body: &[Command<S>]) -> IntervalBox<S> {
        let mut cur = b.clone();
        for cmd in body {
            cur = self.post_command(&cur, cmd);
            if cur.is_bottom() {
                return cur;
            }
        }
        let stable: Vec<LinConstraint<VarId, S>> = body
            .iter()
            .enumerate()
            .filter_map(|(i, cmd)| match cmd {
                Command::Assume(c) => {
                    let vars = c.vars();
                    let clobbered = body[i + 1..].iter().any(|later| later.written().is_some_and(|w| vars.contains(&w)));
                    (!clobbered).then(|| c.clone())
                }
                _ => None,
            })
            .collect();
        if !stable.is_empty() {
            cur = self.propagate(&cur, &stable);
        }
        cur
    }
}

impl<S: Scalar> AbstractDomain for IntervalDomain<S> {
    type Value = IntervalBox<S>;
    type Command = Command<S>;

    fn top(&self) -> IntervalBox<S> {
        IntervalDomain::top(self)
    }

    fn bottom(&self) -> IntervalBox<S> {
        IntervalBox::Bottom
    }

    fn includes(&self, a: &IntervalBox<S>, b: &IntervalBox<S>) -> bool {
        IntervalDomain::includes(self, a, b)
    }

    fn join(&self, a: &IntervalBox<S>, b: &IntervalBox<S>) -> IntervalBox<S> {
        IntervalDomain::join(self, a, b)
    }

    fn widen(&self, a: &IntervalBox<S>, b: &IntervalBox<S>) -> IntervalBox<S> {
        IntervalDomain::widen(self, a, b)
    }

    fn post(&self, a: &IntervalBox<S>, path: &[Command<S>]) -> IntervalBox<S> {
        self.post_path(a, path)
    }
}
