//! Local iteration and acceleration of a single self-loop path.

use std::collections::BTreeMap;

use super::{DomainError, Interval, IntervalBox, IntervalDomain};
use crate::ir::Command;
use crate::numeric::{Extended, LinConstraint, LinExpr, Scalar};
use crate::VarId;

/// Descending steps after the local ascending sequence stabilises.
pub const DESCENDING_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopResult<S: Scalar> {
    pub value: IntervalBox<S>,
    /// Widenings that actually moved a bound.
    pub widenings: usize,
}

/// An over-approximation `X'` of the states reachable from `x0` by iterating
/// `body`, with `x0 ⊆ X'` and `post(X') ⊆ X'`.
pub fn loopiter<S: Scalar>(
    dom: &IntervalDomain<S>,
    body: &[Command<S>],
    x0: &IntervalBox<S>,
) -> Result<LoopResult<S>, DomainError> {
    let step = |z: &IntervalBox<S>| dom.join(z, &dom.post_path(z, body));
    let mut widenings = 0;
    let mut z = step(x0);
    loop {
        let next = step(&z);
        if dom.includes(&z, &next) {
            break;
        }
        let (w, moved) = dom.widen_counting(&z, &next);
        widenings += usize::from(moved > 0);
        z = w;
    }
    for _ in 0..DESCENDING_STEPS {
        let next = dom.join(x0, &dom.post_path(&z, body));
        if next == z || !dom.includes(&z, &next) {
            break;
        }
        z = next;
    }
    if !dom.includes(&z, x0) || !dom.includes(&z, &dom.post_path(&z, body)) {
        return Err(DomainError::PostconditionViolation(format!("{z:?} from {x0:?}")));
    }
    Ok(LoopResult { value: z, widenings })
}

/// A loop body rewritten as `assume guards; x_i := x_i + delta_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation<S: Scalar> {
    pub guards: Vec<LinConstraint<VarId, S>>,
    pub deltas: BTreeMap<VarId, S>,
}

/// Commutes every guard to the front of `body` by substitution; `None`
/// unless the net effect on each variable is a constant translation.
pub fn as_translation<S: Scalar>(body: &[Command<S>]) -> Option<Translation<S>> {
    let mut current: BTreeMap<VarId, LinExpr<VarId, S>> = BTreeMap::new();
    let mut guards = Vec::new();
    for cmd in body {
        match cmd {
            Command::Assume(c) => {
                let expr = c.expr.substitute_all(|v| current.get(&v).cloned());
                guards.push(LinConstraint::new(expr, c.rel));
            }
            Command::Assign { target, rhs } => {
                let value = rhs.substitute_all(|v| current.get(&v).cloned());
                current.insert(*target, value);
            }
            Command::Havoc { .. } => return None,
        }
    }
    let mut deltas = BTreeMap::new();
    for (v, e) in current {
        let delta = e.clone() - LinExpr::var(v);
        if !delta.is_constant() {
            return None;
        }
        if !delta.constant_term().is_zero() {
            deltas.insert(v, delta.constant_term().clone());
        }
    }
    Some(Translation { guards, deltas })
}

/// Acceleration of a guarded translation loop; `None` when `body` is not
/// one or the result fails the loop contract.
pub fn accelerate<S: Scalar>(
    dom: &IntervalDomain<S>,
    body: &[Command<S>],
    x0: &IntervalBox<S>,
) -> Option<IntervalBox<S>> {
    let t = as_translation(body)?;
    let IntervalBox::Value(iv) = x0 else { return Some(IntervalBox::Bottom) };
    let mut extended = iv.clone();
    for (v, delta) in &t.deltas {
        let itv = &extended[v.index()];
        extended[v.index()] = if delta.is_positive() {
            Interval { hi: Extended::PosInf, strict_hi: false, ..itv.clone() }
        } else {
            Interval { lo: Extended::NegInf, strict_lo: false, ..itv.clone() }
        };
    }
    let before_step = dom.propagate(&IntervalBox::Value(extended), &t.guards);
    let result = dom.join(x0, &dom.post_path(&before_step, body));
    dom.includes(&result, &dom.post_path(&result, body)).then_some(result)
}
