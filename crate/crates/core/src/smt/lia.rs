//! Branch and bound over the simplex relaxation for integer variables.

use super::simplex::{self, LpResult};
use crate::numeric::{gcd, LinConstraint, LinExpr, Rel, Scalar};

/// Nodes explored before giving up.
pub const NODE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiaResult<S> {
    Sat(Vec<S>),
    /// Indices of an infeasible subset of the input.
    Unsat(Vec<usize>),
    Unknown,
}

/// Strengthens constraints whose variables are all integers: strict
/// inequalities become non-strict, coefficients become coprime integers and
/// the constant is rounded. `Err(i)` when constraint `i` alone has no
/// integer solution.
pub fn tighten<S: Scalar>(cs: &[LinConstraint<usize, S>], is_int: &[bool]) -> Result<Vec<LinConstraint<usize, S>>, usize> {
    let mut out = Vec::with_capacity(cs.len());
    for (i, c) in cs.iter().enumerate() {
        if c.expr.is_constant() || !c.expr.vars().all(|v| is_int[v]) {
            out.push(c.clone());
            continue;
        }
        let c = c.tightened_for_integers().scaled_to_integers();
        let mut g = S::zero();
        for (_, a) in c.expr.terms() {
            g = gcd(&g, a);
        }
        let k = c.expr.constant_term().clone() / g.clone();
        let terms = c.expr.terms().map(|(v, a)| (v, a.clone() / g.clone()));
        let tightened = match c.rel {
            Rel::Eq if !k.is_integral() => return Err(i),
            Rel::Eq => LinConstraint::new(LinExpr::from_terms(terms, k), Rel::Eq),
            _ => LinConstraint::new(LinExpr::from_terms(terms, k.ceil()), Rel::Le),
        };
        out.push(tightened);
    }
    Ok(out)
}

enum Search<S> {
    Sat(Vec<S>),
    Unsat,
    Unknown,
}

struct BranchAndBound<'a, S> {
    num_vars: usize,
    is_int: &'a [bool],
    max_depth: usize,
    nodes: usize,
    _s: std::marker::PhantomData<S>,
}

impl<S: Scalar> BranchAndBound<'_, S> {
    fn search(&mut self, cs: &mut Vec<LinConstraint<usize, S>>, depth: usize) -> Search<S> {
        self.nodes += 1;
        if self.nodes > NODE_LIMIT {
            return Search::Unknown;
        }
        let point = match simplex::check(self.num_vars, cs) {
            LpResult::Unsat(_) => return Search::Unsat,
            LpResult::Sat(p) => p,
        };
        let Some(v) = (0..self.num_vars).find(|&v| self.is_int[v] && !point[v].is_integral()) else {
            return Search::Sat(point);
        };
        if depth >= self.max_depth {
            return Search::Unknown;
        }
        let mut unknown = false;
        let x = LinExpr::var(v);
        let branches = [
            LinConstraint::le(x.clone(), LinExpr::constant(point[v].floor())),
            LinConstraint::ge(x, LinExpr::constant(point[v].ceil())),
        ];
        for b in branches {
            cs.push(b);
            let r = self.search(cs, depth + 1);
            cs.pop();
            match r {
                Search::Sat(p) => return Search::Sat(p),
                Search::Unknown => unknown = true,
                Search::Unsat => {}
            }
        }
        if unknown {
            Search::Unknown
        } else {
            Search::Unsat
        }
    }
}

fn branch_and_bound<S: Scalar>(num_vars: usize, cs: &[LinConstraint<usize, S>], is_int: &[bool]) -> Search<S> {
    let int_count = is_int.iter().filter(|b| **b).count();
    let mut bb = BranchAndBound {
        num_vars,
        is_int,
        max_depth: 10 * int_count.max(1),
        nodes: 0,
        _s: std::marker::PhantomData,
    };
    bb.search(&mut cs.to_vec(), 0)
}

/// Decides integer feasibility of a conjunction; `is_int[v]` marks the
/// integer-valued variables.
pub fn check<S: Scalar>(num_vars: usize, cs: &[LinConstraint<usize, S>], is_int: &[bool]) -> LiaResult<S> {
    let tightened = match tighten(cs, is_int) {
        Ok(t) => t,
        Err(i) => return LiaResult::Unsat(vec![i]),
    };
    if let LpResult::Unsat(core) = simplex::check(num_vars, &tightened) {
        return LiaResult::Unsat(core);
    }
    match branch_and_bound(num_vars, &tightened, is_int) {
        Search::Sat(p) => LiaResult::Sat(p),
        Search::Unknown => LiaResult::Unknown,
        Search::Unsat => LiaResult::Unsat(minimize_core(num_vars, &tightened, is_int)),
    }
}

/// Deletion-based core shrinking; constraints whose removal makes the
/// search inconclusive are kept.
fn minimize_core<S: Scalar>(num_vars: usize, cs: &[LinConstraint<usize, S>], is_int: &[bool]) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..cs.len()).collect();
    if cs.len() > 40 {
        return keep;
    }
    let mut i = 0;
    while i < keep.len() {
        let trial: Vec<LinConstraint<usize, S>> =
            keep.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &c)| cs[c].clone()).collect();
        if matches!(branch_and_bound(num_vars, &trial, is_int), Search::Unsat) {
            keep.remove(i);
        } else {
            i += 1;
        }
    }
    keep
}
