//! Exact general simplex for conjunctions of linear constraints.
//!
//! Every constraint with two or more variables gets a slack variable whose
//! row in the tableau is the constraint's linear part; single-variable
//! constraints become bounds directly. Strict bounds are handled with
//! values of the form `r + k*eps` for a symbolic positive `eps`. Pivoting
//! follows Bland's rule, so the procedure terminates.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use crate::numeric::{LinConstraint, Rel, Scalar};

/// `real + delta * eps`, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct DeltaValue<S> {
    real: S,
    delta: S,
}

impl<S: Scalar> DeltaValue<S> {
    fn zero() -> Self {
        DeltaValue { real: S::zero(), delta: S::zero() }
    }

    fn new(real: S, delta: S) -> Self {
        DeltaValue { real, delta }
    }
}

impl<S: Scalar> Add for DeltaValue<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        DeltaValue { real: self.real + o.real, delta: self.delta + o.delta }
    }
}

impl<S: Scalar> Sub for DeltaValue<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        DeltaValue { real: self.real - o.real, delta: self.delta - o.delta }
    }
}

impl<S: Scalar> Mul<&S> for DeltaValue<S> {
    type Output = Self;
    fn mul(self, c: &S) -> Self {
        DeltaValue { real: self.real * c.clone(), delta: self.delta * c.clone() }
    }
}

/// Outcome of a feasibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpResult<S> {
    /// A point satisfying every constraint, one value per variable.
    Sat(Vec<S>),
    /// Indices of an infeasible subset of the input constraints.
    Unsat(Vec<usize>),
}

#[derive(Clone, Debug)]
struct Bound<S> {
    value: DeltaValue<S>,
    origin: usize,
}

struct Tableau<S> {
    /// `rows[r] = (basic var, coefficients over non-basic vars)`.
    rows: Vec<(usize, BTreeMap<usize, S>)>,
    row_of: Vec<Option<usize>>,
    values: Vec<DeltaValue<S>>,
    lower: Vec<Option<Bound<S>>>,
    upper: Vec<Option<Bound<S>>>,
}

impl<S: Scalar> Tableau<S> {
    fn assert_upper(&mut self, v: usize, value: DeltaValue<S>, origin: usize) -> Result<(), Vec<usize>> {
        if let Some(lo) = &self.lower[v] {
            if value < lo.value {
                return Err(vec![origin, lo.origin]);
            }
        }
        if self.upper[v].as_ref().map_or(true, |u| value < u.value) {
            self.upper[v] = Some(Bound { value, origin });
        }
        Ok(())
    }

    fn assert_lower(&mut self, v: usize, value: DeltaValue<S>, origin: usize) -> Result<(), Vec<usize>> {
        if let Some(up) = &self.upper[v] {
            if value > up.value {
                return Err(vec![origin, up.origin]);
            }
        }
        if self.lower[v].as_ref().map_or(true, |l| value > l.value) {
            self.lower[v] = Some(Bound { value, origin });
        }
        Ok(())
    }

    fn below_lower(&self, v: usize) -> bool {
        self.lower[v].as_ref().is_some_and(|l| self.values[v] < l.value)
    }

    fn above_upper(&self, v: usize) -> bool {
        self.upper[v].as_ref().is_some_and(|u| self.values[v] > u.value)
    }

    fn can_increase(&self, v: usize) -> bool {
        self.upper[v].as_ref().map_or(true, |u| self.values[v] < u.value)
    }

    fn can_decrease(&self, v: usize) -> bool {
        self.lower[v].as_ref().map_or(true, |l| self.values[v] > l.value)
    }

    fn update_nonbasic(&mut self, j: usize, value: DeltaValue<S>) {
        let diff = value.clone() - self.values[j].clone();
        for (b, row) in &self.rows {
            if let Some(a) = row.get(&j) {
                self.values[*b] = self.values[*b].clone() + diff.clone() * a;
            }
        }
        self.values[j] = value;
    }

    /// Makes non-basic `j` basic in row `r`, moving basic `i` to `target`.
    fn pivot_and_update(&mut self, r: usize, j: usize, target: DeltaValue<S>) {
        let i = self.rows[r].0;
        let a_ij = self.rows[r].1[&j].clone();
        let theta = (target.clone() - self.values[i].clone()) * &(S::one() / a_ij.clone());
        self.values[i] = target;
        self.values[j] = self.values[j].clone() + theta.clone();
        for (k, (b, row)) in self.rows.iter().enumerate() {
            if k != r {
                if let Some(a) = row.get(&j) {
                    self.values[*b] = self.values[*b].clone() + theta.clone() * a;
                }
            }
        }
        // x_j = (x_i - sum_{k != j} a_ik x_k) / a_ij
        let old = std::mem::take(&mut self.rows[r].1);
        let inv = S::one() / a_ij;
        let mut new_row = BTreeMap::new();
        new_row.insert(i, inv.clone());
        for (k, a) in old {
            if k != j {
                new_row.insert(k, -(a * inv.clone()));
            }
        }
        for (k, (_, row)) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let Some(c) = row.remove(&j) else { continue };
            for (v, a) in &new_row {
                let entry = row.entry(*v).or_insert_with(S::zero);
                *entry = entry.clone() + c.clone() * a.clone();
                if entry.is_zero() {
                    row.remove(v);
                }
            }
        }
        self.rows[r] = (j, new_row);
        self.row_of[i] = None;
        self.row_of[j] = Some(r);
    }

    fn check(&mut self) -> Result<(), Vec<usize>> {
        loop {
            let violated = self
                .rows
                .iter()
                .enumerate()
                .filter(|(_, (b, _))| self.below_lower(*b) || self.above_upper(*b))
                .min_by_key(|(_, (b, _))| *b)
                .map(|(r, (b, _))| (r, *b));
            let Some((r, i)) = violated else { return Ok(()) };
            let increase = self.below_lower(i);
            let row = &self.rows[r].1;
            let entering = row
                .iter()
                .find(|(j, a)| {
                    if increase == a.is_positive() {
                        self.can_increase(**j)
                    } else {
                        self.can_decrease(**j)
                    }
                })
                .map(|(j, _)| *j);
            match entering {
                Some(j) => {
                    let target = if increase {
                        self.lower[i].as_ref().unwrap().value.clone()
                    } else {
                        self.upper[i].as_ref().unwrap().value.clone()
                    };
                    self.pivot_and_update(r, j, target);
                }
                None => {
                    let mut core = Vec::new();
                    if increase {
                        core.push(self.lower[i].as_ref().unwrap().origin);
                    } else {
                        core.push(self.upper[i].as_ref().unwrap().origin);
                    }
                    for (j, a) in row {
                        let bound = if increase == a.is_positive() { &self.upper[*j] } else { &self.lower[*j] };
                        core.push(bound.as_ref().expect("blocking bound").origin);
                    }
                    core.sort_unstable();
                    core.dedup();
                    return Err(core);
                }
            }
        }
    }

    /// A positive rational small enough for every bound to hold.
    fn choose_delta(&self) -> S {
        let mut delta = S::one();
        for (v, value) in self.values.iter().enumerate() {
            let mut tighten = |lo: &DeltaValue<S>, hi: &DeltaValue<S>| {
                // need lo.real + lo.delta*d <= hi.real + hi.delta*d
                if lo.real < hi.real && lo.delta > hi.delta {
                    let d = (hi.real.clone() - lo.real.clone()) / (lo.delta.clone() - hi.delta.clone());
                    if d < delta {
                        delta = d;
                    }
                }
            };
            if let Some(l) = &self.lower[v] {
                tighten(&l.value, value);
            }
            if let Some(u) = &self.upper[v] {
                tighten(value, &u.value);
            }
        }
        delta
    }
}

/// Decides feasibility of a conjunction over variables `0..num_vars`.
pub fn check<S: Scalar>(num_vars: usize, cs: &[LinConstraint<usize, S>]) -> LpResult<S> {
    let mut t = Tableau {
        rows: Vec::new(),
        row_of: vec![None; num_vars],
        values: vec![DeltaValue::zero(); num_vars],
        lower: vec![None; num_vars],
        upper: vec![None; num_vars],
    };
    let mut slack_of: BTreeMap<Vec<(usize, S)>, usize> = BTreeMap::new();
    for (i, c) in cs.iter().enumerate() {
        let k = c.expr.constant_term().clone();
        let strict = c.rel == Rel::Lt;
        let terms: Vec<(usize, S)> = c.expr.terms().map(|(v, a)| (v, a.clone())).collect();
        if terms.is_empty() {
            if !c.holds_at(&k) {
                return LpResult::Unsat(vec![i]);
            }
            continue;
        }
        // a*v REL -k  (single variable)  or  slack REL -k
        let (var, scale) = if terms.len() == 1 {
            (terms[0].0, terms[0].1.clone())
        } else {
            let key = terms.clone();
            let var = *slack_of.entry(key).or_insert_with(|| {
                let s = t.values.len();
                let row: BTreeMap<usize, S> = terms.iter().cloned().collect();
                t.values.push(DeltaValue::zero());
                t.lower.push(None);
                t.upper.push(None);
                t.row_of.push(Some(t.rows.len()));
                t.rows.push((s, row));
                s
            });
            (var, S::one())
        };
        let bound = -k / scale.clone();
        let eps = if strict { S::one() } else { S::zero() };
        let result = match (c.rel, scale.is_positive()) {
            (Rel::Eq, _) => t
                .assert_upper(var, DeltaValue::new(bound.clone(), S::zero()), i)
                .and_then(|_| t.assert_lower(var, DeltaValue::new(bound, S::zero()), i)),
            (_, true) => t.assert_upper(var, DeltaValue::new(bound, -eps), i),
            (_, false) => t.assert_lower(var, DeltaValue::new(bound, eps), i),
        };
        if let Err(core) = result {
            return LpResult::Unsat(core);
        }
    }
    // rows may reference slacks only via original variables, all non-basic
    for v in 0..num_vars {
        if let Some(l) = &t.lower[v] {
            if t.values[v] < l.value {
                let value = l.value.clone();
                t.update_nonbasic(v, value);
            }
        }
        if let Some(u) = &t.upper[v] {
            if t.values[v] > u.value {
                let value = u.value.clone();
                t.update_nonbasic(v, value);
            }
        }
    }
    if let Err(core) = t.check() {
        return LpResult::Unsat(core);
    }
    let delta = t.choose_delta();
    let point: Vec<S> = t.values[..num_vars]
        .iter()
        .map(|v| v.real.clone() + v.delta.clone() * delta.clone())
        .collect();
    for c in cs {
        assert!(
            c.holds_with(|v| point.get(v).cloned()).expect("point is total"),
            "simplex produced a point violating {c:?}"
        );
    }
    LpResult::Sat(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LinExpr;
    use crate::{rat, Rat};

    type E = LinExpr<usize, Rat>;
    type C = LinConstraint<usize, Rat>;

    fn k(n: i64) -> E {
        E::constant(rat(n, 1))
    }

    #[test]
    fn examples() {
        let cs = vec![C::le(E::var(0), k(1)), C::le(-E::var(0), k(-1))];
        assert_eq!(check(1, &cs), LpResult::Sat(vec![rat(1, 1)]));
        let cs = vec![C::lt(E::var(0), k(0)), C::lt(-E::var(0), k(0))];
        assert!(matches!(check(1, &cs), LpResult::Unsat(_)));
        let cs = vec![
            C::le(E::var(0) + E::var(1), k(2)),
            C::le(E::var(0) - E::var(1), k(0)),
            C::le(-E::var(0), k(0)),
        ];
        let LpResult::Sat(p) = check(2, &cs) else { panic!() };
        assert!(p[0] >= rat(0, 1) && p[0] <= rat(1, 1));
        assert!(p[0] <= p[1] && p[1] <= rat(2, 1) - p[0].clone());
    }

    #[test]
    fn strict_bounds_hold_strictly() {
        // 0 < x + y < 1/1000, x > y
        let cs = vec![
            C::gt(E::var(0) + E::var(1), k(0)),
            C::lt(E::var(0) + E::var(1), E::constant(rat(1, 1000))),
            C::gt(E::var(0), E::var(1)),
        ];
        let LpResult::Sat(p) = check(2, &cs) else { panic!() };
        let s = p[0].clone() + p[1].clone();
        assert!(s > rat(0, 1) && s < rat(1, 1000) && p[0] > p[1]);
    }

    #[test]
    fn core_is_infeasible_subset() {
        let cs = vec![
            C::le(E::var(2), k(5)),
            C::ge(E::var(0) + E::var(1), k(3)),
            C::le(E::var(0), k(1)),
            C::le(E::var(1), k(1)),
        ];
        let LpResult::Unsat(core) = check(3, &cs) else { panic!() };
        assert_eq!(core, vec![1, 2, 3]);
    }
}
