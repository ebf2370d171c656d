//! Lazy DPLL(T): CDCL over the Tseitin skeleton, with each boolean model's
//! justifying atoms checked by simplex (and branch and bound when integer
//! variables are involved). Theory conflicts come back as blocking clauses
//! built from the infeasible subset.

use std::collections::BTreeMap;

use super::formula::{Atom, Formula, Model, NumVarId, Signature, SolveResult};
use super::sat::{lit, negate, Lit, SatOutcome, SatSolver};
use super::{lia, simplex};
use crate::numeric::{LinConstraint, Rel};
use crate::{Rat, Sort};

/// Default step budget (decisions, conflicts and theory checks).
pub const DEFAULT_BUDGET: u64 = 2_000_000;

/// Atom in canonical form: leading coefficient `+1`, relation `<=` or `<`.
type CanonAtom = LinConstraint<NumVarId, Rat>;

/// Returns the canonical atom and whether `a` is equivalent to it (as
/// opposed to its negation). Equalities are not accepted here.
fn canonicalize(a: &Atom) -> (CanonAtom, bool) {
    let lead = a.expr.terms().next().map(|(_, c)| c.clone()).expect("non-constant atom");
    let scale = Rat::from_integer(1.into()) / num_traits::Signed::abs(&lead);
    let scaled = a.expr.scaled(&scale);
    if num_traits::Signed::is_positive(&lead) {
        (LinConstraint::new(scaled, a.rel), true)
    } else {
        // e <= 0  <=>  not(-e < 0);   e < 0  <=>  not(-e <= 0)
        let flipped = match a.rel {
            Rel::Le => Rel::Lt,
            Rel::Lt => Rel::Le,
            Rel::Eq => unreachable!("equalities are split before canonicalisation"),
        };
        (LinConstraint::new(-scaled, flipped), false)
    }
}

struct Encoder {
    num_bools: usize,
    next_var: usize,
    clauses: Vec<Vec<Lit>>,
    atoms: BTreeMap<CanonAtom, usize>,
    true_var: Option<usize>,
}

impl Encoder {
    fn fresh(&mut self) -> usize {
        self.next_var += 1;
        self.next_var - 1
    }

    fn constant(&mut self, value: bool) -> Lit {
        let v = match self.true_var {
            Some(v) => v,
            None => {
                let v = self.fresh();
                self.clauses.push(vec![lit(v, true)]);
                self.true_var = Some(v);
                v
            }
        };
        lit(v, value)
    }

    fn atom_lit(&mut self, a: &Atom) -> Lit {
        if a.expr.is_constant() {
            return self.constant(a.holds_at(a.expr.constant_term()));
        }
        if a.rel == Rel::Eq {
            let le = Formula::Atom(LinConstraint::new(a.expr.clone(), Rel::Le));
            let ge = Formula::Atom(LinConstraint::new(-a.expr.clone(), Rel::Le));
            return self.encode(&Formula::And(vec![le, ge]));
        }
        let (canon, positive) = canonicalize(a);
        let v = match self.atoms.get(&canon) {
            Some(v) => *v,
            None => {
                let v = self.fresh();
                self.atoms.insert(canon, v);
                v
            }
        };
        lit(v, positive)
    }

    fn encode(&mut self, f: &Formula) -> Lit {
        match f {
            Formula::True => self.constant(true),
            Formula::False => self.constant(false),
            Formula::BoolVar(b) => {
                assert!(b.index() < self.num_bools, "undeclared boolean {b:?}");
                lit(b.index(), true)
            }
            Formula::Not(g) => negate(self.encode(g)),
            Formula::Atom(a) => self.atom_lit(a),
            Formula::And(fs) => {
                let lits: Vec<Lit> = fs.iter().map(|g| self.encode(g)).collect();
                self.gate(&lits, true)
            }
            Formula::Or(fs) => {
                let lits: Vec<Lit> = fs.iter().map(|g| self.encode(g)).collect();
                self.gate(&lits, false)
            }
            Formula::Implies(a, b) => {
                let la = self.encode(a);
                let lb = self.encode(b);
                self.gate(&[negate(la), lb], false)
            }
            Formula::Iff(a, b) => {
                let la = self.encode(a);
                let lb = self.encode(b);
                let v = lit(self.fresh(), true);
                self.clauses.push(vec![negate(v), negate(la), lb]);
                self.clauses.push(vec![negate(v), la, negate(lb)]);
                self.clauses.push(vec![v, la, lb]);
                self.clauses.push(vec![v, negate(la), negate(lb)]);
                v
            }
        }
    }

    /// A fresh literal equivalent to the conjunction (`is_and`) or
    /// disjunction of `lits`.
    fn gate(&mut self, lits: &[Lit], is_and: bool) -> Lit {
        let v = lit(self.fresh(), true);
        // and: v -> l_i, (all l_i) -> v.  or is the dual.
        let (out, inputs): (Lit, Vec<Lit>) =
            if is_and { (v, lits.to_vec()) } else { (negate(v), lits.iter().map(|l| negate(*l)).collect()) };
        let mut big = vec![out];
        for &l in &inputs {
            self.clauses.push(vec![negate(out), l]);
            big.push(negate(l));
        }
        self.clauses.push(big);
        v
    }
}

/// Value of a subformula under the current boolean assignment.
struct Justifier<'a> {
    enc: &'a Encoder,
    sat: &'a SatSolver,
}

impl Justifier<'_> {
    fn atom_value(&self, a: &Atom) -> bool {
        if a.expr.is_constant() {
            return a.holds_at(a.expr.constant_term());
        }
        if a.rel == Rel::Eq {
            let le = LinConstraint::new(a.expr.clone(), Rel::Le);
            let ge = LinConstraint::new(-a.expr.clone(), Rel::Le);
            return self.atom_value(&le) && self.atom_value(&ge);
        }
        let (canon, positive) = canonicalize(a);
        self.sat.var_value(self.enc.atoms[&canon]) == positive
    }

    fn value(&self, f: &Formula) -> bool {
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::BoolVar(b) => self.sat.var_value(b.index()),
            Formula::Not(g) => !self.value(g),
            Formula::And(fs) => fs.iter().all(|g| self.value(g)),
            Formula::Or(fs) => fs.iter().any(|g| self.value(g)),
            Formula::Implies(a, b) => !self.value(a) || self.value(b),
            Formula::Iff(a, b) => self.value(a) == self.value(b),
            Formula::Atom(a) => self.atom_value(a),
        }
    }

    /// Collects atom literals that force `f` to take value `want`.
    fn justify(&self, f: &Formula, want: bool, out: &mut BTreeMap<usize, bool>) {
        match f {
            Formula::True | Formula::False | Formula::BoolVar(_) => {}
            Formula::Not(g) => self.justify(g, !want, out),
            Formula::Atom(a) => {
                if a.expr.is_constant() {
                    return;
                }
                if a.rel == Rel::Eq {
                    let le = Formula::Atom(LinConstraint::new(a.expr.clone(), Rel::Le));
                    let ge = Formula::Atom(LinConstraint::new(-a.expr.clone(), Rel::Le));
                    return self.justify(&Formula::And(vec![le, ge]), want, out);
                }
                let (canon, positive) = canonicalize(a);
                out.insert(self.enc.atoms[&canon], want == positive);
            }
            Formula::And(fs) | Formula::Or(fs) => {
                let all = matches!(f, Formula::And(_)) == want;
                if all {
                    fs.iter().for_each(|g| self.justify(g, want, out));
                } else {
                    // one child with value `want` suffices; prefer atom-free ones
                    let witnesses: Vec<&Formula> = fs.iter().filter(|g| self.value(g) == want).collect();
                    let pick = witnesses
                        .iter()
                        .find(|g| matches!(g, Formula::BoolVar(_) | Formula::True | Formula::False))
                        .or_else(|| witnesses.first())
                        .expect("value agrees with the assignment");
                    self.justify(pick, want, out);
                }
            }
            Formula::Implies(a, b) => {
                let as_or = Formula::Or(vec![Formula::not((**a).clone()), (**b).clone()]);
                self.justify(&as_or, want, out);
            }
            Formula::Iff(a, b) => {
                self.justify(a, self.value(a), out);
                self.justify(b, self.value(b), out);
            }
        }
    }
}

/// Internal decision procedure. `budget` bounds decisions, conflicts and
/// theory checks.
pub fn solve(sig: &Signature, f: &Formula, budget: u64) -> SolveResult {
    let mut enc = Encoder {
        num_bools: sig.bools.len(),
        next_var: sig.bools.len(),
        clauses: Vec::new(),
        atoms: BTreeMap::new(),
        true_var: None,
    };
    let root = enc.encode(f);
    enc.clauses.push(vec![root]);
    let mut sat = SatSolver::new(enc.next_var);
    for c in &enc.clauses {
        if !sat.add_clause(c) {
            return SolveResult::Unsat;
        }
    }
    let num_vars = sig.nums.len();
    let is_int: Vec<bool> = sig.nums.iter().map(|d| d.sort == Sort::Int).collect();
    let var_to_atom: BTreeMap<usize, &CanonAtom> = enc.atoms.iter().map(|(a, v)| (*v, a)).collect();
    let mut budget = budget;
    loop {
        match sat.solve(&mut budget) {
            SatOutcome::Unsat => return SolveResult::Unsat,
            SatOutcome::Exhausted => return SolveResult::Unknown("step budget exhausted".into()),
            SatOutcome::Sat => {}
        }
        if budget == 0 {
            return SolveResult::Unknown("step budget exhausted".into());
        }
        budget -= 1;
        let mut needed = BTreeMap::new();
        Justifier { enc: &enc, sat: &sat }.justify(f, true, &mut needed);
        let lits: Vec<(usize, bool)> = needed.into_iter().collect();
        let constraints: Vec<LinConstraint<usize, Rat>> = lits
            .iter()
            .map(|(v, polarity)| {
                let a = var_to_atom[v].map_vars(NumVarId::index);
                if *polarity {
                    a
                } else {
                    a.negate().pop().expect("inequality has a single complement")
                }
            })
            .collect();
        let uses_int = constraints.iter().any(|c| c.expr.vars().any(|v| is_int[v]));
        let verdict = if uses_int {
            lia::check(num_vars, &constraints, &is_int)
        } else {
            match simplex::check(num_vars, &constraints) {
                simplex::LpResult::Sat(p) => lia::LiaResult::Sat(p),
                simplex::LpResult::Unsat(core) => lia::LiaResult::Unsat(core),
            }
        };
        match verdict {
            lia::LiaResult::Sat(point) => {
                let model = Model { bools: (0..sig.bools.len()).map(|b| sat.var_value(b)).collect(), nums: point };
                if !f.eval(&model) || !model.respects_sorts(sig) {
                    return SolveResult::Unknown("model check failed".into());
                }
                return SolveResult::Sat(model);
            }
            lia::LiaResult::Unknown => return SolveResult::Unknown("integer search limit reached".into()),
            lia::LiaResult::Unsat(core) => {
                let block: Vec<Lit> = core.iter().map(|&i| lit(lits[i].0, !lits[i].1)).collect();
                sat.backtrack(0);
                if !sat.add_clause(&block) {
                    return SolveResult::Unsat;
                }
            }
        }
    }
}

/// Number of distinct theory atoms `f` mentions, after splitting equalities.
pub fn atom_count(f: &Formula) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    f.for_each_atom(&mut |a| {
        if !a.expr.is_constant() {
            if a.rel == Rel::Eq {
                seen.insert(canonicalize(&LinConstraint::new(a.expr.clone(), Rel::Le)).0);
                seen.insert(canonicalize(&LinConstraint::new(-a.expr.clone(), Rel::Le)).0);
            } else {
                seen.insert(canonicalize(a).0);
            }
        }
    });
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LinExpr;
    use crate::rat;
    use crate::smt::formula::NumOrigin;

    type E = LinExpr<NumVarId, Rat>;

    fn k(n: i64) -> E {
        E::constant(rat(n, 1))
    }

    #[test]
    fn examples() {
        let mut sig = Signature::new();
        let x = sig.new_num("x", Sort::Rat, NumOrigin::Fresh);
        let f = Formula::and([
            Formula::atom(LinConstraint::ge(E::var(x), k(0))),
            Formula::atom(LinConstraint::lt(E::var(x), k(0))),
        ]);
        assert_eq!(solve(&sig, &f, DEFAULT_BUDGET), SolveResult::Unsat);
        let b = sig.new_bool("b");
        let SolveResult::Sat(m) = solve(&sig, &Formula::var(b), DEFAULT_BUDGET) else { panic!() };
        assert!(m.bool(b));
    }

    #[test]
    fn disjunctive_theory_reasoning() {
        let mut sig = Signature::new();
        let x = sig.new_num("x", Sort::Int, NumOrigin::Fresh);
        let y = sig.new_num("y", Sort::Int, NumOrigin::Fresh);
        // (x <= 0 or x >= 10) and (x >= 3) and (x + y = 12) and y < 3
        let f = Formula::and([
            Formula::or([
                Formula::atom(LinConstraint::le(E::var(x), k(0))),
                Formula::atom(LinConstraint::ge(E::var(x), k(10))),
            ]),
            Formula::atom(LinConstraint::ge(E::var(x), k(3))),
            Formula::atom(LinConstraint::eq(E::var(x) + E::var(y), k(12))),
            Formula::atom(LinConstraint::lt(E::var(y), k(3))),
        ]);
        let SolveResult::Sat(m) = solve(&sig, &f, DEFAULT_BUDGET) else { panic!() };
        assert!(m.num(x) >= &rat(10, 1));
        assert!(f.eval(&m));
        let g = Formula::and([f, Formula::atom(LinConstraint::gt(E::var(y), k(2)))]);
        assert_eq!(solve(&sig, &g, DEFAULT_BUDGET), SolveResult::Unsat);
    }

    #[test]
    fn iff_and_implies() {
        let mut sig = Signature::new();
        let a = sig.new_bool("a");
        let b = sig.new_bool("b");
        let f = Formula::and([
            Formula::iff(Formula::var(a), Formula::not(Formula::var(b))),
            Formula::implies(Formula::var(a), Formula::var(b)),
        ]);
        let SolveResult::Sat(m) = solve(&sig, &f, DEFAULT_BUDGET) else { panic!() };
        assert!(!m.bool(a) && m.bool(b));
        let g = Formula::and([f, Formula::not(Formula::var(b))]);
        assert_eq!(solve(&sig, &g, DEFAULT_BUDGET), SolveResult::Unsat);
    }
}
