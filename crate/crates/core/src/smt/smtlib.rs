//! SMT-LIB 2 text output.

use std::fmt::Write;

use num_traits::{Signed, Zero};

use super::formula::{Atom, Formula, Signature};
use super::SmtError;
use crate::numeric::Rel;
use crate::{Rat, Sort};

/// Logic matching the sorts a signature declares.
pub fn logic_for(sig: &Signature) -> &'static str {
    let has_int = sig.nums.iter().any(|d| d.sort == Sort::Int);
    let has_rat = sig.nums.iter().any(|d| d.sort == Sort::Rat);
    match (has_int, has_rat) {
        (true, true) => "QF_LIRA",
        (true, false) => "QF_LIA",
        _ => "QF_LRA",
    }
}

/// A symbol, quoted when it is not a simple symbol.
pub fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn integer(n: &num_bigint::BigInt, real: bool) -> String {
    let dot = if real { ".0" } else { "" };
    if n.is_negative() {
        format!("(- {}{dot})", -n)
    } else {
        format!("{n}{dot}")
    }
}

/// Exact rational numeral; `real` forces decimal notation for mixed logics.
pub fn numeral(q: &Rat, real: bool) -> String {
    if q.is_integer() {
        return integer(q.numer(), real);
    }
    let dot = if real { ".0" } else { "" };
    let body = format!("(/ {}{dot} {}{dot})", q.numer().abs(), q.denom());
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

struct Printer<'a> {
    sig: &'a Signature,
    mixed: bool,
}

impl Printer<'_> {
    fn atom(&self, a: &Atom, out: &mut String) {
        let all_int = a.expr.vars().all(|v| self.sig.sort(v) == Sort::Int);
        let a = if all_int { a.scaled_to_integers() } else { a.clone() };
        let real = self.mixed && !all_int;
        let mut parts: Vec<String> = a
            .expr
            .terms()
            .map(|(v, c)| {
                let name = symbol(self.sig.num_name(v));
                let var = if real && self.sig.sort(v) == Sort::Int { format!("(to_real {name})") } else { name };
                format!("(* {} {var})", numeral(c, real))
            })
            .collect();
        if !a.expr.constant_term().is_zero() {
            parts.push(numeral(a.expr.constant_term(), real));
        }
        let sum = match parts.len() {
            0 => numeral(&Rat::zero(), real),
            1 => parts.pop().unwrap(),
            _ => format!("(+ {})", parts.join(" ")),
        };
        let rel = match a.rel {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
        };
        let _ = write!(out, "({rel} {sum} {})", numeral(&Rat::zero(), real));
    }

    fn formula(&self, f: &Formula, out: &mut String) {
        let list = |op: &str, fs: &[&Formula], out: &mut String| {
            let _ = write!(out, "({op}");
            for g in fs {
                out.push(' ');
                self.formula(g, out);
            }
            out.push(')');
        };
        match f {
            Formula::True => out.push_str("true"),
            Formula::False => out.push_str("false"),
            Formula::BoolVar(b) => out.push_str(&symbol(self.sig.bool_name(*b))),
            Formula::Not(g) => list("not", &[g], out),
            Formula::And(fs) if fs.is_empty() => out.push_str("true"),
            Formula::Or(fs) if fs.is_empty() => out.push_str("false"),
            Formula::And(fs) => list("and", &fs.iter().collect::<Vec<_>>(), out),
            Formula::Or(fs) => list("or", &fs.iter().collect::<Vec<_>>(), out),
            Formula::Implies(a, b) => list("=>", &[a, b], out),
            Formula::Iff(a, b) => list("=", &[a, b], out),
            Formula::Atom(a) => self.atom(a, out),
        }
    }
}

/// Renders a complete script: logic, declarations, one assertion,
/// `check-sat`, `get-model`, `exit`. `logic` defaults to [`logic_for`].
pub fn to_smtlib2(sig: &Signature, f: &Formula, logic: Option<&str>) -> Result<String, SmtError> {
    let logic = logic.unwrap_or_else(|| logic_for(sig));
    let has_int = sig.nums.iter().any(|d| d.sort == Sort::Int);
    let has_rat = sig.nums.iter().any(|d| d.sort == Sort::Rat);
    let ok = match logic {
        "QF_LRA" => !has_int,
        "QF_LIA" => !has_rat,
        "QF_LIRA" => true,
        other => return Err(SmtError::UnsupportedSort(format!("unknown logic {other}"))),
    };
    if !ok {
        return Err(SmtError::UnsupportedSort(format!("declared sorts do not fit {logic}")));
    }
    let mut out = String::new();
    let _ = writeln!(out, "(set-logic {logic})");
    for name in &sig.bools {
        let _ = writeln!(out, "(declare-const {} Bool)", symbol(name));
    }
    for d in &sig.nums {
        let sort = match d.sort {
            Sort::Int => "Int",
            Sort::Rat => "Real",
        };
        let _ = writeln!(out, "(declare-const {} {sort})", symbol(&d.name));
    }
    let printer = Printer { sig, mixed: logic == "QF_LIRA" };
    out.push_str("(assert ");
    printer.formula(f, &mut out);
    out.push_str(")\n(check-sat)\n(get-model)\n(exit)\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{LinConstraint, LinExpr};
    use crate::rat;
    use crate::smt::formula::NumOrigin;

    #[test]
    fn atom_syntax() {
        let mut sig = Signature::new();
        let x = sig.new_num("x", Sort::Rat, NumOrigin::Fresh);
        let f = Formula::atom(LinConstraint::le(LinExpr::var(x), LinExpr::constant(rat(1, 1))));
        let text = to_smtlib2(&sig, &f, None).unwrap();
        assert!(text.contains("(assert (<= (+ (* 1 x) (- 1)) 0))"), "{text}");
        assert!(text.starts_with("(set-logic QF_LRA)\n(declare-const x Real)\n"));
        let t = to_smtlib2(&sig, &Formula::True, None).unwrap();
        assert!(t.contains("(assert true)"));
    }

    #[test]
    fn numerals_and_sorts() {
        assert_eq!(numeral(&rat(-1, 3), false), "(- (/ 1 3))");
        assert_eq!(numeral(&rat(7, 1), true), "7.0");
        let mut sig = Signature::new();
        sig.new_num("n", Sort::Int, NumOrigin::Fresh);
        assert!(matches!(to_smtlib2(&sig, &Formula::True, Some("QF_LRA")), Err(SmtError::UnsupportedSort(_))));
        assert_eq!(symbol("x@p2.d"), "x@p2.d");
        assert_eq!(symbol("a b"), "|a b|");
    }

    #[test]
    fn integer_atoms_are_scaled() {
        let mut sig = Signature::new();
        let n = sig.new_num("n", Sort::Int, NumOrigin::Fresh);
        let f = Formula::atom(LinConstraint::lt(LinExpr::term(rat(1, 2), n), LinExpr::constant(rat(1, 3))));
        let text = to_smtlib2(&sig, &f, None).unwrap();
        assert!(text.contains("(assert (< (+ (* 3 n) (- 2)) 0))"), "{text}");
    }
}
