use std::fmt;

use crate::numeric::LinConstraint;
use crate::{Rat, Sort};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoolId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NumVarId(pub u32);

impl BoolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NumVarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for BoolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

impl fmt::Debug for NumVarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Linear atom over solver variables.
pub type Atom = LinConstraint<NumVarId, Rat>;

/// Quantifier-free formula over booleans and linear arithmetic atoms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    BoolVar(BoolId),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Atom(Atom),
}

impl Formula {
    pub fn var(b: BoolId) -> Self {
        Formula::BoolVar(b)
    }

    pub fn atom(a: Atom) -> Self {
        Formula::Atom(a)
    }

    pub fn not(f: Formula) -> Self {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    /// Conjunction with constant folding and flattening.
    pub fn and(fs: impl IntoIterator<Item = Formula>) -> Self {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with constant folding and flattening.
    pub fn or(fs: impl IntoIterator<Item = Formula>) -> Self {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Evaluates under a total model.
    pub fn eval(&self, m: &Model) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::BoolVar(b) => m.bool(*b),
            Formula::Not(f) => !f.eval(m),
            Formula::And(fs) => fs.iter().all(|f| f.eval(m)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(m)),
            Formula::Implies(a, b) => !a.eval(m) || b.eval(m),
            Formula::Iff(a, b) => a.eval(m) == b.eval(m),
            Formula::Atom(a) => a.holds_with(|v| Some(m.num(v).clone())).expect("model is total"),
        }
    }

    /// Visits every atom.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Formula::True | Formula::False | Formula::BoolVar(_) => {}
            Formula::Not(g) => g.for_each_atom(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.for_each_atom(f)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.for_each_atom(f);
                b.for_each_atom(f);
            }
            Formula::Atom(a) => f(a),
        }
    }

    /// Number of nodes in the syntax tree.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::BoolVar(_) | Formula::Atom(_) => 1,
            Formula::Not(g) => 1 + g.size(),
            Formula::And(gs) | Formula::Or(gs) => 1 + gs.iter().map(Formula::size).sum::<usize>(),
            Formula::Implies(a, b) | Formula::Iff(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::BoolVar(b) => write!(f, "{b:?}"),
            Formula::Not(g) => write!(f, "!{g:?}"),
            Formula::And(gs) => f.debug_tuple("and").field(gs).finish(),
            Formula::Or(gs) => f.debug_tuple("or").field(gs).finish(),
            Formula::Implies(a, b) => write!(f, "({a:?} => {b:?})"),
            Formula::Iff(a, b) => write!(f, "({a:?} <=> {b:?})"),
            Formula::Atom(a) => write!(f, "[{a:?}]"),
        }
    }
}

/// Where a numeric solver variable comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NumOrigin {
    /// Copy of program variable `var` at disconnected-graph node `node`.
    Copy { node: u32, var: u32 },
    /// Value chosen by the `index`-th nondeterministic command of edge `edge`.
    Havoc { edge: u32, index: u32 },
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumVarDecl {
    pub name: String,
    pub sort: Sort,
    pub origin: NumOrigin,
}

/// Declarations of every variable a formula may mention.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    pub bools: Vec<String>,
    pub nums: Vec<NumVarDecl>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_bool(&mut self, name: impl Into<String>) -> BoolId {
        self.bools.push(name.into());
        BoolId(self.bools.len() as u32 - 1)
    }

    pub fn new_num(&mut self, name: impl Into<String>, sort: Sort, origin: NumOrigin) -> NumVarId {
        self.nums.push(NumVarDecl { name: name.into(), sort, origin });
        NumVarId(self.nums.len() as u32 - 1)
    }

    pub fn sort(&self, v: NumVarId) -> Sort {
        self.nums[v.index()].sort
    }

    pub fn bool_name(&self, b: BoolId) -> &str {
        &self.bools[b.index()]
    }

    pub fn num_name(&self, v: NumVarId) -> &str {
        &self.nums[v.index()].name
    }
}

/// A total assignment to a signature's variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub bools: Vec<bool>,
    pub nums: Vec<Rat>,
}

impl Model {
    pub fn bool(&self, b: BoolId) -> bool {
        self.bools[b.index()]
    }

    pub fn num(&self, v: NumVarId) -> &Rat {
        &self.nums[v.index()]
    }

    /// Int-sorted variables carry integers.
    pub fn respects_sorts(&self, sig: &Signature) -> bool {
        sig.nums.iter().zip(&self.nums).all(|(d, v)| d.sort == Sort::Rat || v.is_integer())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveResult::Unsat)
    }
}
