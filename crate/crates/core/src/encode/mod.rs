//! The transition formula of the disconnected graph, the reachability
//! queries built on it, and decoding of models into program paths.
//!
//! Every node of the disconnected graph gets its own copy of each program
//! variable, which yields the usual SSA discipline without a separate pass.
//! A node reachability boolean is defined as the disjunction of its incoming
//! edge booleans; an edge boolean holds iff its source is reached, its
//! selector is chosen and its guards hold; the edge then fixes the copies
//! at its target. Nodes with several successors carry one-hot selectors,
//! so a model describes exactly one path.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ir::{Command, DNodeId, DNodeKind, DisconnectedGraph, EdgeId, NodeId, Program};
use crate::numeric::{Extended, LinConstraint, LinExpr};
use crate::smt::{BoolId, Formula, Model, NumOrigin, NumVarId, Signature};
use crate::{Constraint, Rat, RatBox, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("node {0:?} is not an abstraction point")]
    UnknownNode(NodeId),
    #[error("model does not describe a unique path: {0}")]
    AmbiguousPath(String),
    #[error("model path is broken: {0}")]
    BrokenChain(String),
    #[error("path replay disagrees with the model: {0}")]
    ReplayMismatch(String),
}

/// A path between abstraction points, as original edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FocusPath {
    pub src: NodeId,
    pub dst: NodeId,
    pub edges: Vec<EdgeId>,
}

impl FocusPath {
    /// The concatenated command sequence along the path.
    pub fn body(&self, p: &Program) -> Vec<Command> {
        self.edges.iter().flat_map(|e| p.edge(*e).body.iter().cloned()).collect()
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// Everything needed to build queries over one disconnected graph.
#[derive(Debug, Clone)]
pub struct ReducedContext {
    pub program: Program,
    pub graph: DisconnectedGraph,
    pub sig: Signature,
    pub rho: Formula,
    /// Reachability boolean per disconnected node.
    pub node_bool: Vec<BoolId>,
    /// Boolean per edge (indexed like the program's edges).
    pub edge_bool: Vec<BoolId>,
    /// One-hot selectors per node with two or more outgoing edges, in the
    /// order of the node's outgoing edges.
    pub choice: Vec<Vec<BoolId>>,
    /// Copy of every program variable at every disconnected node.
    pub copies: Vec<Vec<NumVarId>>,
    /// Fresh variable per nondeterministic command, per edge.
    pub havocs: Vec<Vec<NumVarId>>,
}

fn node_label(p: &Program, kind: DNodeKind) -> String {
    match kind {
        DNodeKind::Source(n) => format!("{}.s", p.node(n).name),
        DNodeKind::Sink(n) => format!("{}.d", p.node(n).name),
        DNodeKind::Inner(n) => p.node(n).name.clone(),
    }
}

/// Bound atoms of `lo <= v <= hi` (with strictness) for a nondeterministic
/// choice.
fn havoc_bounds(v: NumVarId, lo: &Extended<Rat>, hi: &Extended<Rat>, strict_lo: bool, strict_hi: bool) -> Vec<Formula> {
    let x = LinExpr::var(v);
    let mut out = Vec::new();
    if let Extended::Finite(lo) = lo {
        let c = if strict_lo { LinConstraint::gt(x.clone(), LinExpr::constant(lo.clone())) } else { LinConstraint::ge(x.clone(), LinExpr::constant(lo.clone())) };
        out.push(Formula::atom(c));
    }
    if let Extended::Finite(hi) = hi {
        let c = if strict_hi { LinConstraint::lt(x, LinExpr::constant(hi.clone())) } else { LinConstraint::le(x, LinExpr::constant(hi.clone())) };
        out.push(Formula::atom(c));
    }
    out
}

/// Builds the transition formula of `graph`.
pub fn build_rho(program: &Program, graph: &DisconnectedGraph) -> ReducedContext {
    let mut sig = Signature::new();
    let labels: Vec<String> = graph.nodes.iter().map(|n| node_label(program, n.kind)).collect();
    let node_bool: Vec<BoolId> = labels.iter().map(|l| sig.new_bool(format!("b!{l}"))).collect();
    let edge_bool: Vec<BoolId> = graph.edges.iter().map(|e| sig.new_bool(format!("e!{}", e.index))).collect();
    let choice: Vec<Vec<BoolId>> = graph
        .nodes
        .iter()
        .map(|n| {
            let out = &graph.outgoing[n.id.index()];
            if out.len() < 2 {
                Vec::new()
            } else {
                (0..out.len()).map(|i| sig.new_bool(format!("c!{}.{i}", labels[n.id.index()]))).collect()
            }
        })
        .collect();
    let copies: Vec<Vec<NumVarId>> = graph
        .nodes
        .iter()
        .map(|n| {
            program
                .variables
                .iter()
                .map(|v| {
                    sig.new_num(
                        format!("{}@{}", v.name, labels[n.id.index()]),
                        v.sort,
                        NumOrigin::Copy { node: n.id.0, var: v.id.0 },
                    )
                })
                .collect()
        })
        .collect();

    let mut conjuncts = Vec::new();
    let mut havocs = Vec::with_capacity(graph.edges.len());
    for de in &graph.edges {
        let edge = program.edge(de.orig);
        let src = de.src.index();
        let mut current: Vec<LinExpr<NumVarId, Rat>> = copies[src].iter().map(|v| LinExpr::var(*v)).collect();
        let mut guards = vec![Formula::var(node_bool[src])];
        if !choice[src].is_empty() {
            let pos = graph.outgoing[src].iter().position(|&i| i == de.index).expect("edge is outgoing");
            guards.push(Formula::var(choice[src][pos]));
        }
        let mut fresh = Vec::new();
        for cmd in &edge.body {
            match cmd {
                Command::Assume(c) => guards.push(Formula::atom(substitute_program_vars(c, &current))),
                Command::Assign { target, rhs } => {
                    current[target.index()] = substitute_expr(rhs, &current);
                }
                Command::Havoc { target, lo, hi, strict_lo, strict_hi } => {
                    let var = &program.variables[target.index()];
                    let h = sig.new_num(
                        format!("{}!h{}.{}", var.name, de.index, fresh.len()),
                        var.sort,
                        NumOrigin::Havoc { edge: de.index as u32, index: fresh.len() as u32 },
                    );
                    guards.extend(havoc_bounds(h, lo, hi, *strict_lo, *strict_hi));
                    current[target.index()] = LinExpr::var(h);
                    fresh.push(h);
                }
            }
        }
        havocs.push(fresh);
        let e = Formula::var(edge_bool[de.index]);
        conjuncts.push(Formula::iff(e.clone(), Formula::and(guards)));
        let updates = copies[de.dst.index()]
            .iter()
            .zip(current)
            .map(|(target, value)| Formula::atom(LinConstraint::eq(LinExpr::var(*target), value)));
        conjuncts.push(Formula::implies(e, Formula::and(updates)));
    }
    for n in &graph.nodes {
        let i = n.id.index();
        if !matches!(n.kind, DNodeKind::Source(_)) {
            let incoming = graph.incoming[i].iter().map(|&ei| Formula::var(edge_bool[ei]));
            conjuncts.push(Formula::iff(Formula::var(node_bool[i]), Formula::or(incoming)));
        }
        let sel = &choice[i];
        if !sel.is_empty() {
            conjuncts.push(Formula::implies(Formula::var(node_bool[i]), Formula::or(sel.iter().map(|c| Formula::var(*c)))));
            for a in 0..sel.len() {
                for b in a + 1..sel.len() {
                    conjuncts.push(Formula::or([Formula::not(Formula::var(sel[a])), Formula::not(Formula::var(sel[b]))]));
                }
            }
        }
    }
    ReducedContext {
        program: program.clone(),
        graph: graph.clone(),
        sig,
        rho: Formula::And(conjuncts),
        node_bool,
        edge_bool,
        choice,
        copies,
        havocs,
    }
}

fn substitute_expr(e: &LinExpr<VarId, Rat>, current: &[LinExpr<NumVarId, Rat>]) -> LinExpr<NumVarId, Rat> {
    let mut out = LinExpr::constant(e.constant_term().clone());
    for (v, c) in e.terms() {
        out = out + current[v.index()].scaled(c);
    }
    out
}

fn substitute_program_vars(c: &Constraint, current: &[LinExpr<NumVarId, Rat>]) -> LinConstraint<NumVarId, Rat> {
    LinConstraint::new(substitute_expr(&c.expr, current), c.rel)
}

impl ReducedContext {
    /// `c` over the variable copies at `d`.
    pub fn at_node(&self, c: &Constraint, d: DNodeId) -> LinConstraint<NumVarId, Rat> {
        c.map_vars(|v| self.copies[d.index()][v.index()])
    }

    /// The box as a conjunction over the copies at `d` (`False` for bottom).
    pub fn member(&self, b: &RatBox, d: DNodeId) -> Formula {
        match b.to_constraints() {
            None => Formula::False,
            Some(cs) => Formula::and(cs.iter().map(|c| Formula::atom(self.at_node(c, d)))),
        }
    }

    /// Negation of [`Self::member`] as a disjunction of complemented bounds.
    pub fn not_member(&self, b: &RatBox, d: DNodeId) -> Formula {
        match b.to_constraints() {
            None => Formula::True,
            Some(cs) => Formula::or(
                cs.iter().flat_map(|c| c.negate()).map(|c| Formula::atom(self.at_node(&c, d))),
            ),
        }
    }

    fn source(&self, n: NodeId) -> Result<DNodeId, EncodeError> {
        self.graph.source(n).ok_or(EncodeError::UnknownNode(n))
    }

    fn sink(&self, n: NodeId) -> Result<DNodeId, EncodeError> {
        self.graph.sink(n).ok_or(EncodeError::UnknownNode(n))
    }

    /// `rho`, `p1`'s source reached in a state of `x1`, every other source
    /// unreached.
    fn start_at(&self, p1: NodeId, x1: &RatBox) -> Result<Vec<Formula>, EncodeError> {
        let s = self.source(p1)?;
        let mut parts = vec![self.rho.clone(), Formula::var(self.node_bool[s.index()])];
        for (q, qs) in self.graph.sources() {
            if q != p1 {
                parts.push(Formula::not(Formula::var(self.node_bool[qs.index()])));
            }
        }
        parts.push(self.member(x1, s));
        Ok(parts)
    }

    /// Is there a path from `p1` in a state of `x1` to some target `p2`
    /// ending outside `targets[p2]`?
    pub fn focus_query(&self, p1: NodeId, x1: &RatBox, targets: &BTreeMap<NodeId, RatBox>) -> Result<Formula, EncodeError> {
        let mut parts = self.start_at(p1, x1)?;
        let mut escapes = Vec::new();
        for (p2, x2) in targets {
            let d = self.sink(*p2)?;
            escapes.push(Formula::and([Formula::var(self.node_bool[d.index()]), self.not_member(x2, d)]));
        }
        parts.push(Formula::or(escapes));
        Ok(Formula::and(parts))
    }

    /// Is there a path from `p1` in a state of `x1` into some `p2`, ending
    /// inside `targets[p2]` but outside `working[p2]`? Edges in `excluded`
    /// may not be taken.
    pub fn narrow_query(
        &self,
        p1: NodeId,
        x1: &RatBox,
        targets: &BTreeMap<NodeId, RatBox>,
        working: &BTreeMap<NodeId, RatBox>,
        excluded: &[EdgeId],
    ) -> Result<Formula, EncodeError> {
        let mut parts = self.start_at(p1, x1)?;
        for e in excluded {
            parts.push(Formula::not(Formula::var(self.edge_bool[e.index()])));
        }
        let mut fresh = Vec::new();
        for (p2, x2) in targets {
            let d = self.sink(*p2)?;
            let y = working.get(p2).cloned().unwrap_or(RatBox::Bottom);
            fresh.push(Formula::and([
                Formula::var(self.node_bool[d.index()]),
                self.member(x2, d),
                self.not_member(&y, d),
            ]));
        }
        parts.push(Formula::or(fresh));
        Ok(Formula::and(parts))
    }

    /// Is a state violating `c` reachable at `at` from some abstraction
    /// point `p1` in a state of `xs[p1]`?
    pub fn violation_query(&self, xs: &BTreeMap<NodeId, RatBox>, at: DNodeId, c: &Constraint) -> Formula {
        let mut starts = Vec::new();
        for (p1, s) in self.graph.sources() {
            let Some(x1) = xs.get(&p1) else { continue };
            let mut parts = vec![Formula::var(self.node_bool[s.index()]), self.member(x1, s)];
            for (q, qs) in self.graph.sources() {
                if q != p1 {
                    parts.push(Formula::not(Formula::var(self.node_bool[qs.index()])));
                }
            }
            starts.push(Formula::and(parts));
        }
        let bad = Formula::or(c.negate().iter().map(|n| Formula::atom(self.at_node(n, at))));
        Formula::and([self.rho.clone(), Formula::or(starts), Formula::var(self.node_bool[at.index()]), bad])
    }

    /// Is there an initial state of `p` outside `x`? Also usable with a
    /// violated constraint via [`Self::initial_violation_query`].
    pub fn initial_escape_query(&self, p: NodeId, x: &RatBox) -> Result<Formula, EncodeError> {
        let s = self.source(p)?;
        let init = self.program.node(p).initial.clone().unwrap_or_default();
        let mut parts: Vec<Formula> = init.iter().map(|c| Formula::atom(self.at_node(c, s))).collect();
        if self.program.node(p).initial.is_none() {
            return Ok(Formula::False);
        }
        parts.push(self.not_member(x, s));
        Ok(Formula::and(parts))
    }

    /// Is there an initial state of `p` violating `c`?
    pub fn initial_violation_query(&self, p: NodeId, c: &Constraint) -> Result<Formula, EncodeError> {
        let s = self.source(p)?;
        let Some(init) = &self.program.node(p).initial else { return Ok(Formula::False) };
        let mut parts: Vec<Formula> = init.iter().map(|c| Formula::atom(self.at_node(c, s))).collect();
        parts.push(Formula::or(c.negate().iter().map(|n| Formula::atom(self.at_node(n, s)))));
        Ok(Formula::and(parts))
    }

    /// Edges that loop on one node without writing any variable.
    pub fn identity_self_edges(&self) -> Vec<EdgeId> {
        self.program
            .edges
            .iter()
            .filter(|e| e.src == e.dst && e.body.iter().all(|c| c.written().is_none()))
            .map(|e| e.id)
            .collect()
    }

    /// Reads the unique path a model of a focus or narrowing query selects.
    pub fn extract_path(&self, m: &Model) -> Result<FocusPath, EncodeError> {
        let reached: Vec<(NodeId, DNodeId)> =
            self.graph.sources().filter(|(_, s)| m.bool(self.node_bool[s.index()])).collect();
        let [(src, start)] = reached.as_slice() else {
            return Err(EncodeError::AmbiguousPath(format!("{} sources reached", reached.len())));
        };
        let mut at = *start;
        let mut edges = Vec::new();
        loop {
            let taken: Vec<usize> =
                self.graph.outgoing[at.index()].iter().copied().filter(|&ei| m.bool(self.edge_bool[ei])).collect();
            match taken.as_slice() {
                [] => break,
                [ei] => {
                    edges.push(self.graph.edges[*ei].orig);
                    at = self.graph.edges[*ei].dst;
                }
                many => return Err(EncodeError::AmbiguousPath(format!("{} edges leave {at:?}", many.len()))),
            }
        }
        match self.graph.kind(at) {
            DNodeKind::Sink(dst) => Ok(FocusPath { src: *src, dst, edges }),
            other => Err(EncodeError::BrokenChain(format!("path stops at {other:?}"))),
        }
    }

    /// Executes `path` concretely from the model's values at its source and
    /// checks every intermediate copy and the final one against the model.
    pub fn replay(&self, path: &FocusPath, m: &Model) -> Result<(), EncodeError> {
        let mismatch = |msg: String| Err(EncodeError::ReplayMismatch(msg));
        let start = self.source(path.src)?;
        let mut state: Vec<Rat> = self.copies[start.index()].iter().map(|v| m.num(*v).clone()).collect();
        let mut at = start;
        for e in &path.edges {
            let Some(&ei) = self.graph.outgoing[at.index()].iter().find(|&&i| self.graph.edges[i].orig == *e) else {
                return mismatch(format!("{e:?} does not leave {at:?}"));
            };
            let mut fresh = self.havocs[ei].iter();
            for cmd in &self.program.edge(*e).body {
                match cmd {
                    Command::Assume(c) => {
                        if !c.holds_with(|v| state.get(v.index()).cloned()).expect("total state") {
                            return mismatch(format!("guard {c:?} fails on {e:?}"));
                        }
                    }
                    Command::Assign { target, rhs } => {
                        state[target.index()] = rhs.eval_with(|v| state.get(v.index()).cloned()).expect("total state");
                    }
                    Command::Havoc { target, lo, hi, strict_lo, strict_hi } => {
                        let h = fresh.next().expect("one fresh variable per nondeterministic command");
                        let value = m.num(*h).clone();
                        let ok_lo = match lo.finite() {
                            Some(l) if *strict_lo => &value > l,
                            Some(l) => &value >= l,
                            None => true,
                        };
                        let ok_hi = match hi.finite() {
                            Some(u) if *strict_hi => &value < u,
                            Some(u) => &value <= u,
                            None => true,
                        };
                        if !(ok_lo && ok_hi) {
                            return mismatch(format!("nondeterministic value {value} out of range on {e:?}"));
                        }
                        state[target.index()] = value;
                    }
                }
            }
            at = self.graph.edges[ei].dst;
            for (i, v) in self.copies[at.index()].iter().enumerate() {
                if m.num(*v) != &state[i] {
                    return mismatch(format!("{} at {at:?}: model {} replay {}", self.program.var_name(VarId(i as u32)), m.num(*v), state[i]));
                }
            }
        }
        Ok(())
    }

    /// Values of the program variables at a disconnected node.
    pub fn state_at(&self, m: &Model, d: DNodeId) -> Vec<Rat> {
        self.copies[d.index()].iter().map(|v| m.num(*v).clone()).collect()
    }
}
