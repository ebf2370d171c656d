//! Program representation: a control-flow graph whose edges carry guarded
//! command sequences over numeric variables.

mod cuts;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::numeric::{Extended, LinConstraint, LinExpr, Scalar};
use crate::{Constraint, Rat, Sort, VarId};

pub use cuts::{
    choose_abstraction_points, disconnect, select_widening_points, CutSets, DEdge, DNode, DNodeId,
    DNodeKind, DisconnectedGraph, WideningPoints,
};
pub use parse::parse_program;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid program: {0}")]
    Validation(String),
    #[error("invalid cut set: {0}")]
    InvalidCutSet(String),
    #[error("disconnected graph still has a cycle through {0:?}")]
    CycleRemains(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub sort: Sort,
}

/// A primitive statement on an edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command<S: Scalar = Rat> {
    Assume(LinConstraint<VarId, S>),
    Assign { target: VarId, rhs: LinExpr<VarId, S> },
    /// Non-deterministic choice of `target` in the given interval.
    Havoc { target: VarId, lo: Extended<S>, hi: Extended<S>, strict_lo: bool, strict_hi: bool },
}

impl<S: Scalar> Command<S> {
    pub fn assign(target: VarId, rhs: LinExpr<VarId, S>) -> Self {
        Command::Assign { target, rhs }
    }

    /// Havoc with closed finite bounds (infinite ends are always open).
    pub fn havoc(target: VarId, lo: Extended<S>, hi: Extended<S>) -> Self {
        Command::Havoc { target, lo, hi, strict_lo: false, strict_hi: false }
    }

    /// The variable this command overwrites, if any.
    pub fn written(&self) -> Option<VarId> {
        match self {
            Command::Assume(_) => None,
            Command::Assign { target, .. } | Command::Havoc { target, .. } => Some(*target),
        }
    }

    pub fn read_vars(&self) -> BTreeSet<VarId> {
        match self {
            Command::Assume(c) => c.vars(),
            Command::Assign { rhs, .. } => rhs.vars().collect(),
            Command::Havoc { .. } => BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub src: NodeId,
    pub dst: NodeId,
    pub body: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    /// Conjunction describing the initial states; `None` means no initial
    /// state, an empty list means every valuation.
    pub initial: Option<Vec<Constraint>>,
    pub assertions: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub variables: Vec<Variable>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl Program {
    /// Builds and validates a program.
    pub fn new(variables: Vec<Variable>, nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, IrError> {
        let p = Program { variables, nodes, edges };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), IrError> {
        let err = |m: String| Err(IrError::Validation(m));
        let mut names = BTreeSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            if v.id.index() != i {
                return err(format!("variable {} has index {} at position {i}", v.name, v.id.0));
            }
            if !names.insert(v.name.as_str()) {
                return err(format!("duplicate variable {}", v.name));
            }
        }
        let mut names = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id.index() != i {
                return err(format!("node {} has index {} at position {i}", n.name, n.id.0));
            }
            if !names.insert(n.name.as_str()) {
                return err(format!("duplicate node {}", n.name));
            }
            let cs = n.initial.iter().flatten().chain(&n.assertions);
            for c in cs {
                self.check_vars(c.vars(), &format!("node {}", n.name))?;
            }
        }
        if !self.nodes.iter().any(|n| n.initial.is_some()) {
            return err("no node has an initial region".into());
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.id.index() != i {
                return err(format!("edge at position {i} has id {}", e.id.0));
            }
            if e.src.index() >= self.nodes.len() || e.dst.index() >= self.nodes.len() {
                return err(format!("edge {i} has a dangling endpoint"));
            }
            for cmd in &e.body {
                let mut vars = cmd.read_vars();
                vars.extend(cmd.written());
                self.check_vars(vars, &format!("edge {i}"))?;
                if let Command::Havoc { lo, hi, .. } = cmd {
                    if lo > hi || *lo == Extended::PosInf || *hi == Extended::NegInf {
                        return err(format!("edge {i}: empty nondet range [{lo}, {hi}]"));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_vars(&self, vars: impl IntoIterator<Item = VarId>, ctx: &str) -> Result<(), IrError> {
        for v in vars {
            if v.index() >= self.variables.len() {
                return Err(IrError::Validation(format!("{ctx}: undeclared variable {v:?}")));
            }
        }
        Ok(())
    }

    pub fn sorts(&self) -> Vec<Sort> {
        self.variables.iter().map(|v| v.sort).collect()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.id)
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()]
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.variables[v.index()].name
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn outgoing(&self, n: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.src == n)
    }

    pub fn incoming(&self, n: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.dst == n)
    }

    pub fn initial_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.initial.is_some()).map(|n| n.id)
    }

    /// Returns a copy without the given edge; later edge ids shift down by one.
    pub fn without_edge(&self, id: EdgeId) -> Program {
        let edges = self
            .edges
            .iter()
            .filter(|e| e.id != id)
            .enumerate()
            .map(|(i, e)| Edge { id: EdgeId(i as u32), ..e.clone() })
            .collect();
        Program { variables: self.variables.clone(), nodes: self.nodes.clone(), edges }
    }
}
