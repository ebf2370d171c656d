//! Widening points, abstraction points, and the disconnected (loop-free)
//! graph obtained by splitting every abstraction point.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{EdgeId, IrError, NodeId, Program};

/// Output of [`select_widening_points`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WideningPoints {
    pub points: BTreeSet<NodeId>,
    /// Loop headers found in parts of the graph no initial node reaches.
    /// They are still part of `points`.
    pub unreachable_cycles: Vec<NodeId>,
}

/// Targets of retreating edges of a depth-first traversal started from the
/// initial nodes (then from any node left unvisited).
pub fn select_widening_points(p: &Program) -> WideningPoints {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let n = p.nodes.len();
    let mut succ: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for e in &p.edges {
        succ[e.src.index()].push(e.dst);
    }
    let mut mark = vec![Mark::White; n];
    let mut points = BTreeSet::new();
    let mut unreachable_cycles = Vec::new();

    let roots: Vec<NodeId> = p.initial_nodes().chain(p.node_ids()).collect();
    let initial_count = p.initial_nodes().count();
    for (ri, root) in roots.into_iter().enumerate() {
        if mark[root.index()] != Mark::White {
            continue;
        }
        let from_initial = ri < initial_count;
        // explicit stack of (node, next successor position)
        let mut stack = vec![(root, 0usize)];
        mark[root.index()] = Mark::Grey;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&s) = succ[node.index()].get(*next) {
                *next += 1;
                match mark[s.index()] {
                    Mark::White => {
                        mark[s.index()] = Mark::Grey;
                        stack.push((s, 0));
                    }
                    Mark::Grey => {
                        if points.insert(s) && !from_initial {
                            unreachable_cycles.push(s);
                        }
                    }
                    Mark::Black => {}
                }
            } else {
                mark[node.index()] = Mark::Black;
                stack.pop();
            }
        }
    }
    WideningPoints { points, unreachable_cycles }
}

/// Widening points `P_W` and abstraction points `P_R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutSets {
    pub widening: BTreeSet<NodeId>,
    pub abstraction: BTreeSet<NodeId>,
}

impl CutSets {
    pub fn is_widening(&self, n: NodeId) -> bool {
        self.widening.contains(&n)
    }

    pub fn is_abstraction(&self, n: NodeId) -> bool {
        self.abstraction.contains(&n)
    }
}

/// True iff the subgraph induced by the nodes outside `cut` is acyclic.
fn cut_breaks_cycles(p: &Program, cut: &BTreeSet<NodeId>) -> bool {
    let n = p.nodes.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for e in &p.edges {
        if cut.contains(&e.src) || cut.contains(&e.dst) {
            continue;
        }
        indeg[e.dst.index()] += 1;
        succ[e.src.index()].push(e.dst.index());
    }
    let live: Vec<usize> = (0..n).filter(|i| !cut.contains(&NodeId(*i as u32))).collect();
    let mut queue: VecDeque<usize> = live.iter().copied().filter(|i| indeg[*i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = queue.pop_front() {
        seen += 1;
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    seen == live.len()
}

/// `P_R = pw ∪ extra ∪ {initial nodes}`, with the cut-set invariants checked.
pub fn choose_abstraction_points(
    p: &Program,
    pw: &BTreeSet<NodeId>,
    extra: &BTreeSet<NodeId>,
) -> Result<CutSets, IrError> {
    for n in pw.iter().chain(extra) {
        if n.index() >= p.nodes.len() {
            return Err(IrError::InvalidCutSet(format!("unknown node {n:?}")));
        }
    }
    if !cut_breaks_cycles(p, pw) {
        return Err(IrError::InvalidCutSet("widening points do not cut every cycle".into()));
    }
    let mut abstraction: BTreeSet<NodeId> = pw.iter().chain(extra).copied().collect();
    abstraction.extend(p.initial_nodes());
    if !cut_breaks_cycles(p, &abstraction) {
        return Err(IrError::InvalidCutSet("abstraction points do not cut every cycle".into()));
    }
    Ok(CutSets { widening: pw.clone(), abstraction })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DNodeId(pub u32);

impl DNodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Role of a node of the disconnected graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DNodeKind {
    /// Outgoing half `pˢ` of an abstraction point.
    Source(NodeId),
    /// Incoming half `pᵈ` of an abstraction point.
    Sink(NodeId),
    /// A node outside the abstraction points, kept whole.
    Inner(NodeId),
}

impl DNodeKind {
    pub fn original(self) -> NodeId {
        match self {
            DNodeKind::Source(n) | DNodeKind::Sink(n) | DNodeKind::Inner(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DNode {
    pub id: DNodeId,
    pub kind: DNodeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DEdge {
    pub index: usize,
    pub src: DNodeId,
    pub dst: DNodeId,
    pub orig: EdgeId,
}

/// The control-flow graph with each abstraction point split in two.
#[derive(Clone, Debug)]
pub struct DisconnectedGraph {
    pub nodes: Vec<DNode>,
    /// One per original edge, same order.
    pub edges: Vec<DEdge>,
    pub outgoing: Vec<Vec<usize>>,
    pub incoming: Vec<Vec<usize>>,
    /// Topological order of all nodes.
    pub topo: Vec<DNodeId>,
    pub cuts: CutSets,
    source_of: BTreeMap<NodeId, DNodeId>,
    sink_of: BTreeMap<NodeId, DNodeId>,
    inner_of: BTreeMap<NodeId, DNodeId>,
}

impl DisconnectedGraph {
    pub fn source(&self, n: NodeId) -> Option<DNodeId> {
        self.source_of.get(&n).copied()
    }

    pub fn sink(&self, n: NodeId) -> Option<DNodeId> {
        self.sink_of.get(&n).copied()
    }

    pub fn inner(&self, n: NodeId) -> Option<DNodeId> {
        self.inner_of.get(&n).copied()
    }

    /// Where states *at* original node `n` live: `nᵈ` for abstraction
    /// points, the node itself otherwise.
    pub fn arrival(&self, n: NodeId) -> Option<DNodeId> {
        self.sink(n).or_else(|| self.inner(n))
    }

    pub fn kind(&self, d: DNodeId) -> DNodeKind {
        self.nodes[d.index()].kind
    }

    pub fn sources(&self) -> impl Iterator<Item = (NodeId, DNodeId)> + '_ {
        self.source_of.iter().map(|(n, d)| (*n, *d))
    }

    pub fn sinks(&self) -> impl Iterator<Item = (NodeId, DNodeId)> + '_ {
        self.sink_of.iter().map(|(n, d)| (*n, *d))
    }

    /// Abstraction points whose sink half is reachable from `n`'s source half.
    pub fn reachable_sinks(&self, n: NodeId) -> BTreeSet<NodeId> {
        let Some(start) = self.source(n) else { return BTreeSet::new() };
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        let mut out = BTreeSet::new();
        while let Some(d) = stack.pop() {
            if std::mem::replace(&mut seen[d.index()], true) {
                continue;
            }
            if let DNodeKind::Sink(orig) = self.kind(d) {
                out.insert(orig);
            }
            for &ei in &self.outgoing[d.index()] {
                stack.push(self.edges[ei].dst);
            }
        }
        out
    }
}

/// Splits every abstraction point `r` into `rˢ` (outgoing edges) and `rᵈ`
/// (incoming edges).
pub fn disconnect(p: &Program, cuts: &CutSets) -> Result<DisconnectedGraph, IrError> {
    let mut nodes = Vec::new();
    let mut source_of = BTreeMap::new();
    let mut sink_of = BTreeMap::new();
    let mut inner_of = BTreeMap::new();
    let push = |kind: DNodeKind, nodes: &mut Vec<DNode>| {
        let id = DNodeId(nodes.len() as u32);
        nodes.push(DNode { id, kind });
        id
    };
    for n in p.node_ids() {
        if cuts.is_abstraction(n) {
            source_of.insert(n, push(DNodeKind::Source(n), &mut nodes));
            sink_of.insert(n, push(DNodeKind::Sink(n), &mut nodes));
        } else {
            inner_of.insert(n, push(DNodeKind::Inner(n), &mut nodes));
        }
    }
    let mut edges = Vec::new();
    let mut outgoing = vec![Vec::new(); nodes.len()];
    let mut incoming = vec![Vec::new(); nodes.len()];
    for e in &p.edges {
        let src = source_of.get(&e.src).or_else(|| inner_of.get(&e.src)).copied().unwrap();
        let dst = sink_of.get(&e.dst).or_else(|| inner_of.get(&e.dst)).copied().unwrap();
        let index = edges.len();
        outgoing[src.index()].push(index);
        incoming[dst.index()].push(index);
        edges.push(DEdge { index, src, dst, orig: e.id });
    }

    let mut indeg: Vec<usize> = incoming.iter().map(Vec::len).collect();
    let mut queue: VecDeque<DNodeId> =
        nodes.iter().filter(|n| indeg[n.id.index()] == 0).map(|n| n.id).collect();
    let mut topo = Vec::with_capacity(nodes.len());
    while let Some(d) = queue.pop_front() {
        topo.push(d);
        for &ei in &outgoing[d.index()] {
            let t = edges[ei].dst;
            indeg[t.index()] -= 1;
            if indeg[t.index()] == 0 {
                queue.push_back(t);
            }
        }
    }
    if topo.len() != nodes.len() {
        let stuck = nodes
            .iter()
            .filter(|n| indeg[n.id.index()] > 0)
            .map(|n| n.kind.original())
            .collect();
        return Err(IrError::CycleRemains(stuck));
    }
    Ok(DisconnectedGraph {
        nodes,
        edges,
        outgoing,
        incoming,
        topo,
        cuts: cuts.clone(),
        source_of,
        sink_of,
        inner_of,
    })
}
