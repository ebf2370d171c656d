//! Fixpoint engines: the classical worklist iteration, path focusing with
//! an SMT oracle, and the self-loop variant with local iteration or
//! acceleration. All engines finish with the same narrowing, propagation,
//! inductiveness check and assertion check.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::domain::{accelerate, loopiter, DomainError, IntervalDomain};
use crate::encode::{build_rho, EncodeError, FocusPath, ReducedContext};
use crate::ir::{
    choose_abstraction_points, disconnect, select_widening_points, CutSets, DNodeKind, EdgeId, IrError, NodeId,
    Program,
};
use crate::smt::{Backend, SmtError, SolveResult, SolverSession, DEFAULT_BUDGET};
use crate::{Rat, RatBox};

pub const DEFAULT_NARROW_STEPS: usize = 2;
pub const MAX_NARROW_STEPS: usize = 10;
pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Solver(#[from] SmtError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("step budget of {0} exhausted")]
    BudgetExhausted(u64),
    #[error("update did not grow the abstract value: {0}")]
    NoProgress(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EngineMode {
    Classical,
    PathFocus,
    PathFocusSelfLoops,
}

impl EngineMode {
    pub fn name(self) -> &'static str {
        match self {
            EngineMode::Classical => "classical",
            EngineMode::PathFocus => "pathfocus",
            EngineMode::PathFocusSelfLoops => "selfloops",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub mode: EngineMode,
    pub use_acceleration: bool,
    pub narrow_steps: usize,
    pub backend: Backend,
    /// Upper bound on worklist steps plus solver calls.
    pub step_budget: u64,
    /// Search budget handed to the internal solver per query.
    pub solver_budget: u64,
    pub dump_dir: Option<PathBuf>,
    /// Nodes added to the abstraction points on top of widening points and
    /// initial nodes.
    pub extra_abstraction: BTreeSet<NodeId>,
}

impl EngineConfig {
    pub fn new(mode: EngineMode) -> Self {
        EngineConfig {
            mode,
            use_acceleration: false,
            narrow_steps: DEFAULT_NARROW_STEPS,
            backend: Backend::Internal,
            step_budget: DEFAULT_STEP_BUDGET,
            solver_budget: DEFAULT_BUDGET,
            dump_dir: None,
            extra_abstraction: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.narrow_steps > MAX_NARROW_STEPS {
            return Err(EngineError::InvalidConfig(format!("at most {MAX_NARROW_STEPS} narrowing steps")));
        }
        if self.step_budget == 0 {
            return Err(EngineError::InvalidConfig("step budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Proved,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionVerdict {
    pub node: NodeId,
    pub index: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub solver_calls: usize,
    /// Widening applications that moved at least one bound.
    pub widenings: usize,
    /// Focus paths processed during the ascending phase.
    pub paths: usize,
    pub steps: u64,
    /// The path-focused run hit an inconclusive query and was completed by
    /// classical iteration.
    pub fallback: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// One original edge in classical iteration.
    Edge,
    Path,
    SelfLoop { accelerated: bool },
}

/// One update of an abstract value during the ascending phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub src: NodeId,
    pub dst: NodeId,
    pub edges: Vec<EdgeId>,
    pub kind: StepKind,
    pub widened: bool,
    pub value: RatBox,
}

#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub mode: EngineMode,
    pub cuts: CutSets,
    /// One value per node of the program.
    pub invariants: BTreeMap<NodeId, RatBox>,
    pub assertions: Vec<AssertionVerdict>,
    pub inductive: bool,
    pub stats: Stats,
    pub trace: Vec<TraceStep>,
    /// Human-readable diagnostics (inconclusive queries, fallbacks).
    pub notes: Vec<String>,
}

impl AnalysisResult {
    pub fn has_unknown_assertion(&self) -> bool {
        self.assertions.iter().any(|a| a.verdict == Verdict::Unknown)
    }
}

/// Widening points from a depth-first search, abstraction points from those
/// plus initial nodes plus `extra`.
pub fn compute_cuts(p: &Program, extra: &BTreeSet<NodeId>) -> Result<CutSets, EngineError> {
    let pw = select_widening_points(p);
    Ok(choose_abstraction_points(p, &pw.points, extra)?)
}

/// The box of a node's initial region, or bottom for non-initial nodes.
pub fn initial_box(p: &Program, dom: &IntervalDomain<Rat>, n: NodeId) -> RatBox {
    match &p.node(n).initial {
        Some(cs) => dom.from_constraints(cs),
        None => RatBox::Bottom,
    }
}

/// Runs the configured engine end to end.
pub fn analyze(p: &Program, cfg: &EngineConfig) -> Result<AnalysisResult, EngineError> {
    cfg.validate()?;
    let cuts = compute_cuts(p, &cfg.extra_abstraction)?;
    match cfg.mode {
        EngineMode::Classical => run_classical(p, &cuts, cfg),
        EngineMode::PathFocus => run_pathfocus(p, &cuts, cfg),
        EngineMode::PathFocusSelfLoops => run_pathfocus_selfloops(p, &cuts, cfg),
    }
}

pub fn run_classical(p: &Program, cuts: &CutSets, cfg: &EngineConfig) -> Result<AnalysisResult, EngineError> {
    Analyzer::new(p, cuts, cfg)?.run(EngineMode::Classical)
}

pub fn run_pathfocus(p: &Program, cuts: &CutSets, cfg: &EngineConfig) -> Result<AnalysisResult, EngineError> {
    Analyzer::new(p, cuts, cfg)?.run(EngineMode::PathFocus)
}

pub fn run_pathfocus_selfloops(p: &Program, cuts: &CutSets, cfg: &EngineConfig) -> Result<AnalysisResult, EngineError> {
    Analyzer::new(p, cuts, cfg)?.run(EngineMode::PathFocusSelfLoops)
}

/// True iff no initial state and no path between abstraction points leaves
/// `x`. `x` must have an entry for every abstraction point.
pub fn verify_inductive(p: &Program, cuts: &CutSets, cfg: &EngineConfig, x: &BTreeMap<NodeId, RatBox>) -> Result<bool, EngineError> {
    Analyzer::new(p, cuts, cfg)?.verify_inductive(x)
}

/// Per-path check of every assertion under the invariant candidate `x`.
pub fn check_assertions(
    p: &Program,
    cuts: &CutSets,
    cfg: &EngineConfig,
    x: &BTreeMap<NodeId, RatBox>,
) -> Result<Vec<AssertionVerdict>, EngineError> {
    Analyzer::new(p, cuts, cfg)?.check_assertions(x)
}

/// One descending step over the paths between abstraction points; `None`
/// when a query was inconclusive.
pub fn narrow_pass(
    p: &Program,
    cuts: &CutSets,
    cfg: &EngineConfig,
    x: &BTreeMap<NodeId, RatBox>,
) -> Result<Option<BTreeMap<NodeId, RatBox>>, EngineError> {
    Analyzer::new(p, cuts, cfg)?.narrow_pass(x)
}

/// FIFO worklist with membership de-duplication.
#[derive(Debug, Default)]
struct Worklist {
    queue: VecDeque<NodeId>,
    members: BTreeSet<NodeId>,
}

impl Worklist {
    fn push(&mut self, n: NodeId) {
        if self.members.insert(n) {
            self.queue.push_back(n);
        }
    }

    fn pop(&mut self) -> Option<NodeId> {
        let n = self.queue.pop_front()?;
        self.members.remove(&n);
        Some(n)
    }
}

/// Outcome of one SMT query from the engine's point of view.
enum Query {
    Sat(crate::smt::Model),
    Unsat,
    Inconclusive(String),
}

struct Analyzer<'a> {
    program: &'a Program,
    cuts: &'a CutSets,
    cfg: &'a EngineConfig,
    dom: IntervalDomain<Rat>,
    ctx: ReducedContext,
    session: SolverSession,
    stats: Stats,
    trace: Vec<TraceStep>,
    notes: Vec<String>,
}

impl<'a> Analyzer<'a> {
    fn new(program: &'a Program, cuts: &'a CutSets, cfg: &'a EngineConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let graph = disconnect(program, cuts)?;
        let ctx = build_rho(program, &graph);
        let mut session = SolverSession::new(cfg.backend.clone());
        session.budget = cfg.solver_budget;
        session.dump_dir = cfg.dump_dir.clone();
        Ok(Analyzer {
            program,
            cuts,
            cfg,
            dom: IntervalDomain::new(program.sorts()),
            ctx,
            session,
            stats: Stats::default(),
            trace: Vec::new(),
            notes: Vec::new(),
        })
    }

    fn tick(&mut self) -> Result<(), EngineError> {
        self.stats.steps += 1;
        if self.stats.steps > self.cfg.step_budget {
            return Err(EngineError::BudgetExhausted(self.cfg.step_budget));
        }
        Ok(())
    }

    fn query(&mut self, f: &crate::smt::Formula) -> Result<Query, EngineError> {
        self.tick()?;
        let r = self.session.solve(&self.ctx.sig, f)?;
        self.stats.solver_calls = self.session.calls;
        Ok(match r {
            SolveResult::Sat(m) => Query::Sat(m),
            SolveResult::Unsat => Query::Unsat,
            SolveResult::Unknown(why) => Query::Inconclusive(why),
        })
    }

    fn run(mut self, mode: EngineMode) -> Result<AnalysisResult, EngineError> {
        let start = Instant::now();
        let mut x = match mode {
            EngineMode::Classical => self.classical()?,
            _ => match self.focused(mode == EngineMode::PathFocusSelfLoops)? {
                Some(x) => x,
                None => {
                    self.stats.fallback = true;
                    self.trace.clear();
                    self.classical()?
                }
            },
        };
        let focused = mode != EngineMode::Classical && !self.stats.fallback;
        if focused {
            for _ in 0..self.cfg.narrow_steps {
                let Some(y) = self.narrow_pass(&x)? else { break };
                if y == x || !self.cuts.abstraction.iter().all(|n| self.dom.includes(&x[n], &y[n])) {
                    break;
                }
                x = y;
            }
            x = propagate_inner(self.program, &self.ctx, &self.dom, &x);
        }
        let inductive = self.verify_inductive(&x)?;
        let assertions = self.check_assertions(&x)?;
        self.stats.solver_calls = self.session.calls;
        self.stats.wall_ms = start.elapsed().as_millis() as u64;
        Ok(AnalysisResult {
            mode,
            cuts: self.cuts.clone(),
            invariants: x,
            assertions,
            inductive,
            stats: self.stats,
            trace: self.trace,
            notes: self.notes,
        })
    }

    fn all_bottom(&self) -> BTreeMap<NodeId, RatBox> {
        self.program.node_ids().map(|n| (n, RatBox::Bottom)).collect()
    }

    /// Worklist iteration over the original graph followed by descending
    /// passes of the full transformer. Values for every node.
    fn classical(&mut self) -> Result<BTreeMap<NodeId, RatBox>, EngineError> {
        let p = self.program;
        let mut x = self.all_bottom();
        let mut work = Worklist::default();
        for n in p.initial_nodes() {
            x.insert(n, initial_box(p, &self.dom, n));
            if !x[&n].is_bottom() {
                work.push(n);
            }
        }
        while let Some(p1) = work.pop() {
            for e in p.outgoing(p1) {
                self.tick()?;
                let y = self.dom.post_path(&x[&p1], &e.body);
                let old = &x[&e.dst];
                let joined = self.dom.join(old, &y);
                let widened = self.cuts.is_widening(e.dst);
                let temp = if widened {
                    let (w, moved) = self.dom.widen_counting(old, &joined);
                    self.stats.widenings += usize::from(moved > 0);
                    w
                } else {
                    joined
                };
                if !self.dom.includes(old, &temp) {
                    self.trace.push(TraceStep {
                        src: p1,
                        dst: e.dst,
                        edges: vec![e.id],
                        kind: StepKind::Edge,
                        widened,
                        value: temp.clone(),
                    });
                    x.insert(e.dst, temp);
                    work.push(e.dst);
                }
            }
        }
        for _ in 0..self.cfg.narrow_steps {
            let y = classical_narrow_step(p, &self.dom, &x);
            if y == x || !p.node_ids().all(|n| self.dom.includes(&x[&n], &y[&n])) {
                break;
            }
            x = y;
        }
        Ok(x)
    }

    fn targets(&self, p1: NodeId, x: &BTreeMap<NodeId, RatBox>) -> BTreeMap<NodeId, RatBox> {
        self.ctx.graph.reachable_sinks(p1).into_iter().map(|n| (n, x[&n].clone())).collect()
    }

    fn path_from_model(&self, m: &crate::smt::Model) -> Result<FocusPath, EngineError> {
        let path = self.ctx.extract_path(m)?;
        self.ctx.replay(&path, m)?;
        Ok(path)
    }

    /// The ascending phase on the abstraction points. `None` when a query
    /// was inconclusive.
    fn focused(&mut self, self_loops: bool) -> Result<Option<BTreeMap<NodeId, RatBox>>, EngineError> {
        let p = self.program;
        let mut x: BTreeMap<NodeId, RatBox> = self.cuts.abstraction.iter().map(|&n| (n, RatBox::Bottom)).collect();
        let mut work = Worklist::default();
        for &n in &self.cuts.abstraction {
            let init = initial_box(p, &self.dom, n);
            if !init.is_bottom() {
                work.push(n);
            }
            x.insert(n, init);
        }
        while let Some(p1) = work.pop() {
            let mut seen: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
            loop {
                if x[&p1].is_bottom() {
                    break;
                }
                let f = self.ctx.focus_query(p1, &x[&p1], &self.targets(p1, &x))?;
                let m = match self.query(&f)? {
                    Query::Unsat => break,
                    Query::Sat(m) => m,
                    Query::Inconclusive(why) => {
                        self.notes.push(format!("focus query from {} inconclusive: {why}", p.node(p1).name));
                        return Ok(None);
                    }
                };
                let path = self.path_from_model(&m)?;
                self.stats.paths += 1;
                let p2 = path.dst;
                let body = path.body(p);
                let is_loop = self_loops && path.is_self_loop();
                let mut kind = if is_loop { StepKind::SelfLoop { accelerated: false } } else { StepKind::Path };
                let y = if is_loop {
                    let identity = body.iter().all(|c| c.written().is_none());
                    let accelerated = if self.cfg.use_acceleration && !identity {
                        accelerate(&self.dom, &body, &x[&p1])
                    } else {
                        None
                    };
                    let looped = match accelerated {
                        Some(v) => {
                            kind = StepKind::SelfLoop { accelerated: true };
                            v
                        }
                        None if identity => x[&p1].clone(),
                        None => {
                            let r = loopiter(&self.dom, &body, &x[&p1])?;
                            self.stats.widenings += r.widenings;
                            r.value
                        }
                    };
                    // the plain post keeps the witness even if the local
                    // iteration is not monotone
                    self.dom.join(&looped, &self.dom.post_path(&x[&p1], &body))
                } else {
                    self.dom.post_path(&x[&p1], &body)
                };
                let old = x[&p2].clone();
                let joined = self.dom.join(&old, &y);
                let widen = self.cuts.is_widening(p2) && (!is_loop || seen.contains(&path.edges));
                let temp = if widen {
                    let (w, moved) = self.dom.widen_counting(&old, &joined);
                    self.stats.widenings += usize::from(moved > 0);
                    w
                } else {
                    seen.insert(path.edges.clone());
                    joined
                };
                let sink = self.ctx.graph.sink(p2).expect("path ends at an abstraction point");
                let witness = self.ctx.state_at(&m, sink);
                if !temp.contains_point(&witness) || self.dom.includes(&old, &temp) {
                    return Err(EngineError::NoProgress(format!(
                        "{} along {:?}: {old:?} to {temp:?}",
                        p.node(p2).name,
                        path.edges
                    )));
                }
                self.trace.push(TraceStep {
                    src: p1,
                    dst: p2,
                    edges: path.edges.clone(),
                    kind,
                    widened: widen,
                    value: temp.clone(),
                });
                x.insert(p2, temp);
                work.push(p2);
            }
        }
        Ok(Some(x))
    }

    /// One descending step over paths between abstraction points: the join
    /// of initial regions and the posts of every path that lands inside the
    /// current invariant. `None` when a query was inconclusive.
    fn narrow_pass(&mut self, x: &BTreeMap<NodeId, RatBox>) -> Result<Option<BTreeMap<NodeId, RatBox>>, EngineError> {
        let p = self.program;
        let mut y: BTreeMap<NodeId, RatBox> =
            self.cuts.abstraction.iter().map(|&n| (n, initial_box(p, &self.dom, n))).collect();
        let excluded = self.ctx.identity_self_edges();
        for &p1 in &self.cuts.abstraction {
            if x[&p1].is_bottom() {
                continue;
            }
            let targets = self.targets(p1, x);
            loop {
                let f = self.ctx.narrow_query(p1, &x[&p1], &targets, &y, &excluded)?;
                let m = match self.query(&f)? {
                    Query::Unsat => break,
                    Query::Sat(m) => m,
                    Query::Inconclusive(why) => {
                        self.notes.push(format!("narrowing query from {} inconclusive: {why}", p.node(p1).name));
                        return Ok(None);
                    }
                };
                let path = self.path_from_model(&m)?;
                let post = self.dom.post_path(&x[&p1], &path.body(p));
                let old = y[&path.dst].clone();
                let grown = self.dom.join(&old, &post);
                if self.dom.includes(&old, &grown) {
                    return Err(EngineError::NoProgress(format!("narrowing along {:?}", path.edges)));
                }
                y.insert(path.dst, grown);
            }
        }
        Ok(Some(y))
    }

    /// No path leaves the invariant and every initial region lies inside it.
    fn verify_inductive(&mut self, x: &BTreeMap<NodeId, RatBox>) -> Result<bool, EngineError> {
        let p = self.program;
        for &n in &self.cuts.abstraction {
            let f = self.ctx.initial_escape_query(n, &x[&n])?;
            if !self.closed(&f, &format!("initial states of {}", p.node(n).name))? {
                return Ok(false);
            }
        }
        for &p1 in &self.cuts.abstraction {
            if x[&p1].is_bottom() {
                continue;
            }
            let f = self.ctx.focus_query(p1, &x[&p1], &self.targets(p1, x))?;
            if !self.closed(&f, &format!("paths from {}", p.node(p1).name))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn closed(&mut self, f: &crate::smt::Formula, what: &str) -> Result<bool, EngineError> {
        match self.query(f)? {
            Query::Unsat => Ok(true),
            Query::Sat(_) => {
                self.notes.push(format!("not inductive: {what} escape"));
                Ok(false)
            }
            Query::Inconclusive(why) => {
                self.notes.push(format!("inductiveness of {what} inconclusive: {why}"));
                Ok(false)
            }
        }
    }

    fn check_assertions(&mut self, x: &BTreeMap<NodeId, RatBox>) -> Result<Vec<AssertionVerdict>, EngineError> {
        let p = self.program;
        let starts: BTreeMap<NodeId, RatBox> = self.cuts.abstraction.iter().map(|&n| (n, x[&n].clone())).collect();
        let mut out = Vec::new();
        for node in &p.nodes {
            for (index, c) in node.assertions.iter().enumerate() {
                let mut proved = true;
                if self.cuts.is_abstraction(node.id) {
                    let f = self.ctx.initial_violation_query(node.id, c)?;
                    proved = self.assertion_holds(&f, &node.name, index)?;
                }
                if proved {
                    let at = self.ctx.graph.arrival(node.id).expect("every node has an arrival copy");
                    let f = self.ctx.violation_query(&starts, at, c);
                    proved = self.assertion_holds(&f, &node.name, index)?;
                }
                let verdict = if proved { Verdict::Proved } else { Verdict::Unknown };
                out.push(AssertionVerdict { node: node.id, index, verdict });
            }
        }
        Ok(out)
    }

    fn assertion_holds(&mut self, f: &crate::smt::Formula, node: &str, index: usize) -> Result<bool, EngineError> {
        Ok(match self.query(f)? {
            Query::Unsat => true,
            Query::Sat(_) => false,
            Query::Inconclusive(why) => {
                self.notes.push(format!("assertion {index} at {node} inconclusive: {why}"));
                false
            }
        })
    }
}

/// One application of the full abstract transformer on the original graph:
/// initial regions joined with the posts of every edge.
pub fn classical_narrow_step(
    p: &Program,
    dom: &IntervalDomain<Rat>,
    x: &BTreeMap<NodeId, RatBox>,
) -> BTreeMap<NodeId, RatBox> {
    let mut y: BTreeMap<NodeId, RatBox> = p.node_ids().map(|n| (n, initial_box(p, dom, n))).collect();
    for e in &p.edges {
        let post = dom.post_path(&x[&e.src], &e.body);
        let joined = dom.join(&y[&e.dst], &post);
        y.insert(e.dst, joined);
    }
    y
}

/// Extends values on abstraction points to every node by one pass in
/// topological order of the disconnected graph.
pub fn propagate_inner(
    p: &Program,
    ctx: &ReducedContext,
    dom: &IntervalDomain<Rat>,
    x: &BTreeMap<NodeId, RatBox>,
) -> BTreeMap<NodeId, RatBox> {
    let g = &ctx.graph;
    let mut at: Vec<RatBox> = vec![RatBox::Bottom; g.nodes.len()];
    for &d in &g.topo {
        let value = match g.kind(d) {
            DNodeKind::Source(n) => x[&n].clone(),
            DNodeKind::Sink(_) => continue,
            DNodeKind::Inner(_) => g.incoming[d.index()].iter().fold(RatBox::Bottom, |acc, &ei| {
                let e = &g.edges[ei];
                dom.join(&acc, &dom.post_path(&at[e.src.index()], &p.edge(e.orig).body))
            }),
        };
        at[d.index()] = value;
    }
    let mut out = x.clone();
    for n in p.node_ids() {
        if let Some(d) = g.inner(n) {
            out.insert(n, at[d.index()].clone());
        }
    }
    out
}
