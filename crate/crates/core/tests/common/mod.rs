//! Independent oracles shared by the integration tests: a concrete
//! interpreter with explicit-state search, a random program generator and
//! brute-force path enumeration.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;
use std::process::{Command as Process, Stdio};

use num_traits::ToPrimitive;
use pathfocus::domain::{Interval, IntervalBox};
use pathfocus::ir::{parse_program, Command, DNodeId, DisconnectedGraph, EdgeId, NodeId, Program};
use pathfocus::numeric::Extended;
use pathfocus::{Rat, RatBox};
use rand::Rng;

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.pfa"))
}

pub fn load(name: &str) -> Program {
    let text = std::fs::read_to_string(corpus_path(name)).expect("corpus file");
    parse_program(&text).expect("corpus parses")
}

pub const CORPUS: &[&str] = &["circular", "circular_det", "boustrophedon", "ratelimiter", "sinc", "twophase"];

pub fn r(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

pub fn interval(lo: i64, hi: i64) -> Interval<Rat> {
    Interval::closed(Extended::Finite(r(lo)), Extended::Finite(r(hi))).unwrap()
}

pub fn boxed(ivs: &[(i64, i64)]) -> RatBox {
    IntervalBox::Value(ivs.iter().map(|&(l, h)| interval(l, h)).collect())
}

/// Solver command for the external backend, if one is installed.
pub fn z3_command() -> Option<String> {
    let cmd = std::env::var("PATHFOCUS_SMT").ok().filter(|s| !s.trim().is_empty()).unwrap_or_else(|| "z3 -in -smt2".into());
    let program = cmd.split_whitespace().next()?.to_string();
    let ok = Process::new(&program)
        .arg("-version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    ok.then_some(cmd)
}

/// Concrete successors of `state` along `body`; `None` when a
/// nondeterministic choice has more than `max_choices` integer values or a
/// non-integral range.
pub fn exec(body: &[Command], state: &[Rat], max_choices: usize) -> Option<Vec<Vec<Rat>>> {
    let mut states = vec![state.to_vec()];
    for cmd in body {
        let mut next = Vec::new();
        for s in states {
            match cmd {
                Command::Assume(c) => {
                    if c.holds_with(|v| s.get(v.index()).cloned()).unwrap() {
                        next.push(s);
                    }
                }
                Command::Assign { target, rhs } => {
                    let mut s2 = s.clone();
                    s2[target.index()] = rhs.eval_with(|v| s.get(v.index()).cloned()).unwrap();
                    next.push(s2);
                }
                Command::Havoc { target, lo, hi, strict_lo, strict_hi } => {
                    let (Extended::Finite(lo), Extended::Finite(hi)) = (lo, hi) else { return None };
                    let range = Interval::new(Extended::Finite(lo.clone()), Extended::Finite(hi.clone()), *strict_lo, *strict_hi);
                    let from = lo.ceil().to_integer().to_i64()?;
                    let to = hi.floor().to_integer().to_i64()?;
                    if to >= from && (to - from) as usize + 1 > max_choices {
                        return None;
                    }
                    for v in from..=to {
                        if range.as_ref().is_some_and(|i| i.contains(&r(v))) {
                            let mut s2 = s.clone();
                            s2[target.index()] = r(v);
                            next.push(s2);
                        }
                    }
                }
            }
        }
        states = next;
    }
    Some(states)
}

/// Reachable states per node by breadth-first search. Initial states are
/// the integer points of `sample` that satisfy the initial constraints.
/// `None` when more than `cap` states are found or a choice is unbounded.
pub fn explore(p: &Program, sample: std::ops::RangeInclusive<i64>, cap: usize) -> Option<BTreeMap<NodeId, BTreeSet<Vec<Rat>>>> {
    let n = p.variables.len();
    let mut seen: BTreeMap<NodeId, BTreeSet<Vec<Rat>>> = p.node_ids().map(|id| (id, BTreeSet::new())).collect();
    let mut queue = VecDeque::new();
    let mut count = 0usize;
    for node in p.initial_nodes() {
        let init = p.node(node).initial.clone().unwrap_or_default();
        for point in grid(n, sample.clone()) {
            if init.iter().all(|c| c.holds_with(|v| point.get(v.index()).cloned()).unwrap())
                && seen.get_mut(&node).unwrap().insert(point.clone())
            {
                count += 1;
                queue.push_back((node, point));
            }
        }
    }
    while let Some((node, state)) = queue.pop_front() {
        for e in p.outgoing(node) {
            for next in exec(&e.body, &state, cap)? {
                if seen.get_mut(&e.dst).unwrap().insert(next.clone()) {
                    count += 1;
                    if count > cap {
                        return None;
                    }
                    queue.push_back((e.dst, next));
                }
            }
        }
    }
    Some(seen)
}

/// All integer points of `range^n`.
pub fn grid(n: usize, range: std::ops::RangeInclusive<i64>) -> Vec<Vec<Rat>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| range.clone().map(move |v| {
                let mut q = p.clone();
                q.push(r(v));
                q
            }))
            .collect();
    }
    out
}

/// Integer points of a bounded box.
pub fn box_points(b: &RatBox) -> Vec<Vec<Rat>> {
    let Some(iv) = b.intervals() else { return Vec::new() };
    let mut out = vec![Vec::new()];
    for i in iv {
        let lo = i.lo.finite().expect("bounded").ceil().to_integer().to_i64().unwrap();
        let hi = i.hi.finite().expect("bounded").floor().to_integer().to_i64().unwrap();
        out = out
            .into_iter()
            .flat_map(|p| (lo..=hi).filter(|v| i.contains(&r(*v))).map(move |v| {
                let mut q = p.clone();
                q.push(r(v));
                q
            }))
            .collect();
    }
    out
}

/// Every edge sequence from `start` to a sink of the disconnected graph.
pub fn dag_paths(g: &DisconnectedGraph, start: DNodeId) -> Vec<(Vec<EdgeId>, DNodeId)> {
    let mut out = Vec::new();
    let mut stack = vec![(start, Vec::new())];
    while let Some((at, edges)) = stack.pop() {
        let outgoing = &g.outgoing[at.index()];
        if outgoing.is_empty() || matches!(g.kind(at), pathfocus::ir::DNodeKind::Sink(_)) {
            out.push((edges, at));
            continue;
        }
        for &ei in outgoing {
            let mut e2 = edges.clone();
            e2.push(g.edges[ei].orig);
            stack.push((g.edges[ei].dst, e2));
        }
    }
    out
}

/// A random program over `vars` integer variables with `nodes` nodes; node
/// 0 is initial and every other node is reachable from it. Bodies use
/// small coefficients and no nondeterminism.
pub fn random_program(rng: &mut impl Rng, vars: usize, nodes: usize, extra_edges: usize, cyclic: bool) -> Program {
    let names: Vec<String> = (0..vars).map(|i| format!("v{i}")).collect();
    let mut text = format!("vars {};\n", names.iter().map(|n| format!("{n}:int")).collect::<Vec<_>>().join(", "));
    for i in 0..nodes {
        text.push_str(&format!("node n{i}{};\n", if i == 0 { " init {}" } else { "" }));
    }
    let mut edges: Vec<(usize, usize)> = (1..nodes).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..nodes);
        let b = rng.gen_range(0..nodes);
        if cyclic || a < b {
            edges.push((a, b));
        } else if a != b {
            edges.push((b.min(a), b.max(a)));
        }
    }
    for (a, b) in edges {
        text.push_str(&format!("from n{a} to n{b} {{ {} }};\n", random_body(rng, &names)));
    }
    parse_program(&text).expect("generated program parses")
}

fn random_expr(rng: &mut impl Rng, names: &[String]) -> String {
    let mut parts = Vec::new();
    for n in names {
        let c: i64 = rng.gen_range(-2..=2);
        if c != 0 {
            parts.push(format!("{c}*{n}"));
        }
    }
    parts.push(rng.gen_range(-3i64..=3).to_string());
    parts.join(" + ")
}

fn random_body(rng: &mut impl Rng, names: &[String]) -> String {
    let mut body = String::new();
    for _ in 0..rng.gen_range(0..=2) {
        if rng.gen_bool(0.5) {
            let rel = ["<=", "<", ">=", ">", "=="][rng.gen_range(0..5)];
            body.push_str(&format!("assume {} {rel} 0; ", random_expr(rng, names)));
        } else {
            let t = &names[rng.gen_range(0..names.len())];
            body.push_str(&format!("{t} := {}; ", random_expr(rng, names)));
        }
    }
    body
}

/// Random bounded box with coordinates in `[-k, k]`, sometimes bottom.
pub fn random_box(rng: &mut impl Rng, vars: usize, k: i64) -> RatBox {
    if rng.gen_ratio(1, 8) {
        return RatBox::Bottom;
    }
    IntervalBox::Value(
        (0..vars)
            .map(|_| {
                let a = rng.gen_range(-k..=k);
                let b = rng.gen_range(-k..=k);
                interval(a.min(b), a.max(b))
            })
            .collect(),
    )
}

/// Compares `actual` with `tests/golden/NAME`; with `BLESS=1` in the
/// environment the file is rewritten instead.
pub fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(name);
    if std::env::var("BLESS").is_ok_and(|v| v == "1") {
        std::fs::write(&path, actual).expect("golden file writable");
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e} (run with BLESS=1 to create)", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}
