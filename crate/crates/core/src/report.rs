//! Text and JSON rendering of analysis results.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Interval;
use crate::engine::{AnalysisResult, Verdict};
use crate::ir::Program;
use crate::numeric::Extended;
use crate::{Rat, RatBox};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("malformed constraint {0:?}")]
    Constraint(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("malformed report: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeReport {
    pub name: String,
    pub constraints: Vec<String>,
    pub bottom: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionReport {
    pub node: String,
    pub index: usize,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsReport {
    pub solver_calls: usize,
    pub widenings: usize,
    pub paths: usize,
    /// Only filled in on request, so that reports are reproducible.
    pub wall_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub program: String,
    pub engine: String,
    pub inductive: bool,
    pub nodes: Vec<NodeReport>,
    pub assertions: Vec<AssertionReport>,
    pub stats: StatsReport,
}

fn scaled(var: &str, q: &Rat) -> (String, String) {
    let (n, d) = (q.numer().clone(), q.denom().clone());
    let lhs = if d.is_one() { var.to_string() } else { format!("{d}*{var}") };
    (lhs, n.to_string())
}

/// One string per finite bound of `iv`, lower bound first, with the
/// variable scaled so both sides are integers.
pub fn render_interval(var: &str, iv: &Interval<Rat>) -> Vec<String> {
    let mut out = Vec::new();
    if let Extended::Finite(lo) = &iv.lo {
        let (v, n) = scaled(var, lo);
        out.push(format!("{n} {} {v}", if iv.strict_lo { "<" } else { "<=" }));
    }
    if let Extended::Finite(hi) = &iv.hi {
        let (v, n) = scaled(var, hi);
        out.push(format!("{v} {} {n}", if iv.strict_hi { "<" } else { "<=" }));
    }
    out
}

/// Bound constraints of a box in declaration order; `None` for bottom.
pub fn render_box(p: &Program, b: &RatBox) -> Option<Vec<String>> {
    let iv = b.intervals()?;
    Some(p.variables.iter().zip(iv).flat_map(|(v, i)| render_interval(&v.name, i)).collect())
}

/// A bound read back from its rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedBound {
    pub var: String,
    pub lower: bool,
    pub value: Rat,
    pub strict: bool,
}

fn parse_scaled_var(s: &str) -> Option<(Rat, String)> {
    match s.split_once('*') {
        Some((k, v)) => Some((Rat::from_integer(k.parse().ok()?), v.to_string())),
        None => Some((Rat::one(), s.to_string())),
    }
}

/// Inverse of [`render_interval`] for a single constraint.
pub fn parse_bound(s: &str) -> Result<ParsedBound, ReportError> {
    let bad = || ReportError::Constraint(s.to_string());
    let (lhs, rhs, strict) = match s.split_once(" <= ") {
        Some((l, r)) => (l, r, false),
        None => {
            let (l, r) = s.split_once(" < ").ok_or_else(bad)?;
            (l, r, true)
        }
    };
    if let Ok(n) = lhs.parse::<num_bigint::BigInt>() {
        let (k, var) = parse_scaled_var(rhs).ok_or_else(bad)?;
        return Ok(ParsedBound { var, lower: true, value: Rat::from_integer(n) / k, strict });
    }
    let n: num_bigint::BigInt = rhs.parse().map_err(|_| bad())?;
    let (k, var) = parse_scaled_var(lhs).ok_or_else(bad)?;
    Ok(ParsedBound { var, lower: false, value: Rat::from_integer(n) / k, strict })
}

/// Rebuilds the box of a node entry over `p`'s variables.
pub fn parse_node(p: &Program, node: &NodeReport) -> Result<RatBox, ReportError> {
    if node.bottom {
        return Ok(RatBox::Bottom);
    }
    let mut iv: Vec<Interval<Rat>> = p.variables.iter().map(|_| Interval::top()).collect();
    for c in &node.constraints {
        let b = parse_bound(c)?;
        let v = p.var_by_name(&b.var).ok_or_else(|| ReportError::UnknownVariable(b.var.clone()))?;
        let i = &mut iv[v.index()];
        if b.lower {
            i.lo = Extended::Finite(b.value);
            i.strict_lo = b.strict;
        } else {
            i.hi = Extended::Finite(b.value);
            i.strict_hi = b.strict;
        }
    }
    Ok(RatBox::Value(iv))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Proved => "proved",
        Verdict::Unknown => "unknown",
    }
}

/// Machine-readable summary; `timing` controls whether wall time is kept.
pub fn build_report(program_name: &str, p: &Program, r: &AnalysisResult, timing: bool) -> Report {
    let nodes = p
        .nodes
        .iter()
        .map(|n| {
            let b = r.invariants.get(&n.id).cloned().unwrap_or(RatBox::Bottom);
            let rendered = render_box(p, &b);
            NodeReport { name: n.name.clone(), bottom: rendered.is_none(), constraints: rendered.unwrap_or_default() }
        })
        .collect();
    let assertions = r
        .assertions
        .iter()
        .map(|a| AssertionReport {
            node: p.node(a.node).name.clone(),
            index: a.index,
            verdict: verdict_name(a.verdict).into(),
        })
        .collect();
    Report {
        program: program_name.to_string(),
        engine: r.mode.name().to_string(),
        inductive: r.inductive,
        nodes,
        assertions,
        stats: StatsReport {
            solver_calls: r.stats.solver_calls,
            widenings: r.stats.widenings,
            paths: r.stats.paths,
            wall_ms: timing.then_some(r.stats.wall_ms),
        },
    }
}

pub fn render_json(reports: &[Report]) -> String {
    let text = match reports {
        [one] => serde_json::to_string_pretty(one),
        many => serde_json::to_string_pretty(many),
    };
    text.expect("reports serialize") + "\n"
}

/// Parses the output of [`render_json`] for a single report.
pub fn parse_json(text: &str) -> Result<Report, ReportError> {
    serde_json::from_str(text).map_err(|e| ReportError::Json(e.to_string()))
}

fn node_line(n: &NodeReport) -> String {
    if n.bottom {
        format!("{}: unreachable", n.name)
    } else if n.constraints.is_empty() {
        format!("{}: true", n.name)
    } else {
        format!("{}: {}", n.name, n.constraints.join(", "))
    }
}

pub fn render_text(r: &Report, notes: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program: {}", r.program);
    let _ = writeln!(out, "engine: {}", r.engine);
    let _ = writeln!(out, "inductive: {}", if r.inductive { "yes" } else { "no" });
    out.push_str("invariants:\n");
    for n in &r.nodes {
        let _ = writeln!(out, "  {}", node_line(n));
    }
    if !r.assertions.is_empty() {
        out.push_str("assertions:\n");
        for a in &r.assertions {
            let _ = writeln!(out, "  {}[{}]: {}", a.node, a.index, a.verdict);
        }
    }
    let _ = write!(
        out,
        "stats: {} solver calls, {} widenings, {} paths",
        r.stats.solver_calls, r.stats.widenings, r.stats.paths
    );
    if let Some(ms) = r.stats.wall_ms {
        let _ = write!(out, ", {ms} ms");
    }
    out.push('\n');
    for n in notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

/// Side-by-side invariants of several runs of the same program, with a
/// per-node mark telling whether each run is at least as precise as the
/// first one.
pub fn render_comparison(p: &Program, results: &[(String, &AnalysisResult)]) -> String {
    let mut out = String::new();
    let dom = crate::domain::IntervalDomain::<Rat>::new(p.sorts());
    let _ = writeln!(out, "comparison ({}):", results.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(" | "));
    let empty = BTreeMap::new();
    let base = results.first().map(|(_, r)| &r.invariants).unwrap_or(&empty);
    for n in &p.nodes {
        let _ = writeln!(out, "  {}:", n.name);
        for (name, r) in results {
            let b = r.invariants.get(&n.id).cloned().unwrap_or(RatBox::Bottom);
            let text = match render_box(p, &b) {
                None => "unreachable".to_string(),
                Some(cs) if cs.is_empty() => "true".to_string(),
                Some(cs) => cs.join(", "),
            };
            let ordered = base.get(&n.id).map_or(true, |first| dom.includes(first, &b));
            let _ = writeln!(out, "    {name:<10} {}{text}", if ordered { "" } else { "(less precise) " });
        }
    }
    out
}
