//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the summary is always printed.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command as Process;
use std::time::Duration;

use num_traits::{One, Zero};
use pathfocus::domain::{accelerate, IntervalDomain};
use pathfocus::encode::build_rho;
use pathfocus::engine::{analyze, compute_cuts, EngineConfig, EngineMode, StepKind, Verdict};
use pathfocus::ir::{disconnect, Command, DNodeKind};
use pathfocus::numeric::{LinConstraint, LinExpr, Rel};
use pathfocus::report::{parse_json, Report};
use pathfocus::smt::{simplex, solve, solve_external, Formula, NumOrigin, NumVarId, Signature, SolveResult, DEFAULT_BUDGET};
use pathfocus::{Rat, RatBox, Sort, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn cli(args: &[&str]) -> (i32, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_pathfocus")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).expect("utf-8 output"))
}

fn cli_report(name: &str, engine: &str, extra: &[&str]) -> Result<Report, String> {
    let path = corpus_path(name);
    let mut args = vec!["analyze", path.to_str().unwrap(), "--engine", engine, "--format", "json"];
    args.extend_from_slice(extra);
    let (code, out) = cli(&args);
    if code != 0 {
        return Err(format!("{name} --engine {engine} exited with {code}"));
    }
    parse_json(&out).map_err(|e| e.to_string())
}

fn node_constraints(r: &Report, node: &str) -> Vec<String> {
    r.nodes.iter().find(|n| n.name == node).map(|n| n.constraints.clone()).unwrap_or_default()
}

fn expect_eq(what: &str, got: Vec<String>, want: &[&str]) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn criterion_1() -> Outcome {
    for engine in ["pathfocus", "selfloops"] {
        let r = cli_report("circular", engine, &[])?;
        expect_eq(&format!("{engine} p2"), node_constraints(&r, "p2"), &["0 <= x", "x <= 99"])?;
    }
    let r = cli_report("circular", "classical", &[])?;
    expect_eq("classical p2", node_constraints(&r, "p2"), &["0 <= x"])?;
    Ok("p2 = [0,99] for both focused engines, [0,oo) classically".into())
}

fn criterion_2() -> Outcome {
    let r = cli_report("circular_det", "classical", &[])?;
    expect_eq("classical p2", node_constraints(&r, "p2"), &["0 <= x", "x <= 99"])?;
    Ok("classical with narrowing gives [0,99]".into())
}

fn criterion_3() -> Outcome {
    let want = ["0 <= x", "x <= 1000", "-1 <= d", "d <= 1"];
    let r = cli_report("boustrophedon", "selfloops", &[])?;
    expect_eq("selfloops h", node_constraints(&r, "h"), &want)?;
    let classical = node_constraints(&cli_report("boustrophedon", "classical", &[])?, "h");
    let missing: Vec<&str> = want.iter().copied().filter(|c| !classical.iter().any(|k| k == c)).collect();
    if missing.is_empty() {
        return Err("classical found every bound".into());
    }
    Ok(format!("classical h = {classical:?}, missing {missing:?}"))
}

/// Reachable values of x_old at the rate limiter's loop header, by
/// iterating the loop body on every input value.
fn ratelimiter_header_values() -> BTreeSet<i64> {
    let mut seen = BTreeSet::from([0i64]);
    let mut frontier = vec![0i64];
    while let Some(old) = frontier.pop() {
        for input in -1000..=1000 {
            let next = input.clamp(old - 10, old + 10);
            if seen.insert(next) {
                frontier.push(next);
            }
        }
    }
    seen
}

fn criterion_4() -> Outcome {
    let reach = ratelimiter_header_values();
    let (lo, hi) = (*reach.first().unwrap(), *reach.last().unwrap());
    if (lo, hi) != (-1000, 1000) || reach.len() != 2001 {
        return Err(format!("explicit-state oracle gives [{lo},{hi}] with {} values", reach.len()));
    }
    let r = cli_report("ratelimiter", "selfloops", &[])?;
    let h = node_constraints(&r, "h");
    let x_old: Vec<String> = h.iter().filter(|c| c.contains("x_old")).cloned().collect();
    expect_eq("selfloops x_old", x_old, &["-1000 <= x_old", "x_old <= 1000"])?;
    let classical = node_constraints(&cli_report("ratelimiter", "classical", &[])?, "h");
    if classical.iter().any(|c| c == "-1000 <= x_old") && classical.iter().any(|c| c == "x_old <= 1000") {
        return Err(format!("classical found the bound: {classical:?}"));
    }
    Ok(format!("x_old in [-1000,1000] (explicit states agree); classical h = {classical:?}"))
}

fn criterion_5() -> Outcome {
    let p = load("sinc");
    let hundredth = Rat::new(1.into(), 100.into());
    for mode in [EngineMode::Classical, EngineMode::PathFocus, EngineMode::PathFocusSelfLoops] {
        let res = analyze(&p, &EngineConfig::new(mode)).map_err(|e| e.to_string())?;
        if res.assertions.len() != 2 || res.assertions.iter().any(|a| a.verdict != Verdict::Proved) {
            return Err(format!("{}: verdicts {:?}", mode.name(), res.assertions));
        }
        // negative control: the single boxes at the merge and at the
        // division contain x = 0, so no box-only check can prove the guard
        let merged = &res.invariants[&p.node_by_name("merged").unwrap()];
        let division = &res.invariants[&p.node_by_name("division").unwrap()];
        if !merged.contains_point(&[Rat::zero(), Rat::zero()]) || !division.contains_point(&[Rat::zero(), hundredth.clone()]) {
            return Err(format!("{}: box excludes x = 0: {merged:?} {division:?}", mode.name()));
        }
    }
    Ok("both halves of |x| >= 1/100 proved per path; merged box contains x = 0".into())
}

fn criterion_6() -> Outcome {
    let x = VarId(0);
    let body = vec![
        Command::assign(x, LinExpr::var(x) + LinExpr::constant(Rat::one())),
        Command::Assume(LinConstraint::lt(LinExpr::var(x), LinExpr::constant(r(100)))),
    ];
    let dom = IntervalDomain::new(vec![Sort::Int]);
    let got = accelerate(&dom, &body, &boxed(&[(0, 0)])).ok_or("not accelerated")?;
    if got != boxed(&[(0, 99)]) {
        return Err(format!("accelerate gives {got:?}"));
    }
    let p = load("circular");
    let mut cfg = EngineConfig::new(EngineMode::PathFocusSelfLoops);
    cfg.use_acceleration = true;
    let res = analyze(&p, &cfg).map_err(|e| e.to_string())?;
    let p2 = p.node_by_name("p2").unwrap();
    if res.invariants[&p2] != boxed(&[(0, 99)]) || res.stats.widenings != 0 {
        return Err(format!("engine gives {:?} with {} widenings", res.invariants[&p2], res.stats.widenings));
    }
    if !res.trace.iter().any(|s| s.kind == StepKind::SelfLoop { accelerated: true }) {
        return Err("no accelerated step in the trace".into());
    }
    Ok("[0,99] in one step, 0 widenings".into())
}

fn criterion_7() -> Outcome {
    let mut checked = Vec::new();
    let mut skipped = Vec::new();
    for name in CORPUS {
        let p = load(name);
        let states = explore(&p, -2..=2, 100_000);
        for mode in [EngineMode::Classical, EngineMode::PathFocus, EngineMode::PathFocusSelfLoops] {
            let res = analyze(&p, &EngineConfig::new(mode)).map_err(|e| format!("{name}: {e}"))?;
            if !res.inductive {
                return Err(format!("{name} {}: not inductive: {:?}", mode.name(), res.notes));
            }
            let Some(states) = &states else { continue };
            for (node, points) in states {
                let inv = &res.invariants[node];
                if let Some(bad) = points.iter().find(|s| !inv.contains_point(s)) {
                    return Err(format!("{name} {}: {bad:?} at {} outside {inv:?}", mode.name(), p.node(*node).name));
                }
            }
        }
        if states.is_some() { checked.push(*name) } else { skipped.push(*name) }
    }
    Ok(format!("contained and inductive: {checked:?}; inductive only (state space too large): {skipped:?}"))
}

fn random_atom(rng: &mut ChaCha8Rng, nums: &[NumVarId]) -> LinConstraint<NumVarId, Rat> {
    let mut e = LinExpr::constant(r(rng.gen_range(-6..=6)));
    for _ in 0..rng.gen_range(1..=3) {
        let v = nums[rng.gen_range(0..nums.len())];
        e = e + LinExpr::term(r(rng.gen_range(-3..=3)), v);
    }
    let rel = [Rel::Le, Rel::Le, Rel::Lt, Rel::Eq][rng.gen_range(0..4)];
    LinConstraint::new(e, rel)
}

fn random_formula(rng: &mut ChaCha8Rng, sig: &Signature, depth: usize) -> Formula {
    let bools: Vec<_> = (0..sig.bools.len()).map(|i| pathfocus::smt::BoolId(i as u32)).collect();
    let nums: Vec<_> = (0..sig.nums.len()).map(|i| NumVarId(i as u32)).collect();
    if depth == 0 || rng.gen_ratio(1, 4) {
        return if rng.gen_bool(0.35) {
            Formula::var(bools[rng.gen_range(0..bools.len())])
        } else {
            Formula::atom(random_atom(rng, &nums))
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, sig, depth - 1);
    match rng.gen_range(0..5) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and((0..rng.gen_range(2..=4)).map(|_| sub(rng)).collect::<Vec<_>>()),
        2 => Formula::or((0..rng.gen_range(2..=3)).map(|_| sub(rng)).collect::<Vec<_>>()),
        3 => Formula::implies(sub(rng), sub(rng)),
        _ => Formula::iff(sub(rng), sub(rng)),
    }
}

fn random_signature(rng: &mut ChaCha8Rng) -> Signature {
    let mut sig = Signature::new();
    for i in 0..rng.gen_range(1..=12) {
        sig.new_bool(format!("b{i}"));
    }
    let mixed = rng.gen_range(0..3);
    for i in 0..rng.gen_range(1..=6) {
        let sort = match mixed {
            0 => Sort::Rat,
            1 => Sort::Int,
            _ if i % 2 == 0 => Sort::Int,
            _ => Sort::Rat,
        };
        sig.new_num(format!("n{i}"), sort, NumOrigin::Fresh);
    }
    sig
}

/// Feasibility of `cs` (non-strict, bounded by the caller) by enumerating
/// every basic solution.
fn vertex_feasible(n: usize, cs: &[LinConstraint<usize, Rat>]) -> bool {
    let rows: Vec<(Vec<Rat>, Rat)> = cs
        .iter()
        .flat_map(|c| {
            let row: Vec<Rat> = (0..n).map(|v| c.expr.coeff(v)).collect();
            let rhs = -c.expr.constant_term().clone();
            let mut out = vec![(row.clone(), rhs.clone())];
            if c.rel == Rel::Eq {
                out.push((row.iter().map(|a| -a.clone()).collect(), -rhs));
            }
            out
        })
        .collect();
    let satisfies = |x: &[Rat]| cs.iter().all(|c| c.holds_with(|v| x.get(v).cloned()).unwrap());
    let mut pick = Vec::new();
    fn subsets(k: usize, start: usize, m: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if pick.len() == k {
            return f(pick);
        }
        for i in start..m {
            pick.push(i);
            if subsets(k, i + 1, m, pick, f) {
                return true;
            }
            pick.pop();
        }
        false
    }
    subsets(n, 0, rows.len(), &mut pick, &mut |idx| {
        let mut a: Vec<Vec<Rat>> = idx.iter().map(|&i| {
            let mut row = rows[i].0.clone();
            row.push(rows[i].1.clone());
            row
        }).collect();
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else { return false };
            a.swap(col, piv);
            let p = a[col][col].clone();
            for k in col..=n {
                a[col][k] = a[col][k].clone() / p.clone();
            }
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for k in col..=n {
                        let d = f.clone() * a[col][k].clone();
                        a[r][k] = a[r][k].clone() - d;
                    }
                }
            }
        }
        let x: Vec<Rat> = (0..n).map(|i| a[i][n].clone()).collect();
        satisfies(&x)
    })
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z3 = z3_command();
    let (mut sat, mut unsat, mut compared) = (0, 0, 0);
    for i in 0..200 {
        let sig = random_signature(&mut rng);
        let f = random_formula(&mut rng, &sig, 3);
        let internal = solve(&sig, &f, DEFAULT_BUDGET);
        match &internal {
            SolveResult::Sat(m) => {
                if !f.eval(m) || !m.respects_sorts(&sig) {
                    return Err(format!("formula {i}: model does not satisfy the formula"));
                }
                sat += 1;
            }
            SolveResult::Unsat => unsat += 1,
            SolveResult::Unknown(why) => return Err(format!("formula {i}: internal solver unknown: {why}")),
        }
        if let Some(cmd) = &z3 {
            let external = solve_external(&sig, &f, cmd, Duration::from_secs(20)).map_err(|e| e.to_string())?;
            match (&internal, &external) {
                (_, SolveResult::Unknown(_)) => {}
                (a, b) if a.is_sat() == b.is_sat() => compared += 1,
                _ => return Err(format!("formula {i}: internal {} vs external {}", internal.is_sat(), external.is_sat())),
            }
        }
    }
    let mut lp = 0;
    for i in 0..300 {
        let n = rng.gen_range(1..=4);
        let mut cs: Vec<LinConstraint<usize, Rat>> = Vec::new();
        for v in 0..n {
            cs.push(LinConstraint::le(LinExpr::var(v), LinExpr::constant(r(10))));
            cs.push(LinConstraint::ge(LinExpr::var(v), LinExpr::constant(r(-10))));
        }
        for _ in 0..rng.gen_range(1..=6) {
            let mut e = LinExpr::constant(r(rng.gen_range(-12..=12)));
            for v in 0..n {
                e = e + LinExpr::term(r(rng.gen_range(-3..=3)), v);
            }
            cs.push(LinConstraint::new(e, if rng.gen_ratio(1, 6) { Rel::Eq } else { Rel::Le }));
        }
        let oracle = vertex_feasible(n, &cs);
        match simplex::check(n, &cs) {
            simplex::LpResult::Sat(x) => {
                if !oracle || !cs.iter().all(|c| c.holds_with(|v| x.get(v).cloned()).unwrap()) {
                    return Err(format!("system {i}: simplex sat, oracle {oracle}"));
                }
            }
            simplex::LpResult::Unsat(core) => {
                let sub: Vec<_> = core.iter().map(|&k| cs[k].clone()).collect();
                let mut bounded = sub.clone();
                bounded.extend(cs[..2 * n].iter().cloned());
                if oracle || vertex_feasible(n, &bounded) {
                    return Err(format!("system {i}: simplex unsat with core {core:?}, oracle disagrees"));
                }
            }
        }
        lp += 1;
    }
    let ext = match z3 {
        Some(_) => format!("{compared} agreed with the external solver"),
        None => "no external solver found, comparison skipped".into(),
    };
    Ok(format!("200 formulas ({sat} sat, {unsat} unsat), {ext}; {lp} LPs match vertex enumeration"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut programs, mut queries, mut sat) = (0, 0, 0);
    while programs < 120 {
        let vars = rng.gen_range(1..=2);
        let nodes = rng.gen_range(2..=5);
        let extra = rng.gen_range(0..=4);
        let p = random_program(&mut rng, vars, nodes, extra, true);
        let cuts = compute_cuts(&p, &BTreeSet::new()).map_err(|e| e.to_string())?;
        let g = disconnect(&p, &cuts).map_err(|e| e.to_string())?;
        let total: usize = g.sources().map(|(_, s)| dag_paths(&g, s).len()).sum();
        if total > 20 {
            continue;
        }
        programs += 1;
        let ctx = build_rho(&p, &g);
        for (p1, s) in g.sources() {
            let x1 = random_box(&mut rng, vars, 3);
            let targets: std::collections::BTreeMap<_, RatBox> =
                g.reachable_sinks(p1).into_iter().map(|n| (n, random_box(&mut rng, vars, 4))).collect();
            let mut expected = false;
            for (edges, end) in dag_paths(&g, s) {
                let DNodeKind::Sink(p2) = g.kind(end) else { continue };
                let body: Vec<Command> = edges.iter().flat_map(|e| p.edge(*e).body.clone()).collect();
                for x in box_points(&x1) {
                    let outs = exec(&body, &x, 1).expect("deterministic bodies");
                    expected |= outs.iter().any(|y| !targets[&p2].contains_point(y));
                }
            }
            let f = ctx.focus_query(p1, &x1, &targets).map_err(|e| e.to_string())?;
            queries += 1;
            match solve(&ctx.sig, &f, DEFAULT_BUDGET) {
                SolveResult::Sat(m) => {
                    if !expected {
                        return Err(format!("spurious sat on\n{p:?}"));
                    }
                    sat += 1;
                    let path = ctx.extract_path(&m).map_err(|e| e.to_string())?;
                    ctx.replay(&path, &m).map_err(|e| e.to_string())?;
                    let start = ctx.state_at(&m, g.source(path.src).unwrap());
                    let end = ctx.state_at(&m, g.sink(path.dst).unwrap());
                    let outs = exec(&path.body(&p), &start, 1).unwrap();
                    if outs != vec![end.clone()] {
                        return Err(format!("path {:?} from {start:?} does not end at {end:?}", path.edges));
                    }
                }
                SolveResult::Unsat if expected => return Err(format!("missed witness on\n{p:?}")),
                SolveResult::Unsat => {}
                SolveResult::Unknown(why) => return Err(format!("solver unknown: {why}")),
            }
        }
    }
    Ok(format!("{programs} programs, {queries} focus queries ({sat} sat) agree with path enumeration"))
}

fn criterion_10() -> Outcome {
    for name in CORPUS {
        for engine in ["classical", "pathfocus", "selfloops", "compare"] {
            let path = corpus_path(name);
            let args = ["analyze", path.to_str().unwrap(), "--engine", engine, "--format", "json"];
            let (c1, a) = cli(&args);
            let (c2, b) = cli(&args);
            if a != b || c1 != c2 || a.is_empty() {
                return Err(format!("{name} {engine}: outputs differ"));
            }
        }
    }
    Ok(format!("{} programs x 4 engine settings byte-identical", CORPUS.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("circular buffer invariants", criterion_1),
        ("deterministic circular buffer, classical", criterion_2),
        ("boustrophedon", criterion_3),
        ("rate limiter", criterion_4),
        ("sinc division guard", criterion_5),
        ("acceleration", criterion_6),
        ("soundness", criterion_7),
        ("solver agreement", criterion_8),
        ("encoder agreement", criterion_9),
        ("determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
