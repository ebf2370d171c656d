//! Out-of-process SMT-LIB 2 backend.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_traits::Zero;

use super::formula::{Formula, Model, Signature, SolveResult};
use super::smtlib::{symbol, to_smtlib2};
use super::SmtError;
use crate::numeric::parse_rat;
use crate::{Rat, Sort};

/// Solver command used when neither the caller nor `PATHFOCUS_SMT` names one.
pub const DEFAULT_COMMAND: &str = "z3 -in -smt2";

/// The command from `PATHFOCUS_SMT`, or [`DEFAULT_COMMAND`].
pub fn default_command() -> String {
    std::env::var("PATHFOCUS_SMT").ok().filter(|s| !s.trim().is_empty()).unwrap_or_else(|| DEFAULT_COMMAND.into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Result<Vec<String>, SmtError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            ';' => {
                while chars.next().is_some_and(|c| c != '\n') {}
            }
            '|' | '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some(d) if d == c => break,
                        Some(d) => s.push(d),
                        None => return Err(SmtError::SolverProtocol("unterminated quoted token".into())),
                    }
                }
                out.push(if c == '|' { s } else { format!("\"{s}\"") });
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn parse_all(text: &str) -> Result<Vec<Sexp>, SmtError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let list = stack.pop().filter(|_| !stack.is_empty());
                let list = list.ok_or_else(|| SmtError::SolverProtocol("unbalanced ')'".into()))?;
                stack.last_mut().unwrap().push(Sexp::List(list));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(t)),
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::SolverProtocol("unbalanced '('".into()));
    }
    Ok(stack.pop().unwrap())
}

fn value_of(e: &Sexp) -> Result<Rat, SmtError> {
    let bad = || SmtError::SolverProtocol(format!("unsupported value {e:?}"));
    match e {
        Sexp::Atom(a) => parse_rat(a).ok_or_else(bad),
        Sexp::List(items) => {
            let Some(Sexp::Atom(op)) = items.first() else { return Err(bad()) };
            let args: Vec<Rat> = items[1..].iter().map(value_of).collect::<Result<_, _>>()?;
            match (op.as_str(), args.as_slice()) {
                ("-", [a]) => Ok(-a.clone()),
                ("-", [a, rest @ ..]) => Ok(rest.iter().fold(a.clone(), |acc, x| acc - x)),
                ("+", _) => Ok(args.iter().fold(Rat::zero(), |acc, x| acc + x)),
                ("*", _) => Ok(args.iter().fold(Rat::from_integer(1.into()), |acc, x| acc * x)),
                ("/", [a, b]) if !b.is_zero() => Ok(a / b),
                ("to_real" | "to_int", [a]) => Ok(a.clone()),
                _ => Err(bad()),
            }
        }
    }
}

/// Parses solver output for a script ending in `check-sat`, `get-model`.
fn parse_response(sig: &Signature, text: &str) -> Result<SolveResult, SmtError> {
    let items = parse_all(text)?;
    let Some(Sexp::Atom(status)) = items.first() else {
        return Err(SmtError::SolverProtocol(format!("no check-sat answer in {:?}", text.trim())));
    };
    match status.as_str() {
        "unsat" => return Ok(SolveResult::Unsat),
        "unknown" => return Ok(SolveResult::Unknown("external solver answered unknown".into())),
        "sat" => {}
        _ => return Err(SmtError::SolverProtocol(format!("unexpected answer {status}"))),
    }
    let mut model = Model { bools: vec![false; sig.bools.len()], nums: vec![Rat::zero(); sig.nums.len()] };
    let Some(Sexp::List(defs)) = items.get(1) else {
        return Err(SmtError::SolverProtocol("missing model".into()));
    };
    for def in defs {
        let Sexp::List(parts) = def else { continue };
        // (define-fun NAME () SORT VALUE)
        let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), _sort, value] = parts.as_slice() else {
            continue;
        };
        if kw != "define-fun" || !params.is_empty() {
            continue;
        }
        if let Some(i) = sig.bools.iter().position(|b| b == name || symbol(b) == *name) {
            model.bools[i] = match value {
                Sexp::Atom(v) if v == "true" => true,
                Sexp::Atom(v) if v == "false" => false,
                _ => return Err(SmtError::SolverProtocol(format!("bad boolean value for {name}"))),
            };
        } else if let Some(i) = sig.nums.iter().position(|d| d.name == *name || symbol(&d.name) == *name) {
            model.nums[i] = value_of(value)?;
        }
    }
    Ok(SolveResult::Sat(model))
}

/// Runs `command` on the script for `f` and decodes its answer. Sat models
/// are re-checked by evaluation.
pub fn solve_external(sig: &Signature, f: &Formula, command: &str, timeout: Duration) -> Result<SolveResult, SmtError> {
    let script = to_smtlib2(sig, f, None)?;
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| SmtError::SolverSpawn("empty solver command".into()))?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SmtError::SolverSpawn(format!("{command}: {e}")))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        stdout.read_to_string(&mut buf).map(|_| buf)
    });
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        // a solver that exits early closes the pipe; its output says why
        let _ = stdin.write_all(script.as_bytes());
    }
    let start = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SolveResult::Unknown("external solver timed out".into()));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => return Err(SmtError::SolverProtocol(format!("waiting for solver: {e}"))),
        }
    }
    let text = reader
        .join()
        .map_err(|_| SmtError::SolverProtocol("reader thread panicked".into()))?
        .map_err(|e| SmtError::SolverProtocol(format!("reading solver output: {e}")))?;
    let result = parse_response(sig, &text)?;
    if let SolveResult::Sat(m) = &result {
        let sorts_ok = sig.nums.iter().zip(&m.nums).all(|(d, v)| d.sort == Sort::Rat || v.is_integer());
        if !sorts_ok || !f.eval(m) {
            return Ok(SolveResult::Unknown("model check failed".into()));
        }
    }
    Ok(result)
}
