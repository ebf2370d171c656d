//! Reader for the `.pfa` program format.
//!
//! ```text
//! vars x:int, y:rat;
//! node p1 init { };
//! node p2 assert { x <= 99 };
//! from p1 to p2 { x := 0; };
//! from p2 to p2 { assume x < 99; x := x + 1; };
//! ```

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::{Command, Edge, EdgeId, IrError, Node, NodeId, Program, Variable};
use crate::numeric::{parse_rat, Extended};
use crate::{Constraint, Expr, Rat, Sort, VarId};

const KEYWORDS: &[&str] =
    &["vars", "int", "rat", "node", "init", "assert", "from", "to", "assume", "nondet", "oo"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] =
    &[":=", "<=", ">=", "==", "<", ">", "=", ":", ",", ";", "{", "}", "(", ")", "+", "-", "*", "/"];

fn lex(text: &str) -> Result<Vec<Token>, IrError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            let word: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(word), line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            col += i - start;
            let lit: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Number(lit), line, col: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(IrError::Parse { line, col, msg: format!("unexpected character {c:?}") });
        };
        i += sym.len();
        col += sym.len();
        out.push(Token { tok: Tok::Sym(sym), line, col: start_col });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
    vars: Vec<Variable>,
    var_index: BTreeMap<String, VarId>,
}

/// Raw node declaration before id resolution.
struct NodeDecl {
    name: String,
    initial: Option<Vec<Constraint>>,
    assertions: Vec<Constraint>,
    at: (usize, usize),
}

struct EdgeDecl {
    src: String,
    dst: String,
    body: Vec<Command>,
    at: (usize, usize),
}

/// Parses and validates a program in `.pfa` syntax.
pub fn parse_program(text: &str) -> Result<Program, IrError> {
    let toks = lex(text)?;
    let end = text.lines().enumerate().last().map(|(i, l)| (i + 1, l.len() + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, end, vars: Vec::new(), var_index: BTreeMap::new() };
    p.program()
}

impl Parser {
    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.end)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, IrError> {
        let (line, col) = self.here();
        Err(IrError::Parse { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), IrError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.fail(format!("expected '{s}'"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), IrError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(format!("expected '{kw}'"))
        }
    }

    fn ident(&mut self) -> Result<String, IrError> {
        match self.peek() {
            Some(Tok::Ident(name)) if !KEYWORDS.contains(&name.as_str()) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.fail("expected identifier"),
        }
    }

    fn program(&mut self) -> Result<Program, IrError> {
        if self.peek().is_none() {
            return self.fail("empty program");
        }
        self.expect_kw("vars")?;
        loop {
            let at = self.here();
            let name = self.ident()?;
            self.expect_sym(":")?;
            let sort = if self.eat_kw("int") {
                Sort::Int
            } else if self.eat_kw("rat") {
                Sort::Rat
            } else {
                return self.fail("expected 'int' or 'rat'");
            };
            if self.var_index.contains_key(&name) {
                return Err(IrError::Validation(format!(
                    "{}:{}: duplicate variable {name}",
                    at.0, at.1
                )));
            }
            let id = VarId(self.vars.len() as u32);
            self.var_index.insert(name.clone(), id);
            self.vars.push(Variable { id, name, sort });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;

        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        while self.peek().is_some() {
            if self.peek_kw("node") {
                nodes.push(self.node()?);
            } else if self.peek_kw("from") {
                edges.push(self.edge()?);
            } else {
                return self.fail("expected 'node' or 'from'");
            }
        }
        self.assemble(nodes, edges)
    }

    fn assemble(&mut self, nodes: Vec<NodeDecl>, edges: Vec<EdgeDecl>) -> Result<Program, IrError> {
        let mut ids = BTreeMap::new();
        let mut out_nodes = Vec::new();
        for (i, n) in nodes.into_iter().enumerate() {
            let id = NodeId(i as u32);
            if ids.insert(n.name.clone(), id).is_some() {
                return Err(IrError::Validation(format!(
                    "{}:{}: duplicate node {}",
                    n.at.0, n.at.1, n.name
                )));
            }
            out_nodes.push(Node { id, name: n.name, initial: n.initial, assertions: n.assertions });
        }
        let mut out_edges = Vec::new();
        for (i, e) in edges.into_iter().enumerate() {
            let lookup = |name: &str| {
                ids.get(name).copied().ok_or_else(|| {
                    IrError::Validation(format!("{}:{}: edge endpoint {name} is not a declared node", e.at.0, e.at.1))
                })
            };
            let src = lookup(&e.src)?;
            let dst = lookup(&e.dst)?;
            out_edges.push(Edge { id: EdgeId(i as u32), src, dst, body: e.body });
        }
        Program::new(std::mem::take(&mut self.vars), out_nodes, out_edges)
    }

    fn node(&mut self) -> Result<NodeDecl, IrError> {
        let at = self.here();
        self.expect_kw("node")?;
        let name = self.ident()?;
        let mut initial = None;
        let mut assertions = Vec::new();
        if self.eat_kw("init") {
            initial = Some(self.constraint_block()?);
        }
        if self.eat_kw("assert") {
            assertions = self.constraint_block()?;
        }
        self.expect_sym(";")?;
        Ok(NodeDecl { name, initial, assertions, at })
    }

    fn constraint_block(&mut self) -> Result<Vec<Constraint>, IrError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        if self.eat_sym("}") {
            return Ok(out);
        }
        loop {
            out.push(self.constraint()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    fn edge(&mut self) -> Result<EdgeDecl, IrError> {
        let at = self.here();
        self.expect_kw("from")?;
        let src = self.ident()?;
        self.expect_kw("to")?;
        let dst = self.ident()?;
        self.expect_sym("{")?;
        let mut body = Vec::new();
        while !self.eat_sym("}") {
            if self.peek().is_none() {
                return self.fail("unterminated edge body");
            }
            body.push(self.command()?);
        }
        self.expect_sym(";")?;
        Ok(EdgeDecl { src, dst, body, at })
    }

    fn command(&mut self) -> Result<Command, IrError> {
        if self.eat_kw("assume") {
            let c = self.constraint()?;
            self.expect_sym(";")?;
            return Ok(Command::Assume(c));
        }
        let target = self.var_ref()?;
        self.expect_sym(":=")?;
        let cmd = if self.eat_kw("nondet") {
            self.expect_sym("(")?;
            let lo = self.bound()?;
            self.expect_sym(",")?;
            let hi = self.bound()?;
            self.expect_sym(")")?;
            Command::havoc(target, lo, hi)
        } else {
            Command::assign(target, self.linexpr()?)
        };
        self.expect_sym(";")?;
        Ok(cmd)
    }

    fn bound(&mut self) -> Result<Extended<Rat>, IrError> {
        let negative = self.eat_sym("-");
        if self.eat_kw("oo") {
            return Ok(if negative { Extended::NegInf } else { Extended::PosInf });
        }
        let v = self.number()?;
        Ok(Extended::Finite(if negative { -v } else { v }))
    }

    fn number(&mut self) -> Result<Rat, IrError> {
        match self.peek() {
            Some(Tok::Number(lit)) => match parse_rat(lit) {
                Some(v) => {
                    self.pos += 1;
                    Ok(v)
                }
                None => self.fail(format!("malformed number {lit}")),
            },
            _ => self.fail("expected number"),
        }
    }

    fn var_ref(&mut self) -> Result<VarId, IrError> {
        let (line, col) = self.here();
        let name = self.ident()?;
        self.var_index.get(&name).copied().ok_or_else(|| {
            IrError::Validation(format!("{line}:{col}: undeclared variable {name}"))
        })
    }

    fn constraint(&mut self) -> Result<Constraint, IrError> {
        let lhs = self.linexpr()?;
        let rel = match self.peek() {
            Some(Tok::Sym(s @ ("<=" | "<" | ">=" | ">" | "=" | "=="))) => *s,
            _ => return self.fail("expected comparison operator"),
        };
        self.pos += 1;
        let rhs = self.linexpr()?;
        Ok(match rel {
            "<=" => Constraint::le(lhs, rhs),
            "<" => Constraint::lt(lhs, rhs),
            ">=" => Constraint::ge(lhs, rhs),
            ">" => Constraint::gt(lhs, rhs),
            _ => Constraint::eq(lhs, rhs),
        })
    }

    fn linexpr(&mut self) -> Result<Expr, IrError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_sym("+") {
                acc = acc + self.term()?;
            } else if self.eat_sym("-") {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, IrError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_sym("*") {
                let rhs = self.unary()?;
                acc = match (acc.is_constant(), rhs.is_constant()) {
                    (true, _) => rhs.scaled(acc.constant_term()),
                    (_, true) => acc.scaled(rhs.constant_term()),
                    _ => return self.fail("nonlinear product"),
                };
            } else if self.eat_sym("/") {
                let rhs = self.unary()?;
                if !rhs.is_constant() {
                    return self.fail("division by a non-constant");
                }
                if rhs.constant_term().is_zero() {
                    return self.fail("division by zero");
                }
                acc = acc.scaled(&(Rat::one() / rhs.constant_term().clone()));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, IrError> {
        if self.eat_sym("-") {
            return Ok(-self.unary()?);
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        if self.eat_sym("(") {
            let e = self.linexpr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        match self.peek() {
            Some(Tok::Number(_)) => Ok(Expr::constant(self.number()?)),
            Some(Tok::Ident(_)) => Ok(Expr::var(self.var_ref()?)),
            _ => self.fail("expected expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rel;
    use crate::rat;

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(parse_program(""), Err(IrError::Parse { .. })));
        assert!(matches!(parse_program("  # only a comment\n"), Err(IrError::Parse { .. })));
    }

    #[test]
    fn expressions_and_relations() {
        let p = parse_program(
            "vars x:int, y:rat;\nnode a init { 2*(x - 1) >= y/2, x == 3 };\n",
        )
        .unwrap();
        let init = p.nodes[0].initial.as_ref().unwrap();
        let x = VarId(0);
        let y = VarId(1);
        // y/2 - 2x + 2 <= 0
        assert_eq!(init[0].rel, Rel::Le);
        assert_eq!(init[0].expr.coeff(x), rat(-2, 1));
        assert_eq!(init[0].expr.coeff(y), rat(1, 2));
        assert_eq!(init[0].expr.constant_term(), &rat(2, 1));
        assert_eq!(init[1].rel, Rel::Eq);
    }

    #[test]
    fn decimal_literal_is_exact() {
        let p = parse_program("vars x:rat;\nnode a init { x >= 0.01 };\n").unwrap();
        let c = &p.nodes[0].initial.as_ref().unwrap()[0];
        assert_eq!(c.expr.constant_term(), &rat(1, 100));
    }

    #[test]
    fn havoc_bounds() {
        let p = parse_program(
            "vars u:int;\nnode a init {};\nfrom a to a { u := nondet(-1000, oo); u := nondet(-oo, 2.5); };\n",
        )
        .unwrap();
        assert_eq!(
            p.edges[0].body[0],
            Command::havoc(VarId(0), Extended::Finite(rat(-1000, 1)), Extended::PosInf)
        );
        assert_eq!(
            p.edges[0].body[1],
            Command::havoc(VarId(0), Extended::NegInf, Extended::Finite(rat(5, 2)))
        );
    }

    #[test]
    fn errors_carry_positions() {
        match parse_program("vars x:int;\nnode a init { x * x <= 1 };") {
            Err(IrError::Parse { line: 2, msg, .. }) => assert!(msg.contains("nonlinear")),
            other => panic!("unexpected {other:?}"),
        }
        match parse_program("vars x:int;\nnode a init {};\nfrom a to a { y := 1; };") {
            Err(IrError::Validation(msg)) => assert!(msg.contains("undeclared variable y")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_program("vars x:int;\nnode a init {};\nnode a;"),
            Err(IrError::Validation(_))
        ));
        assert!(matches!(
            parse_program("vars x:int;\nnode a init {};\nfrom a to b {};"),
            Err(IrError::Validation(_))
        ));
        assert!(matches!(parse_program("vars x:int;\nnode a;"), Err(IrError::Validation(_))));
        assert!(matches!(
            parse_program("vars x:int;\nnode a init {};\nfrom a to a { x := nondet(3, 1); };"),
            Err(IrError::Validation(_))
        ));
    }
}
