//! Quantifier-free formulas over booleans and linear arithmetic, with an
//! in-process DPLL(T) solver and an SMT-LIB 2 process backend.

mod external;
mod formula;
pub mod lia;
pub mod sat;
pub mod simplex;
mod smtlib;
mod solver;

use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub use external::{default_command, solve_external, DEFAULT_COMMAND};
pub use formula::{
    Atom, BoolId, Formula, Model, NumOrigin, NumVarDecl, NumVarId, Signature, SolveResult,
};
pub use smtlib::{logic_for, numeral, symbol, to_smtlib2};
pub use solver::{atom_count, solve, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("unsupported sort: {0}")]
    UnsupportedSort(String),
    #[error("cannot start solver: {0}")]
    SolverSpawn(String),
    #[error("solver protocol error: {0}")]
    SolverProtocol(String),
    #[error("cannot write query dump: {0}")]
    Dump(String),
}

/// Which decision procedure answers queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Internal,
    External { command: String, timeout: Duration },
}

impl Backend {
    /// External backend with the default command and a 30 s timeout.
    pub fn external_default() -> Self {
        Backend::External { command: default_command(), timeout: Duration::from_secs(30) }
    }
}

/// Solver front end used by the engine: counts calls and optionally writes
/// every query to `dump_dir/query-NNNN.smt2`.
#[derive(Debug, Clone)]
pub struct SolverSession {
    pub backend: Backend,
    pub budget: u64,
    pub dump_dir: Option<PathBuf>,
    pub calls: usize,
}

impl SolverSession {
    pub fn new(backend: Backend) -> Self {
        SolverSession { backend, budget: DEFAULT_BUDGET, dump_dir: None, calls: 0 }
    }

    pub fn solve(&mut self, sig: &Signature, f: &Formula) -> Result<SolveResult, SmtError> {
        self.calls += 1;
        if let Some(dir) = &self.dump_dir {
            let text = to_smtlib2(sig, f, None)?;
            let path = dir.join(format!("query-{:04}.smt2", self.calls));
            std::fs::create_dir_all(dir)
                .and_then(|_| std::fs::write(&path, text))
                .map_err(|e| SmtError::Dump(format!("{}: {e}", path.display())))?;
        }
        match &self.backend {
            Backend::Internal => Ok(solve(sig, f, self.budget)),
            Backend::External { command, timeout } => solve_external(sig, f, command, *timeout),
        }
    }
}
