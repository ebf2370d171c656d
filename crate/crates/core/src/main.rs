use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use pathfocus::engine::{analyze, AnalysisResult, EngineConfig, EngineError, EngineMode, MAX_NARROW_STEPS};
use pathfocus::ir::{parse_program, Program};
use pathfocus::report::{build_report, render_comparison, render_json, render_text};
use pathfocus::smt::{default_command, Backend};

const EXIT_OK: u8 = 0;
const EXIT_NOT_VERIFIED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pathfocus", version, about = "Interval invariants by SMT-guided path focusing")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Classical,
    Pathfocus,
    Selfloops,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Compute invariants for a .pfa program.
    Analyze {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "pathfocus")]
        engine: EngineArg,
        /// Accelerate self-loops that are guarded translations.
        #[arg(long)]
        accel: bool,
        /// Descending steps after the ascending phase.
        #[arg(long, default_value_t = 2)]
        narrow: usize,
        /// `internal`, `external` or `external:COMMAND`.
        #[arg(long, default_value = "internal")]
        solver: String,
        /// Write every query as SMT-LIB 2 into this directory.
        #[arg(long)]
        dump_smt: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        /// Maximum number of worklist steps plus solver calls.
        #[arg(long)]
        budget: Option<u64>,
        /// Extra abstraction points, comma separated.
        #[arg(long, value_delimiter = ',')]
        pr_extra: Vec<String>,
        /// Report wall-clock time (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
        /// Timeout per external solver query, in seconds.
        #[arg(long, default_value_t = 30)]
        solver_timeout: u64,
    },
}

fn backend(spec: &str, timeout: Duration) -> Result<Backend, String> {
    match spec {
        "internal" => Ok(Backend::Internal),
        "external" => Ok(Backend::External { command: default_command(), timeout }),
        _ => match spec.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Backend::External { command: cmd.to_string(), timeout }),
            _ => Err(format!("unknown solver {spec:?}; expected internal, external or external:COMMAND")),
        },
    }
}

fn exit_code_for(e: &EngineError) -> u8 {
    match e {
        EngineError::InvalidConfig(_) | EngineError::Ir(_) => EXIT_USAGE,
        EngineError::BudgetExhausted(_) => EXIT_NOT_VERIFIED,
        _ => EXIT_SOLVER,
    }
}

fn verdict_code(r: &AnalysisResult) -> u8 {
    if r.inductive && !r.has_unknown_assertion() {
        EXIT_OK
    } else {
        EXIT_NOT_VERIFIED
    }
}

fn program_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn run(cli: Cli) -> u8 {
    let Cmd::Analyze {
        file,
        engine,
        accel,
        narrow,
        solver,
        dump_smt,
        format,
        budget,
        pr_extra,
        timing,
        solver_timeout,
    } = cli.command;
    let text = match std::fs::read_to_string(&file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return EXIT_USAGE;
        }
    };
    let program = match parse_program(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", file.display());
            return EXIT_USAGE;
        }
    };
    if narrow > MAX_NARROW_STEPS {
        eprintln!("error: --narrow must be at most {MAX_NARROW_STEPS}");
        return EXIT_USAGE;
    }
    let backend = match backend(&solver, Duration::from_secs(solver_timeout)) {
        Ok(b) => b,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut extra = BTreeSet::new();
    for name in pr_extra.iter().filter(|n| !n.is_empty()) {
        match program.node_by_name(name) {
            Some(n) => {
                extra.insert(n);
            }
            None => {
                eprintln!("error: --pr-extra: no node named {name:?}");
                return EXIT_USAGE;
            }
        }
    }
    let config = |mode| {
        let mut cfg = EngineConfig::new(mode);
        cfg.use_acceleration = accel;
        cfg.narrow_steps = narrow;
        cfg.backend = backend.clone();
        cfg.extra_abstraction = extra.clone();
        if let Some(b) = budget {
            cfg.step_budget = b;
        }
        cfg
    };
    let modes: Vec<EngineMode> = match engine {
        EngineArg::Classical => vec![EngineMode::Classical],
        EngineArg::Pathfocus => vec![EngineMode::PathFocus],
        EngineArg::Selfloops => vec![EngineMode::PathFocusSelfLoops],
        EngineArg::Compare => vec![EngineMode::Classical, EngineMode::PathFocus, EngineMode::PathFocusSelfLoops],
    };
    let outcomes: Vec<Result<AnalysisResult, EngineError>> = if modes.len() == 1 {
        let mut cfg = config(modes[0]);
        cfg.dump_dir = dump_smt.clone();
        vec![analyze(&program, &cfg)]
    } else {
        // each engine dumps into its own subdirectory
        std::thread::scope(|s| {
            let handles: Vec<_> = modes
                .iter()
                .map(|&m| {
                    let mut cfg = config(m);
                    cfg.dump_dir = dump_smt.as_ref().map(|d| d.join(m.name()));
                    let program = &program;
                    s.spawn(move || analyze(program, &cfg))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("engine thread panicked")).collect()
        })
    };
    emit(&program, &program_name(&file), &modes, outcomes, format, timing)
}

fn emit(
    program: &Program,
    name: &str,
    modes: &[EngineMode],
    outcomes: Vec<Result<AnalysisResult, EngineError>>,
    format: FormatArg,
    timing: bool,
) -> u8 {
    let mut code = EXIT_OK;
    let mut done = Vec::new();
    for (mode, outcome) in modes.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                code = code.max(verdict_code(&r));
                for n in &r.notes {
                    eprintln!("{}: {n}", mode.name());
                }
                done.push(r);
            }
            Err(e) => {
                eprintln!("error: {} engine: {e}", mode.name());
                code = code.max(exit_code_for(&e));
            }
        }
    }
    let reports: Vec<_> = done.iter().map(|r| build_report(name, program, r, timing)).collect();
    match format {
        FormatArg::Json => {
            if !reports.is_empty() {
                print!("{}", render_json(&reports));
            }
        }
        FormatArg::Text => {
            for (r, res) in reports.iter().zip(&done) {
                print!("{}", render_text(r, &res.notes));
            }
            if done.len() > 1 {
                let named: Vec<_> = done.iter().map(|r| (r.mode.name().to_string(), r)).collect();
                print!("{}", render_comparison(program, &named));
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { EXIT_USAGE } else { EXIT_OK });
        }
    };
    ExitCode::from(run(cli))
}
