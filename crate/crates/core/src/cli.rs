//! Command-line driver.
//!
//! Exit codes: 0 success or property holds, 1 witness found or refinement
//! fails, 2 a bound was exhausted, 3 usage, parse or evaluation error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::explorer::{
    cache_names, check_reach, explore, final_values, refines, run, Bounds, Exhaustion, Settings, TraceLabel, Verdict,
};
use crate::laws::law_suite;
use crate::model::MemoryModel;
use crate::semantics::{Configuration, SpecLocals, SpecMode, System};
use crate::syntax::{parse, parse_predicate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_BOUND: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "specsim",
    version,
    about = "Explore speculative execution under weak memory models"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Memory model.
    #[arg(long, global = true, default_value = "sc", value_parser = parse_model)]
    model: MemoryModel,

    /// How conditionals speculate.
    #[arg(long, global = true, default_value = "wrong", value_parser = parse_mode)]
    spec: SpecMode,

    /// Initial registers of a speculation context.
    #[arg(long, global = true, default_value = "copy", value_parser = parse_locals)]
    spec_locals: SpecLocals,

    /// Longest explored path, in steps.
    #[arg(long, global = true, default_value_t = Bounds::default().max_depth as u64, value_parser = clap::value_parser!(u64).range(1..))]
    max_depth: u64,

    /// Unfoldings allowed per loop entry.
    #[arg(long, global = true, default_value_t = Bounds::default().loop_bound, value_parser = clap::value_parser!(u32).range(1..))]
    loop_bound: u32,

    /// Maximum nesting of speculation.
    #[arg(long, global = true, default_value_t = Bounds::default().spec_depth, value_parser = clap::value_parser!(u32).range(1..))]
    spec_depth: u32,

    /// Cap on distinct states.
    #[arg(long, global = true, default_value_t = Bounds::default().max_states as u64, value_parser = clap::value_parser!(u64).range(1..))]
    max_states: u64,

    /// Scheduler seed for `run`; also seeds the random law instances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Worker threads (1 = single-threaded).
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,

    /// Also print silent steps (run only).
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// One scheduled execution.
    Run { file: PathBuf },
    /// All terminating traces with their final states.
    Explore { file: PathBuf },
    /// Is some terminating final state satisfying EXPR reachable?
    Check {
        file: PathBuf,
        /// Predicate over globals and `proc.reg` registers.
        #[arg(long)]
        reach: String,
    },
    /// Does CONCRETE refine ABSTRACT (trace inclusion)?
    Refines { r#abstract: PathBuf, concrete: PathBuf },
    /// Check the refinement laws.
    Laws {
        /// Random instances per law.
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

fn parse_model(s: &str) -> Result<MemoryModel, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<SpecMode, String> {
    s.parse()
}

fn parse_locals(s: &str) -> Result<SpecLocals, String> {
    s.parse()
}

/// One behaviour as a jsonl record.
#[derive(Serialize)]
struct Record {
    labels: Vec<String>,
    finals: BTreeMap<String, i64>,
    cache: Vec<String>,
}

impl Record {
    fn new(sys: &System, trace: &[TraceLabel], finals: &Configuration) -> Record {
        Record {
            labels: trace.iter().map(|l| l.to_string()).collect(),
            finals: final_values(sys, finals),
            cache: cache_names(sys, &finals.mem),
        }
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Errors become exit code 3 with a message on stderr.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(e.to_string())
    }
}

fn load(path: &Path) -> Result<System, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure(format!("{}:{}:{}: {}", path.display(), e.line, e.col, e.msg)))
}

/// Runs the driver on `args` (including the program name).
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let mut io = Io { out, err };
    match dispatch(&cli, &mut io) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(io.err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn settings(cli: &Cli) -> Settings {
    Settings {
        model: cli.model,
        mode: cli.spec,
        spec_locals: cli.spec_locals,
        bounds: Bounds {
            max_depth: cli.max_depth as usize,
            loop_bound: cli.loop_bound,
            spec_depth: cli.spec_depth,
            max_states: cli.max_states as usize,
        },
        jobs: cli.jobs as usize,
    }
}

fn exhausted(io: &mut Io<'_>, e: Exhaustion) -> i32 {
    let _ = writeln!(io.err, "bound exhausted: {e}; results are incomplete");
    EXIT_BOUND
}

fn print_finals(io: &mut Io<'_>, sys: &System, cfg: &Configuration, indent: &str) -> Result<(), Failure> {
    let values: Vec<String> = final_values(sys, cfg)
        .iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect();
    writeln!(io.out, "{indent}final: {}", values.join(", "))?;
    writeln!(io.out, "{indent}cache: {{{}}}", cache_names(sys, &cfg.mem).join(", "))?;
    Ok(())
}

fn print_witness(
    io: &mut Io<'_>,
    sys: &System,
    format: Format,
    trace: &[TraceLabel],
    cfg: &Configuration,
) -> Result<(), Failure> {
    match format {
        Format::Jsonl => writeln!(io.out, "{}", serde_json::to_string(&Record::new(sys, trace, cfg))?)?,
        Format::Text => {
            for l in trace {
                writeln!(io.out, "  {l}")?;
            }
            print_finals(io, sys, cfg, "  ")?;
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli, io: &mut Io<'_>) -> Result<i32, Failure> {
    let s = settings(cli);
    match &cli.command {
        Cmd::Run { file } => {
            let sys = load(file)?;
            match run(&sys, cli.seed, &s)? {
                Ok(r) => {
                    match cli.format {
                        Format::Jsonl => writeln!(
                            io.out,
                            "{}",
                            serde_json::to_string(&Record::new(&sys, &r.trace, &r.finals))?
                        )?,
                        Format::Text => {
                            for step in &r.steps {
                                match step {
                                    Some(l) => writeln!(io.out, "{l}")?,
                                    None if cli.verbose => writeln!(io.out, "tau")?,
                                    None => {}
                                }
                            }
                            print_finals(io, &sys, &r.finals, "")?;
                        }
                    }
                    Ok(EXIT_OK)
                }
                Err(Some(e)) => Ok(exhausted(io, e)),
                Err(None) => {
                    writeln!(io.err, "no terminating execution")?;
                    Ok(EXIT_FAILS)
                }
            }
        }
        Cmd::Explore { file } => {
            let sys = load(file)?;
            let ex = explore(&sys, &s)?;
            for (i, b) in ex.behaviours.iter().enumerate() {
                match cli.format {
                    Format::Jsonl => writeln!(
                        io.out,
                        "{}",
                        serde_json::to_string(&Record::new(&sys, &b.trace, &b.finals))?
                    )?,
                    Format::Text => {
                        writeln!(io.out, "trace {}:", i + 1)?;
                        print_witness(io, &sys, cli.format, &b.trace, &b.finals)?;
                    }
                }
            }
            if cli.format == Format::Text {
                writeln!(io.out, "{} traces, {} states", ex.behaviours.len(), ex.states)?;
            }
            Ok(match ex.exhausted {
                Some(e) => exhausted(io, e),
                None => EXIT_OK,
            })
        }
        Cmd::Check { file, reach } => {
            let sys = load(file)?;
            let pred = parse_predicate(&sys, reach).map_err(|e| Failure(format!("--reach: {e}")))?;
            match check_reach(&sys, &pred, &s)? {
                Verdict::Holds => {
                    if cli.format == Format::Text {
                        writeln!(io.out, "unreachable: no terminating run satisfies {pred}")?;
                    }
                    Ok(EXIT_OK)
                }
                Verdict::Fails(w) => {
                    if cli.format == Format::Text {
                        writeln!(io.out, "reachable: {pred}")?;
                        writeln!(io.out, "witness:")?;
                    }
                    print_witness(io, &sys, cli.format, &w.trace, &w.finals)?;
                    Ok(EXIT_FAILS)
                }
                Verdict::BoundExhausted(e) => Ok(exhausted(io, e)),
            }
        }
        Cmd::Refines { r#abstract, concrete } => {
            let a = load(r#abstract)?;
            let c = load(concrete)?;
            match refines(&a, &c, &s)? {
                Verdict::Holds => {
                    if cli.format == Format::Text {
                        writeln!(
                            io.out,
                            "refines: every trace of {} is a trace of {}",
                            concrete.display(),
                            r#abstract.display()
                        )?;
                    }
                    Ok(EXIT_OK)
                }
                Verdict::Fails(w) => {
                    if cli.format == Format::Text {
                        writeln!(
                            io.out,
                            "does not refine; trace of {} missing from {}:",
                            concrete.display(),
                            r#abstract.display()
                        )?;
                    }
                    print_witness(io, &c, cli.format, &w.trace, &w.finals)?;
                    Ok(EXIT_FAILS)
                }
                Verdict::BoundExhausted(e) => Ok(exhausted(io, e)),
            }
        }
        Cmd::Laws { instances } => {
            let report = law_suite(&s, *instances, cli.seed)?;
            for r in &report.results {
                let status = match (r.not_applicable, r.passed()) {
                    (Some(why), _) => format!("n/a ({why})"),
                    (None, true) => "pass".to_string(),
                    (None, false) => "FAIL".to_string(),
                };
                writeln!(
                    io.out,
                    "{} [{}]: {} checked, {} with traces: {status}",
                    r.law,
                    r.law.statement(),
                    r.checked,
                    r.nonvacuous
                )?;
                for f in &r.failures {
                    writeln!(io.out, "    {} [= {}: {}", f.abstract_, f.concrete, f.reason)?;
                }
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILS })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("specsim").chain(args.iter().copied());
        let code = main_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn fixture(name: &str) -> String {
        crate::scenarios::fixtures_dir().join(name).display().to_string()
    }

    #[test]
    fn usage_errors_exit_3() {
        assert_eq!(drive(&["explore"]).0, EXIT_USAGE);
        assert_eq!(drive(&["explore", "x.prog", "--model", "arm"]).0, EXIT_USAGE);
        assert_eq!(drive(&["explore", "x.prog", "--max-depth", "0"]).0, EXIT_USAGE);
        assert_eq!(drive(&["explore", "/nonexistent.prog"]).0, EXIT_USAGE);
    }

    #[test]
    fn parse_errors_carry_position() {
        let dir = std::env::temp_dir().join(format!("specsim-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let bad = dir.join("bad.prog");
        std::fs::write(&bad, "process P {\n code { q := 1 }\n}\n").unwrap();
        let (code, _, err) = drive(&["explore", bad.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("bad.prog:2:9"), "{err}");
    }

    #[test]
    fn check_spectre_finds_leak() {
        let (code, out, _) = drive(&[
            "check",
            &fixture("spectre.prog"),
            "--reach",
            "atk.r = 5",
            "--spec",
            "wrong",
        ]);
        assert_eq!(code, EXIT_FAILS);
        assert!(out.contains("V: fetch A[4]") && out.contains("V: fetch B[5]"), "{out}");
    }

    #[test]
    fn check_fenced_spectre_holds() {
        let (code, out, _) = drive(&["check", &fixture("spectre_fenced.prog"), "--reach", "atk.r = 5"]);
        assert_eq!(code, EXIT_OK, "{out}");
    }

    #[test]
    fn refines_identical_files() {
        let f = fixture("sb.prog");
        assert_eq!(drive(&["refines", &f, &f]).0, EXIT_OK);
    }

    #[test]
    fn bound_exhaustion_exits_2() {
        let (code, _, err) = drive(&["explore", &fixture("spectre.prog"), "--loop-bound", "2"]);
        assert_eq!(code, EXIT_BOUND);
        assert!(err.contains("loop-bound"));
    }

    #[test]
    fn run_prints_labels() {
        let (code, out, _) = drive(&["run", &fixture("worked_example.prog"), "--seed", "3"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("P1: y := 7"), "{out}");
        assert!(out.contains("final:"));
    }

    #[test]
    fn jsonl_records_have_fixed_fields() {
        let (code, out, _) = drive(&["explore", &fixture("worked_example.prog"), "--format", "jsonl"]);
        assert_eq!(code, EXIT_OK);
        for line in out.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
            assert_eq!(keys.len(), 3);
            assert!(line.starts_with("{\"labels\":"));
        }
    }
}
