//! Command-line surface.
//!
//! Exit codes follow solver-competition conventions: 10 SAT, 20 UNSAT,
//! 30 UNKNOWN, 1 usage error, 2 input error. The first stdout line of
//! `solve` and `check` is always one of `SAT`, `UNSAT`, `UNKNOWN`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::bench::{generate, run_suite, GenSpec};
use crate::formula::{parse, ClauseSet, Valuation};
use crate::interop;
use crate::oracle::{grid_search, GridSpec};
use crate::rat::{format_rat, parse_rat};
use crate::solver::{
    run_backend, verify_model, Backend, Cert, SolveReport, SolverConfig, Verdict,
};
use crate::translate::{build_problem_with, RewriteMode, TranslateOptions};

const EXIT_SAT: i32 = 10;
const EXIT_UNSAT: i32 = 20;
const EXIT_UNKNOWN: i32 = 30;
const EXIT_USAGE: i32 = 1;
const EXIT_INPUT: i32 = 2;

#[derive(Parser)]
#[command(
    name = "lpgsat",
    version,
    about = "Satisfiability solver for Łukasiewicz, Product and Gödel fuzzy logics",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SolveFlags {
    /// Residual tolerance for numerical certificates.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Box width below which candidates are extracted.
    #[arg(long)]
    delta: Option<f64>,
    /// Worker threads (1 = strictly deterministic search order).
    #[arg(long)]
    threads: Option<usize>,
    /// Random seed recorded in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Time budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Node budget for the search.
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Accept an external solver's INFEASIBLE answer as UNSAT.
    #[arg(long)]
    trust_external_unsat: bool,
    /// Translate via the Łukasiewicz-base rewriting instead of the native
    /// per-connective encodings (differential testing aid).
    #[arg(long)]
    rewrite_luk: bool,
}

impl SolveFlags {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.timeout {
            cfg.time_budget = Duration::from_secs_f64(t.max(0.0));
        }
        if let Some(n) = self.max_nodes {
            cfg.max_nodes = n;
        }
        cfg.trust_external_unsat = self.trust_external_unsat;
        cfg
    }

    fn translate_options(&self) -> TranslateOptions {
        TranslateOptions {
            rewrite: if self.rewrite_luk {
                RewriteMode::LukBase
            } else {
                RewriteMode::Native
            },
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide satisfiability of a clause file.
    Solve {
        file: PathBuf,
        /// `native`, `export` or `external:CMD`.
        #[arg(long, default_value = "native")]
        backend: String,
        /// Output path for the exported model (export backend).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Print `assign <var> <p/q>` model lines on SAT.
        #[arg(long)]
        model: bool,
        /// Print search statistics.
        #[arg(long)]
        stats: bool,
        /// Print the full verdict as JSON after the first line.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Translate a clause file and write the `.fmp` model.
    Export {
        file: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Run the exhaustive grid oracle (sound for SAT, incomplete).
    Check {
        file: PathBuf,
        /// Grid denominator k (values 0, 1/k, ..., 1).
        #[arg(long, default_value_t = 16)]
        grid: u32,
        /// Maximum number of variables the oracle will enumerate.
        #[arg(long, default_value_t = 8)]
        cap: usize,
        /// Print the witness as `assign` lines when found.
        #[arg(long)]
        model: bool,
    },
    /// Verify a model file against a clause file (exit 0 iff it certifies).
    VerifyModel { file: PathBuf, model: PathBuf },
    /// Generate instances from a JSON spec, solve them and write a CSV.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
    },
}

fn input_err(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_INPUT
}

fn read_clause_file(path: &Path) -> Result<ClauseSet, i32> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_err(format_args!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| input_err(format_args!("{}: {e}", path.display())))
}

fn verdict_exit(v: &Verdict) -> i32 {
    match v {
        Verdict::Sat { .. } => EXIT_SAT,
        Verdict::Unsat => EXIT_UNSAT,
        Verdict::Unknown { .. } => EXIT_UNKNOWN,
    }
}

fn print_report(report: &SolveReport, model: bool, stats: bool, json: bool) {
    println!("{}", report.verdict.word());
    if let Verdict::Sat { model: m, .. } = &report.verdict {
        if model {
            for (name, value) in m.iter() {
                println!("assign {name} {}", format_rat(value));
            }
        }
    }
    if stats {
        let s = &report.stats;
        println!(
            "stats nodes={} refuted={} contractions={} wall_ms={}",
            s.nodes,
            s.refuted,
            s.contractions,
            s.wall.as_millis()
        );
    }
    if json {
        println!("{}", verdict_json(report));
    }
}

fn verdict_json(report: &SolveReport) -> serde_json::Value {
    let (cert, reason, model) = match &report.verdict {
        Verdict::Sat { model, cert } => (
            Some(match cert {
                Cert::Exact => "exact",
                Cert::Numerical => "numerical",
            }),
            None,
            Some(
                model
                    .iter()
                    .map(|(k, v)| (k.clone(), serde_json::json!(format_rat(v))))
                    .collect::<serde_json::Map<_, _>>(),
            ),
        ),
        Verdict::Unsat => (None, None, None),
        Verdict::Unknown { reason } => (None, Some(reason.clone()), None),
    };
    serde_json::json!({
        "verdict": report.verdict.word(),
        "cert": cert,
        "reason": reason,
        "model": model,
        "stats": {
            "nodes": report.stats.nodes,
            "refuted": report.stats.refuted,
            "contractions": report.stats.contractions,
            "wall_ms": report.stats.wall.as_millis() as u64,
        },
    })
}

fn parse_backend(spec: &str, file: &Path, out: Option<&PathBuf>) -> Result<Backend, i32> {
    if spec == "native" {
        return Ok(Backend::Native);
    }
    if spec == "export" {
        let dest = out
            .cloned()
            .unwrap_or_else(|| file.with_extension("fmp"));
        return Ok(Backend::ExportOnly { dest });
    }
    if let Some(cmd) = spec.strip_prefix("external:") {
        if cmd.trim().is_empty() {
            eprintln!("error: external backend needs a command, e.g. external:./adapter");
            return Err(EXIT_USAGE);
        }
        return Ok(Backend::External {
            command: cmd.to_string(),
        });
    }
    eprintln!("error: unknown backend `{spec}` (native, export, external:CMD)");
    Err(EXIT_USAGE)
}

/// Parses a model file of `assign <var> <value>` lines (the `assign` keyword
/// is optional; values are `p/q` or decimals).
fn read_assignment_file(path: &Path) -> Result<Vec<(String, String)>, i32> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_err(format_args!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let mut first = toks.next().unwrap_or_default();
        if first == "assign" {
            first = match toks.next() {
                Some(t) => t,
                None => {
                    return Err(input_err(format_args!(
                        "{}:{}: assign needs a variable and value",
                        path.display(),
                        i + 1
                    )))
                }
            };
        }
        let value = match toks.next() {
            Some(v) => v,
            None => {
                return Err(input_err(format_args!(
                    "{}:{}: missing value for `{first}`",
                    path.display(),
                    i + 1
                )))
            }
        };
        out.push((first.to_string(), value.to_string()));
    }
    Ok(out)
}

fn cmd_solve(
    file: &Path,
    backend: &str,
    out: Option<&PathBuf>,
    model: bool,
    stats: bool,
    json: bool,
    flags: &SolveFlags,
) -> i32 {
    let set = match read_clause_file(file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let backend = match parse_backend(backend, file, out) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let problem = build_problem_with(&set, &flags.translate_options());
    let cfg = flags.config();
    match run_backend(&problem, &set, &cfg, &backend) {
        Ok(report) => {
            print_report(&report, model, stats, json);
            verdict_exit(&report.verdict)
        }
        Err(e) => input_err(e),
    }
}

fn cmd_export(file: &Path, out: &Path, flags: &SolveFlags) -> i32 {
    let set = match read_clause_file(file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let problem = build_problem_with(&set, &flags.translate_options());
    match interop::write_model(&problem, out) {
        Ok(()) => {
            eprintln!("wrote {}", out.display());
            0
        }
        Err(e) => input_err(format_args!("cannot write {}: {e}", out.display())),
    }
}

fn cmd_check(file: &Path, grid: u32, cap: usize, model: bool) -> i32 {
    let set = match read_clause_file(file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let spec = GridSpec {
        denominator: grid,
        var_cap: cap,
    };
    match grid_search(&set, &spec) {
        Ok(Some(witness)) => {
            println!("SAT");
            if model {
                for (name, value) in witness.iter() {
                    println!("assign {name} {}", format_rat(value));
                }
            }
            EXIT_SAT
        }
        Ok(None) => {
            // A grid miss proves nothing.
            println!("UNKNOWN");
            EXIT_UNKNOWN
        }
        Err(e) => input_err(e),
    }
}

fn cmd_verify_model(file: &Path, model_path: &Path) -> i32 {
    let set = match read_clause_file(file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let pairs = match read_assignment_file(model_path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let mut v = Valuation::new();
    for (name, raw) in pairs {
        match parse_rat(&raw) {
            Ok(r) => {
                if v.insert(name.clone(), r).is_err() {
                    return input_err(format_args!("value for `{name}` outside [0,1]"));
                }
            }
            Err(e) => return input_err(format_args!("value for `{name}`: {e}")),
        }
    }
    for name in set.vocabulary() {
        if v.get(name).is_none() {
            return input_err(format_args!("model does not bind variable `{name}`"));
        }
    }
    if verify_model(&set, &v) {
        println!("VERIFIED");
        0
    } else {
        println!("REJECTED");
        1
    }
}

fn cmd_bench(spec_path: &Path, csv_path: &Path, flags: &SolveFlags) -> i32 {
    let text = match std::fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => return input_err(format_args!("cannot read {}: {e}", spec_path.display())),
    };
    let spec: GenSpec = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => return input_err(format_args!("{}: {e}", spec_path.display())),
    };
    let instances = match generate(&spec) {
        Ok(i) => i,
        Err(e) => return input_err(e),
    };
    let cfg = flags.config();
    let report = run_suite(&instances, &cfg);
    if let Err(e) = std::fs::write(csv_path, report.to_csv()) {
        return input_err(format_args!("cannot write {}: {e}", csv_path.display()));
    }
    println!(
        "instances={} SAT={} UNSAT={} UNKNOWN={} csv={}",
        report.rows.len(),
        report.sat,
        report.unsat,
        report.unknown,
        csv_path.display()
    );
    0
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and exit successfully.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match &cli.cmd {
        Cmd::Solve {
            file,
            backend,
            out,
            model,
            stats,
            json,
            flags,
        } => cmd_solve(file, backend, out.as_ref(), *model, *stats, *json, flags),
        Cmd::Export { file, out, flags } => cmd_export(file, out, flags),
        Cmd::Check {
            file,
            grid,
            cap,
            model,
        } => cmd_check(file, *grid, *cap, *model),
        Cmd::VerifyModel { file, model } => cmd_verify_model(file, model),
        Cmd::Bench { spec, csv, flags } => cmd_bench(spec, csv, flags),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_strings_parse() {
        let f = PathBuf::from("inst.fz");
        assert!(matches!(
            parse_backend("native", &f, None),
            Ok(Backend::Native)
        ));
        match parse_backend("export", &f, None) {
            Ok(Backend::ExportOnly { dest }) => assert_eq!(dest, PathBuf::from("inst.fmp")),
            other => panic!("unexpected {other:?}"),
        }
        match parse_backend("external:./adapter --fast", &f, None) {
            Ok(Backend::External { command }) => assert_eq!(command, "./adapter --fast"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_backend("gurobi", &f, None).is_err());
        assert!(parse_backend("external:", &f, None).is_err());
    }

    #[test]
    fn json_verdict_shape() {
        let report = SolveReport {
            verdict: Verdict::Unknown {
                reason: "exported".into(),
            },
            stats: Default::default(),
        };
        let v = verdict_json(&report);
        assert_eq!(v["verdict"], "UNKNOWN");
        assert_eq!(v["reason"], "exported");
        assert!(v["model"].is_null());
    }
}
