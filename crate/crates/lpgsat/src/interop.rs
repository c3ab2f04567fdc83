//! Bit-exact model serialization (`.fmp`) and the external-solver adapter
//! protocol.
//!
//! Model grammar, one item per line, rationals always `p/q`:
//!
//! ```text
//! fmp 1
//! var <name> <cont|int> <lb> <ub>
//! obj min [<name> (+ <name>)*]
//! lin  <term> (+ <term>)* <le|ge|eq> <rat>
//! quad <term> (+ <term>)* <le|ge|eq> <rat>     term := rat*var | rat*var*var
//! ```
//!
//! The writer is deterministic: variables in id order, constraints in
//! problem order, canonical reduced rationals. The reader additionally
//! accepts `<=`, `>=`, `=` relation spellings and missing `+` separators, so
//! hand-written files stay easy.
//!
//! Adapter protocol: the solver runs `cmd <modelpath>` and reads stdout
//! lines `status <FEASIBLE|INFEASIBLE|UNKNOWN>` followed by zero or more
//! `assign <var> <decimal-or-p/q>` lines.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::rat::{format_rat, parse_rat, Rat};
use crate::translate::{Constraint, Problem, Relation, VarId, VarKind};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct ModelParseError {
    pub line: usize,
    pub message: String,
}

impl ModelParseError {
    fn new(line: usize, message: impl Into<String>) -> ModelParseError {
        ModelParseError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum InteropError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] ModelParseError),
}

fn term_string(coef: &Rat, vars: &[&str]) -> String {
    let mut s = format_rat(coef);
    for v in vars {
        s.push('*');
        s.push_str(v);
    }
    s
}

/// Deterministic textual rendering of a problem.
pub fn model_to_string(p: &Problem) -> String {
    let mut out = String::new();
    out.push_str(&format!("fmp {FORMAT_VERSION}\n"));
    for def in p.vars() {
        let kind = match def.kind {
            VarKind::Continuous => "cont",
            VarKind::Binary => "int",
        };
        out.push_str(&format!(
            "var {} {} {} {}\n",
            def.name,
            kind,
            format_rat(&def.lb),
            format_rat(&def.ub)
        ));
    }
    out.push_str("obj min");
    for (i, id) in p.minimize.iter().enumerate() {
        if i > 0 {
            out.push_str(" +");
        }
        out.push(' ');
        out.push_str(&p.var(*id).name);
    }
    out.push('\n');
    for c in &p.constraints {
        let kind = if c.bilinear.is_empty() { "lin" } else { "quad" };
        out.push_str(kind);
        let mut first = true;
        for (k, v) in &c.linear {
            if !first {
                out.push_str(" +");
            }
            out.push(' ');
            out.push_str(&term_string(k, &[&p.var(*v).name]));
            first = false;
        }
        for (k, a, b) in &c.bilinear {
            if !first {
                out.push_str(" +");
            }
            out.push(' ');
            out.push_str(&term_string(k, &[&p.var(*a).name, &p.var(*b).name]));
            first = false;
        }
        out.push_str(&format!(" {} {}\n", c.relation, format_rat(&c.constant)));
    }
    out
}

/// Writes the model to a file.
pub fn write_model(p: &Problem, dest: &Path) -> std::io::Result<()> {
    std::fs::write(dest, model_to_string(p))
}

fn parse_relation(tok: &str) -> Option<Relation> {
    match tok {
        "le" | "<=" => Some(Relation::Le),
        "ge" | ">=" => Some(Relation::Ge),
        "eq" | "=" => Some(Relation::Eq),
        _ => None,
    }
}

/// Parses the textual model format back into a [`Problem`]. The result has
/// no subformula bookkeeping (origin maps are empty): it is the MINLP
/// content only.
pub fn model_from_str(text: &str) -> Result<Problem, ModelParseError> {
    let mut lines = text.lines().enumerate();
    let (first_no, first) = loop {
        match lines.next() {
            Some((i, l)) if !l.trim().is_empty() => break (i + 1, l.trim()),
            Some(_) => continue,
            None => return Err(ModelParseError::new(1, "empty model file")),
        }
    };
    match first.strip_prefix("fmp ") {
        Some(v) if v.trim() == FORMAT_VERSION.to_string() => {}
        Some(v) => {
            return Err(ModelParseError::new(
                first_no,
                format!("unsupported format version `{}`", v.trim()),
            ))
        }
        None => {
            return Err(ModelParseError::new(
                first_no,
                "missing `fmp <version>` header",
            ))
        }
    }
    let mut p = Problem::new();
    let mut saw_obj = false;
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("var") => {
                let name = toks
                    .next()
                    .ok_or_else(|| ModelParseError::new(line_no, "var needs a name"))?;
                let kind = match toks.next() {
                    Some("cont") => VarKind::Continuous,
                    Some("int") => VarKind::Binary,
                    other => {
                        return Err(ModelParseError::new(
                            line_no,
                            format!("bad variable kind {other:?}"),
                        ))
                    }
                };
                let lb = toks
                    .next()
                    .ok_or_else(|| ModelParseError::new(line_no, "var needs bounds"))
                    .and_then(|t| {
                        parse_rat(t).map_err(|e| ModelParseError::new(line_no, e))
                    })?;
                let ub = toks
                    .next()
                    .ok_or_else(|| ModelParseError::new(line_no, "var needs bounds"))
                    .and_then(|t| {
                        parse_rat(t).map_err(|e| ModelParseError::new(line_no, e))
                    })?;
                if lb > ub {
                    return Err(ModelParseError::new(line_no, "lower bound above upper"));
                }
                let id = p
                    .add_var(name, kind, lb, ub)
                    .map_err(|e| ModelParseError::new(line_no, e.to_string()))?;
                if matches!(kind, VarKind::Binary) {
                    p.integers.insert(id);
                }
            }
            Some("obj") => {
                if saw_obj {
                    return Err(ModelParseError::new(line_no, "duplicate objective line"));
                }
                saw_obj = true;
                match toks.next() {
                    Some("min") => {}
                    other => {
                        return Err(ModelParseError::new(
                            line_no,
                            format!("expected `min`, found {other:?}"),
                        ))
                    }
                }
                for tok in toks {
                    if tok == "+" {
                        continue;
                    }
                    let id = p.var_by_name(tok).ok_or_else(|| {
                        ModelParseError::new(
                            line_no,
                            format!("objective references unknown variable `{tok}`"),
                        )
                    })?;
                    if !p.integers.contains(&id) {
                        return Err(ModelParseError::new(
                            line_no,
                            format!("minimized variable `{tok}` must be declared int"),
                        ));
                    }
                    p.minimize.insert(id);
                }
            }
            Some(kind @ ("lin" | "quad")) => {
                let rest: Vec<&str> = toks.collect();
                let rel_pos = rest
                    .iter()
                    .position(|t| parse_relation(t).is_some())
                    .ok_or_else(|| {
                        ModelParseError::new(line_no, "missing relation token (le/ge/eq)")
                    })?;
                let relation = parse_relation(rest[rel_pos]).unwrap();
                if rel_pos + 2 != rest.len() {
                    return Err(ModelParseError::new(
                        line_no,
                        "expected exactly one right-hand rational after the relation",
                    ));
                }
                let constant = parse_rat(rest[rel_pos + 1])
                    .map_err(|e| ModelParseError::new(line_no, e))?;
                let mut linear: Vec<(Rat, VarId)> = Vec::new();
                let mut bilinear: Vec<(Rat, VarId, VarId)> = Vec::new();
                for tok in &rest[..rel_pos] {
                    if *tok == "+" {
                        continue;
                    }
                    let mut parts = tok.split('*');
                    let coef = parts
                        .next()
                        .ok_or_else(|| ModelParseError::new(line_no, "empty term"))
                        .and_then(|t| {
                            parse_rat(t).map_err(|e| ModelParseError::new(line_no, e))
                        })?;
                    let lookup = |name: &str| {
                        p.var_by_name(name).ok_or_else(|| {
                            ModelParseError::new(
                                line_no,
                                format!("constraint references unknown variable `{name}`"),
                            )
                        })
                    };
                    match (parts.next(), parts.next(), parts.next()) {
                        (Some(a), None, _) => linear.push((coef, lookup(a)?)),
                        (Some(a), Some(b), None) => {
                            bilinear.push((coef, lookup(a)?, lookup(b)?))
                        }
                        _ => {
                            return Err(ModelParseError::new(
                                line_no,
                                format!("malformed term `{tok}`"),
                            ))
                        }
                    }
                }
                if linear.is_empty() && bilinear.is_empty() {
                    return Err(ModelParseError::new(line_no, "constraint has no terms"));
                }
                if kind == "lin" && !bilinear.is_empty() {
                    return Err(ModelParseError::new(
                        line_no,
                        "lin constraint contains a bilinear term",
                    ));
                }
                p.constraints.push(Constraint::with_bilinear(
                    linear, bilinear, relation, constant,
                ));
            }
            Some(other) => {
                return Err(ModelParseError::new(
                    line_no,
                    format!("unknown line kind `{other}`"),
                ))
            }
            None => continue,
        }
    }
    Ok(p)
}

/// Reads a model file.
pub fn read_model(src: &Path) -> Result<Problem, InteropError> {
    let text = std::fs::read_to_string(src)?;
    Ok(model_from_str(&text)?)
}

/// Raw adapter answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExternalStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct ExternalReport {
    pub status: ExternalStatus,
    /// Variable name -> raw value text, in output order.
    pub assignments: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("failed to spawn `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("adapter timed out after {0:?}")]
    Timeout(Duration),
    #[error("adapter exited with {code:?}; stderr: {stderr}")]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("adapter parse error: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Runs `command <model_path>` and parses the adapter protocol from stdout.
pub fn call_external(
    command: &str,
    model_path: &Path,
    timeout: Duration,
) -> Result<ExternalReport, ExternalError> {
    let mut words = command.split_whitespace();
    let program = words.next().ok_or_else(|| ExternalError::Malformed(
        "empty adapter command".to_string(),
    ))?;
    let mut cmd = Command::new(program);
    cmd.args(words)
        .arg(model_path)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().map_err(|source| ExternalError::Spawn {
        command: command.to_string(),
        source,
    })?;

    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let out_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout_pipe.read_to_string(&mut buf);
        buf
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr_pipe.read_to_string(&mut buf);
        buf
    });

    let started = Instant::now();
    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None => {
                if started.elapsed() > timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ExternalError::Timeout(timeout));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(ExternalError::NonZeroExit {
            code: status.code(),
            stderr,
        });
    }
    parse_adapter_output(&stdout)
}

fn parse_adapter_output(stdout: &str) -> Result<ExternalReport, ExternalError> {
    let mut status = None;
    let mut assignments = Vec::new();
    for raw in stdout.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("status") if status.is_none() => {
                status = Some(match toks.next() {
                    Some("FEASIBLE") => ExternalStatus::Feasible,
                    Some("INFEASIBLE") => ExternalStatus::Infeasible,
                    Some("UNKNOWN") => ExternalStatus::Unknown,
                    other => {
                        return Err(ExternalError::Malformed(format!(
                            "bad status {other:?}"
                        )))
                    }
                });
            }
            Some("assign") if status.is_some() => {
                let name = toks.next().ok_or_else(|| {
                    ExternalError::Malformed("assign needs a variable".to_string())
                })?;
                let value = toks.next().ok_or_else(|| {
                    ExternalError::Malformed("assign needs a value".to_string())
                })?;
                assignments.push((name.to_string(), value.to_string()));
            }
            _ => {
                return Err(ExternalError::Malformed(format!(
                    "unexpected adapter line `{line}`"
                )))
            }
        }
    }
    match status {
        Some(status) => Ok(ExternalReport {
            status,
            assignments,
        }),
        None => Err(ExternalError::Malformed(
            "adapter printed no status line".to_string(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::translate::build_problem;

    #[test]
    fn writes_single_variable_problem_with_bound_rows() {
        let set = parse("0 <= x <= 1").unwrap();
        let p = build_problem(&set);
        let text = model_to_string(&p);
        assert!(text.starts_with("fmp 1\n"));
        assert!(text.contains("var x cont 0/1 1/1"));
        assert!(text.contains("lin 1/1*x ge 0/1"));
        assert!(text.contains("lin 1/1*x le 1/1"));
        assert!(text.contains("obj min\n"));
    }

    #[test]
    fn product_conjunction_renders_one_bilinear_row() {
        let set = parse("0 <= a &p b <= 1").unwrap();
        let p = build_problem(&set);
        let text = model_to_string(&p);
        assert!(
            text.contains("quad 1/1*x@c0 + -1/1*a*b eq 0/1"),
            "missing canonical quad row in:\n{text}"
        );
    }

    #[test]
    fn accepts_compact_sign_and_equals_spelling() {
        let text = "fmp 1\nvar x0 cont 0/1 1/1\nvar x1 cont 0/1 1/1\nvar x2 cont 0/1 1/1\nobj min\nquad 1/1*x2 -1/1*x0*x1 = 0/1\n";
        let p = model_from_str(text).unwrap();
        assert_eq!(p.constraints.len(), 1);
        let c = &p.constraints[0];
        assert_eq!(c.relation, Relation::Eq);
        assert_eq!(c.linear.len(), 1);
        assert_eq!(c.bilinear.len(), 1);
    }

    #[test]
    fn round_trips_translated_problems() {
        let texts = [
            "0 <= x <= 1",
            "0.75 <= !p (x1 ->p x2) ->p x3 <= 0.75\n0 <= x3 <= 0.5",
            "1/3 <= (a &l b) |g c <= 2/3\n1 <= a ->l b <= 1",
        ];
        for t in texts {
            let set = parse(t).unwrap();
            let p = build_problem(&set);
            let text = model_to_string(&p);
            let back = model_from_str(&text).unwrap();
            assert!(p.same_model(&back), "round-trip failed for {t}:\n{text}");
            // Deterministic output.
            assert_eq!(text, model_to_string(&p));
        }
    }

    #[test]
    fn rejects_bad_headers_and_lines() {
        assert!(model_from_str("fmp 2\n").is_err());
        assert!(model_from_str("nope\n").is_err());
        let err = model_from_str("fmp 1\nvar x cont 0/1 1/1\nlin 1/1*x zz 0/1\n")
            .unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("relation"));
        let err = model_from_str("fmp 1\nvar x cont 0/1 1/1\nvar x cont 0/1 1/1\n")
            .unwrap_err();
        assert!(err.message.contains("declared twice"));
        let err =
            model_from_str("fmp 1\nvar x cont 0/1 1/1\nlin 1/1*y le 1/1\n").unwrap_err();
        assert!(err.message.contains("unknown variable"));
    }

    #[test]
    fn adapter_output_parses_and_rejects_garbage() {
        let r = parse_adapter_output("status FEASIBLE\nassign x 0.5\n").unwrap();
        assert_eq!(r.status, ExternalStatus::Feasible);
        assert_eq!(r.assignments, vec![("x".to_string(), "0.5".to_string())]);
        assert!(parse_adapter_output("hello world\n").is_err());
        assert!(parse_adapter_output("").is_err());
        let r = parse_adapter_output("status INFEASIBLE\n").unwrap();
        assert_eq!(r.status, ExternalStatus::Infeasible);
    }
}
