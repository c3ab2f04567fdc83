//! Feasibility search over translated problems with certified answers.
//!
//! Verdicts are tiered: `Sat` with an `Exact` certificate means the model
//! passed exact rational re-evaluation of every clause; `Numerical` means
//! every constraint residual and clause bound holds within `epsilon`;
//! `Unsat` is only reported when the whole search space was refuted by
//! outward-rounded interval reasoning; everything else is `Unknown`.

mod contract;
mod interval;
mod search;
mod semantic;

pub use contract::{compile, CompiledProblem};
pub use interval::{Interval, IntervalBox};
pub use semantic::{clause_refuted, value_set, ValueSet};

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::formula::{eval_clause, eval_f64, ClauseSet, Valuation};
use crate::interop;
use crate::rat::rat_to_f64;
use crate::translate::Problem;

use search::{source_indices, Engine, EngineEnd, EngineOutcome, EngineShared};

/// Which undecided binary to branch on first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BinaryOrder {
    /// Creation order (lowest variable id first).
    #[default]
    Occurrence,
    /// Highest number of constraint occurrences first.
    MostConstrained,
}

/// Search parameters. `epsilon` is the residual tolerance for numerical
/// certificates, `delta` the box width below which a candidate is extracted.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub max_nodes: u64,
    pub time_budget: Duration,
    pub binary_order: BinaryOrder,
    pub zero_first: bool,
    pub threads: usize,
    pub seed: u64,
    /// Accept an external solver's INFEASIBLE answer as UNSAT.
    pub trust_external_unsat: bool,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            epsilon: 1e-9,
            delta: 1e-6,
            max_nodes: 2_000_000,
            time_budget: Duration::from_secs(30),
            binary_order: BinaryOrder::Occurrence,
            zero_first: true,
            threads: 1,
            seed: 0,
            trust_external_unsat: false,
        }
    }
}

/// Certification level of a SAT model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cert {
    /// Model re-verified by exact rational evaluation.
    Exact,
    /// Residuals and clause bounds hold within epsilon only.
    Numerical,
}

/// Solver answer.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Sat { model: Valuation, cert: Cert },
    Unsat,
    Unknown { reason: String },
}

impl Verdict {
    /// Constructs an exactly-certified SAT verdict, re-checking the model.
    pub fn certified_exact(model: Valuation, set: &ClauseSet) -> Result<Verdict, SolveError> {
        if verify_model(set, &model) {
            Ok(Verdict::Sat {
                model,
                cert: Cert::Exact,
            })
        } else {
            Err(SolveError::Uncertified)
        }
    }

    /// First stdout word for this verdict.
    pub fn word(&self) -> &'static str {
        match self {
            Verdict::Sat { .. } => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Unknown { .. } => "UNKNOWN",
        }
    }
}

/// Search effort counters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchStats {
    pub nodes: u64,
    pub refuted: u64,
    pub contractions: u64,
    pub wall: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub stats: SearchStats,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("problem does not match the clause set: {0}")]
    ProblemMismatch(String),
    #[error("bad solver configuration: {0}")]
    BadConfig(String),
    #[error("model failed exact verification")]
    Uncertified,
    #[error("cannot branch an atomic box")]
    AtomicBox,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exact rational check of every clause; the soundness anchor for SAT
/// verdicts. A valuation that is not total simply fails to certify.
pub fn verify_model(set: &ClauseSet, v: &Valuation) -> bool {
    set.clauses()
        .iter()
        .all(|c| eval_clause(v, c).unwrap_or(false))
}

fn validate(problem: &Problem, set: &ClauseSet) -> Result<(), SolveError> {
    if problem.clause_roots.len() != set.clauses().len() {
        return Err(SolveError::ProblemMismatch(format!(
            "{} clause roots for {} clauses",
            problem.clause_roots.len(),
            set.clauses().len()
        )));
    }
    for i in 0..set.clauses().len() {
        let path = format!("c{i}");
        match problem.origin.get(&path) {
            Some(id) if *id == problem.clause_roots[i] => {}
            _ => {
                return Err(SolveError::ProblemMismatch(format!(
                    "origin map has no consistent root for clause {i}"
                )))
            }
        }
    }
    for name in set.vocabulary() {
        if problem.var_by_name(name).is_none() {
            return Err(SolveError::ProblemMismatch(format!(
                "source variable `{name}` is not registered"
            )));
        }
    }
    Ok(())
}

fn validate_config(cfg: &SolverConfig) -> Result<(), SolveError> {
    if !(cfg.epsilon > 0.0) {
        return Err(SolveError::BadConfig("epsilon must be positive".into()));
    }
    if !(cfg.delta > 0.0) {
        return Err(SolveError::BadConfig("delta must be positive".into()));
    }
    if cfg.threads == 0 {
        return Err(SolveError::BadConfig("threads must be at least 1".into()));
    }
    Ok(())
}

/// Contracts a box against the problem's constraints; `None` signals that
/// the box holds no feasible point.
pub fn contract(problem: &Problem, bx: &IntervalBox) -> Option<IntervalBox> {
    let cp = compile(problem);
    let mut steps = 0;
    contract::contract_compiled(&cp, bx, &mut steps)
}

/// Box over the problem's variable bounds.
pub fn initial_box(problem: &Problem) -> IntervalBox {
    compile(problem).initial_box()
}

/// Splits a non-atomic box: undecided binary first (zero first when
/// configured), else bisection of the widest continuous interval, ties to
/// the lowest variable id.
pub fn branch(
    problem: &Problem,
    bx: &IntervalBox,
    cfg: &SolverConfig,
) -> Result<(IntervalBox, IntervalBox), SolveError> {
    let cp = compile(problem);
    let set = ClauseSet::new(vec![]);
    let shared = EngineShared {
        stop: AtomicBool::new(false),
        nodes: AtomicU64::new(0),
    };
    let sources: Vec<(String, usize)> = Vec::new();
    let engine = Engine::new(
        &cp,
        &set,
        cfg,
        &sources,
        &shared,
        Instant::now() + Duration::from_secs(3600),
    );
    engine.split(bx).ok_or(SolveError::AtomicBox)
}

/// Decides feasibility of `build_problem(set)`.
pub fn solve(
    problem: &Problem,
    set: &ClauseSet,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    validate(problem, set)?;
    validate_config(cfg)?;
    let started = Instant::now();
    let deadline = started + cfg.time_budget;
    let cp = compile(problem);
    let sources = source_indices(problem, set);
    let shared = EngineShared {
        stop: AtomicBool::new(false),
        nodes: AtomicU64::new(0),
    };

    let root = cp.initial_box();
    let outcomes: Vec<EngineOutcome> = if cfg.threads <= 1 {
        let engine = Engine::new(&cp, set, cfg, &sources, &shared, deadline);
        vec![engine.run(root)]
    } else {
        // Carve the space into up to 2^k sub-boxes at the root, solve them
        // in a pool, and merge in sub-box order. Only threads = 1 promises a
        // reproducible exploration order.
        let mut seeds = vec![root];
        let target = cfg.threads.next_power_of_two().min(64);
        loop {
            if seeds.len() >= target {
                break;
            }
            let mut next = Vec::with_capacity(seeds.len() * 2);
            let mut any_split = false;
            for bx in &seeds {
                let probe = Engine::new(&cp, set, cfg, &sources, &shared, deadline);
                match probe.split(bx) {
                    Some((a, b)) => {
                        next.push(a);
                        next.push(b);
                        any_split = true;
                    }
                    None => next.push(bx.clone()),
                }
            }
            seeds = next;
            if !any_split {
                break;
            }
        }
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| SolveError::BadConfig(e.to_string()))?;
        pool.install(|| {
            seeds
                .into_par_iter()
                .map(|bx| {
                    let engine = Engine::new(&cp, set, cfg, &sources, &shared, deadline);
                    let out = engine.run(bx);
                    if matches!(out.end, EngineEnd::FoundExact(_)) {
                        shared.stop.store(true, Ordering::Relaxed);
                    }
                    out
                })
                .collect()
        })
    };

    let mut stats = SearchStats::default();
    let mut abandoned = 0;
    for o in &outcomes {
        stats.nodes += o.stats.nodes;
        stats.refuted += o.stats.refuted;
        stats.contractions += o.stats.contractions;
        abandoned += o.abandoned;
    }
    stats.wall = started.elapsed();

    // Exact model anywhere wins; then any stashed numerical model; then
    // UNSAT only if every sub-search exhausted cleanly.
    for o in &outcomes {
        if let EngineEnd::FoundExact(model) = &o.end {
            let verdict = Verdict::certified_exact(model.clone(), set)?;
            return Ok(SolveReport { verdict, stats });
        }
    }
    if let Some(model) = outcomes.iter().find_map(|o| o.stash.clone()) {
        return Ok(SolveReport {
            verdict: Verdict::Sat {
                model,
                cert: Cert::Numerical,
            },
            stats,
        });
    }
    let all_exhausted = outcomes
        .iter()
        .all(|o| matches!(o.end, EngineEnd::Exhausted));
    if all_exhausted && abandoned == 0 {
        return Ok(SolveReport {
            verdict: Verdict::Unsat,
            stats,
        });
    }
    let reason = if all_exhausted {
        format!("{abandoned} boxes at delta resolution could not be certified or refuted")
    } else if outcomes
        .iter()
        .any(|o| matches!(o.end, EngineEnd::TimeBudget))
    {
        "time budget exhausted".to_string()
    } else if outcomes
        .iter()
        .any(|o| matches!(o.end, EngineEnd::NodeBudget))
    {
        "node budget exhausted".to_string()
    } else {
        "search cancelled".to_string()
    };
    Ok(SolveReport {
        verdict: Verdict::Unknown { reason },
        stats,
    })
}

/// Solving backend: the built-in search, an `.fmp` export, or an external
/// solver process speaking the adapter protocol.
#[derive(Clone, Debug)]
pub enum Backend {
    Native,
    ExportOnly { dest: PathBuf },
    External { command: String },
}

/// Runs the chosen backend. External models are always re-verified before a
/// SAT verdict is reported; external INFEASIBLE answers map to `Unknown`
/// unless `trust_external_unsat` is set.
pub fn run_backend(
    problem: &Problem,
    set: &ClauseSet,
    cfg: &SolverConfig,
    backend: &Backend,
) -> Result<SolveReport, SolveError> {
    match backend {
        Backend::Native => solve(problem, set, cfg),
        Backend::ExportOnly { dest } => {
            interop::write_model(problem, dest)?;
            Ok(SolveReport {
                verdict: Verdict::Unknown {
                    reason: "exported".to_string(),
                },
                stats: SearchStats::default(),
            })
        }
        Backend::External { command } => {
            validate(problem, set)?;
            validate_config(cfg)?;
            let started = Instant::now();
            let dir = tempfile::tempdir()?;
            let model_path = dir.path().join("problem.fmp");
            interop::write_model(problem, &model_path)?;
            let verdict =
                match interop::call_external(command, &model_path, cfg.time_budget) {
                    Ok(report) => interpret_external(set, cfg, report),
                    Err(e) => Verdict::Unknown {
                        reason: format!("adapter failure: {e}"),
                    },
                };
            let mut stats = SearchStats::default();
            stats.wall = started.elapsed();
            Ok(SolveReport { verdict, stats })
        }
    }
}

fn interpret_external(
    set: &ClauseSet,
    cfg: &SolverConfig,
    report: interop::ExternalReport,
) -> Verdict {
    use interop::ExternalStatus;
    match report.status {
        ExternalStatus::Infeasible => {
            if cfg.trust_external_unsat {
                Verdict::Unsat
            } else {
                Verdict::Unknown {
                    reason: "external solver reports infeasible (unverified)".to_string(),
                }
            }
        }
        ExternalStatus::Unknown => Verdict::Unknown {
            reason: "external solver reports unknown".to_string(),
        },
        ExternalStatus::Feasible => {
            let mut v = Valuation::new();
            for name in set.vocabulary() {
                let raw = match report
                    .assignments
                    .iter()
                    .rev()
                    .find(|(n, _)| n == name)
                {
                    Some((_, raw)) => raw,
                    None => {
                        return Verdict::Unknown {
                            reason: format!("external model missing variable `{name}`"),
                        }
                    }
                };
                let value = match crate::rat::parse_rat(raw) {
                    Ok(r) => r,
                    Err(e) => {
                        return Verdict::Unknown {
                            reason: format!("external model value for `{name}`: {e}"),
                        }
                    }
                };
                if v.insert(name.clone(), value).is_err() {
                    return Verdict::Unknown {
                        reason: "uncertified external model".to_string(),
                    };
                }
            }
            if verify_model(set, &v) {
                return Verdict::Sat {
                    model: v,
                    cert: Cert::Exact,
                };
            }
            // Epsilon-level acceptance mirrors the native numerical tier.
            let values: std::collections::BTreeMap<String, f64> = v
                .iter()
                .map(|(name, r)| (name.clone(), rat_to_f64(r)))
                .collect();
            let close_enough = set.clauses().iter().all(|clause| {
                match eval_f64(&values, clause.body()) {
                    Ok(x) => {
                        x >= rat_to_f64(clause.lower()) - cfg.epsilon
                            && x <= rat_to_f64(clause.upper()) + cfg.epsilon
                    }
                    Err(_) => false,
                }
            });
            if close_enough {
                Verdict::Sat {
                    model: v,
                    cert: Cert::Numerical,
                }
            } else {
                Verdict::Unknown {
                    reason: "uncertified external model".to_string(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::rat::{rat, rat_to_f64};
    use crate::translate::build_problem;

    fn quick_cfg() -> SolverConfig {
        SolverConfig {
            time_budget: Duration::from_secs(10),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn lukasiewicz_tautology_is_sat_exact() {
        let set = parse("1 <= x |l !l x <= 1").unwrap();
        let p = build_problem(&set);
        let report = solve(&p, &set, &quick_cfg()).unwrap();
        match report.verdict {
            Verdict::Sat { model, cert } => {
                assert_eq!(cert, Cert::Exact);
                assert!(verify_model(&set, &model));
            }
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn lukasiewicz_contradiction_is_unsat() {
        let set = parse("1 <= x &l !l x <= 1").unwrap();
        let p = build_problem(&set);
        let report = solve(&p, &set, &quick_cfg()).unwrap();
        assert_eq!(report.verdict, Verdict::Unsat);
    }

    #[test]
    fn product_square_half_is_numerical_at_sqrt2_over_2() {
        let set = parse("0.5 <= x &p x <= 0.5").unwrap();
        let p = build_problem(&set);
        let report = solve(&p, &set, &quick_cfg()).unwrap();
        match report.verdict {
            Verdict::Sat { model, cert } => {
                assert_eq!(cert, Cert::Numerical);
                let x = rat_to_f64(model.get("x").unwrap());
                assert!((x - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-6);
                assert!((x * x - 0.5).abs() <= 1e-9);
            }
            other => panic!("expected numerical SAT, got {other:?}"),
        }
    }

    #[test]
    fn pathological_product_instance_is_unsat() {
        let set = parse("0.75 <= !p (x1 ->p x2) ->p x3 <= 0.75\n0 <= x3 <= 0.5").unwrap();
        let p = build_problem(&set);
        let report = solve(&p, &set, &quick_cfg()).unwrap();
        assert_eq!(report.verdict, Verdict::Unsat);
    }

    #[test]
    fn forced_consequent_in_lukasiewicz_chain() {
        // 1 <= a ->l b and a pinned to 1 force b = 1.
        let set = parse("1 <= a ->l b <= 1\n1 <= a <= 1").unwrap();
        let p = build_problem(&set);
        let report = solve(&p, &set, &quick_cfg()).unwrap();
        match report.verdict {
            Verdict::Sat { model, cert } => {
                assert_eq!(cert, Cert::Exact);
                assert_eq!(model.get("b"), Some(&rat(1, 1)));
            }
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn verify_model_checks_exactly() {
        let set = parse("0.75 <= !p (x1 ->p x2) ->p x3 <= 0.75\n0 <= x3 <= 0.5").unwrap();
        let v = Valuation::from_pairs([
            ("x1", rat(1, 1)),
            ("x2", rat(0, 1)),
            ("x3", rat(2, 5)),
        ])
        .unwrap();
        assert!(!verify_model(&set, &v));

        let set = parse("0 <= x <= 1").unwrap();
        let v = Valuation::from_pairs([("x", rat(1, 3))]).unwrap();
        assert!(verify_model(&set, &v));

        let set = parse("1 <= a ->l a <= 1").unwrap();
        let v = Valuation::from_pairs([("a", rat(3, 10))]).unwrap();
        assert!(verify_model(&set, &v));
    }

    #[test]
    fn certified_constructor_rejects_bad_models() {
        let set = parse("1 <= x <= 1").unwrap();
        let bad = Valuation::from_pairs([("x", rat(0, 1))]).unwrap();
        assert!(Verdict::certified_exact(bad, &set).is_err());
    }

    #[test]
    fn mismatched_problem_is_a_usage_error() {
        let set_a = parse("0 <= x <= 1").unwrap();
        let set_b = parse("0 <= x <= 1\n0 <= y <= 1").unwrap();
        let p = build_problem(&set_a);
        assert!(matches!(
            solve(&p, &set_b, &quick_cfg()),
            Err(SolveError::ProblemMismatch(_))
        ));
    }

    #[test]
    fn branching_is_deterministic_and_zero_first() {
        let set = parse("0 <= x ->l y <= 1").unwrap();
        let p = build_problem(&set);
        let cfg = quick_cfg();
        let root = initial_box(&p);
        let (first, second) = branch(&p, &root, &cfg).unwrap();
        // The indicator binary splits first, zero branch first.
        let z = p.indicators.get("c0").unwrap().0;
        assert_eq!(first.get(z), Interval::point(0.0));
        assert_eq!(second.get(z), Interval::point(1.0));
        // After deciding binaries, the widest continuous interval bisects.
        let mut decided = root.clone();
        decided.set(z, Interval::point(0.0));
        let (lo, hi) = branch(&p, &decided, &cfg).unwrap();
        let x = p.var_by_name("x").unwrap().0;
        assert_eq!(lo.get(x), Interval::new(0.0, 0.5));
        assert_eq!(hi.get(x), Interval::new(0.5, 1.0));
    }

    #[test]
    fn contract_examples() {
        // No constraints: box unchanged.
        let set = parse("0 <= x <= 1").unwrap();
        let p = build_problem(&set);
        let bx = initial_box(&p);
        let out = contract(&p, &bx).unwrap();
        assert!(out.get(0).lo >= 0.0 && out.get(0).hi <= 1.0);
    }

    #[test]
    fn budget_exhaustion_reports_unknown() {
        let set = parse("0.5 <= x &p x <= 0.5").unwrap();
        let p = build_problem(&set);
        let cfg = SolverConfig {
            max_nodes: 0,
            ..quick_cfg()
        };
        let report = solve(&p, &set, &cfg).unwrap();
        assert!(matches!(report.verdict, Verdict::Unknown { .. }));
    }
}
