//! Random-instance generation and a measurement harness.
//!
//! The generator is explicit and seed-deterministic: formulas are built
//! top-down choosing connectives by weight, leaves are uniform over the
//! variable pool with occasional constants on the 1/100 grid, and clause
//! bounds are either random `l <= u` pairs on the 1/100 grid or pinned
//! 1-SAT bounds. CSV schema:
//! `id,n_vars,n_clauses,logic,verdict,cert,nodes,wall_ms`.

use std::collections::BTreeMap;

use num::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{render, Clause, ClauseSet, Formula, Logic};
use crate::rat::{rat, Rat};
use crate::solver::{solve, Cert, SolverConfig, Verdict};
use crate::translate::build_problem;

/// Connective keys understood by the weight table.
pub const CONNECTIVES: [&str; 12] = [
    "not_l", "and_l", "or_l", "implies_l", "not_p", "and_p", "or_p", "implies_p", "not_g",
    "and_g", "or_g", "implies_g",
];

fn default_clauses() -> usize {
    2
}

fn default_constant_prob() -> f64 {
    0.12
}

/// Bound style for generated clauses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStyle {
    /// Random `l <= u` on the 1/100 grid.
    #[default]
    Random,
    /// 1-SAT style: `1 <= phi <= 1`.
    OneSat,
}

/// Generator parameters. Unspecified weights mean a uniform mix over all
/// twelve connectives; naming a `logic` restricts the mix to that logic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub count: usize,
    pub variables: usize,
    pub max_depth: usize,
    #[serde(default = "default_clauses")]
    pub clauses_per_instance: usize,
    #[serde(default)]
    pub bound_style: BoundStyle,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default = "default_constant_prob")]
    pub constant_prob: f64,
    #[serde(default)]
    pub logic: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
}

impl GenSpec {
    /// Uniform weights over one logic's four connectives.
    pub fn pure_logic(logic: Logic) -> BTreeMap<String, f64> {
        let suffix = logic.suffix();
        CONNECTIVES
            .iter()
            .filter(|k| k.ends_with(suffix))
            .map(|k| (k.to_string(), 1.0))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("generator needs at least one variable")]
    NoVariables,
    #[error("generator needs depth >= 1")]
    NoDepth,
    #[error("weights must be non-negative with a positive sum")]
    BadWeights,
    #[error("unknown connective `{0}` in weights")]
    UnknownConnective(String),
    #[error("unknown logic `{0}`")]
    UnknownLogic(String),
}

/// A generated instance with its provenance label.
#[derive(Clone, Debug)]
pub struct Instance {
    pub id: String,
    pub label: String,
    pub clauses: ClauseSet,
}

fn resolve_weights(spec: &GenSpec) -> Result<Vec<(String, f64)>, BenchError> {
    let table: BTreeMap<String, f64> = if !spec.weights.is_empty() {
        for key in spec.weights.keys() {
            if !CONNECTIVES.contains(&key.as_str()) {
                return Err(BenchError::UnknownConnective(key.clone()));
            }
        }
        spec.weights.clone()
    } else if let Some(name) = &spec.logic {
        let logic = match name.as_str() {
            "lukasiewicz" | "l" => Logic::Lukasiewicz,
            "product" | "p" => Logic::Product,
            "goedel" | "godel" | "g" => Logic::Goedel,
            other => return Err(BenchError::UnknownLogic(other.to_string())),
        };
        GenSpec::pure_logic(logic)
    } else {
        CONNECTIVES.iter().map(|k| (k.to_string(), 1.0)).collect()
    };
    let mut out: Vec<(String, f64)> = table.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    if out.iter().any(|(_, w)| *w < 0.0) || out.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
        return Err(BenchError::BadWeights);
    }
    Ok(out)
}

fn pick_connective<'a>(weights: &'a [(String, f64)], rng: &mut ChaCha8Rng) -> &'a str {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut roll = rng.gen::<f64>() * total;
    for (name, w) in weights {
        roll -= w;
        if roll <= 0.0 {
            return name;
        }
    }
    &weights[weights.len() - 1].0
}

fn logic_of(key: &str) -> Logic {
    match key.as_bytes()[key.len() - 1] {
        b'l' => Logic::Lukasiewicz,
        b'p' => Logic::Product,
        _ => Logic::Goedel,
    }
}

fn gen_leaf(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Formula {
    if rng.gen::<f64>() < spec.constant_prob {
        let k = rng.gen_range(0..=100u32);
        Formula::Const(rat(k as i64, 100))
    } else {
        let v = rng.gen_range(0..spec.variables);
        Formula::var(format!("x{}", v + 1))
    }
}

fn gen_formula(
    spec: &GenSpec,
    weights: &[(String, f64)],
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Formula {
    let leaf_here = depth == 0 || (depth < spec.max_depth && rng.gen::<f64>() < 0.25);
    if leaf_here {
        return gen_leaf(spec, rng);
    }
    let key = pick_connective(weights, rng).to_string();
    let logic = logic_of(&key);
    if key.starts_with("not") {
        Formula::not(logic, gen_formula(spec, weights, depth - 1, rng))
    } else {
        let lhs = gen_formula(spec, weights, depth - 1, rng);
        let rhs = gen_formula(spec, weights, depth - 1, rng);
        if key.starts_with("and") {
            Formula::and(logic, lhs, rhs)
        } else if key.starts_with("or") {
            Formula::or(logic, lhs, rhs)
        } else {
            Formula::implies(logic, lhs, rhs)
        }
    }
}

fn gen_bounds(spec: &GenSpec, rng: &mut ChaCha8Rng) -> (Rat, Rat) {
    match spec.bound_style {
        BoundStyle::OneSat => (Rat::one(), Rat::one()),
        BoundStyle::Random => {
            let a = rng.gen_range(0..=100u32) as i64;
            let b = rng.gen_range(0..=100u32) as i64;
            (rat(a.min(b), 100), rat(a.max(b), 100))
        }
    }
}

/// Deterministic instance generation.
pub fn generate(spec: &GenSpec) -> Result<Vec<Instance>, BenchError> {
    if spec.variables == 0 {
        return Err(BenchError::NoVariables);
    }
    if spec.max_depth == 0 {
        return Err(BenchError::NoDepth);
    }
    let weights = resolve_weights(spec)?;
    let label = spec
        .label
        .clone()
        .or_else(|| spec.logic.clone())
        .unwrap_or_else(|| "mix".to_string());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let mut clauses = Vec::with_capacity(spec.clauses_per_instance);
        for _ in 0..spec.clauses_per_instance.max(1) {
            let body = gen_formula(spec, &weights, spec.max_depth, &mut rng);
            let (lo, hi) = gen_bounds(spec, &mut rng);
            clauses.push(Clause::new(lo, body, hi).expect("generated bounds are ordered"));
        }
        out.push(Instance {
            id: format!("{label}-{i:03}"),
            label: label.clone(),
            clauses: ClauseSet::new(clauses),
        });
    }
    Ok(out)
}

/// One CSV row of suite results.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteRow {
    pub id: String,
    pub n_vars: usize,
    pub n_clauses: usize,
    pub logic: String,
    pub verdict: String,
    pub cert: String,
    pub nodes: u64,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
}

pub const CSV_HEADER: &str = "id,n_vars,n_clauses,logic,verdict,cert,nodes,wall_ms";

impl SuiteReport {
    /// Full CSV including the summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.id, r.n_vars, r.n_clauses, r.logic, r.verdict, r.cert, r.nodes, r.wall_ms
            ));
        }
        out.push_str(&format!(
            "summary,,,,SAT={};UNSAT={};UNKNOWN={},,,\n",
            self.sat, self.unsat, self.unknown
        ));
        out
    }

    /// CSV with the timing column blanked, for determinism comparisons.
    pub fn to_csv_without_time(&self) -> String {
        self.to_csv()
            .lines()
            .map(|l| match l.rsplit_once(',') {
                Some((head, _)) if !l.starts_with("id,") && !l.starts_with("summary") => {
                    format!("{head},")
                }
                _ => l.to_string(),
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }
}

/// Solves instances in parallel (one solver per instance) and assembles the
/// report in instance order. Per-instance budget failures become UNKNOWN
/// rows; the suite itself never aborts.
pub fn run_suite(instances: &[Instance], cfg: &SolverConfig) -> SuiteReport {
    let rows: Vec<SuiteRow> = instances
        .par_iter()
        .map(|inst| {
            let problem = build_problem(&inst.clauses);
            let (verdict, cert, nodes, wall_ms) = match solve(&problem, &inst.clauses, cfg) {
                Ok(report) => {
                    let cert = match &report.verdict {
                        Verdict::Sat { cert: Cert::Exact, .. } => "exact",
                        Verdict::Sat {
                            cert: Cert::Numerical,
                            ..
                        } => "numerical",
                        _ => "",
                    };
                    (
                        report.verdict.word().to_string(),
                        cert.to_string(),
                        report.stats.nodes,
                        report.stats.wall.as_millis(),
                    )
                }
                Err(e) => (format!("UNKNOWN({e})"), String::new(), 0, 0),
            };
            SuiteRow {
                id: inst.id.clone(),
                n_vars: inst.clauses.vocabulary().len(),
                n_clauses: inst.clauses.clauses().len(),
                logic: inst.label.clone(),
                verdict,
                cert,
                nodes,
                wall_ms,
            }
        })
        .collect();
    let mut report = SuiteReport::default();
    for r in &rows {
        match r.verdict.as_str() {
            "SAT" => report.sat += 1,
            "UNSAT" => report.unsat += 1,
            _ => report.unknown += 1,
        }
    }
    report.rows = rows;
    report
}

/// Renders instances as clause files (one per instance) for interchange.
pub fn instance_text(instance: &Instance) -> String {
    render(&instance.clauses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use std::time::Duration;

    fn small_spec() -> GenSpec {
        GenSpec {
            seed: 42,
            count: 4,
            variables: 3,
            max_depth: 3,
            clauses_per_instance: 2,
            bound_style: BoundStyle::Random,
            weights: BTreeMap::new(),
            constant_prob: 0.12,
            logic: None,
            label: None,
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate(&small_spec()).unwrap();
        let b = generate(&small_spec()).unwrap();
        let texts_a: Vec<String> = a.iter().map(instance_text).collect();
        let texts_b: Vec<String> = b.iter().map(instance_text).collect();
        assert_eq!(texts_a, texts_b);
        let mut other = small_spec();
        other.seed = 43;
        let c = generate(&other).unwrap();
        let texts_c: Vec<String> = c.iter().map(instance_text).collect();
        assert_ne!(texts_a, texts_c);
    }

    #[test]
    fn generated_instances_round_trip_through_the_parser() {
        for inst in generate(&small_spec()).unwrap() {
            let text = instance_text(&inst);
            let back = parse(&text).unwrap();
            assert_eq!(back, inst.clauses);
        }
    }

    #[test]
    fn pure_product_conjunctions_with_full_bounds_are_sat() {
        let spec = GenSpec {
            weights: [("and_p".to_string(), 1.0)].into_iter().collect(),
            bound_style: BoundStyle::Random,
            count: 6,
            ..small_spec()
        };
        let instances = generate(&spec).unwrap();
        for inst in &instances {
            for c in inst.clauses.clauses() {
                assert!(matches!(
                    c.body(),
                    Formula::And(Logic::Product, _, _) | Formula::Var(_) | Formula::Const(_)
                ));
            }
        }
        // With 0 <= phi <= 1 bounds every instance is SAT.
        let spec = GenSpec {
            weights: [("and_p".to_string(), 1.0)].into_iter().collect(),
            ..small_spec()
        };
        let mut instances = generate(&spec).unwrap();
        for inst in &mut instances {
            let relaxed: Vec<Clause> = inst
                .clauses
                .clauses()
                .iter()
                .map(|c| Clause::new(rat(0, 1), c.body().clone(), rat(1, 1)).unwrap())
                .collect();
            inst.clauses = ClauseSet::new(relaxed);
        }
        let cfg = SolverConfig {
            time_budget: Duration::from_secs(5),
            ..SolverConfig::default()
        };
        let report = run_suite(&instances, &cfg);
        assert_eq!(report.sat, instances.len());
    }

    #[test]
    fn suite_csv_shape_and_determinism() {
        let instances = generate(&small_spec()).unwrap();
        let cfg = SolverConfig {
            time_budget: Duration::from_secs(5),
            ..SolverConfig::default()
        };
        let a = run_suite(&instances, &cfg);
        let b = run_suite(&instances, &cfg);
        assert_eq!(a.to_csv_without_time(), b.to_csv_without_time());
        let csv = a.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.trim_end().ends_with(&format!(
            "summary,,,,SAT={};UNSAT={};UNKNOWN={},,,",
            a.sat, a.unsat, a.unknown
        )));
        // Empty suite: header and summary only.
        let empty = run_suite(&[], &cfg);
        assert_eq!(
            empty.to_csv(),
            format!("{CSV_HEADER}\nsummary,,,,SAT=0;UNSAT=0;UNKNOWN=0,,,\n")
        );
    }
}
