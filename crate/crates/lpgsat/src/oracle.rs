//! Slow, trusted decision procedures for small instances.
//!
//! These are the brute-force side of every property test: a lexicographic
//! grid search over valuations (exact rational arithmetic throughout) and an
//! exhaustive enumeration of binary patterns with dense sampling plus local
//! residual minimization on the continuous remainder. Neither shares code
//! with the solver's interval engine; the grid pruning below works on the
//! formula tree with rational endpoints, not on the compiled constraint
//! view.

use std::collections::BTreeMap;

use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{eval_clause, ClauseSet, Formula, Logic, Valuation};
use crate::rat::{rat_to_f64, Rat};
use crate::solver::verify_model;
use crate::translate::{Problem, Relation, VarId, VarKind};

/// Grid parameters: denominator `k` spans `{0, 1/k, ..., 1}`.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub denominator: u32,
    pub var_cap: usize,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            denominator: 16,
            var_cap: 8,
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance has {n} variables, grid cap is {cap}")]
    VarCapExceeded { n: usize, cap: usize },
    #[error("problem has {n} binaries, enumeration cap is {cap}")]
    BinaryCapExceeded { n: usize, cap: usize },
    #[error("problem has {n} free continuous variables, enumeration cap is {cap}")]
    ContinuousCapExceeded { n: usize, cap: usize },
    #[error("bad oracle parameters: {0}")]
    BadSpec(String),
}

// Exact rational interval used only for grid pruning.
#[derive(Clone, Debug)]
struct RatRange {
    lo: Rat,
    hi: Rat,
}

impl RatRange {
    fn point(r: Rat) -> RatRange {
        RatRange {
            lo: r.clone(),
            hi: r,
        }
    }

    fn unit() -> RatRange {
        RatRange {
            lo: Rat::zero(),
            hi: Rat::one(),
        }
    }

    fn hull(a: RatRange, b: RatRange) -> RatRange {
        RatRange {
            lo: a.lo.min(b.lo),
            hi: a.hi.max(b.hi),
        }
    }
}

fn clamp01(r: Rat) -> Rat {
    r.max(Rat::zero()).min(Rat::one())
}

/// Conservative enclosure of the formula's value over a box of variable
/// ranges. Exact rational endpoints; discontinuous operators fall back to
/// the hull of their case images.
fn formula_range(phi: &Formula, env: &BTreeMap<String, RatRange>) -> RatRange {
    match phi {
        Formula::Var(name) => env
            .get(name)
            .cloned()
            .unwrap_or_else(RatRange::unit),
        Formula::Const(k) => RatRange::point(k.clone()),
        Formula::Not(logic, sub) => {
            let x = formula_range(sub, env);
            match logic {
                Logic::Lukasiewicz => RatRange {
                    lo: Rat::one() - x.hi,
                    hi: Rat::one() - x.lo,
                },
                Logic::Product | Logic::Goedel => {
                    if x.lo > Rat::zero() {
                        RatRange::point(Rat::zero())
                    } else if x.hi.is_zero() {
                        RatRange::point(Rat::one())
                    } else {
                        RatRange::unit()
                    }
                }
            }
        }
        Formula::And(logic, a, b) => {
            let x = formula_range(a, env);
            let y = formula_range(b, env);
            match logic {
                Logic::Lukasiewicz => RatRange {
                    lo: clamp01(&x.lo + &y.lo - Rat::one()),
                    hi: clamp01(&x.hi + &y.hi - Rat::one()),
                },
                Logic::Product => RatRange {
                    lo: &x.lo * &y.lo,
                    hi: &x.hi * &y.hi,
                },
                Logic::Goedel => RatRange {
                    lo: x.lo.min(y.lo),
                    hi: x.hi.min(y.hi),
                },
            }
        }
        Formula::Or(logic, a, b) => {
            let x = formula_range(a, env);
            let y = formula_range(b, env);
            match logic {
                Logic::Lukasiewicz => RatRange {
                    lo: clamp01(&x.lo + &y.lo),
                    hi: clamp01(&x.hi + &y.hi),
                },
                Logic::Product => RatRange {
                    lo: &x.lo + &y.lo - &x.lo * &y.lo,
                    hi: &x.hi + &y.hi - &x.hi * &y.hi,
                },
                Logic::Goedel => RatRange {
                    lo: x.lo.max(y.lo),
                    hi: x.hi.max(y.hi),
                },
            }
        }
        Formula::Implies(logic, a, b) => {
            let x = formula_range(a, env);
            let y = formula_range(b, env);
            match logic {
                Logic::Lukasiewicz => RatRange {
                    lo: clamp01(Rat::one() - &x.hi + &y.lo),
                    hi: clamp01(Rat::one() - &x.lo + &y.hi),
                },
                Logic::Product => {
                    let case_one = if x.lo <= y.hi {
                        Some(RatRange::point(Rat::one()))
                    } else {
                        None
                    };
                    let case_div = if x.hi > y.lo {
                        // x > y here, so x > 0 and y/x < 1.
                        let lo = &y.lo / &x.hi;
                        let hi = if y.hi < x.lo && !x.lo.is_zero() {
                            (&y.hi / &x.lo).min(Rat::one())
                        } else {
                            Rat::one()
                        };
                        Some(RatRange { lo, hi })
                    } else {
                        None
                    };
                    match (case_one, case_div) {
                        (Some(a), Some(b)) => RatRange::hull(a, b),
                        (Some(a), None) => a,
                        (None, Some(b)) => b,
                        (None, None) => RatRange::unit(),
                    }
                }
                Logic::Goedel => {
                    let case_one = if x.lo <= y.hi {
                        Some(RatRange::point(Rat::one()))
                    } else {
                        None
                    };
                    let case_y = if x.hi > y.lo {
                        Some(RatRange {
                            lo: y.lo.clone(),
                            hi: y.hi.min(x.hi),
                        })
                    } else {
                        None
                    };
                    match (case_one, case_y) {
                        (Some(a), Some(b)) => RatRange::hull(a, b),
                        (Some(a), None) => a,
                        (None, Some(b)) => b,
                        (None, None) => RatRange::unit(),
                    }
                }
            }
        }
    }
}

struct GridSearch<'a> {
    set: &'a ClauseSet,
    names: Vec<String>,
    values: Vec<Rat>,
    k: u32,
    /// Clauses already proved true on the current prefix.
    proved: Vec<bool>,
}

impl<'a> GridSearch<'a> {
    fn prune_or_descend(&mut self, depth: usize) -> Option<Valuation> {
        // Environment: assigned variables are points, the rest spans [0,1].
        let mut env = BTreeMap::new();
        for (i, name) in self.names.iter().take(depth).enumerate() {
            env.insert(name.clone(), RatRange::point(self.values[i].clone()));
        }
        let mut proved_here = Vec::new();
        for (ci, clause) in self.set.clauses().iter().enumerate() {
            if self.proved[ci] {
                continue;
            }
            let range = formula_range(clause.body(), &env);
            if &range.hi < clause.lower() || &range.lo > clause.upper() {
                for ci in proved_here {
                    self.proved[ci] = false;
                }
                return None;
            }
            if &range.lo >= clause.lower() && &range.hi <= clause.upper() {
                self.proved[ci] = true;
                proved_here.push(ci);
            }
        }
        let result = if depth == self.names.len() {
            let v = Valuation::from_pairs(
                self.names
                    .iter()
                    .cloned()
                    .zip(self.values.iter().cloned()),
            )
            .expect("grid values are in [0,1]");
            if self.set.clauses().iter().all(|c| {
                eval_clause(&v, c).unwrap_or(false)
            }) {
                Some(v)
            } else {
                None
            }
        } else {
            let mut found = None;
            for i in 0..=self.k {
                self.values[depth] = Rat::new(i.into(), self.k.into());
                if let Some(v) = self.prune_or_descend(depth + 1) {
                    found = Some(v);
                    break;
                }
            }
            found
        };
        for ci in proved_here {
            self.proved[ci] = false;
        }
        result
    }
}

/// First grid valuation (lexicographic over the sorted vocabulary, value
/// order `0, 1/k, ..., 1`) satisfying every clause, or `None`. Sound for
/// SAT; a miss proves nothing beyond the grid. Subtrees are pruned with
/// exact rational interval bounds, which never discards a grid witness.
pub fn grid_search(set: &ClauseSet, spec: &GridSpec) -> Result<Option<Valuation>, OracleError> {
    if spec.denominator < 1 {
        return Err(OracleError::BadSpec("grid denominator must be >= 1".into()));
    }
    let names: Vec<String> = set.vocabulary().iter().cloned().collect();
    if names.len() > spec.var_cap {
        return Err(OracleError::VarCapExceeded {
            n: names.len(),
            cap: spec.var_cap,
        });
    }
    let n = names.len();
    let mut search = GridSearch {
        set,
        names,
        values: vec![Rat::zero(); n],
        k: spec.denominator,
        proved: vec![false; set.clauses().len()],
    };
    let witness = search.prune_or_descend(0);
    if let Some(v) = &witness {
        assert!(verify_model(set, v), "grid witness failed verification");
    }
    Ok(witness)
}

/// Floating-point assignment produced by the enumeration oracle.
pub type SampledAssignment = BTreeMap<VarId, f64>;

/// Parameters for [`enumerate_optimal`].
#[derive(Clone, Copy, Debug)]
pub struct EnumerateSpec {
    /// Grid resolution per free dimension when few dimensions remain.
    pub resolution: u32,
    /// Number of random starts when the free space is higher-dimensional.
    pub starts: usize,
    /// Feasibility tolerance on the largest residual.
    pub tolerance: f64,
    pub max_binaries: usize,
    pub max_continuous: usize,
    pub seed: u64,
}

impl Default for EnumerateSpec {
    fn default() -> EnumerateSpec {
        EnumerateSpec {
            resolution: 8,
            starts: 48,
            tolerance: 1e-9,
            max_binaries: 8,
            max_continuous: 10,
            seed: 0x5eed,
        }
    }
}

struct NumConstraint {
    linear: Vec<(f64, usize)>,
    bilinear: Vec<(f64, usize, usize)>,
    rhs: f64,
    relation: Relation,
}

impl NumConstraint {
    fn lhs(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, v) in &self.linear {
            s += k * x[*v];
        }
        for (k, a, b) in &self.bilinear {
            s += k * x[*a] * x[*b];
        }
        s
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs(x);
        match self.relation {
            Relation::Eq => lhs - self.rhs,
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
        }
    }
}

fn numeric_view(problem: &Problem) -> Vec<NumConstraint> {
    problem
        .constraints
        .iter()
        .map(|c| NumConstraint {
            linear: c
                .linear
                .iter()
                .map(|(k, v)| (rat_to_f64(k), v.0))
                .collect(),
            bilinear: c
                .bilinear
                .iter()
                .map(|(k, a, b)| (rat_to_f64(k), a.0, b.0))
                .collect(),
            rhs: rat_to_f64(&c.constant),
            relation: c.relation,
        })
        .collect()
}

/// One-unknown propagation: solve equality rows for the single undetermined
/// variable they contain, when it occurs linearly (possibly via a bilinear
/// term whose partner is already known and nonzero).
fn propagate(constraints: &[NumConstraint], x: &mut [f64], known: &mut [bool]) {
    loop {
        let mut progressed = false;
        for c in constraints {
            if !matches!(c.relation, Relation::Eq) {
                continue;
            }
            // Collect the unknowns of this row.
            let mut unknown: Option<usize> = None;
            let mut multiple = false;
            let mut visit = |v: usize| {
                if !known[v] {
                    match unknown {
                        None => unknown = Some(v),
                        Some(u) if u == v => {}
                        Some(_) => multiple = true,
                    }
                }
            };
            for (_, v) in &c.linear {
                visit(*v);
            }
            for (_, a, b) in &c.bilinear {
                visit(*a);
                visit(*b);
            }
            let u = match (unknown, multiple) {
                (Some(u), false) => u,
                _ => continue,
            };
            // lhs = coef*u + rest; solve for u when coef is well defined.
            let mut coef = 0.0;
            let mut rest = 0.0;
            let mut solvable = true;
            for (k, v) in &c.linear {
                if *v == u {
                    coef += k;
                } else {
                    rest += k * x[*v];
                }
            }
            for (k, a, b) in &c.bilinear {
                match (*a == u, *b == u) {
                    (true, true) => solvable = false, // quadratic in u
                    (true, false) => coef += k * x[*b],
                    (false, true) => coef += k * x[*a],
                    (false, false) => rest += k * x[*a] * x[*b],
                }
            }
            if !solvable || coef.abs() < 1e-12 {
                continue;
            }
            x[u] = ((c.rhs - rest) / coef).clamp(0.0, 1.0);
            known[u] = true;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
}

/// Levenberg-style local residual minimization over the movable variables.
fn minimize_residual(
    constraints: &[NumConstraint],
    x: &mut [f64],
    movable: &[usize],
    bounds: &[(f64, f64)],
    max_iter: usize,
) {
    if movable.is_empty() {
        return;
    }
    let mut col = vec![usize::MAX; x.len()];
    for (c, v) in movable.iter().enumerate() {
        col[*v] = c;
    }
    let n = movable.len();
    let cost = |x: &[f64]| -> f64 {
        constraints
            .iter()
            .map(|c| {
                let r = c.violation(x);
                r * r
            })
            .sum()
    };
    let mut lambda = 1e-6;
    let mut current = cost(x);
    for _ in 0..max_iter {
        if current < 1e-26 {
            break;
        }
        let mut ata = vec![vec![0.0; n]; n];
        let mut atb = vec![0.0; n];
        let mut any_row = false;
        for c in constraints {
            let r = c.violation(x);
            let active = matches!(c.relation, Relation::Eq) || r != 0.0;
            if !active {
                continue;
            }
            any_row = true;
            let sign = if matches!(c.relation, Relation::Ge) {
                -1.0
            } else {
                1.0
            };
            let mut grad = vec![0.0; n];
            for (k, v) in &c.linear {
                let j = col[*v];
                if j != usize::MAX {
                    grad[j] += sign * k;
                }
            }
            for (k, a, b) in &c.bilinear {
                if a == b {
                    let j = col[*a];
                    if j != usize::MAX {
                        grad[j] += sign * 2.0 * k * x[*a];
                    }
                } else {
                    let j = col[*a];
                    if j != usize::MAX {
                        grad[j] += sign * k * x[*b];
                    }
                    let j = col[*b];
                    if j != usize::MAX {
                        grad[j] += sign * k * x[*a];
                    }
                }
            }
            let signed = if matches!(c.relation, Relation::Eq) {
                r
            } else {
                r.abs()
            };
            for i in 0..n {
                atb[i] -= grad[i] * signed;
                for j in 0..n {
                    ata[i][j] += grad[i] * grad[j];
                }
            }
        }
        if !any_row {
            break;
        }
        let mut improved = false;
        for _ in 0..8 {
            let mut a = ata.clone();
            for (d, row) in a.iter_mut().enumerate() {
                row[d] += lambda;
            }
            match gauss(a, atb.clone()) {
                Some(step) => {
                    let mut trial = x.to_vec();
                    for (j, &v) in movable.iter().enumerate() {
                        let (lo, hi) = bounds[v];
                        trial[v] = (trial[v] + step[j]).clamp(lo, hi);
                    }
                    let c = cost(&trial);
                    if c < current {
                        x.copy_from_slice(&trial);
                        current = c;
                        lambda = (lambda / 4.0).max(1e-13);
                        improved = true;
                        break;
                    }
                    lambda *= 8.0;
                }
                None => {
                    lambda *= 8.0;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-250 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut out = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * out[c];
        }
        out[row] = s / a[row][row];
    }
    Some(out)
}

/// Exhaustive enumeration of binary patterns with continuous sampling and
/// local residual minimization. Returns every located feasible point whose
/// objective `Σ_{x∈M} x` is minimal among the located points. `pins` fixes
/// chosen variables (used to search for extensions of a given valuation).
pub fn enumerate_optimal(
    problem: &Problem,
    pins: &[(VarId, f64)],
    spec: &EnumerateSpec,
) -> Result<Vec<SampledAssignment>, OracleError> {
    let n = problem.n_vars();
    let constraints = numeric_view(problem);
    let pinned: BTreeMap<usize, f64> = pins.iter().map(|(id, v)| (id.0, *v)).collect();
    let binaries: Vec<usize> = problem
        .vars()
        .iter()
        .filter(|d| matches!(d.kind, VarKind::Binary))
        .map(|d| d.id.0)
        .filter(|v| !pinned.contains_key(v))
        .collect();
    if binaries.len() > spec.max_binaries {
        return Err(OracleError::BinaryCapExceeded {
            n: binaries.len(),
            cap: spec.max_binaries,
        });
    }
    let continuous: Vec<usize> = (0..n)
        .filter(|v| {
            !pinned.contains_key(v)
                && matches!(problem.vars()[*v].kind, VarKind::Continuous)
        })
        .collect();
    if continuous.len() > spec.max_continuous {
        return Err(OracleError::ContinuousCapExceeded {
            n: continuous.len(),
            cap: spec.max_continuous,
        });
    }
    let bounds: Vec<(f64, f64)> = problem
        .vars()
        .iter()
        .map(|d| (rat_to_f64(&d.lb), rat_to_f64(&d.ub)))
        .collect();
    let minimized: Vec<usize> = problem.minimize.iter().map(|id| id.0).collect();

    let mut found: Vec<(u32, SampledAssignment)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for mask in 0u64..(1u64 << binaries.len()) {
        // Which variables remain genuinely free after pins, binaries and
        // one-unknown propagation from a probe point.
        let base = |x: &mut Vec<f64>, known: &mut Vec<bool>| {
            for v in 0..n {
                x[v] = 0.0;
                known[v] = false;
            }
            for (v, value) in &pinned {
                x[*v] = *value;
                known[*v] = true;
            }
            for (bit, v) in binaries.iter().enumerate() {
                x[*v] = if mask & (1 << bit) != 0 { 1.0 } else { 0.0 };
                known[*v] = true;
            }
        };
        let mut probe = vec![0.0; n];
        let mut known = vec![false; n];
        base(&mut probe, &mut known);
        let mut probe_known = known.clone();
        for v in &continuous {
            if !probe_known[*v] {
                probe[*v] = 0.5;
            }
        }
        propagate(&constraints, &mut probe, &mut probe_known);
        let free: Vec<usize> = continuous
            .iter()
            .copied()
            .filter(|v| !probe_known[*v])
            .collect();

        // Start points: full grid when the free space is small, otherwise
        // seeded random samples. The origin/corner starts come first so that
        // runs are reproducible.
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if free.len() <= 3 {
            let r = spec.resolution;
            let mut idx = vec![0u32; free.len()];
            loop {
                starts.push(
                    idx.iter()
                        .map(|i| f64::from(*i) / f64::from(r))
                        .collect(),
                );
                let mut d = 0;
                loop {
                    if d == free.len() {
                        break;
                    }
                    idx[d] += 1;
                    if idx[d] <= r {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == free.len() {
                    break;
                }
            }
        } else {
            for _ in 0..spec.starts {
                starts.push((0..free.len()).map(|_| rng.gen::<f64>()).collect());
            }
        }

        let movable: Vec<usize> = continuous.clone();
        let mut located_here = 0usize;
        for start in starts {
            if located_here >= 16 {
                break;
            }
            let mut x = vec![0.0; n];
            let mut k = vec![false; n];
            base(&mut x, &mut k);
            for (j, v) in free.iter().enumerate() {
                x[*v] = start[j];
                k[*v] = true;
            }
            propagate(&constraints, &mut x, &mut k);
            for v in 0..n {
                if !k[v] {
                    x[v] = 0.5;
                }
            }
            minimize_residual(&constraints, &mut x, &movable, &bounds, 35);
            let worst = constraints
                .iter()
                .map(|c| c.violation(&x).abs())
                .fold(0.0f64, f64::max);
            if worst > spec.tolerance {
                continue;
            }
            let sample: SampledAssignment =
                (0..n).map(|v| (VarId(v), x[v])).collect();
            let duplicate = found.iter().any(|(m, existing)| {
                *m == mask as u32
                    && existing
                        .iter()
                        .zip(sample.iter())
                        .all(|((_, a), (_, b))| (a - b).abs() < 1e-6)
            });
            if !duplicate {
                located_here += 1;
                found.push((mask as u32, sample));
            }
        }
    }
    if found.is_empty() {
        return Ok(Vec::new());
    }
    // Objective is determined by the binary pattern (minimized variables are
    // all binaries); keep the minimal ones.
    let objective = |assignment: &SampledAssignment| -> f64 {
        minimized
            .iter()
            .map(|v| assignment.get(&VarId(*v)).copied().unwrap_or(0.0))
            .sum()
    };
    let best = found
        .iter()
        .map(|(_, a)| objective(a))
        .fold(f64::INFINITY, f64::min);
    Ok(found
        .into_iter()
        .filter(|(_, a)| objective(a) <= best + 0.5)
        .map(|(_, a)| a)
        .collect())
}
