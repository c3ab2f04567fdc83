//! Depth-first branch-and-prune over binary assignments and continuous
//! boxes, with exact certificate extraction.
//!
//! Zero-first binary branching mirrors the translation's minimized
//! indicators, so semantically correct cases are explored first; the final
//! verdict never depends on that heuristic because every SAT answer is
//! re-verified (exactly, or within the residual tolerance) and UNSAT is only
//! reported when every leaf was refuted by interval reasoning.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use crate::formula::{eval_f64, ClauseSet, Valuation};
use crate::rat::{clamp_unit, rat_from_f64, rat_to_f64, round_to_rational, simplest_in_interval};
use crate::translate::{Problem, Relation};

use super::contract::{contract_compiled, violation, CompiledProblem};
use super::semantic;
use super::interval::{Interval, IntervalBox};
use super::{verify_model, BinaryOrder, SearchStats, SolverConfig};

pub(super) struct EngineShared {
    pub stop: AtomicBool,
    pub nodes: AtomicU64,
}

pub(super) enum EngineEnd {
    FoundExact(Valuation),
    Exhausted,
    NodeBudget,
    TimeBudget,
    Cancelled,
}

pub(super) struct EngineOutcome {
    pub end: EngineEnd,
    pub stash: Option<Valuation>,
    pub abandoned: u64,
    pub stats: SearchStats,
}

pub(super) struct Engine<'a> {
    pub cp: &'a CompiledProblem,
    pub set: &'a ClauseSet,
    pub cfg: &'a SolverConfig,
    /// (variable name, compiled index) for the clause-set vocabulary.
    pub sources: &'a [(String, usize)],
    pub shared: &'a EngineShared,
    pub deadline: Instant,
    tried: HashSet<String>,
    stats: SearchStats,
    stash: Option<Valuation>,
    abandoned: u64,
}

impl<'a> Engine<'a> {
    pub fn new(
        cp: &'a CompiledProblem,
        set: &'a ClauseSet,
        cfg: &'a SolverConfig,
        sources: &'a [(String, usize)],
        shared: &'a EngineShared,
        deadline: Instant,
    ) -> Engine<'a> {
        Engine {
            cp,
            set,
            cfg,
            sources,
            shared,
            deadline,
            tried: HashSet::new(),
            stats: SearchStats::default(),
            stash: None,
            abandoned: 0,
        }
    }

    fn all_binaries_decided(&self, bx: &IntervalBox) -> bool {
        self.cp.binaries.iter().all(|&v| bx.get(v).is_point())
    }

    fn semantically_refuted(&self, bx: &IntervalBox) -> bool {
        let lookup = |name: &str| -> Interval {
            self.sources
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, idx)| bx.get(*idx))
                .unwrap_or(Interval::new(0.0, 1.0))
        };
        self.set
            .clauses()
            .iter()
            .any(|c| semantic::clause_refuted(c, &lookup))
    }

    fn widest_continuous(&self, bx: &IntervalBox) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for v in 0..bx.len() {
            if self.cp.is_binary[v] {
                continue;
            }
            let w = bx.get(v).width();
            if best.map_or(true, |(_, bw)| w > bw) {
                best = Some((v, w));
            }
        }
        best
    }

    fn is_atomic(&self, bx: &IntervalBox) -> bool {
        self.all_binaries_decided(bx)
            && self
                .widest_continuous(bx)
                .map_or(true, |(_, w)| w <= self.cfg.delta)
    }

    fn pick_binary(&self, bx: &IntervalBox) -> Option<usize> {
        let undecided = self
            .cp
            .binaries
            .iter()
            .copied()
            .filter(|&v| !bx.get(v).is_point());
        match self.cfg.binary_order {
            BinaryOrder::Occurrence => undecided.min(),
            BinaryOrder::MostConstrained => undecided
                .map(|v| (v, self.cp.occurrence[v]))
                // max occurrence, ties to the lowest id
                .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)))
                .map(|(v, _)| v),
        }
    }

    /// Children of a non-atomic box: undecided binary first (zero branch
    /// first when configured), else bisection of the widest interval.
    pub fn split(&self, bx: &IntervalBox) -> Option<(IntervalBox, IntervalBox)> {
        if let Some(v) = self.pick_binary(bx) {
            let mut zero = bx.clone();
            zero.set(v, Interval::point(0.0));
            let mut one = bx.clone();
            one.set(v, Interval::point(1.0));
            return Some(if self.cfg.zero_first {
                (zero, one)
            } else {
                (one, zero)
            });
        }
        let (v, w) = self.widest_continuous(bx)?;
        if w <= self.cfg.delta {
            return None;
        }
        let iv = bx.get(v);
        let mid = iv.midpoint();
        if mid <= iv.lo || mid >= iv.hi {
            return None;
        }
        let mut low = bx.clone();
        low.set(v, Interval::new(iv.lo, mid));
        let mut high = bx.clone();
        high.set(v, Interval::new(mid, iv.hi));
        Some((low, high))
    }

    /// Simplest-rational candidate from the current source-variable hulls,
    /// verified exactly. A candidate is only evaluated once per search.
    fn try_exact_from_box(&mut self, bx: &IntervalBox) -> Option<Valuation> {
        let mut v = Valuation::new();
        let mut key = String::new();
        for (name, idx) in self.sources {
            let (lo, hi) = bx.rational_hull(*idx)?;
            let lo = clamp_unit(lo);
            let hi = clamp_unit(hi);
            if lo > hi {
                return None;
            }
            let r = simplest_in_interval(&lo, &hi);
            key.push_str(&format!("{name}={r};"));
            v.insert(name.clone(), r).ok()?;
        }
        if !self.tried.insert(key) {
            return None;
        }
        if verify_model(self.set, &v) {
            Some(v)
        } else {
            None
        }
    }

    /// Exact attempt from a polished floating-point model: snap every source
    /// variable to the simplest rational nearby and re-verify.
    fn try_exact_from_point(&mut self, point: &[f64]) -> Option<Valuation> {
        for (window, max_den) in [(1e-3, 100), (1e-7, 1_000_000)] {
            let mut v = Valuation::new();
            let mut ok = true;
            let mut key = String::new();
            for (name, idx) in self.sources {
                match round_to_rational(point[*idx], window, max_den) {
                    Some(r) => {
                        let r = clamp_unit(r);
                        key.push_str(&format!("{name}={r};"));
                        if v.insert(name.clone(), r).is_err() {
                            ok = false;
                            break;
                        }
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok || !self.tried.insert(key) {
                continue;
            }
            if verify_model(self.set, &v) {
                return Some(v);
            }
        }
        None
    }

    /// Numerical acceptance at an atomic box: polish the midpoint, require
    /// every constraint residual and every clause bound to hold within
    /// epsilon.
    fn try_leaf(&mut self, bx: &IntervalBox) -> LeafOutcome {
        let mut point: Vec<f64> = (0..bx.len()).map(|v| bx.get(v).midpoint()).collect();
        polish(self.cp, &mut point, 40);
        if let Some(model) = self.try_exact_from_point(&point) {
            return LeafOutcome::Exact(model);
        }
        if self.cp.max_violation(&point) > self.cfg.epsilon {
            return LeafOutcome::Nothing;
        }
        // Clause bounds on the exact semantics, within epsilon.
        let values: std::collections::BTreeMap<String, f64> = self
            .sources
            .iter()
            .map(|(name, idx)| (name.clone(), point[*idx]))
            .collect();
        for clause in self.set.clauses() {
            let value = match eval_f64(&values, clause.body()) {
                Ok(x) => x,
                Err(_) => return LeafOutcome::Nothing,
            };
            let lo = rat_to_f64(clause.lower());
            let hi = rat_to_f64(clause.upper());
            if value < lo - self.cfg.epsilon || value > hi + self.cfg.epsilon {
                return LeafOutcome::Nothing;
            }
        }
        let mut model = Valuation::new();
        for (name, idx) in self.sources {
            let r = rat_from_f64(point[*idx].clamp(0.0, 1.0)).unwrap_or_default();
            if model.insert(name.clone(), clamp_unit(r)).is_err() {
                return LeafOutcome::Nothing;
            }
        }
        LeafOutcome::Numerical(model)
    }

    pub fn run(mut self, root: IntervalBox) -> EngineOutcome {
        let mut stack = vec![root];
        let end = loop {
            let bx = match stack.pop() {
                Some(b) => b,
                None => break EngineEnd::Exhausted,
            };
            if self.shared.stop.load(Ordering::Relaxed) {
                break EngineEnd::Cancelled;
            }
            let nodes = self.shared.nodes.fetch_add(1, Ordering::Relaxed) + 1;
            self.stats.nodes += 1;
            if nodes > self.cfg.max_nodes {
                break EngineEnd::NodeBudget;
            }
            if self.stats.nodes % 64 == 0 && Instant::now() >= self.deadline {
                break EngineEnd::TimeBudget;
            }
            let contracted = match contract_compiled(self.cp, &bx, &mut self.stats.contractions)
            {
                Some(b) => b,
                None => {
                    self.stats.refuted += 1;
                    continue;
                }
            };
            // Second rigorous route: the clause semantics over the source
            // box. This catches boxes whose constraint relaxation is
            // feasible only through case-boundary assignments.
            if self.semantically_refuted(&contracted) {
                self.stats.refuted += 1;
                continue;
            }
            if self.all_binaries_decided(&contracted) {
                if let Some(model) = self.try_exact_from_box(&contracted) {
                    break EngineEnd::FoundExact(model);
                }
            }
            if self.is_atomic(&contracted) {
                match self.try_leaf(&contracted) {
                    LeafOutcome::Exact(model) => break EngineEnd::FoundExact(model),
                    LeafOutcome::Numerical(model) => {
                        if self.stash.is_none() {
                            self.stash = Some(model);
                        }
                        self.abandoned += 1;
                    }
                    LeafOutcome::Nothing => {
                        self.abandoned += 1;
                    }
                }
                continue;
            }
            match self.split(&contracted) {
                Some((first, second)) => {
                    stack.push(second);
                    stack.push(first);
                }
                None => {
                    // Unsplittable but not certified: give it up.
                    self.abandoned += 1;
                }
            }
        };
        EngineOutcome {
            end,
            stash: self.stash,
            abandoned: self.abandoned,
            stats: self.stats,
        }
    }
}

enum LeafOutcome {
    Exact(Valuation),
    Numerical(Valuation),
    Nothing,
}

/// Damped Gauss-Newton polish of equality residuals and active inequality
/// violations over the continuous variables. Keeps the point inside the
/// variable bounds; used only to sharpen numerical candidates, never for
/// refutation.
pub(super) fn polish(cp: &CompiledProblem, point: &mut [f64], max_iter: usize) {
    let free: Vec<usize> = (0..point.len()).filter(|&v| !cp.is_binary[v]).collect();
    if free.is_empty() {
        return;
    }
    let col_of: std::collections::HashMap<usize, usize> =
        free.iter().enumerate().map(|(c, v)| (*v, c)).collect();
    let mut lambda = 1e-8;
    let mut current = sum_sq_violations(cp, point);
    for _ in 0..max_iter {
        if current < 1e-24 {
            break;
        }
        // Build residual rows and the Jacobian over free variables.
        let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
        for c in &cp.constraints {
            let r = violation(c, point);
            let active = match c.relation {
                Relation::Eq => true,
                _ => r > 0.0,
            };
            if !active {
                continue;
            }
            let sign = match c.relation {
                Relation::Ge => -1.0,
                _ => 1.0,
            };
            let mut grad: Vec<(usize, f64)> = Vec::new();
            for (k, v) in &c.linear_mid {
                if let Some(&col) = col_of.get(v) {
                    grad.push((col, sign * k));
                }
            }
            for (k, a, b) in &c.bilinear_mid {
                if a == b {
                    if let Some(&col) = col_of.get(a) {
                        grad.push((col, sign * 2.0 * k * point[*a]));
                    }
                } else {
                    if let Some(&col) = col_of.get(a) {
                        grad.push((col, sign * k * point[*b]));
                    }
                    if let Some(&col) = col_of.get(b) {
                        grad.push((col, sign * k * point[*a]));
                    }
                }
            }
            let signed = match c.relation {
                Relation::Eq => r,
                _ => r.abs(),
            };
            rows.push((signed, grad));
        }
        if rows.is_empty() {
            break;
        }
        let n = free.len();
        let mut ata = vec![vec![0.0; n]; n];
        let mut atb = vec![0.0; n];
        for (r, grad) in &rows {
            for (i, gi) in grad {
                atb[*i] -= gi * r;
                for (j, gj) in grad {
                    ata[*i][*j] += gi * gj;
                }
            }
        }
        let mut improved = false;
        for _ in 0..6 {
            let mut a = ata.clone();
            for (d, row) in a.iter_mut().enumerate() {
                row[d] += lambda;
            }
            let delta = match solve_dense(a, atb.clone()) {
                Some(d) => d,
                None => break,
            };
            let mut trial: Vec<f64> = point.to_vec();
            for (col, &v) in free.iter().enumerate() {
                let b = cp.bounds[v];
                trial[v] = (trial[v] + delta[col]).clamp(b.lo, b.hi);
            }
            let trial_cost = sum_sq_violations(cp, &trial);
            if trial_cost < current {
                point.copy_from_slice(&trial);
                current = trial_cost;
                lambda = (lambda / 3.0).max(1e-14);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
}

fn sum_sq_violations(cp: &CompiledProblem, point: &[f64]) -> f64 {
    cp.constraints
        .iter()
        .map(|c| {
            let r = violation(c, point);
            r * r
        })
        .sum()
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c2 in col..n {
                    a[r][c2] -= f * a[col][c2];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c2 in row + 1..n {
            s -= a[row][c2] * x[c2];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Compiled-source pairing used by the engine and backends.
pub(super) fn source_indices(problem: &Problem, set: &ClauseSet) -> Vec<(String, usize)> {
    set.vocabulary()
        .iter()
        .filter_map(|name| problem.var_by_name(name).map(|id| (name.clone(), id.0)))
        .collect()
}
