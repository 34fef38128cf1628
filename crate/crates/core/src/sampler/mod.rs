//! Steady-state sampling inside a paving: unknowns are drawn one at a time
//! from conditionally contracted domains, equalities are solved for their
//! planned unknown as soon as possible, and the problem is split whenever the
//! remaining constraints fall apart into independent groups.

mod deduce;
mod graph;
mod redundant;

pub use deduce::{deduce, early_check, linear_in, solvable_for, solve_for, CheckOutcome, DomainViolation};
pub use graph::{dependency_graph, graph_of, Component, DependencyGraph};
pub use redundant::add_redundant;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::explain::ConstraintStats;
use crate::interval::{BoxUnion, Interval, IntervalBox};
use crate::model::{Assignment, Constraint, Model, Provenance, Scale};
use crate::propagate::{Propagator, ReviseStats};
use deduce::Prepared;

#[derive(Clone, Debug)]
pub struct SamplerOptions {
    /// Number of solutions wanted.
    pub target: usize,
    /// Top-level attempts allowed before giving up.
    pub max_attempts: u64,
    pub seed: u64,
    pub jobs: usize,
    /// Contract the remaining domains after every draw.
    pub contract: bool,
    /// Split into independent components once they appear.
    pub decompose: bool,
    /// Attempts per component before the enclosing attempt fails.
    pub retries: usize,
    /// Propagation tolerance for conditional contraction.
    pub tol: f64,
    /// Add implied single-term bounds before sampling.
    pub redundant: bool,
    pub time_limit: Option<Duration>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            target: 100,
            max_attempts: 1_000_000,
            seed: 0,
            jobs: 1,
            contract: true,
            decompose: true,
            retries: 10,
            tol: 1e-2,
            redundant: true,
            time_limit: None,
        }
    }
}

impl SamplerOptions {
    /// Plain rejection sampling: independent draws from the box, then checks.
    pub fn naive() -> Self {
        SamplerOptions {
            contract: false,
            decompose: false,
            redundant: false,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubproblemStats {
    pub attempts: u64,
    pub successes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Top-level attempts.
    pub attempts: u64,
    pub solutions: u64,
    /// Sum of attempts over all subproblems, the root included.
    pub samples_drawn: u64,
    pub wall_time_s: f64,
    pub budget_exhausted: bool,
    pub constraints: BTreeMap<String, ConstraintStats>,
    pub subproblems: BTreeMap<String, SubproblemStats>,
}

impl SearchStats {
    pub fn merge(&mut self, o: &SearchStats) {
        self.attempts += o.attempts;
        self.solutions += o.solutions;
        self.samples_drawn += o.samples_drawn;
        for (k, v) in &o.constraints {
            self.constraints.entry(k.clone()).or_default().merge(v);
        }
        for (k, v) in &o.subproblems {
            let s = self.subproblems.entry(k.clone()).or_default();
            s.attempts += v.attempts;
            s.successes += v.successes;
        }
    }

    /// Fraction of top-level attempts that produced a solution.
    pub fn acceptance(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.solutions as f64 / self.attempts as f64
        }
    }

    fn bump(&mut self, id: &str, violated: bool) {
        let s = self.constraints.entry(id.to_string()).or_default();
        s.checked += 1;
        s.violated += violated as u64;
    }

    fn enter(&mut self, label: &str) {
        self.subproblems.entry(label.to_string()).or_default().attempts += 1;
        self.samples_drawn += 1;
    }

    fn succeed(&mut self, label: &str) {
        self.subproblems.entry(label.to_string()).or_default().successes += 1;
    }
}

/// A total assignment satisfying every non-redundant constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub attempt: u64,
    pub assignment: Assignment,
    /// Slack of every checked constraint (negated absolute residual for equalities).
    pub residuals: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct SolutionRecord {
    attempt: u64,
    values: BTreeMap<String, f64>,
    deduced: Vec<String>,
    residuals: BTreeMap<String, f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolutionReadError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Solution {
    pub fn values(&self) -> Vec<f64> {
        self.assignment.to_vec()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.assignment.get_by_name(name)
    }

    pub fn to_json_line(&self) -> String {
        let names = self.assignment.names();
        let rec = SolutionRecord {
            attempt: self.attempt,
            values: names
                .iter()
                .enumerate()
                .filter_map(|(i, n)| self.assignment.get(i).map(|v| (n.clone(), v)))
                .collect(),
            deduced: names
                .iter()
                .enumerate()
                .filter(|(i, _)| self.assignment.provenance(*i) == Some(Provenance::Deduced))
                .map(|(_, n)| n.clone())
                .collect(),
            residuals: self.residuals.clone(),
        };
        serde_json::to_string(&rec).expect("finite values serialize")
    }

    pub fn from_json_line(line: &str, names: &Arc<[String]>) -> Result<Solution, String> {
        let rec: SolutionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let mut a = Assignment::empty(names.clone());
        for (i, n) in names.iter().enumerate() {
            let v = *rec.values.get(n).ok_or_else(|| format!("missing value for `{n}`"))?;
            let p = if rec.deduced.contains(n) { Provenance::Deduced } else { Provenance::Sampled };
            a.set(i, v, p);
        }
        if let Some(extra) = rec.values.keys().find(|k| !names.contains(k)) {
            return Err(format!("unknown `{extra}` is not in the model"));
        }
        Ok(Solution {
            attempt: rec.attempt,
            assignment: a,
            residuals: rec.residuals,
        })
    }
}

pub fn write_solutions_jsonl<W: Write>(sols: &[Solution], mut w: W) -> std::io::Result<()> {
    for s in sols {
        writeln!(w, "{}", s.to_json_line())?;
    }
    Ok(())
}

pub fn read_solutions_jsonl<R: BufRead>(r: R, names: &Arc<[String]>) -> Result<Vec<Solution>, SolutionReadError> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Solution::from_json_line(&line, names).map_err(|msg| SolutionReadError::Format { line: k + 1, msg })?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SampleRun {
    pub solutions: Vec<Solution>,
    pub stats: SearchStats,
}

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error("the search space is empty")]
    EmptyUnion,
    #[error("paving unknowns do not match the model: {0}")]
    Mismatch(String),
}

fn width_score(d: Interval, scale: Scale) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    match scale {
        Scale::Log if d.lo() > 0.0 => (d.hi() / d.lo()).ln(),
        _ => d.relative_width(),
    }
}

/// Chooses, for as many equalities as possible, an unknown to be deduced
/// from it: repeatedly take an equality with an unknown that enters it in
/// closed-form solvable way and appears in no other remaining equality,
/// preferring the widest such unknown. Deduction runs in reverse order, so
/// each equality is solved when all its other unknowns are known.
/// Returns `(constraint index, unknown)` pairs in elimination order.
pub fn deduction_plan(cs: &[Constraint], domains: &IntervalBox, scales: &[Scale]) -> Vec<(usize, usize)> {
    let eqs: Vec<(usize, Prepared)> = cs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_equality() && !c.is_redundant())
        .map(|(k, c)| (k, Prepared::new(c)))
        .collect();
    let mut remaining: Vec<bool> = vec![true; eqs.len()];
    let mut occurrences = vec![0usize; domains.len()];
    for (_, p) in &eqs {
        for &v in &p.vars {
            occurrences[v] += 1;
        }
    }
    let mut plan = Vec::new();
    loop {
        let mut count = vec![0usize; domains.len()];
        for (j, (_, p)) in eqs.iter().enumerate() {
            if remaining[j] {
                for &v in &p.vars {
                    count[v] += 1;
                }
            }
        }
        // Ties go to the unknown shared by fewer equalities overall: shared
        // unknowns are better drawn, since assigning them decouples the rest.
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (j, (_, p)) in eqs.iter().enumerate() {
            if !remaining[j] {
                continue;
            }
            for &u in &p.vars {
                if count[u] != 1 || !p.solvable_for(u) {
                    continue;
                }
                let s = width_score(domains.dims()[u], scales[u]);
                let better = match best {
                    None => true,
                    Some((bs, _, _, bo)) => s > bs || (s == bs && occurrences[u] < bo),
                };
                if better {
                    best = Some((s, j, u, occurrences[u]));
                }
            }
        }
        let Some((_, j, u, _)) = best else { break };
        remaining[j] = false;
        plan.push((eqs[j].0, u));
    }
    plan
}

/// Order in which unknowns that are not deduced get drawn: narrowest
/// relative width first, then the unknown whose assignment splits the
/// problem into the most parts, then declaration order.
pub fn select_sampling_set(cs: &[Constraint], u: &BoxUnion, plan: &[(usize, usize)]) -> Vec<usize> {
    let Some(hull) = u.hull() else { return vec![] };
    let deduced: BTreeSet<usize> = plan.iter().map(|&(_, v)| v).collect();
    let vars_of: Vec<Vec<usize>> = cs.iter().map(Constraint::unknowns).collect();
    let active: Vec<usize> = (0..cs.len()).collect();
    let g = DependencyGraph::build(&vars_of, &active, &vec![false; hull.len()]);
    let mut order: Vec<(f64, usize, usize)> = (0..hull.len())
        .filter(|v| !deduced.contains(v))
        .map(|v| (hull.dims()[v].relative_width(), g.articulation_score(v), v))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    order.into_iter().map(|(_, _, v)| v).collect()
}

/// Everything fixed for a sampling run.
struct Sampler {
    cs: Vec<Constraint>,
    names: Arc<[String]>,
    scales: Vec<Scale>,
    prepared: Vec<Option<Prepared>>,
    vars_of: Vec<Vec<usize>>,
    prop: Propagator,
    order: Vec<usize>,
    boxes: Vec<IntervalBox>,
    /// Cumulative selection probabilities over `boxes`.
    cumulative: Vec<f64>,
    opts: SamplerOptions,
}

/// Mutable state of one attempt.
struct Attempt {
    a: Assignment,
    cur: Vec<Interval>,
    dom: Vec<Interval>,
    checked: Vec<bool>,
    rng: ChaCha8Rng,
    stats: SearchStats,
}

impl Sampler {
    fn new(cs: Vec<Constraint>, names: Arc<[String]>, scales: Vec<Scale>, u: &BoxUnion, opts: SamplerOptions) -> Sampler {
        let hull = u.hull().expect("non-empty union");
        let plan = deduction_plan(&cs, &hull, &scales);
        let order = select_sampling_set(&cs, u, &plan);
        let prepared = cs.iter().map(|c| c.is_equality().then(|| Prepared::new(c))).collect();
        let vars_of = cs.iter().map(Constraint::unknowns).collect();
        let prop = Propagator::new(&cs, names.len());
        let logw: Vec<f64> = u
            .boxes()
            .iter()
            .map(|b| {
                b.dims()
                    .iter()
                    .zip(&scales)
                    .map(|(d, s)| match s {
                        Scale::Log if d.lo() > 0.0 => (d.hi() / d.lo()).ln(),
                        _ => d.width(),
                    })
                    .map(|m| m.max(1e-300).ln())
                    .sum()
            })
            .collect();
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = logw
            .iter()
            .map(|w| {
                acc += (w - top).exp();
                acc
            })
            .collect();
        for c in &mut cumulative {
            *c /= acc;
        }
        Sampler {
            cs,
            names,
            scales,
            prepared,
            vars_of,
            prop,
            order,
            boxes: u.boxes().to_vec(),
            cumulative,
            opts,
        }
    }

    fn run_attempt(&self, k: u64) -> (Option<Solution>, SearchStats) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(k);
        let x: f64 = rng.random();
        let bi = self.cumulative.iter().position(|&c| x < c).unwrap_or(self.boxes.len() - 1);
        let dom = self.boxes[bi].dims().to_vec();
        let mut at = Attempt {
            a: Assignment::empty(self.names.clone()),
            cur: dom.clone(),
            dom,
            checked: vec![false; self.cs.len()],
            rng,
            stats: SearchStats::default(),
        };
        at.stats.attempts = 1;
        at.stats.enter("root");
        let all: Vec<usize> = (0..self.cs.len()).collect();
        let mut sol = None;
        if self.solve(&mut at, &all) && at.a.is_total() {
            if let Some(residuals) = self.verify(&at.a) {
                at.stats.succeed("root");
                at.stats.solutions = 1;
                sol = Some(Solution {
                    attempt: k,
                    assignment: at.a.clone(),
                    residuals,
                });
            }
        }
        (sol, at.stats)
    }

    /// Independent re-check of every non-redundant constraint.
    fn verify(&self, a: &Assignment) -> Option<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for c in self.cs.iter().filter(|c| !c.is_redundant()) {
            let r = c.check(a).ok()?;
            if !r.satisfied {
                return None;
            }
            out.insert(c.id.clone(), r.slack);
        }
        Some(out)
    }

    fn solve(&self, at: &mut Attempt, comp: &[usize]) -> bool {
        loop {
            if !self.deduce(at, comp) || !self.check(at, comp) {
                return false;
            }
            let free: BTreeSet<usize> = comp
                .iter()
                .flat_map(|&k| self.vars_of[k].iter().copied())
                .filter(|&v| !at.a.is_assigned(v))
                .collect();
            if free.is_empty() {
                return true;
            }
            if self.opts.contract && !self.contract(at, comp) {
                return false;
            }
            let Some(&u) = self.order.iter().find(|v| free.contains(v)) else {
                // Only unknowns awaiting deduction remain, and none can be solved.
                return false;
            };
            let range = if self.opts.contract { at.cur[u] } else { at.dom[u] };
            let Some(v) = draw(&mut at.rng, range, self.scales[u]) else { return false };
            at.a.set(u, v, Provenance::Sampled);
            at.cur[u] = Interval::point(v);
            if self.opts.decompose {
                let assigned: Vec<bool> = (0..self.names.len()).map(|i| at.a.is_assigned(i)).collect();
                let g = DependencyGraph::build(&self.vars_of, comp, &assigned);
                let comps = g.components();
                if comps.len() >= 2 && !self.solve_split(at, comp, comps) {
                    return false;
                }
            }
        }
    }

    /// Solves independent components one after the other, hardest first,
    /// retrying each a bounded number of times.
    fn solve_split(&self, at: &mut Attempt, comp: &[usize], mut comps: Vec<Component>) -> bool {
        // Checks on already-assigned constraints must not wait for the parts.
        if !self.check(at, comp) {
            return false;
        }
        let rate = |c: &Component, st: &SearchStats| {
            c.constraints
                .iter()
                .filter_map(|&k| st.constraints.get(&self.cs[k].id).and_then(ConstraintStats::rate))
                .fold(0.0f64, f64::max)
        };
        comps.sort_by(|x, y| {
            y.excess()
                .cmp(&x.excess())
                .then(rate(y, &at.stats).total_cmp(&rate(x, &at.stats)))
                .then(x.constraints[0].cmp(&y.constraints[0]))
        });
        for c in &comps {
            let label = c.constraints.iter().map(|&k| self.cs[k].id.as_str()).collect::<Vec<_>>().join("+");
            let mut solved = false;
            for _ in 0..self.opts.retries.max(1) {
                let (a0, cur0, checked0) = (at.a.clone(), at.cur.clone(), at.checked.clone());
                at.stats.enter(&label);
                if self.solve(at, &c.constraints) {
                    at.stats.succeed(&label);
                    solved = true;
                    break;
                }
                at.a = a0;
                at.cur = cur0;
                at.checked = checked0;
            }
            if !solved {
                return false;
            }
        }
        true
    }

    fn deduce(&self, at: &mut Attempt, comp: &[usize]) -> bool {
        loop {
            let mut progress = false;
            for &k in comp {
                let Some(p) = &self.prepared[k] else { continue };
                let mut free = p.vars.iter().filter(|&&v| !at.a.is_assigned(v));
                let (Some(&u), None) = (free.next(), free.next()) else { continue };
                if !p.solvable_for(u) {
                    continue;
                }
                let key = format!("domain:{}", self.names[u]);
                match p.solve(u, &at.a, at.dom[u]) {
                    Some(v) if at.dom[u].contains(v) => {
                        at.stats.bump(&key, false);
                        at.a.set(u, v, Provenance::Deduced);
                        at.cur[u] = Interval::point(v);
                        progress = true;
                    }
                    Some(_) => {
                        at.stats.bump(&key, true);
                        return false;
                    }
                    None => {
                        at.stats.bump(&self.cs[k].id, true);
                        return false;
                    }
                }
            }
            if !progress {
                return true;
            }
        }
    }

    fn check(&self, at: &mut Attempt, comp: &[usize]) -> bool {
        for &k in comp {
            if at.checked[k] || self.vars_of[k].iter().any(|&v| !at.a.is_assigned(v)) {
                continue;
            }
            at.checked[k] = true;
            let c = &self.cs[k];
            let ok = c.check(&at.a).is_ok_and(|r| r.satisfied);
            at.stats.bump(&c.id, !ok);
            if !ok {
                return false;
            }
        }
        true
    }

    fn contract(&self, at: &mut Attempt, comp: &[usize]) -> bool {
        let mut mask = vec![false; self.cs.len()];
        for &k in comp {
            mask[k] = true;
        }
        let mut rs = ReviseStats::new(self.cs.len());
        if self.prop.fixpoint(&mut at.cur, self.opts.tol, Some(&mask), Some(&mut rs)) {
            return true;
        }
        if let Some(k) = rs.violated.iter().position(|&v| v > 0) {
            at.stats.bump(&self.cs[k].id, true);
        }
        false
    }
}

fn draw(rng: &mut ChaCha8Rng, d: Interval, scale: Scale) -> Option<f64> {
    if d.is_empty() || !d.lo().is_finite() || !d.hi().is_finite() {
        return None;
    }
    if d.is_point() {
        return Some(d.lo());
    }
    let u: f64 = rng.random();
    let v = match scale {
        Scale::Log if d.lo() > 0.0 => (d.lo().ln() + u * (d.hi() / d.lo()).ln()).exp(),
        Scale::Log if d.hi() < 0.0 => -(((-d.hi()).ln() + u * (d.lo() / d.hi()).ln()).exp()),
        _ => d.lo() + u * d.width(),
    };
    Some(v.clamp(d.lo(), d.hi()))
}

/// Draws steady-state solutions of `model` inside `u`. Attempts are seeded
/// individually, so the result does not depend on `jobs`. When the attempt
/// budget or time limit runs out first, the partial result is returned with
/// `stats.budget_exhausted` set.
pub fn sample_steady_states(model: &Model, u: &BoxUnion, opts: &SamplerOptions) -> Result<SampleRun, SampleError> {
    sample_constraints(model.constraints(), model.unknown_names(), &model.scales(), u, opts)
}

pub fn sample_constraints(
    cs: &[Constraint],
    names: &Arc<[String]>,
    scales: &[Scale],
    u: &BoxUnion,
    opts: &SamplerOptions,
) -> Result<SampleRun, SampleError> {
    let hull = u.hull().ok_or(SampleError::EmptyUnion)?;
    if hull.names().as_ref() != names.as_ref() {
        return Err(SampleError::Mismatch(format!(
            "expected [{}], got [{}]",
            names.join(", "),
            hull.names().join(", ")
        )));
    }
    let start = Instant::now();
    let mut all = cs.to_vec();
    if opts.redundant {
        let known: BTreeSet<String> = all.iter().map(|c| c.id.clone()).collect();
        all.extend(add_redundant(cs, &hull).into_iter().filter(|c| !known.contains(&c.id)));
    }
    let sampler = Sampler::new(all, names.clone(), scales.to_vec(), u, opts.clone());
    let jobs = opts.jobs.max(1);
    let pool = (jobs > 1).then(|| rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool"));
    let batch = if jobs > 1 { jobs as u64 * 16 } else { 1 };
    let mut stats = SearchStats::default();
    let mut solutions = Vec::new();
    let mut next = 0u64;
    'outer: while solutions.len() < opts.target {
        if next >= opts.max_attempts || opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            stats.budget_exhausted = true;
            break;
        }
        let end = (next + batch).min(opts.max_attempts);
        let results: Vec<(Option<Solution>, SearchStats)> = match &pool {
            Some(p) => p.install(|| (next..end).into_par_iter().map(|k| sampler.run_attempt(k)).collect()),
            None => (next..end).map(|k| sampler.run_attempt(k)).collect(),
        };
        next = end;
        for (sol, st) in results {
            stats.merge(&st);
            if let Some(s) = sol {
                solutions.push(s);
                if solutions.len() >= opts.target {
                    break 'outer;
                }
            }
        }
    }
    stats.wall_time_s = start.elapsed().as_secs_f64();
    Ok(SampleRun { solutions, stats })
}
