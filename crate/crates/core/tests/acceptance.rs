//! Acceptance run: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use steadyscan::explain::{min_conflict_sets, ExplainOptions};
use steadyscan::expr::SliceEnv;
use steadyscan::interval::{sig_plus, BoxUnion, Interval, IntervalBox, IntervalOp};
use steadyscan::iron::{builtin_iron_model, cutoff_response, revision_workflow_fixture};
use steadyscan::model::{Constraint, Model, Scope, EQ_RTOL};
use steadyscan::ode::{rhs, steady_state_vector, SimOptions, Stability};
use steadyscan::propagate::{pave, propagate_fixpoint, PaveOptions, DEFAULT_TOL};
use steadyscan::sampler::{add_redundant, sample_steady_states, SamplerOptions, Solution};
use steadyscan::stl::StlFormula;
use steadyscan::trace::Trace;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("interval soundness", 10, interval_soundness),
        ("contraction soundness", 30, contraction_soundness),
        ("paving gain on the eps band", 10, paving_gain),
        ("conflict-set minimality", 60, conflict_minimality),
        ("redundant-bound derivation", 10, redundant_bounds),
        ("steady-state validity", 120, steady_state_validity),
        ("throughput", 600, throughput),
        ("cut-off dynamics", 300, dynamics),
        ("STL monitor equivalence", 60, stl_equivalence),
        ("inconsistency workflow", 120, inconsistency_workflow),
    ];
    let mut failed = 0;
    for (k, (name, limit, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = f();
        let dt = t0.elapsed();
        let in_time = dt <= Duration::from_secs(*limit);
        let pass = o.pass && in_time;
        failed += !pass as usize;
        let timing = if in_time { String::new() } else { format!("; over the {limit} s limit") };
        println!(
            "criterion {:>2} {}: {} ({}; {:.2} s{timing})",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            dt.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

fn random_interval(r: &mut ChaCha8Rng) -> Interval {
    let endpoint = |r: &mut ChaCha8Rng| -> f64 {
        match r.random_range(0..4) {
            0 => r.random_range(-10.0..10.0),
            1 => 10f64.powf(r.random_range(-8.0..8.0)),
            2 => -10f64.powf(r.random_range(-8.0..8.0)),
            _ => [0.0, 1.0, -1.0, 0.5][r.random_range(0..4)],
        }
    };
    let (a, b) = (endpoint(r), endpoint(r));
    if r.random_bool(0.1) {
        Interval::point(a)
    } else {
        Interval::new(a.min(b), a.max(b))
    }
}

fn positive_interval(r: &mut ChaCha8Rng) -> Interval {
    let a = 10f64.powf(r.random_range(-6.0..6.0));
    let b = a * 10f64.powf(r.random_range(0.0..3.0));
    Interval::new(a, b)
}

fn point_in(i: &Interval, r: &mut ChaCha8Rng) -> f64 {
    match r.random_range(0..5) {
        0 => i.lo(),
        1 => i.hi(),
        _ => {
            let x = i.lo() + r.random_range(0.0..=1.0) * (i.hi() - i.lo());
            x.clamp(i.lo(), i.hi())
        }
    }
}

fn interval_soundness() -> Outcome {
    type Case = fn(&mut ChaCha8Rng) -> Option<(Interval, f64)>;
    fn binary(op: IntervalOp, f: fn(f64, f64) -> f64, a: Interval, b: Interval, r: &mut ChaCha8Rng) -> Option<(Interval, f64)> {
        let res = Interval::apply(op, a, Some(b)).ok()?;
        Some((res, f(point_in(&a, r), point_in(&b, r))))
    }
    let cases: Vec<(&str, Case)> = vec![
        ("add", |r| {
            let (a, b) = (random_interval(r), random_interval(r));
            binary(IntervalOp::Add, |x, y| x + y, a, b, r)
        }),
        ("sub", |r| {
            let (a, b) = (random_interval(r), random_interval(r));
            binary(IntervalOp::Sub, |x, y| x - y, a, b, r)
        }),
        ("mul", |r| {
            let (a, b) = (random_interval(r), random_interval(r));
            binary(IntervalOp::Mul, |x, y| x * y, a, b, r)
        }),
        ("div", |r| {
            // x / 0 has no real value; only nonzero divisors are checked.
            let (a, b) = (random_interval(r), random_interval(r));
            binary(IntervalOp::Div, |x, y| if y == 0.0 { f64::NAN } else { x / y }, a, b, r)
        }),
        ("min", |r| {
            let (a, b) = (random_interval(r), random_interval(r));
            binary(IntervalOp::Min, f64::min, a, b, r)
        }),
        ("max", |r| {
            let (a, b) = (random_interval(r), random_interval(r));
            binary(IntervalOp::Max, f64::max, a, b, r)
        }),
        ("pow", |r| {
            let (a, b) = if r.random_bool(0.5) {
                (random_interval(r), Interval::point(r.random_range(-4..=5) as f64))
            } else {
                (positive_interval(r), Interval::new(-2.5, 3.5).intersect(&random_interval(r).hull(&Interval::point(0.3))))
            };
            binary(IntervalOp::Pow, f64::powf, a, b, r)
        }),
        ("neg", |r| {
            let a = random_interval(r);
            Some((Interval::apply(IntervalOp::Neg, a, None).ok()?, -point_in(&a, r)))
        }),
        ("abs", |r| {
            let a = random_interval(r);
            Some((Interval::apply(IntervalOp::Abs, a, None).ok()?, point_in(&a, r).abs()))
        }),
        ("powi", |r| {
            let a = random_interval(r);
            let n = r.random_range(-3..=6);
            Some((a.powi(n), point_in(&a, r).powi(n)))
        }),
        ("root", |r| {
            let a = positive_interval(r);
            let n = r.random_range(2..=5) as f64;
            Some((a.root(n), point_in(&a, r).powf(1.0 / n)))
        }),
        ("sig", |r| {
            let (x, th) = (positive_interval(r), positive_interval(r));
            let n = Interval::point(r.random_range(1..=6) as f64);
            Some((x.sig_plus(&th, &n), sig_plus(point_in(&x, r), point_in(&th, r), n.lo())))
        }),
    ];
    let mut r = rng(1);
    let mut bad = Vec::new();
    let mut checked = 0;
    for (name, case) in &cases {
        for _ in 0..1000 {
            let Some((res, v)) = case(&mut r) else { continue };
            if v.is_nan() {
                continue;
            }
            checked += 1;
            if !res.contains(v) {
                bad.push(format!("{name}: {v:e} not in {res}"));
            }
        }
    }
    let detail = format!("{checked} point checks over {} ops, {} escapes", cases.len(), bad.len());
    if !bad.is_empty() {
        eprintln!("{}", bad.iter().take(5).cloned().collect::<Vec<_>>().join("\n"));
    }
    outcome(bad.is_empty() && checked >= 9000, detail)
}

// ---------------------------------------------------------------- 2

fn random_system(r: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<Constraint>, IntervalBox) {
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let scope = Scope::with_unknowns(names.clone());
    let pick = |r: &mut ChaCha8Rng| names[r.random_range(0..n)].clone();
    let mut cs = Vec::new();
    for k in 0..m {
        let (a, b, c) = (pick(r), pick(r), pick(r));
        let v = r.random_range(-2.0..3.0f64);
        let body = match r.random_range(0..7) {
            0 => format!("{a} * {b} + {c} < {v}"),
            1 => format!("{a}^2 + {b}^2 <= {}", v.abs() + 0.5),
            2 => format!("{a} - 2 * {b} > {v}"),
            3 => format!("abs({a}) + {b} >= {v}"),
            4 => format!("min({a}, {b}) > {}", v / 2.0),
            5 => format!("max({a}, {b}) * {c} < {v}"),
            _ => format!("{a} / ({b}^2 + 1) > {}", v / 4.0),
        };
        cs.push(scope.parse_constraint(&format!("c{k}: {body}")).expect("generated constraint parses"));
    }
    let b = IntervalBox::from_pairs(names.iter().map(|nm| (nm.clone(), Interval::new(-2.0, 3.0))));
    (cs, b)
}

fn satisfies_all(cs: &[Constraint], x: &[f64]) -> bool {
    let env = SliceEnv { unknowns: x, states: &[] };
    cs.iter().all(|c| c.check(&env).is_ok_and(|k| k.satisfied))
}

fn contraction_soundness() -> Outcome {
    let mut r = rng(2);
    let (mut inside, mut escaped, mut shrunk) = (0, 0, 0);
    for _ in 0..20 {
        let n = r.random_range(2..=6);
        let m = r.random_range(2..=5);
        let (cs, b) = random_system(&mut r, n, m);
        let out = propagate_fixpoint(&cs, &b, DEFAULT_TOL);
        shrunk += (out.volume() < b.volume()) as usize;
        for _ in 0..1000 {
            let x: Vec<f64> = b.dims().iter().map(|d| r.random_range(d.lo()..=d.hi())).collect();
            if satisfies_all(&cs, &x) {
                inside += 1;
                if !out.contains_point(&x) {
                    escaped += 1;
                }
            }
        }
    }
    outcome(
        escaped == 0 && inside > 0,
        format!("20 systems, {shrunk} contracted, {inside} satisfying points, {escaped} outside the contracted box"),
    )
}

// ---------------------------------------------------------------- 3

fn paving_gain() -> Outcome {
    let s = Scope::with_unknowns(["x1", "x2"]);
    let cs = vec![s.parse_constraint("band: abs(x1 - x2) < 0.01").unwrap()];
    let b = IntervalBox::from_pairs([("x1", Interval::new(0.0, 1.0)), ("x2", Interval::new(0.0, 1.0))]);
    let single = propagate_fixpoint(&cs, &b, DEFAULT_TOL).volume();
    let opts = PaveOptions {
        precision: 0.005,
        ..PaveOptions::default()
    };
    let paving = pave(&cs, &b, &opts);
    let area = paving.union.volume();
    let mut r = rng(3);
    let mut lost = 0;
    for _ in 0..10_000 {
        let x1: f64 = r.random_range(0.0..1.0);
        let x = [x1, (x1 + r.random_range(-0.01..0.01f64)).clamp(0.0, 1.0)];
        if satisfies_all(&cs, &x) && !paving.union.contains_point(&x) {
            lost += 1;
        }
    }
    outcome(
        area <= 0.1 && (single - 1.0).abs() < 1e-9 && lost == 0 && !paving.truncated(),
        format!(
            "paving area {area:.4} in {} boxes, single-box area {single:.6}, {lost} band points lost",
            paving.union.len()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn oracle_sets(cs: &[Constraint], b: &IntervalBox, tol: f64) -> Vec<Vec<String>> {
    let n = cs.len();
    for k in 0..=n {
        let mut found = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let rest: Vec<Constraint> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| cs[i].clone()).collect();
            let out = propagate_fixpoint(&rest, b, tol);
            if !out.dims().iter().any(|d| d.is_empty()) {
                let mut ids: Vec<String> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| cs[i].id.clone()).collect();
                ids.sort();
                found.push(ids);
            }
        }
        if !found.is_empty() {
            if k == 0 {
                return Vec::new();
            }
            found.sort();
            return found;
        }
    }
    Vec::new()
}

fn conflict_minimality() -> Outcome {
    let mut r = rng(4);
    let names = ["x", "y", "z"];
    let scope = Scope::with_unknowns(names);
    let b = IntervalBox::from_pairs(names.map(|n| (n, Interval::new(0.0, 10.0))));
    let (mut mismatches, mut inconsistent) = (0, 0);
    for _ in 0..50 {
        let m = r.random_range(3..=10);
        let cs: Vec<Constraint> = (0..m)
            .map(|k| {
                let a = names[r.random_range(0..3)];
                let c = names[r.random_range(0..3)];
                let v = r.random_range(1..10);
                let body = match r.random_range(0..5) {
                    0 => format!("{a} > {v}"),
                    1 => format!("{a} < {v}"),
                    2 => format!("{a} + {c} < {v}"),
                    3 => format!("{a} - {c} > {}", v - 5),
                    _ => format!("{a} * {c} > {}", v * 8),
                };
                scope.parse_constraint(&format!("c{k}: {body}")).unwrap()
            })
            .collect();
        let opts = ExplainOptions {
            max_sets: 1 << 12,
            ..ExplainOptions::default()
        };
        let report = min_conflict_sets(&cs, &b, &opts);
        let mut got: Vec<Vec<String>> = report
            .minimal_sets
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort();
                s
            })
            .collect();
        got.sort();
        let want = oracle_sets(&cs, &b, opts.tol);
        inconsistent += !want.is_empty() as usize;
        if got != want || report.truncated {
            mismatches += 1;
            eprintln!("conflict sets differ: got {got:?}, oracle {want:?}");
        }
    }
    outcome(
        mismatches == 0 && inconsistent >= 10,
        format!("50 systems ({inconsistent} inconsistent), {mismatches} differ from the exhaustive oracle"),
    )
}

// ---------------------------------------------------------------- 5

fn redundant_bounds() -> Outcome {
    let m = builtin_iron_model();
    let tfr1_turnover = m.constraint("tfr1_turnover").expect("tfr1_turnover present").clone();
    let derived = add_redundant(&[tfr1_turnover], &m.domain_box());
    let shown: Vec<String> = derived.iter().map(|c| c.display(&m).to_string()).collect();
    let want = [
        "tfr1_turnover.rule.1: t_TfR1 * TfR1_b_eq < 5.5e-13 @redundant",
        "tfr1_turnover.rule.2: t_TfR1 * TfR1_f_eq < 5.5e-13 @redundant",
    ];
    let mut sorted_terms: Vec<String> = shown.iter().map(|s| s.split_once(": ").map_or(s.clone(), |x| x.1.to_string())).collect();
    sorted_terms.sort();
    let mut want_terms: Vec<String> = want.iter().map(|s| s.split_once(": ").unwrap().1.to_string()).collect();
    want_terms.sort();
    outcome(shown.len() == 2 && sorted_terms == want_terms, shown.join("; "))
}

// ---------------------------------------------------------------- 6-8

fn iron_samples(target: usize, jobs: usize, seed: u64) -> (Model, Vec<Solution>, bool) {
    let m = builtin_iron_model();
    let b = propagate_fixpoint(m.constraints(), &m.domain_box(), DEFAULT_TOL);
    let opts = SamplerOptions {
        target,
        jobs,
        seed,
        ..SamplerOptions::default()
    };
    let run = sample_steady_states(&m, &BoxUnion::single(b), &opts).expect("sampler runs");
    let exhausted = run.stats.budget_exhausted;
    (m, run.solutions, exhausted)
}

/// Worst relative ODE residual at the solution's steady state, and whether
/// every model constraint and every domain holds.
fn validate(m: &Model, s: &Solution) -> Result<f64, String> {
    let a = &s.assignment;
    let y = steady_state_vector(m, a).map_err(|e| e.to_string())?;
    let x = a.to_vec();
    let f = rhs(m, &y, a).map_err(|e| e.to_string())?;
    let env = SliceEnv { unknowns: &x, states: &y };
    let mut worst = 0.0f64;
    for (i, (fi, ode)) in f.iter().zip(m.odes()).enumerate() {
        let scale = ode.term_scale(&env).map_err(|e| e.to_string())?;
        let rel = if scale > 0.0 { fi.abs() / scale } else { fi.abs() };
        if rel > EQ_RTOL {
            return Err(format!("{}' residual {rel:e}", m.states()[i]));
        }
        worst = worst.max(rel);
    }
    for c in m.constraints() {
        let ok = c.check(a).map_err(|e| e.to_string())?.satisfied;
        if !ok {
            return Err(format!("{} violated", c.id));
        }
        if let Some(rule) = &c.implies {
            if !rule.check(a).map_err(|e| e.to_string())?.satisfied {
                return Err(format!("{} violated", rule.id));
            }
        }
    }
    for (u, v) in m.unknowns().iter().zip(&x) {
        if !u.domain.contains(*v) {
            return Err(format!("{} = {v:e} outside its domain", u.name));
        }
    }
    let get = |n: &str| a.get_by_name(n).expect("assigned");
    let total = get("Ft_f_eq") + get("Ft_b_eq");
    let expect = get("p_Ft") / get("dr_Ft");
    let rel = (total - expect).abs() / expect;
    if rel > 1e-9 {
        return Err(format!("ferritin total off by {rel:e}"));
    }
    Ok(worst)
}

fn steady_state_validity() -> Outcome {
    let (m, sols, _) = iron_samples(100, 1, 11);
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (k, s) in sols.iter().enumerate() {
        match validate(&m, s) {
            Ok(w) => worst = worst.max(w),
            Err(e) => bad.push(format!("solution {k}: {e}")),
        }
    }
    for b in bad.iter().take(5) {
        eprintln!("{b}");
    }
    for id in ["ft_ire5_ratio", "tfr1_bound_stable", "ire3_bound_stable", "tfr1_turnover"] {
        if m.constraint(id).is_none() {
            bad.push(format!("{id} missing"));
        }
    }
    outcome(
        sols.len() == 100 && bad.is_empty(),
        format!("{} solutions, {} invalid, worst relative ODE residual {worst:.1e}", sols.len(), bad.len()),
    )
}

fn throughput() -> Outcome {
    let t0 = Instant::now();
    let (m, sols, exhausted) = iron_samples(1000, 4, 7);
    let dt = t0.elapsed().as_secs_f64();
    let valid = sols.par_iter().filter(|s| validate(&m, s).is_ok()).count();
    outcome(
        valid >= 1000,
        format!(
            "{valid} valid of {} solutions in {dt:.1} s with 4 jobs{}",
            sols.len(),
            if exhausted { ", budget exhausted" } else { "" }
        ),
    )
}

fn dynamics() -> Outcome {
    let (m, sols, _) = iron_samples(100, 4, 21);
    let results: Vec<Result<(bool, bool, f64), String>> = sols
        .par_iter()
        .map(|s| {
            let r = cutoff_response(&m, &s.assignment, &SimOptions::default()).map_err(|e| e.to_string())?;
            Ok((r.stability.class == Stability::Stable, r.verdict.satisfied, r.verdict.robustness))
        })
        .collect();
    let mut stable = 0;
    let mut satisfied = 0;
    let mut errors = 0;
    for (k, r) in results.iter().enumerate() {
        match r {
            Ok((true, sat, rho)) => {
                stable += 1;
                if *sat {
                    satisfied += 1;
                } else {
                    eprintln!("solution {k}: cut-off spec violated, robustness {rho:e}");
                }
            }
            Ok((false, ..)) => eprintln!("solution {k}: steady state not stable"),
            Err(e) => {
                errors += 1;
                eprintln!("solution {k}: {e}");
            }
        }
    }
    let frac = if stable > 0 { satisfied as f64 / stable as f64 } else { 0.0 };
    outcome(
        sols.len() == 100 && stable > 0 && frac >= 0.9,
        format!(
            "{satisfied} of {stable} stable solutions satisfy the cut-off spec ({:.0}%), {errors} simulation errors",
            100.0 * frac
        ),
    )
}

// ---------------------------------------------------------------- 9

/// Grid points per time unit of the boolean oracle.
const GRID: usize = 256;
const SPAN: usize = 20;
/// Largest slope of the generated signals (values in [-1, 1], unit breakpoints).
const SLOPE: f64 = 2.0;

enum Node {
    Atom { sig: usize, gt: bool, c: f64 },
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Always(usize, usize, Box<Node>),
    Eventually(usize, usize, Box<Node>),
    Until(usize, usize, Box<Node>, Box<Node>),
}

fn gen_formula(r: &mut ChaCha8Rng, depth: usize) -> (String, Node, usize) {
    let leaf = depth == 0 || r.random_bool(0.2);
    if leaf {
        let sig = r.random_range(0..2);
        let gt = r.random_bool(0.5);
        let c = (r.random_range(-0.8..0.8f64) * 100.0).round() / 100.0;
        let text = format!("{} {} {c}", ["x", "y"][sig], if gt { ">" } else { "<" });
        return (text, Node::Atom { sig, gt, c }, 0);
    }
    let window = |r: &mut ChaCha8Rng| {
        let a = r.random_range(0..=3);
        (a, a + r.random_range(0..=3))
    };
    match r.random_range(0..7) {
        0 => {
            let (t, n, d) = gen_formula(r, depth - 1);
            (format!("not ({t})"), Node::Not(Box::new(n)), d + 1)
        }
        k @ 1..=3 => {
            let (ta, na, da) = gen_formula(r, depth - 1);
            let (tb, nb, db) = gen_formula(r, depth - 1);
            let d = da.max(db) + 1;
            match k {
                1 => (format!("({ta}) and ({tb})"), Node::And(Box::new(na), Box::new(nb)), d),
                2 => (format!("({ta}) or ({tb})"), Node::Or(Box::new(na), Box::new(nb)), d),
                _ => (format!("({ta}) -> ({tb})"), Node::Implies(Box::new(na), Box::new(nb)), d),
            }
        }
        4 => {
            let (a, b) = window(r);
            let (t, n, d) = gen_formula(r, depth - 1);
            (format!("always[{a}, {b}] ({t})"), Node::Always(a, b, Box::new(n)), d + 1)
        }
        5 => {
            let (a, b) = window(r);
            let (t, n, d) = gen_formula(r, depth - 1);
            (format!("eventually[{a}, {b}] ({t})"), Node::Eventually(a, b, Box::new(n)), d + 1)
        }
        _ => {
            let (a, b) = window(r);
            let (ta, na, da) = gen_formula(r, depth - 1);
            let (tb, nb, db) = gen_formula(r, depth - 1);
            (
                format!("({ta}) until[{a}, {b}] ({tb})"),
                Node::Until(a, b, Box::new(na), Box::new(nb)),
                da.max(db) + 1,
            )
        }
    }
}

fn prefix(v: &[bool]) -> Vec<usize> {
    let mut p = vec![0; v.len() + 1];
    for (i, &b) in v.iter().enumerate() {
        p[i + 1] = p[i] + b as usize;
    }
    p
}

/// Boolean semantics sampled on the grid `k / GRID`.
fn oracle(n: &Node, sigs: &[Vec<f64>; 2]) -> Vec<bool> {
    let len = SPAN * GRID + 1;
    let count = |p: &[usize], lo: usize, hi: usize| if lo > hi || lo >= len { 0 } else { p[hi.min(len - 1) + 1] - p[lo] };
    match n {
        Node::Atom { sig, gt, c } => (0..len)
            .map(|k| {
                let t = k as f64 / GRID as f64;
                let i = (t.floor() as usize).min(SPAN - 1);
                let f = t - i as f64;
                let v = sigs[*sig][i] * (1.0 - f) + sigs[*sig][i + 1] * f;
                if *gt { v > *c } else { v < *c }
            })
            .collect(),
        Node::Not(a) => oracle(a, sigs).into_iter().map(|b| !b).collect(),
        Node::And(a, b) => oracle(a, sigs).into_iter().zip(oracle(b, sigs)).map(|(x, y)| x && y).collect(),
        Node::Or(a, b) => oracle(a, sigs).into_iter().zip(oracle(b, sigs)).map(|(x, y)| x || y).collect(),
        Node::Implies(a, b) => oracle(a, sigs).into_iter().zip(oracle(b, sigs)).map(|(x, y)| !x || y).collect(),
        Node::Eventually(a, b, g) => {
            let p = prefix(&oracle(g, sigs));
            (0..len).map(|k| count(&p, k + a * GRID, k + b * GRID) > 0).collect()
        }
        Node::Always(a, b, g) => {
            let inner = oracle(g, sigs);
            let p = prefix(&inner.iter().map(|x| !x).collect::<Vec<_>>());
            (0..len).map(|k| count(&p, k + a * GRID, k + b * GRID) == 0).collect()
        }
        Node::Until(a, b, f, g) => {
            let phi = oracle(f, sigs);
            let p = prefix(&oracle(g, sigs));
            let mut first_false = vec![len; len + 1];
            for k in (0..len).rev() {
                first_false[k] = if phi[k] { first_false[k + 1] } else { k };
            }
            (0..len)
                .map(|k| {
                    let hi = (k + b * GRID).min(first_false[k].saturating_sub(1));
                    first_false[k] > k && count(&p, k + a * GRID, hi) > 0
                })
                .collect()
        }
    }
}

fn stl_equivalence() -> Outcome {
    let mut r = rng(9);
    let (mut mismatches, mut marginal, mut sat) = (0, 0, 0);
    let names = vec!["x".to_string(), "y".to_string()];
    for _ in 0..1000 {
        let sigs: [Vec<f64>; 2] = std::array::from_fn(|_| (0..=SPAN).map(|_| r.random_range(-1.0..1.0)).collect());
        let times: Vec<f64> = (0..=SPAN).map(|t| t as f64).collect();
        let rows: Vec<Vec<f64>> = (0..=SPAN).map(|k| vec![sigs[0][k], sigs[1][k]]).collect();
        let trace = Trace::from_rows(names.clone(), times, rows).expect("valid trace");
        let (text, node, depth) = gen_formula(&mut r, 3);
        let f = StlFormula::parse(&text, &["x", "y"]).unwrap_or_else(|e| panic!("{text}: {e}"));
        let rho = match f.robustness(&trace) {
            Ok(v) => v,
            Err(e) => panic!("{text}: {e}"),
        };
        let truth = oracle(&node, &sigs)[0];
        sat += truth as usize;
        // Sampling at step h moves each temporal level by at most SLOPE * h.
        let band = (depth as f64 + 1.0) * SLOPE / GRID as f64;
        if rho.abs() <= band {
            marginal += 1;
            continue;
        }
        if (rho > 0.0) != truth {
            mismatches += 1;
            eprintln!("{text}: robustness {rho:e}, grid oracle {truth}");
        }
    }
    outcome(
        mismatches == 0,
        format!("1000 pairs ({sat} satisfied), {marginal} inside the grid band, {mismatches} sign mismatches"),
    )
}

// ---------------------------------------------------------------- 10

fn cli_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?;
    let bin = dir.join(format!("steadyscan{}", std::env::consts::EXE_SUFFIX));
    bin.is_file().then_some(bin)
}

fn inconsistency_workflow() -> Outcome {
    let (pre, _) = revision_workflow_fixture();
    let low: BTreeSet<String> = pre
        .constraints()
        .iter()
        .filter(|c| c.has_tag(steadyscan::model::TAG_LOW_RELIABILITY))
        .map(|c| c.id.clone())
        .collect();
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/pre_revision.model");
    match cli_binary() {
        Some(bin) => {
            let out_dir = std::env::temp_dir().join(format!("steadyscan-acceptance-{}", std::process::id()));
            let out = Command::new(&bin)
                .arg("pipeline")
                .arg(&fixture)
                .args(["--seed", "1", "--out-dir"])
                .arg(&out_dir)
                .output()
                .expect("cli runs");
            let stdout = String::from_utf8_lossy(&out.stdout);
            let report = std::fs::read_to_string(out_dir.join("conflicts.json")).unwrap_or_default();
            let _ = std::fs::remove_dir_all(&out_dir);
            let code = out.status.code();
            let mentioned: Vec<&String> = low.iter().filter(|id| stdout.contains(id.as_str()) && report.contains(id.as_str())).collect();
            outcome(
                code == Some(3) && !mentioned.is_empty(),
                format!("`steadyscan pipeline` exit {code:?}, conflict report names {mentioned:?}"),
            )
        }
        None => {
            // The binary is built by `cargo test --workspace`; replay the same
            // composition through the library when it is missing.
            let b = propagate_fixpoint(pre.constraints(), &pre.domain_box(), DEFAULT_TOL);
            let empty = b.dims().iter().any(|d| d.is_empty());
            let report = min_conflict_sets(pre.constraints(), &pre.domain_box(), &ExplainOptions::default());
            let hit = low.iter().any(|id| report.mentions(id));
            outcome(
                empty && hit,
                format!("cli binary not built; library replay: contraction empty = {empty}, report {:?}", report.minimal_sets),
            )
        }
    }
}
