//! Solving equalities for a single remaining unknown, and early checks.

use std::collections::BTreeMap;

use crate::expr::{BinaryOp, Env, Expr, UnaryOp, VarRef};
use crate::interval::{Interval, IntervalBox};
use crate::model::{Assignment, Constraint, Provenance};

/// A deduced value fell outside its unknown's interval.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("deduced {name} = {value:e} lies outside {interval}")]
pub struct DomainViolation {
    pub name: String,
    pub value: f64,
    pub interval: Interval,
}

/// Which node counts as "the unknown" in a linear decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Unit {
    Var(usize),
    /// `u ^ n` for an integer `n`.
    Power(usize, i32),
}

impl Unit {
    fn matches(&self, e: &Expr) -> bool {
        match (self, e) {
            (Unit::Var(u), Expr::Var(VarRef::Unknown(i))) => u == i,
            (Unit::Power(u, n), Expr::Binary(BinaryOp::Pow, b, p)) => {
                matches!(**b, Expr::Var(VarRef::Unknown(i)) if i == *u) && matches!(**p, Expr::Const(c) if c == *n as f64)
            }
            _ => false,
        }
    }

    fn var(&self) -> usize {
        match self {
            Unit::Var(u) | Unit::Power(u, _) => *u,
        }
    }
}

fn contains(e: &Expr, unit: Unit) -> bool {
    if unit.matches(e) {
        return true;
    }
    e.mentions(VarRef::Unknown(unit.var()))
}

/// Writes `e` as `coef * unit + constant` using `env` for everything else;
/// `None` when `e` is not linear in the unit or a value is missing.
fn linear_form<E: Env + ?Sized>(e: &Expr, unit: Unit, env: &E) -> Option<(f64, f64)> {
    if unit.matches(e) {
        return Some((1.0, 0.0));
    }
    if !contains(e, unit) {
        return e.eval(env).ok().map(|v| (0.0, v));
    }
    match e {
        Expr::Const(_) | Expr::Var(_) => None,
        Expr::Unary(UnaryOp::Neg, a) => linear_form(a, unit, env).map(|(c, k)| (-c, -k)),
        Expr::Unary(UnaryOp::Abs, _) => None,
        Expr::Binary(op, a, b) => {
            let (ia, ib) = (contains(a, unit), contains(b, unit));
            match op {
                BinaryOp::Add | BinaryOp::Sub => {
                    let (ca, ka) = linear_form(a, unit, env)?;
                    let (cb, kb) = linear_form(b, unit, env)?;
                    Some(if *op == BinaryOp::Add { (ca + cb, ka + kb) } else { (ca - cb, ka - kb) })
                }
                BinaryOp::Mul if !(ia && ib) => {
                    let (ca, ka) = linear_form(a, unit, env)?;
                    let (cb, kb) = linear_form(b, unit, env)?;
                    Some(if ia { (ca * kb, ka * kb) } else { (ka * cb, ka * kb) })
                }
                BinaryOp::Div if !ib => {
                    let (ca, ka) = linear_form(a, unit, env)?;
                    let d = b.eval(env).ok()?;
                    Some((ca / d, ka / d))
                }
                _ => None,
            }
        }
        Expr::SigPlus { .. } => None,
    }
}

/// Every unknown of `e` counts as present with value 1: used for structural tests.
struct Ones;

impl Env for Ones {
    fn value(&self, _: VarRef) -> Option<f64> {
        Some(1.0)
    }
}

fn powers_of(e: &Expr, u: usize, out: &mut Vec<i32>) {
    if let Expr::Binary(BinaryOp::Pow, b, p) = e {
        if let (Expr::Var(VarRef::Unknown(i)), Expr::Const(c)) = (&**b, &**p) {
            if *i == u && c.fract() == 0.0 && *c != 0.0 && c.abs() < 64.0 {
                out.push(*c as i32);
                return;
            }
        }
    }
    match e {
        Expr::Unary(_, a) => powers_of(a, u, out),
        Expr::Binary(_, a, b) => {
            powers_of(a, u, out);
            powers_of(b, u, out);
        }
        Expr::SigPlus {
            arg,
            threshold,
            slope,
        } => {
            powers_of(arg, u, out);
            powers_of(threshold, u, out);
            powers_of(slope, u, out);
        }
        _ => {}
    }
}

fn residual_form(c: &Constraint) -> Expr {
    crate::model::difference(c)
}

fn unit_for(c: &Constraint, u: usize) -> Option<Unit> {
    let g = residual_form(c);
    let unit = Unit::Var(u);
    if linear_form(&g, unit, &Ones).is_some() {
        return Some(unit);
    }
    let mut ns = Vec::new();
    powers_of(&g, u, &mut ns);
    ns.dedup();
    if ns.len() == 1 {
        let unit = Unit::Power(u, ns[0]);
        if linear_form(&g, unit, &Ones).is_some() {
            return Some(unit);
        }
    }
    None
}

/// True when the equality can be solved in closed form for unknown `u`
/// (linear, or linear in a single integer power of `u`).
pub fn solvable_for(c: &Constraint, u: usize) -> bool {
    c.is_equality() && c.unknowns().contains(&u) && unit_for(c, u).is_some()
}

/// True when `u` enters `c` linearly (not through a power).
pub fn linear_in(c: &Constraint, u: usize) -> bool {
    c.unknowns().contains(&u) && linear_form(&residual_form(c), Unit::Var(u), &Ones).is_some()
}

/// Solves equality `c` for `u` given values for every other unknown.
/// Even powers pick the root lying in `domain` (the positive one when both do).
pub fn solve_for(c: &Constraint, u: usize, env: &Assignment, domain: Interval) -> Option<f64> {
    solve_unit(&residual_form(c), unit_for(c, u)?, env, domain)
}

fn solve_unit(g: &Expr, unit: Unit, env: &Assignment, domain: Interval) -> Option<f64> {
    let (coef, k) = linear_form(g, unit, env)?;
    if coef == 0.0 || !coef.is_finite() {
        return None;
    }
    let w = -k / coef;
    let v = match unit {
        Unit::Var(_) => w,
        Unit::Power(_, n) => {
            let m = n.unsigned_abs() as f64;
            let w = if n < 0 { 1.0 / w } else { w };
            if n % 2 == 0 {
                if w < 0.0 {
                    return None;
                }
                let r = w.powf(1.0 / m);
                if domain.contains(r) || !domain.contains(-r) {
                    r
                } else {
                    -r
                }
            } else {
                w.signum() * w.abs().powf(1.0 / m)
            }
        }
    };
    v.is_finite().then_some(v)
}

/// An equality prepared for repeated solving: its residual and, for each
/// unknown it mentions, how (if at all) it can be solved for that unknown.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    pub residual: Expr,
    pub vars: Vec<usize>,
    units: Vec<Option<Unit>>,
}

impl Prepared {
    pub fn new(c: &Constraint) -> Prepared {
        let vars = c.unknowns();
        let units = vars.iter().map(|&u| unit_for(c, u)).collect();
        Prepared {
            residual: residual_form(c),
            vars,
            units,
        }
    }

    pub fn solvable_for(&self, u: usize) -> bool {
        self.vars.iter().position(|&v| v == u).is_some_and(|k| self.units[k].is_some())
    }

    pub fn solve(&self, u: usize, env: &Assignment, domain: Interval) -> Option<f64> {
        let k = self.vars.iter().position(|&v| v == u)?;
        solve_unit(&self.residual, self.units[k]?, env, domain)
    }
}

/// Unknowns of `c` not yet assigned.
pub fn unassigned_of(c: &Constraint, a: &Assignment) -> Vec<usize> {
    c.unknowns().into_iter().filter(|&i| !a.is_assigned(i)).collect()
}

/// Deduces to a fixpoint: any equality with exactly one unassigned unknown
/// that enters it linearly (or as an isolated power) is solved. Values are
/// checked against `domains` on insertion.
pub fn deduce(a: &Assignment, equalities: &[Constraint], domains: &IntervalBox) -> Result<Assignment, DomainViolation> {
    let mut out = a.clone();
    let eqs: Vec<&Constraint> = equalities.iter().filter(|c| c.is_equality()).collect();
    loop {
        let mut progress = false;
        for c in &eqs {
            let free = unassigned_of(c, &out);
            if free.len() != 1 {
                continue;
            }
            let u = free[0];
            let dom = domains.dims()[u];
            let Some(v) = solve_for(c, u, &out, dom) else { continue };
            if !dom.contains(v) {
                return Err(DomainViolation {
                    name: domains.names()[u].clone(),
                    value: v,
                    interval: dom,
                });
            }
            out.set(u, v, Provenance::Deduced);
            progress = true;
        }
        if !progress {
            return Ok(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass,
    Fail(Vec<String>),
}

/// Evaluates every constraint whose unknowns are all assigned; partially
/// assigned constraints are skipped and not counted.
pub fn early_check(
    a: &Assignment,
    cs: &[Constraint],
    stats: &mut BTreeMap<String, crate::explain::ConstraintStats>,
) -> CheckOutcome {
    let mut failed = Vec::new();
    for c in cs {
        if !c.unknowns().iter().all(|&i| a.is_assigned(i)) {
            continue;
        }
        let ok = c.check(a).map(|r| r.satisfied).unwrap_or(false);
        let s = stats.entry(c.id.clone()).or_default();
        s.checked += 1;
        if !ok {
            s.violated += 1;
            failed.push(c.id.clone());
        }
    }
    if failed.is_empty() {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail(failed)
    }
}
