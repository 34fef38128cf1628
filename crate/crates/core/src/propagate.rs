//! Constraint contraction: HC4-revise, fixpoint propagation and
//! branch-and-contract paving into a union of boxes.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::expr::{BinaryOp, Expr, UnaryOp, VarRef};
use crate::interval::{BoxUnion, Interval, IntervalBox};
use crate::model::{Constraint, Relation};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_BOXES: usize = 4096;
pub const DEFAULT_PRECISION: f64 = 1e-2;

/// Hard cap on revise calls per fixpoint, as a multiple of the constraint count.
const REVISE_BUDGET_FACTOR: usize = 2000;

#[derive(Clone, Debug)]
enum Node {
    Const(Interval),
    Var(usize),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
    Sig(usize, usize, usize),
}

/// A constraint compiled to a post-order tape.
#[derive(Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    lhs: usize,
    rhs: usize,
    relation: Relation,
    vars: Vec<usize>,
}

fn compile(e: &Expr, nodes: &mut Vec<Node>) -> usize {
    let node = match e {
        Expr::Const(c) => Node::Const(Interval::point(*c)),
        // States never reach the contractor; models reject them in constraints.
        Expr::Var(VarRef::Unknown(i)) => Node::Var(*i),
        Expr::Var(VarRef::State(_)) => Node::Const(Interval::ENTIRE),
        Expr::Unary(op, a) => {
            let a = compile(a, nodes);
            Node::Unary(*op, a)
        }
        Expr::Binary(op, a, b) => {
            let a = compile(a, nodes);
            let b = compile(b, nodes);
            Node::Binary(*op, a, b)
        }
        Expr::SigPlus {
            arg,
            threshold,
            slope,
        } => {
            let a = compile(arg, nodes);
            let t = compile(threshold, nodes);
            let s = compile(slope, nodes);
            Node::Sig(a, t, s)
        }
    };
    nodes.push(node);
    nodes.len() - 1
}

/// `num / den` for backward projection: no information when both contain zero.
fn div_rel(num: &Interval, den: &Interval) -> Interval {
    if num.contains_zero() && den.contains_zero() {
        Interval::ENTIRE
    } else {
        num.div(den)
    }
}

fn widen(lo: f64, hi: f64, rel: f64) -> Interval {
    let lo = if lo.is_finite() { lo - rel * lo.abs() } else { lo };
    let hi = if hi.is_finite() { hi + rel * hi.abs() } else { hi };
    Interval::inflated(lo, hi)
}

/// Values of `x` with `x^n` in `z`, for an integer `n != 0`.
fn inverse_powi(z: &Interval, n: i32) -> Interval {
    let z = if n < 0 { div_rel(&Interval::point(1.0), z) } else { *z };
    let m = n.unsigned_abs() as f64;
    if n % 2 == 0 {
        let r = z.root(m);
        if r.is_empty() {
            return Interval::EMPTY;
        }
        // x in [-r.hi, -r.lo] or [r.lo, r.hi]; the caller intersects each branch.
        Interval::new(-r.hi(), r.hi())
    } else {
        let f = |v: f64| v.signum() * v.abs().powf(1.0 / m);
        Interval::inflated(f(z.lo()), f(z.hi()))
    }
}

/// Inverse Hill function: the `x > 0` with `sig(x, theta, n) = s`.
fn sig_inverse(s: f64, theta: f64, n: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        f64::INFINITY
    } else {
        theta * (s / (1.0 - s)).powf(1.0 / n)
    }
}

impl Tape {
    pub fn new(c: &Constraint) -> Tape {
        let mut nodes = Vec::new();
        let lhs = compile(&c.lhs, &mut nodes);
        let rhs = compile(&c.rhs, &mut nodes);
        let mut vars: Vec<usize> = nodes
            .iter()
            .filter_map(|n| if let Node::Var(i) = n { Some(*i) } else { None })
            .collect();
        vars.sort_unstable();
        vars.dedup();
        Tape {
            nodes,
            lhs,
            rhs,
            relation: c.relation,
            vars,
        }
    }

    /// Unknown indices the constraint mentions.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    fn forward(&self, dims: &[Interval], val: &mut Vec<Interval>) {
        val.clear();
        for n in &self.nodes {
            let v = match n {
                Node::Const(c) => *c,
                Node::Var(i) => dims[*i],
                Node::Unary(UnaryOp::Neg, a) => val[*a].neg(),
                Node::Unary(UnaryOp::Abs, a) => val[*a].abs(),
                Node::Binary(op, a, b) => {
                    let (x, y) = (val[*a], val[*b]);
                    match op {
                        BinaryOp::Add => x.add(&y),
                        BinaryOp::Sub => x.sub(&y),
                        BinaryOp::Mul => x.mul(&y),
                        BinaryOp::Div => x.div(&y),
                        BinaryOp::Min => x.min(&y),
                        BinaryOp::Max => x.max(&y),
                        BinaryOp::Pow => match y.as_integer() {
                            Some(k) => x.powi(k),
                            None => x.intersect(&Interval::NONNEG).pow(&y).unwrap_or(Interval::ENTIRE),
                        },
                    }
                }
                Node::Sig(a, t, s) => val[*a].sig_plus(&val[*t], &val[*s]),
            };
            val.push(v);
        }
    }

    /// Interval value of `lhs` and `rhs` over the box.
    pub fn eval(&self, dims: &[Interval]) -> (Interval, Interval) {
        let mut val = Vec::with_capacity(self.nodes.len());
        self.forward(dims, &mut val);
        (val[self.lhs], val[self.rhs])
    }

    /// True when every point of the box satisfies the constraint.
    pub fn entailed(&self, dims: &[Interval]) -> bool {
        let (l, r) = self.eval(dims);
        if l.is_empty() || r.is_empty() {
            return false;
        }
        match self.relation {
            Relation::Eq => l.is_point() && r.is_point() && l.lo() == r.lo(),
            Relation::Lt | Relation::Le => l.hi() < r.lo(),
            Relation::Gt | Relation::Ge => l.lo() > r.hi(),
            Relation::In(range) => l.is_subset(&range),
        }
    }

    /// HC4-revise in place; returns false when the box is proven empty.
    pub fn revise(&self, dims: &mut [Interval]) -> bool {
        let mut val = Vec::with_capacity(self.nodes.len());
        self.forward(dims, &mut val);
        let (l, r) = (val[self.lhs], val[self.rhs]);
        if l.is_empty() || r.is_empty() {
            return false;
        }
        let below = |hi: f64| Interval::new(f64::NEG_INFINITY, hi);
        let above = |lo: f64| Interval::new(lo, f64::INFINITY);
        let (nl, nr) = match self.relation {
            Relation::Eq => {
                let i = l.intersect(&r);
                (i, i)
            }
            Relation::Lt | Relation::Le => {
                if self.relation == Relation::Lt && l.lo() >= r.hi() {
                    return false;
                }
                (l.intersect(&below(r.hi())), r.intersect(&above(l.lo())))
            }
            Relation::Gt | Relation::Ge => {
                if self.relation == Relation::Gt && l.hi() <= r.lo() {
                    return false;
                }
                (l.intersect(&above(r.lo())), r.intersect(&below(l.hi())))
            }
            Relation::In(range) => (l.intersect(&range), r),
        };
        if nl.is_empty() || nr.is_empty() {
            return false;
        }
        val[self.lhs] = nl;
        val[self.rhs] = val[self.rhs].intersect(&nr);
        self.backward(&mut val, dims)
    }

    fn backward(&self, val: &mut [Interval], dims: &mut [Interval]) -> bool {
        for k in (0..self.nodes.len()).rev() {
            let z = val[k];
            if z.is_empty() {
                return false;
            }
            match &self.nodes[k] {
                Node::Const(_) => {}
                Node::Var(i) => {
                    let d = dims[*i].intersect(&z);
                    if d.is_empty() {
                        return false;
                    }
                    dims[*i] = d;
                }
                Node::Unary(UnaryOp::Neg, a) => val[*a] = val[*a].intersect(&z.neg()),
                Node::Unary(UnaryOp::Abs, a) => {
                    let x = val[*a];
                    let pos = x.intersect(&Interval::new(z.lo(), z.hi()));
                    let neg = x.intersect(&Interval::new(-z.hi(), -z.lo()));
                    val[*a] = pos.hull(&neg);
                }
                Node::Binary(op, a, b) => {
                    let (x, y) = (val[*a], val[*b]);
                    let (nx, ny) = match op {
                        BinaryOp::Add => (x.intersect(&z.sub(&y)), y.intersect(&z.sub(&x))),
                        BinaryOp::Sub => (x.intersect(&z.add(&y)), y.intersect(&x.sub(&z))),
                        BinaryOp::Mul => {
                            let nx = x.intersect(&div_rel(&z, &y));
                            (nx, y.intersect(&div_rel(&z, &nx)))
                        }
                        BinaryOp::Div => {
                            let nx = x.intersect(&z.mul(&y));
                            (nx, y.intersect(&div_rel(&nx, &z)))
                        }
                        BinaryOp::Min => {
                            let mut nx = x.intersect(&Interval::new(z.lo(), f64::INFINITY));
                            let mut ny = y.intersect(&Interval::new(z.lo(), f64::INFINITY));
                            if y.lo() > z.hi() {
                                nx = nx.intersect(&z);
                            }
                            if x.lo() > z.hi() {
                                ny = ny.intersect(&z);
                            }
                            (nx, ny)
                        }
                        BinaryOp::Max => {
                            let mut nx = x.intersect(&Interval::new(f64::NEG_INFINITY, z.hi()));
                            let mut ny = y.intersect(&Interval::new(f64::NEG_INFINITY, z.hi()));
                            if y.hi() < z.lo() {
                                nx = nx.intersect(&z);
                            }
                            if x.hi() < z.lo() {
                                ny = ny.intersect(&z);
                            }
                            (nx, ny)
                        }
                        BinaryOp::Pow => (project_pow(x, y, z), y),
                    };
                    val[*a] = nx;
                    val[*b] = ny;
                }
                Node::Sig(a, t, s) => {
                    val[*a] = project_sig(val[*a], val[*t], val[*s], z);
                }
            }
        }
        true
    }
}

fn project_pow(x: Interval, y: Interval, z: Interval) -> Interval {
    match y.as_integer() {
        Some(0) => x,
        Some(n) => {
            let r = inverse_powi(&z, n);
            if n % 2 == 0 && !r.is_empty() {
                let inner = if n > 0 {
                    z.intersect(&Interval::NONNEG).root(n as f64).lo()
                } else {
                    div_rel(&Interval::point(1.0), &z)
                        .intersect(&Interval::NONNEG)
                        .root(-n as f64)
                        .lo()
                };
                let pos = x.intersect(&Interval::new(inner, r.hi()));
                let neg = x.intersect(&Interval::new(r.lo(), -inner));
                pos.hull(&neg)
            } else {
                x.intersect(&r)
            }
        }
        None => {
            let x = x.intersect(&Interval::NONNEG);
            if y.is_point() && y.lo() != 0.0 && !x.is_empty() {
                let z = z.intersect(&Interval::NONNEG);
                if z.is_empty() {
                    return Interval::EMPTY;
                }
                let e = 1.0 / y.lo();
                let (a, b) = (z.lo().powf(e), z.hi().powf(e));
                x.intersect(&widen(a.min(b), a.max(b), 1e-12))
            } else {
                x
            }
        }
    }
}

fn project_sig(x: Interval, theta: Interval, slope: Interval, z: Interval) -> Interval {
    let z = z.intersect(&Interval::new(0.0, 1.0));
    if z.is_empty() {
        return Interval::EMPTY;
    }
    if theta.lo() <= 0.0 || slope.lo() <= 0.0 || !theta.is_bounded() || !slope.is_bounded() {
        return if z.lo() > 0.0 { x.intersect(&Interval::NONNEG) } else { x };
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    // Relative slack covering the rounding of s / (1 - s) near saturation.
    let slack = |s: f64| 1e-12 + 8.0 * f64::EPSILON / (1.0 - s).max(f64::MIN_POSITIVE);
    if z.lo() > 0.0 {
        let v = [slope.lo(), slope.hi()]
            .iter()
            .map(|&n| sig_inverse(z.lo(), theta.lo(), n))
            .fold(f64::INFINITY, f64::min);
        lo = (v * (1.0 - slack(z.lo()))).max(0.0);
    }
    if z.hi() < 1.0 {
        let v = [slope.lo(), slope.hi()]
            .iter()
            .map(|&n| sig_inverse(z.hi(), theta.hi(), n))
            .fold(f64::NEG_INFINITY, f64::max);
        hi = v * (1.0 + slack(z.hi()));
        if z.hi() <= 0.0 {
            hi = 0.0;
        }
    }
    x.intersect(&Interval::inflated(lo, hi))
}

/// Per-constraint revise counters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReviseStats {
    pub checked: Vec<u64>,
    pub violated: Vec<u64>,
}

impl ReviseStats {
    pub fn new(n: usize) -> ReviseStats {
        ReviseStats {
            checked: vec![0; n],
            violated: vec![0; n],
        }
    }
}

/// A compiled constraint set over a fixed unknown list.
#[derive(Clone, Debug)]
pub struct Propagator {
    tapes: Vec<Tape>,
    by_dim: Vec<Vec<usize>>,
}

fn shrunk(old: &Interval, new: &Interval, tol: f64) -> bool {
    let (wo, wn) = (old.width(), new.width());
    if wo == wn {
        return false;
    }
    if wo.is_infinite() {
        return true;
    }
    wo - wn > tol * wo
}

impl Propagator {
    pub fn new(cs: &[Constraint], n_dims: usize) -> Propagator {
        let tapes: Vec<Tape> = cs.iter().map(Tape::new).collect();
        let mut by_dim = vec![Vec::new(); n_dims];
        for (k, t) in tapes.iter().enumerate() {
            for &v in &t.vars {
                if v < n_dims {
                    by_dim[v].push(k);
                }
            }
        }
        Propagator { tapes, by_dim }
    }

    pub fn tapes(&self) -> &[Tape] {
        &self.tapes
    }

    pub fn len(&self) -> usize {
        self.tapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tapes.is_empty()
    }

    /// Runs the AC-3 style queue to a fixpoint over the active constraints;
    /// returns false when the box is proven empty.
    pub fn fixpoint(
        &self,
        dims: &mut [Interval],
        tol: f64,
        active: Option<&[bool]>,
        mut stats: Option<&mut ReviseStats>,
    ) -> bool {
        if dims.iter().any(Interval::is_empty) {
            return false;
        }
        let n = self.tapes.len();
        let on = |k: usize| active.is_none_or(|a| a[k]);
        let mut queue: VecDeque<usize> = (0..n).filter(|&k| on(k)).collect();
        let mut queued = vec![false; n];
        for &k in &queue {
            queued[k] = true;
        }
        let mut budget = REVISE_BUDGET_FACTOR * n.max(1);
        let mut before = Vec::new();
        while let Some(k) = queue.pop_front() {
            queued[k] = false;
            if budget == 0 {
                break;
            }
            budget -= 1;
            let tape = &self.tapes[k];
            before.clear();
            before.extend(tape.vars.iter().map(|&v| dims[v]));
            let ok = tape.revise(dims);
            if let Some(s) = stats.as_deref_mut() {
                s.checked[k] += 1;
                if !ok {
                    s.violated[k] += 1;
                }
            }
            if !ok {
                for d in dims.iter_mut() {
                    *d = Interval::EMPTY;
                }
                return false;
            }
            for (j, &v) in tape.vars.iter().enumerate() {
                if shrunk(&before[j], &dims[v], tol) {
                    for &c in &self.by_dim[v] {
                        if c != k && !queued[c] && on(c) {
                            queued[c] = true;
                            queue.push_back(c);
                        }
                    }
                }
            }
        }
        true
    }

    pub fn entailed(&self, dims: &[Interval]) -> bool {
        self.tapes.iter().all(|t| t.entailed(dims))
    }
}

/// Contracts `b` by one constraint.
pub fn revise(c: &Constraint, b: &IntervalBox) -> IntervalBox {
    let mut out = b.clone();
    if !Tape::new(c).revise(out.dims_mut()) {
        out.dims_mut().fill(Interval::EMPTY);
    }
    out
}

/// Contracts `b` by all constraints until no dimension shrinks by more than `tol` (relative).
pub fn propagate_fixpoint(cs: &[Constraint], b: &IntervalBox, tol: f64) -> IntervalBox {
    let p = Propagator::new(cs, b.len());
    let mut out = b.clone();
    p.fixpoint(out.dims_mut(), tol, None, None);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PaveOptions {
    /// Boxes whose every dimension is at most `precision` times its initial width are not split.
    pub precision: f64,
    pub max_boxes: usize,
    pub tol: f64,
    /// Worker threads; 1 processes branches sequentially.
    pub jobs: usize,
}

impl Default for PaveOptions {
    fn default() -> Self {
        PaveOptions {
            precision: DEFAULT_PRECISION,
            max_boxes: DEFAULT_MAX_BOXES,
            tol: DEFAULT_TOL,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Paving {
    pub union: BoxUnion,
    /// `unsplit[k]` marks boxes left unfinished because `max_boxes` was reached.
    pub unsplit: Vec<bool>,
}

impl Paving {
    pub fn unsplit_count(&self) -> usize {
        self.unsplit.iter().filter(|&&u| u).count()
    }

    pub fn truncated(&self) -> bool {
        self.unsplit.iter().any(|&u| u)
    }
}

enum Step {
    Done(IntervalBox),
    Split(Vec<IntervalBox>),
}

fn split_dim(b: &IntervalBox, init: &[f64], precision: f64) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, d) in b.dims().iter().enumerate() {
        let w = d.width();
        let frac = if init[i] > 0.0 && init[i].is_finite() { w / init[i] } else { w };
        if !(frac > precision) || d.mid() <= d.lo() || d.mid() >= d.hi() {
            continue;
        }
        let rel = d.relative_width();
        let better = match best {
            None => true,
            Some((_, r, f)) => rel > r || (rel == r && frac > f),
        };
        if better {
            best = Some((i, rel, frac));
        }
    }
    best.map(|x| x.0)
}

/// Branch-and-contract: splits and contracts until boxes reach `precision` or
/// every constraint holds throughout a box. Deterministic for any `jobs`.
pub fn pave(cs: &[Constraint], b: &IntervalBox, opts: &PaveOptions) -> Paving {
    let prop = Propagator::new(cs, b.len());
    let init: Vec<f64> = b.widths();
    let names: Arc<[String]> = b.names().clone();
    let empty = || Paving {
        union: BoxUnion::new(Vec::new()).expect("empty union"),
        unsplit: Vec::new(),
    };
    let mut root = b.clone();
    if !prop.fixpoint(root.dims_mut(), opts.tol, None, None) {
        return empty();
    }
    let process = |bx: &IntervalBox| -> Step {
        if prop.entailed(bx.dims()) {
            return Step::Done(bx.clone());
        }
        let Some(d) = split_dim(bx, &init, opts.precision) else {
            return Step::Done(bx.clone());
        };
        let (l, r) = bx.split(Some(d));
        let mut kids = Vec::with_capacity(2);
        for mut k in [l, r] {
            if prop.fixpoint(k.dims_mut(), opts.tol, None, None) {
                kids.push(k);
            }
        }
        Step::Split(kids)
    };
    let pool = (opts.jobs > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().ok())
        .flatten();

    let mut done: Vec<IntervalBox> = Vec::new();
    let mut frontier = vec![root];
    let mut unsplit: Vec<IntervalBox> = Vec::new();
    while !frontier.is_empty() {
        let budget = opts.max_boxes.saturating_sub(done.len() + frontier.len());
        let take = budget.min(frontier.len());
        let rest = frontier.split_off(take);
        let steps: Vec<Step> = match &pool {
            Some(p) => p.install(|| frontier.par_iter().map(process).collect()),
            None => frontier.iter().map(process).collect(),
        };
        let mut next = Vec::new();
        for s in steps {
            match s {
                Step::Done(b) => done.push(b),
                Step::Split(k) => next.extend(k),
            }
        }
        if !rest.is_empty() {
            // Out of budget: the rest stay as they are.
            unsplit.extend(rest);
            unsplit.extend(next);
            break;
        }
        frontier = next;
    }
    let mut flags = vec![false; done.len()];
    flags.extend(std::iter::repeat_n(true, unsplit.len()));
    done.extend(unsplit);
    debug_assert!(done.iter().all(|b| b.names() == &names));
    Paving {
        union: BoxUnion::new(done).expect("boxes share the unknown list"),
        unsplit: flags,
    }
}

fn json_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "\"inf\"".into()
    } else if x == f64::NEG_INFINITY {
        "\"-inf\"".into()
    } else {
        serde_json::to_string(&x).expect("finite float")
    }
}

/// One box as a JSON object `{"name": [lo, hi], ...}` in declaration order;
/// infinite bounds are written as the strings "inf" and "-inf".
pub fn box_to_json(b: &IntervalBox) -> String {
    let fields: Vec<String> = b
        .names()
        .iter()
        .zip(b.dims())
        .map(|(n, d)| {
            format!(
                "{}: [{}, {}]",
                serde_json::to_string(n).expect("string"),
                json_bound(d.lo()),
                json_bound(d.hi())
            )
        })
        .collect();
    format!("{{{}}}", fields.join(", "))
}

pub fn write_union_jsonl<W: Write>(u: &BoxUnion, mut w: W) -> std::io::Result<()> {
    for b in u.boxes() {
        writeln!(w, "{}", box_to_json(b))?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum UnionReadError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_bound(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) if s == "inf" => Some(f64::INFINITY),
        serde_json::Value::String(s) if s == "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

/// Reads boxes over `names`; every record must give every name.
pub fn read_union_jsonl<R: BufRead>(r: R, names: &Arc<[String]>) -> Result<BoxUnion, UnionReadError> {
    let mut boxes = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| UnionReadError::Format { line: k + 1, msg };
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| err("expected an object".into()))?;
        let mut dims = Vec::with_capacity(names.len());
        for n in names.iter() {
            let pair = obj
                .get(n)
                .and_then(|p| p.as_array())
                .filter(|a| a.len() == 2)
                .ok_or_else(|| err(format!("missing [lo, hi] for `{n}`")))?;
            let lo = parse_bound(&pair[0]).ok_or_else(|| err(format!("bad bound for `{n}`")))?;
            let hi = parse_bound(&pair[1]).ok_or_else(|| err(format!("bad bound for `{n}`")))?;
            dims.push(Interval::new(lo, hi));
        }
        if obj.len() != names.len() {
            return Err(err("unexpected unknown in record".into()));
        }
        boxes.push(IntervalBox::new(names.clone(), dims));
    }
    BoxUnion::new(boxes).map_err(|e| UnionReadError::Format {
        line: 0,
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scope;

    fn setup(names: &[&str], cons: &[&str]) -> (Vec<Constraint>, Scope) {
        let s = Scope::with_unknowns(names.iter().copied());
        let cs = cons.iter().map(|c| s.parse_constraint(c).unwrap()).collect();
        (cs, s)
    }

    fn bx(pairs: &[(&str, f64, f64)]) -> IntervalBox {
        IntervalBox::from_pairs(pairs.iter().map(|(n, a, b)| (*n, Interval::new(*a, *b))))
    }

    fn close(i: Interval, lo: f64, hi: f64) -> bool {
        (i.lo() - lo).abs() <= 1e-9 * lo.abs().max(1e-300) + 1e-300 && (i.hi() - hi).abs() <= 1e-9 * hi.abs().max(1e-300)
    }

    #[test]
    fn revise_sum() {
        let (cs, _) = setup(&["x", "y"], &["c: x + y = 5"]);
        let out = revise(&cs[0], &bx(&[("x", 0.0, 10.0), ("y", 0.0, 2.0)]));
        assert!(close(out.dims()[0], 3.0, 5.0), "{out}");
        assert!(close(out.dims()[1], 0.0, 2.0), "{out}");
    }

    #[test]
    fn revise_order() {
        let (cs, _) = setup(&["drs", "dr"], &["c: drs < dr"]);
        let out = revise(&cs[0], &bx(&[("drs", 1e-6, 1e-4), ("dr", 1e-6, 1e-5)]));
        assert!(close(out.dims()[0], 1e-6, 1e-5), "{out}");
    }

    #[test]
    fn revise_square_negative() {
        let (cs, _) = setup(&["x"], &["c: x^2 = -1"]);
        assert!(revise(&cs[0], &bx(&[("x", 0.5, 3.0)])).is_empty());
        let (cs, _) = setup(&["x"], &["c: x^2 = 4"]);
        let out = revise(&cs[0], &bx(&[("x", -10.0, 10.0)]));
        assert!(close(out.dims()[0], -2.0, 2.0), "{out}");
        let out = revise(&cs[0], &bx(&[("x", 0.0, 10.0)]));
        assert!(close(out.dims()[0], 2.0, 2.0), "{out}");
    }

    #[test]
    fn sig_projection_inverts() {
        let (cs, _) = setup(&["x"], &["c: sig(x, 2, 4) in [0.5, 0.9]"]);
        let out = revise(&cs[0], &bx(&[("x", 0.0, 100.0)]));
        let hi = 2.0 * 9f64.powf(0.25);
        assert!(close(out.dims()[0], 2.0, hi), "{out}");
    }

    #[test]
    fn chain_fixpoint() {
        let (cs, _) = setup(&["x", "y", "z"], &["a: x = y", "b: y = z", "c: z in [1, 2]"]);
        let out = propagate_fixpoint(&cs, &bx(&[("x", 0.0, 10.0), ("y", 0.0, 10.0), ("z", 0.0, 10.0)]), 1e-3);
        for d in out.dims() {
            assert!(close(*d, 1.0, 2.0), "{out}");
        }
    }

    #[test]
    fn eps_band_fixpoint_and_paving() {
        let (cs, _) = setup(&["x1", "x2"], &["c: abs(x1 - x2) < 0.01"]);
        let b = bx(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0)]);
        let out = propagate_fixpoint(&cs, &b, 1e-3);
        assert!((out.volume() - 1.0).abs() < 1e-9);
        let opts = PaveOptions {
            precision: 0.005,
            ..PaveOptions::default()
        };
        let p = pave(&cs, &b, &opts);
        assert!(!p.truncated());
        assert!(p.union.volume() < 0.1, "{}", p.union.volume());
        let par = pave(&cs, &b, &PaveOptions { jobs: 3, ..opts });
        assert_eq!(par.union, p.union);
    }

    #[test]
    fn contradiction_is_empty() {
        let (cs, _) = setup(&["drs", "dr"], &["c: drs < dr"]);
        let out = propagate_fixpoint(&cs, &bx(&[("drs", 2e-5, 3e-5), ("dr", 1e-6, 1e-5)]), 1e-3);
        assert!(out.is_empty());
        let p = pave(&cs, &bx(&[("drs", 2e-5, 3e-5), ("dr", 1e-6, 1e-5)]), &PaveOptions::default());
        assert!(p.union.is_empty());
    }

    #[test]
    fn single_satisfied_constraint_gives_one_box() {
        let (cs, _) = setup(&["x", "y"], &["c: x + y <= 10"]);
        let p = pave(&cs, &bx(&[("x", 0.0, 5.0), ("y", 0.0, 4.0)]), &PaveOptions::default());
        assert_eq!(p.union.len(), 1);
    }

    #[test]
    fn budget_flags_unsplit_boxes() {
        let (cs, _) = setup(&["x1", "x2"], &["c: abs(x1 - x2) < 0.01"]);
        let b = bx(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0)]);
        let p = pave(
            &cs,
            &b,
            &PaveOptions {
                precision: 0.005,
                max_boxes: 16,
                ..PaveOptions::default()
            },
        );
        assert!(p.truncated());
        assert!(p.union.len() <= 17);
    }

    #[test]
    fn jsonl_round_trip_with_infinities() {
        let b = bx(&[("x", f64::NEG_INFINITY, 1.5), ("y", 1e-13, f64::INFINITY)]);
        let u = BoxUnion::single(b.clone());
        let mut buf = Vec::new();
        write_union_jsonl(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "{\"x\": [\"-inf\", 1.5], \"y\": [1e-13, \"inf\"]}\n");
        let back = read_union_jsonl(&buf[..], b.names()).unwrap();
        assert_eq!(back, u);
    }
}
