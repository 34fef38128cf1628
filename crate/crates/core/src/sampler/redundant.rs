//! Implied single-term bounds from upper bounds on sums of nonnegative terms.

use crate::expr::{BinaryOp, Expr, UnaryOp};
use crate::interval::IntervalBox;
use crate::model::{Constraint, Relation, TAG_REDUNDANT};

/// Expands `e` into weighted additive terms, distributing factors that are
/// nonnegative over the box across sums they multiply.
fn expand(e: &Expr, b: &IntervalBox, w: f64, out: &mut Vec<(f64, Expr)>) {
    match e {
        Expr::Binary(BinaryOp::Add, x, y) => {
            expand(x, b, w, out);
            expand(y, b, w, out);
        }
        Expr::Binary(BinaryOp::Sub, x, y) => {
            expand(x, b, w, out);
            expand(y, b, -w, out);
        }
        Expr::Unary(UnaryOp::Neg, x) => expand(x, b, -w, out),
        Expr::Binary(BinaryOp::Mul, x, y) if is_sum(y) && nonneg(x, b) => {
            let mut inner = Vec::new();
            expand(y, b, w, &mut inner);
            out.extend(inner.into_iter().map(|(wi, t)| (wi, product(x, t))));
        }
        Expr::Binary(BinaryOp::Mul, x, y) if is_sum(x) && nonneg(y, b) => {
            let mut inner = Vec::new();
            expand(x, b, w, &mut inner);
            out.extend(inner.into_iter().map(|(wi, t)| (wi, product(&t, y.as_ref().clone()))));
        }
        Expr::Const(c) => out.push((w * c, Expr::Const(1.0))),
        _ => out.push((w, e.clone())),
    }
}

fn product(f: &Expr, t: Expr) -> Expr {
    match t {
        Expr::Const(1.0) => f.clone(),
        t => Expr::binary(BinaryOp::Mul, f.clone(), t),
    }
}

fn is_sum(e: &Expr) -> bool {
    matches!(e, Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _))
}

/// Sign reasoning first, so outward rounding of products of nonnegative
/// factors does not hide a zero lower bound.
fn nonneg(e: &Expr, b: &IntervalBox) -> bool {
    match e {
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div | BinaryOp::Add | BinaryOp::Min, x, y) => nonneg(x, b) && nonneg(y, b),
        Expr::Binary(BinaryOp::Max, x, y) => nonneg(x, b) || nonneg(y, b),
        Expr::Binary(BinaryOp::Pow, x, p) if nonneg(x, b) || matches!(**p, Expr::Const(c) if c % 2.0 == 0.0) => true,
        Expr::Unary(UnaryOp::Abs, _) | Expr::SigPlus { .. } => true,
        _ => e.eval_interval(b).is_ok_and(|i| !i.is_empty() && i.lo() >= 0.0),
    }
}

/// Upper bound `lhs < U` (or `<=`) read off a constraint, with `U` constant
/// over the box.
fn upper_bound(c: &Constraint, b: &IntervalBox) -> Option<(Expr, Relation, Expr)> {
    let constant = |e: &Expr| e.eval_interval(b).is_ok_and(|i| i.is_point() || e.vars().is_empty());
    match c.relation {
        Relation::Lt | Relation::Le if constant(&c.rhs) => Some((c.lhs.clone(), c.relation, c.rhs.clone())),
        Relation::Gt | Relation::Ge if constant(&c.lhs) => {
            let r = if c.relation == Relation::Gt { Relation::Lt } else { Relation::Le };
            Some((c.rhs.clone(), r, c.lhs.clone()))
        }
        Relation::In(r) if r.hi().is_finite() => Some((c.lhs.clone(), Relation::Le, Expr::Const(r.hi()))),
        _ => None,
    }
}

fn bounds_from(c: &Constraint, id: &str, b: &IntervalBox) -> Vec<Constraint> {
    let Some((lhs, rel, ub)) = upper_bound(c, b) else { return vec![] };
    let mut terms = Vec::new();
    expand(&lhs, b, 1.0, &mut terms);
    if terms.len() < 2 {
        return vec![];
    }
    // Dropping terms only loosens the bound when every dropped term is >= 0.
    let all_nonneg = terms.iter().all(|(w, t)| match t {
        Expr::Const(_) => *w >= 0.0,
        t => *w > 0.0 && nonneg(t, b),
    });
    if !all_nonneg {
        return vec![];
    }
    terms
        .into_iter()
        .filter(|(_, t)| !matches!(t, Expr::Const(_)))
        .enumerate()
        .map(|(k, (w, t))| {
            let lhs = if w == 1.0 { t } else { Expr::binary(BinaryOp::Mul, Expr::Const(w), t) };
            let mut out = Constraint::new(format!("{id}.{}", k + 1), lhs, rel, ub.clone()).with_tag(TAG_REDUNDANT);
            out.generated = true;
            out
        })
        .collect()
}

/// Implied bounds for the constraints in `cs`: every upper bound on a sum
/// of terms that are nonnegative over `b` yields one bound per term. Rules
/// attached with `=>` are expanded under the id `<id>.rule`.
pub fn add_redundant(cs: &[Constraint], b: &IntervalBox) -> Vec<Constraint> {
    let mut out = Vec::new();
    for c in cs.iter().filter(|c| !c.is_redundant()) {
        out.extend(bounds_from(c, &c.id, b));
        if let Some(rule) = &c.implies {
            out.extend(bounds_from(rule, &rule.id, b));
        }
    }
    out
}
