//! Arithmetic expression trees with point and interval evaluation.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::interval::{sig_plus, Interval, IntervalBox, IntervalError};

/// Reference to a model symbol: an unknown (parameter or steady-state value)
/// or a dynamic state variable. Indices point into the owning scope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Unknown(usize),
    State(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarRef),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Increasing Hill switch `sig+(arg, threshold)` with the given slope (exponent).
    SigPlus {
        arg: Box<Expr>,
        threshold: Box<Expr>,
        slope: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no value for {0:?}")]
    Missing(VarRef),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// Source of point values during evaluation.
pub trait Env {
    fn value(&self, v: VarRef) -> Option<f64>;
}

/// Source of interval values during evaluation.
pub trait IntervalEnv {
    fn interval(&self, v: VarRef) -> Option<Interval>;
}

/// Unknown values in a dense slice, states in another.
#[derive(Clone, Copy, Debug)]
pub struct SliceEnv<'a> {
    pub unknowns: &'a [f64],
    pub states: &'a [f64],
}

impl Env for SliceEnv<'_> {
    fn value(&self, v: VarRef) -> Option<f64> {
        match v {
            VarRef::Unknown(i) => self.unknowns.get(i).copied(),
            VarRef::State(i) => self.states.get(i).copied(),
        }
    }
}

impl IntervalEnv for IntervalBox {
    fn interval(&self, v: VarRef) -> Option<Interval> {
        match v {
            VarRef::Unknown(i) => self.dims().get(i).copied(),
            VarRef::State(_) => None,
        }
    }
}

impl IntervalEnv for [Interval] {
    fn interval(&self, v: VarRef) -> Option<Interval> {
        match v {
            VarRef::Unknown(i) => self.get(i).copied(),
            VarRef::State(_) => None,
        }
    }
}

/// Names for the symbols an expression refers to.
pub trait Names {
    fn name(&self, v: VarRef) -> &str;
}

impl Expr {
    pub fn unknown(i: usize) -> Expr {
        Expr::Var(VarRef::Unknown(i))
    }

    pub fn state(i: usize) -> Expr {
        Expr::Var(VarRef::State(i))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    /// Point evaluation.
    pub fn eval<E: Env + ?Sized>(&self, env: &E) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => env.value(*v).ok_or(EvalError::Missing(*v))?,
            Expr::Unary(op, a) => {
                let a = a.eval(env)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Abs => a.abs(),
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => x / y,
                    BinaryOp::Pow => {
                        if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
                            x.powi(y as i32)
                        } else {
                            x.powf(y)
                        }
                    }
                    BinaryOp::Min => x.min(y),
                    BinaryOp::Max => x.max(y),
                }
            }
            Expr::SigPlus {
                arg,
                threshold,
                slope,
            } => sig_plus(arg.eval(env)?, threshold.eval(env)?, slope.eval(env)?),
        })
    }

    /// Natural interval extension.
    pub fn eval_interval<E: IntervalEnv + ?Sized>(&self, env: &E) -> Result<Interval, EvalError> {
        Ok(match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var(v) => env.interval(*v).ok_or(EvalError::Missing(*v))?,
            Expr::Unary(op, a) => {
                let a = a.eval_interval(env)?;
                match op {
                    UnaryOp::Neg => a.neg(),
                    UnaryOp::Abs => a.abs(),
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval_interval(env)?;
                let y = b.eval_interval(env)?;
                match op {
                    BinaryOp::Add => x.add(&y),
                    BinaryOp::Sub => x.sub(&y),
                    BinaryOp::Mul => x.mul(&y),
                    BinaryOp::Div => x.div(&y),
                    BinaryOp::Pow => x.pow(&y)?,
                    BinaryOp::Min => x.min(&y),
                    BinaryOp::Max => x.max(&y),
                }
            }
            Expr::SigPlus {
                arg,
                threshold,
                slope,
            } => arg
                .eval_interval(env)?
                .sig_plus(&threshold.eval_interval(env)?, &slope.eval_interval(env)?),
        })
    }

    pub fn visit_vars(&self, f: &mut impl FnMut(VarRef)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Unary(_, a) => a.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::SigPlus {
                arg,
                threshold,
                slope,
            } => {
                arg.visit_vars(f);
                threshold.visit_vars(f);
                slope.visit_vars(f);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<VarRef> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            out.insert(v);
        });
        out
    }

    pub fn mentions(&self, v: VarRef) -> bool {
        let mut hit = false;
        self.visit_vars(&mut |w| hit |= w == v);
        hit
    }

    /// Replaces every variable by the expression `f` returns for it.
    pub fn substitute(&self, f: &impl Fn(VarRef) -> Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => f(*v),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.substitute(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::SigPlus {
                arg,
                threshold,
                slope,
            } => Expr::SigPlus {
                arg: Box::new(arg.substitute(f)),
                threshold: Box::new(threshold.substitute(f)),
                slope: Box::new(slope.substitute(f)),
            },
        }
    }

    /// Top-level additive terms with their signs: `a - (b + c)` gives
    /// `[(+1, a), (-1, b), (-1, c)]`.
    pub fn additive_terms(&self) -> Vec<(f64, &Expr)> {
        let mut out = Vec::new();
        self.collect_terms(1.0, &mut out);
        out
    }

    fn collect_terms<'a>(&'a self, sign: f64, out: &mut Vec<(f64, &'a Expr)>) {
        match self {
            Expr::Binary(BinaryOp::Add, a, b) => {
                a.collect_terms(sign, out);
                b.collect_terms(sign, out);
            }
            Expr::Binary(BinaryOp::Sub, a, b) => {
                a.collect_terms(sign, out);
                b.collect_terms(-sign, out);
            }
            Expr::Unary(UnaryOp::Neg, a) => a.collect_terms(-sign, out),
            e => out.push((sign, e)),
        }
    }

    /// Largest absolute value of an additive term at a point; the scale
    /// against which a residual of this expression is judged.
    pub fn term_scale<E: Env + ?Sized>(&self, env: &E) -> Result<f64, EvalError> {
        let mut scale = 0.0f64;
        for (_, t) in self.additive_terms() {
            scale = scale.max(t.eval(env)?.abs());
        }
        Ok(scale)
    }

    pub fn display<'a>(&'a self, names: &'a dyn Names) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Expr::Const(_) | Expr::Var(_) | Expr::SigPlus { .. } => 5,
            Expr::Unary(UnaryOp::Abs, _) => 5,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Binary(op, _, _) => match op {
                BinaryOp::Add | BinaryOp::Sub => 1,
                BinaryOp::Mul | BinaryOp::Div => 2,
                BinaryOp::Pow => 4,
                BinaryOp::Min | BinaryOp::Max => 5,
            },
        }
    }
}

/// Formats a float so that parsing it back yields the identical value.
pub fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let plain = format!("{x:?}");
    let sci = format!("{x:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a dyn Names,
}

impl ExprDisplay<'_> {
    fn child(&self, e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = ExprDisplay { expr: e, names: self.names };
        if e.precedence() < min_prec {
            write!(f, "({d})")
        } else {
            write!(f, "{d}")
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Const(c) => write!(f, "{}", fmt_num(*c)),
            Expr::Var(v) => write!(f, "{}", self.names.name(*v)),
            Expr::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                self.child(a, 3, f)
            }
            Expr::Unary(UnaryOp::Abs, a) => {
                write!(f, "abs(")?;
                self.child(a, 0, f)?;
                write!(f, ")")
            }
            Expr::Binary(op @ (BinaryOp::Min | BinaryOp::Max), a, b) => {
                write!(f, "{}(", if *op == BinaryOp::Min { "min" } else { "max" })?;
                self.child(a, 0, f)?;
                write!(f, ", ")?;
                self.child(b, 0, f)?;
                write!(f, ")")
            }
            Expr::Binary(op, a, b) => {
                let (sym, l, r) = match op {
                    BinaryOp::Add => (" + ", 1, 2),
                    BinaryOp::Sub => (" - ", 1, 2),
                    BinaryOp::Mul => (" * ", 2, 3),
                    BinaryOp::Div => (" / ", 2, 3),
                    BinaryOp::Pow => ("^", 5, 3),
                    BinaryOp::Min | BinaryOp::Max => unreachable!(),
                };
                self.child(a, l, f)?;
                write!(f, "{sym}")?;
                self.child(b, r, f)
            }
            Expr::SigPlus {
                arg,
                threshold,
                slope,
            } => {
                write!(f, "sig(")?;
                self.child(arg, 0, f)?;
                write!(f, ", ")?;
                self.child(threshold, 0, f)?;
                write!(f, ", ")?;
                self.child(slope, 0, f)?;
                write!(f, ")")
            }
        }
    }
}
