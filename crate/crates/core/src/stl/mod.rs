//! Signal Temporal Logic: parsing and offline monitoring over traces.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! formula := or ("->" formula)?
//! or      := and (("or" | "||") and)*
//! and     := until (("and" | "&&") until)*
//! until   := unary ("until" bounds unary)?
//! unary   := ("not" | "!") unary
//!          | ("always" | "eventually") bounds unary
//!          | atom | "(" formula ")"
//! atom    := expr ("<" | "<=" | ">" | ">=") expr
//! bounds  := "[" number "," (number | "inf") "]"
//! ```
//!
//! Robustness uses the usual quantitative semantics; signals are piecewise
//! linear between samples and window extremes are computed exactly.

mod signal;

use std::collections::BTreeMap;
use std::fmt;

pub use signal::Signal;

use crate::expr::{fmt_num, Env, EvalError, Expr, Names, VarRef};
use crate::parse::{parse_expr, tokenize, Cursor, ParseError, ParseErrorKind, Resolver};
use crate::trace::Trace;

#[derive(Debug, thiserror::Error)]
pub enum StlError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("formula horizon {horizon} exceeds the trace span [{start}, {end}]")]
    Horizon { horizon: f64, start: f64, end: f64 },
    #[error("trace has no signal `{0}`")]
    MissingSignal(String),
    #[error("parameter `{0}` is not bound")]
    Unbound(String),
    #[error("non-finite predicate value at t = {0}")]
    NonFinite(f64),
    #[error("trace has no samples")]
    EmptyTrace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stl {
    /// `lhs cmp rhs`; `VarRef::State(i)` is signal `i`, `VarRef::Unknown(j)` parameter `j`.
    Atom { lhs: Expr, cmp: Cmp, rhs: Expr },
    Not(Box<Stl>),
    And(Box<Stl>, Box<Stl>),
    Or(Box<Stl>, Box<Stl>),
    Implies(Box<Stl>, Box<Stl>),
    Always(f64, f64, Box<Stl>),
    Eventually(f64, f64, Box<Stl>),
    Until(f64, f64, Box<Stl>, Box<Stl>),
}

impl Stl {
    /// Time needed after the evaluation instant (`inf` for unbounded windows).
    pub fn horizon(&self) -> f64 {
        match self {
            Stl::Atom { .. } => 0.0,
            Stl::Not(f) => f.horizon(),
            Stl::And(a, b) | Stl::Or(a, b) | Stl::Implies(a, b) => a.horizon().max(b.horizon()),
            Stl::Always(_, b, f) | Stl::Eventually(_, b, f) => b + f.horizon(),
            Stl::Until(_, b, f, g) => b + f.horizon().max(g.horizon()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Stl::Atom { .. } => 0,
            Stl::Not(f) | Stl::Always(_, _, f) | Stl::Eventually(_, _, f) => 1 + f.depth(),
            Stl::And(a, b) | Stl::Or(a, b) | Stl::Implies(a, b) | Stl::Until(_, _, a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }
}

/// A parsed formula together with the signal and parameter names it uses.
#[derive(Clone, Debug, PartialEq)]
pub struct StlFormula {
    root: Stl,
    signals: Vec<String>,
    params: Vec<String>,
    bound: Vec<Option<f64>>,
}

/// Boolean verdict with its robustness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verdict {
    pub satisfied: bool,
    pub robustness: f64,
    /// `|robustness|` is below `1e-12` times the scale of the predicate signals.
    pub marginal: bool,
}

struct StlScope<'a> {
    signals: &'a [&'a str],
    params: &'a [&'a str],
}

impl Resolver for StlScope<'_> {
    fn resolve(&self, name: &str) -> Option<VarRef> {
        if let Some(i) = self.signals.iter().position(|s| *s == name) {
            return Some(VarRef::State(i));
        }
        self.params.iter().position(|s| *s == name).map(VarRef::Unknown)
    }
}

fn bounds(c: &mut Cursor<'_>) -> Result<(f64, f64), ParseError> {
    let (l, col) = c.here();
    c.expect_punct("[")?;
    let a = c.expect_number()?;
    c.expect_punct(",")?;
    let b = c.expect_number()?;
    c.expect_punct("]")?;
    if !(a >= 0.0) || a.is_infinite() {
        return Err(ParseError {
            line: l,
            col,
            kind: ParseErrorKind::Invalid(format!("time bound {a} must be finite and nonnegative")),
        });
    }
    if a > b {
        return Err(ParseError {
            line: l,
            col,
            kind: ParseErrorKind::Invalid(format!("inverted time bounds [{a}, {b}]")),
        });
    }
    Ok((a, b))
}

struct StlParser<'a, 'b> {
    c: Cursor<'a>,
    scope: &'b StlScope<'b>,
}

impl StlParser<'_, '_> {
    fn formula(&mut self) -> Result<Stl, ParseError> {
        let lhs = self.or()?;
        if self.c.eat_punct("->") {
            let rhs = self.formula()?;
            return Ok(Stl::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Stl, ParseError> {
        let mut lhs = self.and()?;
        while self.c.eat_ident("or") || self.c.eat_punct("||") {
            lhs = Stl::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Stl, ParseError> {
        let mut lhs = self.until()?;
        while self.c.eat_ident("and") || self.c.eat_punct("&&") {
            lhs = Stl::And(Box::new(lhs), Box::new(self.until()?));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Stl, ParseError> {
        let lhs = self.unary()?;
        if self.c.eat_ident("until") {
            let (a, b) = bounds(&mut self.c)?;
            let rhs = self.unary()?;
            return Ok(Stl::Until(a, b, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Stl, ParseError> {
        if self.c.eat_ident("not") || self.c.eat_punct("!") {
            return Ok(Stl::Not(Box::new(self.unary()?)));
        }
        if self.c.eat_ident("always") {
            let (a, b) = bounds(&mut self.c)?;
            return Ok(Stl::Always(a, b, Box::new(self.unary()?)));
        }
        if self.c.eat_ident("eventually") {
            let (a, b) = bounds(&mut self.c)?;
            return Ok(Stl::Eventually(a, b, Box::new(self.unary()?)));
        }
        let start = self.c.pos();
        match self.atom() {
            Ok(a) => Ok(a),
            Err(atom_err) => {
                self.c.reset(start);
                if !self.c.eat_punct("(") {
                    return Err(atom_err);
                }
                let f = match self.formula() {
                    Ok(f) => f,
                    // An undeclared name is more informative than the nested failure.
                    Err(e) if matches!(atom_err.kind, ParseErrorKind::Undeclared(_)) && e.kind != atom_err.kind => {
                        return Err(atom_err)
                    }
                    Err(e) => return Err(e),
                };
                self.c.expect_punct(")")?;
                Ok(f)
            }
        }
    }

    fn atom(&mut self) -> Result<Stl, ParseError> {
        let lhs = parse_expr(&mut self.c, self.scope)?;
        let cmp = if self.c.eat_punct("<") {
            Cmp::Lt
        } else if self.c.eat_punct("<=") {
            Cmp::Le
        } else if self.c.eat_punct(">") {
            Cmp::Gt
        } else if self.c.eat_punct(">=") {
            Cmp::Ge
        } else {
            return Err(self.c.error(format!("expected a comparison, found {}", self.c.describe())));
        };
        let rhs = parse_expr(&mut self.c, self.scope)?;
        Ok(Stl::Atom { lhs, cmp, rhs })
    }
}

/// Environment for atoms at one trace row.
struct RowEnv<'a> {
    row: &'a [f64],
    cols: &'a [usize],
    params: &'a [Option<f64>],
}

impl Env for RowEnv<'_> {
    fn value(&self, v: VarRef) -> Option<f64> {
        match v {
            VarRef::State(i) => Some(self.row[self.cols[i]]),
            VarRef::Unknown(j) => self.params[j],
        }
    }
}

impl StlFormula {
    /// Parses a formula whose names must all be signals.
    pub fn parse(text: &str, signals: &[&str]) -> Result<StlFormula, ParseError> {
        Self::parse_at(text, signals, &[], 1)
    }

    /// Parses a formula that may also mention parameters, bound later with [`StlFormula::bind`].
    pub fn parse_with_params(text: &str, signals: &[&str], params: &[&str]) -> Result<StlFormula, ParseError> {
        Self::parse_at(text, signals, params, 1)
    }

    /// As [`StlFormula::parse_with_params`], numbering lines from `first_line`.
    pub fn parse_at(text: &str, signals: &[&str], params: &[&str], first_line: usize) -> Result<StlFormula, ParseError> {
        let toks = tokenize(text, first_line)?;
        let scope = StlScope { signals, params };
        let end_line = first_line + text.lines().count().saturating_sub(1);
        let mut p = StlParser {
            c: Cursor::new(&toks, end_line),
            scope: &scope,
        };
        let root = p.formula()?;
        p.c.expect_end()?;
        Ok(StlFormula {
            root,
            signals: signals.iter().map(|s| s.to_string()).collect(),
            params: params.iter().map(|s| s.to_string()).collect(),
            bound: vec![None; params.len()],
        })
    }

    pub fn root(&self) -> &Stl {
        &self.root
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    /// Binds parameter values by name; names the formula does not declare are ignored.
    pub fn bind<'a>(&self, values: impl IntoIterator<Item = (&'a str, f64)>) -> StlFormula {
        let mut f = self.clone();
        for (name, v) in values {
            if let Some(j) = f.params.iter().position(|p| p == name) {
                f.bound[j] = Some(v);
            }
        }
        f
    }

    /// Bound parameter values as a map.
    pub fn bindings(&self) -> BTreeMap<String, f64> {
        self.params
            .iter()
            .zip(&self.bound)
            .filter_map(|(p, v)| v.map(|v| (p.clone(), v)))
            .collect()
    }

    pub fn horizon(&self) -> f64 {
        self.root.horizon()
    }

    /// Robustness at the first sample of the trace.
    pub fn robustness(&self, trace: &Trace) -> Result<f64, StlError> {
        Ok(self.robustness_signal(trace)?.0.values()[0])
    }

    /// Robustness as a signal over the admissible evaluation instants, plus the
    /// magnitude of the predicate signals.
    pub fn robustness_signal(&self, trace: &Trace) -> Result<(Signal, f64), StlError> {
        if trace.is_empty() {
            return Err(StlError::EmptyTrace);
        }
        let cols: Vec<usize> = self
            .signals
            .iter()
            .map(|s| trace.signal_index(s).ok_or_else(|| StlError::MissingSignal(s.clone())))
            .collect::<Result<_, _>>()?;
        let mut ctx = Monitor {
            trace,
            cols: &cols,
            params: &self.bound,
            names: &self.params,
            scale: 0.0,
        };
        let sig = ctx.eval(&self.root)?;
        Ok((sig, ctx.scale))
    }

    pub fn satisfies(&self, trace: &Trace) -> Result<Verdict, StlError> {
        let (sig, scale) = self.robustness_signal(trace)?;
        let rho = sig.values()[0];
        Ok(Verdict {
            satisfied: rho > 0.0,
            robustness: rho,
            marginal: rho.abs() < 1e-12 * scale,
        })
    }
}

struct Monitor<'a> {
    trace: &'a Trace,
    cols: &'a [usize],
    params: &'a [Option<f64>],
    names: &'a [String],
    scale: f64,
}

impl Monitor<'_> {
    fn horizon_error(&self, need: f64) -> StlError {
        StlError::Horizon {
            horizon: need,
            start: self.trace.start(),
            end: self.trace.end(),
        }
    }

    fn eval(&mut self, f: &Stl) -> Result<Signal, StlError> {
        Ok(match f {
            Stl::Atom { lhs, cmp, rhs } => {
                let mut v = Vec::with_capacity(self.trace.len());
                for (t, row) in self.trace.times.iter().zip(&self.trace.values) {
                    let env = RowEnv {
                        row,
                        cols: self.cols,
                        params: self.params,
                    };
                    let get = |e: &Expr| {
                        e.eval(&env).map_err(|err| match err {
                            EvalError::Missing(VarRef::Unknown(j)) => StlError::Unbound(self.names[j].clone()),
                            _ => StlError::NonFinite(*t),
                        })
                    };
                    let (l, r) = (get(lhs)?, get(rhs)?);
                    let m = match cmp {
                        Cmp::Gt | Cmp::Ge => l - r,
                        Cmp::Lt | Cmp::Le => r - l,
                    };
                    if !m.is_finite() {
                        return Err(StlError::NonFinite(*t));
                    }
                    self.scale = self.scale.max(l.abs()).max(r.abs());
                    v.push(m);
                }
                Signal::new(self.trace.times.clone(), v)
            }
            Stl::Not(g) => self.eval(g)?.neg(),
            Stl::And(a, b) => {
                let (x, y) = (self.eval(a)?, self.eval(b)?);
                x.combine(&y, false)
            }
            Stl::Or(a, b) => {
                let (x, y) = (self.eval(a)?, self.eval(b)?);
                x.combine(&y, true)
            }
            Stl::Implies(a, b) => {
                let (x, y) = (self.eval(a)?, self.eval(b)?);
                x.neg().combine(&y, true)
            }
            Stl::Eventually(a, b, g) => {
                let s = self.eval(g)?;
                s.window_max(*a, *b).ok_or_else(|| self.horizon_error(f.horizon()))?
            }
            Stl::Always(a, b, g) => {
                let s = self.eval(g)?;
                s.window_min(*a, *b).ok_or_else(|| self.horizon_error(f.horizon()))?
            }
            Stl::Until(a, b, g, h) => {
                let (phi, psi) = (self.eval(g)?, self.eval(h)?);
                self.until(&phi, &psi, *a, *b).ok_or_else(|| self.horizon_error(f.horizon()))?
            }
        })
    }

    /// `phi until[a,b] psi` as `always[0,a] phi and (phi until[0,b-a] psi)` shifted by `a`,
    /// with `phi until[0,c] psi = eventually[0,c] psi and (phi untimed-until psi)`.
    fn until(&self, phi: &Signal, psi: &Signal, a: f64, b: f64) -> Option<Signal> {
        let c = b - a;
        let mut zero = Signal::until(phi, psi);
        if c.is_finite() {
            zero = psi.window_max(0.0, c)?.combine(&zero, false);
        }
        if a == 0.0 {
            return Some(zero);
        }
        let shifted = zero.window_max(a, a)?;
        Some(phi.window_min(0.0, a)?.combine(&shifted, false))
    }
}

impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_stl(&self.root, self, f, 0)
    }
}

impl Names for StlFormula {
    fn name(&self, v: VarRef) -> &str {
        match v {
            VarRef::State(i) => &self.signals[i],
            VarRef::Unknown(j) => &self.params[j],
        }
    }
}

fn write_bounds(a: f64, b: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "[{}, {}]", fmt_num(a), fmt_num(b))
}

/// Precedence levels: 0 implies, 1 or, 2 and, 3 until, 4 unary.
fn write_stl(s: &Stl, names: &StlFormula, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
    let level = match s {
        Stl::Implies(..) => 0,
        Stl::Or(..) => 1,
        Stl::And(..) => 2,
        Stl::Until(..) => 3,
        _ => 4,
    };
    let paren = level < ctx || (matches!(s, Stl::Atom { .. }) && ctx > 0);
    if paren {
        write!(f, "(")?;
    }
    match s {
        Stl::Atom { lhs, cmp, rhs } => write!(f, "{} {} {}", lhs.display(names), cmp.symbol(), rhs.display(names))?,
        Stl::Not(g) => {
            write!(f, "not ")?;
            write_stl(g, names, f, 4)?;
        }
        Stl::And(a, b) => {
            write_stl(a, names, f, 2)?;
            write!(f, " and ")?;
            write_stl(b, names, f, 3)?;
        }
        Stl::Or(a, b) => {
            write_stl(a, names, f, 1)?;
            write!(f, " or ")?;
            write_stl(b, names, f, 2)?;
        }
        Stl::Implies(a, b) => {
            write_stl(a, names, f, 1)?;
            write!(f, " -> ")?;
            write_stl(b, names, f, 0)?;
        }
        Stl::Always(a, b, g) | Stl::Eventually(a, b, g) => {
            write!(f, "{}", if matches!(s, Stl::Always(..)) { "always" } else { "eventually" })?;
            write_bounds(*a, *b, f)?;
            write!(f, " ")?;
            write_stl(g, names, f, 4)?;
        }
        Stl::Until(a, b, g, h) => {
            write_stl(g, names, f, 4)?;
            write!(f, " until")?;
            write_bounds(*a, *b, f)?;
            write!(f, " ")?;
            write_stl(h, names, f, 4)?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(names: &[&str], rows: &[(f64, &[f64])]) -> Trace {
        Trace::from_rows(
            names.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_and_prints() {
        let f = StlFormula::parse("always[0,1000] (Fe > 0)", &["Fe"]).unwrap();
        assert_eq!(f.to_string(), "always[0.0, 1e3] (Fe > 0.0)");
        let again = StlFormula::parse(&f.to_string(), &["Fe"]).unwrap();
        assert_eq!(again, f);
        let g = StlFormula::parse("!(x > 1 && y < 2) -> eventually[0, inf] (x >= y) until[1,2] y > 0", &["x", "y"]).unwrap();
        let again = StlFormula::parse(&g.to_string(), &["x", "y"]).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn rejects_bad_bounds_and_names() {
        let e = StlFormula::parse("eventually[5,2] (x>0)", &["x"]).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(_)));
        let e = StlFormula::parse("always[0,1] (z > 0)", &["x"]).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Undeclared("z".into()));
        assert!(StlFormula::parse("always[0,1] x", &["x"]).is_err());
    }

    #[test]
    fn constant_and_ramp() {
        let c = 2.0;
        let d = 0.5;
        let tr = trace(&["x"], &[(0.0, &[c + d]), (10.0, &[c + d])]);
        let f = StlFormula::parse("always[0,10] (x > 2)", &["x"]).unwrap();
        assert_eq!(f.robustness(&tr).unwrap(), d);

        let tr = trace(&["x"], &[(0.0, &[0.0]), (10.0, &[4.0])]);
        let f = StlFormula::parse("eventually[0,10] (x > 2)", &["x"]).unwrap();
        assert!((f.robustness(&tr).unwrap() - 2.0).abs() < 1e-12);
        let v = f.satisfies(&tr).unwrap();
        assert!(v.satisfied && !v.marginal);
    }

    #[test]
    fn horizon_and_parameters() {
        let tr = trace(&["x"], &[(0.0, &[1.0]), (5.0, &[1.0])]);
        let f = StlFormula::parse("eventually[0,10] (x > 0)", &["x"]).unwrap();
        assert!(matches!(f.robustness(&tr), Err(StlError::Horizon { .. })));
        let f = StlFormula::parse_with_params("always[0,5] (x < 2 * k)", &["x"], &["k"]).unwrap();
        assert!(matches!(f.robustness(&tr), Err(StlError::Unbound(_))));
        let f = f.bind([("k", 1.0)]);
        assert_eq!(f.robustness(&tr).unwrap(), 1.0);
    }

    #[test]
    fn negation_is_dual() {
        let tr = trace(&["x"], &[(0.0, &[0.0]), (1.0, &[3.0]), (2.0, &[-1.0]), (4.0, &[2.0])]);
        let f = StlFormula::parse("eventually[0,2] (x > 1) until[0,1] x < 2", &["x"]).unwrap();
        let g = StlFormula::parse("not (eventually[0,2] (x > 1) until[0,1] x < 2)", &["x"]).unwrap();
        assert_eq!(f.robustness(&tr).unwrap(), -g.robustness(&tr).unwrap());
    }
}
