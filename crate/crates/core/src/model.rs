//! Models: unknowns with domains, ODE right-hand sides, constraints, events
//! and an STL specification, plus the line-oriented model-file format.
//!
//! ```text
//! modelfile v1
//! [options]
//! hill = 4
//! [unknowns]
//! dp_Ft in [3.8e-6, 3.8e-5] scale log
//! Ft_p_eq in [1e-9, 1e-6]
//! [states]
//! Ft_p
//! [odes]
//! Ft_p' = t_Ft / 24 * Ft_f - dp_Ft * Ft_p
//! [constraints]
//! derive-steady-state
//! ft_ire5_ratio: p_Ft / dr_Ft > p_IRE5 / dr_IRE5 @data
//! tfr1_turnover: x / y in [7.0e-6, 7.0e-5] => a + b < 5.5e-13 @data
//! [events]
//! cutoff at 0: k_imp = 0
//! [stl]
//! eventually[0, 1000] (Fe < 0.5 * Fe_eq)
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::expr::{fmt_num, BinaryOp, Env, EvalError, Expr, Names, VarRef};
use crate::interval::{Interval, IntervalBox};
use crate::parse::{parse_expr, tokenize, Cursor, ParseError, ParseErrorKind, Resolver, Tok};

/// Suffix naming the steady-state unknown of a state variable.
pub const STEADY_SUFFIX: &str = "_eq";

pub const TAG_STEADY: &str = "steady-state";
pub const TAG_DATA: &str = "data";
pub const TAG_REDUNDANT: &str = "redundant";
pub const TAG_RECONSTRUCTED: &str = "reconstructed";
pub const TAG_LOW_RELIABILITY: &str = "reliability:low";

/// Relative and absolute tolerances for equality residuals.
pub const EQ_RTOL: f64 = 1e-9;
pub const EQ_ATOL: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unknown {
    pub name: String,
    pub domain: Interval,
    pub scale: Scale,
    pub tags: BTreeSet<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relation {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    /// `lhs in [lo, hi]`, i.e. two inequalities; the right-hand side is unused.
    In(Interval),
}

impl Relation {
    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::In(_) => "in",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub id: String,
    pub lhs: Expr,
    pub relation: Relation,
    pub rhs: Expr,
    pub tags: BTreeSet<String>,
    /// A simpler sum bound implied by this constraint together with the
    /// model's domains; expanded by [`crate::sampler::add_redundant`].
    pub implies: Option<Box<Constraint>>,
    /// Generated by `derive-steady-state` rather than written in the file.
    pub generated: bool,
}

/// Outcome of checking a constraint at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub satisfied: bool,
    /// Positive when satisfied: distance to the boundary for inequalities,
    /// minus the residual for equalities.
    pub slack: f64,
}

impl Constraint {
    pub fn new(id: impl Into<String>, lhs: Expr, relation: Relation, rhs: Expr) -> Constraint {
        Constraint {
            id: id.into(),
            lhs,
            relation,
            rhs,
            tags: BTreeSet::new(),
            implies: None,
            generated: false,
        }
    }

    pub fn within(id: impl Into<String>, lhs: Expr, range: Interval) -> Constraint {
        Constraint::new(id, lhs, Relation::In(range), Expr::Const(0.0))
    }

    pub fn with_tag(mut self, tag: &str) -> Constraint {
        self.tags.insert(tag.to_string());
        self
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn is_equality(&self) -> bool {
        self.relation == Relation::Eq
    }

    pub fn is_redundant(&self) -> bool {
        self.has_tag(TAG_REDUNDANT)
    }

    /// Unknown indices referenced, ascending.
    pub fn unknowns(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        let mut f = |v: VarRef| {
            if let VarRef::Unknown(i) = v {
                set.insert(i);
            }
        };
        self.lhs.visit_vars(&mut f);
        if !matches!(self.relation, Relation::In(_)) {
            self.rhs.visit_vars(&mut f);
        }
        set.into_iter().collect()
    }

    pub fn mentions_state(&self) -> bool {
        let mut hit = false;
        let mut f = |v: VarRef| hit |= matches!(v, VarRef::State(_));
        self.lhs.visit_vars(&mut f);
        self.rhs.visit_vars(&mut f);
        hit
    }

    /// Evaluates the constraint at a point. Equalities hold when
    /// `|lhs - rhs| <= EQ_ATOL + EQ_RTOL * scale`, the scale being the largest
    /// additive term on either side; inequalities are strict where written so.
    pub fn check<E: Env + ?Sized>(&self, env: &E) -> Result<Check, EvalError> {
        let l = self.lhs.eval(env)?;
        if let Relation::In(r) = self.relation {
            let slack = (l - r.lo()).min(r.hi() - l);
            return Ok(Check {
                satisfied: r.contains(l),
                slack: if slack.is_nan() { f64::NEG_INFINITY } else { slack },
            });
        }
        let r = self.rhs.eval(env)?;
        let (satisfied, slack) = match self.relation {
            Relation::Eq => {
                let scale = self.lhs.term_scale(env)?.max(self.rhs.term_scale(env)?);
                let res = (l - r).abs();
                (res <= EQ_ATOL + EQ_RTOL * scale, -res)
            }
            Relation::Lt => (l < r, r - l),
            Relation::Le => (l <= r, r - l),
            Relation::Gt => (l > r, l - r),
            Relation::Ge => (l >= r, l - r),
            Relation::In(_) => unreachable!(),
        };
        Ok(Check {
            satisfied: satisfied && !slack.is_nan(),
            slack: if slack.is_nan() { f64::NEG_INFINITY } else { slack },
        })
    }

    /// Relative residual of an equality: `|lhs - rhs| / term scale`.
    pub fn relative_residual<E: Env + ?Sized>(&self, env: &E) -> Result<f64, EvalError> {
        let l = self.lhs.eval(env)?;
        let r = self.rhs.eval(env)?;
        let scale = self.lhs.term_scale(env)?.max(self.rhs.term_scale(env)?);
        let res = (l - r).abs();
        Ok(if scale > 0.0 { res / scale } else { res })
    }

    pub fn display<'a>(&'a self, names: &'a dyn Names) -> ConstraintDisplay<'a> {
        ConstraintDisplay { c: self, names }
    }
}

pub struct ConstraintDisplay<'a> {
    c: &'a Constraint,
    names: &'a dyn Names,
}

impl ConstraintDisplay<'_> {
    fn body(&self, c: &Constraint, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", c.lhs.display(self.names))?;
        match c.relation {
            Relation::In(r) => write!(f, " in [{}, {}]", fmt_num(r.lo()), fmt_num(r.hi())),
            rel => write!(f, " {} {}", rel.symbol(), c.rhs.display(self.names)),
        }
    }
}

impl fmt::Display for ConstraintDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.c.id)?;
        self.body(self.c, f)?;
        if let Some(rule) = &self.c.implies {
            write!(f, " => ")?;
            self.body(rule, f)?;
        }
        for t in &self.c.tags {
            write!(f, " @{t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub label: String,
    pub time: Expr,
    pub assignments: Vec<(VarRef, Expr)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    unknowns: Vec<Unknown>,
    names: Arc<[String]>,
    states: Vec<String>,
    odes: Vec<Expr>,
    ode_tags: Vec<BTreeSet<String>>,
    constraints: Vec<Constraint>,
    events: Vec<Event>,
    stl: Option<String>,
    options: BTreeMap<String, f64>,
    derive_steady_state: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("state `{0}` has no steady-state unknown `{0}{STEADY_SUFFIX}`")]
    MissingSteadyState(String),
    #[error("state `{0}` has no ODE")]
    MissingOde(String),
    #[error("constraint `{0}` refers to a dynamic state; constraints range over unknowns only")]
    StateInConstraint(String),
    #[error("{0}")]
    Invalid(String),
}

impl Names for Model {
    fn name(&self, v: VarRef) -> &str {
        match v {
            VarRef::Unknown(i) => &self.unknowns[i].name,
            VarRef::State(i) => &self.states[i],
        }
    }
}

/// Plain name tables, for expressions built outside a model.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    pub unknowns: Vec<String>,
    pub states: Vec<String>,
}

impl Scope {
    pub fn with_unknowns<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Scope {
        Scope {
            unknowns: names.into_iter().map(Into::into).collect(),
            states: Vec::new(),
        }
    }

    /// Parses a standalone expression over this scope.
    pub fn parse_expr(&self, text: &str) -> Result<Expr, ParseError> {
        let toks = tokenize(text, 1)?;
        let mut c = Cursor::new(&toks, 1);
        let e = parse_expr(&mut c, self)?;
        c.expect_end()?;
        Ok(e)
    }

    /// Parses `id: lhs rel rhs` or `id: lhs in [lo, hi]` (tags allowed).
    pub fn parse_constraint(&self, text: &str) -> Result<Constraint, ParseError> {
        let toks = tokenize(text, 1)?;
        let mut c = Cursor::new(&toks, 1);
        let con = parse_constraint_line(&mut c, self)?;
        c.expect_end()?;
        Ok(con)
    }
}

impl Resolver for Scope {
    fn resolve(&self, name: &str) -> Option<VarRef> {
        if let Some(i) = self.unknowns.iter().position(|n| n == name) {
            return Some(VarRef::Unknown(i));
        }
        self.states.iter().position(|n| n == name).map(VarRef::State)
    }
}

impl Names for Scope {
    fn name(&self, v: VarRef) -> &str {
        match v {
            VarRef::Unknown(i) => &self.unknowns[i],
            VarRef::State(i) => &self.states[i],
        }
    }
}

struct ModelScope<'a> {
    unknowns: &'a HashMap<String, usize>,
    states: &'a HashMap<String, usize>,
    hill: f64,
}

impl Resolver for ModelScope<'_> {
    fn resolve(&self, name: &str) -> Option<VarRef> {
        self.unknowns
            .get(name)
            .map(|&i| VarRef::Unknown(i))
            .or_else(|| self.states.get(name).map(|&i| VarRef::State(i)))
    }
    fn default_slope(&self) -> f64 {
        self.hill
    }
}

fn parse_tags(c: &mut Cursor<'_>) -> Result<BTreeSet<String>, ParseError> {
    let mut tags = BTreeSet::new();
    while c.eat_punct("@") {
        let mut tag = c.expect_ident()?.to_string();
        while c.is_punct("-") || c.is_punct(":") {
            if !matches!(c.peek_at(1), Some(Tok::Ident(_))) {
                break;
            }
            let Some(Tok::Punct(p)) = c.next() else { unreachable!() };
            tag.push_str(p);
            tag.push_str(c.expect_ident()?);
        }
        tags.insert(tag);
    }
    Ok(tags)
}

fn parse_relation(c: &mut Cursor<'_>) -> Result<Option<Relation>, ParseError> {
    let rel = match c.peek() {
        Some(Tok::Punct("=")) | Some(Tok::Punct("==")) => Relation::Eq,
        Some(Tok::Punct("<")) => Relation::Lt,
        Some(Tok::Punct("<=")) => Relation::Le,
        Some(Tok::Punct(">")) => Relation::Gt,
        Some(Tok::Punct(">=")) => Relation::Ge,
        Some(Tok::Ident(s)) if s == "in" => {
            c.next();
            c.expect_punct("[")?;
            let lo = c.expect_number()?;
            c.expect_punct(",")?;
            let hi = c.expect_number()?;
            c.expect_punct("]")?;
            if lo > hi {
                return Err(c.error(format!("empty interval [{lo}, {hi}]")));
            }
            return Ok(Some(Relation::In(Interval::new(lo, hi))));
        }
        _ => return Ok(None),
    };
    c.next();
    Ok(Some(rel))
}

fn parse_body(c: &mut Cursor<'_>, r: &dyn Resolver, id: &str) -> Result<Constraint, ParseError> {
    let lhs = parse_expr(c, r)?;
    let rel = parse_relation(c)?.ok_or_else(|| c.error(format!("expected a relation, found {}", c.describe())))?;
    let rhs = match rel {
        Relation::In(_) => Expr::Const(0.0),
        _ => parse_expr(c, r)?,
    };
    Ok(Constraint::new(id, lhs, rel, rhs))
}

fn parse_constraint_line(c: &mut Cursor<'_>, r: &dyn Resolver) -> Result<Constraint, ParseError> {
    let id = c.expect_ident()?.to_string();
    c.expect_punct(":")?;
    let mut con = parse_body(c, r, &id)?;
    if c.eat_punct("=>") {
        let rule = parse_body(c, r, &format!("{id}.rule"))?;
        con.implies = Some(Box::new(rule));
    }
    con.tags = parse_tags(c)?;
    Ok(con)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Options,
    Unknowns,
    States,
    Odes,
    Constraints,
    Events,
    Stl,
}

impl Model {
    pub fn unknowns(&self) -> &[Unknown] {
        &self.unknowns
    }

    pub fn unknown_names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn odes(&self) -> &[Expr] {
        &self.odes
    }

    pub fn ode_tags(&self, state: usize) -> &BTreeSet<String> {
        &self.ode_tags[state]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn stl(&self) -> Option<&str> {
        self.stl.as_deref()
    }

    pub fn options(&self) -> &BTreeMap<String, f64> {
        &self.options
    }

    pub fn option(&self, key: &str) -> Option<f64> {
        self.options.get(key).copied()
    }

    /// Default slope of `sig(x, theta)`.
    pub fn hill(&self) -> f64 {
        self.option("hill").unwrap_or(4.0)
    }

    pub fn unknown_index(&self, name: &str) -> Option<usize> {
        self.unknowns.iter().position(|u| u.name == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn resolve(&self, name: &str) -> Option<VarRef> {
        self.unknown_index(name)
            .map(VarRef::Unknown)
            .or_else(|| self.state_index(name).map(VarRef::State))
    }

    /// Index of the steady-state unknown `<state>_eq`.
    pub fn steady_unknown(&self, state: usize) -> Option<usize> {
        self.unknown_index(&format!("{}{STEADY_SUFFIX}", self.states[state]))
    }

    pub fn is_steady_unknown(&self, i: usize) -> bool {
        let n = &self.unknowns[i].name;
        n.strip_suffix(STEADY_SUFFIX)
            .is_some_and(|s| self.state_index(s).is_some())
    }

    /// Unknowns that are model parameters (not steady-state concentrations).
    pub fn parameters(&self) -> Vec<usize> {
        (0..self.unknowns.len()).filter(|&i| !self.is_steady_unknown(i)).collect()
    }

    /// The search space: one interval per unknown, in declaration order.
    pub fn domain_box(&self) -> IntervalBox {
        IntervalBox::new(self.names.clone(), self.unknowns.iter().map(|u| u.domain).collect())
    }

    pub fn scales(&self) -> Vec<Scale> {
        self.unknowns.iter().map(|u| u.scale).collect()
    }

    pub fn resolver(&self) -> impl Resolver + '_ {
        self.scope()
    }

    fn scope(&self) -> Scope {
        Scope {
            unknowns: self.unknowns.iter().map(|u| u.name.clone()).collect(),
            states: self.states.clone(),
        }
    }

    /// Parses an expression against this model's names.
    pub fn parse_expr(&self, text: &str) -> Result<Expr, ParseError> {
        self.scope().parse_expr(text)
    }

    pub fn parse_constraint(&self, text: &str) -> Result<Constraint, ParseError> {
        self.scope().parse_constraint(text)
    }

    /// The ODE right-hand side of `state` with every state replaced by its
    /// steady-state unknown.
    pub fn steady_state_expr(&self, state: usize) -> Result<Expr, ModelError> {
        let map: Vec<usize> = (0..self.states.len())
            .map(|s| self.steady_unknown(s).ok_or_else(|| ModelError::MissingSteadyState(self.states[s].clone())))
            .collect::<Result<_, _>>()?;
        Ok(self.odes[state].substitute(&|v| match v {
            VarRef::State(s) => Expr::unknown(map[s]),
            u => Expr::Var(u),
        }))
    }

    /// Returns a copy with `constraints` replaced.
    pub fn with_constraints(&self, constraints: Vec<Constraint>) -> Model {
        let mut m = self.clone();
        m.constraints = constraints;
        m
    }

    /// Returns a copy with some unknown domains replaced.
    pub fn with_domains(&self, domains: &[(&str, Interval)]) -> Result<Model, ModelError> {
        let mut m = self.clone();
        for (name, d) in domains {
            let i = m
                .unknown_index(name)
                .ok_or_else(|| ModelError::Invalid(format!("no unknown `{name}`")))?;
            m.unknowns[i].domain = *d;
        }
        Ok(m)
    }

    pub fn without_constraint(&self, id: &str) -> Model {
        self.with_constraints(self.constraints.iter().filter(|c| c.id != id).cloned().collect())
    }

    /// Parses a model file.
    pub fn parse(text: &str) -> Result<Model, ModelError> {
        let mut sections: Vec<(Section, usize, &str)> = Vec::new();
        let mut current: Option<Section> = None;
        let mut seen_header = false;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                if current == Some(Section::Stl) {
                    sections.push((Section::Stl, line, ""));
                }
                continue;
            }
            if !seen_header {
                let mut words = content.split_whitespace();
                if words.next() != Some("modelfile") || words.next() != Some("v1") || words.next().is_some() {
                    return Err(ParseError::syntax(line, 1, "expected header `modelfile v1`").into());
                }
                seen_header = true;
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = Some(match name.trim() {
                    "options" => Section::Options,
                    "unknowns" => Section::Unknowns,
                    "states" => Section::States,
                    "odes" => Section::Odes,
                    "constraints" => Section::Constraints,
                    "events" => Section::Events,
                    "stl" => Section::Stl,
                    other => {
                        return Err(ParseError::syntax(line, 2, format!("unknown section `{other}`")).into())
                    }
                });
                continue;
            }
            let Some(sec) = current else {
                return Err(ParseError::syntax(line, 1, "content before the first section").into());
            };
            sections.push((sec, line, raw));
        }
        if !seen_header {
            return Err(ParseError::syntax(1, 1, "expected header `modelfile v1`").into());
        }

        let lines_of = |s: Section| sections.iter().filter(move |(t, _, _)| *t == s).map(|(_, l, r)| (*l, *r));
        let tokens = |line: usize, raw: &str| tokenize(raw, line);

        let mut options = BTreeMap::new();
        for (line, raw) in lines_of(Section::Options) {
            let toks = tokens(line, raw)?;
            let mut c = Cursor::new(&toks, line);
            let key = c.expect_ident()?.to_string();
            c.expect_punct("=")?;
            let v = c.expect_number()?;
            c.expect_end()?;
            if options.insert(key.clone(), v).is_some() {
                return Err(dup(line, &key).into());
            }
        }
        let hill = options.get("hill").copied().unwrap_or(4.0);

        let mut unknowns = Vec::new();
        let mut unknown_ix = HashMap::new();
        for (line, raw) in lines_of(Section::Unknowns) {
            let toks = tokens(line, raw)?;
            let mut c = Cursor::new(&toks, line);
            let (l0, c0) = c.here();
            let name = c.expect_ident()?.to_string();
            if !c.eat_ident("in") {
                return Err(c.error("expected `in [lo, hi]`").into());
            }
            c.expect_punct("[")?;
            let lo = c.expect_number()?;
            c.expect_punct(",")?;
            let hi = c.expect_number()?;
            c.expect_punct("]")?;
            if !(lo <= hi) {
                return Err(ParseError::syntax(l0, c0, format!("empty domain [{lo}, {hi}] for `{name}`")).into());
            }
            let mut scale = if lo > 0.0 && hi / lo >= 100.0 { Scale::Log } else { Scale::Linear };
            if c.eat_ident("scale") {
                scale = match c.expect_ident()? {
                    "log" => Scale::Log,
                    "linear" => Scale::Linear,
                    s => return Err(c.error(format!("unknown scale `{s}`")).into()),
                };
                if scale == Scale::Log && lo <= 0.0 {
                    return Err(ParseError::syntax(l0, c0, format!("log scale needs a positive domain for `{name}`")).into());
                }
            }
            let tags = parse_tags(&mut c)?;
            c.expect_end()?;
            if unknown_ix.insert(name.clone(), unknowns.len()).is_some() {
                return Err(ParseError {
                    line: l0,
                    col: c0,
                    kind: ParseErrorKind::Duplicate(name),
                }
                .into());
            }
            unknowns.push(Unknown {
                name,
                domain: Interval::new(lo, hi),
                scale,
                tags,
            });
        }

        let mut states = Vec::new();
        let mut state_ix = HashMap::new();
        for (line, raw) in lines_of(Section::States) {
            let toks = tokens(line, raw)?;
            let mut c = Cursor::new(&toks, line);
            while !c.at_end() {
                let (l0, c0) = c.here();
                let name = c.expect_ident()?.to_string();
                c.eat_punct(",");
                if unknown_ix.contains_key(&name) || state_ix.insert(name.clone(), states.len()).is_some() {
                    return Err(ParseError {
                        line: l0,
                        col: c0,
                        kind: ParseErrorKind::Duplicate(name),
                    }
                    .into());
                }
                states.push(name);
            }
        }

        let scope = ModelScope {
            unknowns: &unknown_ix,
            states: &state_ix,
            hill,
        };

        let mut odes: Vec<Option<Expr>> = vec![None; states.len()];
        let mut ode_tags = vec![BTreeSet::new(); states.len()];
        for (line, raw) in lines_of(Section::Odes) {
            let toks = tokens(line, raw)?;
            let mut c = Cursor::new(&toks, line);
            let (l0, c0) = c.here();
            let name = c.expect_ident()?;
            let s = *state_ix.get(name).ok_or(ParseError {
                line: l0,
                col: c0,
                kind: ParseErrorKind::Undeclared(name.to_string()),
            })?;
            c.expect_punct("'")?;
            c.expect_punct("=")?;
            let e = parse_expr(&mut c, &scope)?;
            ode_tags[s] = parse_tags(&mut c)?;
            c.expect_end()?;
            if odes[s].replace(e).is_some() {
                return Err(dup(l0, &format!("{name}'")).into());
            }
        }
        let odes: Vec<Expr> = odes
            .into_iter()
            .zip(&states)
            .map(|(e, s)| e.ok_or_else(|| ModelError::MissingOde(s.clone())))
            .collect::<Result<_, _>>()?;

        let mut constraints: Vec<Constraint> = Vec::new();
        let mut derive = false;
        let mut ids = HashMap::new();
        for (line, raw) in lines_of(Section::Constraints) {
            let toks = tokens(line, raw)?;
            let mut c = Cursor::new(&toks, line);
            if matches!(c.peek(), Some(Tok::Ident(s)) if s == "derive")
                && matches!(c.peek_at(1), Some(Tok::Punct("-")))
            {
                c.next();
                c.next();
                if !c.eat_ident("steady") {
                    return Err(c.error("expected `derive-steady-state`").into());
                }
                c.expect_punct("-")?;
                if !c.eat_ident("state") {
                    return Err(c.error("expected `derive-steady-state`").into());
                }
                c.expect_end()?;
                derive = true;
                continue;
            }
            let (l0, c0) = c.here();
            let con = parse_constraint_line(&mut c, &scope)?;
            c.expect_end()?;
            if ids.insert(con.id.clone(), line).is_some() {
                return Err(ParseError {
                    line: l0,
                    col: c0,
                    kind: ParseErrorKind::Duplicate(con.id),
                }
                .into());
            }
            if con.mentions_state() {
                return Err(ModelError::StateInConstraint(con.id));
            }
            constraints.push(con);
        }

        let mut events = Vec::new();
        for (line, raw) in lines_of(Section::Events) {
            let toks = tokens(line, raw)?;
            let mut c = Cursor::new(&toks, line);
            let label = c.expect_ident()?.to_string();
            if !c.eat_ident("at") {
                return Err(c.error("expected `at <time>`").into());
            }
            let time = parse_expr(&mut c, &scope)?;
            c.expect_punct(":")?;
            let mut assignments = Vec::new();
            loop {
                let (l0, c0) = c.here();
                let target = c.expect_ident()?;
                let v = scope.resolve(target).ok_or(ParseError {
                    line: l0,
                    col: c0,
                    kind: ParseErrorKind::Undeclared(target.to_string()),
                })?;
                c.expect_punct("=")?;
                assignments.push((v, parse_expr(&mut c, &scope)?));
                if !c.eat_punct(",") {
                    break;
                }
            }
            c.expect_end()?;
            events.push(Event {
                label,
                time,
                assignments,
            });
        }

        let stl_lines: Vec<&str> = lines_of(Section::Stl).map(|(_, r)| r.split('#').next().unwrap_or("")).collect();
        let stl_text = stl_lines.join("\n").trim().to_string();
        let stl = if stl_text.is_empty() { None } else { Some(stl_text) };

        let mut model = Model {
            names: unknowns.iter().map(|u| u.name.clone()).collect::<Vec<_>>().into(),
            unknowns,
            states,
            odes,
            ode_tags,
            constraints,
            events,
            stl,
            options,
            derive_steady_state: derive,
        };
        if derive {
            let mut generated = Vec::new();
            for s in 0..model.states.len() {
                let e = model.steady_state_expr(s)?;
                let id = format!("ss_{}", model.states[s]);
                if ids.contains_key(&id) {
                    return Err(ModelError::Invalid(format!("constraint id `{id}` is reserved for steady states")));
                }
                let mut c = Constraint::new(id, e, Relation::Eq, Expr::Const(0.0)).with_tag(TAG_STEADY);
                c.generated = true;
                generated.push(c);
            }
            generated.append(&mut model.constraints);
            model.constraints = generated;
        }
        if let Some(text) = &model.stl {
            let signals: Vec<&str> = model.states.iter().map(String::as_str).collect();
            let params: Vec<&str> = model.unknowns.iter().map(|u| u.name.as_str()).collect();
            let first = sections
                .iter()
                .find(|(s, _, _)| *s == Section::Stl)
                .map_or(1, |(_, l, _)| *l);
            crate::stl::StlFormula::parse_at(text, &signals, &params, first)?;
        }
        Ok(model)
    }

    /// Builds a model programmatically; names are validated like the parser does.
    pub fn from_parts(
        unknowns: Vec<Unknown>,
        states: Vec<String>,
        odes: Vec<Expr>,
        constraints: Vec<Constraint>,
    ) -> Result<Model, ModelError> {
        if odes.len() != states.len() {
            return Err(ModelError::Invalid("one ODE per state is required".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &constraints {
            if !seen.insert(c.id.clone()) {
                return Err(ModelError::Parse(dup(0, &c.id)));
            }
            if c.mentions_state() {
                return Err(ModelError::StateInConstraint(c.id.clone()));
            }
            if c.unknowns().iter().any(|&i| i >= unknowns.len()) {
                return Err(ModelError::Invalid(format!("constraint `{}` refers past the unknowns", c.id)));
            }
        }
        let n = states.len();
        Ok(Model {
            names: unknowns.iter().map(|u| u.name.clone()).collect::<Vec<_>>().into(),
            unknowns,
            states,
            odes,
            ode_tags: vec![BTreeSet::new(); n],
            constraints,
            events: Vec::new(),
            stl: None,
            options: BTreeMap::new(),
            derive_steady_state: false,
        })
    }

    pub fn set_option(&mut self, key: &str, value: f64) {
        self.options.insert(key.to_string(), value);
    }
}

fn dup(line: usize, what: &str) -> ParseError {
    ParseError {
        line,
        col: 1,
        kind: ParseErrorKind::Duplicate(what.to_string()),
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "modelfile v1")?;
        if !self.options.is_empty() {
            writeln!(f, "\n[options]")?;
            for (k, v) in &self.options {
                writeln!(f, "{k} = {}", fmt_num(*v))?;
            }
        }
        writeln!(f, "\n[unknowns]")?;
        for u in &self.unknowns {
            let scale = match u.scale {
                Scale::Log => "log",
                Scale::Linear => "linear",
            };
            write!(
                f,
                "{} in [{}, {}] scale {scale}",
                u.name,
                fmt_num(u.domain.lo()),
                fmt_num(u.domain.hi())
            )?;
            for t in &u.tags {
                write!(f, " @{t}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "\n[states]")?;
        writeln!(f, "{}", self.states.join(" "))?;
        writeln!(f, "\n[odes]")?;
        for (s, e) in self.odes.iter().enumerate() {
            write!(f, "{}' = {}", self.states[s], e.display(self))?;
            for t in &self.ode_tags[s] {
                write!(f, " @{t}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "\n[constraints]")?;
        if self.derive_steady_state {
            writeln!(f, "derive-steady-state")?;
        }
        for c in self.constraints.iter().filter(|c| !c.generated) {
            writeln!(f, "{}", c.display(self))?;
        }
        if !self.events.is_empty() {
            writeln!(f, "\n[events]")?;
            for e in &self.events {
                let assigns: Vec<String> = e
                    .assignments
                    .iter()
                    .map(|(v, x)| format!("{} = {}", self.name(*v), x.display(self)))
                    .collect();
                writeln!(f, "{} at {}: {}", e.label, e.time.display(self), assigns.join(", "))?;
            }
        }
        if let Some(stl) = &self.stl {
            writeln!(f, "\n[stl]")?;
            writeln!(f, "{stl}")?;
        }
        Ok(())
    }
}

/// Point values for a subset of a model's unknowns, tagged by how each was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    names: Arc<[String]>,
    values: Vec<Option<f64>>,
    provenance: Vec<Option<Provenance>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sampled,
    Deduced,
}

impl Assignment {
    pub fn empty(names: Arc<[String]>) -> Assignment {
        let n = names.len();
        Assignment {
            names,
            values: vec![None; n],
            provenance: vec![None; n],
        }
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values[i]
    }

    pub fn get_by_name(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).and_then(|i| self.values[i])
    }

    pub fn provenance(&self, i: usize) -> Option<Provenance> {
        self.provenance[i]
    }

    pub fn is_assigned(&self, i: usize) -> bool {
        self.values[i].is_some()
    }

    pub fn set(&mut self, i: usize, v: f64, p: Provenance) {
        self.values[i] = Some(v);
        self.provenance[i] = Some(p);
    }

    pub fn unset(&mut self, i: usize) {
        self.values[i] = None;
        self.provenance[i] = None;
    }

    pub fn set_by_name(&mut self, name: &str, v: f64, p: Provenance) -> Result<(), ModelError> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ModelError::Invalid(format!("no unknown `{name}`")))?;
        self.set(i, v, p);
        Ok(())
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn assigned_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Dense values; unassigned entries are NaN.
    pub fn to_vec(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    }

    /// Evaluates with missing values reported by name.
    pub fn eval(&self, e: &Expr) -> Result<f64, ModelError> {
        e.eval(self).map_err(|err| match err {
            EvalError::Missing(VarRef::Unknown(i)) => {
                ModelError::Invalid(format!("missing value for `{}`", self.names[i]))
            }
            other => ModelError::Invalid(other.to_string()),
        })
    }

    /// Name of the unknown behind a missing-value error.
    pub fn missing_name(&self, err: &EvalError) -> Option<&str> {
        match err {
            EvalError::Missing(VarRef::Unknown(i)) => Some(&self.names[*i]),
            _ => None,
        }
    }

    /// Copies the values of `other` that are assigned there but not here.
    pub fn merge_from(&mut self, other: &Assignment) {
        for i in 0..self.values.len() {
            if self.values[i].is_none() && other.values[i].is_some() {
                self.values[i] = other.values[i];
                self.provenance[i] = other.provenance[i];
            }
        }
    }
}

impl Env for Assignment {
    fn value(&self, v: VarRef) -> Option<f64> {
        match v {
            VarRef::Unknown(i) => self.values.get(i).copied().flatten(),
            VarRef::State(_) => None,
        }
    }
}

/// Shorthand for `lhs - rhs` used when a constraint is viewed as `g = 0`.
pub fn difference(c: &Constraint) -> Expr {
    Expr::binary(BinaryOp::Sub, c.lhs.clone(), c.rhs.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "modelfile v1
[unknowns]
k in [1e-3, 1e-1]
x_eq in [0, 10]
p in [0.1, 1]
[states]
x
[odes]
x' = p - k * x
[constraints]
derive-steady-state
";

    #[test]
    fn minimal_model_gets_one_steady_state_constraint() {
        let m = Model::parse(MINIMAL).unwrap();
        assert_eq!(m.states(), &["x".to_string()]);
        assert_eq!(m.odes().len(), 1);
        assert_eq!(m.constraints().len(), 1);
        let c = &m.constraints()[0];
        assert_eq!(c.id, "ss_x");
        assert!(c.has_tag(TAG_STEADY));
        assert_eq!(c.display(&m).to_string(), "ss_x: p - k * x_eq = 0.0 @steady-state");
        assert_eq!(m.unknowns()[0].scale, Scale::Log);
        assert_eq!(m.unknowns()[1].scale, Scale::Linear);
    }

    #[test]
    fn undeclared_name_is_located() {
        let text = MINIMAL.replace("x' = p - k * x", "x' = p - dr_Foo * x");
        match Model::parse(&text) {
            Err(ModelError::Parse(e)) => {
                assert_eq!(e.kind, ParseErrorKind::Undeclared("dr_Foo".into()));
                assert_eq!((e.line, e.col), (9, 10));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = format!("{MINIMAL}a: k < 1\na: p > 0\n");
        assert!(matches!(
            Model::parse(&text),
            Err(ModelError::Parse(ParseError {
                kind: ParseErrorKind::Duplicate(_),
                ..
            }))
        ));
        let text = MINIMAL.replace("p in [0.1, 1]", "k in [0.1, 1]");
        assert!(Model::parse(&text).is_err());
    }

    #[test]
    fn steady_state_unknown_is_required() {
        let text = MINIMAL.replace("x_eq in [0, 10]\n", "");
        assert_eq!(Model::parse(&text), Err(ModelError::MissingSteadyState("x".into())));
    }

    #[test]
    fn bad_header_and_sections() {
        assert!(Model::parse("modelfile v2\n").is_err());
        assert!(Model::parse("modelfile v1\n[nope]\n").is_err());
        let e = Model::parse("modelfile v1\n[unknowns]\nk in [2, 1]\n").unwrap_err();
        assert!(e.to_string().contains("line 3"));
    }

    #[test]
    fn tags_rules_and_events_round_trip() {
        let text = format!(
            "{MINIMAL}r: k * x_eq + p * x_eq < 5.5e-13 @data @reliability:low\n\
             w: k / p in [7.0e-6, 7.0e-5] => k + p < 2 @data\n\
             [events]\ncut at 10: p = 0, k = 2 * k\n[stl]\nalways[0, 5] (x > 0)\n"
        );
        let m = Model::parse(&text).unwrap();
        let r = m.constraint("r").unwrap();
        assert!(r.has_tag(TAG_LOW_RELIABILITY));
        let w = m.constraint("w").unwrap();
        assert!(matches!(w.relation, Relation::In(_)));
        assert_eq!(w.implies.as_ref().unwrap().id, "w.rule");
        assert_eq!(m.events()[0].assignments.len(), 2);
        let again = Model::parse(&m.to_string()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn constraint_check_semantics() {
        let s = Scope::with_unknowns(["x", "y"]);
        let c = s.parse_constraint("c: x < y").unwrap();
        let a = crate::expr::SliceEnv {
            unknowns: &[1.0, 1.0],
            states: &[],
        };
        assert!(!c.check(&a).unwrap().satisfied);
        let c = s.parse_constraint("c: x <= y").unwrap();
        assert!(c.check(&a).unwrap().satisfied);
        let c = s.parse_constraint("c: x - y = 0").unwrap();
        assert!(c.check(&a).unwrap().satisfied);
        let c = s.parse_constraint("c: x in [2, 3]").unwrap();
        let chk = c.check(&a).unwrap();
        assert!(!chk.satisfied);
        assert_eq!(chk.slack, -1.0);
    }

    #[test]
    fn assignment_reports_missing_names() {
        let m = Model::parse(MINIMAL).unwrap();
        let mut a = Assignment::empty(m.unknown_names().clone());
        a.set(0, 0.01, Provenance::Sampled);
        let e = m.parse_expr("p / k").unwrap();
        let err = a.eval(&e).unwrap_err();
        assert!(err.to_string().contains("`p`"), "{err}");
        a.set_by_name("p", 0.5, Provenance::Sampled).unwrap();
        assert_eq!(a.eval(&e).unwrap(), 50.0);
    }
}
