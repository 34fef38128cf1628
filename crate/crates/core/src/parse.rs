//! Tokenizer and expression parser shared by the model-file and STL grammars.

use std::fmt;

use thiserror::Error;

use crate::expr::{BinaryOp, Expr, UnaryOp, VarRef};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    Undeclared(String),
    Duplicate(String),
    Invalid(String),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.col)?;
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::Undeclared(n) => write!(f, "undeclared name `{n}`"),
            ParseErrorKind::Duplicate(n) => write!(f, "duplicate `{n}`"),
            ParseErrorKind::Invalid(m) => write!(f, "{m}"),
        }
    }
}

impl ParseError {
    pub fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            kind: ParseErrorKind::Syntax(msg.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Ident(String),
    Punct(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "{x}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Punct(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCT: [&str; 26] = [
    "<=", ">=", "==", "!=", "=>", "->", "&&", "||", "+", "-", "*", "/", "^", "(", ")", ",", "[", "]", ":",
    "=", "<", ">", "'", "@", "!", "~",
];

/// Splits one or more lines into tokens; `#` starts a comment.
pub fn tokenize(text: &str, first_line: usize) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = first_line + k;
        let src = raw.split('#').next().unwrap_or("");
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let save = i;
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    if i < chars.len() && chars[i].is_ascii_digit() {
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| ParseError::syntax(line, col, format!("bad number `{s}`")))?;
                out.push(Token {
                    tok: Tok::Num(v),
                    line,
                    col,
                });
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line,
                    col,
                });
            } else {
                let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let p = PUNCT
                    .iter()
                    .find(|p| rest.starts_with(**p))
                    .ok_or_else(|| ParseError::syntax(line, col, format!("unexpected character `{c}`")))?;
                i += p.len();
                out.push(Token {
                    tok: Tok::Punct(p),
                    line,
                    col,
                });
            }
        }
    }
    Ok(out)
}

/// Cursor over a token slice.
pub struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token], end_line: usize) -> Cursor<'a> {
        let end_col = toks.last().map_or(1, |t| t.col + t.tok.to_string().len());
        Cursor {
            toks,
            pos: 0,
            end_line: toks.last().map_or(end_line, |t| t.line),
            end_col,
        }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn reset(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn next(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    /// Line and column of the next token (or just past the end).
    pub fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or((self.end_line, self.end_col), |t| (t.line, t.col))
    }

    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        ParseError::syntax(l, c, msg)
    }

    pub fn error_kind(&self, kind: ParseErrorKind) -> ParseError {
        let (line, col) = self.here();
        ParseError { line, col, kind }
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    pub fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(q)) if q == s)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_ident(&mut self, s: &str) -> bool {
        if self.is_ident(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", self.describe())))
        }
    }

    pub fn expect_ident(&mut self) -> Result<&'a str, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected a name, found {}", self.describe()))),
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.describe())))
        }
    }

    /// A possibly signed number literal, or `inf`.
    pub fn expect_number(&mut self) -> Result<f64, ParseError> {
        let neg = if self.eat_punct("-") {
            true
        } else {
            self.eat_punct("+");
            false
        };
        let v = match self.peek() {
            Some(Tok::Num(v)) => *v,
            Some(Tok::Ident(s)) if s == "inf" => f64::INFINITY,
            _ => return Err(self.error(format!("expected a number, found {}", self.describe()))),
        };
        self.pos += 1;
        Ok(if neg { -v } else { v })
    }

    pub fn describe(&self) -> String {
        match self.peek() {
            Some(t) => format!("`{t}`"),
            None => "end of line".into(),
        }
    }
}

/// Resolves names met while parsing an expression.
pub trait Resolver {
    fn resolve(&self, name: &str) -> Option<VarRef>;
    /// Slope used by `sig(x, theta)` when the third argument is omitted.
    fn default_slope(&self) -> f64 {
        4.0
    }
}

/// Parses an arithmetic expression, stopping before any token that cannot
/// continue it (comparison operators, `in`, `@`, `:` ...).
pub fn parse_expr(c: &mut Cursor<'_>, r: &dyn Resolver) -> Result<Expr, ParseError> {
    let mut lhs = parse_term(c, r)?;
    loop {
        let op = if c.eat_punct("+") {
            BinaryOp::Add
        } else if c.eat_punct("-") {
            BinaryOp::Sub
        } else {
            return Ok(lhs);
        };
        let rhs = parse_term(c, r)?;
        lhs = Expr::binary(op, lhs, rhs);
    }
}

fn parse_term(c: &mut Cursor<'_>, r: &dyn Resolver) -> Result<Expr, ParseError> {
    let mut lhs = parse_unary(c, r)?;
    loop {
        let op = if c.eat_punct("*") {
            BinaryOp::Mul
        } else if c.eat_punct("/") {
            BinaryOp::Div
        } else {
            return Ok(lhs);
        };
        let rhs = parse_unary(c, r)?;
        lhs = Expr::binary(op, lhs, rhs);
    }
}

fn parse_unary(c: &mut Cursor<'_>, r: &dyn Resolver) -> Result<Expr, ParseError> {
    if c.eat_punct("-") {
        let inner = parse_unary(c, r)?;
        return Ok(match inner {
            Expr::Const(v) => Expr::Const(-v),
            e => Expr::unary(UnaryOp::Neg, e),
        });
    }
    if c.eat_punct("+") {
        return parse_unary(c, r);
    }
    parse_power(c, r)
}

fn parse_power(c: &mut Cursor<'_>, r: &dyn Resolver) -> Result<Expr, ParseError> {
    let base = parse_atom(c, r)?;
    if c.eat_punct("^") {
        let exp = parse_unary(c, r)?;
        return Ok(Expr::binary(BinaryOp::Pow, base, exp));
    }
    Ok(base)
}

fn parse_args(c: &mut Cursor<'_>, r: &dyn Resolver, name: &str) -> Result<Vec<Expr>, ParseError> {
    c.expect_punct("(")?;
    let mut args = vec![parse_expr(c, r)?];
    while c.eat_punct(",") {
        args.push(parse_expr(c, r)?);
    }
    c.expect_punct(")")
        .map_err(|e| ParseError::syntax(e.line, e.col, format!("unclosed call to `{name}`")))?;
    Ok(args)
}

fn parse_atom(c: &mut Cursor<'_>, r: &dyn Resolver) -> Result<Expr, ParseError> {
    let (line, col) = c.here();
    match c.peek() {
        Some(Tok::Num(v)) => {
            c.next();
            Ok(Expr::Const(*v))
        }
        Some(Tok::Punct("(")) => {
            c.next();
            let e = parse_expr(c, r)?;
            c.expect_punct(")")?;
            Ok(e)
        }
        Some(Tok::Ident(name)) => {
            c.next();
            if c.is_punct("(") {
                let args = parse_args(c, r, name)?;
                let arity = |n: &[usize]| {
                    if n.contains(&args.len()) {
                        Ok(())
                    } else {
                        Err(ParseError::syntax(
                            line,
                            col,
                            format!("`{name}` takes {n:?} arguments, got {}", args.len()),
                        ))
                    }
                };
                let mut it = args.clone().into_iter();
                return match name.as_str() {
                    "abs" => {
                        arity(&[1])?;
                        Ok(Expr::unary(UnaryOp::Abs, it.next().unwrap()))
                    }
                    "min" | "max" => {
                        arity(&[2])?;
                        let op = if name == "min" { BinaryOp::Min } else { BinaryOp::Max };
                        Ok(Expr::binary(op, it.next().unwrap(), it.next().unwrap()))
                    }
                    "sig" => {
                        arity(&[2, 3])?;
                        let arg = it.next().unwrap();
                        let threshold = it.next().unwrap();
                        let slope = it.next().unwrap_or(Expr::Const(r.default_slope()));
                        Ok(Expr::SigPlus {
                            arg: Box::new(arg),
                            threshold: Box::new(threshold),
                            slope: Box::new(slope),
                        })
                    }
                    _ => Err(ParseError::syntax(line, col, format!("unknown function `{name}`"))),
                };
            }
            if name == "inf" {
                return Ok(Expr::Const(f64::INFINITY));
            }
            r.resolve(name).map(Expr::Var).ok_or(ParseError {
                line,
                col,
                kind: ParseErrorKind::Undeclared(name.clone()),
            })
        }
        _ => Err(c.error(format!("expected an expression, found {}", c.describe()))),
    }
}
