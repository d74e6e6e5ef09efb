//! Series calculator scripts.
//!
//! ```text
//! script  := header-line* { stmt }
//! stmt    := "let" ident "=" expr | expr
//! expr    := term { ("+" | "-") term }
//! term    := unary { "*" unary }
//! unary   := "-" unary | power
//! power   := atom [ "^" exp ]
//! atom    := number | ident | var | "(" expr ")" | call
//! var     := "t" | "p"                          (whichever the ring uses)
//! exp     := unsigned rational | ident | "(" element ")"
//! call    := "inv" "(" expr "," element ")"
//!          | "trunc_open" "(" expr "," element ")"
//!          | "trunc_closed" "(" expr "," element ")"
//!          | "slice" "(" expr "," element "," element ")"
//!          | "pow" "(" expr "," integer ")"
//! ```
//!
//! `^` on anything other than the variable takes a nonnegative integer.
//! Header lines are the `key = value` lines of a problem file.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::BigRational;

use gpuiseux::coeff::CoeffElem;
use gpuiseux::series::{GenSeries, SeriesRing};
use gpuiseux::value_group::{parse_element, GroupElement};

use crate::spec::{ring_for, ParseError, ProblemSpec};

/// Failure while running a script; parse errors carry a position.
#[derive(Debug)]
pub enum ArithError {
    Parse(ParseError),
    Eval(String),
}

impl std::fmt::Display for ArithError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArithError::Parse(e) => write!(f, "parse error at {e}"),
            ArithError::Eval(e) => write!(f, "{e}"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    /// Column offset of `src` within its line.
    base: usize,
    line: usize,
    ring: &'a Arc<SeriesRing>,
    env: &'a HashMap<String, GenSeries>,
}

type PResult<T> = Result<T, ArithError>;

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ArithError::Parse(ParseError { line: self.line, col: self.base + self.pos + 1, msg: msg.into() }))
    }

    fn eval_err<T>(&self, e: impl std::fmt::Display) -> PResult<T> {
        Err(ArithError::Eval(format!("line {}: {e}", self.line)))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let n = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        if n == 0 || rest.starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
        self.pos += n;
        Some(rest[..n].to_string())
    }

    /// Digits with an optional `/digits`.
    fn number(&mut self) -> Option<BigRational> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let digits = |s: &str| s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
        let n = digits(rest);
        if n == 0 {
            return None;
        }
        let mut end = n;
        if rest[n..].starts_with('/') {
            let m = digits(&rest[n + 1..]);
            if m > 0 {
                end = n + 1 + m;
            }
        }
        self.pos += end;
        BigRational::from_str(&rest[..end]).ok()
    }

    /// Raw text up to the next top-level `,` or `)`.
    fn raw_arg(&mut self) -> PResult<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0i32;
        for (k, c) in self.src[start..].char_indices() {
            match c {
                '(' => depth += 1,
                ')' if depth == 0 => {
                    self.pos = start + k;
                    return Ok((start, self.src[start..start + k].trim().to_string()));
                }
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    self.pos = start + k;
                    return Ok((start, self.src[start..start + k].trim().to_string()));
                }
                _ => {}
            }
        }
        self.pos = self.src.len();
        self.err("unterminated argument list")
    }

    fn element(&mut self) -> PResult<GroupElement> {
        let (at, s) = self.raw_arg()?;
        parse_element(self.ring.descriptor(), &s).or_else(|e| {
            self.pos = at;
            self.err(format!("bad exponent `{s}`: {e}"))
        })
    }

    fn expr(&mut self) -> PResult<GenSeries> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> PResult<GenSeries> {
        let mut acc = self.unary()?;
        while self.eat('*') {
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> PResult<GenSeries> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn exponent(&mut self) -> PResult<GroupElement> {
        let desc = self.ring.descriptor().clone();
        if self.eat('(') {
            let e = self.element()?;
            self.expect(')')?;
            return Ok(e);
        }
        let at = self.pos;
        if let Some(q) = self.number() {
            return Ok(GroupElement::from_rational(&desc, q));
        }
        if let Some(id) = self.ident() {
            return parse_element(&desc, &id).or_else(|e| {
                self.pos = at;
                self.err(format!("bad exponent `{id}`: {e}"))
            });
        }
        self.err("expected an exponent")
    }

    fn small_int(&mut self) -> PResult<u32> {
        let at = self.pos;
        match self.number() {
            Some(q) if q.is_integer() => u32::try_from(q.to_integer()).or_else(|_| {
                self.pos = at;
                self.err("exponent too large")
            }),
            _ => {
                self.pos = at;
                self.err("expected a nonnegative integer")
            }
        }
    }

    fn power(&mut self) -> PResult<GenSeries> {
        self.skip_ws();
        let start = self.pos;
        let var = self.ring.var();
        if let Some(id) = self.ident() {
            if id == var {
                let e = if self.eat('^') { self.exponent()? } else { GroupElement::unit(self.ring.descriptor(), 0) };
                return Ok(GenSeries::var_pow(self.ring, e));
            }
            let base = if self.peek() == Some('(') && !self.env.contains_key(&id) { self.call(&id, start)? } else { self.lookup(&id, start)? };
            return self.int_power(base);
        }
        let base = self.atom()?;
        self.int_power(base)
    }

    fn int_power(&mut self, base: GenSeries) -> PResult<GenSeries> {
        if self.eat('^') {
            let n = self.small_int()?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn lookup(&mut self, id: &str, at: usize) -> PResult<GenSeries> {
        match self.env.get(id) {
            Some(v) => Ok(v.clone()),
            None => {
                self.pos = at;
                self.err(format!("unknown name `{id}`"))
            }
        }
    }

    fn call(&mut self, name: &str, at: usize) -> PResult<GenSeries> {
        self.expect('(')?;
        let x = self.expr()?;
        self.expect(',')?;
        let out = match name {
            "inv" => {
                let e = self.element()?;
                x.inv(Some(&e)).or_else(|err| self.eval_err(err))?
            }
            "trunc_open" => {
                let e = self.element()?;
                x.truncate_open(&e).or_else(|err| self.eval_err(err))?
            }
            "trunc_closed" => {
                let e = self.element()?;
                x.truncate_closed(&e).or_else(|err| self.eval_err(err))?
            }
            "slice" => {
                let a = self.element()?;
                self.expect(',')?;
                let b = self.element()?;
                x.slice(&a, &b).or_else(|err| self.eval_err(err))?
            }
            "pow" => {
                let n = self.small_int()?;
                x.pow(n)
            }
            _ => {
                self.pos = at;
                return self.err(format!("unknown function `{name}`"));
            }
        };
        self.expect(')')?;
        Ok(out)
    }

    fn atom(&mut self) -> PResult<GenSeries> {
        if self.eat('(') {
            let v = self.expr()?;
            self.expect(')')?;
            return Ok(v);
        }
        if let Some(q) = self.number() {
            return self.constant(q);
        }
        self.err("expected a number, name or `(`")
    }

    fn constant(&mut self, q: BigRational) -> PResult<GenSeries> {
        if q.is_integer() {
            let n = q.to_integer();
            return Ok(GenSeries::one(self.ring).mul_int(&n));
        }
        let c = CoeffElem::from_scalar(self.ring.tower(), q);
        Ok(GenSeries::constant(self.ring, c))
    }
}

/// Lines of output for a script: one per statement.
pub fn run(text: &str) -> Result<Vec<String>, ArithError> {
    let mut header = Vec::new();
    let mut body = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !t.starts_with("let ") && t.contains('=') && body.is_empty() {
            header.push((i + 1, raw));
        } else {
            body.push((i + 1, raw));
        }
    }
    let spec = ProblemSpec::parse_header(&header).map_err(ArithError::Parse)?;
    let (ring, _) = ring_for(&spec).map_err(ArithError::Eval)?;
    let mut env: HashMap<String, GenSeries> = HashMap::new();
    let mut out = Vec::new();
    for (ln, raw) in body {
        let t = raw.trim_start();
        let indent = raw.len() - t.len();
        let (name, src, off) = if let Some(rest) = t.strip_prefix("let ") {
            let Some(eq) = rest.find('=') else {
                return Err(ArithError::Parse(ParseError { line: ln, col: indent + 5, msg: "expected `let name = expr`".into() }));
            };
            let name = rest[..eq].trim().to_string();
            let valid = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && !name.starts_with(|c: char| c.is_ascii_digit());
            if !valid || name == ring.var() {
                return Err(ArithError::Parse(ParseError { line: ln, col: indent + 5, msg: format!("bad name `{name}`") }));
            }
            (Some(name), &rest[eq + 1..], indent + 4 + eq + 1)
        } else {
            (None, t, indent)
        };
        let mut p = Parser { src, pos: 0, base: off, line: ln, ring: &ring, env: &env };
        let v = p.expr()?;
        if p.peek().is_some() {
            return Err(ArithError::Parse(ParseError { line: ln, col: off + p.pos + 1, msg: "unexpected trailing input".into() }));
        }
        match name {
            Some(n) => {
                out.push(format!("{n} = {v}"));
                env.insert(n, v);
            }
            None => out.push(v.to_string()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carries_in_mixed_mode() {
        let out = run("mode = mixed\np = 2\n3*p^(1/2)\n").unwrap();
        assert_eq!(out, vec!["p^(1/2) + p^(3/2)"]);
    }

    #[test]
    fn lets_and_calls() {
        let out = run("field = Q\nlet a = 1 + t\nlet b = inv(a, 3)\ntrunc_open(a*b, 3)\npow(a, 2) - a^2\n").unwrap();
        assert_eq!(out[2], "1 + O(t^3)");
        assert_eq!(out[3], "0");
    }

    #[test]
    fn error_positions() {
        match run("field = Q\n1 + * t\n") {
            Err(ArithError::Parse(e)) => assert_eq!((e.line, e.col), (2, 5)),
            other => panic!("{other:?}"),
        }
        match run("field = Q\nlet x = 1 + y\n") {
            Err(ArithError::Parse(e)) => assert_eq!((e.line, e.col), (2, 13)),
            other => panic!("{other:?}"),
        }
    }
}
