//! Problem specification files.
//!
//! ```text
//! spec      := { line NEWLINE }
//! line      := blank | "#" text | key ws* "=" ws* value
//! key       := "mode" | "field" | "p" | "witt" | "weights" | "surd" | "lower"
//!            | "poly" | "chain" | "budget_terms" | "prec" | "resolve_limits"
//!            | "verify" | "samples" | "seed"
//! mode      := "equichar" | "mixed"
//! field     := "Q" | "F" prime                  (equichar only)
//! weights   := weight { "," weight }            (one per group generator)
//! weight    := rational | rational "+" rational "*sqrt" | rational "*sqrt" | "sqrt"
//! lower     := integer                          (leading generators valuing the coefficients)
//! poly      := polynomial in y over series in t (p in mixed mode)
//! chain     := entry { ";" entry },  entry := polynomial "@" value
//! value     := group element ("3/2", "g1 + g2", ...) | "inf"
//! ```
//!
//! `poly` and `chain` are mutually exclusive; group elements use `g1, g2, ...`
//! for the generators, a bare rational meaning a multiple of `g1`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::BigRational;
use thiserror::Error;

use gpuiseux::coeff::{BaseRing, ResidueField, Tower, WittRing};
use gpuiseux::embed::Budget;
use gpuiseux::keypoly::{KeyPolyChain, ValPoly};
use gpuiseux::series::SeriesRing;
use gpuiseux::value_group::{parse_element, parse_ext, GroupDescriptor, GroupElement, Weight};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Field {
    Rational,
    Prime(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Poly(String),
    Chain(Vec<(String, String)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemSpec {
    pub mixed: bool,
    pub field: Field,
    pub p: u64,
    pub witt: u32,
    pub weights: Vec<String>,
    pub surd: u64,
    pub lower: Option<usize>,
    pub source: Source,
    pub budget_terms: Option<usize>,
    pub prec: Option<String>,
    pub resolve_limits: bool,
    pub verify: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            mixed: false,
            field: Field::Rational,
            p: 0,
            witt: 6,
            weights: vec!["1".into()],
            surd: 1,
            lower: None,
            source: Source::Poly(String::new()),
            budget_terms: Some(8),
            prec: None,
            resolve_limits: false,
            verify: false,
            samples: 40,
            seed: 1,
        }
    }
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, col, msg: msg.into() }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "yes" => Some(true),
        "false" | "off" | "no" => Some(false),
        _ => None,
    }
}

/// `(rational, surd coefficient)` of a weight.
pub fn parse_weight(s: &str) -> Option<Weight> {
    let c: String = s.split_whitespace().collect();
    let rat = |x: &str| BigRational::from_str(x).ok();
    let surd_part = |x: &str| -> Option<BigRational> {
        if x == "sqrt" {
            return Some(BigRational::from_integer(1.into()));
        }
        if x == "-sqrt" {
            return Some(BigRational::from_integer((-1).into()));
        }
        rat(x.strip_suffix("*sqrt")?)
    };
    if let Some(b) = surd_part(&c) {
        return Some(Weight { rational: BigRational::from_integer(0.into()), surd: b });
    }
    if let Some(a) = rat(&c) {
        return Some(Weight::rational(a));
    }
    let split = c.char_indices().skip(1).find(|(_, ch)| *ch == '+' || *ch == '-')?.0;
    let (a, b) = c.split_at(split);
    let b = b.strip_prefix('+').unwrap_or(b);
    Some(Weight { rational: rat(a)?, surd: surd_part(b)? })
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
        let spec = Self::parse_lines(&lines, true)?;
        if spec.mixed && spec.p == 0 {
            return Err(perr(1, 1, "mixed mode needs `p`"));
        }
        Ok(spec)
    }

    /// Header keys only; `poly` and `chain` are still accepted.
    pub fn parse_header(lines: &[(usize, &str)]) -> Result<Self, ParseError> {
        let spec = Self::parse_lines(lines, false)?;
        if spec.mixed && spec.p == 0 {
            return Err(perr(1, 1, "mixed mode needs `p`"));
        }
        Ok(spec)
    }

    fn parse_lines(lines: &[(usize, &str)], require_source: bool) -> Result<Self, ParseError> {
        let mut spec = ProblemSpec::default();
        let mut have_source = false;
        for &(ln, raw) in lines {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some(eq) = raw.find('=') else {
                return Err(perr(ln, 1, "expected `key = value`"));
            };
            let key = raw[..eq].trim();
            let value = raw[eq + 1..].trim();
            let vcol = eq + 2 + (raw[eq + 1..].len() - raw[eq + 1..].trim_start().len());
            let kcol = raw.len() - raw.trim_start().len() + 1;
            let bad = |m: &str| perr(ln, vcol, format!("{m}: `{value}`"));
            match key {
                "mode" => {
                    spec.mixed = match value {
                        "equichar" => false,
                        "mixed" => true,
                        _ => return Err(bad("unknown mode")),
                    }
                }
                "field" => {
                    spec.field = if value == "Q" {
                        Field::Rational
                    } else if let Some(p) = value.strip_prefix('F').and_then(|x| x.parse::<u64>().ok()).filter(|p| is_prime(*p)) {
                        Field::Prime(p)
                    } else {
                        return Err(bad("field must be Q or F<prime>"));
                    }
                }
                "p" => spec.p = value.parse().ok().filter(|p| is_prime(*p)).ok_or_else(|| bad("p must be a prime"))?,
                "witt" => spec.witt = value.parse().ok().filter(|n| *n >= 1).ok_or_else(|| bad("witt must be a positive integer"))?,
                "weights" => {
                    let ws: Vec<String> = value.split(',').map(|w| w.trim().to_string()).collect();
                    if ws.iter().any(|w| parse_weight(w).is_none()) {
                        return Err(bad("bad weight list"));
                    }
                    spec.weights = ws;
                }
                "surd" => spec.surd = value.parse().ok().filter(|d| *d >= 1).ok_or_else(|| bad("surd must be a positive integer"))?,
                "lower" => spec.lower = Some(value.parse().map_err(|_| bad("lower must be an integer"))?),
                "poly" | "chain" => {
                    if have_source {
                        return Err(perr(ln, kcol, "only one of `poly` and `chain` may be given"));
                    }
                    have_source = true;
                    if value.is_empty() {
                        return Err(bad("empty polynomial"));
                    }
                    spec.source = if key == "poly" {
                        Source::Poly(value.to_string())
                    } else {
                        let mut entries = Vec::new();
                        for e in value.split(';') {
                            let (q, b) = e.split_once('@').ok_or_else(|| bad("chain entry needs `poly @ value`"))?;
                            entries.push((q.trim().to_string(), b.trim().to_string()));
                        }
                        Source::Chain(entries)
                    };
                }
                "budget_terms" => {
                    spec.budget_terms = if value == "inf" { None } else { Some(value.parse().map_err(|_| bad("budget_terms must be an integer or inf"))?) }
                }
                "prec" => spec.prec = Some(value.to_string()),
                "resolve_limits" => spec.resolve_limits = parse_bool(value).ok_or_else(|| bad("expected true or false"))?,
                "verify" => spec.verify = parse_bool(value).ok_or_else(|| bad("expected on or off"))?,
                "samples" => spec.samples = value.parse().map_err(|_| bad("samples must be an integer"))?,
                "seed" => spec.seed = value.parse().map_err(|_| bad("seed must be an integer"))?,
                _ => return Err(perr(ln, kcol, format!("unknown key `{key}`"))),
            }
        }
        if require_source && !have_source {
            return Err(perr(lines.last().map_or(1, |l| l.0), 1, "missing `poly` or `chain`"));
        }
        Ok(spec)
    }

    pub fn descriptor(&self) -> Result<Arc<GroupDescriptor>, String> {
        let ws = self.weights.iter().map(|w| parse_weight(w).ok_or_else(|| format!("bad weight `{w}`"))).collect::<Result<Vec<_>, _>>()?;
        let pexp = match (&self.field, self.mixed) {
            (Field::Prime(p), false) => *p,
            _ => 1,
        };
        GroupDescriptor::new(ws, self.surd, pexp).map(Arc::new).map_err(|e| e.to_string())
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mixed {
            writeln!(f, "mode = mixed")?;
            writeln!(f, "p = {}", self.p)?;
            writeln!(f, "witt = {}", self.witt)?;
        } else {
            writeln!(f, "mode = equichar")?;
            match self.field {
                Field::Rational => writeln!(f, "field = Q")?,
                Field::Prime(p) => writeln!(f, "field = F{p}")?,
            }
        }
        writeln!(f, "weights = {}", self.weights.join(", "))?;
        writeln!(f, "surd = {}", self.surd)?;
        if let Some(l) = self.lower {
            writeln!(f, "lower = {l}")?;
        }
        match &self.source {
            Source::Poly(p) => writeln!(f, "poly = {p}")?,
            Source::Chain(es) => {
                let parts: Vec<String> = es.iter().map(|(q, b)| format!("{q} @ {b}")).collect();
                writeln!(f, "chain = {}", parts.join("; "))?;
            }
        }
        match self.budget_terms {
            Some(n) => writeln!(f, "budget_terms = {n}")?,
            None => writeln!(f, "budget_terms = inf")?,
        }
        if let Some(p) = &self.prec {
            writeln!(f, "prec = {p}")?;
        }
        writeln!(f, "resolve_limits = {}", self.resolve_limits)?;
        writeln!(f, "verify = {}", if self.verify { "on" } else { "off" })?;
        writeln!(f, "samples = {}", self.samples)?;
        writeln!(f, "seed = {}", self.seed)
    }
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Everything the engine needs, built from a spec.
pub struct Problem {
    pub residue: ResidueField,
    pub lower: Vec<GroupElement>,
    pub poly: Option<ValPoly>,
    pub chain: Option<KeyPolyChain>,
    pub budget: Budget,
}

/// Series ring and residue field named by the header keys.
pub fn ring_for(spec: &ProblemSpec) -> Result<(Arc<SeriesRing>, ResidueField), String> {
    let desc = spec.descriptor()?;
    Ok(if spec.mixed {
        let w = WittRing::new(spec.p, spec.witt);
        (SeriesRing::p_adic(&desc, &w), ResidueField::mixed(&w))
    } else {
        let base = match spec.field {
            Field::Rational => BaseRing::Rational,
            Field::Prime(p) => BaseRing::Prime(p),
        };
        let tower = Tower::new(base);
        (SeriesRing::t_adic(&desc, &tower), ResidueField::equal_char(&tower))
    })
}

impl Problem {
    pub fn build(spec: &ProblemSpec) -> Result<Problem, String> {
        let (ring, residue) = ring_for(spec)?;
        let desc = ring.descriptor().clone();
        let n = spec.lower.unwrap_or(desc.rank());
        if n > desc.rank() {
            return Err(format!("lower = {n} exceeds the number of weights"));
        }
        let lower: Vec<GroupElement> = (0..n).map(|k| GroupElement::unit(&desc, k)).collect();
        let (poly, chain) = match &spec.source {
            Source::Poly(s) => (Some(ValPoly::parse(&ring, s).map_err(|e| e.to_string())?), None),
            Source::Chain(es) => {
                let mut items = Vec::new();
                for (q, b) in es {
                    let q = ValPoly::parse(&ring, q).map_err(|e| e.to_string())?;
                    let b = parse_ext(&desc, b).map_err(|e| e.to_string())?;
                    items.push((q, b));
                }
                (None, Some(KeyPolyChain::explicit(&ring, lower.clone(), items).map_err(|e| e.to_string())?))
            }
        };
        let max_prec = match &spec.prec {
            Some(p) => Some(parse_element(&desc, p).map_err(|e| e.to_string())?),
            None => None,
        };
        let budget = Budget { max_terms: spec.budget_terms, max_prec, resolve_limits: spec.resolve_limits };
        Ok(Problem { residue, lower, poly, chain, budget })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "mode = equichar\nfield = F2\npoly = y^2 + t*y + t\nbudget_terms = 6\n";
        let s = ProblemSpec::parse(text).unwrap();
        assert_eq!(s.field, Field::Prime(2));
        let again = ProblemSpec::parse(&s.to_string()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn chains_and_weights() {
        let text = "weights = 1, sqrt\nsurd = 2\nlower = 1\nchain = y @ g2\n";
        let s = ProblemSpec::parse(text).unwrap();
        assert_eq!(s.source, Source::Chain(vec![("y".into(), "g2".into())]));
        assert_eq!(ProblemSpec::parse(&s.to_string()).unwrap(), s);
        assert!(parse_weight("1/2 + 3*sqrt").is_some());
        assert!(parse_weight("-sqrt").is_some());
        assert!(parse_weight("x").is_none());
    }

    #[test]
    fn errors_have_positions() {
        let e = ProblemSpec::parse("field = F4\npoly = y").unwrap_err();
        assert_eq!((e.line, e.col), (1, 9));
        let e = ProblemSpec::parse("poly = y\nbogus = 1").unwrap_err();
        assert_eq!((e.line, e.col), (2, 1));
        assert!(ProblemSpec::parse("field = Q").is_err());
    }
}
