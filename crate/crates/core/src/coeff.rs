//! Coefficient domains: residue field towers and finite-precision Witt-style rings.
//!
//! All scalars are stored as `BigRational`; the base ring decides how they are
//! reduced. A tower element is a flat coordinate vector over the base, with the
//! innermost stage varying fastest, so an element of a smaller snapshot embeds
//! into a larger one by zero padding.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::value_group::{fmt_rational, parse_rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoeffError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("element is not a unit")]
    NonUnit,
    #[error("no root over Q or its permitted quadratic extensions: {0}")]
    IrreducibleOverRationals(String),
    #[error("field too large for exhaustive search ({0} candidates)")]
    FieldTooLarge(u128),
    #[error("constant polynomial has no roots")]
    ConstantPolynomial,
    #[error("elements belong to incompatible towers")]
    IncompatibleTowers,
    #[error("cannot parse coefficient `{0}`")]
    Parse(String),
}

const SEARCH_LIMIT: u128 = 1 << 20;

/// Ground ring of a tower.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BaseRing {
    Rational,
    Prime(u64),
    /// Exact integers, used for lifted digit arithmetic at residue characteristic p.
    Integer(u64),
    /// Integers modulo p^n.
    Modular(u64, u32),
}

impl BaseRing {
    fn modulus(&self) -> Option<BigInt> {
        match self {
            BaseRing::Prime(p) => Some(BigInt::from(*p)),
            BaseRing::Modular(p, n) => Some(BigInt::from(*p).pow(*n)),
            _ => None,
        }
    }

    /// Characteristic of the residue field.
    pub fn residue_char(&self) -> u64 {
        match self {
            BaseRing::Rational => 0,
            BaseRing::Prime(p) | BaseRing::Integer(p) | BaseRing::Modular(p, _) => *p,
        }
    }

    /// Characteristic of the ring itself (0 for Q and Z).
    pub fn characteristic(&self) -> u64 {
        match self {
            BaseRing::Prime(p) => *p,
            _ => 0,
        }
    }

    pub fn is_field(&self) -> bool {
        matches!(self, BaseRing::Rational | BaseRing::Prime(_))
    }

    pub fn reduce(&self, x: BigRational) -> BigRational {
        match self.modulus() {
            Some(m) => BigRational::from_integer(x.to_integer().mod_floor(&m)),
            None => x,
        }
    }

    pub fn from_int(&self, k: i64) -> BigRational {
        self.reduce(BigRational::from_integer(k.into()))
    }

    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        self.reduce(a + b)
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        self.reduce(a - b)
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        self.reduce(a * b)
    }

    fn inv(&self, a: &BigRational) -> Option<BigRational> {
        if a.is_zero() {
            return None;
        }
        match self {
            BaseRing::Rational => Some(a.recip()),
            BaseRing::Integer(_) => {
                if a.abs().is_one() {
                    Some(a.clone())
                } else {
                    None
                }
            }
            BaseRing::Prime(_) | BaseRing::Modular(..) => {
                let m = self.modulus().unwrap();
                let x = a.to_integer();
                let g = x.extended_gcd(&m);
                if !g.gcd.is_one() {
                    return None;
                }
                Some(BigRational::from_integer(g.x.mod_floor(&m)))
            }
        }
    }

    fn cmp_scalar(&self, a: &BigRational, b: &BigRational) -> Ordering {
        match self {
            BaseRing::Rational => a.abs().cmp(&b.abs()).then_with(|| b.cmp(a)),
            _ => a.cmp(b),
        }
    }

    fn name(&self) -> String {
        match self {
            BaseRing::Rational => "Q".into(),
            BaseRing::Prime(p) => format!("F{p}"),
            BaseRing::Integer(p) => format!("W{p}"),
            BaseRing::Modular(p, n) => format!("Z/{p}^{n}"),
        }
    }
}

/// One simple extension: generator name and monic minimal polynomial.
///
/// `minpoly[m]` is the coefficient of `X^m` (m < degree) as a flat element of
/// the tower below; the leading coefficient 1 is implicit.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct Stage {
    name: String,
    minpoly: Vec<Vec<BigRational>>,
}

impl Stage {
    pub fn degree(&self) -> usize {
        self.minpoly.len()
    }
    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Immutable snapshot of a tower of simple extensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tower {
    base: BaseRing,
    stages: Vec<Arc<Stage>>,
}

impl Tower {
    pub fn new(base: BaseRing) -> Arc<Tower> {
        Arc::new(Tower { base, stages: Vec::new() })
    }
    pub fn base(&self) -> &BaseRing {
        &self.base
    }
    pub fn stages(&self) -> &[Arc<Stage>] {
        &self.stages
    }
    pub fn dim(&self) -> usize {
        self.dim_below(self.stages.len())
    }
    fn dim_below(&self, level: usize) -> usize {
        self.stages[..level].iter().map(|s| s.degree()).product()
    }

    /// Number of elements, for finite towers.
    pub fn size(&self) -> Option<u128> {
        match self.base {
            BaseRing::Prime(p) => (p as u128).checked_pow(self.dim() as u32),
            _ => None,
        }
    }

    /// True when `self`'s stages are a prefix of `other`'s (same base ring).
    pub fn is_prefix_of(&self, other: &Tower) -> bool {
        self.base == other.base
            && self.stages.len() <= other.stages.len()
            && self.stages.iter().zip(&other.stages).all(|(a, b)| Arc::ptr_eq(a, b) || a == b)
    }

    /// Same stages, different base ring.
    pub fn rebase(&self, base: BaseRing) -> Arc<Tower> {
        Arc::new(Tower { base, stages: self.stages.clone() })
    }

    fn next_name(&self) -> String {
        if self.stages.is_empty() {
            "w".into()
        } else {
            format!("w{}", self.stages.len() + 1)
        }
    }

    /// Append a stage with the given monic minimal polynomial (coefficients
    /// below the leading one).
    pub fn extend(self: &Arc<Self>, minpoly: &[CoeffElem]) -> Arc<Tower> {
        let dim = self.dim();
        let coeffs = minpoly
            .iter()
            .map(|c| {
                let mut v = c.promote(self).expect("minpoly over this tower").coords;
                v.resize(dim, BigRational::zero());
                v
            })
            .collect();
        self.extend_raw(Stage { name: self.next_name(), minpoly: coeffs })
    }

    fn extend_raw(self: &Arc<Self>, stage: Stage) -> Arc<Tower> {
        let mut stages = self.stages.clone();
        stages.push(Arc::new(stage));
        Arc::new(Tower { base: self.base.clone(), stages })
    }

    fn mul_level(&self, level: usize, a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
        if level == 0 {
            return vec![self.base.mul(&a[0], &b[0])];
        }
        let stage = &self.stages[level - 1];
        let d = stage.degree();
        let bs = self.dim_below(level - 1);
        let zero_block = vec![BigRational::zero(); bs];
        let mut prod: Vec<Vec<BigRational>> = vec![zero_block.clone(); 2 * d - 1];
        for i in 0..d {
            let ai = &a[i * bs..(i + 1) * bs];
            if ai.iter().all(|x| x.is_zero()) {
                continue;
            }
            for j in 0..d {
                let bj = &b[j * bs..(j + 1) * bs];
                if bj.iter().all(|x| x.is_zero()) {
                    continue;
                }
                let p = self.mul_level(level - 1, ai, bj);
                for (x, y) in prod[i + j].iter_mut().zip(p) {
                    *x = self.base.add(x, &y);
                }
            }
        }
        for k in (d..2 * d - 1).rev() {
            if prod[k].iter().all(|x| x.is_zero()) {
                continue;
            }
            let top = std::mem::replace(&mut prod[k], zero_block.clone());
            for m in 0..d {
                let p = self.mul_level(level - 1, &top, &stage.minpoly[m]);
                for (x, y) in prod[k - d + m].iter_mut().zip(p) {
                    *x = self.base.sub(x, &y);
                }
            }
        }
        prod.truncate(d);
        prod.into_iter().flatten().collect()
    }

    /// Text description such as `F2[w]/(w^2 + w + 1)`.
    pub fn describe(self: &Arc<Self>) -> String {
        let mut out = self.base.name();
        for (level, st) in self.stages.iter().enumerate() {
            let below = Arc::new(Tower { base: self.base.clone(), stages: self.stages[..level].to_vec() });
            let mut terms = vec![format!("{}^{}", st.name, st.degree())];
            for m in (0..st.degree()).rev() {
                let c = CoeffElem { tower: below.clone(), coords: st.minpoly[m].clone() };
                if c.is_zero() {
                    continue;
                }
                let mono = match m {
                    0 => String::new(),
                    1 => st.name.clone(),
                    _ => format!("{}^{}", st.name, m),
                };
                terms.push(signed_term(&c, &mono));
            }
            out.push_str(&format!("[{}]/({})", st.name, join_signed(&terms)));
        }
        out
    }

    fn monomial(&self, mut idx: usize) -> String {
        let mut parts = Vec::new();
        for st in &self.stages {
            let e = idx % st.degree();
            idx /= st.degree();
            match e {
                0 => {}
                1 => parts.push(st.name.clone()),
                _ => parts.push(format!("{}^{}", st.name, e)),
            }
        }
        parts.reverse();
        parts.join("*")
    }

    /// All elements of a finite tower, in the canonical element order.
    pub fn elements(self: &Arc<Self>) -> Result<Vec<CoeffElem>, CoeffError> {
        let p = match self.base {
            BaseRing::Prime(p) => p,
            _ => return Err(CoeffError::FieldTooLarge(u128::MAX)),
        };
        let q = self.size().unwrap_or(u128::MAX);
        if q > SEARCH_LIMIT {
            return Err(CoeffError::FieldTooLarge(q));
        }
        let dim = self.dim();
        Ok((0..q as u64)
            .map(|mut i| {
                let coords = (0..dim)
                    .map(|_| {
                        let d = i % p;
                        i /= p;
                        BigRational::from_integer(d.into())
                    })
                    .collect();
                CoeffElem { tower: self.clone(), coords }
            })
            .collect())
    }
}

fn signed_term(c: &CoeffElem, mono: &str) -> String {
    let s = c.to_string();
    let compound = c.coords.iter().filter(|x| !x.is_zero()).count() > 1;
    if mono.is_empty() {
        return s;
    }
    if compound {
        return format!("({s})*{mono}");
    }
    match s.as_str() {
        "1" => mono.to_string(),
        "-1" => format!("-{mono}"),
        _ => format!("{s}*{mono}"),
    }
}

fn join_signed(terms: &[String]) -> String {
    let mut out = String::new();
    for (i, t) in terms.iter().enumerate() {
        if i == 0 {
            out.push_str(t);
        } else if let Some(rest) = t.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(t);
        }
    }
    out
}

/// Element of a tower snapshot.
#[derive(Clone, Debug)]
pub struct CoeffElem {
    tower: Arc<Tower>,
    coords: Vec<BigRational>,
}

impl CoeffElem {
    pub fn zero(tower: &Arc<Tower>) -> Self {
        CoeffElem { tower: tower.clone(), coords: vec![BigRational::zero(); tower.dim()] }
    }
    pub fn one(tower: &Arc<Tower>) -> Self {
        Self::from_scalar(tower, BigRational::one())
    }
    pub fn from_int(tower: &Arc<Tower>, k: i64) -> Self {
        Self::from_scalar(tower, BigRational::from_integer(k.into()))
    }
    pub fn from_scalar(tower: &Arc<Tower>, s: BigRational) -> Self {
        let mut e = Self::zero(tower);
        e.coords[0] = tower.base.reduce(s);
        e
    }
    pub fn from_coords(tower: &Arc<Tower>, coords: Vec<BigRational>) -> Self {
        assert_eq!(coords.len(), tower.dim());
        let coords = coords.into_iter().map(|c| tower.base.reduce(c)).collect();
        CoeffElem { tower: tower.clone(), coords }
    }
    /// The generator of stage `level` (0-based).
    pub fn generator(tower: &Arc<Tower>, level: usize) -> Self {
        let mut e = Self::zero(tower);
        let idx = tower.dim_below(level);
        e.coords[idx] = BigRational::one();
        e
    }

    pub fn tower(&self) -> &Arc<Tower> {
        &self.tower
    }
    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }
    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }
    pub fn is_one(&self) -> bool {
        self.coords[0].is_one() && self.coords[1..].iter().all(|c| c.is_zero())
    }
    /// The base-ring scalar when the element lies in the ground ring.
    pub fn in_base(&self) -> Option<&BigRational> {
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            Some(&self.coords[0])
        } else {
            None
        }
    }

    /// Re-express inside a larger compatible tower.
    pub fn promote(&self, tower: &Arc<Tower>) -> Result<CoeffElem, CoeffError> {
        if Arc::ptr_eq(&self.tower, tower) {
            return Ok(self.clone());
        }
        if !self.tower.is_prefix_of(tower) {
            return Err(CoeffError::IncompatibleTowers);
        }
        let mut coords = self.coords.clone();
        coords.resize(tower.dim(), BigRational::zero());
        Ok(CoeffElem { tower: tower.clone(), coords })
    }

    /// Bring two elements into a common snapshot.
    pub fn unify(a: &CoeffElem, b: &CoeffElem) -> Result<(CoeffElem, CoeffElem), CoeffError> {
        if Arc::ptr_eq(&a.tower, &b.tower) || a.tower == b.tower {
            return Ok((a.clone(), b.clone()));
        }
        if a.tower.stages.len() >= b.tower.stages.len() {
            Ok((a.clone(), b.promote(&a.tower)?))
        } else {
            Ok((a.promote(&b.tower)?, b.clone()))
        }
    }

    pub fn try_add(&self, o: &CoeffElem) -> Result<CoeffElem, CoeffError> {
        let (a, b) = Self::unify(self, o)?;
        let base = &a.tower.base;
        let coords = a.coords.iter().zip(&b.coords).map(|(x, y)| base.add(x, y)).collect();
        Ok(CoeffElem { tower: a.tower, coords })
    }
    pub fn try_sub(&self, o: &CoeffElem) -> Result<CoeffElem, CoeffError> {
        let (a, b) = Self::unify(self, o)?;
        let base = &a.tower.base;
        let coords = a.coords.iter().zip(&b.coords).map(|(x, y)| base.sub(x, y)).collect();
        Ok(CoeffElem { tower: a.tower, coords })
    }
    pub fn try_mul(&self, o: &CoeffElem) -> Result<CoeffElem, CoeffError> {
        let (a, b) = Self::unify(self, o)?;
        let coords = a.tower.mul_level(a.tower.stages.len(), &a.coords, &b.coords);
        Ok(CoeffElem { tower: a.tower, coords })
    }
    pub fn neg(&self) -> CoeffElem {
        let base = &self.tower.base;
        CoeffElem {
            tower: self.tower.clone(),
            coords: self.coords.iter().map(|x| base.reduce(-x)).collect(),
        }
    }
    pub fn scale(&self, s: &BigRational) -> CoeffElem {
        let base = &self.tower.base;
        CoeffElem { tower: self.tower.clone(), coords: self.coords.iter().map(|x| base.mul(x, s)).collect() }
    }
    pub fn pow(&self, mut e: u64) -> CoeffElem {
        let mut acc = CoeffElem::one(&self.tower);
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &b;
            }
            b = &b * &b;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse.
    pub fn inv(&self) -> Result<CoeffElem, CoeffError> {
        if self.is_zero() {
            return Err(CoeffError::DivisionByZero);
        }
        match self.tower.base {
            BaseRing::Rational | BaseRing::Prime(_) => {
                linear_inverse(&self.tower, self).ok_or(CoeffError::NonUnit)
            }
            BaseRing::Modular(p, n) => {
                let residue_tower = self.tower.rebase(BaseRing::Prime(p));
                let r = CoeffElem::from_coords(&residue_tower, self.coords.clone());
                if r.is_zero() {
                    return Err(CoeffError::NonUnit);
                }
                let r_inv = linear_inverse(&residue_tower, &r).ok_or(CoeffError::NonUnit)?;
                let mut x = CoeffElem::from_coords(&self.tower, r_inv.coords);
                let two = CoeffElem::from_int(&self.tower, 2);
                let mut prec = 1u32;
                while prec < n {
                    x = &x * &(&two - &(self * &x));
                    prec *= 2;
                }
                Ok(x)
            }
            BaseRing::Integer(_) => {
                if self.tower.dim() == 1 {
                    self.tower.base.inv(&self.coords[0]).map(|c| CoeffElem::from_scalar(&self.tower, c)).ok_or(CoeffError::NonUnit)
                } else {
                    Err(CoeffError::NonUnit)
                }
            }
        }
    }

    pub fn div(&self, o: &CoeffElem) -> Result<CoeffElem, CoeffError> {
        self.try_mul(&o.inv()?)
    }

    /// Canonical element order: top stage coordinate first.
    pub fn order_cmp(&self, o: &CoeffElem) -> Ordering {
        let (a, b) = Self::unify(self, o).expect("compatible towers");
        let base = &a.tower.base;
        for (x, y) in a.coords.iter().rev().zip(b.coords.iter().rev()) {
            let c = base.cmp_scalar(x, y);
            if c != Ordering::Equal {
                return c;
            }
        }
        Ordering::Equal
    }

    /// Minimal polynomial over the ground field, monic, low degree first.
    pub fn min_poly_over_base(&self) -> Vec<BigRational> {
        let base = self.tower.base.clone();
        let dim = self.tower.dim();
        let mut powers: Vec<Vec<BigRational>> = vec![CoeffElem::one(&self.tower).coords];
        loop {
            let next = (&CoeffElem { tower: self.tower.clone(), coords: powers.last().unwrap().clone() } * self).coords;
            // solve sum x_k powers[k] = next
            let n = powers.len();
            let mut m: Vec<Vec<BigRational>> = (0..dim)
                .map(|r| {
                    let mut row: Vec<BigRational> = powers.iter().map(|p| p[r].clone()).collect();
                    row.push(next[r].clone());
                    row
                })
                .collect();
            if let Some(x) = solve_system(&base, &mut m, n) {
                let mut poly: Vec<BigRational> = x.into_iter().map(|c| base.reduce(-c)).collect();
                poly.push(BigRational::one());
                return poly;
            }
            powers.push(next);
            assert!(powers.len() <= dim + 1, "minimal polynomial degree bounded by dimension");
        }
    }
}

/// Gaussian elimination on an augmented matrix with `n` unknowns over a field base.
fn solve_system(base: &BaseRing, m: &mut [Vec<BigRational>], n: usize) -> Option<Vec<BigRational>> {
    let rows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(pr) = (r..rows).find(|&i| !m[i][col].is_zero()) else { continue };
        m.swap(r, pr);
        let inv = base.inv(&m[r][col])?;
        for x in m[r].iter_mut() {
            *x = base.mul(x, &inv);
        }
        for i in 0..rows {
            if i != r && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in 0..=n {
                    let d = base.mul(&f, &m[r][j]);
                    m[i][j] = base.sub(&m[i][j], &d);
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if (r..rows).any(|i| !m[i][n].is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = m[i][n].clone();
    }
    Some(x)
}

fn linear_inverse(tower: &Arc<Tower>, a: &CoeffElem) -> Option<CoeffElem> {
    let dim = tower.dim();
    let cols: Vec<Vec<BigRational>> = (0..dim)
        .map(|k| {
            let mut e = CoeffElem::zero(tower);
            e.coords[k] = BigRational::one();
            (a * &e).coords
        })
        .collect();
    let mut m: Vec<Vec<BigRational>> = (0..dim)
        .map(|r| {
            let mut row: Vec<BigRational> = cols.iter().map(|c| c[r].clone()).collect();
            row.push(if r == 0 { BigRational::one() } else { BigRational::zero() });
            row
        })
        .collect();
    let x = solve_system(&tower.base, &mut m, dim)?;
    let e = CoeffElem::from_coords(tower, x);
    if (a * &e).is_one() {
        Some(e)
    } else {
        None
    }
}

impl PartialEq for CoeffElem {
    fn eq(&self, o: &Self) -> bool {
        match Self::unify(self, o) {
            Ok((a, b)) => a.coords == b.coords,
            Err(_) => false,
        }
    }
}
impl Eq for CoeffElem {}

impl std::ops::Add for &CoeffElem {
    type Output = CoeffElem;
    fn add(self, o: &CoeffElem) -> CoeffElem {
        self.try_add(o).expect("compatible towers")
    }
}
impl std::ops::Sub for &CoeffElem {
    type Output = CoeffElem;
    fn sub(self, o: &CoeffElem) -> CoeffElem {
        self.try_sub(o).expect("compatible towers")
    }
}
impl std::ops::Mul for &CoeffElem {
    type Output = CoeffElem;
    fn mul(self, o: &CoeffElem) -> CoeffElem {
        self.try_mul(o).expect("compatible towers")
    }
}
impl std::ops::Neg for &CoeffElem {
    type Output = CoeffElem;
    fn neg(self) -> CoeffElem {
        CoeffElem::neg(self)
    }
}

fn fmt_scalar(q: &BigRational) -> String {
    fmt_rational(q)
}

impl fmt::Display for CoeffElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for idx in (0..self.coords.len()).rev() {
            let c = &self.coords[idx];
            if c.is_zero() {
                continue;
            }
            let mono = self.tower.monomial(idx);
            let s = fmt_scalar(c);
            terms.push(if mono.is_empty() {
                s
            } else if c.is_one() {
                mono
            } else if s == "-1" {
                format!("-{mono}")
            } else {
                format!("{s}*{mono}")
            });
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", join_signed(&terms))
        }
    }
}

/// Parse a coefficient written in the tower's generator names.
pub fn parse_coeff(tower: &Arc<Tower>, s: &str) -> Result<CoeffElem, CoeffError> {
    let err = || CoeffError::Parse(s.to_string());
    let compact: String = s.split_whitespace().collect();
    let compact = compact.trim_start_matches('(').trim_end_matches(')').to_string();
    if compact.is_empty() {
        return Err(err());
    }
    let mut terms = Vec::new();
    let mut cur = String::new();
    for ch in compact.chars() {
        if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with('*') && !cur.ends_with('^') {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(ch);
    }
    terms.push(cur);
    let mut acc = CoeffElem::zero(tower);
    for t in terms {
        let (neg, body) = match t.strip_prefix('-') {
            Some(r) => (true, r.to_string()),
            None => (false, t.trim_start_matches('+').to_string()),
        };
        let mut term = CoeffElem::one(tower);
        for factor in body.split('*') {
            if factor.is_empty() {
                return Err(err());
            }
            let (name, exp) = match factor.split_once('^') {
                Some((n, e)) => (n, e.parse::<u64>().map_err(|_| err())?),
                None => (factor, 1),
            };
            let value = if let Some(level) = tower.stages.iter().position(|st| st.name == name) {
                CoeffElem::generator(tower, level)
            } else {
                let q = parse_rational(name).ok_or_else(err)?;
                if !tower.base.is_field() && !q.is_integer() {
                    return Err(err());
                }
                if matches!(tower.base, BaseRing::Prime(_) | BaseRing::Modular(..)) && !q.is_integer() {
                    let n = CoeffElem::from_scalar(tower, BigRational::from_integer(q.numer().clone()));
                    let d = CoeffElem::from_scalar(tower, BigRational::from_integer(q.denom().clone()));
                    n.div(&d).map_err(|_| err())?
                } else {
                    CoeffElem::from_scalar(tower, q)
                }
            };
            term = &term * &value.pow(exp);
        }
        acc = if neg { &acc - &term } else { &acc + &term };
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Univariate polynomials over a tower (low degree first).

pub type UPoly = Vec<CoeffElem>;

pub fn poly_trim(p: &mut UPoly) {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

pub fn poly_eval(p: &[CoeffElem], x: &CoeffElem) -> CoeffElem {
    let mut acc = CoeffElem::zero(x.tower());
    for c in p.iter().rev() {
        acc = &(&acc * x) + c;
    }
    acc
}

fn poly_promote(p: &[CoeffElem], tower: &Arc<Tower>) -> Result<UPoly, CoeffError> {
    p.iter().map(|c| c.promote(tower)).collect()
}

fn poly_monic(p: &[CoeffElem]) -> Result<UPoly, CoeffError> {
    let mut p = p.to_vec();
    poly_trim(&mut p);
    let inv = p.last().unwrap().inv()?;
    Ok(p.iter().map(|c| c * &inv).collect())
}

/// Remainder and quotient of `a` by monic `b`.
pub fn poly_divrem_monic(a: &[CoeffElem], b: &[CoeffElem]) -> (UPoly, UPoly) {
    let db = b.len() - 1;
    let mut r = a.to_vec();
    poly_trim(&mut r);
    if r.len() <= db {
        return (vec![CoeffElem::zero(b[0].tower())], r);
    }
    let mut q = vec![CoeffElem::zero(b[0].tower()); r.len() - db];
    for k in (db..r.len()).rev() {
        let c = r[k].clone();
        if c.is_zero() {
            continue;
        }
        q[k - db] = c.clone();
        for (m, bm) in b.iter().enumerate() {
            r[k - db + m] = &r[k - db + m] - &(&c * bm);
        }
    }
    r.truncate(db.max(1));
    poly_trim(&mut r);
    (q, r)
}

fn is_zero_poly(p: &[CoeffElem]) -> bool {
    p.iter().all(|c| c.is_zero())
}

fn deflate(p: &mut UPoly, r: &CoeffElem) -> usize {
    let mut mult = 0;
    loop {
        if p.len() <= 1 {
            return mult;
        }
        let lin = vec![r.neg(), CoeffElem::one(r.tower())];
        let (q, rem) = poly_divrem_monic(p, &lin);
        if !is_zero_poly(&rem) {
            return mult;
        }
        *p = q;
        mult += 1;
    }
}

/// Roots lying in the polynomial's current tower, in canonical order.
pub fn roots_in_tower(p: &[CoeffElem]) -> Result<Vec<(CoeffElem, usize)>, CoeffError> {
    let mut p = p.to_vec();
    poly_trim(&mut p);
    if p.len() < 2 {
        return Err(CoeffError::ConstantPolynomial);
    }
    let tower = common_tower(&p)?;
    let mut cur = poly_monic(&poly_promote(&p, &tower)?)?;
    let mut found: Vec<(CoeffElem, usize)> = Vec::new();
    match tower.base {
        BaseRing::Prime(_) => {
            for x in tower.elements()? {
                if cur.len() < 2 {
                    break;
                }
                if poly_eval(&cur, &x).is_zero() {
                    let m = deflate(&mut cur, &x);
                    found.push((x, m));
                }
            }
        }
        BaseRing::Rational => {
            while cur.len() >= 2 {
                let r = if cur.len() == 2 {
                    Some(cur[0].neg())
                } else if let Some(r) = rational_root(&cur) {
                    Some(r)
                } else if cur.len() == 3 {
                    quadratic_root(&cur)
                } else {
                    None
                };
                let Some(r) = r else { break };
                let m = deflate(&mut cur, &r);
                debug_assert!(m > 0);
                found.push((r, m));
            }
        }
        _ => return Err(CoeffError::NonUnit),
    }
    found.sort_by(|a, b| a.0.order_cmp(&b.0));
    Ok(found)
}

fn common_tower(p: &[CoeffElem]) -> Result<Arc<Tower>, CoeffError> {
    let mut t = p[0].tower().clone();
    for c in p {
        if c.tower().stages.len() > t.stages.len() {
            t = c.tower().clone();
        }
    }
    for c in p {
        if !c.tower().is_prefix_of(&t) {
            return Err(CoeffError::IncompatibleTowers);
        }
    }
    Ok(t)
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    let mut out = Vec::new();
    let mut k = BigInt::one();
    while &k * &k <= n {
        if (&n % &k).is_zero() {
            out.push(k.clone());
            let other = &n / &k;
            if other != k {
                out.push(other);
            }
        }
        k += 1;
        if k > BigInt::from(1_000_000u64) {
            break;
        }
    }
    out.sort();
    out
}

fn rational_root(p: &[CoeffElem]) -> Option<CoeffElem> {
    let tower = p[0].tower().clone();
    let qs: Vec<BigRational> = p.iter().map(|c| c.in_base().cloned()).collect::<Option<_>>()?;
    if qs[0].is_zero() {
        return Some(CoeffElem::zero(&tower));
    }
    let mut den = BigInt::one();
    for q in &qs {
        den = den.lcm(q.denom());
    }
    let ints: Vec<BigInt> = qs.iter().map(|q| (q * BigRational::from_integer(den.clone())).to_integer()).collect();
    let a0 = ints[0].clone();
    let an = ints.last().unwrap().clone();
    let mut cands = Vec::new();
    for r in divisors(&a0) {
        for s in divisors(&an) {
            let c = BigRational::new(r.clone(), s.clone());
            cands.push(c.clone());
            cands.push(-c);
        }
    }
    cands.sort_by(|a, b| BaseRing::Rational.cmp_scalar(a, b));
    cands.dedup();
    for c in cands {
        let mut acc = BigRational::zero();
        for q in qs.iter().rev() {
            acc = acc * &c + q;
        }
        if acc.is_zero() {
            return Some(CoeffElem::from_scalar(&tower, c));
        }
    }
    None
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

/// Square root inside Q or a single quadratic stage over Q.
fn tower_sqrt(x: &CoeffElem) -> Option<CoeffElem> {
    let tower = x.tower().clone();
    if let Some(q) = x.in_base() {
        if let Some(r) = rational_sqrt(q) {
            return Some(CoeffElem::from_scalar(&tower, r));
        }
    }
    if tower.stages.len() != 1 || tower.stages[0].degree() != 2 || !tower.stages[0].minpoly[1][0].is_zero() {
        return None;
    }
    // generator w with w^2 = dd
    let dd = -tower.stages[0].minpoly[0][0].clone();
    let a = x.coords[0].clone();
    let b = x.coords[1].clone();
    let mk = |u: BigRational, v: BigRational| CoeffElem::from_coords(&tower, vec![u, v]);
    if b.is_zero() {
        if let Some(r) = rational_sqrt(&a) {
            return Some(mk(r, BigRational::zero()));
        }
        return rational_sqrt(&(&a / &dd)).map(|r| mk(BigRational::zero(), r));
    }
    let disc = &a * &a - &dd * &b * &b;
    let s = rational_sqrt(&disc)?;
    let two = BigRational::from_integer(2.into());
    for z in [(&a + &s) / &two, (&a - &s) / &two] {
        if let Some(u) = rational_sqrt(&z) {
            if u.is_zero() {
                continue;
            }
            let v = &b / (&two * &u);
            return Some(mk(u, v));
        }
    }
    None
}

fn quadratic_root(p: &[CoeffElem]) -> Option<CoeffElem> {
    // monic X^2 + bX + c
    let b = &p[1];
    let c = &p[0];
    let tower = b.tower().clone();
    let four = CoeffElem::from_int(&tower, 4);
    let disc = &(b * b) - &(&four * c);
    let s = tower_sqrt(&disc)?;
    let half = CoeffElem::from_scalar(&tower, BigRational::new(1.into(), 2.into()));
    Some(&(&s - b) * &half)
}

fn squarefree_part(n: &BigInt) -> BigInt {
    let sign = if n.is_negative() { -BigInt::one() } else { BigInt::one() };
    let mut m = n.abs();
    let mut out = BigInt::one();
    let mut k = BigInt::from(2);
    while &k * &k <= m {
        let kk = &k * &k;
        while (&m % &kk).is_zero() {
            m /= &kk;
        }
        if (&m % &k).is_zero() {
            m /= &k;
            out *= &k;
        }
        k += 1;
    }
    out * m * sign
}

/// Root of `p`, extending the tower when needed. Returns the (possibly new)
/// tower and the least root, or the least nonzero root when `nonzero` is set.
pub fn adjoin_root(tower: &Arc<Tower>, p: &[CoeffElem], nonzero: bool) -> Result<(Arc<Tower>, CoeffElem), CoeffError> {
    let (t, roots) = solve_in_closure(tower, p)?;
    roots
        .into_iter()
        .map(|(r, _)| r)
        .find(|r| !(nonzero && r.is_zero()))
        .map(|r| (t, r))
        .ok_or_else(|| CoeffError::IrreducibleOverRationals("no admissible root".into()))
}

/// A nonzero root `z` of `p` together with its monic minimal polynomial over
/// `tower`. The tower grows by at most one stage.
pub fn residual_factor(tower: &Arc<Tower>, p: &[CoeffElem]) -> Result<(Arc<Tower>, CoeffElem, UPoly), CoeffError> {
    let mut p = p.to_vec();
    poly_trim(&mut p);
    if p.len() < 2 {
        return Err(CoeffError::ConstantPolynomial);
    }
    let cur = poly_promote(&p, tower)?;
    let roots = roots_in_tower(&cur)?;
    if let Some((r, _)) = roots.iter().find(|(r, _)| !r.is_zero()) {
        return Ok((tower.clone(), r.clone(), vec![r.neg(), CoeffElem::one(tower)]));
    }
    let mut rest = poly_monic(&cur)?;
    for (r, _) in &roots {
        deflate(&mut rest, r);
    }
    if rest.len() < 2 {
        return Err(CoeffError::IrreducibleOverRationals(format!("{} has only the root 0", poly_string(&p))));
    }
    match tower.base {
        BaseRing::Prime(_) => {
            let factor = least_irreducible_factor(tower, &rest)?;
            let t2 = tower.extend(&factor[..factor.len() - 1]);
            let z = CoeffElem::generator(&t2, t2.stages.len() - 1);
            Ok((t2, z, factor))
        }
        BaseRing::Rational => {
            let quad = if tower.stages.is_empty() { quadratic_extension_for(&rest) } else { None };
            let Some(dd) = quad else {
                return Err(CoeffError::IrreducibleOverRationals(poly_string(&rest)));
            };
            let c = CoeffElem::from_scalar(tower, BigRational::from_integer(-dd));
            let t2 = tower.extend(&[c, CoeffElem::zero(tower)]);
            let roots = roots_in_tower(&poly_promote(&rest, &t2)?)?;
            let z = roots.into_iter().map(|r| r.0).find(|r| !r.is_zero()).ok_or(CoeffError::NonUnit)?;
            Ok((t2, z, rest))
        }
        _ => Err(CoeffError::NonUnit),
    }
}

/// All roots with multiplicity after extending the tower as far as permitted.
pub fn solve_in_closure(tower: &Arc<Tower>, p: &[CoeffElem]) -> Result<(Arc<Tower>, Vec<(CoeffElem, usize)>), CoeffError> {
    let mut p = p.to_vec();
    poly_trim(&mut p);
    if p.len() < 2 {
        return Err(CoeffError::ConstantPolynomial);
    }
    let mut tower = tower.clone();
    for c in &p {
        if c.tower().stages.len() > tower.stages.len() {
            tower = c.tower().clone();
        }
    }
    let deg = p.len() - 1;
    loop {
        let cur = poly_promote(&p, &tower)?;
        let roots = roots_in_tower(&cur)?;
        let total: usize = roots.iter().map(|r| r.1).sum();
        if total == deg {
            return Ok((tower, roots));
        }
        let mut rest = poly_monic(&cur)?;
        for (r, _) in &roots {
            deflate(&mut rest, r);
        }
        match tower.base {
            BaseRing::Prime(_) => {
                let factor = least_irreducible_factor(&tower, &rest)?;
                tower = tower.extend(&factor[..factor.len() - 1]);
            }
            BaseRing::Rational => {
                if !tower.stages.is_empty() {
                    if roots.is_empty() {
                        return Err(CoeffError::IrreducibleOverRationals(poly_string(&rest)));
                    }
                    return Ok((tower, roots));
                }
                let Some(dd) = quadratic_extension_for(&rest) else {
                    if roots.is_empty() {
                        return Err(CoeffError::IrreducibleOverRationals(poly_string(&rest)));
                    }
                    return Ok((tower, roots));
                };
                let c = CoeffElem::from_scalar(&tower, BigRational::from_integer(-dd));
                tower = tower.extend(&[c, CoeffElem::zero(&tower)]);
            }
            _ => return Err(CoeffError::NonUnit),
        }
    }
}

fn poly_string(p: &[CoeffElem]) -> String {
    let mut terms = Vec::new();
    for (k, c) in p.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let mono = match k {
            0 => String::new(),
            1 => "X".into(),
            _ => format!("X^{k}"),
        };
        terms.push(signed_term(c, &mono));
    }
    join_signed(&terms)
}

/// Squarefree D such that a rational quadratic factor of `p` splits over Q(sqrt D).
fn quadratic_extension_for(p: &[CoeffElem]) -> Option<BigInt> {
    let qs: Vec<BigRational> = p.iter().map(|c| c.in_base().cloned()).collect::<Option<_>>()?;
    if qs.len() != 3 {
        return None;
    }
    let disc = &qs[1] * &qs[1] - BigRational::from_integer(4.into()) * &qs[0] * &qs[2];
    let n = disc.numer() * disc.denom();
    let dd = squarefree_part(&n);
    if dd.is_one() || dd.abs() > BigInt::from(1000) {
        return None;
    }
    Some(dd)
}

/// Least (in lexicographic coefficient order) monic factor of minimal degree >= 2.
fn least_irreducible_factor(tower: &Arc<Tower>, p: &[CoeffElem]) -> Result<UPoly, CoeffError> {
    let elems = tower.elements()?;
    let q = elems.len() as u128;
    let n = p.len() - 1;
    for d in 2..=n {
        let count = q.checked_pow(d as u32).unwrap_or(u128::MAX);
        if count > SEARCH_LIMIT {
            return Err(CoeffError::FieldTooLarge(count));
        }
        for idx in 0..count {
            let mut cand = Vec::with_capacity(d + 1);
            let mut i = idx;
            let mut digits = vec![0usize; d];
            for k in (0..d).rev() {
                digits[k] = (i % q) as usize;
                i /= q;
            }
            // digits[0] is most significant and belongs to X^{d-1}
            for k in 0..d {
                cand.push(elems[digits[d - 1 - k]].clone());
            }
            cand.push(CoeffElem::one(tower));
            let (_, r) = poly_divrem_monic(p, &cand);
            if is_zero_poly(&r) {
                return Ok(cand);
            }
        }
    }
    Err(CoeffError::IrreducibleOverRationals("no factor found".into()))
}

// ---------------------------------------------------------------------------
// Witt-style rings W(k) at finite precision.

/// Residue tower together with its lifts to exact integers and to Z/p^N.
#[derive(Clone, Debug)]
pub struct WittRing {
    p: u64,
    n: u32,
    residue: Arc<Tower>,
    integral: Arc<Tower>,
    modular: Arc<Tower>,
}

impl WittRing {
    pub fn new(p: u64, n: u32) -> Self {
        assert!(n >= 1 && (p as f64).powi(n as i32) < 9.0e18, "p^N must fit in 63 bits");
        WittRing {
            p,
            n,
            residue: Tower::new(BaseRing::Prime(p)),
            integral: Tower::new(BaseRing::Integer(p)),
            modular: Tower::new(BaseRing::Modular(p, n)),
        }
    }
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn precision(&self) -> u32 {
        self.n
    }
    pub fn residue_tower(&self) -> &Arc<Tower> {
        &self.residue
    }
    pub fn integral_tower(&self) -> &Arc<Tower> {
        &self.integral
    }
    pub fn modular_tower(&self) -> &Arc<Tower> {
        &self.modular
    }

    /// Follow a residue tower that extends the current one by new stages.
    pub fn sync(&mut self, residue: &Arc<Tower>) {
        assert!(self.residue.is_prefix_of(residue), "residue towers must only grow");
        for level in self.residue.stages.len()..residue.stages.len() {
            let st = &residue.stages[level];
            let pp = BigRational::from_integer(self.p.into());
            // X^d + sum c_m X^m  lifts to  X^d - sum c'_m X^m with c'_m = (-c_m mod p)
            let minpoly = st
                .minpoly
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|x| {
                            let cp = (-x).to_integer().mod_floor(&BigInt::from(self.p));
                            let _ = &pp;
                            -BigRational::from_integer(cp)
                        })
                        .collect()
                })
                .collect();
            let stage = Arc::new(Stage { name: st.name.clone(), minpoly });
            let mut is = self.integral.stages.clone();
            is.push(stage);
            self.integral = Arc::new(Tower { base: BaseRing::Integer(self.p), stages: is.clone() });
            self.modular = Arc::new(Tower { base: BaseRing::Modular(self.p, self.n), stages: is });
        }
        self.residue = residue.clone();
    }

    /// Digit representative of a residue element in the exact integral tower.
    pub fn lift_integral(&self, c: &CoeffElem) -> CoeffElem {
        let c = c.promote(&self.residue).expect("residue element of this ring");
        CoeffElem { tower: self.integral.clone(), coords: c.coords }
    }

    /// Reduction mod p of an integral or modular element.
    pub fn residue_of(&self, x: &CoeffElem) -> CoeffElem {
        let mut coords = x.coords.clone();
        coords.resize(self.residue.dim(), BigRational::zero());
        CoeffElem::from_coords(&self.residue, coords)
    }

    pub fn witt(&self, x: &CoeffElem) -> WittElem {
        let mut coords = x.coords.clone();
        coords.resize(self.modular.dim(), BigRational::zero());
        WittElem { ring: self.clone(), value: CoeffElem::from_coords(&self.modular, coords) }
    }

    pub fn lift(&self, c: &CoeffElem) -> WittElem {
        self.witt(&self.lift_integral(c))
    }

    pub fn from_int(&self, k: i64) -> WittElem {
        WittElem { ring: self.clone(), value: CoeffElem::from_int(&self.modular, k) }
    }

    /// Element with the given digits: sum digits[m] p^m.
    pub fn from_digits(&self, digits: &[CoeffElem]) -> WittElem {
        let mut acc = CoeffElem::zero(&self.modular);
        let mut pm = CoeffElem::one(&self.modular);
        let pe = CoeffElem::from_int(&self.modular, self.p as i64);
        for d in digits.iter().take(self.n as usize) {
            let l = self.witt(&self.lift_integral(d)).value;
            acc = &acc + &(&l * &pm);
            pm = &pm * &pe;
        }
        WittElem { ring: self.clone(), value: acc }
    }
}

/// Element of W(k) modulo p^N.
#[derive(Clone, Debug)]
pub struct WittElem {
    ring: WittRing,
    value: CoeffElem,
}

impl WittElem {
    pub fn value(&self) -> &CoeffElem {
        &self.value
    }
    pub fn residue(&self) -> CoeffElem {
        self.ring.residue_of(&self.value)
    }
    /// Base-p digits, each a residue-field element.
    pub fn digits(&self) -> Vec<CoeffElem> {
        let p = BigInt::from(self.ring.p);
        let mut rest: Vec<BigInt> = self.value.coords.iter().map(|c| c.to_integer()).collect();
        (0..self.ring.n)
            .map(|_| {
                let coords: Vec<BigRational> = rest
                    .iter_mut()
                    .map(|x| {
                        let (q, r) = x.div_mod_floor(&p);
                        *x = q;
                        BigRational::from_integer(r)
                    })
                    .collect();
                let mut coords = coords;
                coords.resize(self.ring.residue.dim(), BigRational::zero());
                CoeffElem::from_coords(&self.ring.residue, coords)
            })
            .collect()
    }
    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }
    pub fn add(&self, o: &WittElem) -> WittElem {
        WittElem { ring: self.ring.clone(), value: &self.value + &o.value }
    }
    pub fn sub(&self, o: &WittElem) -> WittElem {
        WittElem { ring: self.ring.clone(), value: &self.value - &o.value }
    }
    pub fn mul(&self, o: &WittElem) -> WittElem {
        WittElem { ring: self.ring.clone(), value: &self.value * &o.value }
    }
    pub fn neg(&self) -> WittElem {
        WittElem { ring: self.ring.clone(), value: self.value.neg() }
    }
    pub fn inv(&self) -> Result<WittElem, CoeffError> {
        if self.residue().is_zero() {
            return Err(CoeffError::NonUnit);
        }
        Ok(WittElem { ring: self.ring.clone(), value: self.value.inv()? })
    }
}

impl PartialEq for WittElem {
    fn eq(&self, o: &Self) -> bool {
        self.value == o.value
    }
}

impl fmt::Display for WittElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ds: Vec<String> = self.digits().iter().map(|d| d.to_string()).collect();
        write!(f, "[{}] (mod {}^{})", ds.join(","), self.ring.p, self.ring.n)
    }
}

/// The residue field currently in use, with its Witt lift in mixed characteristic.
#[derive(Clone, Debug)]
pub struct ResidueField {
    residue: Arc<Tower>,
    witt: Option<WittRing>,
}

impl ResidueField {
    pub fn equal_char(tower: &Arc<Tower>) -> Self {
        ResidueField { residue: tower.clone(), witt: None }
    }
    pub fn mixed(witt: &WittRing) -> Self {
        ResidueField { residue: witt.residue_tower().clone(), witt: Some(witt.clone()) }
    }
    pub fn tower(&self) -> &Arc<Tower> {
        &self.residue
    }
    pub fn witt(&self) -> Option<&WittRing> {
        self.witt.as_ref()
    }
    /// Tower that series coefficients live in.
    pub fn coeff_tower(&self) -> &Arc<Tower> {
        match &self.witt {
            Some(w) => w.integral_tower(),
            None => &self.residue,
        }
    }
    /// Residue class of a series coefficient.
    pub fn residue_of(&self, c: &CoeffElem) -> CoeffElem {
        match &self.witt {
            Some(w) => w.residue_of(c),
            None => c.promote(&self.residue).expect("coefficient in residue tower"),
        }
    }
    /// Digit representative of a residue element, as a series coefficient.
    pub fn lift(&self, r: &CoeffElem) -> CoeffElem {
        match &self.witt {
            Some(w) => w.lift_integral(r),
            None => r.promote(&self.residue).expect("element of residue tower"),
        }
    }
    /// Switch to an extension of the current residue tower.
    pub fn adopt(&mut self, tower: &Arc<Tower>) {
        if let Some(w) = &mut self.witt {
            w.sync(tower);
        }
        self.residue = tower.clone();
    }
}

/// Binomial coefficient as an integer.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn to_u64(q: &BigRational) -> Option<u64> {
    q.to_integer().to_u64()
}
