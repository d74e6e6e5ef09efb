//! Ordered value groups.
//!
//! A group is described by at most two real weights `a + b*sqrt(d)`; an
//! element is a rational coordinate vector over those weights, i.e. an element
//! of the divisible hull. Comparison is exact.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("scale factor {0} is not in Z[1/{1}]")]
    ScaleOutsideGroup(String, u64),
    #[error("invalid group descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("cannot parse group element `{0}`")]
    Parse(String),
}

/// The real number `rational + surd * sqrt(d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Weight {
    pub rational: BigRational,
    pub surd: BigRational,
}

impl Weight {
    pub fn rational(q: BigRational) -> Self {
        Weight { rational: q, surd: BigRational::zero() }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct GroupDescriptor {
    weights: Vec<Weight>,
    d: u64,
    p: u64,
}

fn is_squarefree(d: u64) -> bool {
    let mut k = 2u64;
    while k * k <= d {
        if d.is_multiple_of(k * k) {
            return false;
        }
        k += 1;
    }
    true
}

/// Sign of `a + b*sqrt(d)`.
pub fn surd_sign(a: &BigRational, b: &BigRational, d: u64) -> Ordering {
    let sa = a.cmp(&BigRational::zero());
    let sb = b.cmp(&BigRational::zero());
    if sb == Ordering::Equal || d == 0 {
        return sa;
    }
    if sa == Ordering::Equal || sa == sb {
        return sb;
    }
    let a2 = a * a;
    let b2d = b * b * BigRational::from_integer(BigInt::from(d));
    match a2.cmp(&b2d) {
        Ordering::Greater => sa,
        Ordering::Less => sb,
        Ordering::Equal => Ordering::Equal,
    }
}

impl GroupDescriptor {
    /// Build a descriptor; weights must be positive and Z-independent.
    pub fn new(weights: Vec<Weight>, d: u64, p: u64) -> Result<Self, GroupError> {
        if weights.is_empty() || weights.len() > 2 {
            return Err(GroupError::InvalidDescriptor(format!(
                "rank {} not supported (1 or 2)",
                weights.len()
            )));
        }
        if p == 0 {
            return Err(GroupError::InvalidDescriptor("characteristic exponent 0".into()));
        }
        let has_surd = weights.iter().any(|w| !w.surd.is_zero());
        if has_surd && (d < 2 || !is_squarefree(d)) {
            return Err(GroupError::InvalidDescriptor(format!("d={d} must be squarefree and > 1")));
        }
        for w in &weights {
            if surd_sign(&w.rational, &w.surd, d) != Ordering::Greater {
                return Err(GroupError::InvalidDescriptor("weights must be positive".into()));
            }
        }
        if weights.len() == 2 {
            let (a, b) = (&weights[0], &weights[1]);
            let det = &a.rational * &b.surd - &a.surd * &b.rational;
            if det.is_zero() {
                return Err(GroupError::InvalidDescriptor("weights are not independent".into()));
            }
        }
        Ok(GroupDescriptor { weights, d: if has_surd { d } else { 1 }, p })
    }

    /// Rank one group generated by 1.
    pub fn rational(p: u64) -> Arc<Self> {
        Arc::new(
            GroupDescriptor::new(vec![Weight::rational(BigRational::one())], 1, p)
                .expect("valid descriptor"),
        )
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }
    pub fn char_exponent(&self) -> u64 {
        self.p
    }
    pub fn surd(&self) -> u64 {
        self.d
    }
    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    /// Real value of coordinates as `(a, b)` meaning `a + b*sqrt(d)`.
    pub fn real_value(&self, coords: &[BigRational]) -> (BigRational, BigRational) {
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        for (c, w) in coords.iter().zip(&self.weights) {
            a += c * &w.rational;
            b += c * &w.surd;
        }
        (a, b)
    }

    pub fn to_f64(&self, coords: &[BigRational]) -> f64 {
        let (a, b) = self.real_value(coords);
        a.to_f64().unwrap_or(f64::NAN) + b.to_f64().unwrap_or(f64::NAN) * (self.d as f64).sqrt()
    }

    fn cmp_coords(&self, x: &[BigRational], y: &[BigRational]) -> Ordering {
        if self.d == 1 && self.weights.len() == 1 {
            return x[0].cmp(&y[0]);
        }
        let diff: Vec<BigRational> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let (a, b) = self.real_value(&diff);
        surd_sign(&a, &b, self.d)
    }
}

/// Element of the divisible hull of a value group.
#[derive(Clone, Debug)]
pub struct GroupElement {
    desc: Arc<GroupDescriptor>,
    coords: Vec<BigRational>,
}

impl GroupElement {
    pub fn new(desc: &Arc<GroupDescriptor>, coords: Vec<BigRational>) -> Self {
        assert_eq!(coords.len(), desc.rank(), "coordinate count must match rank");
        GroupElement { desc: desc.clone(), coords }
    }
    pub fn zero(desc: &Arc<GroupDescriptor>) -> Self {
        Self::new(desc, vec![BigRational::zero(); desc.rank()])
    }
    /// `q` times the first generator.
    pub fn from_rational(desc: &Arc<GroupDescriptor>, q: BigRational) -> Self {
        let mut c = vec![BigRational::zero(); desc.rank()];
        c[0] = q;
        Self::new(desc, c)
    }
    pub fn from_ratio(desc: &Arc<GroupDescriptor>, num: i64, den: i64) -> Self {
        Self::from_rational(desc, BigRational::new(num.into(), den.into()))
    }
    pub fn unit(desc: &Arc<GroupDescriptor>, k: usize) -> Self {
        let mut c = vec![BigRational::zero(); desc.rank()];
        c[k] = BigRational::one();
        Self::new(desc, c)
    }
    pub fn descriptor(&self) -> &Arc<GroupDescriptor> {
        &self.desc
    }
    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }
    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }
    pub fn is_positive(&self) -> bool {
        self.cmp(&GroupElement::zero(&self.desc)) == Ordering::Greater
    }
    pub fn is_negative(&self) -> bool {
        self.cmp(&GroupElement::zero(&self.desc)) == Ordering::Less
    }
    pub fn to_f64(&self) -> f64 {
        self.desc.to_f64(&self.coords)
    }

    /// Largest power of p appearing in a coordinate denominator.
    pub fn pdenom(&self) -> u32 {
        let p = self.desc.p;
        if p <= 1 {
            return 0;
        }
        let pb = BigInt::from(p);
        let mut worst = 0u32;
        for c in &self.coords {
            let mut den = c.denom().clone();
            let mut k = 0u32;
            while (&den % &pb).is_zero() {
                den /= &pb;
                k += 1;
            }
            worst = worst.max(k);
        }
        worst
    }

    /// `q * self`, rejecting q outside Z[1/p] when p > 1.
    pub fn scale(&self, q: &BigRational) -> Result<Self, GroupError> {
        let p = self.desc.p;
        if p > 1 {
            let mut den = q.denom().clone();
            let pb = BigInt::from(p);
            while (&den % &pb).is_zero() {
                den /= &pb;
            }
            if !den.is_one() {
                return Err(GroupError::ScaleOutsideGroup(q.to_string(), p));
            }
        }
        Ok(self.scale_hull(q))
    }

    /// `q * self` in the divisible hull, without the Z[1/p] restriction.
    pub fn scale_hull(&self, q: &BigRational) -> Self {
        GroupElement { desc: self.desc.clone(), coords: self.coords.iter().map(|c| c * q).collect() }
    }

    pub fn mul_int(&self, k: i64) -> Self {
        self.scale_hull(&BigRational::from_integer(k.into()))
    }

    /// Coefficients `x` with `sum x_i gens_i = self` over Q, if any exist.
    pub fn membership(&self, gens: &[GroupElement]) -> Option<Vec<BigRational>> {
        let r = self.desc.rank();
        let n = gens.len();
        // augmented r x (n+1) system
        let mut m: Vec<Vec<BigRational>> = (0..r)
            .map(|i| {
                let mut row: Vec<BigRational> = gens.iter().map(|g| g.coords[i].clone()).collect();
                row.push(self.coords[i].clone());
                row
            })
            .collect();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..n {
            let Some(piv) = (row..r).find(|&i| !m[i][col].is_zero()) else { continue };
            m.swap(row, piv);
            let inv = m[row][col].recip();
            for x in m[row].iter_mut() {
                *x = &*x * &inv;
            }
            for i in 0..r {
                if i != row && !m[i][col].is_zero() {
                    let f = m[i][col].clone();
                    for j in 0..=n {
                        let delta = &f * &m[row][j];
                        m[i][j] -= delta;
                    }
                }
            }
            pivots.push(col);
            row += 1;
            if row == r {
                break;
            }
        }
        if (row..r).any(|i| !m[i][n].is_zero()) {
            return None;
        }
        let mut x = vec![BigRational::zero(); n];
        for (i, &col) in pivots.iter().enumerate() {
            x[col] = m[i][n].clone();
        }
        Some(x)
    }

    pub fn in_span(&self, gens: &[GroupElement]) -> bool {
        self.membership(gens).is_some()
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}
impl Eq for GroupElement {}
impl Hash for GroupElement {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coords.hash(state)
    }
}
impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert!(Arc::ptr_eq(&self.desc, &other.desc) || *self.desc == *other.desc);
        self.desc.cmp_coords(&self.coords, &other.coords)
    }
}

impl Add for &GroupElement {
    type Output = GroupElement;
    fn add(self, o: &GroupElement) -> GroupElement {
        GroupElement {
            desc: self.desc.clone(),
            coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect(),
        }
    }
}
impl Sub for &GroupElement {
    type Output = GroupElement;
    fn sub(self, o: &GroupElement) -> GroupElement {
        GroupElement {
            desc: self.desc.clone(),
            coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a - b).collect(),
        }
    }
}
impl Neg for &GroupElement {
    type Output = GroupElement;
    fn neg(self) -> GroupElement {
        GroupElement { desc: self.desc.clone(), coords: self.coords.iter().map(|a| -a).collect() }
    }
}
impl Add for GroupElement {
    type Output = GroupElement;
    fn add(self, o: GroupElement) -> GroupElement {
        &self + &o
    }
}
impl Sub for GroupElement {
    type Output = GroupElement;
    fn sub(self, o: GroupElement) -> GroupElement {
        &self - &o
    }
}

pub(crate) fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub(crate) fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, s),
    };
    let q = if let Some((n, d)) = body.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        BigRational::new(n, d)
    } else {
        BigRational::from_integer(body.parse().ok()?)
    };
    Some(if neg { -q } else { q })
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coords.len() == 1 {
            return write!(f, "{}", fmt_rational(&self.coords[0]));
        }
        let mut first = true;
        for (i, c) in self.coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            let body = if mag.is_one() {
                format!("g{}", i + 1)
            } else {
                format!("{}*g{}", fmt_rational(&mag), i + 1)
            };
            match (first, c.is_negative()) {
                (true, false) => write!(f, "{body}")?,
                (true, true) => write!(f, "-{body}")?,
                (false, false) => write!(f, " + {body}")?,
                (false, true) => write!(f, " - {body}")?,
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Parse the text produced by `Display`. A bare rational means a multiple of `g1`.
pub fn parse_element(desc: &Arc<GroupDescriptor>, s: &str) -> Result<GroupElement, GroupError> {
    let err = || GroupError::Parse(s.to_string());
    let mut coords = vec![BigRational::zero(); desc.rank()];
    let compact: String = s.split_whitespace().collect();
    if compact.is_empty() {
        return Err(err());
    }
    let mut terms = Vec::new();
    let mut cur = String::new();
    for (i, ch) in compact.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('/') && !cur.ends_with('*') {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(ch);
    }
    terms.push(cur);
    for t in terms {
        let (sign, body) = if let Some(r) = t.strip_prefix('-') {
            (-1, r)
        } else {
            (1, t.strip_prefix('+').unwrap_or(&t))
        };
        let (q, idx) = if let Some(pos) = body.find('g') {
            let idx: usize = body[pos + 1..].parse().map_err(|_| err())?;
            if idx == 0 || idx > desc.rank() {
                return Err(err());
            }
            let coef = body[..pos].trim_end_matches('*');
            let q = if coef.is_empty() { BigRational::one() } else { parse_rational(coef).ok_or_else(err)? };
            (q, idx - 1)
        } else {
            (parse_rational(body).ok_or_else(err)?, 0)
        };
        coords[idx] += if sign < 0 { -q } else { q };
    }
    Ok(GroupElement::new(desc, coords))
}

/// Group element or +infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtValue {
    Fin(GroupElement),
    Inf,
}

impl ExtValue {
    pub fn is_inf(&self) -> bool {
        matches!(self, ExtValue::Inf)
    }
    pub fn finite(&self) -> Option<&GroupElement> {
        match self {
            ExtValue::Fin(g) => Some(g),
            ExtValue::Inf => None,
        }
    }
    pub fn add(&self, other: &ExtValue) -> ExtValue {
        match (self, other) {
            (ExtValue::Fin(a), ExtValue::Fin(b)) => ExtValue::Fin(a + b),
            _ => ExtValue::Inf,
        }
    }
    pub fn add_g(&self, g: &GroupElement) -> ExtValue {
        match self {
            ExtValue::Fin(a) => ExtValue::Fin(a + g),
            ExtValue::Inf => ExtValue::Inf,
        }
    }
    pub fn min(a: ExtValue, b: ExtValue) -> ExtValue {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl From<GroupElement> for ExtValue {
    fn from(g: GroupElement) -> Self {
        ExtValue::Fin(g)
    }
}

impl PartialOrd for ExtValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ExtValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtValue::Inf, ExtValue::Inf) => Ordering::Equal,
            (ExtValue::Inf, _) => Ordering::Greater,
            (_, ExtValue::Inf) => Ordering::Less,
            (ExtValue::Fin(a), ExtValue::Fin(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Fin(g) => write!(f, "{g}"),
            ExtValue::Inf => write!(f, "inf"),
        }
    }
}

pub fn parse_ext(desc: &Arc<GroupDescriptor>, s: &str) -> Result<ExtValue, GroupError> {
    if s.trim() == "inf" {
        Ok(ExtValue::Inf)
    } else {
        parse_element(desc, s).map(ExtValue::Fin)
    }
}

/// A Z-lattice of coordinate vectors kept in echelon form.
#[derive(Clone, Debug)]
pub struct Lattice {
    desc: Arc<GroupDescriptor>,
    denom: BigInt,
    rows: Vec<Vec<BigInt>>,
}

impl Lattice {
    pub fn new(desc: &Arc<GroupDescriptor>, gens: &[GroupElement]) -> Self {
        let mut denom = BigInt::one();
        for g in gens {
            for c in g.coords() {
                denom = denom.lcm(c.denom());
            }
        }
        let mut rows: Vec<Vec<BigInt>> = gens
            .iter()
            .map(|g| g.coords().iter().map(|c| (c * &denom).to_integer()).collect())
            .filter(|r: &Vec<BigInt>| r.iter().any(|x| !x.is_zero()))
            .collect();
        let r = desc.rank();
        let mut k = 0;
        for col in 0..r {
            loop {
                let nz: Vec<usize> = (k..rows.len()).filter(|&i| !rows[i][col].is_zero()).collect();
                if nz.len() <= 1 {
                    if let Some(&i) = nz.first() {
                        rows.swap(k, i);
                        if rows[k][col].is_negative() {
                            for x in rows[k].iter_mut() {
                                *x = -&*x;
                            }
                        }
                        k += 1;
                    }
                    break;
                }
                let &best = nz.iter().min_by_key(|&&i| rows[i][col].abs()).unwrap();
                for &i in &nz {
                    if i != best {
                        let q = rows[i][col].div_floor(&rows[best][col]);
                        let sub: Vec<BigInt> = rows[best].iter().map(|x| x * &q).collect();
                        for (x, s) in rows[i].iter_mut().zip(sub) {
                            *x -= s;
                        }
                    }
                }
            }
        }
        rows.truncate(k);
        rows.retain(|r| r.iter().any(|x| !x.is_zero()));
        Lattice { desc: desc.clone(), denom, rows }
    }

    /// Rational coordinates of `g` in the echelon basis, if `g` is in its Q-span.
    fn solve(&self, g: &GroupElement) -> Option<Vec<BigRational>> {
        let d = BigRational::from_integer(self.denom.clone());
        let mut w: Vec<BigRational> = g.coords().iter().map(|c| c * &d).collect();
        let mut out = Vec::new();
        for row in &self.rows {
            let col = row.iter().position(|x| !x.is_zero()).unwrap();
            let q = &w[col] / BigRational::from_integer(row[col].clone());
            for (x, r) in w.iter_mut().zip(row) {
                *x -= &q * BigRational::from_integer(r.clone());
            }
            out.push(q);
        }
        if w.iter().all(|x| x.is_zero()) {
            Some(out)
        } else {
            None
        }
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.solve(g).is_some_and(|c| c.iter().all(|q| q.is_integer()))
    }

    /// Least e >= 1 with e*g in the lattice; None if g is outside the Q-span.
    pub fn index_of(&self, g: &GroupElement) -> Option<u64> {
        let c = self.solve(g)?;
        let mut e = BigInt::one();
        for q in c {
            e = e.lcm(q.denom());
        }
        e.to_u64()
    }

    pub fn descriptor(&self) -> &Arc<GroupDescriptor> {
        &self.desc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn rank2() -> Arc<GroupDescriptor> {
        Arc::new(
            GroupDescriptor::new(
                vec![Weight::rational(q(1, 1)), Weight { rational: q(0, 1), surd: q(1, 1) }],
                2,
                1,
            )
            .unwrap(),
        )
    }

    #[test]
    fn compares_surds_exactly() {
        let g = rank2();
        let a = GroupElement::new(&g, vec![q(3, 1), q(0, 1)]);
        let b = GroupElement::new(&g, vec![q(0, 1), q(2, 1)]);
        // 3 > 2*sqrt(2)
        assert_eq!(a.cmp(&b), Ordering::Greater);
        let c = GroupElement::new(&g, vec![q(1, 1), q(1, 1)]);
        let dd = GroupElement::new(&g, vec![q(5, 2), q(0, 1)]);
        // 1 + sqrt 2 < 5/2
        assert_eq!(c.cmp(&dd), Ordering::Less);
    }

    #[test]
    fn membership_and_scale() {
        let g = GroupDescriptor::rational(2);
        let e = GroupElement::from_ratio(&g, 7, 8);
        let gens = [GroupElement::from_ratio(&g, 1, 2), GroupElement::from_ratio(&g, 3, 4)];
        assert!(e.in_span(&gens));
        let lat = Lattice::new(&g, &gens);
        assert!(!lat.contains(&e));
        assert_eq!(lat.index_of(&e), Some(2));
        let g3 = GroupDescriptor::rational(3);
        let one = GroupElement::from_ratio(&g3, 1, 1);
        assert!(matches!(one.scale(&q(1, 2)), Err(GroupError::ScaleOutsideGroup(..))));
        assert_eq!(one.scale(&q(1, 9)).unwrap(), GroupElement::from_ratio(&g3, 1, 9));
        assert_eq!(GroupElement::from_ratio(&g, 3, 8).pdenom(), 3);
    }

    #[test]
    fn irrational_outside_rational_span() {
        let g = rank2();
        let s = GroupElement::unit(&g, 1);
        assert!(!s.in_span(&[GroupElement::unit(&g, 0)]));
        let lat = Lattice::new(&g, &[GroupElement::unit(&g, 0)]);
        assert_eq!(lat.index_of(&s), None);
    }

    #[test]
    fn text_round_trip() {
        let g = rank2();
        for s in ["1/2*g1 + 1/2*g2", "-g2", "3", "0", "g1 - 2/3*g2"] {
            let e = parse_element(&g, s).unwrap();
            let back = parse_element(&g, &e.to_string()).unwrap();
            assert_eq!(e, back);
        }
        assert_eq!(parse_element(&g, "1/2*g1 + 1/2*g2").unwrap().to_string(), "1/2*g1 + 1/2*g2");
        let r = GroupDescriptor::rational(1);
        assert_eq!(parse_element(&r, "-3/2").unwrap().to_string(), "-3/2");
    }

    #[test]
    fn rejects_bad_descriptors() {
        assert!(GroupDescriptor::new(vec![Weight::rational(q(-1, 1))], 1, 1).is_err());
        assert!(GroupDescriptor::new(
            vec![Weight::rational(q(1, 1)), Weight::rational(q(2, 1))],
            1,
            1
        )
        .is_err());
    }
}
