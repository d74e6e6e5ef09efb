//! Key polynomials over the coefficient field: Hasse derivatives, standard
//! expansions, truncated valuations, the invariants (beta, b, eps) and
//! MacLane-style chain extension.
//!
//! A chain is indexed from 1. Index 0 stands for the valuation on constants,
//! read off the coefficient series directly.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::coeff::{binomial, residual_factor, CoeffElem, CoeffError, ResidueField, UPoly};
use crate::series::{parse_series, split_factors, split_signed, GenSeries, SeriesError, SeriesRing};
use crate::value_group::{ExtValue, GroupElement, Lattice};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("the chain is already complete")]
    ChainComplete,
    #[error("valuation indeterminate at the available precision")]
    ValuationIndeterminate,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("unsupported lift: {0}")]
    UnsupportedLift(String),
    #[error("inconsistent chain: {0}")]
    InconsistentChain(String),
    #[error("eps not strictly increasing at index {0}")]
    EpsilonNotIncreasing(usize),
    #[error("limit key polynomial required after index {0}")]
    LimitRequired(usize),
    #[error("no root of positive valuation")]
    NoCenteredRoot,
    #[error("cannot parse polynomial `{0}`")]
    Parse(String),
}

/// Consecutive degree-preserving extensions tolerated before asking for a limit.
const MAX_FLAT_STEPS: usize = 16;

pub(crate) fn ext_mul(v: &ExtValue, k: u64) -> ExtValue {
    match v {
        // callers never scale by 0
        ExtValue::Inf => ExtValue::Inf,
        ExtValue::Fin(g) => ExtValue::Fin(g.mul_int(k as i64)),
    }
}

/// `a - b`; infinite when `a` is, `None` when only `b` is.
pub(crate) fn ext_sub(a: &ExtValue, b: &ExtValue) -> Option<ExtValue> {
    match (a, b) {
        (ExtValue::Inf, _) => Some(ExtValue::Inf),
        (ExtValue::Fin(_), ExtValue::Inf) => None,
        (ExtValue::Fin(x), ExtValue::Fin(y)) => Some(ExtValue::Fin(x - y)),
    }
}

fn ext_div(v: &ExtValue, k: u64) -> ExtValue {
    match v {
        ExtValue::Inf => ExtValue::Inf,
        ExtValue::Fin(g) => ExtValue::Fin(g.scale_hull(&BigRational::new(1.into(), k.into()))),
    }
}

/// Polynomial in `y` with series coefficients, low degree first.
#[derive(Clone, Debug)]
pub struct ValPoly {
    ring: Arc<SeriesRing>,
    coeffs: Vec<GenSeries>,
}

impl ValPoly {
    pub fn new(ring: &Arc<SeriesRing>, mut coeffs: Vec<GenSeries>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_exact_zero()) {
            coeffs.pop();
        }
        ValPoly { ring: ring.clone(), coeffs }
    }
    pub fn zero(ring: &Arc<SeriesRing>) -> Self {
        Self::new(ring, Vec::new())
    }
    pub fn constant(c: GenSeries) -> Self {
        let ring = c.ring().clone();
        Self::new(&ring, vec![c])
    }
    /// The variable `y`.
    pub fn var(ring: &Arc<SeriesRing>) -> Self {
        Self::new(ring, vec![GenSeries::zero(ring), GenSeries::one(ring)])
    }
    /// `y^k`.
    pub fn var_pow(ring: &Arc<SeriesRing>, k: usize) -> Self {
        let mut c = vec![GenSeries::zero(ring); k];
        c.push(GenSeries::one(ring));
        Self::new(ring, c)
    }
    pub fn ring(&self) -> &Arc<SeriesRing> {
        &self.ring
    }
    pub fn coeffs(&self) -> &[GenSeries] {
        &self.coeffs
    }
    pub fn coeff(&self, k: usize) -> GenSeries {
        self.coeffs.get(k).cloned().unwrap_or_else(|| GenSeries::zero(&self.ring))
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
    /// Degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
    pub fn is_monic(&self) -> bool {
        self.coeffs.last().is_some_and(|c| c.is_exact() && c.terms().len() == 1 && c.terms()[0].0.is_zero() && c.terms()[0].1.is_one())
    }
    /// Every coefficient known exactly.
    pub fn is_exact(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_exact())
    }

    pub fn add(&self, o: &ValPoly) -> ValPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        ValPoly::new(&self.ring, (0..n).map(|k| self.coeff(k).add(&o.coeff(k))).collect())
    }
    pub fn sub(&self, o: &ValPoly) -> ValPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        ValPoly::new(&self.ring, (0..n).map(|k| self.coeff(k).sub(&o.coeff(k))).collect())
    }
    pub fn neg(&self) -> ValPoly {
        ValPoly::new(&self.ring, self.coeffs.iter().map(|c| c.neg()).collect())
    }
    pub fn mul(&self, o: &ValPoly) -> ValPoly {
        if self.is_zero() || o.is_zero() {
            return ValPoly::zero(&self.ring);
        }
        let mut out = vec![GenSeries::zero(&self.ring); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        ValPoly::new(&self.ring, out)
    }
    pub fn mul_series(&self, s: &GenSeries) -> ValPoly {
        ValPoly::new(&self.ring, self.coeffs.iter().map(|c| c.mul(s)).collect())
    }
    pub fn pow(&self, n: usize) -> ValPoly {
        let mut acc = ValPoly::constant(GenSeries::one(&self.ring));
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Quotient and remainder by a monic polynomial.
    pub fn divrem_monic(&self, q: &ValPoly) -> (ValPoly, ValPoly) {
        let dq = q.degree();
        let mut r = self.coeffs.clone();
        if r.len() <= dq {
            return (ValPoly::zero(&self.ring), self.clone());
        }
        let mut quo = vec![GenSeries::zero(&self.ring); r.len() - dq];
        for k in (dq..r.len()).rev() {
            let c = r[k].clone();
            if c.is_exact_zero() {
                continue;
            }
            for m in 0..dq {
                r[k - dq + m] = r[k - dq + m].sub(&c.mul(&q.coeffs[m]));
            }
            r[k] = GenSeries::zero(&self.ring);
            quo[k - dq] = c;
        }
        r.truncate(dq);
        (ValPoly::new(&self.ring, quo), ValPoly::new(&self.ring, r))
    }

    pub fn eval(&self, s: &GenSeries) -> GenSeries {
        crate::series::eval_poly(&self.coeffs, s)
    }

    /// Hasse derivative: sum_k C(k, m) a_k y^(k-m).
    pub fn hasse(&self, m: usize) -> ValPoly {
        if m == 0 {
            return self.clone();
        }
        let out = (m..self.coeffs.len()).map(|k| self.coeffs[k].mul_int(&binomial(k as u64, m as u64))).collect();
        ValPoly::new(&self.ring, out)
    }

    /// Equality of coefficients term by term.
    pub fn same_as(&self, o: &ValPoly) -> bool {
        self.coeffs.len() == o.coeffs.len() && self.coeffs.iter().zip(&o.coeffs).all(|(a, b)| a.same_as(b))
    }

    /// Parse `y^2 + t*y + (t + t^2)`: terms are products of a series factor and a power of `y`.
    pub fn parse(ring: &Arc<SeriesRing>, s: &str) -> Result<ValPoly, KeyError> {
        let err = || KeyError::Parse(s.to_string());
        if s.trim().is_empty() {
            return Err(err());
        }
        let mut acc = ValPoly::zero(ring);
        for (neg, piece) in split_signed(s) {
            let mut deg = 0usize;
            let mut coeff = GenSeries::one(ring);
            for f in split_factors(&piece) {
                let f = f.trim();
                if f.is_empty() {
                    return Err(err());
                }
                if f == "y" {
                    deg += 1;
                } else if let Some(k) = f.strip_prefix("y^") {
                    deg += k.trim().parse::<usize>().map_err(|_| err())?;
                } else {
                    let inner = f.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(f);
                    let c = parse_series(ring, ring.tower(), inner).map_err(|_| err())?;
                    coeff = coeff.mul(&c);
                }
            }
            if neg {
                coeff = coeff.neg();
            }
            let mut c = vec![GenSeries::zero(ring); deg];
            c.push(coeff);
            acc = acc.add(&ValPoly::new(ring, c));
        }
        Ok(acc)
    }
}

impl fmt::Display for ValPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<(bool, String)> = Vec::new();
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_exact_zero() {
                continue;
            }
            let mono = match k {
                0 => String::new(),
                1 => "y".to_string(),
                _ => format!("y^{k}"),
            };
            let cs = c.to_string();
            let single = c.is_exact() && c.terms().len() == 1 && c.terms()[0].1.coords().iter().filter(|x| !num_traits::Zero::is_zero(*x)).count() == 1;
            let (neg, mag) = if single || k == 0 {
                match cs.strip_prefix('-') {
                    Some(r) => (true, r.to_string()),
                    None => (false, cs),
                }
            } else {
                (false, format!("({cs})"))
            };
            let body = if k == 0 {
                mag
            } else if mag == "1" {
                mono
            } else {
                format!("{mag}*{mono}")
            };
            parts.push((neg, body));
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        for (i, (neg, body)) in parts.iter().enumerate() {
            match (i == 0, neg) {
                (true, false) => write!(f, "{body}")?,
                (true, true) => write!(f, "-{body}")?,
                (false, false) => write!(f, " + {body}")?,
                (false, true) => write!(f, " - {body}")?,
            }
        }
        Ok(())
    }
}

/// Coefficients `c_j` (degree < deg q) with `f = sum c_j q^j`.
pub fn standard_expansion(f: &ValPoly, q: &ValPoly) -> Vec<ValPoly> {
    let mut out = Vec::new();
    let mut cur = f.clone();
    loop {
        let (quo, rem) = cur.divrem_monic(q);
        out.push(rem);
        if quo.is_zero() {
            break;
        }
        cur = quo;
    }
    out
}

/// Lower convex hull slopes of points `(j, v_j)`, returned as root valuations
/// `(v_left - v_right) / (j_right - j_left)`, left to right.
pub(crate) fn newton_slopes(points: &[(usize, GroupElement)]) -> Vec<GroupElement> {
    let mut hull: Vec<(usize, GroupElement)> = Vec::new();
    for p in points {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // drop b when it lies on or above segment a-p
            let lhs = (&b.1 - &a.1).mul_int((p.0 - a.0) as i64);
            let rhs = (&p.1 - &a.1).mul_int((b.0 - a.0) as i64);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p.clone());
    }
    hull.windows(2)
        .map(|w| (&w[0].1 - &w[1].1).scale_hull(&BigRational::new(1.into(), BigInt::from(w[1].0 - w[0].0))))
        .collect()
}

/// One key polynomial with its invariants.
#[derive(Clone, Debug)]
pub struct ChainEntry {
    pub q: ValPoly,
    pub beta: ExtValue,
    pub b: u32,
    pub eps: ExtValue,
    pub alpha: usize,
}

/// Truncated value of `f` with its argmin set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Truncated {
    pub value: ExtValue,
    pub argmin: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinReport {
    pub truncated: ExtValue,
    pub via_nu: ExtValue,
    pub via_truncated: ExtValue,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttainReport {
    pub truncated: ExtValue,
    pub minimum: ExtValue,
    pub argmin: Vec<usize>,
    /// Indices of S satisfying the divisibility condition, where attainment was checked.
    pub checked: Vec<usize>,
    /// Indices of `checked` for which the condition held only because no smaller index exists.
    pub vacuous: Vec<usize>,
    pub holds: bool,
}

/// Sequence of key polynomials for the valuation induced by one root of a monic
/// polynomial, or supplied explicitly.
#[derive(Clone, Debug)]
pub struct KeyPolyChain {
    ring: Arc<SeriesRing>,
    p_scan: u64,
    lower: Vec<GroupElement>,
    entries: Vec<ChainEntry>,
    explicit: bool,
}

impl KeyPolyChain {
    fn empty(ring: &Arc<SeriesRing>, lower: Vec<GroupElement>, explicit: bool) -> Self {
        let p = ring.residue_char();
        KeyPolyChain { ring: ring.clone(), p_scan: if p == 0 { 1 } else { p }, lower, entries: Vec::new(), explicit }
    }

    /// First entry `Q_1 = y` for the root of `f` with least positive valuation.
    /// `lower` generates the value group of the coefficient field.
    pub fn init(f: &ValPoly, lower: Vec<GroupElement>) -> Result<Self, KeyError> {
        let mut chain = Self::empty(f.ring(), lower, false);
        let mut points = Vec::new();
        for (j, c) in f.coeffs().iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            points.push((j, c.val().map_err(|_| KeyError::ValuationIndeterminate)?));
        }
        let zero_root = f.coeff(0).is_exact_zero();
        let beta = newton_slopes(&points)
            .into_iter()
            .filter(|s| s.is_positive())
            .min()
            .map(ExtValue::Fin)
            .or(if zero_root { Some(ExtValue::Inf) } else { None })
            .ok_or(KeyError::NoCenteredRoot)?;
        let q = ValPoly::var(f.ring());
        chain.push_entry(q, beta, 1)?;
        Ok(chain)
    }

    /// Chain given directly; the valuation is the last truncation.
    pub fn explicit(ring: &Arc<SeriesRing>, lower: Vec<GroupElement>, items: Vec<(ValPoly, ExtValue)>) -> Result<Self, KeyError> {
        let mut chain = Self::empty(ring, lower, true);
        let mut prev_deg = 1usize;
        for (idx, (q, beta)) in items.into_iter().enumerate() {
            if !q.is_monic() {
                return Err(KeyError::InconsistentChain(format!("Q_{} is not monic", idx + 1)));
            }
            if idx == 0 && q.degree() != 1 {
                return Err(KeyError::InconsistentChain("Q_1 must have degree 1".into()));
            }
            let d = q.degree();
            if idx > 0 && (d % prev_deg != 0) {
                return Err(KeyError::InconsistentChain(format!("deg Q_{} not a multiple of deg Q_{}", idx + 1, idx)));
            }
            let alpha = if idx == 0 { 1 } else { d / prev_deg };
            prev_deg = d;
            chain.push_entry(q, beta, alpha)?;
        }
        if chain.entries.is_empty() {
            return Err(KeyError::InconsistentChain("empty chain".into()));
        }
        Ok(chain)
    }

    fn push_entry(&mut self, q: ValPoly, beta: ExtValue, alpha: usize) -> Result<(), KeyError> {
        let i = self.entries.len() + 1;
        let (b, eps) = self.eps_for(&q, &beta, i)?;
        if let Some(prev) = self.entries.last() {
            if eps <= prev.eps {
                return Err(KeyError::EpsilonNotIncreasing(i));
            }
        }
        self.entries.push(ChainEntry { q, beta, b, eps, alpha });
        Ok(())
    }

    pub fn ring(&self) -> &Arc<SeriesRing> {
        &self.ring
    }
    pub fn entries(&self) -> &[ChainEntry] {
        &self.entries
    }
    /// Entry `i`, 1-based.
    pub fn entry(&self, i: usize) -> &ChainEntry {
        &self.entries[i - 1]
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }
    /// Last key polynomial has infinite value.
    pub fn is_complete(&self) -> bool {
        self.entries.last().is_some_and(|e| e.beta.is_inf())
    }
    pub fn p_scan(&self) -> u64 {
        self.p_scan
    }
    pub fn lower(&self) -> &[GroupElement] {
        &self.lower
    }

    /// Standard expansion of `f` in `Q_i`.
    pub fn standard_expansion(&self, f: &ValPoly, i: usize) -> Vec<ValPoly> {
        standard_expansion(f, &self.entry(i).q)
    }

    /// nu_i(f) = min_j { j beta_i + nu_{i-1}(c_j) } with its argmin set.
    pub fn truncated_val(&self, f: &ValPoly, i: usize) -> Result<Truncated, KeyError> {
        if i == 0 {
            if f.degree() > 0 {
                return Err(KeyError::InconsistentChain("non-constant polynomial at index 0".into()));
            }
            let c = f.coeff(0);
            let value = c.val_ext().map_err(|_| KeyError::ValuationIndeterminate)?;
            let argmin = if value.is_inf() { Vec::new() } else { vec![0] };
            return Ok(Truncated { value, argmin });
        }
        let beta = self.entry(i).beta.clone();
        let mut best = ExtValue::Inf;
        let mut argmin = Vec::new();
        for (j, c) in self.standard_expansion(f, i).iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = self.truncated_val(c, i - 1)?.value;
            let t = if j == 0 { v } else { v.add(&ext_mul(&beta, j as u64)) };
            if t.is_inf() {
                continue;
            }
            if t < best {
                best = t;
                argmin = vec![j];
            } else if t == best {
                argmin.push(j);
            }
        }
        Ok(Truncated { value: best, argmin })
    }

    /// nu(f) as far as the chain certifies it.
    pub fn valuation(&self, f: &ValPoly) -> Result<ExtValue, KeyError> {
        let m = self.entries.len();
        if self.explicit {
            return Ok(self.truncated_val(f, m)?.value);
        }
        let last = &self.entries[m - 1];
        if last.beta.is_inf() {
            let (_, r) = f.divrem_monic(&last.q);
            if r.is_zero() {
                return Ok(ExtValue::Inf);
            }
            return Ok(self.truncated_val(&r, m - 1)?.value);
        }
        if f.degree() < last.q.degree() {
            return Ok(self.truncated_val(f, m - 1)?.value);
        }
        let t = self.truncated_val(f, m)?;
        if t.argmin.len() == 1 {
            return Ok(t.value);
        }
        Err(KeyError::ValuationIndeterminate)
    }

    /// (b, eps) for a polynomial of index `i` and value `beta`; derivatives are
    /// valued with nu_{i-1}.
    fn eps_for(&self, q: &ValPoly, beta: &ExtValue, i: usize) -> Result<(u32, ExtValue), KeyError> {
        let d = q.degree() as u64;
        let mut best: Option<(u32, ExtValue)> = None;
        let mut b = 0u32;
        let mut pb = 1u64;
        while pb <= d {
            let dq = q.hasse(pb as usize);
            let dv = self.truncated_val(&dq, i - 1)?.value;
            if let Some(diff) = ext_sub(beta, &dv) {
                let cand = ext_div(&diff, pb);
                if best.as_ref().is_none_or(|(_, e)| cand > *e) {
                    best = Some((b, cand));
                }
            }
            if self.p_scan == 1 {
                break;
            }
            b += 1;
            pb *= self.p_scan;
        }
        best.ok_or_else(|| KeyError::InconsistentChain("all p-power derivatives vanish".into()))
    }

    /// (b_i, eps_i) recomputed from Q_i and beta_i.
    pub fn epsilon_invariants(&self, i: usize) -> Result<(u32, ExtValue), KeyError> {
        let e = self.entry(i);
        self.eps_for(&e.q, &e.beta, i)
    }

    /// eps for Q_i evaluated with a different value in place of beta_i.
    pub fn epsilon_with(&self, i: usize, beta: &ExtValue) -> Result<(u32, ExtValue), KeyError> {
        self.eps_for(&self.entry(i).q, beta, i)
    }

    /// min over p-powers q of nu(d_{p^q} Q_i) + p^q beta.
    pub fn derivative_floor(&self, i: usize, beta: &GroupElement) -> Result<ExtValue, KeyError> {
        let q = &self.entry(i).q;
        let d = q.degree() as u64;
        let mut best = ExtValue::Inf;
        let mut pb = 1u64;
        while pb <= d {
            let dv = self.truncated_val(&q.hasse(pb as usize), i - 1)?.value;
            best = ExtValue::min(best, dv.add_g(&beta.mul_int(pb as i64)));
            if self.p_scan == 1 {
                break;
            }
            pb *= self.p_scan;
        }
        Ok(best)
    }

    /// Generators of the value group reached before index `i` (values of the
    /// coefficient field and beta_1..beta_{i-1}).
    pub fn group_gens(&self, i: usize) -> Vec<GroupElement> {
        let mut g = self.lower.clone();
        for e in &self.entries[..i.saturating_sub(1).min(self.entries.len())] {
            if let Some(b) = e.beta.finite() {
                g.push(b.clone());
            }
        }
        g
    }

    fn lattice(&self, i: usize) -> Lattice {
        Lattice::new(self.ring.descriptor(), &self.group_gens(i))
    }

    /// Least e >= 1 with e*beta_i in the group reached before index i.
    pub fn ramification(&self, i: usize) -> Option<u64> {
        let b = self.entry(i).beta.finite()?;
        self.lattice(i).index_of(b)
    }

    /// Write `gamma` as `g0 + sum m_l beta_l` (l <= level, 0 <= m_l < e_l) with
    /// g0 in the coefficient lattice.
    pub fn standard_monomial(&self, gamma: &GroupElement, level: usize) -> Option<(GroupElement, Vec<u64>)> {
        if level == 0 {
            return self.lattice(1).contains(gamma).then(|| (gamma.clone(), Vec::new()));
        }
        let beta = self.entry(level).beta.finite()?.clone();
        let e = self.ramification(level)?;
        let below = self.lattice(level);
        for k in 0..e {
            let rest = gamma - &beta.mul_int(k as i64);
            if below.contains(&rest) {
                let (g0, mut exps) = self.standard_monomial(&rest, level - 1)?;
                exps.push(k);
                return Some((g0, exps));
            }
        }
        None
    }

    fn monomial_poly(&self, g0: &GroupElement, exps: &[u64]) -> ValPoly {
        let mut acc = ValPoly::constant(GenSeries::var_pow(&self.ring, g0.clone()));
        for (l, &k) in exps.iter().enumerate() {
            if k > 0 {
                acc = acc.mul(&self.entries[l].q.pow(k as usize));
            }
        }
        acc
    }

    /// Leading coefficient of `f(u)`, checked against the expected value.
    fn lead_at(&self, f: &ValPoly, u: &GenSeries, expected: &ExtValue, rf: &ResidueField) -> Result<CoeffElem, KeyError> {
        let s = f.eval(u);
        let (e, c) = s.leading_term().map_err(|_| KeyError::ValuationIndeterminate)?;
        if ExtValue::Fin(e.clone()) != *expected {
            return Err(KeyError::InconsistentChain(format!("approximant gives value {e} where {expected} was expected")));
        }
        Ok(rf.residue_of(&c))
    }

    /// Append Q_{m+1} for the root of `f` followed by this chain. `u` must be an
    /// approximation of that root at which every polynomial of degree < deg Q_m
    /// takes its true value (a partial development past eps_{m-1} will do).
    pub fn extend(&self, f: &ValPoly, u: &GenSeries, rf: &mut ResidueField) -> Result<KeyPolyChain, KeyError> {
        let m = self.entries.len();
        let last = self.entries[m - 1].clone();
        let beta = last.beta.finite().ok_or(KeyError::ChainComplete)?.clone();
        if self.explicit {
            return Err(KeyError::ChainComplete);
        }
        let cs = self.standard_expansion(f, m);
        let t = self.truncated_val(f, m)?;
        let lambda = t.value.clone();
        if lambda.is_inf() {
            return Err(KeyError::ChainComplete);
        }
        let e = self.ramification(m).ok_or_else(|| KeyError::UnsupportedLift(format!("{beta} outside the rational span")))?;
        let ebeta = beta.mul_int(e as i64);
        let (pg0, pexp) = self
            .standard_monomial(&ebeta, m - 1)
            .ok_or_else(|| KeyError::UnsupportedLift(format!("no standard monomial of value {ebeta}")))?;
        let pi = self.monomial_poly(&pg0, &pexp);
        let lc_pi = self.lead_at(&pi, u, &ExtValue::Fin(ebeta.clone()), rf)?;
        let j0 = t.argmin[0];
        let jmax = *t.argmin.last().unwrap();
        let smax = (jmax - j0) / e as usize;
        let res_tower = rf.tower().clone();
        let mut rpoly: UPoly = vec![CoeffElem::zero(&res_tower); smax + 1];
        for &j in &t.argmin {
            let s = (j - j0) / e as usize;
            let cj = &cs[j];
            let expected = ExtValue::Fin(lambda.finite().unwrap() - &beta.mul_int(j as i64));
            let lc = self.lead_at(cj, u, &expected, rf)?;
            rpoly[s] = &lc * &lc_pi.pow(s as u64);
        }
        let (t2, _zeta, psi) = residual_factor(&res_tower, &rpoly)?;
        rf.adopt(&t2);
        let fdeg = psi.len() - 1;
        let new_deg = e as usize * fdeg * last.q.degree();
        let alpha = e as usize * fdeg;
        if new_deg > f.degree() {
            return Err(KeyError::InconsistentChain(format!("next key polynomial would have degree {new_deg}")));
        }
        let mut next = self.clone();
        if new_deg == f.degree() {
            next.push_entry(f.clone(), ExtValue::Inf, alpha)?;
            return Ok(next);
        }
        if alpha == 1 && self.entries.iter().rev().take_while(|x| x.alpha == 1).count() >= MAX_FLAT_STEPS {
            return Err(KeyError::LimitRequired(m));
        }
        // Q_{m+1} = Q_m^{ef} + sum_{s<f} kappa_s pi_s Q_m^{es}
        let mut q = last.q.pow(alpha);
        for (s, psi_s) in psi.iter().enumerate().take(fdeg) {
            if psi_s.is_zero() {
                continue;
            }
            let gamma = ebeta.mul_int((fdeg - s) as i64);
            let (g0, exps) = self
                .standard_monomial(&gamma, m - 1)
                .ok_or_else(|| KeyError::UnsupportedLift(format!("no standard monomial of value {gamma}")))?;
            if g0.is_negative() {
                return Err(KeyError::UnsupportedLift(format!("lift needs the monomial of negative value {g0}")));
            }
            let pis = self.monomial_poly(&g0, &exps);
            let lc_pis = self.lead_at(&pis, u, &ExtValue::Fin(gamma.clone()), rf)?;
            let kappa = (psi_s * &lc_pi.pow((fdeg - s) as u64)).div(&lc_pis)?;
            let kappa = GenSeries::constant(&self.ring, rf.lift(&kappa));
            q = q.add(&pis.mul(&last.q.pow(e as usize * s)).mul_series(&kappa));
        }
        let base_val = self.truncated_val(&q, m)?.value;
        if base_val != ExtValue::Fin(ebeta.mul_int(fdeg as i64)) {
            return Err(KeyError::InconsistentChain(format!("lifted polynomial has truncated value {base_val}")));
        }
        // value of Q_{m+1}: first Newton slope of f above the truncated value
        let mut points = Vec::new();
        let ds = standard_expansion(f, &q);
        for (k, d) in ds.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            match self.truncated_val(d, m)?.value {
                ExtValue::Fin(v) => points.push((k, v)),
                ExtValue::Inf => {}
            }
        }
        let floor = base_val.finite().unwrap().clone();
        let nb = newton_slopes(&points)
            .into_iter()
            .filter(|s| *s > floor)
            .min()
            .map(ExtValue::Fin)
            .or(if ds[0].is_zero() { Some(ExtValue::Inf) } else { None })
            .ok_or_else(|| KeyError::InconsistentChain("no Newton slope above the truncated value".into()))?;
        next.push_entry(q, nb, alpha)?;
        Ok(next)
    }

    /// Min check at index i with beta = eps_i: nu_i(h) against
    /// min_a { nu(d_a h) + a beta } and min_a { nu_i(d_a h) + a beta }.
    pub fn derivative_min_check(&self, h: &ValPoly, i: usize) -> Result<MinReport, KeyError> {
        let eps = self.entry(i).eps.clone();
        let truncated = self.truncated_val(h, i)?.value;
        let mut via_nu = ExtValue::Inf;
        let mut via_truncated = ExtValue::Inf;
        for a in 0..=h.degree() {
            let d = h.hasse(a);
            if d.is_zero() {
                continue;
            }
            let shift = if a == 0 { None } else { Some(ext_mul(&eps, a as u64)) };
            let add = |v: ExtValue| match &shift {
                None => v,
                Some(s) => v.add(s),
            };
            via_nu = ExtValue::min(via_nu, add(self.valuation(&d)?));
            via_truncated = ExtValue::min(via_truncated, add(self.truncated_val(&d, i)?.value));
        }
        let holds = truncated == via_nu && truncated == via_truncated;
        Ok(MinReport { truncated, via_nu, via_truncated, holds })
    }

    /// nu_i(f) - nu_i(d_{p^b} f) <= p^b eps_i for every p^b <= deg f.
    pub fn derivative_gap_check(&self, f: &ValPoly, i: usize) -> Result<bool, KeyError> {
        let eps = self.entry(i).eps.clone();
        let vf = self.truncated_val(f, i)?.value;
        let mut pb = 1u64;
        while pb <= f.degree() as u64 {
            let vd = self.truncated_val(&f.hasse(pb as usize), i)?.value;
            if let Some(diff) = ext_sub(&vf, &vd) {
                if diff > ext_mul(&eps, pb) {
                    return Ok(false);
                }
            }
            if self.p_scan == 1 {
                break;
            }
            pb *= self.p_scan;
        }
        Ok(true)
    }

    /// The minimum formula min_j { nu_i(d_{j p^{b_i}} f) + j p^{b_i} eps_i } and its
    /// attainment at every index of S_i meeting the divisibility condition.
    pub fn attained_min_check(&self, f: &ValPoly, i: usize) -> Result<AttainReport, KeyError> {
        let entry = self.entry(i);
        let pb = self.p_scan.pow(entry.b);
        let t = self.truncated_val(f, i)?;
        let s_i = self.standard_expansion(f, i).len() - 1;
        let mut terms = Vec::with_capacity(s_i + 1);
        for j in 0..=s_i {
            let d = f.hasse(j * pb as usize);
            let v = if d.is_zero() { ExtValue::Inf } else { self.truncated_val(&d, i)?.value };
            let v = if j == 0 { v } else { v.add(&ext_mul(&entry.eps, j as u64 * pb)) };
            terms.push(v);
        }
        let minimum = terms.iter().min().cloned().unwrap_or(ExtValue::Inf);
        let mut checked = Vec::new();
        let mut vacuous = Vec::new();
        for &j in &t.argmin {
            let smaller: Vec<usize> = t.argmin.iter().copied().filter(|&x| x < j).collect();
            let ok = if self.p_scan == 1 {
                true
            } else {
                let p = self.p_scan as usize;
                let mut e = 0u32;
                let mut u = j;
                while u > 0 && u % p == 0 {
                    u /= p;
                    e += 1;
                }
                let pe1 = p.pow(e + 1);
                smaller.iter().all(|x| x % pe1 == 0)
            };
            if ok {
                if smaller.is_empty() {
                    vacuous.push(j);
                }
                checked.push(j);
            }
        }
        let holds = minimum == t.value && checked.iter().all(|&j| terms.get(j).is_some_and(|v| *v == t.value));
        Ok(AttainReport { truncated: t.value, minimum, argmin: t.argmin, checked, vacuous, holds })
    }
}

impl fmt::Display for KeyPolyChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.entries.iter().enumerate() {
            writeln!(f, "{}: Q_{}={} beta={} b={} eps={} alpha={}", k + 1, k + 1, e.q, e.beta, e.b, e.eps, e.alpha)?;
        }
        Ok(())
    }
}
