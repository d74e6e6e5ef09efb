//! Truncated generalized power series `sum a_g t^g` (or `p^g`) with explicit precision.
//!
//! Every series is a finite list of terms plus a precision: terms at exponents
//! the precision does not cover are unknown. In `PAdic` mode series are kept in
//! carried normal form, with digit coefficients in the exact lifted tower.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::coeff::{parse_coeff, BaseRing, CoeffElem, CoeffError, Tower, WittRing};
use crate::value_group::{fmt_rational, parse_element, ExtValue, GroupDescriptor, GroupElement, GroupError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("valuation indeterminate at the available precision")]
    ValuationIndeterminate,
    #[error("precision exceeded: requested {0}, known up to {1}")]
    PrecisionExceeded(String, String),
    #[error("series is not a unit")]
    NonUnit,
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("cannot parse series `{0}`")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    TAdic,
    PAdic,
}

/// Shared description of a series ring.
#[derive(Debug, PartialEq, Eq)]
pub struct SeriesRing {
    desc: Arc<GroupDescriptor>,
    mode: Mode,
    tower: Arc<Tower>,
    witt_n: u32,
}

impl SeriesRing {
    pub fn t_adic(desc: &Arc<GroupDescriptor>, tower: &Arc<Tower>) -> Arc<Self> {
        Arc::new(SeriesRing { desc: desc.clone(), mode: Mode::TAdic, tower: tower.clone(), witt_n: 0 })
    }
    /// Mixed-characteristic ring; the first group generator is v(p) = 1.
    pub fn p_adic(desc: &Arc<GroupDescriptor>, witt: &WittRing) -> Arc<Self> {
        Arc::new(SeriesRing {
            desc: desc.clone(),
            mode: Mode::PAdic,
            tower: witt.integral_tower().clone(),
            witt_n: witt.precision(),
        })
    }
    pub fn descriptor(&self) -> &Arc<GroupDescriptor> {
        &self.desc
    }
    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn tower(&self) -> &Arc<Tower> {
        &self.tower
    }
    pub fn witt_precision(&self) -> u32 {
        self.witt_n
    }
    pub fn var(&self) -> &'static str {
        match self.mode {
            Mode::TAdic => "t",
            Mode::PAdic => "p",
        }
    }
    /// Characteristic p of the residue field (0 for Q).
    pub fn residue_char(&self) -> u64 {
        self.tower.base().residue_char()
    }
    fn p(&self) -> u64 {
        match self.tower.base() {
            BaseRing::Integer(p) => *p,
            _ => 0,
        }
    }
}

/// Precision: the set of exponents `< at` (or `<= at` when closed) is known.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Prec {
    pub at: ExtValue,
    pub closed: bool,
}

impl Prec {
    pub fn exact() -> Self {
        Prec { at: ExtValue::Inf, closed: false }
    }
    pub fn open(g: GroupElement) -> Self {
        Prec { at: ExtValue::Fin(g), closed: false }
    }
    pub fn closed_at(g: GroupElement) -> Self {
        Prec { at: ExtValue::Fin(g), closed: true }
    }
    pub fn is_exact(&self) -> bool {
        self.at.is_inf()
    }
    pub fn knows(&self, g: &GroupElement) -> bool {
        match &self.at {
            ExtValue::Inf => true,
            ExtValue::Fin(a) => g < a || (self.closed && g == a),
        }
    }
    fn key_cmp(&self, o: &Prec) -> std::cmp::Ordering {
        self.at.cmp(&o.at).then(self.closed.cmp(&o.closed))
    }
    pub fn min(a: Prec, b: Prec) -> Prec {
        if a.key_cmp(&b) == std::cmp::Ordering::Greater {
            b
        } else {
            a
        }
    }
    pub fn le(&self, o: &Prec) -> bool {
        self.key_cmp(o) != std::cmp::Ordering::Greater
    }
    fn shift(&self, v: &ExtValue) -> Prec {
        Prec { at: self.at.add(v), closed: self.closed }
    }
}

#[derive(Clone, Debug)]
pub struct GenSeries {
    ring: Arc<SeriesRing>,
    terms: Vec<(GroupElement, CoeffElem)>,
    prec: Prec,
}

impl GenSeries {
    pub fn zero(ring: &Arc<SeriesRing>) -> Self {
        GenSeries { ring: ring.clone(), terms: Vec::new(), prec: Prec::exact() }
    }
    pub fn one(ring: &Arc<SeriesRing>) -> Self {
        Self::constant(ring, CoeffElem::one(&ring.tower))
    }
    pub fn from_int(ring: &Arc<SeriesRing>, k: i64) -> Self {
        Self::constant(ring, CoeffElem::from_int(&ring.tower, k))
    }
    pub fn constant(ring: &Arc<SeriesRing>, c: CoeffElem) -> Self {
        Self::monomial(ring, GroupElement::zero(&ring.desc), c)
    }
    pub fn monomial(ring: &Arc<SeriesRing>, e: GroupElement, c: CoeffElem) -> Self {
        Self::from_terms(ring, vec![(e, c)], Prec::exact())
    }
    /// `t^e` with coefficient 1.
    pub fn var_pow(ring: &Arc<SeriesRing>, e: GroupElement) -> Self {
        Self::monomial(ring, e, CoeffElem::one(&ring.tower))
    }

    /// Build from arbitrary terms: merges, drops zeros and unknown terms, normalizes.
    pub fn from_terms(ring: &Arc<SeriesRing>, terms: Vec<(GroupElement, CoeffElem)>, prec: Prec) -> Self {
        let mut map: BTreeMap<GroupElement, CoeffElem> = BTreeMap::new();
        for (e, c) in terms {
            if c.is_zero() {
                continue;
            }
            match map.get_mut(&e) {
                Some(x) => *x = &*x + &c,
                None => {
                    map.insert(e, c);
                }
            }
        }
        let s = GenSeries {
            ring: ring.clone(),
            terms: map.into_iter().filter(|(e, c)| !c.is_zero() && prec.knows(e)).collect(),
            prec,
        };
        if ring.mode == Mode::PAdic {
            s.normalize_raw()
        } else {
            s
        }
    }

    pub fn ring(&self) -> &Arc<SeriesRing> {
        &self.ring
    }
    pub fn terms(&self) -> &[(GroupElement, CoeffElem)] {
        &self.terms
    }
    pub fn prec(&self) -> &Prec {
        &self.prec
    }
    pub fn is_exact(&self) -> bool {
        self.prec.is_exact()
    }
    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.prec.is_exact()
    }
    /// No known nonzero term.
    pub fn is_zero_to_prec(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same terms, declared exact.
    pub fn to_exact(&self) -> Self {
        GenSeries { ring: self.ring.clone(), terms: self.terms.clone(), prec: Prec::exact() }
    }

    /// Lower the precision (never raises it).
    pub fn with_prec(&self, p: Prec) -> Self {
        let prec = Prec::min(self.prec.clone(), p);
        GenSeries {
            ring: self.ring.clone(),
            terms: self.terms.iter().filter(|(e, _)| prec.knows(e)).cloned().collect(),
            prec,
        }
    }

    /// Least exponent of the support.
    pub fn val(&self) -> Result<GroupElement, SeriesError> {
        self.terms.first().map(|t| t.0.clone()).ok_or(SeriesError::ValuationIndeterminate)
    }

    /// Valuation with v(0) = +inf for the exact zero series.
    pub fn val_ext(&self) -> Result<ExtValue, SeriesError> {
        match self.terms.first() {
            Some(t) => Ok(ExtValue::Fin(t.0.clone())),
            None if self.prec.is_exact() => Ok(ExtValue::Inf),
            None => Err(SeriesError::ValuationIndeterminate),
        }
    }

    /// Guaranteed lower bound for the valuation.
    pub fn val_lower(&self) -> ExtValue {
        match self.terms.first() {
            Some(t) => ExtValue::Fin(t.0.clone()),
            None => self.prec.at.clone(),
        }
    }

    pub fn leading_term(&self) -> Result<(GroupElement, CoeffElem), SeriesError> {
        self.terms.first().cloned().ok_or(SeriesError::ValuationIndeterminate)
    }

    pub fn coeff_at(&self, e: &GroupElement) -> Option<&CoeffElem> {
        self.terms.iter().find(|t| &t.0 == e).map(|t| &t.1)
    }

    fn check_known(&self, beta: &GroupElement, need_closed: bool) -> Result<(), SeriesError> {
        let ok = match &self.prec.at {
            ExtValue::Inf => true,
            ExtValue::Fin(a) => beta < a || (beta == a && (!need_closed || self.prec.closed)),
        };
        if ok {
            Ok(())
        } else {
            Err(SeriesError::PrecisionExceeded(
                format!("{beta}{}", if need_closed { "]" } else { "" }),
                self.prec.at.to_string(),
            ))
        }
    }

    /// f(beta): terms below beta.
    pub fn truncate_open(&self, beta: &GroupElement) -> Result<Self, SeriesError> {
        self.check_known(beta, false)?;
        Ok(GenSeries {
            ring: self.ring.clone(),
            terms: self.terms.iter().filter(|(e, _)| e < beta).cloned().collect(),
            prec: Prec::open(beta.clone()),
        })
    }

    /// f[beta]: terms up to and including beta.
    pub fn truncate_closed(&self, beta: &GroupElement) -> Result<Self, SeriesError> {
        self.check_known(beta, true)?;
        Ok(GenSeries {
            ring: self.ring.clone(),
            terms: self.terms.iter().filter(|(e, _)| e <= beta).cloned().collect(),
            prec: Prec::closed_at(beta.clone()),
        })
    }

    /// f[beta, beta'[ = f(beta') - f(beta).
    pub fn slice(&self, beta: &GroupElement, beta2: &GroupElement) -> Result<Self, SeriesError> {
        self.check_known(beta2, false)?;
        Ok(GenSeries {
            ring: self.ring.clone(),
            terms: self.terms.iter().filter(|(e, _)| e >= beta && e < beta2).cloned().collect(),
            prec: Prec::open(beta2.clone()),
        })
    }

    /// Terms in [beta, beta'] (closed on both ends), as an exact series.
    pub fn slice_closed(&self, beta: &GroupElement, beta2: &GroupElement) -> Self {
        GenSeries {
            ring: self.ring.clone(),
            terms: self.terms.iter().filter(|(e, _)| e >= beta && e <= beta2).cloned().collect(),
            prec: Prec::exact(),
        }
    }

    fn raw(&self, terms: Vec<(GroupElement, CoeffElem)>, prec: Prec) -> Self {
        Self::from_terms(&self.ring, terms, prec)
    }

    pub fn add(&self, o: &GenSeries) -> GenSeries {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        self.raw(terms, Prec::min(self.prec.clone(), o.prec.clone()))
    }

    pub fn sub(&self, o: &GenSeries) -> GenSeries {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().map(|(e, c)| (e.clone(), c.neg())));
        self.raw(terms, Prec::min(self.prec.clone(), o.prec.clone()))
    }

    pub fn neg(&self) -> GenSeries {
        self.raw(self.terms.iter().map(|(e, c)| (e.clone(), c.neg())).collect(), self.prec.clone())
    }

    pub fn mul(&self, o: &GenSeries) -> GenSeries {
        if self.is_exact_zero() || o.is_exact_zero() {
            return GenSeries::zero(&self.ring);
        }
        let prec = Prec::min(self.prec.shift(&o.val_lower()), o.prec.shift(&self.val_lower()));
        let mut map: BTreeMap<GroupElement, CoeffElem> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e = e1 + e2;
                if !prec.knows(&e) {
                    continue;
                }
                let c = c1 * c2;
                match map.get_mut(&e) {
                    Some(x) => *x = &*x + &c,
                    None => {
                        map.insert(e, c);
                    }
                }
            }
        }
        self.raw(map.into_iter().collect(), prec)
    }

    pub fn mul_coeff(&self, c: &CoeffElem) -> GenSeries {
        if c.is_zero() {
            return GenSeries::zero(&self.ring);
        }
        self.raw(self.terms.iter().map(|(e, a)| (e.clone(), a * c)).collect(), self.prec.clone())
    }

    pub fn mul_int(&self, k: &BigInt) -> GenSeries {
        let s = BigRational::from_integer(k.clone());
        self.raw(self.terms.iter().map(|(e, a)| (e.clone(), a.scale(&s))).collect(), self.prec.clone())
    }

    /// Multiply by t^g.
    pub fn shift(&self, g: &GroupElement) -> GenSeries {
        GenSeries {
            ring: self.ring.clone(),
            terms: self.terms.iter().map(|(e, c)| (e + g, c.clone())).collect(),
            prec: self.prec.shift(&ExtValue::Fin(g.clone())),
        }
    }

    pub fn pow(&self, n: u32) -> GenSeries {
        let mut acc = GenSeries::one(&self.ring);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Inverse of a unit, to `target` precision (or the input's own precision).
    pub fn inv(&self, target: Option<&GroupElement>) -> Result<GenSeries, SeriesError> {
        let (e0, c0) = self.leading_term()?;
        if !e0.is_zero() {
            return Err(SeriesError::NonUnit);
        }
        let zero = GroupElement::zero(&self.ring.desc);
        let goal = match (target, &self.prec.at) {
            (Some(t), ExtValue::Fin(p)) => Prec::open(if t < p { t.clone() } else { p.clone() }),
            (Some(t), ExtValue::Inf) => Prec::open(t.clone()),
            (None, ExtValue::Fin(p)) => Prec::open(p.clone()),
            (None, ExtValue::Inf) => Prec::exact(),
        };
        let (scale, g) = match self.ring.mode {
            Mode::TAdic => {
                let ci = c0.inv().map_err(|_| SeriesError::NonUnit)?;
                let s = GenSeries::constant(&self.ring, ci);
                let g = self.mul(&s);
                (s, g)
            }
            Mode::PAdic => {
                let p = self.ring.p();
                let residue = c0.tower().rebase(BaseRing::Prime(p));
                let r = CoeffElem::from_coords(&residue, c0.coords().to_vec());
                let ri = r.inv().map_err(|_| SeriesError::NonUnit)?;
                let d = CoeffElem::from_coords(c0.tower(), ri.coords().to_vec());
                let s = GenSeries::constant(&self.ring, d);
                let g = self.mul(&s);
                (s, g)
            }
        };
        // g = 1 + h with v(h) > 0
        let h = GenSeries {
            ring: self.ring.clone(),
            terms: g.terms.iter().filter(|(e, _)| *e != zero).cloned().collect(),
            prec: g.prec.clone(),
        };
        if h.is_exact_zero() {
            return Ok(scale);
        }
        if goal.is_exact() {
            return Err(SeriesError::PrecisionExceeded("inf".into(), "series inverse".into()));
        }
        let mut signed: Vec<(GroupElement, CoeffElem)> = vec![(zero, CoeffElem::one(&self.ring.tower))];
        let mut hk = GenSeries::one(&self.ring);
        let mut k = 0u64;
        let mut prec = goal.clone();
        loop {
            hk = hk.mul(&h);
            k += 1;
            prec = Prec::min(prec, hk.prec.clone());
            if hk.terms.iter().all(|(e, _)| !goal.knows(e)) {
                break;
            }
            for (e, c) in &hk.terms {
                signed.push((e.clone(), if k % 2 == 1 { c.neg() } else { c.clone() }));
            }
        }
        let series = self.raw(signed, prec);
        Ok(series.mul(&scale).with_prec(goal))
    }

    /// Carried normal form (P_ADIC only; identity otherwise).
    pub fn normalize_pseries(&self) -> GenSeries {
        if self.ring.mode != Mode::PAdic {
            return self.clone();
        }
        self.clone().normalize_raw()
    }

    fn normalize_raw(self) -> GenSeries {
        let p = BigInt::from(self.ring.p());
        let n = self.ring.witt_n.max(1) as u64;
        let desc = self.ring.desc.clone();
        // class key: fractional first coordinate plus the remaining coordinates
        let mut classes: BTreeMap<Vec<BigRational>, Vec<(BigInt, CoeffElem)>> = BTreeMap::new();
        for (e, c) in self.terms {
            let c0 = &e.coords()[0];
            let fl = c0.floor();
            let mut key = vec![c0 - &fl];
            key.extend(e.coords()[1..].iter().cloned());
            classes.entry(key).or_default().push((fl.to_integer(), c));
        }
        let mut prec = self.prec;
        let mut out: Vec<(GroupElement, CoeffElem)> = Vec::new();
        for (key, mut members) in classes {
            members.sort_by(|a, b| a.0.cmp(&b.0));
            let base = members[0].0.clone();
            let span = (&members.last().unwrap().0 - &base).to_u64().expect("class span fits in u64");
            let tower = members.iter().map(|m| m.1.tower().clone()).max_by_key(|t| t.stages().len()).unwrap();
            let dim = tower.dim();
            let mut acc = vec![BigInt::zero(); dim];
            for (k, c) in &members {
                let c = c.promote(&tower).expect("compatible towers");
                let shift = p.pow((k - &base).to_u32().expect("class span fits in u32"));
                for (a, x) in acc.iter_mut().zip(c.coords()) {
                    *a += x.to_integer() * &shift;
                }
            }
            let mut limit: Option<u64> = None;
            if acc.iter().any(|a| a.is_negative()) {
                let l = n.max(span + 1);
                let m = p.pow(l as u32);
                for a in acc.iter_mut() {
                    *a = a.mod_floor(&m);
                }
                limit = Some(l);
            }
            let mut m = 0u64;
            while acc.iter().any(|a| !a.is_zero()) {
                if limit.is_some_and(|l| m >= l) {
                    break;
                }
                let digits: Vec<BigRational> = acc
                    .iter_mut()
                    .map(|a| {
                        let (q, r) = a.div_mod_floor(&p);
                        *a = q;
                        BigRational::from_integer(r)
                    })
                    .collect();
                if digits.iter().any(|d| !d.is_zero()) {
                    let mut coords = key.clone();
                    coords[0] = &coords[0] + BigRational::from_integer(&base + BigInt::from(m));
                    out.push((GroupElement::new(&desc, coords), CoeffElem::from_coords(&tower, digits)));
                }
                m += 1;
            }
            if let Some(l) = limit {
                let mut coords = key.clone();
                coords[0] = &coords[0] + BigRational::from_integer(&base + BigInt::from(l));
                prec = Prec::min(prec, Prec::open(GroupElement::new(&desc, coords)));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        let terms = out.into_iter().filter(|(e, _)| prec.knows(e)).collect();
        GenSeries { ring: self.ring, terms, prec }
    }

    /// Equality of term lists and precision.
    pub fn same_as(&self, o: &GenSeries) -> bool {
        self.prec == o.prec && self.terms.len() == o.terms.len() && self.terms.iter().zip(&o.terms).all(|(a, b)| a == b)
    }

    /// Equality of term lists only.
    pub fn same_terms(&self, o: &GenSeries) -> bool {
        self.terms.len() == o.terms.len() && self.terms.iter().zip(&o.terms).all(|(a, b)| a == b)
    }

    /// Agreement on the common known range.
    pub fn agrees_with(&self, o: &GenSeries) -> bool {
        let prec = Prec::min(self.prec.clone(), o.prec.clone());
        self.with_prec(prec.clone()).same_terms(&o.with_prec(prec))
    }
}

/// Horner evaluation of `sum F[k] y^k` at `s`.
pub fn eval_poly(coeffs: &[GenSeries], s: &GenSeries) -> GenSeries {
    let mut acc = GenSeries::zero(s.ring());
    for c in coeffs.iter().rev() {
        acc = acc.mul(s).add(c);
    }
    acc
}

fn fmt_exponent(e: &GroupElement) -> Option<String> {
    if e.is_zero() {
        return None;
    }
    if e.coords().len() == 1 {
        let q = &e.coords()[0];
        if q.is_one() {
            return Some(String::new());
        }
        if q.is_integer() && q.is_positive() {
            return Some(format!("^{}", q.numer()));
        }
        return Some(format!("^({})", fmt_rational(q)));
    }
    if *e == GroupElement::unit(e.descriptor(), 0) {
        return Some(String::new());
    }
    Some(format!("^({e})"))
}

fn fmt_monomial(var: &str, e: &GroupElement) -> String {
    match fmt_exponent(e) {
        None => "1".into(),
        Some(x) => format!("{var}{x}"),
    }
}

impl fmt::Display for GenSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = self.ring.var();
        let mut parts: Vec<(bool, String)> = Vec::new();
        for (e, c) in &self.terms {
            let cs = c.to_string();
            let compound = c.coords().iter().filter(|x| !x.is_zero()).count() > 1;
            let (neg, mag) = if compound {
                (false, format!("({cs})"))
            } else if let Some(rest) = cs.strip_prefix('-') {
                (true, rest.to_string())
            } else {
                (false, cs)
            };
            let body = match fmt_exponent(e) {
                None => mag,
                Some(x) if mag == "1" => format!("{var}{x}"),
                Some(x) => format!("{mag}*{var}{x}"),
            };
            parts.push((neg, body));
        }
        if let ExtValue::Fin(a) = &self.prec.at {
            let inner = fmt_monomial(var, a);
            let o = if self.prec.closed { format!("O[{inner}]") } else { format!("O({inner})") };
            parts.push((false, o));
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (i, (neg, body)) in parts.iter().enumerate() {
            match (i == 0 && !self.terms.is_empty(), neg) {
                (true, false) => write!(f, "{body}")?,
                (true, true) => write!(f, "-{body}")?,
                (false, false) => write!(f, " + {body}")?,
                (false, true) => write!(f, " - {body}")?,
            }
        }
        Ok(())
    }
}

/// Split at top-level `+`/`-`, keeping the sign with each piece.
pub(crate) fn split_signed(s: &str) -> Vec<(bool, String)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    let mut neg = false;
    let chars: Vec<char> = s.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        let prev = chars[..i].iter().rev().find(|c| !c.is_whitespace()).copied();
        let binary = depth == 0 && (ch == '+' || ch == '-') && !matches!(prev, None | Some('*') | Some('^') | Some('/'));
        if binary {
            if !cur.trim().is_empty() {
                out.push((neg, cur.trim().to_string()));
            }
            cur.clear();
            neg = ch == '-';
            continue;
        }
        if depth == 0 && (ch == '+' || ch == '-') && prev.is_none() {
            neg = ch == '-';
            continue;
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push((neg, cur.trim().to_string()));
    }
    out
}

fn parse_exp(desc: &Arc<GroupDescriptor>, s: &str) -> Result<GroupElement, GroupError> {
    let s = s.trim();
    let inner = s.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(s);
    parse_element(desc, inner)
}

/// Parse `var` or `var^e`, returning its exponent.
fn parse_var_power(desc: &Arc<GroupDescriptor>, var: &str, s: &str) -> Option<Result<GroupElement, GroupError>> {
    let s = s.trim();
    if s == var {
        return Some(Ok(GroupElement::unit(desc, 0)));
    }
    s.strip_prefix(var).and_then(|r| r.strip_prefix('^')).map(|r| parse_exp(desc, r))
}

/// Split at top-level `*`.
pub(crate) fn split_factors(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if ch == '*' && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    out.push(cur);
    out
}

/// Parse the canonical text form; coefficients are read in `tower`.
pub fn parse_series(ring: &Arc<SeriesRing>, tower: &Arc<Tower>, s: &str) -> Result<GenSeries, SeriesError> {
    let err = || SeriesError::Parse(s.to_string());
    let desc = ring.descriptor();
    let var = ring.var();
    let mut terms = Vec::new();
    let mut prec = Prec::exact();
    for (neg, piece) in split_signed(s) {
        if let Some(inner) = piece.strip_prefix("O(").and_then(|x| x.strip_suffix(')')) {
            let e = if inner.trim() == "1" {
                GroupElement::zero(desc)
            } else {
                parse_var_power(desc, var, inner).ok_or_else(err)??
            };
            prec = Prec::open(e);
            continue;
        }
        if let Some(inner) = piece.strip_prefix("O[").and_then(|x| x.strip_suffix(']')) {
            let e = if inner.trim() == "1" {
                GroupElement::zero(desc)
            } else {
                parse_var_power(desc, var, inner).ok_or_else(err)??
            };
            prec = Prec::closed_at(e);
            continue;
        }
        let mut exp = GroupElement::zero(desc);
        let mut coeff = CoeffElem::one(tower);
        for f in split_factors(&piece) {
            let f = f.trim();
            if let Some(e) = parse_var_power(desc, var, f) {
                exp = &exp + &e?;
            } else {
                let c = parse_coeff(tower, f)?;
                coeff = &coeff * &c;
            }
        }
        if neg {
            coeff = coeff.neg();
        }
        terms.push((exp, coeff));
    }
    let out = GenSeries::from_terms(ring, terms, prec);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qring() -> Arc<SeriesRing> {
        SeriesRing::t_adic(&GroupDescriptor::rational(1), &Tower::new(BaseRing::Rational))
    }
    fn ps(r: &Arc<SeriesRing>, s: &str) -> GenSeries {
        parse_series(r, r.tower(), s).unwrap()
    }
    fn g(r: &Arc<SeriesRing>, n: i64, d: i64) -> GroupElement {
        GroupElement::from_ratio(r.descriptor(), n, d)
    }

    #[test]
    fn basic_ops() {
        let r = qring();
        let a = ps(&r, "1 + t");
        let b = ps(&r, "1 - t");
        assert_eq!(a.mul(&b).to_string(), "1 - t^2");
        let inv = a.inv(Some(&g(&r, 3, 1))).unwrap();
        assert_eq!(inv.to_string(), "1 - t + t^2 + O(t^3)");
        let f = ps(&r, "2*t^3 + t^4");
        let (e, c) = f.leading_term().unwrap();
        assert_eq!((e.to_string(), c.to_string()), ("3".into(), "2".into()));
        assert_eq!(GenSeries::zero(&r).val(), Err(SeriesError::ValuationIndeterminate));
    }

    #[test]
    fn truncations() {
        let r = qring();
        let f = ps(&r, "t^(1/2) + t + t^(3/2)");
        assert_eq!(f.truncate_open(&g(&r, 1, 1)).unwrap().to_string(), "t^(1/2) + O(t)");
        assert_eq!(f.truncate_closed(&g(&r, 1, 1)).unwrap().to_string(), "t^(1/2) + t + O[t]");
        // f(3/2) - f(1/2) keeps the exponent 1/2 itself
        assert_eq!(f.slice(&g(&r, 1, 2), &g(&r, 3, 2)).unwrap().to_string(), "t^(1/2) + t + O(t^(3/2))");
        assert_eq!(f.slice(&g(&r, 1, 1), &g(&r, 3, 2)).unwrap().to_string(), "t + O(t^(3/2))");
        let h = f.truncate_open(&g(&r, 1, 1)).unwrap();
        assert!(matches!(h.truncate_open(&g(&r, 2, 1)), Err(SeriesError::PrecisionExceeded(..))));
    }

    #[test]
    fn eval_examples() {
        let r = qring();
        let fcoeffs = vec![ps(&r, "-t^3"), GenSeries::zero(&r), GenSeries::one(&r)];
        let v = eval_poly(&fcoeffs, &ps(&r, "t^(3/2)"));
        assert!(v.is_exact_zero());
        let f2 = Tower::new(BaseRing::Prime(2));
        let r2 = SeriesRing::t_adic(&GroupDescriptor::rational(2), &f2);
        let fc = vec![ps(&r2, "t"), ps(&r2, "t"), GenSeries::one(&r2)];
        let v = eval_poly(&fc, &ps(&r2, "t^(1/2) + t^(3/4)"));
        assert_eq!(v.val().unwrap(), g(&r2, 7, 4));
    }

    #[test]
    fn padic_carrying() {
        let w2 = WittRing::new(2, 6);
        let r = SeriesRing::p_adic(&GroupDescriptor::rational(2), &w2);
        let s = ps(&r, "3*p^(1/2)");
        assert_eq!(s.to_string(), "p^(1/2) + p^(3/2)");
        let u = ps(&r, "1 + p^(1/2)");
        assert_eq!(u.mul(&u).to_string(), "1 + p + p^(3/2)");
        let w3 = WittRing::new(3, 6);
        let r3 = SeriesRing::p_adic(&GroupDescriptor::rational(3), &w3);
        assert_eq!(ps(&r3, "5").to_string(), "2 + p");
        let w5 = WittRing::new(5, 6);
        let r5 = SeriesRing::p_adic(&GroupDescriptor::rational(5), &w5);
        assert_eq!(ps(&r5, "5*p^(1/2) + p").val().unwrap(), g(&r5, 1, 1));
        // p - p cancels exactly, -p carries an infinite tail truncated at N digits
        let p1 = ps(&r3, "p");
        assert!(p1.sub(&p1).is_exact_zero());
        let m = p1.neg();
        assert_eq!(m.prec().at, ExtValue::Fin(g(&r3, 7, 1)));
        let z = p1.add(&m);
        assert!(z.is_zero_to_prec());
    }

    #[test]
    fn round_trip_text() {
        let r = qring();
        for s in ["t^(3/2)", "1 - t^2", "-1/2*t + 3*t^(7/4) + O(t^2)", "0 + O(t^(1/3))", "t + O[t^(3/2)]", "0"] {
            let f = ps(&r, s);
            assert_eq!(f.to_string(), s);
        }
    }
}
