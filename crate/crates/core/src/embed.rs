//! Puiseux development of a root by successive partial developments u(beta).
//!
//! The valuation is presented either by a monic polynomial `F` (its chain is
//! grown on demand) or by an explicit key polynomial chain.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::coeff::{roots_in_tower, residual_factor, CoeffElem, CoeffError, ResidueField, UPoly};
use crate::keypoly::{ext_sub, KeyError, KeyPolyChain, ValPoly};
use crate::series::{GenSeries, Mode, Prec, SeriesError, SeriesRing};
use crate::value_group::{ExtValue, GroupDescriptor, GroupElement, Lattice};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmbedError {
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("zero polynomial has no monomial value")]
    ZeroPolynomial,
    #[error("unsupported limit pattern: {0}")]
    UnsupportedLimitPattern(String),
    #[error("expansion stalled at beta={0}")]
    Stalled(String),
    #[error("eps~={eps} below beta={beta}")]
    EpsBelowBeta { eps: String, beta: String },
    #[error("chain exhausted at index {0}")]
    ChainExhausted(usize),
}

/// Polynomial in variables x_0..x_{n-1} with coefficients in the base domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MPoly {
    nvars: usize,
    terms: Vec<(Vec<u32>, CoeffElem)>,
}

impl MPoly {
    pub fn new(nvars: usize, terms: Vec<(Vec<u32>, CoeffElem)>) -> Self {
        let mut map: BTreeMap<Vec<u32>, CoeffElem> = BTreeMap::new();
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent vector length");
            let slot = map.remove(&e);
            let sum = match slot {
                Some(prev) => &prev + &c,
                None => c,
            };
            if !sum.is_zero() {
                map.insert(e, sum);
            }
        }
        MPoly { nvars, terms: map.into_iter().collect() }
    }
    pub fn nvars(&self) -> usize {
        self.nvars
    }
    pub fn terms(&self) -> &[(Vec<u32>, CoeffElem)] {
        &self.terms
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    /// Degree in the last variable.
    pub fn degree_last(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e[self.nvars - 1]).max().unwrap_or(0)
    }

    /// min over the support of sum alpha_i w_i. With `p` set, the p-adic order
    /// of each coefficient contributes `v_p(c) * w_p`.
    pub fn monomial_val(&self, weights: &[GroupElement], p: Option<(u64, &GroupElement)>) -> Result<GroupElement, EmbedError> {
        let mut best: Option<GroupElement> = None;
        for (e, c) in &self.terms {
            let mut v = GroupElement::zero(weights[0].descriptor());
            for (k, w) in e.iter().zip(weights) {
                if *k > 0 {
                    v = &v + &w.mul_int(*k as i64);
                }
            }
            if let Some((p, wp)) = p {
                v = &v + &wp.mul_int(coeff_p_order(c, p) as i64);
            }
            if best.as_ref().is_none_or(|b| v < *b) {
                best = Some(v);
            }
        }
        best.ok_or(EmbedError::ZeroPolynomial)
    }

    /// Substitute series for every variable.
    pub fn eval(&self, ring: &Arc<SeriesRing>, vals: &[GenSeries]) -> GenSeries {
        let mut acc = GenSeries::zero(ring);
        for (e, c) in &self.terms {
            let mut m = GenSeries::constant(ring, c.clone());
            for (k, v) in e.iter().zip(vals) {
                if *k > 0 {
                    m = m.mul(&v.pow(*k));
                }
            }
            acc = acc.add(&m);
        }
        acc
    }

    /// Polynomial in the last variable with the others replaced by `lower`.
    pub fn to_valpoly(&self, ring: &Arc<SeriesRing>, lower: &[GenSeries]) -> ValPoly {
        let n = self.nvars - 1;
        let mut coeffs = vec![GenSeries::zero(ring); self.degree_last() as usize + 1];
        for (e, c) in &self.terms {
            let mut m = GenSeries::constant(ring, c.clone());
            for (k, v) in e[..n].iter().zip(lower) {
                if *k > 0 {
                    m = m.mul(&v.pow(*k));
                }
            }
            let j = e[n] as usize;
            coeffs[j] = coeffs[j].add(&m);
        }
        ValPoly::new(ring, coeffs)
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (k, x) in e.iter().enumerate() {
                if *x > 0 {
                    write!(f, "*x{k}^{x}")?;
                }
            }
        }
        Ok(())
    }
}

fn coeff_p_order(c: &CoeffElem, p: u64) -> u32 {
    let p = BigInt::from(p);
    let mut best = u32::MAX;
    for x in c.coords() {
        if x.is_zero() {
            continue;
        }
        let mut n = x.numer().abs();
        let mut k = 0;
        while n.is_multiple_of(&p) {
            n /= &p;
            k += 1;
        }
        best = best.min(k);
    }
    if best == u32::MAX {
        0
    } else {
        best
    }
}

/// Images of the monomial generators: `p -> p^1` first in mixed mode, then one
/// monomial per remaining group generator.
pub fn monomial_embedding(ring: &Arc<SeriesRing>) -> Vec<(String, GenSeries)> {
    let desc = ring.descriptor();
    let mut out = Vec::new();
    for k in 0..desc.rank() {
        let name = match (ring.mode(), k) {
            (Mode::PAdic, 0) => "p".to_string(),
            (Mode::PAdic, _) => format!("u{k}"),
            (Mode::TAdic, _) => format!("u{}", k + 1),
        };
        out.push((name, GenSeries::var_pow(ring, GroupElement::unit(desc, k))));
    }
    out
}

/// All generators of the group, used as the value group of the coefficients
/// when nothing narrower is declared.
pub fn default_lower(desc: &Arc<GroupDescriptor>) -> Vec<GroupElement> {
    (0..desc.rank()).map(|k| GroupElement::unit(desc, k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Step,
    Limit,
    Terminal,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Step => "STEP",
            Branch::Limit => "LIMIT",
            Branch::Terminal => "TERMINAL",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Complete,
    Budget,
    CompleteTranscendental,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Complete => "COMPLETE",
            Status::Budget => "BUDGET",
            Status::CompleteTranscendental => "COMPLETE_TRANSCENDENTAL",
        })
    }
}

/// One record of the trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub beta: GroupElement,
    pub coeff: CoeffElem,
    pub i_beta: usize,
    pub beta_plus: ExtValue,
    pub branch: Branch,
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "beta={} coeff={} i_beta={} beta_plus={} branch={}", self.beta, self.coeff, self.i_beta, self.beta_plus, self.branch)
    }
}

#[derive(Clone, Debug)]
pub struct Budget {
    pub max_terms: Option<usize>,
    pub max_prec: Option<GroupElement>,
    pub resolve_limits: bool,
}

impl Budget {
    pub fn terms(n: usize) -> Self {
        Budget { max_terms: Some(n), max_prec: None, resolve_limits: false }
    }
    pub fn unlimited() -> Self {
        Budget { max_terms: None, max_prec: None, resolve_limits: false }
    }
}

/// Partial development with its stage data.
#[derive(Clone, Debug)]
pub struct PuiseuxState {
    /// Terms found so far; all exponents are below `beta`.
    pub partial: GenSeries,
    pub beta: ExtValue,
    pub i_beta: usize,
    pub gamma_gens: Vec<GroupElement>,
}

impl PuiseuxState {
    /// The development as a series known up to `beta`.
    pub fn truncation(&self) -> GenSeries {
        match &self.beta {
            ExtValue::Inf => self.partial.clone(),
            ExtValue::Fin(b) => self.partial.with_prec(Prec::open(b.clone())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialReport {
    pub holds: bool,
    pub violated: Option<usize>,
}

/// Initial form of `Q(u + X t^beta)` as a residue polynomial in X.
#[derive(Clone, Debug)]
pub struct Residual {
    /// Chain index of the polynomial used.
    pub index: usize,
    pub poly: UPoly,
    /// Value of the initial form.
    pub value: GroupElement,
}

/// Output of a full run.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub series: GenSeries,
    pub chain: KeyPolyChain,
    pub trace: Vec<StepRecord>,
    pub status: Status,
    /// Closed form of an infinite tail resolved by a limit step.
    pub limit_poly: Option<ValPoly>,
    pub residue: ResidueField,
}

impl Expansion {
    pub fn trace_text(&self) -> String {
        let mut s = String::new();
        for r in &self.trace {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s.push_str(&format!("result={} status={}\n", self.series, self.status));
        s
    }
}

enum Source {
    Poly(ValPoly),
    Explicit,
}

/// Driver holding the chain and residue field as they grow.
pub struct Expander {
    ring: Arc<SeriesRing>,
    source: Source,
    chain: KeyPolyChain,
    rf: ResidueField,
    lower: Vec<GroupElement>,
}

enum StepOutcome {
    Next(PuiseuxState, StepRecord),
    Done(PuiseuxState, Option<StepRecord>, Status),
}

/// Series arithmetic in mixed characteristic loses exactness after carrying;
/// a value that vanishes to precision there counts as infinite.
pub(crate) fn value_of(s: &GenSeries) -> Result<ExtValue, EmbedError> {
    match s.val_ext() {
        Ok(v) => Ok(v),
        Err(_) if s.ring().mode() == Mode::PAdic => Ok(ExtValue::Inf),
        Err(e) => Err(e.into()),
    }
}

fn coeff_exponents(f: &ValPoly) -> Vec<GroupElement> {
    let mut out: Vec<GroupElement> = Vec::new();
    for c in f.coeffs() {
        for (e, _) in c.terms() {
            if !e.is_zero() && !out.contains(e) {
                out.push(e.clone());
            }
        }
    }
    out
}

impl Expander {
    /// Development of the root of `f` with least positive value. `lower` is the
    /// value group of the coefficient field (exponents of `f` are added).
    pub fn from_poly(f: &ValPoly, lower: Vec<GroupElement>, rf: ResidueField) -> Result<Self, EmbedError> {
        let mut lower = lower;
        for e in coeff_exponents(f) {
            if !lower.contains(&e) {
                lower.push(e);
            }
        }
        let chain = KeyPolyChain::init(f, lower.clone())?;
        Ok(Expander { ring: f.ring().clone(), source: Source::Poly(f.clone()), chain, rf, lower })
    }

    pub fn from_chain(chain: KeyPolyChain, rf: ResidueField) -> Self {
        let lower = chain.lower().to_vec();
        Expander { ring: chain.ring().clone(), source: Source::Explicit, chain, rf, lower }
    }

    pub fn chain(&self) -> &KeyPolyChain {
        &self.chain
    }
    pub fn residue(&self) -> &ResidueField {
        &self.rf
    }
    pub fn ring(&self) -> &Arc<SeriesRing> {
        &self.ring
    }
    pub fn poly(&self) -> Option<&ValPoly> {
        match &self.source {
            Source::Poly(f) => Some(f),
            Source::Explicit => None,
        }
    }

    fn can_extend(&self) -> bool {
        matches!(self.source, Source::Poly(_)) && !self.chain.is_complete()
    }

    fn extend_chain(&mut self, u: &GenSeries) -> Result<(), EmbedError> {
        let Source::Poly(f) = &self.source else {
            return Err(EmbedError::ChainExhausted(self.chain.len()));
        };
        self.chain = self.chain.extend(f, u, &mut self.rf)?;
        Ok(())
    }

    /// min { i : beta <= eps_i } over the chain built so far.
    pub fn i_beta(&self, beta: &ExtValue) -> Option<usize> {
        self.chain.entries().iter().position(|e| *beta <= e.eps).map(|k| k + 1)
    }

    fn gamma_gens(&self, i_beta: usize) -> Vec<GroupElement> {
        let mut g = self.lower.clone();
        for e in &self.chain.entries()[..i_beta - 1] {
            if let Some(b) = e.beta.finite() {
                g.push(b.clone());
            }
        }
        g
    }

    /// Stage data for a development `partial` known up to `beta`.
    pub fn state_at(&mut self, partial: GenSeries, beta: ExtValue) -> Result<PuiseuxState, EmbedError> {
        if let ExtValue::Fin(_) = beta {
            while self.i_beta(&beta).is_none() && self.can_extend() {
                self.extend_chain(&partial)?;
            }
        }
        let i_beta = self.i_beta(&beta).unwrap_or(self.chain.len());
        let gamma_gens = self.gamma_gens(i_beta);
        Ok(PuiseuxState { partial, beta, i_beta, gamma_gens })
    }

    /// u(beta_1) = 0 with precision beta_1.
    pub fn init_state(&mut self) -> Result<PuiseuxState, EmbedError> {
        let beta = self.chain.entry(1).beta.clone();
        self.state_at(GenSeries::zero(&self.ring), beta)
    }

    /// Conditions (1) v(Q_i(u)) = beta_i for i < i_beta and (2)
    /// v(Q_{i_beta}(u)) >= min_q { nu(d_{p^q} Q) + p^q beta }.
    pub fn is_partial_development(&self, st: &PuiseuxState) -> Result<PartialReport, EmbedError> {
        let u = &st.partial;
        for i in 1..st.i_beta {
            let v = value_of(&self.chain.entry(i).q.eval(u))?;
            if v != self.chain.entry(i).beta {
                return Ok(PartialReport { holds: false, violated: Some(i) });
            }
        }
        if let ExtValue::Fin(b) = &st.beta {
            let i = st.i_beta;
            let v = value_of(&self.chain.entry(i).q.eval(u))?;
            if v < self.chain.derivative_floor(i, b)? {
                return Ok(PartialReport { holds: false, violated: Some(i) });
            }
        }
        Ok(PartialReport { holds: true, violated: None })
    }

    /// min_k { v(d_k f(u)) + k beta }: value of f(u + T) with v(T) = beta.
    pub fn mu_beta_val(&self, f: &ValPoly, st: &PuiseuxState) -> Result<ExtValue, EmbedError> {
        let beta = st.beta.clone();
        let mut best = ExtValue::Inf;
        for k in 0..=f.degree() {
            let d = f.hasse(k);
            if d.is_zero() {
                continue;
            }
            let v = value_of(&d.eval(&st.partial))?;
            let v = if k == 0 { v } else { v.add(&crate::keypoly::ext_mul(&beta, k as u64)) };
            best = ExtValue::min(best, v);
        }
        Ok(best)
    }

    /// Index of the polynomial driving the step at `st`, extending the chain
    /// when beta reaches eps_{i_beta}. `None` when the chain cannot continue.
    fn step_index(&mut self, st: &PuiseuxState) -> Result<Option<usize>, EmbedError> {
        let ib = st.i_beta;
        if st.beta < self.chain.entry(ib).eps {
            return Ok(Some(ib));
        }
        if ib == self.chain.len() {
            if !self.can_extend() {
                return Ok(None);
            }
            self.extend_chain(&st.partial)?;
        }
        Ok(Some(ib + 1))
    }

    /// Residual polynomial for `Q_index` at the state.
    pub fn residual_at(&self, st: &PuiseuxState, index: usize) -> Result<Residual, EmbedError> {
        let beta = st.beta.finite().expect("finite beta").clone();
        let q = &self.chain.entry(index).q;
        let mut vals = Vec::new();
        for l in 0..=q.degree() {
            let s = q.hasse(l).eval(&st.partial);
            let v = value_of(&s)?;
            let v = match v {
                ExtValue::Inf => None,
                ExtValue::Fin(g) => Some((&g + &beta.mul_int(l as i64), s)),
            };
            vals.push(v);
        }
        let value = vals.iter().flatten().map(|(v, _)| v.clone()).min().ok_or(EmbedError::Stalled(beta.to_string()))?;
        let tower = self.rf.tower().clone();
        let mut poly = vec![CoeffElem::zero(&tower); vals.len()];
        for (l, v) in vals.iter().enumerate() {
            if let Some((g, s)) = v {
                if *g == value {
                    let (_, c) = s.leading_term()?;
                    poly[l] = self.rf.residue_of(&c);
                }
            }
        }
        Ok(Residual { index, poly, value })
    }

    /// Least nonzero root of the residual polynomial (0 if it has no other),
    /// adjoining one when the tower lacks it.
    fn residual_root(&mut self, r: &[CoeffElem]) -> Result<CoeffElem, EmbedError> {
        let tower = self.rf.tower().clone();
        let mut p = r.to_vec();
        while p.last().is_some_and(|c| c.is_zero()) {
            p.pop();
        }
        let low = p.iter().position(|c| !c.is_zero()).unwrap_or(0);
        if p.len() - low < 2 {
            return Ok(CoeffElem::zero(&tower));
        }
        let roots = roots_in_tower(&p)?;
        if let Some((z, _)) = roots.into_iter().find(|(z, _)| !z.is_zero()) {
            return Ok(z);
        }
        let (t2, z, _) = residual_factor(&tower, &p[low..])?;
        self.rf.adopt(&t2);
        Ok(z)
    }

    fn step(&mut self, st: &PuiseuxState) -> Result<StepOutcome, EmbedError> {
        let beta = match &st.beta {
            ExtValue::Inf => return Ok(StepOutcome::Done(st.clone(), None, Status::Complete)),
            ExtValue::Fin(b) => b.clone(),
        };
        let Some(k) = self.step_index(st)? else {
            // chain cannot continue past i_beta
            let lattice = Lattice::new(self.ring.descriptor(), &st.gamma_gens);
            if !lattice.contains(&beta) {
                let one = CoeffElem::one(self.rf.coeff_tower());
                let partial = st.partial.add(&GenSeries::monomial(&self.ring, beta.clone(), one.clone()));
                let rec = StepRecord { beta, coeff: one, i_beta: st.i_beta, beta_plus: ExtValue::Inf, branch: Branch::Terminal };
                let done = PuiseuxState { partial, beta: ExtValue::Inf, i_beta: st.i_beta, gamma_gens: st.gamma_gens.clone() };
                return Ok(StepOutcome::Done(done, Some(rec), Status::Complete));
            }
            return Ok(StepOutcome::Done(st.clone(), None, Status::CompleteTranscendental));
        };
        let res = self.residual_at(st, k)?;
        let root = self.residual_root(&res.poly)?;
        let a = self.rf.lift(&root);
        let partial = if a.is_zero() { st.partial.clone() } else { st.partial.add(&GenSeries::monomial(&self.ring, beta.clone(), a.clone())) };
        let q = self.chain.entry(k).q.clone();
        let beta_t = value_of(&q.eval(&partial))?;
        let (_, eps_t) = self.chain.epsilon_with(k, &beta_t)?;
        if eps_t < ExtValue::Fin(beta.clone()) {
            return Err(EmbedError::EpsBelowBeta { eps: eps_t.to_string(), beta: beta.to_string() });
        }
        let beta_plus = ExtValue::min(eps_t, self.chain.entry(k).eps.clone());
        if beta_plus <= ExtValue::Fin(beta.clone()) {
            return Err(EmbedError::Stalled(beta.to_string()));
        }
        let rec = StepRecord { beta, coeff: a, i_beta: st.i_beta, beta_plus: beta_plus.clone(), branch: Branch::Step };
        let next = self.state_at(partial, beta_plus)?;
        if next.beta.is_inf() {
            return Ok(StepOutcome::Done(next, Some(rec), Status::Complete));
        }
        Ok(StepOutcome::Next(next, rec))
    }

    /// Run until completion or the budget is spent.
    pub fn expand(&mut self, budget: &Budget) -> Result<Expansion, EmbedError> {
        let mut st = self.init_state()?;
        let mut trace = Vec::new();
        let max_steps = budget.max_terms.map(|n| 4 * n + 64).unwrap_or(4096);
        let mut limit_poly = None;
        let status = loop {
            if st.beta.is_inf() {
                break Status::Complete;
            }
            if let (Some(mp), ExtValue::Fin(b)) = (&budget.max_prec, &st.beta) {
                if b >= mp {
                    break Status::Budget;
                }
            }
            if budget.max_terms.is_some_and(|n| st.partial.terms().len() >= n) || trace.len() >= max_steps {
                break Status::Budget;
            }
            if budget.resolve_limits {
                if let Some(pat) = detect_pattern(&self.ring, &trace) {
                    let (done, rec, poly) = self.limit_step(&st, &pat, budget)?;
                    trace.push(rec);
                    limit_poly = Some(poly);
                    st = done;
                    break Status::Complete;
                }
            }
            let outcome = match self.step(&st) {
                Err(EmbedError::Key(KeyError::LimitRequired(_))) if budget.resolve_limits => {
                    return Err(EmbedError::UnsupportedLimitPattern("limit key polynomial without a recognised pattern".into()))
                }
                other => other?,
            };
            match outcome {
                StepOutcome::Next(next, rec) => {
                    trace.push(rec);
                    st = next;
                }
                StepOutcome::Done(done, rec, status) => {
                    trace.extend(rec);
                    st = done;
                    break status;
                }
            }
        };
        let series = if status == Status::Complete && limit_poly.is_none() { st.partial.clone() } else { st.truncation() };
        Ok(Expansion { series, chain: self.chain.clone(), trace, status, limit_poly, residue: self.rf.clone() })
    }

    /// Close a geometric exponent stream: u(W) is the root S of its Frobenius
    /// relation; the step then reads beta~ off Q_{i_W}(S).
    fn limit_step(&mut self, st: &PuiseuxState, pat: &Pattern, budget: &Budget) -> Result<(PuiseuxState, StepRecord, ValPoly), EmbedError> {
        let ring = self.ring.clone();
        let big_s = pat.relation(&ring);
        let sup = pat.c.clone();
        let i_w = self
            .chain
            .entries()
            .iter()
            .position(|e| e.eps >= ExtValue::Fin(sup.clone()))
            .map(|k| k + 1)
            .ok_or(EmbedError::ChainExhausted(self.chain.len()))?;
        let q = self.chain.entry(i_w).q.clone();
        let (_, rem) = q.divrem_monic(&big_s);
        let beta_t = if rem.is_zero() {
            ExtValue::Inf
        } else {
            return Err(EmbedError::UnsupportedLimitPattern(format!("limit of the stream does not annihilate Q_{i_w}")));
        };
        let (_, eps_t) = self.chain.epsilon_with(i_w, &beta_t)?;
        let beta_plus = ExtValue::min(eps_t, self.chain.entry(i_w).eps.clone());
        let n = budget.max_terms.unwrap_or(16).max(st.partial.terms().len());
        let materialized = pat.materialize(&ring, n);
        let rec = StepRecord { beta: sup, coeff: pat.a.clone(), i_beta: i_w, beta_plus: beta_plus.clone(), branch: Branch::Limit };
        let done = PuiseuxState { partial: materialized.to_exact(), beta: materialized_prec(&materialized), i_beta: i_w, gamma_gens: st.gamma_gens.clone() };
        Ok((done, rec, big_s))
    }
}

fn materialized_prec(s: &GenSeries) -> ExtValue {
    s.prec().at.clone()
}

/// Stream sum_{m>=1} a t^{c - D p^-m}.
#[derive(Clone, Debug)]
pub struct Pattern {
    pub p: u64,
    pub a: CoeffElem,
    pub c: GroupElement,
    pub d: GroupElement,
}

impl Pattern {
    fn exponent(&self, m: u32) -> GroupElement {
        let q = BigRational::new(BigInt::one(), BigInt::from(self.p).pow(m));
        &self.c - &self.d.scale_hull(&q)
    }
    /// First `n` terms, known up to the next exponent.
    pub fn materialize(&self, ring: &Arc<SeriesRing>, n: usize) -> GenSeries {
        let terms = (1..=n as u32).map(|m| (self.exponent(m), self.a.clone())).collect();
        GenSeries::from_terms(ring, terms, Prec::open(self.exponent(n as u32 + 1)))
    }
    /// Y^p - t^{(p-1)c} Y - a t^{pc - D}.
    pub fn relation(&self, ring: &Arc<SeriesRing>) -> ValPoly {
        let p = self.p as usize;
        let mut coeffs = vec![GenSeries::zero(ring); p + 1];
        coeffs[p] = GenSeries::one(ring);
        coeffs[1] = GenSeries::var_pow(ring, self.c.mul_int(self.p as i64 - 1)).neg();
        coeffs[0] = GenSeries::monomial(ring, &self.c.mul_int(self.p as i64) - &self.d, self.a.clone()).neg();
        ValPoly::new(ring, coeffs)
    }
}

/// Recognise the geometric pattern on a trace whose every record is a STEP
/// with the same coefficient from the prime field; needs three records.
pub fn detect_pattern(ring: &Arc<SeriesRing>, trace: &[StepRecord]) -> Option<Pattern> {
    let p = ring.residue_char();
    if p == 0 || ring.mode() != Mode::TAdic || trace.len() < 3 {
        return None;
    }
    let a = trace[0].coeff.clone();
    if a.is_zero() || a.in_base().is_none() || trace.iter().any(|r| r.branch != Branch::Step || r.coeff != a) {
        return None;
    }
    let b1 = &trace[0].beta;
    let b2 = &trace[1].beta;
    let pm1 = BigRational::new(BigInt::one(), BigInt::from(p - 1));
    let c = (&b2.mul_int(p as i64) - b1).scale_hull(&pm1);
    let d = (&c - b1).mul_int(p as i64);
    if !d.is_positive() {
        return None;
    }
    let pat = Pattern { p, a, c, d };
    for (m, r) in trace.iter().enumerate() {
        if r.beta != pat.exponent(m as u32 + 1) {
            return None;
        }
    }
    Some(pat)
}

/// v(F(u)) - recorded in verification reports; `None` when indeterminate.
pub fn residual_value(f: &ValPoly, u: &GenSeries) -> Option<ExtValue> {
    f.eval(u).val_ext().ok()
}

/// Difference helper for callers comparing predicted and observed values.
pub fn value_gap(a: &ExtValue, b: &ExtValue) -> Option<ExtValue> {
    ext_sub(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{BaseRing, Tower, WittRing};
    use crate::series::parse_series;

    fn ring(p: u64) -> Arc<SeriesRing> {
        let (desc, base) = if p == 0 { (GroupDescriptor::rational(1), BaseRing::Rational) } else { (GroupDescriptor::rational(p), BaseRing::Prime(p)) };
        SeriesRing::t_adic(&desc, &Tower::new(base))
    }
    fn run(r: &Arc<SeriesRing>, f: &str, budget: Budget) -> Expansion {
        let f = ValPoly::parse(r, f).unwrap();
        let mut ex = Expander::from_poly(&f, default_lower(r.descriptor()), ResidueField::equal_char(r.tower())).unwrap();
        ex.expand(&budget).unwrap()
    }

    #[test]
    fn cusp() {
        let r = ring(0);
        let e = run(&r, "y^2 - t^3", Budget::terms(10));
        assert_eq!(e.series.to_string(), "t^(3/2)");
        assert_eq!(e.status, Status::Complete);
        assert_eq!(e.trace.len(), 1);
    }

    #[test]
    fn explicit_root_two_steps() {
        let r = ring(0);
        let e = run(&r, "y - t - t^2", Budget::unlimited());
        assert_eq!(e.series.to_string(), "t + t^2");
        assert_eq!(e.status, Status::Complete);
        assert_eq!(e.trace.len(), 2);
    }

    #[test]
    fn artin_schreier_budget() {
        let r = ring(2);
        let e = run(&r, "y^2 + t*y + t", Budget::terms(3));
        assert_eq!(e.status, Status::Budget);
        assert_eq!(e.series.to_string(), "t^(1/2) + t^(3/4) + t^(7/8) + O(t^(15/16))");
        let betas: Vec<String> = e.trace.iter().map(|r| r.beta.to_string()).collect();
        assert_eq!(betas, ["1/2", "3/4", "7/8"]);
    }

    #[test]
    fn artin_schreier_limit() {
        let r = ring(2);
        let mut b = Budget::terms(5);
        b.resolve_limits = true;
        let e = run(&r, "y^2 + t*y + t", b);
        assert_eq!(e.status, Status::Complete);
        assert_eq!(e.trace.last().unwrap().branch, Branch::Limit);
        assert_eq!(e.limit_poly.unwrap().to_string(), "y^2 + t*y + t");
    }

    #[test]
    fn quadratic_residue_extension() {
        let r = ring(0);
        let e = run(&r, "y^2 - 2*t^2", Budget::terms(4));
        assert_eq!(e.status, Status::Complete);
        let f = ValPoly::parse(&r, "y^2 - 2*t^2").unwrap();
        assert_eq!(residual_value(&f, &e.series), Some(ExtValue::Inf));
    }

    #[test]
    fn two_level() {
        let r = ring(0);
        let e = run(&r, "y^4 - 2*t^3*y^2 - t^5*y + t^6", Budget::terms(3));
        let coeffs: Vec<String> = e.trace.iter().map(|r| r.coeff.to_string()).collect();
        assert_eq!(&coeffs[..2], ["1", "1/2"]);
        assert_eq!(e.trace[1].beta.to_string(), "7/4");
    }

    #[test]
    fn mixed_square_root() {
        for p in [3u64, 5] {
            let w = WittRing::new(p, 6);
            let desc = GroupDescriptor::rational(1);
            let r = SeriesRing::p_adic(&desc, &w);
            let f = ValPoly::parse(&r, "y^2 - p").unwrap();
            let mut ex = Expander::from_poly(&f, default_lower(&desc), ResidueField::mixed(&w)).unwrap();
            let e = ex.expand(&Budget::terms(4)).unwrap();
            assert_eq!(e.series.to_string(), "p^(1/2)");
            assert_eq!(e.status, Status::Complete);
        }
    }

    #[test]
    fn explicit_chains() {
        let desc = Arc::new(GroupDescriptor::new(vec![crate::value_group::Weight::rational(BigRational::one()), crate::value_group::Weight { rational: BigRational::zero(), surd: BigRational::one() }], 2, 1).unwrap());
        let r = SeriesRing::t_adic(&desc, &Tower::new(BaseRing::Rational));
        let y = ValPoly::var(&r);
        let lower = vec![GroupElement::unit(&desc, 0)];
        let c = KeyPolyChain::explicit(&r, lower.clone(), vec![(y.clone(), ExtValue::Fin(GroupElement::unit(&desc, 1)))]).unwrap();
        let mut ex = Expander::from_chain(c, ResidueField::equal_char(r.tower()));
        let e = ex.expand(&Budget::terms(4)).unwrap();
        assert_eq!(e.status, Status::Complete);
        assert_eq!(e.trace[0].branch, Branch::Terminal);
        let c = KeyPolyChain::explicit(&r, lower, vec![(y, ExtValue::Fin(GroupElement::unit(&desc, 0)))]).unwrap();
        let mut ex = Expander::from_chain(c, ResidueField::equal_char(r.tower()));
        assert_eq!(ex.expand(&Budget::terms(4)).unwrap().status, Status::CompleteTranscendental);
    }

    #[test]
    fn monomial_values() {
        let r = ring(0);
        let desc = r.descriptor();
        let t = r.tower();
        let one = CoeffElem::one(t);
        let f = MPoly::new(2, vec![(vec![2, 1], one.clone()), (vec![5, 0], one.clone())]);
        let w = vec![GroupElement::from_ratio(desc, 1, 1), GroupElement::from_ratio(desc, 3, 2)];
        assert_eq!(f.monomial_val(&w, None).unwrap().to_string(), "7/2");
        assert_eq!(MPoly::new(2, vec![]).monomial_val(&w, None), Err(EmbedError::ZeroPolynomial));
        let emb = monomial_embedding(&r);
        assert_eq!(emb[0].1.to_string(), "t");
        let s = parse_series(&r, t, "t").unwrap();
        assert!(f.eval(&r, &[s.clone(), s]).same_as(&parse_series(&r, t, "t^3 + t^5").unwrap()));
    }

    #[test]
    fn partial_development_invariant() {
        let r = ring(2);
        let f = ValPoly::parse(&r, "y^2 + t*y + t").unwrap();
        let mut ex = Expander::from_poly(&f, default_lower(r.descriptor()), ResidueField::equal_char(r.tower())).unwrap();
        let mut st = ex.init_state().unwrap();
        assert!(ex.is_partial_development(&st).unwrap().holds);
        for _ in 0..4 {
            let prev = value_of(&f.eval(&st.partial)).unwrap();
            st = match ex.step(&st).unwrap() {
                StepOutcome::Next(s, _) => s,
                StepOutcome::Done(..) => panic!("finished early"),
            };
            assert!(ex.is_partial_development(&st).unwrap().holds);
            assert!(value_of(&f.eval(&st.partial)).unwrap() > prev);
        }
        let mut bad = st.clone();
        bad.partial = bad.partial.add(&parse_series(&r, r.tower(), "t^(1/4)").unwrap());
        let rep = ex.is_partial_development(&bad).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.violated, Some(1));
    }
}
