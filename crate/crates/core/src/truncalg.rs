//! Truncation calculus: decomposition of truncated products, Taylor forms at a
//! partial development, and the integral dependence relation of u(beta).

use std::fmt;

use thiserror::Error;

use crate::embed::value_of;
use crate::embed::EmbedError;
use crate::keypoly::{ext_mul, KeyError, KeyPolyChain, ValPoly};
use crate::series::{GenSeries, SeriesError};
use crate::value_group::{ExtValue, GroupElement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TruncError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("chain exhausted at index {0}")]
    ChainExhausted(usize),
}

/// Open truncation at an extended value; at infinity the series itself.
fn trunc_ext(s: &GenSeries, at: &ExtValue) -> Result<GenSeries, SeriesError> {
    match at {
        ExtValue::Inf => Ok(s.clone()),
        ExtValue::Fin(g) => s.truncate_open(g),
    }
}

fn trunc_closed_ext(s: &GenSeries, at: &ExtValue) -> Result<GenSeries, SeriesError> {
    match at {
        ExtValue::Inf => Ok(s.clone()),
        ExtValue::Fin(g) => s.truncate_closed(g),
    }
}

/// lambda_0 < ... < lambda_l and delta_1 > ... > delta_l with
/// (gh)(lambda) = sum_i g[lambda_{i-1}, lambda_i[ h(delta_i).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncationDecomposition {
    pub lambda: GroupElement,
    pub lambdas: Vec<GroupElement>,
    pub deltas: Vec<GroupElement>,
}

impl TruncationDecomposition {
    /// Right-hand side of the identity, as an exact series.
    pub fn apply(&self, g: &GenSeries, h: &GenSeries) -> Result<GenSeries, SeriesError> {
        let mut acc = GenSeries::zero(g.ring());
        for i in 1..self.lambdas.len() {
            let gs = g.slice(&self.lambdas[i - 1], &self.lambdas[i])?.to_exact();
            let hs = h.truncate_open(&self.deltas[i - 1])?.to_exact();
            acc = acc.add(&gs.mul(&hs));
        }
        Ok(acc)
    }

    /// Monotonicity plus lambda_l <= lambda - v(h) and delta_1 <= lambda - v(g).
    pub fn well_formed(&self, vg: &GroupElement, vh: &GroupElement) -> bool {
        let inc = self.lambdas.windows(2).all(|w| w[0] < w[1]);
        let dec = self.deltas.windows(2).all(|w| w[0] > w[1]);
        let last = self.lambdas.last().is_some_and(|l| *l <= &self.lambda - vh);
        let first = self.deltas.first().is_some_and(|d| *d <= &self.lambda - vg);
        inc && dec && last && first && self.deltas.len() + 1 == self.lambdas.len()
    }
}

/// Decomposition of (gh)(lambda) for v(g) + v(h) < lambda.
pub fn product_truncation(g: &GenSeries, h: &GenSeries, lambda: &GroupElement) -> Result<TruncationDecomposition, TruncError> {
    let vg = g.val()?;
    let vh = h.val()?;
    if &vg + &vh >= *lambda {
        return Err(TruncError::Precondition(format!("v(g) + v(h) = {} is not below {lambda}", &vg + &vh)));
    }
    let top = lambda - &vh;
    // both factors must be known as far as the decomposition reads them
    g.truncate_open(&top)?;
    h.truncate_open(&(lambda - &vg))?;
    let mut lambdas = vec![vg];
    let mut deltas = Vec::new();
    loop {
        let lq = lambdas.last().unwrap().clone();
        if lq == top {
            break;
        }
        deltas.push(lambda - &lq);
        // B_q: exponents e of g admitting theta in supp h with theta + lambda_q < lambda <= theta + e
        let hi = lambda - &lq;
        let mut next = top.clone();
        for (e, _) in g.terms() {
            if *e <= lq || *e >= next {
                continue;
            }
            let lo = lambda - e;
            if h.terms().iter().any(|(th, _)| *th >= lo && *th < hi) {
                next = e.clone();
            }
        }
        lambdas.push(next);
    }
    Ok(TruncationDecomposition { lambda: lambda.clone(), lambdas, deltas })
}

/// Nested decomposition of (g_0 ... g_{s-1})(lambda).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProductTree {
    /// The truncation is zero.
    Zero,
    /// g_factor(level).
    Leaf { factor: usize, level: GroupElement },
    /// sum_i g_factor[lambdas[i-1], lambdas[i][ * children[i-1].
    Node { factor: usize, lambdas: Vec<GroupElement>, children: Vec<ProductTree> },
}

/// One signed product of open truncations g_j(level).
pub type SignedProduct = (bool, Vec<(usize, GroupElement)>);

impl ProductTree {
    /// Flatten into signed products of open truncations, writing each slice
    /// g[a, b[ as g(b) - g(a).
    pub fn products(&self) -> Vec<SignedProduct> {
        match self {
            ProductTree::Zero => Vec::new(),
            ProductTree::Leaf { factor, level } => vec![(false, vec![(*factor, level.clone())])],
            ProductTree::Node { factor, lambdas, children } => {
                let mut out = Vec::new();
                for (i, child) in children.iter().enumerate() {
                    for (neg, mut fs) in child.products() {
                        let mut hi = vec![(*factor, lambdas[i + 1].clone())];
                        hi.append(&mut fs.clone());
                        out.push((neg, hi));
                        // g(lambda_0) = 0 since lambda_0 = v(g)
                        if i > 0 {
                            let mut lo = vec![(*factor, lambdas[i].clone())];
                            lo.append(&mut fs);
                            out.push((!neg, lo));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn evaluate(&self, gs: &[GenSeries]) -> Result<GenSeries, SeriesError> {
        let mut acc = GenSeries::zero(gs[0].ring());
        for (neg, fs) in self.products() {
            let mut m = GenSeries::one(gs[0].ring());
            for (j, lvl) in fs {
                m = m.mul(&gs[j].truncate_open(&lvl)?.to_exact());
            }
            acc = if neg { acc.sub(&m) } else { acc.add(&m) };
        }
        Ok(acc)
    }

    /// Every truncation level applied to factor `j`.
    pub fn levels(&self, j: usize) -> Vec<GroupElement> {
        self.products().into_iter().flat_map(|(_, fs)| fs.into_iter().filter(|(k, _)| *k == j).map(|(_, l)| l)).collect()
    }
}

/// Recursive decomposition: g_0 against the product of the rest.
pub fn multi_product_truncation(gs: &[GenSeries], lambda: &GroupElement) -> Result<ProductTree, TruncError> {
    multi_from(gs, 0, lambda)
}

fn multi_from(gs: &[GenSeries], start: usize, lambda: &GroupElement) -> Result<ProductTree, TruncError> {
    if start + 1 == gs.len() {
        if gs[start].val_ext()? >= ExtValue::Fin(lambda.clone()) {
            return Ok(ProductTree::Zero);
        }
        return Ok(ProductTree::Leaf { factor: start, level: lambda.clone() });
    }
    let g = &gs[start];
    let mut rest = gs[start + 1].clone();
    for x in &gs[start + 2..] {
        rest = rest.mul(x);
    }
    let vg = g.val_ext()?;
    let vr = rest.val_ext().map_err(|_| TruncError::Precondition("product valuation indeterminate".into()))?;
    if vg.add(&vr) >= ExtValue::Fin(lambda.clone()) {
        return Ok(ProductTree::Zero);
    }
    let dec = product_truncation(g, &rest, lambda)?;
    let mut children = Vec::new();
    for d in &dec.deltas {
        children.push(multi_from(gs, start + 1, d)?);
    }
    Ok(ProductTree::Node { factor: start, lambdas: dec.lambdas, children })
}

/// f(u)(lambda) rebuilt monomial by monomial from truncations of the
/// coefficients of f and of u alone.
pub fn stab_truncation(f: &ValPoly, u: &GenSeries, lambda: &GroupElement) -> Result<GenSeries, TruncError> {
    let mut acc = GenSeries::zero(f.ring());
    for (k, c) in f.coeffs().iter().enumerate() {
        if c.is_exact_zero() {
            continue;
        }
        let mut factors = vec![c.clone()];
        factors.extend(std::iter::repeat_n(u.clone(), k));
        let tree = multi_product_truncation(&factors, lambda)?;
        acc = acc.add(&tree.evaluate(&factors)?);
    }
    Ok(acc)
}

/// i_beta = min { i : beta <= eps_i }.
pub fn i_beta(chain: &KeyPolyChain, beta: &ExtValue) -> Option<usize> {
    chain.entries().iter().position(|e| *beta <= e.eps).map(|k| k + 1)
}

/// lambda(f, beta) with its argmin sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaU {
    pub i_beta: usize,
    pub lambda: ExtValue,
    pub u: Vec<usize>,
    pub u0: Vec<usize>,
}

/// lambda(f, beta) = min_{b >= 1} { nu_{i_beta}(d_b f) + b beta }, U its argmin,
/// U0 the part of U whose derivative has a T-free initial form at eps_{i_beta}.
/// `root` is the computed development of the root.
pub fn lambda_and_u(f: &ValPoly, beta: &ExtValue, chain: &KeyPolyChain, root: &GenSeries) -> Result<LambdaU, TruncError> {
    let ib = i_beta(chain, beta).ok_or(TruncError::ChainExhausted(chain.len()))?;
    let mut lambda = ExtValue::Inf;
    let mut vals = Vec::new();
    for b in 1..=f.degree() {
        let d = f.hasse(b);
        if d.is_zero() {
            continue;
        }
        let v = chain.truncated_val(&d, ib)?.value.add(&ext_mul(beta, b as u64));
        lambda = ExtValue::min(lambda.clone(), v.clone());
        vals.push((b, v));
    }
    let u: Vec<usize> = if lambda.is_inf() {
        vals.iter().map(|(b, _)| *b).collect()
    } else {
        vals.iter().filter(|(_, v)| *v == lambda).map(|(b, _)| *b).collect()
    };
    let eps = chain.entry(ib).eps.clone();
    let mut u0 = Vec::new();
    for &b in &u {
        if t_free_initial(&f.hasse(b), &eps, root)? {
            u0.push(b);
        }
    }
    Ok(LambdaU { i_beta: ib, lambda, u, u0 })
}

/// The initial form of g(u(eps) + T) with v(T) = eps has no T.
fn t_free_initial(g: &ValPoly, eps: &ExtValue, root: &GenSeries) -> Result<bool, TruncError> {
    let ExtValue::Fin(e) = eps else {
        return Ok(true);
    };
    let u = root.truncate_open(e)?.to_exact();
    let v0 = value_of(&g.eval(&u))?;
    for k in 1..=g.degree() {
        let d = g.hasse(k);
        if d.is_zero() {
            continue;
        }
        let v = value_of(&d.eval(&u))?.add(&ExtValue::Fin(e.mul_int(k as i64)));
        if v <= v0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Leading monomial of the series.
fn initial_monomial(s: &GenSeries) -> Result<GenSeries, SeriesError> {
    let (e, c) = s.leading_term()?;
    Ok(GenSeries::monomial(s.ring(), e, c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncMode {
    /// iota_beta(f)(lambda) at u(beta).
    Open,
    /// tau_beta(f)[lambda] at u[beta].
    Closed,
}

/// F(X) = F0 + sum_{b in U0} in_v(d_b f) X^b and the center it is evaluated at.
#[derive(Clone, Debug)]
pub struct TaylorForm {
    pub f0: GenSeries,
    pub terms: Vec<(usize, GenSeries)>,
    pub center: GenSeries,
    /// Truncation being described.
    pub target: GenSeries,
    pub data: LambdaU,
    /// 0 stands for the empty prefix (center taken from zero).
    pub i0: usize,
    /// Conditions on intermediate indices held only because there were none.
    pub vacuous: bool,
}

impl TaylorForm {
    pub fn eval_at(&self, x: &GenSeries) -> GenSeries {
        let mut acc = self.f0.clone();
        for (b, c) in &self.terms {
            acc = acc.add(&c.mul(&x.pow(*b as u32)));
        }
        acc
    }
    /// Degree of the relation in X.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(b, _)| *b).max().unwrap_or(0)
    }
}

/// The truncation of f at (u(beta), lambda) or [u[beta], lambda] written as a
/// polynomial in the center.
pub fn taylor_form(f: &ValPoly, beta: &ExtValue, chain: &KeyPolyChain, root: &GenSeries, mode: TruncMode) -> Result<TaylorForm, TruncError> {
    let data = lambda_and_u(f, beta, chain, root)?;
    let mut in_forms = Vec::new();
    for &b in &data.u0 {
        in_forms.push((b, initial_monomial(&f.hasse(b).eval(root))?));
    }
    let (i0, vacuous) = choose_i0(f, beta, chain, root, &data)?;
    let base = if i0 == 0 {
        GenSeries::zero(f.ring())
    } else {
        trunc_closed_ext(root, &chain.entry(i0).eps)?.to_exact()
    };
    let at = match mode {
        TruncMode::Open => trunc_ext(root, beta)?.to_exact(),
        TruncMode::Closed => trunc_closed_ext(root, beta)?.to_exact(),
    };
    let center = at.sub(&base);
    let value = f.eval(&at);
    let target = match (&data.lambda, mode) {
        (ExtValue::Inf, _) => value,
        (ExtValue::Fin(l), TruncMode::Open) => value.truncate_open(l)?,
        (ExtValue::Fin(l), TruncMode::Closed) => value.truncate_closed(l)?,
    }
    .to_exact();
    let mut f0 = target.clone();
    for (b, c) in &in_forms {
        f0 = f0.sub(&c.mul(&center.pow(*b as u32)));
    }
    Ok(TaylorForm { f0, terms: in_forms, center, target, data, i0, vacuous })
}

/// Largest i0 < i_beta meeting the conditions on U0; 0 when none does.
fn choose_i0(f: &ValPoly, beta: &ExtValue, chain: &KeyPolyChain, root: &GenSeries, data: &LambdaU) -> Result<(usize, bool), TruncError> {
    let ib = data.i_beta;
    for cand in (1..ib).rev() {
        let mut ok = true;
        for &b in &data.u0 {
            let d = f.hasse(b);
            let nu = chain.valuation(&d);
            if nu.as_ref().ok() != Some(&chain.truncated_val(&d, cand)?.value) {
                ok = false;
            }
        }
        for i in cand + 1..ib {
            let ei = chain.entry(i).eps.clone();
            for b in 0..=f.degree() {
                let d = f.hasse(b);
                if d.is_zero() {
                    continue;
                }
                let Ok(nu) = chain.valuation(&d) else {
                    ok = false;
                    continue;
                };
                if data.u0.contains(&b) {
                    let full = d.eval(root);
                    let rest = full.sub(&initial_monomial(&full)?);
                    if let (Ok(vr), ExtValue::Fin(_)) = (rest.val_ext(), &nu) {
                        let lhs = crate::keypoly::ext_sub(&vr, &nu);
                        let rhs = crate::keypoly::ext_sub(beta, &ei);
                        if let (Some(l), Some(r)) = (lhs, rhs) {
                            if l <= r {
                                ok = false;
                            }
                        }
                    }
                } else if nu.add(&ext_mul(&ei, b as u64)) <= data.lambda && b > 0 {
                    ok = false;
                }
            }
        }
        if ok {
            return Ok((cand, cand + 1 == ib));
        }
    }
    Ok((0, ib == 1))
}

/// Integral dependence relation of u(beta) and the value of its evaluation.
#[derive(Clone, Debug)]
pub struct Relation {
    pub form: TaylorForm,
    pub residual: ExtValue,
    pub degree: usize,
    pub max_u0: usize,
    pub key_degree: usize,
}

impl Relation {
    pub fn holds(&self, working_prec: &ExtValue) -> bool {
        self.residual >= *working_prec && self.degree == self.max_u0
    }
}

/// Relation F0~ + sum_{b in U0} in_v(d_b Q) X^b for Q = Q_{i_beta}, evaluated at
/// u(beta) - u[eps_{i0}].
pub fn integral_dependence(beta: &ExtValue, chain: &KeyPolyChain, root: &GenSeries) -> Result<Relation, TruncError> {
    let ib = i_beta(chain, beta).ok_or(TruncError::ChainExhausted(chain.len()))?;
    let q = chain.entry(ib).q.clone();
    let form = taylor_form(&q, beta, chain, root, TruncMode::Open)?;
    let ev = form.eval_at(&form.center);
    let residual = ev.val_ext()?;
    let degree = form.degree();
    let max_u0 = form.data.u0.iter().copied().max().unwrap_or(0);
    Ok(Relation { form, residual, degree, max_u0, key_degree: q.degree() })
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub residual: ExtValue,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "check={} status={} residual_val={}", self.name, if self.pass { "PASS" } else { "FAIL" }, self.residual)
    }
}

/// No sample polynomial of degree below `deg` vanishes at `u` to precision.
pub fn sample_nonvanishing(samples: &[ValPoly], deg: usize, u: &GenSeries) -> bool {
    samples.iter().filter(|s| !s.is_zero() && s.degree() < deg).all(|s| !s.eval(u).is_zero_to_prec())
}
