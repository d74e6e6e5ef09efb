//! Self-checks run against a finished expansion.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gpuiseux::embed::{Branch, Expander, Expansion, Status};
use gpuiseux::keypoly::{KeyPolyChain, ValPoly};
use gpuiseux::series::{GenSeries, Mode, SeriesRing};
use gpuiseux::truncalg::{integral_dependence, multi_product_truncation, product_truncation, stab_truncation, taylor_form, CheckLine, TruncError, TruncMode};
use gpuiseux::value_group::{ExtValue, GroupElement};

/// Random polynomials and series with exponents in the span of `gens`.
pub struct Sampler {
    rng: ChaCha8Rng,
    ring: Arc<SeriesRing>,
    gens: Vec<GroupElement>,
}

impl Sampler {
    pub fn new(ring: &Arc<SeriesRing>, gens: &[GroupElement], seed: u64) -> Self {
        let mut gens = gens.to_vec();
        if gens.is_empty() {
            gens.push(GroupElement::unit(ring.descriptor(), 0));
        }
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), ring: ring.clone(), gens }
    }

    pub fn exponent(&mut self) -> GroupElement {
        let mut e = GroupElement::zero(self.ring.descriptor());
        for g in &self.gens {
            e = &e + &g.mul_int(self.rng.random_range(0..3));
        }
        e
    }

    /// Nonzero exact series with up to `n` terms.
    pub fn series(&mut self, n: usize) -> GenSeries {
        loop {
            let mut s = GenSeries::zero(&self.ring);
            for _ in 0..self.rng.random_range(1..=n) {
                // negative integers have no finite p-adic digit expansion
                let c = if self.ring.mode() == Mode::PAdic { self.rng.random_range(0i64..=4) } else { self.rng.random_range(-3i64..=3) };
                let e = self.exponent();
                let m = GenSeries::from_int(&self.ring, c).mul(&GenSeries::var_pow(&self.ring, e));
                s = s.add(&m);
            }
            if !s.is_exact_zero() {
                return s;
            }
        }
    }

    /// Nonzero polynomial of degree at most `deg`.
    pub fn poly(&mut self, deg: usize) -> ValPoly {
        loop {
            let d = self.rng.random_range(0..=deg);
            let coeffs: Vec<GenSeries> = (0..=d).map(|_| if self.rng.random_bool(0.25) { GenSeries::zero(&self.ring) } else { self.series(3) }).collect();
            let f = ValPoly::new(&self.ring, coeffs);
            if !f.is_zero() {
                return f;
            }
        }
    }
}

/// Value of a series; an inexact zero in mixed characteristic reads as infinite.
fn value(s: &GenSeries) -> Option<ExtValue> {
    match s.val_ext() {
        Ok(v) => Some(v),
        Err(_) if s.ring().mode() == Mode::PAdic => Some(ExtValue::Inf),
        Err(_) => None,
    }
}

fn line(name: &str, pass: bool, residual: ExtValue) -> CheckLine {
    CheckLine { name: name.into(), pass, residual }
}

fn ext_scale(v: &ExtValue, k: usize) -> ExtValue {
    match v {
        ExtValue::Inf => ExtValue::Inf,
        ExtValue::Fin(g) => ExtValue::Fin(g.mul_int(k as i64)),
    }
}

/// v(F(u)) against min_{b >= 1} v(d_b F(u)) + b * prec(u), infinite when complete.
pub fn residual_check(f: &ValPoly, exp: &Expansion) -> CheckLine {
    let u = exp.series.to_exact();
    let v = value(&f.eval(&u)).unwrap_or(ExtValue::Inf);
    let exact = exp.status == Status::Complete && exp.limit_poly.is_none();
    if exact {
        return line("residual", v.is_inf(), v);
    }
    let prec = exp.series.prec().at.clone();
    let mut floor = ExtValue::Inf;
    for b in 1..=f.degree() {
        let d = f.hasse(b);
        if d.is_zero() {
            continue;
        }
        let dv = value(&d.eval(&u)).unwrap_or(ExtValue::Inf);
        floor = ExtValue::min(floor, dv.add(&ext_scale(&prec, b)));
    }
    line("residual", v >= floor, v)
}

/// The final development is a partial development of its own precision.
pub fn partial_check(ex: &mut Expander, exp: &Expansion) -> CheckLine {
    let beta = if exp.status == Status::Complete && exp.limit_poly.is_none() { ExtValue::Inf } else { exp.series.prec().at.clone() };
    let ok = ex.state_at(exp.series.to_exact(), beta.clone()).and_then(|st| ex.is_partial_development(&st));
    match ok {
        Ok(r) => line("partial", r.holds, beta),
        Err(_) => line("partial", false, beta),
    }
}

fn chain_samples(chain: &KeyPolyChain, s: &mut Sampler, i: usize, n: usize) -> Vec<ValPoly> {
    let deg = 2 * chain.entry(i).q.degree();
    (0..n).map(|_| s.poly(deg)).collect()
}

/// Derivative minimum, derivative drop bound and minimum attainment on sampled
/// polynomials at every index with finite eps.
pub fn chain_checks(chain: &KeyPolyChain, s: &mut Sampler, n: usize) -> Vec<CheckLine> {
    let (mut min_ok, mut gap_ok, mut attain_ok) = (true, true, true);
    let mut worst = ExtValue::Inf;
    for i in 1..=chain.len() {
        if chain.entry(i).eps.is_inf() {
            continue;
        }
        for h in chain_samples(chain, s, i, n) {
            match chain.derivative_min_check(&h, i) {
                Ok(r) => {
                    if !r.holds {
                        min_ok = false;
                        worst = ExtValue::min(worst, r.truncated);
                    }
                }
                Err(_) => min_ok = false,
            }
            gap_ok &= chain.derivative_gap_check(&h, i).unwrap_or(false);
            attain_ok &= chain.attained_min_check(&h, i).map(|r| r.holds).unwrap_or(false);
        }
    }
    vec![line("min", min_ok, worst.clone()), line("gap", gap_ok, worst.clone()), line("attain", attain_ok, worst)]
}

/// Product truncation identity on random pairs, and the monomial-by-monomial
/// rebuild of f(u) truncated.
pub fn caltron_check(f: Option<&ValPoly>, u: &GenSeries, s: &mut Sampler, n: usize) -> CheckLine {
    let mut ok = true;
    let padic = s.ring.mode() == Mode::PAdic;
    for _ in 0..n {
        let g = s.series(4);
        let h = s.series(4);
        let (Ok(vg), Ok(vh)) = (g.val(), h.val()) else { continue };
        let lam = &(&vg + &vh) + &s.exponent();
        let lam = if lam == &vg + &vh { &lam + &GroupElement::unit(s.ring.descriptor(), 0) } else { lam };
        let Ok(d) = product_truncation(&g, &h, &lam) else {
            ok = false;
            continue;
        };
        let direct = g.mul(&h).truncate_open(&lam).map(|x| x.to_exact());
        // carries may push terms of the right-hand side past lambda
        let rhs = d.apply(&g, &h).and_then(|a| if padic { a.truncate_open(&lam).map(|x| x.to_exact()) } else { Ok(a) });
        ok &= d.well_formed(&vg, &vh) && rhs.is_ok_and(|a| direct.is_ok_and(|x| a.same_terms(&x)));
    }
    let gs: Vec<GenSeries> = (0..3).map(|_| s.series(3)).collect();
    let lam = &gs.iter().fold(GroupElement::zero(s.ring.descriptor()), |a, x| &a + &x.val().unwrap()) + &GroupElement::unit(s.ring.descriptor(), 0);
    ok &= multi_product_truncation(&gs, &lam).is_ok_and(|t| {
        let direct = gs[0].mul(&gs[1]).mul(&gs[2]).truncate_open(&lam).unwrap().to_exact();
        t.evaluate(&gs).and_then(|e| if padic { e.truncate_open(&lam).map(|x| x.to_exact()) } else { Ok(e) }).is_ok_and(|e| e.same_terms(&direct))
    });
    if let Some(f) = f {
        let u = u.to_exact();
        let fu = f.eval(&u);
        if let Ok(v) = fu.val() {
            let lam = &v + &GroupElement::unit(s.ring.descriptor(), 0);
            let direct = fu.truncate_open(&lam).map(|x| x.to_exact());
            let rebuilt = stab_truncation(f, &u, &lam).and_then(|a| if padic { a.truncate_open(&lam).map(|x| x.to_exact()).map_err(Into::into) } else { Ok(a) });
            ok &= rebuilt.is_ok_and(|a| direct.is_ok_and(|x| a.same_terms(&x)));
        }
    }
    line("caltron", ok, ExtValue::Inf)
}

/// Taylor forms at each step value reproduce their truncations, and the
/// integral dependence relation vanishes at its center.
pub fn taylor_checks(f: Option<&ValPoly>, exp: &Expansion) -> Vec<CheckLine> {
    let chain = &exp.chain;
    let mut betas: Vec<ExtValue> = exp.trace.iter().filter(|r| r.branch != Branch::Limit).map(|r| ExtValue::Fin(r.beta.clone())).collect();
    let skip = |e: &TruncError| matches!(e, TruncError::Precondition(_) | TruncError::ChainExhausted(_));
    let mut taylor_ok = true;
    let mut ent_ok = true;
    let mut ent_res = ExtValue::Inf;
    let working = if exp.status == Status::Complete && exp.limit_poly.is_none() { ExtValue::Inf } else { exp.series.prec().at.clone() };
    // the closed truncation at the working precision is not known, so only
    // the ent relation is checked there
    let traced = betas.len();
    if !betas.contains(&working) {
        betas.push(working.clone());
    }
    for (k, beta) in betas.iter().enumerate() {
        if let (Some(f), true) = (f, k < traced || working.is_inf()) {
            match taylor_form(f, beta, chain, &exp.series, TruncMode::Closed) {
                Ok(tf) => taylor_ok &= tf.eval_at(&tf.center).same_terms(&tf.target),
                Err(e) if skip(&e) => {}
                Err(_) => taylor_ok = false,
            }
        }
        match integral_dependence(beta, chain, &exp.series) {
            Ok(rel) => {
                let w = match (beta, &working) {
                    (ExtValue::Inf, w) => w.clone(),
                    (b, w) => ExtValue::min(b.clone(), w.clone()),
                };
                if !rel.holds(&w) {
                    ent_ok = false;
                    ent_res = ExtValue::min(ent_res, rel.residual);
                }
            }
            Err(e) if skip(&e) => {}
            Err(_) => ent_ok = false,
        }
    }
    let mut out = vec![];
    if f.is_some() {
        out.push(line("taylor", taylor_ok, ExtValue::Inf));
    }
    out.push(line("ent", ent_ok, ent_res));
    out
}

/// nu(h) agrees with v(h(u)) whenever the latter is determined by the computed terms.
pub fn valuation_check(chain: &KeyPolyChain, u: &GenSeries, deg: usize, s: &mut Sampler, n: usize) -> CheckLine {
    let mut ok = true;
    let mut compared = 0usize;
    let mut worst = ExtValue::Inf;
    for _ in 0..n {
        let h = s.poly(deg.saturating_sub(1));
        let Ok(nu) = chain.valuation(&h) else { continue };
        let hv = h.eval(u);
        let Ok(v) = hv.val_ext() else { continue };
        compared += 1;
        if v != nu {
            ok = false;
            worst = ExtValue::min(worst, v);
        }
    }
    line("valuation", ok && (compared > 0 || n == 0), worst)
}

/// All checks for a run, in a fixed order.
pub fn run_all(ex: &mut Expander, exp: &Expansion, samples: usize, seed: u64) -> Vec<CheckLine> {
    let ring = exp.series.ring().clone();
    let chain = exp.chain.clone();
    let f = ex.poly().cloned();
    let mut s = Sampler::new(&ring, chain.lower(), seed);
    let mut out = Vec::new();
    if let Some(f) = &f {
        out.push(residual_check(f, exp));
    }
    out.push(partial_check(ex, exp));
    out.extend(chain_checks(&chain, &mut s, samples));
    out.push(caltron_check(f.as_ref(), &exp.series, &mut s, samples));
    out.extend(taylor_checks(f.as_ref(), exp));
    let deg = match &f {
        Some(f) => f.degree(),
        None => chain.entry(chain.len()).q.degree(),
    };
    out.push(valuation_check(&chain, &exp.series, deg, &mut s, samples));
    out
}
