use std::sync::Arc;

use proptest::prelude::*;

use gpuiseux::coeff::{BaseRing, CoeffElem, Tower, WittRing};
use gpuiseux::series::{parse_series, GenSeries, Prec, SeriesRing};
use gpuiseux::value_group::{ExtValue, GroupDescriptor, GroupElement};

fn ring(kind: usize) -> Arc<SeriesRing> {
    match kind {
        0 => SeriesRing::t_adic(&GroupDescriptor::rational(1), &Tower::new(BaseRing::Rational)),
        1 => SeriesRing::t_adic(&GroupDescriptor::rational(3), &Tower::new(BaseRing::Prime(3))),
        _ => SeriesRing::p_adic(&GroupDescriptor::rational(1), &WittRing::new(3, 6)),
    }
}

fn g(r: &Arc<SeriesRing>, n: i64, d: i64) -> GroupElement {
    GroupElement::from_ratio(r.descriptor(), n, d)
}

type Raw = (Vec<(i64, i64)>, Option<i64>);

/// Terms `c * t^(n/6)`, optionally with precision `O(t^(m/6))`.
fn raw() -> impl Strategy<Value = Raw> {
    (prop::collection::vec((0i64..30, -3i64..4), 0..5), prop::option::of(6i64..40))
}

fn build(r: &Arc<SeriesRing>, (terms, prec): &Raw, nonneg: bool) -> GenSeries {
    let tower = r.tower();
    let terms = terms.iter().map(|(e, c)| (g(r, *e, 6), CoeffElem::from_int(tower, if nonneg { c.abs() } else { *c }))).collect();
    let prec = match prec {
        Some(m) => Prec::open(g(r, *m, 6)),
        None => Prec::exact(),
    };
    GenSeries::from_terms(r, terms, prec)
}

fn kinds() -> impl Strategy<Value = usize> {
    0usize..3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ring_laws_on_overlap(k in kinds(), a in raw(), b in raw(), c in raw()) {
        let r = ring(k);
        let nonneg = k == 2;
        let (x, y, z) = (build(&r, &a, nonneg), build(&r, &b, nonneg), build(&r, &c, nonneg));
        prop_assert!(x.add(&y).add(&z).agrees_with(&x.add(&y.add(&z))));
        prop_assert!(x.mul(&y).mul(&z).agrees_with(&x.mul(&y.mul(&z))));
        prop_assert!(x.mul(&y.add(&z)).agrees_with(&x.mul(&y).add(&x.mul(&z))));
        prop_assert!(x.mul(&y).agrees_with(&y.mul(&x)));
    }

    #[test]
    fn valuation_rules(k in 0usize..2, a in raw(), b in raw()) {
        let r = ring(k);
        let (x, y) = (build(&r, &(a.0, None), false), build(&r, &(b.0, None), false));
        if let (Ok(vx), Ok(vy)) = (x.val(), y.val()) {
            prop_assert_eq!(x.mul(&y).val().unwrap(), &vx + &vy);
            let s = x.add(&y);
            let m = vx.clone().min(vy.clone());
            match s.val_ext().unwrap() {
                ExtValue::Fin(v) => {
                    prop_assert!(v >= m);
                    if vx != vy {
                        prop_assert_eq!(v, m);
                    }
                }
                ExtValue::Inf => prop_assert_eq!(vx, vy),
            }
        }
    }

    #[test]
    fn reassembly(k in kinds(), a in raw(), lo in 0i64..30, step in 0i64..20) {
        let r = ring(k);
        let x = build(&r, &a, k == 2);
        let (b1, b2) = (g(&r, lo, 6), g(&r, lo + step, 6));
        if ExtValue::Fin(b2.clone()) <= x.prec().at {
            // truncations are finite objects; the identity is on their terms
            let joined = x.truncate_open(&b1).unwrap().to_exact().add(&x.slice(&b1, &b2).unwrap().to_exact());
            prop_assert!(joined.same_terms(&x.truncate_open(&b2).unwrap()));
        }
    }

    #[test]
    fn print_parse_round_trip(k in kinds(), a in raw()) {
        let r = ring(k);
        let x = build(&r, &a, k == 2);
        let s = x.to_string();
        let back = parse_series(&r, r.tower(), &s).unwrap();
        prop_assert!(back.same_as(&x));
        prop_assert_eq!(back.to_string(), s);
    }

    #[test]
    fn pseries_normal_form_idempotent(a in raw()) {
        let r = ring(2);
        let x = build(&r, &a, true);
        prop_assert!(x.normalize_pseries().same_as(&x));
        prop_assert!(x.terms().iter().all(|(_, c)| c.in_base().is_some_and(|d| d.is_integer() && *d.numer() >= 0.into() && *d.numer() < 3.into())));
    }

    #[test]
    fn unit_inverse(k in kinds(), a in raw()) {
        let r = ring(k);
        let x = GenSeries::one(&r).add(&build(&r, &(a.0.iter().map(|(e, c)| (e + 1, *c)).collect(), None), k == 2));
        let target = g(&r, 4, 1);
        let inv = x.inv(Some(&target)).unwrap();
        let prod = x.mul(&inv).truncate_open(&target).unwrap();
        prop_assert!(prod.same_terms(&GenSeries::one(&r)));
    }
}
