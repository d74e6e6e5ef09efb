use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use gpuiseux::coeff::{adjoin_root, parse_coeff, BaseRing, CoeffElem, Tower, WittRing};

fn towers() -> Vec<Arc<Tower>> {
    let q = Tower::new(BaseRing::Rational);
    let f5 = Tower::new(BaseRing::Prime(5));
    let f2 = Tower::new(BaseRing::Prime(2));
    let one = |t: &Arc<Tower>| CoeffElem::one(t);
    // w^2 + w + 1 over F_2 and w^2 - 2 over Q
    let f4 = adjoin_root(&f2, &[one(&f2), one(&f2), one(&f2)], true).unwrap().0;
    let q2 = adjoin_root(&q, &[CoeffElem::from_int(&q, -2), CoeffElem::from_int(&q, 0), one(&q)], true).unwrap().0;
    vec![q, f5, f4, q2]
}

fn elem(t: &Arc<Tower>, raw: &[(i64, i64)]) -> CoeffElem {
    let coords = (0..t.dim()).map(|k| {
        let (n, d) = raw[k % raw.len()];
        BigRational::new(BigInt::from(n), BigInt::from(d))
    });
    let c = CoeffElem::from_coords(t, coords.collect());
    // reduce into the base field
    &c + &CoeffElem::zero(t)
}

fn raw() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-9i64..10, 1i64..5), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn field_axioms(k in 0usize..4, a in raw(), b in raw(), c in raw()) {
        let t = &towers()[k];
        let (x, y, z) = (elem(t, &a), elem(t, &b), elem(t, &c));
        prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert!((&x - &x).is_zero());
        if !x.is_zero() {
            let inv = x.inv().unwrap();
            prop_assert!((&x * &inv).is_one());
        }
    }

    #[test]
    fn print_parse_round_trip(k in 0usize..4, a in raw()) {
        let t = &towers()[k];
        let x = elem(t, &a);
        prop_assert_eq!(parse_coeff(t, &x.to_string()).unwrap(), x);
    }

    #[test]
    fn witt_matches_integers(p in prop::sample::select(vec![2u64, 3, 5, 7]), a in 0i64..100_000, b in 0i64..100_000) {
        let w = WittRing::new(p, 5);
        let m = (p as i64).pow(5);
        let (x, y) = (w.from_int(a), w.from_int(b));
        prop_assert_eq!(x.add(&y), w.from_int((a + b) % m));
        prop_assert_eq!(x.mul(&y), w.from_int(((a % m) * (b % m)) % m));
        prop_assert_eq!(x.sub(&y), w.from_int((a - b).rem_euclid(m)));
        prop_assert_eq!(w.from_digits(&x.digits()), x.clone());
        if a % p as i64 != 0 {
            prop_assert!(x.mul(&x.inv().unwrap()) == w.from_int(1));
            // p times a unit lies in the maximal ideal
            prop_assert!(w.from_int(p as i64).mul(&x).digits()[0].is_zero());
        }
    }

    #[test]
    fn witt_lift_is_a_section(p in prop::sample::select(vec![2u64, 3, 5]), d in 0i64..5) {
        let w = WittRing::new(p, 4);
        let c = CoeffElem::from_int(w.residue_tower(), d);
        prop_assert_eq!(w.lift(&c).residue(), c);
    }
}

#[test]
fn adjoin_is_deterministic() {
    let f2 = Tower::new(BaseRing::Prime(2));
    let one = CoeffElem::one(&f2);
    let p = [one.clone(), one.clone(), one.clone()];
    let (t1, r1) = adjoin_root(&f2, &p, true).unwrap();
    let (t2, r2) = adjoin_root(&f2, &p, true).unwrap();
    assert_eq!(t1.describe(), t2.describe());
    assert_eq!(r1.to_string(), r2.to_string());
    assert_eq!(t1.size(), Some(4));
}
