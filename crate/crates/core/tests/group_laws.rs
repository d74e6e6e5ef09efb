use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use gpuiseux::value_group::{parse_element, GroupDescriptor, GroupElement, Lattice, Weight};

fn surd_desc() -> Arc<GroupDescriptor> {
    let ws = vec![Weight::rational(BigRational::one()), Weight { rational: BigRational::new(1.into(), 3.into()), surd: BigRational::one() }];
    Arc::new(GroupDescriptor::new(ws, 2, 1).unwrap())
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn elem() -> impl Strategy<Value = GroupElement> {
    (-20i64..20, 1i64..7, -20i64..20, 1i64..7).prop_map(|(a, b, c, d)| GroupElement::new(&surd_desc(), vec![q(a, b), q(c, d)]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn order_is_translation_invariant(a in elem(), b in elem(), c in elem()) {
        prop_assert_eq!(a.cmp(&b), (&a + &c).cmp(&(&b + &c)));
        prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
        if a < b && b < c {
            prop_assert!(a < c);
        }
    }

    #[test]
    fn order_matches_real_values(a in elem(), b in elem()) {
        let (x, y) = (a.to_f64(), b.to_f64());
        if (x - y).abs() > 1e-9 {
            prop_assert_eq!(a < b, x < y);
        }
    }

    #[test]
    fn membership_reproduces_element(n in -6i64..6, m in -6i64..6, a in elem(), b in elem()) {
        let target = &a.mul_int(n) + &b.mul_int(m);
        let coef = target.membership(&[a.clone(), b.clone()]);
        prop_assert!(coef.is_some());
        let mut acc = GroupElement::zero(&surd_desc());
        for (c, g) in coef.unwrap().iter().zip([&a, &b]) {
            acc = &acc + &g.scale_hull(c);
        }
        prop_assert_eq!(acc, target);
    }

    #[test]
    fn print_parse_round_trip(a in elem()) {
        let s = a.to_string();
        let back = parse_element(&surd_desc(), &s).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.to_string(), s);
    }

    #[test]
    fn lattice_contains_its_combinations(n in -5i64..5, m in -5i64..5) {
        let d = surd_desc();
        let gens = [GroupElement::new(&d, vec![q(1, 2), q(0, 1)]), GroupElement::new(&d, vec![q(0, 1), q(1, 1)])];
        let lat = Lattice::new(&d, &gens);
        let x = &gens[0].mul_int(n) + &gens[1].mul_int(m);
        prop_assert!(lat.contains(&x));
        let off = &x + &GroupElement::new(&d, vec![q(1, 4), q(0, 1)]);
        prop_assert!(!lat.contains(&off));
    }
}

#[test]
fn rank_one_prints_as_rational() {
    let d = GroupDescriptor::rational(2);
    let a = GroupElement::from_ratio(&d, -7, 4);
    assert_eq!(a.to_string(), "-7/4");
    assert_eq!(parse_element(&d, "-7/4").unwrap(), a);
    assert!(Zero::is_zero(&(&a - &a).coords()[0]));
}
