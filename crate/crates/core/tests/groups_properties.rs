use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use redlab::arith::{factor_u64, multiplicative_order, primes_in_range, valuation, PrimeContext};
use redlab::groups::{
    curve_group_order, curve_reduce, element_order, l_primary_part, l_primary_part_from_multiple, reduce_torus_point,
    torus_order_valuation, CurvePointQ, EcPoint, FactoredRational, GroupElement, ReducedPoint, TorusPoint,
    WeierstrassCurve,
};

fn curve_strategy() -> impl Strategy<Value = WeierstrassCurve> {
    prop::array::uniform5(-20i64..=20).prop_filter_map("singular", |a| WeierstrassCurve::from_coefficients(a).ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn group_order_kills_random_points(e in curve_strategy(), start in 500u64..40_000, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in primes_in_range(start, start + 300).into_iter().filter(|&p| e.has_good_reduction(p)).take(4) {
            let ctx = PrimeContext::new(p).unwrap();
            let n = curve_group_order(&e, &ctx, seed).unwrap();
            let (lo, hi) = e.reduce(p).unwrap().hasse_interval();
            prop_assert!(lo <= n && n <= hi);
            let c = e.reduce(p).unwrap();
            for _ in 0..20 {
                let q = c.random_point(&mut rng);
                prop_assert_eq!(c.mul(q, n), EcPoint::Infinity);
            }
            prop_assert_eq!(curve_group_order(&e, &ctx, seed.wrapping_add(1)).unwrap(), n);
        }
    }

    #[test]
    fn torus_valuation_is_coordinate_max(
        coords in prop::collection::vec((-60i64..60, 1i64..60), 1..4),
        idx in 0usize..500,
        l in prop::sample::select(vec![2u64, 3, 5]),
    ) {
        let coords: Vec<FactoredRational> = coords
            .into_iter()
            .filter(|&(n, _)| n != 0)
            .map(|(n, d)| FactoredRational::from_ratio(n, d).unwrap())
            .collect();
        prop_assume!(!coords.is_empty());
        let point = TorusPoint::new(coords.clone()).unwrap();
        let p = primes_in_range(61, 20_000)[idx];
        prop_assume!(p != l);
        let ctx = PrimeContext::new(p).unwrap();
        let expected = coords
            .iter()
            .map(|c| valuation(multiplicative_order(c.residue(p).unwrap(), &ctx).unwrap(), l))
            .max()
            .unwrap();
        prop_assert_eq!(torus_order_valuation(&point, &ctx, l).unwrap(), expected);

        let g = reduce_torus_point(&point, &ctx).unwrap();
        let ord = element_order(&g, p - 1, ctx.p_minus_1());
        let exact = l_primary_part(&g, ord, l);
        let lazy = l_primary_part_from_multiple(&g, p - 1, l);
        prop_assert_eq!(exact.a, expected);
        prop_assert_eq!(&exact.component, &lazy.component);
        prop_assert_eq!(element_order(&exact.component, p - 1, ctx.p_minus_1()), l.pow(expected));
        let rest = g.op(&exact.component.inverse());
        prop_assert_ne!(element_order(&rest, p - 1, ctx.p_minus_1()) % l, 0);
    }
}

/// Rational torsion points keep their order at every good prime not dividing it.
#[test]
fn torsion_orders_survive_reduction() {
    let cases = [
        ([0, 0, 0, 0, 1], (2, 3), 6u64),
        ([0, 0, 0, -1, 0], (0, 0), 2),
        ([0, 0, 0, 0, -432], (12, 36), 3),
        ([1, 0, 0, -45, 81], (0, 9), 10),
        ([0, -1, 1, -10, -20], (5, 5), 5),
    ];
    for (a, (x, y), n) in cases {
        let e = WeierstrassCurve::from_coefficients(a).unwrap();
        let t = CurvePointQ::integral(x, y);
        assert!(e.contains(&t), "{e} does not contain ({x},{y})");
        let nf = factor_u64(n).unwrap();
        for p in primes_in_range(2, 5000) {
            if !e.has_good_reduction(p) || n % p == 0 {
                continue;
            }
            let ctx = PrimeContext::new(p).unwrap();
            let red: ReducedPoint = curve_reduce(&e, &t, &ctx).unwrap();
            assert!(red.times(n).is_identity(), "{e} at {p}");
            assert_eq!(element_order(&red, n, &nf), n, "{e} ({x},{y}) mod {p}");
        }
    }
}
