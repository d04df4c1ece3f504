use proptest::prelude::*;
use redlab::groups::{FactoredRational, TorusPoint};
use redlab::structure::{
    decide_criterion, decide_criterion_with_slack, hermite_normal_form, verify_witness, DeclaredCoordinate,
    DeclaredPresentation, IntMatrix, PresentedSubgroup, Target, Verdict,
};

fn smooth_rational() -> impl Strategy<Value = FactoredRational> {
    (any::<bool>(), -2i32..=2, -1i32..=1, -1i32..=1, 1i64..8).prop_map(|(neg, a, b, c, extra)| {
        let (mut n, mut d) = (extra, 1i64);
        for (q, k) in [(2i64, a), (3, b), (5, c)] {
            if k >= 0 {
                n *= q.pow(k as u32);
            } else {
                d *= q.pow((-k) as u32);
            }
        }
        FactoredRational::from_ratio(if neg { -n } else { n }, d).unwrap()
    })
}

fn points() -> impl Strategy<Value = Vec<TorusPoint>> {
    prop::collection::vec(smooth_rational(), 1..4)
        .prop_map(|cs| cs.into_iter().map(|c| TorusPoint::new(vec![c]).unwrap()).collect())
}

fn target_for(l: u64, values: &[u32]) -> Target {
    Target::new("t", values.iter().enumerate().map(|(i, &a)| ((l, i), a)))
}

fn verify_all(sub: &PresentedSubgroup, pts: &[TorusPoint], values: &[u32], v: &redlab::structure::CriterionVerdict) {
    for w in v.witnesses() {
        verify_witness(sub, Some(pts), values, w).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slack_never_loses_positivity(
        pts in points(),
        l in prop::sample::select(vec![2u64, 3]),
        raw in prop::collection::vec(0u32..3, 3),
    ) {
        let values = &raw[..pts.len()];
        let sub = PresentedSubgroup::torus(&pts).unwrap();
        let t = target_for(l, values);
        let base = decide_criterion(&sub, &t).unwrap();
        for slack in 1..3 {
            let wider = decide_criterion_with_slack(&sub, &t, slack).unwrap();
            prop_assert_eq!(wider.verdict, base.verdict);
            verify_all(&sub, &pts, values, &wider);
        }
        verify_all(&sub, &pts, values, &base);
    }

    #[test]
    fn component_shift_preserves_verdict(
        pts in points(),
        l in prop::sample::select(vec![2u64, 3, 5]),
        raw in prop::collection::vec(0u32..3, 3),
        b in 1i64..15,
    ) {
        prop_assume!(!(b as u64).is_multiple_of(l));
        let values = &raw[..pts.len()];
        let t = target_for(l, values);
        let sub = PresentedSubgroup::torus(&pts).unwrap();
        let moved_pts: Vec<TorusPoint> = pts.iter().map(|p| p.pow(b)).collect();
        let moved = PresentedSubgroup::torus(&moved_pts).unwrap();
        let v = decide_criterion(&sub, &t).unwrap();
        let w = decide_criterion(&moved, &t).unwrap();
        prop_assert_eq!(v.verdict, w.verdict);
        verify_all(&moved, &moved_pts, values, &w);
    }

    #[test]
    fn lattice_is_canonical(pts in points()) {
        let sub = PresentedSubgroup::torus(&pts).unwrap();
        let basis = &sub.lattice.basis;
        if !basis.is_empty() {
            let m = IntMatrix::from_rows(pts.len(), basis);
            prop_assert_eq!(hermite_normal_form(&m), m);
        }
        prop_assert!(sub.components.n_r == 1 || sub.components.n_r == 2);
        prop_assert!(!is_declared(&sub));
    }
}

fn is_declared(sub: &PresentedSubgroup) -> bool {
    let t = target_for(2, &vec![0; sub.presentation.point_count()]);
    decide_criterion(sub, &t).unwrap().conditional_on_declaration
}

#[test]
fn declared_verdicts_are_flagged() {
    let gen = |g: usize| {
        let mut free = vec![0; 2];
        free[g] = 1;
        vec![DeclaredCoordinate {
            block: 0,
            free,
            torsion: vec![],
        }]
    };
    let decl = DeclaredPresentation {
        block_ranks: vec![2],
        generator_blocks: vec![0, 0],
        torsion_generators: vec![],
        points: vec![gen(0), gen(1)],
    };
    let sub = PresentedSubgroup::declared(&decl).unwrap();
    let v = decide_criterion(&sub, &target_for(3, &[1, 2])).unwrap();
    assert!(v.conditional_on_declaration);
    assert_eq!(v.verdict, Verdict::PositiveDensity);
    for w in v.witnesses() {
        verify_witness(&sub, None, &[1, 2], w).unwrap();
    }
}
