use redlab::groups::{FactoredRational, TorusPoint};
use redlab::kummer::{build_level, exact_density, level_density_leq};
use redlab::lab::{run_scan, tally, ScanOptions, Study};
use redlab::structure::Target;

#[test]
fn leq_is_monotone_in_a() {
    for (r, l) in [(2i64, 2u64), (-3, 2), (6, 2), (2, 3), (10, 5), (12, 7)] {
        let level = build_level(&FactoredRational::from_integer(r).unwrap(), l, 5).unwrap();
        let values: Vec<_> = (0..5).map(|a| level_density_leq(&level, a).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]), "r={r} ℓ={l}: {values:?}");
    }
}

/// Oracles agree with scans to 10^6 within four Wilson half-widths.
#[test]
fn oracle_matches_scan() {
    let bases = [2i64, -2, 3, -3, 5, 6, 12, -7];
    let points: Vec<TorusPoint> = bases
        .iter()
        .map(|&r| TorusPoint::from_integers(&[r]).unwrap())
        .collect();
    let primes = vec![2, 3, 5];
    let study = Study::torus("oracle", points, primes.clone()).unwrap();
    let scan = run_scan(&study, 1_000_000, &ScanOptions::default()).unwrap();
    for (i, &r) in bases.iter().enumerate() {
        let fr = FactoredRational::from_integer(r).unwrap();
        for &l in &primes {
            for a in 0..4 {
                let Ok(oracle) = exact_density(&fr, l, a) else { continue };
                let est = tally(&scan, &Target::new("t", [((l, i), a)])).unwrap();
                let value = *oracle.value.numer() as f64 / *oracle.value.denom() as f64;
                assert!(
                    est.agrees_with(value, 4.0),
                    "r={r} ℓ={l} a={a}: oracle {} vs {:.5} ± {:.5}",
                    oracle.value,
                    est.estimate,
                    est.half_width
                );
            }
        }
    }
}
