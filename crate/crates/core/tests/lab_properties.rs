use proptest::prelude::*;
use redlab::groups::{CurvePointQ, TorusPoint, WeierstrassCurve};
use redlab::lab::{
    cache_read, cache_write, concat_scans, run_scan, run_scan_range, tally, LabError, PointModel, Scan, ScanConfig,
    ScanOptions, Study, StudyPoint,
};
use redlab::structure::Target;
use std::collections::BTreeMap;

fn torus_study() -> Study {
    Study::torus(
        "pair",
        vec![
            TorusPoint::from_integers(&[2]).unwrap(),
            TorusPoint::from_integers(&[-2, 3]).unwrap(),
        ],
        vec![2, 3],
    )
    .unwrap()
}

fn curve_study() -> Study {
    let e = WeierstrassCurve::new(0, 0, 1, -7, 6).unwrap();
    Study::new(
        "curve".into(),
        vec![("E".into(), e)],
        vec![StudyPoint {
            name: "P".into(),
            model: PointModel::Curve(vec![(0, CurvePointQ::integral(1, 0))]),
        }],
        None,
        vec![2, 3],
        Vec::new(),
        BTreeMap::new(),
        ScanConfig::default(),
    )
    .unwrap()
}

fn partitioned(study: &Study, cuts: &[u64], bound: u64, threads: usize) -> Scan {
    let mut edges = vec![1u64];
    edges.extend(cuts.iter().copied().filter(|&c| c > 1 && c < bound));
    edges.sort_unstable();
    edges.dedup();
    edges.push(bound);
    let parts = edges
        .windows(2)
        .map(|w| run_scan_range(study, w[0] + 1, w[1], &ScanOptions { threads, seed: 3 }).unwrap())
        .collect();
    concat_scans(parts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn torus_partitions_concatenate(cuts in prop::collection::vec(2u64..30_000, 0..5), threads in 1usize..6) {
        let study = torus_study();
        let full = run_scan(&study, 30_000, &ScanOptions::default()).unwrap();
        prop_assert_eq!(partitioned(&study, &cuts, 30_000, threads), full);
    }

    #[test]
    fn curve_partitions_concatenate(cuts in prop::collection::vec(2u64..6_000, 0..3), threads in 1usize..4) {
        let study = curve_study();
        let full = run_scan(&study, 6_000, &ScanOptions::default()).unwrap();
        prop_assert_eq!(partitioned(&study, &cuts, 6_000, threads).to_bytes(), full.to_bytes());
    }
}

#[test]
fn tallies_are_exhaustive() {
    for study in [torus_study(), curve_study()] {
        let scan = run_scan(&study, 50_000, &ScanOptions::default()).unwrap();
        let included = scan.records.iter().filter(|r| r.is_included()).count() as u64;
        for &(l, i) in &scan.layout.valuations {
            let mut total = 0;
            for a in 0..=20 {
                let est = tally(&scan, &Target::new("t", [((l, i), a)])).unwrap();
                assert!((0.0..=1.0).contains(&est.estimate));
                assert!(est.matches <= est.included && est.included <= est.prime_count);
                total += est.matches;
            }
            assert_eq!(total, included, "ℓ={l} i={i}");
        }
        for r in &scan.records {
            assert_eq!(r.is_included(), !r.valuations.is_empty());
        }
    }
}

#[test]
fn cache_files_round_trip() {
    let dir = std::env::temp_dir().join(format!("redlab-cache-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("scan.rdl");
    let study = curve_study();
    let scan = run_scan(&study, 3_000, &ScanOptions::default()).unwrap();
    cache_write(&scan, &path).unwrap();
    assert_eq!(cache_read(&path, &study).unwrap(), scan);
    assert!(matches!(
        cache_read(&path, &torus_study()),
        Err(LabError::StaleCache(_))
    ));
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(cache_read(&path, &study), Err(LabError::CorruptCache(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}
