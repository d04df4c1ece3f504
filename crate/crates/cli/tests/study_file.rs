use redlab::lab::PointModel;
use redlab_cli::study_file::{parse_count, parse_study, StudyFileError};

fn line_of(e: &StudyFileError) -> Option<usize> {
    match e {
        StudyFileError::Syntax { line, .. } => Some(*line),
        StudyFileError::Invalid(_) => None,
    }
}

#[test]
fn minimal_torus_study() {
    let sf = parse_study("[points]\ntorus R = 2\n[primes]\nS = 2\n[targets]\nt = 2:R=0\n").unwrap();
    assert_eq!(sf.study.points.len(), 1);
    assert!(matches!(sf.study.points[0].model, PointModel::Torus(_)));
    assert_eq!(sf.study.targets[0].values.get(&(2, 0)), Some(&0));
    assert_eq!(sf.study.name, "study");
}

#[test]
fn point_off_the_curve_is_rejected() {
    let text = "[points]\ncurve E = [0,0,1,-7,6]\npoint P = E(1,1)\n[primes]\nS = 2\n";
    let e = parse_study(text).unwrap_err();
    assert_eq!(line_of(&e), Some(3));
    assert!(e.to_string().contains("point not on curve"), "{e}");
}

#[test]
fn composite_l_is_rejected() {
    let e = parse_study("[points]\ntorus R = 2\n[primes]\nS = 4\n").unwrap_err();
    assert!(e.to_string().contains("not prime"), "{e}");
    let e = parse_study("[points]\ntorus R = 2\n[primes]\nS = 2\n[targets]\nt = 4:R=0\n").unwrap_err();
    assert_eq!(line_of(&e), Some(6));
    assert!(e.to_string().contains("not prime"), "{e}");
}

#[test]
fn unknown_keys_and_sections_are_rejected() {
    let cases = [
        ("colour = blue\n", 1, "unknown key"),
        ("[points]\ntorus R = 2\nwidget W = 3\n", 3, "unknown key"),
        (
            "[points]\ntorus R = 2\n[primes]\nS = 2\n[scan]\nbound = 100\nspeed = 3\n",
            7,
            "unknown key",
        ),
        ("[pionts]\n", 1, "unknown section"),
        ("[points]\ntorus R = 2\ntorus R = 3\n", 3, "already defined"),
        (
            "[points]\ntorus R = 2\n[primes]\nS = 2\n[targets]\nt = 2:Q=0\n",
            6,
            "unknown point",
        ),
        (
            "[points]\ntorus R = 2\n[primes]\nS = 2\n[targets]\nt = 2:7=0\n",
            6,
            "unknown point index",
        ),
        (
            "[points]\ntorus R = 2\n[primes]\nS = 2\n[targets]\nt = 3:R=0\n",
            6,
            "not in S",
        ),
        (
            "[points]\ntorus R = 2\ntorus Q = 3\n[primes]\nS = 2\n[targets]\nt = 2:R=0\n",
            7,
            "no value",
        ),
        ("[points]\ntorus R = 0\n", 2, "nonzero"),
        ("[points]\ncurve E = [0,0,0,0,0]\n", 2, "singular"),
        (
            "[points]\ntorus R = 2\n[primes]\nS = 2\n[match]\n2:R = mu(2)\n",
            6,
            "n ≥ 3",
        ),
    ];
    for (text, line, needle) in cases {
        let e = parse_study(text).unwrap_err();
        assert_eq!(line_of(&e), Some(line), "{text:?}: {e}");
        assert!(e.to_string().contains(needle), "{text:?}: {e}");
    }
}

#[test]
fn declared_presentation_is_checked() {
    let base = "[points]\ncurve E = [0,0,1,-7,6]\npoint R = E(1,0)\n[primes]\nS = 2\n[presentation]\ngenerator P2 = E(2,0)\ngenerator P3 = E(0,2)\nindependent = P2, P3\n";
    let e = parse_study(base).unwrap_err();
    assert!(e.to_string().contains("not a declared generator"), "{e}");
    // (1,0) + (2,0) = (-3,0): a true relation fails as a declaration of R
    let wrong = format!("{base}express R = P2 + P3\n");
    let e = parse_study(&wrong).unwrap_err();
    assert!(e.to_string().contains("fails modulo"), "{e}");
    // (1,0), (2,0) and (-3,0) are collinear on y = 0, so (-3,0) = -(1,0) - (2,0)
    let collinear = "[points]\ncurve E = [0,0,1,-7,6]\npoint R = E(-3,0)\n[primes]\nS = 2\n[presentation]\ngenerator P1 = E(1,0)\ngenerator P2 = E(2,0)\nindependent = P1, P2\n";
    let sf = parse_study(&format!("{collinear}express R = -P1 - P2\n")).unwrap();
    assert_eq!(sf.study.presentation.unwrap().points[0][0].free, vec![-1, -1]);
    for wrong in ["P1 + P2", "2*P1 - P2", "P1 - 2P2"] {
        let e = parse_study(&format!("{collinear}express R = {wrong}\n")).unwrap_err();
        assert_eq!(line_of(&e), Some(10));
        assert!(e.to_string().contains("fails modulo"), "{e}");
    }
}

#[test]
fn torsion_orders_are_inferred_and_checked() {
    let text = "[points]\ncurve E = [0,-1,1,-10,-20]\npoint T = E(5,5)\n[presentation]\ntorsion = T\n[primes]\nS = 5\n[match]\n5:T = E(5,5), E(16,-61) order 5\n";
    let sf = parse_study(text).unwrap();
    let decl = sf.study.presentation.unwrap();
    assert_eq!(decl.torsion_generators, vec![(0, 5)]);
    let bad = text.replace("E(16,-61) order 5", "E(16,-61) order 10");
    let e = parse_study(&bad).unwrap_err();
    assert!(e.to_string().contains("does not have order 10"), "{e}");
    let free = "[points]\ncurve E = [0,0,1,-7,6]\npoint P = E(1,0)\n[presentation]\ntorsion = P\n[primes]\nS = 2\n";
    let e = parse_study(free).unwrap_err();
    assert!(e.to_string().contains("not a torsion point"), "{e}");
}

#[test]
fn counts_accept_common_notations() {
    assert_eq!(parse_count("10^7"), Some(10_000_000));
    assert_eq!(parse_count("2e5"), Some(200_000));
    assert_eq!(parse_count("200_000"), Some(200_000));
    assert_eq!(parse_count("12"), Some(12));
    assert_eq!(parse_count("x"), None);
}

#[test]
fn bundled_studies_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../studies");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        parse_study(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}
