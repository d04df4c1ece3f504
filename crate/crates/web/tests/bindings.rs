use redlab_web::{
    convergence, convergence_json, decide, decide_json, oracle, oracle_json, parse_rational, MAX_BROWSER_BOUND,
    SERIES_POINTS,
};

#[test]
fn oracle_of_two_at_two() {
    let o = oracle("2", 2, 0).unwrap();
    assert_eq!(o.value, "7/24");
    assert!((o.decimal - 7.0 / 24.0).abs() < 1e-12);
}

#[test]
fn rationals_parse() {
    assert!(parse_rational("-3/4").is_ok());
    assert!(parse_rational(" 12 ").is_ok());
    assert!(parse_rational("x").is_err());
    assert!(parse_rational("1/0").is_err());
}

#[test]
fn convergence_tracks_the_oracle() {
    let c = convergence("2", 2, 0, MAX_BROWSER_BOUND).unwrap();
    assert_eq!(c.series.len() as u64, SERIES_POINTS);
    assert_eq!(c.series.last().unwrap().bound, MAX_BROWSER_BOUND);
    assert!(c.series.windows(2).all(|w| w[0].bound < w[1].bound));
    let last = c.series.last().unwrap();
    let exact = c.oracle.unwrap().decimal;
    assert!(
        (last.estimate - exact).abs() <= 4.0 * last.half_width,
        "{} vs {exact}",
        last.estimate
    );
}

#[test]
fn convergence_rejects_large_bounds() {
    assert!(convergence("2", 2, 0, MAX_BROWSER_BOUND + 1).is_err());
    assert!(convergence("2", 2, 0, 10).is_err());
}

#[test]
fn decisions_match_known_cases() {
    assert_eq!(decide("2, -2", 2, "1, 1").unwrap().verdict, "Finite");
    let d = decide("2, -2", 2, "2, 2").unwrap();
    assert_eq!(d.verdict, "PositiveDensity");
    assert_eq!(d.witness.unwrap(), vec!["i", "-i"]);
    assert!(decide("2, 3", 2, "1").is_err());
}

#[test]
fn wrappers_return_json() {
    let v: serde_json::Value = serde_json::from_str(&oracle_json("2", 2, 0)).unwrap();
    assert_eq!(v["value"], "7/24");
    let v: serde_json::Value = serde_json::from_str(&decide_json("2", 4, "1")).unwrap();
    assert!(v["error"].is_string());
    let v: serde_json::Value = serde_json::from_str(&convergence_json("3", 2, 1, 5000)).unwrap();
    assert_eq!(v["series"].as_array().unwrap().len() as u64, SERIES_POINTS);
}
