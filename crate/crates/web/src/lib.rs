//! Browser bindings for redlab.
//!
//! The plain functions do the work and are tested natively; the
//! `#[wasm_bindgen]` wrappers hand JSON strings to the page.

use redlab::groups::{FactoredRational, TorusPoint};
use redlab::kummer::exact_density;
use redlab::lab::{convergence_series, run_scan, ScanOptions, Study};
use redlab::structure::{decide_criterion, PresentedSubgroup, Target};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

/// Largest bound the page may scan; the browser runs on a single thread.
pub const MAX_BROWSER_BOUND: u64 = 200_000;

/// Checkpoints per convergence plot.
pub const SERIES_POINTS: u64 = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Oracle {
    pub value: String,
    pub decimal: f64,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub bound: u64,
    pub estimate: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub series: Vec<SeriesPoint>,
    pub matches: u64,
    pub prime_count: u64,
    /// Exact density, when one exists for this input.
    pub oracle: Option<Oracle>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub verdict: String,
    pub witness: Option<Vec<String>>,
}

/// Parses `n` or `n/d`.
pub fn parse_rational(s: &str) -> Result<FactoredRational, String> {
    let s = s.trim();
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let num: i64 = n.trim().parse().map_err(|_| format!("not a rational: {s:?}"))?;
    let den: i64 = d.trim().parse().map_err(|_| format!("not a rational: {s:?}"))?;
    FactoredRational::from_ratio(num, den).map_err(|e| e.to_string())
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(f).collect()
}

/// Exact density of primes with `v_ℓ(ord_p r) = a`.
pub fn oracle(r: &str, l: u64, a: u32) -> Result<Oracle, String> {
    let d = exact_density(&parse_rational(r)?, l, a).map_err(|e| e.to_string())?;
    let (n, m) = (*d.value.numer(), *d.value.denom());
    Ok(Oracle {
        value: format!("{n}/{m}"),
        decimal: n as f64 / m as f64,
        level: d.level,
    })
}

/// Scans `r` to `bound` on one thread and tracks the running density of
/// `v_ℓ(ord_p r) = a`.
pub fn convergence(r: &str, l: u64, a: u32, bound: u64) -> Result<Convergence, String> {
    if bound > MAX_BROWSER_BOUND {
        return Err(format!(
            "bound {bound} exceeds the in-browser limit {MAX_BROWSER_BOUND}"
        ));
    }
    if bound < SERIES_POINTS {
        return Err(format!("bound must be at least {SERIES_POINTS}"));
    }
    let point = TorusPoint::new(vec![parse_rational(r)?]).map_err(|e| e.to_string())?;
    let study = Study::torus("browser", vec![point], vec![l]).map_err(|e| e.to_string())?;
    let scan = run_scan(&study, bound, &ScanOptions { threads: 1, seed: 0 }).map_err(|e| e.to_string())?;
    let target = Target::new("t", [((l, 0), a)]);
    let checkpoints: Vec<u64> = (1..=SERIES_POINTS).map(|k| bound * k / SERIES_POINTS).collect();
    let series = convergence_series(&scan, &target, &checkpoints).map_err(|e| e.to_string())?;
    let last = *series.last().expect("checkpoints are nonempty");
    Ok(Convergence {
        series: series
            .iter()
            .map(|e| SeriesPoint {
                bound: e.bound,
                estimate: e.estimate,
                half_width: e.half_width,
            })
            .collect(),
        matches: last.matches,
        prime_count: last.prime_count,
        oracle: oracle(r, l, a).ok(),
    })
}

/// Criterion for torus points against targets `a_i` at a single `ℓ`.
///
/// `points` and `values` are comma separated and must have equal length.
pub fn decide(points: &str, l: u64, values: &str) -> Result<Decision, String> {
    let coords = parse_list(points, parse_rational)?;
    let values = parse_list(values, |v| {
        v.trim().parse::<u32>().map_err(|_| format!("not a valuation: {v:?}"))
    })?;
    if coords.is_empty() || coords.len() != values.len() {
        return Err(format!("{} points but {} targets", coords.len(), values.len()));
    }
    let pts = coords
        .into_iter()
        .map(|c| TorusPoint::new(vec![c]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let sub = PresentedSubgroup::torus(&pts).map_err(|e| e.to_string())?;
    let target = Target::new("t", values.iter().enumerate().map(|(i, &a)| ((l, i), a)));
    let v = decide_criterion(&sub, &target).map_err(|e| e.to_string())?;
    let witness = v.witnesses().next().map(|w| w.describe(&sub));
    Ok(Decision {
        verdict: v.verdict.to_string(),
        witness,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("plain data serializes"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen]
pub fn oracle_json(r: &str, l: u32, a: u32) -> String {
    to_json(oracle(r, l.into(), a))
}

#[wasm_bindgen]
pub fn convergence_json(r: &str, l: u32, a: u32, bound: u32) -> String {
    to_json(convergence(r, l.into(), a, bound.into()))
}

#[wasm_bindgen]
pub fn decide_json(points: &str, l: u32, values: &str) -> String {
    to_json(decide(points, l.into(), values))
}
