//! Study files.
//!
//! ```text
//! name = obstruction
//!
//! [points]
//! torus R1 = 2
//! torus R2 = -2
//!
//! [primes]
//! S = 2
//!
//! [targets]
//! both_odd = 2:R1=1, 2:R2=1
//!
//! [scan]
//! bound = 10^6
//! checkpoints = 1e5, 1e6
//! ```
//!
//! Curves, declared presentations and match descriptors:
//!
//! ```text
//! [points]
//! curve E = [0,0,1,-7,6]
//! point R1 = E(1,0)
//! point R2 = E(2,0)
//! point R3 = E(-3,0)
//! curve F = [0,-1,1,-10,-20]
//! point T = F(5,5)
//! tuple R4 = E(1,0), F(5,5)
//!
//! [presentation]
//! generator P3 = E(0,2)
//! independent = R1, R2, P3
//! torsion = T order 5
//! express R3 = -R1 - R2
//! express R4 = R1; T
//!
//! [match]
//! 5:T = F(5,5), F(16,-61)
//! ```

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use redlab::arith::{is_prime, primes_in_range, Sign};
use redlab::groups::{
    curve_reduce_point, CurvePointQ, EcPoint, FactoredRational, Rational, TorsionDescriptor, TorusPoint,
    WeierstrassCurve,
};
use redlab::lab::{PointModel, ScanConfig, Study, StudyPoint};
use redlab::structure::{DeclaredCoordinate, DeclaredPresentation, Target};
use thiserror::Error;

/// Rational torsion over Q has order at most 12.
const MAX_RATIONAL_TORSION: u64 = 12;
/// Good primes used to infer torsion orders and check declared expressions.
const CHECK_PRIMES: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StudyFileError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, StudyFileError> {
    Err(StudyFileError::Syntax { line, msg: msg.into() })
}

/// A parsed study plus the settings that only the command line uses.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFile {
    pub study: Study,
    /// Largest bound a scan of this study may use.
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Points,
    Presentation,
    Primes,
    Targets,
    Match,
    Scan,
}

impl Section {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "points" => Section::Points,
            "presentation" => Section::Presentation,
            "primes" => Section::Primes,
            "targets" => Section::Targets,
            "match" => Section::Match,
            "scan" => Section::Scan,
            _ => return None,
        })
    }
}

struct Entry<'a> {
    line: usize,
    section: Section,
    key: &'a str,
    name: Option<&'a str>,
    value: &'a str,
}

fn entries(text: &str) -> Result<Vec<Entry<'_>>, StudyFileError> {
    let mut out = Vec::new();
    let mut section = Section::Top;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(head) = content.strip_prefix('[') {
            let Some(head) = head.strip_suffix(']') else {
                return err(line, "unterminated section header");
            };
            let Some(s) = Section::parse(head.trim()) else {
                return err(line, format!("unknown section [{}]", head.trim()));
            };
            section = s;
            continue;
        }
        let Some((lhs, value)) = content.split_once('=') else {
            return err(line, "expected `key = value`");
        };
        let mut words = lhs.split_whitespace();
        let Some(key) = words.next() else {
            return err(line, "missing key");
        };
        let name = words.next();
        if words.next().is_some() {
            return err(line, format!("unexpected text before `=`: {}", lhs.trim()));
        }
        out.push(Entry {
            line,
            section,
            key,
            name,
            value: value.trim(),
        });
    }
    Ok(out)
}

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// Splits on `sep` outside parentheses and brackets.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

fn normalize_minus(s: &str) -> String {
    s.trim().replace('−', "-")
}

fn parse_int(line: usize, s: &str) -> Result<i64, StudyFileError> {
    normalize_minus(s)
        .trim_start_matches('+')
        .parse()
        .or_else(|_| err(line, format!("invalid integer `{}`", s.trim())))
}

/// Counts such as `200000`, `200_000`, `2e5` or `10^7`.
pub fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim().replace('_', "");
    if let Some((b, e)) = s.split_once('^') {
        return b.trim().parse::<u64>().ok()?.checked_pow(e.trim().parse().ok()?);
    }
    if let Some((m, e)) = s.split_once(['e', 'E']) {
        return m
            .trim()
            .parse::<u64>()
            .ok()?
            .checked_mul(10u64.checked_pow(e.trim().parse().ok()?)?);
    }
    s.parse().ok()
}

fn count(line: usize, s: &str) -> Result<u64, StudyFileError> {
    parse_count(s).map_or_else(|| err(line, format!("invalid count `{}`", s.trim())), Ok)
}

fn parse_ratio(line: usize, s: &str) -> Result<(i64, i64), StudyFileError> {
    let s = normalize_minus(s);
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (parse_int(line, n)?, parse_int(line, d)?),
        None => (parse_int(line, &s)?, 1),
    };
    if d == 0 {
        return err(line, format!("zero denominator in `{s}`"));
    }
    Ok((n, d))
}

fn parse_factored(line: usize, s: &str) -> Result<FactoredRational, StudyFileError> {
    let (n, d) = parse_ratio(line, s)?;
    if n == 0 {
        return err(line, "torus coordinates must be nonzero");
    }
    FactoredRational::from_ratio(n, d).or_else(|e| err(line, e.to_string()))
}

fn parse_rational(line: usize, s: &str) -> Result<Rational, StudyFileError> {
    let (n, d) = parse_ratio(line, s)?;
    Ok(Ratio::new(n as i128, d as i128))
}

fn parse_curve(line: usize, s: &str) -> Result<WeierstrassCurve, StudyFileError> {
    let Some(inner) = s.trim().strip_prefix('[').and_then(|x| x.strip_suffix(']')) else {
        return err(line, "curves are written [a1,a2,a3,a4,a6]");
    };
    let coeffs: Vec<i64> = inner.split(',').map(|c| parse_int(line, c)).collect::<Result<_, _>>()?;
    let Ok(a) = <[i64; 5]>::try_from(coeffs) else {
        return err(line, "curves need exactly five coefficients");
    };
    WeierstrassCurve::from_coefficients(a).or_else(|e| err(line, e.to_string()))
}

/// A point written `E(x, y)` on a named curve.
#[derive(Debug, Clone, PartialEq)]
struct CurveRef {
    curve: usize,
    point: CurvePointQ,
}

struct Ctx {
    curves: Vec<(String, WeierstrassCurve)>,
    curve_index: HashMap<String, usize>,
}

impl Ctx {
    fn curve_point(&self, line: usize, s: &str) -> Result<CurveRef, StudyFileError> {
        let s = s.trim();
        let Some((name, rest)) = s.split_once('(') else {
            return err(line, format!("expected a point `E(x, y)`, found `{s}`"));
        };
        let Some(coords) = rest.trim().strip_suffix(')') else {
            return err(line, format!("unbalanced parentheses in `{s}`"));
        };
        let Some(&curve) = self.curve_index.get(name.trim()) else {
            return err(line, format!("unknown curve `{}`", name.trim()));
        };
        let xy = split_top(coords, ',');
        if xy.len() != 2 {
            return err(line, format!("points need two coordinates: `{s}`"));
        }
        let point = CurvePointQ::affine(parse_rational(line, xy[0])?, parse_rational(line, xy[1])?);
        let e = &self.curves[curve].1;
        if !e.contains(&point) {
            return err(
                line,
                format!("point not on curve: {point} does not satisfy {} = {e}", name.trim()),
            );
        }
        Ok(CurveRef { curve, point })
    }

    /// Good primes at which `r` reduces to an affine point.
    fn check_primes(&self, r: &CurveRef) -> Vec<u64> {
        let e = &self.curves[r.curve].1;
        primes_in_range(MAX_RATIONAL_TORSION + 1, 100_000)
            .into_iter()
            .filter(|&p| e.has_good_reduction(p) && curve_reduce_point(e, &r.point, p).is_ok())
            .take(CHECK_PRIMES)
            .collect()
    }

    /// Order of a rational torsion point.
    ///
    /// Reduction at a good prime above 12 is injective on rational torsion,
    /// so a torsion point has the same order at every such prime.
    fn torsion_order(&self, line: usize, r: &CurveRef, declared: Option<u64>) -> Result<u64, StudyFileError> {
        if declared.is_some_and(|n| n == 0 || n > MAX_RATIONAL_TORSION) {
            return err(
                line,
                format!("rational torsion has order between 1 and {MAX_RATIONAL_TORSION}"),
            );
        }
        let e = &self.curves[r.curve].1;
        let mut seen = None;
        for p in self.check_primes(r) {
            let (c, q) = curve_reduce_point(e, &r.point, p).expect("checked");
            let Some(k) = (1..=MAX_RATIONAL_TORSION).find(|&k| c.mul(q, k) == EcPoint::Infinity) else {
                return err(
                    line,
                    format!("{} is not a torsion point (order mod {p} exceeds 12)", r.point),
                );
            };
            match (seen, declared) {
                (_, Some(n)) if n != k => {
                    return err(
                        line,
                        format!("{} does not have order {n}: it has order {k} mod {p}", r.point),
                    )
                }
                (Some(o), _) if o != k => return err(line, format!("{} is not a torsion point", r.point)),
                _ => seen = Some(k),
            }
        }
        seen.map_or_else(|| err(line, format!("cannot determine the order of {}", r.point)), Ok)
    }
}

#[derive(Debug, Clone)]
struct NamedPoint {
    line: usize,
    coords: Vec<CurveRef>,
}

/// Parses a linear combination `2*P1 - P3 + T` into `(coefficient, name)` terms.
fn parse_combination(line: usize, s: &str) -> Result<Vec<(i64, String)>, StudyFileError> {
    let s = normalize_minus(s).replace(' ', "");
    if s.is_empty() {
        return err(line, "empty expression");
    }
    let mut terms = Vec::new();
    let mut rest = s.as_str();
    while !rest.is_empty() {
        let (sign, body) = match rest.as_bytes()[0] {
            b'+' => (1, &rest[1..]),
            b'-' => (-1, &rest[1..]),
            _ if terms.is_empty() => (1, rest),
            _ => return err(line, format!("expected `+` or `-` in `{s}`")),
        };
        let end = body.find(['+', '-']).unwrap_or(body.len());
        let term = &body[..end];
        rest = &body[end..];
        let (coeff, name) = match term.split_once('*') {
            Some((k, n)) => (parse_int(line, k)?, n),
            None => {
                let digits = term.find(|c: char| !c.is_ascii_digit()).unwrap_or(term.len());
                if digits == 0 {
                    (1, term)
                } else {
                    (parse_int(line, &term[..digits])?, &term[digits..])
                }
            }
        };
        if !valid_name(name) {
            return err(line, format!("invalid term `{term}`"));
        }
        terms.push((sign * coeff, name.to_string()));
    }
    Ok(terms)
}

pub fn parse_study(text: &str) -> Result<StudyFile, StudyFileError> {
    let entries = entries(text)?;
    let mut study_name = None;
    let mut ctx = Ctx {
        curves: Vec::new(),
        curve_index: HashMap::new(),
    };
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut claim = |line: usize, name: Option<&str>| -> Result<String, StudyFileError> {
        let Some(name) = name else {
            return err(line, "missing name");
        };
        if !valid_name(name) {
            return err(line, format!("invalid name `{name}`"));
        }
        if let Some(prev) = names.insert(name.to_string(), line) {
            return err(line, format!("`{name}` already defined on line {prev}"));
        }
        Ok(name.to_string())
    };

    // curves first, so points may precede their curve
    for e in entries
        .iter()
        .filter(|e| e.section == Section::Points && e.key == "curve")
    {
        let name = claim(e.line, e.name)?;
        ctx.curve_index.insert(name.clone(), ctx.curves.len());
        ctx.curves.push((name, parse_curve(e.line, e.value)?));
    }

    let mut points: Vec<StudyPoint> = Vec::new();
    let mut point_lines = Vec::new();
    let mut named: HashMap<String, NamedPoint> = HashMap::new();
    let mut primes: Option<Vec<u64>> = None;
    let mut scan = ScanConfig::default();
    let mut budget = None;
    let mut scan_keys: HashMap<&str, usize> = HashMap::new();
    let mut presentation_lines = Vec::new();
    let mut target_lines = Vec::new();
    let mut match_lines = Vec::new();

    for e in &entries {
        let named_key = |allowed: bool| -> Result<(), StudyFileError> {
            match (allowed, e.name) {
                (false, Some(n)) => err(e.line, format!("`{}` does not take a name (found `{n}`)", e.key)),
                _ => Ok(()),
            }
        };
        match e.section {
            Section::Top => match e.key {
                "name" => {
                    named_key(false)?;
                    if study_name.replace(e.value.to_string()).is_some() {
                        return err(e.line, "duplicate `name`");
                    }
                }
                k => return err(e.line, format!("unknown key `{k}` outside a section")),
            },
            Section::Points => match e.key {
                "curve" => {}
                "torus" => {
                    let name = claim(e.line, e.name)?;
                    let coords = split_top(e.value, ',')
                        .into_iter()
                        .map(|c| parse_factored(e.line, c))
                        .collect::<Result<Vec<_>, _>>()?;
                    let t = TorusPoint::new(coords).or_else(|x| err(e.line, x.to_string()))?;
                    points.push(StudyPoint {
                        name,
                        model: PointModel::Torus(t),
                    });
                    point_lines.push(e.line);
                }
                "point" | "tuple" => {
                    let name = claim(e.line, e.name)?;
                    let coords: Vec<CurveRef> = split_top(e.value, ',')
                        .into_iter()
                        .map(|c| ctx.curve_point(e.line, c))
                        .collect::<Result<_, _>>()?;
                    if e.key == "point" && coords.len() != 1 {
                        return err(e.line, "`point` takes one curve point; use `tuple` for several");
                    }
                    if e.key == "point" {
                        named.insert(
                            name.clone(),
                            NamedPoint {
                                line: e.line,
                                coords: coords.clone(),
                            },
                        );
                    }
                    let model = PointModel::Curve(coords.into_iter().map(|r| (r.curve, r.point)).collect());
                    points.push(StudyPoint { name, model });
                    point_lines.push(e.line);
                }
                k => return err(e.line, format!("unknown key `{k}` in [points]")),
            },
            Section::Presentation => match e.key {
                "generator" => {
                    let name = claim(e.line, e.name)?;
                    let r = ctx.curve_point(e.line, e.value)?;
                    named.insert(
                        name,
                        NamedPoint {
                            line: e.line,
                            coords: vec![r],
                        },
                    );
                }
                "independent" | "torsion" => {
                    named_key(false)?;
                    presentation_lines.push(e);
                }
                "express" => presentation_lines.push(e),
                k => return err(e.line, format!("unknown key `{k}` in [presentation]")),
            },
            Section::Primes => match e.key {
                "S" => {
                    named_key(false)?;
                    if primes.is_some() {
                        return err(e.line, "duplicate `S`");
                    }
                    let mut ls = Vec::new();
                    for item in split_top(e.value, ',') {
                        let l = count(e.line, item)?;
                        if !is_prime(l) {
                            return err(e.line, format!("{l} is not prime"));
                        }
                        ls.push(l);
                    }
                    primes = Some(ls);
                }
                k => return err(e.line, format!("unknown key `{k}` in [primes]")),
            },
            Section::Targets => {
                named_key(false)?;
                target_lines.push(e);
            }
            Section::Match => {
                named_key(false)?;
                match_lines.push(e);
            }
            Section::Scan => {
                named_key(false)?;
                if let Some(prev) = scan_keys.insert(e.key, e.line) {
                    return err(e.line, format!("`{}` already set on line {prev}", e.key));
                }
                match e.key {
                    "bound" => scan.bound = Some(count(e.line, e.value)?),
                    "checkpoints" => {
                        scan.checkpoints = split_top(e.value, ',')
                            .into_iter()
                            .map(|c| count(e.line, c))
                            .collect::<Result<_, _>>()?
                    }
                    "seed" => scan.seed = count(e.line, e.value)?,
                    "budget" => budget = Some(count(e.line, e.value)?),
                    k => return err(e.line, format!("unknown key `{k}` in [scan]")),
                }
            }
        }
    }

    let Some(primes) = primes else {
        return Err(StudyFileError::Invalid("missing [primes] S = …".into()));
    };
    if points.is_empty() {
        return Err(StudyFileError::Invalid("no points declared in [points]".into()));
    }
    if let (Some(b), Some(max)) = (scan.bound, budget) {
        if b > max {
            return Err(StudyFileError::Invalid(format!("scan bound {b} exceeds budget {max}")));
        }
    }

    let point_index = |line: usize, s: &str| -> Result<usize, StudyFileError> {
        let s = s.trim();
        if let Ok(i) = s.parse::<usize>() {
            return if i < points.len() {
                Ok(i)
            } else {
                err(line, format!("unknown point index {i}"))
            };
        }
        points
            .iter()
            .position(|p| p.name == s)
            .map_or_else(|| err(line, format!("unknown point `{s}`")), Ok)
    };
    let prime_in_s = |line: usize, s: &str| -> Result<u64, StudyFileError> {
        let l = count(line, s)?;
        if !is_prime(l) {
            return err(line, format!("{l} is not prime"));
        }
        if !primes.contains(&l) {
            return err(line, format!("ℓ = {l} is not in S"));
        }
        Ok(l)
    };

    let mut targets: Vec<Target> = Vec::new();
    for e in target_lines {
        if !valid_name(e.key) {
            return err(e.line, format!("invalid target name `{}`", e.key));
        }
        if targets.iter().any(|t| t.name == e.key) {
            return err(e.line, format!("duplicate target `{}`", e.key));
        }
        let mut values = BTreeMap::new();
        for item in split_top(e.value, ',') {
            let Some((lhs, a)) = item.split_once('=') else {
                return err(e.line, format!("target entries are `ℓ:point=a`, found `{item}`"));
            };
            let Some((l, pt)) = lhs.split_once(':') else {
                return err(e.line, format!("target entries are `ℓ:point=a`, found `{item}`"));
            };
            let l = prime_in_s(e.line, l)?;
            let i = point_index(e.line, pt)?;
            let a = u32::try_from(count(e.line, a)?).or_else(|_| err(e.line, "valuation too large"))?;
            if values.insert((l, i), a).is_some() {
                return err(e.line, format!("duplicate entry for ℓ = {l}, point {}", points[i].name));
            }
        }
        let ls: Vec<u64> = values.keys().map(|&(l, _)| l).collect();
        for l in ls {
            if let Some(i) = (0..points.len()).find(|&i| !values.contains_key(&(l, i))) {
                return err(
                    e.line,
                    format!("target `{}` has no value for ℓ = {l}, point {}", e.key, points[i].name),
                );
            }
        }
        targets.push(Target::new(e.key, values));
    }

    let mut matches = BTreeMap::new();
    for e in match_lines {
        let Some((l, pt)) = e.key.split_once(':') else {
            return err(e.line, format!("match keys are `ℓ:point`, found `{}`", e.key));
        };
        let l = prime_in_s(e.line, l)?;
        let i = point_index(e.line, pt)?;
        let mut list = Vec::new();
        for item in split_top(e.value, ',') {
            list.push(match_item(&ctx, &named, &points[i].model, e.line, item)?);
        }
        if matches.insert((l, i), list).is_some() {
            return err(e.line, format!("duplicate match list for {}", e.key));
        }
    }

    let presentation = if presentation_lines.is_empty() {
        None
    } else {
        Some(build_presentation(
            &ctx,
            &named,
            &points,
            &point_lines,
            &presentation_lines,
        )?)
    };

    let study = Study::new(
        study_name.unwrap_or_else(|| "study".into()),
        ctx.curves,
        points,
        presentation,
        primes,
        targets,
        matches,
        scan,
    )
    .map_err(|e| StudyFileError::Invalid(e.to_string()))?;
    Ok(StudyFile { study, budget })
}

fn split_order(line: usize, s: &str) -> Result<(&str, Option<u64>), StudyFileError> {
    match s.rsplit_once(" order ") {
        Some((p, n)) => Ok((p.trim(), Some(count(line, n)?))),
        None => Ok((s.trim(), None)),
    }
}

fn match_item(
    ctx: &Ctx,
    named: &HashMap<String, NamedPoint>,
    model: &PointModel,
    line: usize,
    item: &str,
) -> Result<TorsionDescriptor, StudyFileError> {
    let item = normalize_minus(item);
    match model {
        PointModel::Torus(_) => match item.as_str() {
            "1" | "+1" => Ok(TorsionDescriptor::TorusSign(Sign::Positive)),
            "-1" => Ok(TorsionDescriptor::TorusSign(Sign::Negative)),
            s => {
                let Some(n) = s.strip_prefix("mu(").and_then(|x| x.strip_suffix(')')) else {
                    return err(line, format!("torus match items are 1, -1 or mu(n), found `{s}`"));
                };
                let n = count(line, n)?;
                if n < 3 {
                    return err(line, "mu(n) needs n ≥ 3; write 1 or -1 for smaller orders");
                }
                Ok(TorsionDescriptor::TorusRootClass(n))
            }
        },
        PointModel::Curve(coords) => {
            let (body, declared) = split_order(line, &item)?;
            let r = match named.get(body) {
                Some(np) if np.coords.len() == 1 => np.coords[0].clone(),
                _ => ctx.curve_point(line, body)?,
            };
            if r.curve != coords[0].0 {
                return err(
                    line,
                    format!("{} lies on a different curve than the matched point", r.point),
                );
            }
            let order = ctx.torsion_order(line, &r, declared)?;
            Ok(TorsionDescriptor::CurvePoint {
                curve: ctx.curves[r.curve].1,
                point: r.point,
                order,
            })
        }
    }
}

fn declared_twice(generators: &[(String, CurveRef)], torsion: &[(String, CurveRef, u64)], name: &str) -> bool {
    generators.iter().any(|(g, _)| g == name) || torsion.iter().any(|(t, _, _)| t == name)
}

fn build_presentation(
    ctx: &Ctx,
    named: &HashMap<String, NamedPoint>,
    points: &[StudyPoint],
    point_lines: &[usize],
    lines: &[&Entry<'_>],
) -> Result<DeclaredPresentation, StudyFileError> {
    let lookup = |line: usize, name: &str| -> Result<CurveRef, StudyFileError> {
        match named.get(name) {
            Some(np) if np.coords.len() == 1 => Ok(np.coords[0].clone()),
            Some(np) => err(line, format!("`{name}` (line {}) is not a single curve point", np.line)),
            None => err(line, format!("unknown point `{name}`")),
        }
    };
    if points.iter().any(|p| matches!(p.model, PointModel::Torus(_))) {
        let line = lines[0].line;
        return err(
            line,
            "[presentation] applies to curve points only; torus relations are computed",
        );
    }
    let mut generators: Vec<(String, CurveRef)> = Vec::new();
    let mut torsion: Vec<(String, CurveRef, u64)> = Vec::new();
    let mut expressions: HashMap<String, (usize, &str)> = HashMap::new();
    for e in lines {
        match e.key {
            "independent" => {
                for name in split_top(e.value, ',') {
                    if declared_twice(&generators, &torsion, name) {
                        return err(e.line, format!("`{name}` declared twice"));
                    }
                    let r = lookup(e.line, name)?;
                    generators.push((name.to_string(), r));
                }
            }
            "torsion" => {
                for item in split_top(e.value, ',') {
                    let (name, declared) = split_order(e.line, item)?;
                    if declared_twice(&generators, &torsion, name) {
                        return err(e.line, format!("`{name}` declared twice"));
                    }
                    let r = lookup(e.line, name)?;
                    let order = ctx.torsion_order(e.line, &r, declared)?;
                    torsion.push((name.to_string(), r, order));
                }
            }
            "express" => {
                let Some(name) = e.name else {
                    return err(e.line, "`express` needs a point name");
                };
                if !points.iter().any(|p| p.name == name) {
                    return err(e.line, format!("unknown point `{name}`"));
                }
                if expressions.insert(name.to_string(), (e.line, e.value)).is_some() {
                    return err(e.line, format!("`{name}` expressed twice"));
                }
            }
            _ => unreachable!("filtered by the section parser"),
        }
    }
    let g = generators.len();
    let h = torsion.len();
    let mut decl_points = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let PointModel::Curve(coords) = &p.model else {
            unreachable!()
        };
        let exprs: Vec<Option<(usize, String)>> = match expressions.get(&p.name) {
            Some(&(line, value)) => {
                let parts = split_top(value, ';');
                if parts.len() != coords.len() {
                    return err(
                        line,
                        format!(
                            "`{}` has {} coordinates, expression has {}",
                            p.name,
                            coords.len(),
                            parts.len()
                        ),
                    );
                }
                parts.into_iter().map(|s| Some((line, s.to_string()))).collect()
            }
            None => vec![None; coords.len()],
        };
        let mut out = Vec::new();
        for ((curve, q), expr) in coords.iter().zip(exprs) {
            let mut free = vec![0i64; g];
            let mut tors = vec![0i64; h];
            let line = match &expr {
                Some((line, _)) => *line,
                None => point_lines[i],
            };
            let terms = match expr {
                Some((line, s)) => parse_combination(line, &s)?,
                None => {
                    let same = |r: &CurveRef| r.curve == *curve && r.point == *q;
                    let name = generators
                        .iter()
                        .find(|(_, r)| same(r))
                        .map(|(n, _)| n)
                        .or_else(|| torsion.iter().find(|(_, r, _)| same(r)).map(|(n, _, _)| n));
                    match name {
                        Some(n) => vec![(1, n.clone())],
                        None => {
                            return err(
                                line,
                                format!("`{}` is not a declared generator; add `express {} = …`", p.name, p.name),
                            )
                        }
                    }
                }
            };
            for (k, name) in terms {
                if let Some(j) = generators.iter().position(|(n, _)| *n == name) {
                    if generators[j].1.curve != *curve {
                        return err(line, format!("`{name}` lies on another curve"));
                    }
                    free[j] += k;
                } else if let Some(j) = torsion.iter().position(|(n, _, _)| *n == name) {
                    if torsion[j].1.curve != *curve {
                        return err(line, format!("`{name}` lies on another curve"));
                    }
                    tors[j] += k;
                } else {
                    return err(
                        line,
                        format!("`{name}` is neither an independent nor a torsion generator"),
                    );
                }
            }
            check_expression(ctx, line, &p.name, *curve, q, &generators, &torsion, &free, &tors)?;
            out.push(DeclaredCoordinate {
                block: *curve,
                free,
                torsion: tors,
            });
        }
        decl_points.push(out);
    }
    Ok(DeclaredPresentation {
        block_ranks: vec![2; ctx.curves.len()],
        generator_blocks: generators.iter().map(|(_, r)| r.curve).collect(),
        torsion_generators: torsion.iter().map(|(_, r, m)| (r.curve, *m)).collect(),
        points: decl_points,
    })
}

/// Checks `q = Σ free·P + Σ tors·T` modulo a few good primes.
#[allow(clippy::too_many_arguments)]
fn check_expression(
    ctx: &Ctx,
    line: usize,
    name: &str,
    curve: usize,
    q: &CurvePointQ,
    generators: &[(String, CurveRef)],
    torsion: &[(String, CurveRef, u64)],
    free: &[i64],
    tors: &[i64],
) -> Result<(), StudyFileError> {
    let e = &ctx.curves[curve].1;
    let mut used: Vec<(&CurvePointQ, i64)> = vec![(q, -1)];
    used.extend(
        generators
            .iter()
            .zip(free)
            .filter(|(_, &k)| k != 0)
            .map(|((_, r), &k)| (&r.point, k)),
    );
    used.extend(
        torsion
            .iter()
            .zip(tors)
            .filter(|(_, &k)| k != 0)
            .map(|((_, r, _), &k)| (&r.point, k)),
    );
    let mut checked = 0;
    for p in primes_in_range(3, 100_000) {
        if checked == CHECK_PRIMES {
            break;
        }
        if !e.has_good_reduction(p) {
            continue;
        }
        let Ok(reduced) = used
            .iter()
            .map(|(pt, k)| curve_reduce_point(e, pt, p).map(|(c, x)| (c, x, *k)))
            .collect::<Result<Vec<_>, _>>()
        else {
            continue;
        };
        let c = reduced[0].0;
        let sum = reduced.iter().fold(EcPoint::Infinity, |acc, &(_, x, k)| {
            let m = c.mul(x, k.unsigned_abs());
            c.add(acc, if k < 0 { c.neg(m) } else { m })
        });
        if sum != EcPoint::Infinity {
            return err(line, format!("the declared expression for `{name}` fails modulo {p}"));
        }
        checked += 1;
    }
    Ok(())
}
