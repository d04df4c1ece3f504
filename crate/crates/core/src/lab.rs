//! Prime scans: per-prime valuations of reduced orders, density estimates with
//! Wilson intervals, convergence series and a binary scan cache.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arith::{is_prime, primes_in_range, ArithError};
use crate::groups::{
    curve_reduce_point, l_primary_part_from_multiple, match_l_part, CurveModP, CurvePointQ, ExclusionReason,
    GroupsError, LPart, ReducedPoint, TorsionDescriptor, TorusPoint, WeierstrassCurve,
};
use crate::structure::{DeclaredPresentation, PresentedSubgroup, StructureError, Target};

pub const CACHE_MAGIC: &[u8; 4] = b"RDL1";
pub const CACHE_VERSION: u16 = 1;
pub const NO_LABEL: u16 = 0xFFFF;

/// Default bound for scans of torus-only studies.
pub const TORUS_DEFAULT_BOUND: u64 = 10_000_000;
/// Default bound for scans involving elliptic curves.
pub const ELLIPTIC_DEFAULT_BOUND: u64 = 200_000;

/// 95% normal quantile for Wilson intervals.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no records")]
    NoRecords,
    #[error("stale cache: {0}")]
    StaleCache(String),
    #[error("corrupt cache: {0}")]
    CorruptCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Groups(#[from] GroupsError),
}

fn config<T>(msg: impl Into<String>) -> Result<T, LabError> {
    Err(LabError::Config(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointModel {
    Torus(TorusPoint),
    /// Coordinates as `(curve index, point)`.
    Curve(Vec<(usize, CurvePointQ)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub name: String,
    pub model: PointModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ScanConfig {
    pub bound: Option<u64>,
    pub checkpoints: Vec<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Study {
    pub name: String,
    pub curves: Vec<(String, WeierstrassCurve)>,
    pub points: Vec<StudyPoint>,
    pub presentation: Option<DeclaredPresentation>,
    /// The set `S` of primes ℓ, ascending.
    pub primes: Vec<u64>,
    pub targets: Vec<Target>,
    /// Torsion lists for ℓ-part labels, keyed by `(ℓ, point index)`.
    pub matches: BTreeMap<(u64, usize), Vec<TorsionDescriptor>>,
    pub scan: ScanConfig,
}

impl Study {
    /// A study of torus points with no targets.
    pub fn torus(name: impl Into<String>, points: Vec<TorusPoint>, primes: Vec<u64>) -> Result<Self, LabError> {
        let points = points
            .into_iter()
            .enumerate()
            .map(|(i, p)| StudyPoint {
                name: format!("R{}", i + 1),
                model: PointModel::Torus(p),
            })
            .collect();
        Self::new(
            name.into(),
            Vec::new(),
            points,
            None,
            primes,
            Vec::new(),
            BTreeMap::new(),
            ScanConfig::default(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        curves: Vec<(String, WeierstrassCurve)>,
        points: Vec<StudyPoint>,
        presentation: Option<DeclaredPresentation>,
        mut primes: Vec<u64>,
        targets: Vec<Target>,
        matches: BTreeMap<(u64, usize), Vec<TorsionDescriptor>>,
        scan: ScanConfig,
    ) -> Result<Self, LabError> {
        primes.sort_unstable();
        primes.dedup();
        let study = Self {
            name,
            curves,
            points,
            presentation,
            primes,
            targets,
            matches,
            scan,
        };
        study.validate()?;
        Ok(study)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.points.is_empty() {
            return config("study has no points");
        }
        if self.primes.is_empty() {
            return config("prime set S is empty");
        }
        if let Some(&l) = self.primes.iter().find(|&&l| !is_prime(l)) {
            return config(format!("{l} is not prime"));
        }
        for pt in &self.points {
            match &pt.model {
                PointModel::Torus(t) => {
                    if t.coordinates().is_empty() {
                        return config(format!("point {} has no coordinates", pt.name));
                    }
                }
                PointModel::Curve(coords) => {
                    if coords.is_empty() {
                        return config(format!("point {} has no coordinates", pt.name));
                    }
                    for (c, q) in coords {
                        let Some((_, e)) = self.curves.get(*c) else {
                            return config(format!("point {} references unknown curve {c}", pt.name));
                        };
                        if !e.contains(q) {
                            return config(format!("point {q} is not on curve {e}"));
                        }
                    }
                }
            }
        }
        for t in &self.targets {
            self.check_target(t)?;
        }
        for (&(l, i), list) in &self.matches {
            if !self.primes.contains(&l) {
                return config(format!("match list for ℓ = {l} outside S"));
            }
            let Some(pt) = self.points.get(i) else {
                return config(format!("match list references unknown point {i}"));
            };
            let single = match &pt.model {
                PointModel::Torus(t) => t.rank() == 1,
                PointModel::Curve(c) => c.len() == 1,
            };
            if !single {
                return config(format!("match list for {} needs a single-coordinate point", pt.name));
            }
            if list.len() >= NO_LABEL as usize {
                return config("match list too long");
            }
        }
        Ok(())
    }

    pub fn check_target(&self, t: &Target) -> Result<(), LabError> {
        for &(l, i) in t.values.keys() {
            if !is_prime(l) {
                return config(format!("target {}: {l} is not prime", t.name));
            }
            if !self.primes.contains(&l) {
                return config(format!("target {}: ℓ = {l} is not in S", t.name));
            }
            if i >= self.points.len() {
                return config(format!("target {}: unknown point index {i}", t.name));
            }
        }
        Ok(())
    }

    pub fn has_curves(&self) -> bool {
        self.points.iter().any(|p| matches!(p.model, PointModel::Curve(_)))
    }

    pub fn default_bound(&self) -> u64 {
        self.scan.bound.unwrap_or(if self.has_curves() {
            ELLIPTIC_DEFAULT_BOUND
        } else {
            TORUS_DEFAULT_BOUND
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            valuations: self
                .primes
                .iter()
                .flat_map(|&l| (0..self.points.len()).map(move |i| (l, i)))
                .collect(),
            labels: self.matches.keys().copied().collect(),
        }
    }

    /// Canonical text of everything that influences scan records.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (name, e) in &self.curves {
            let _ = writeln!(s, "curve {name} {e}");
        }
        for p in &self.points {
            match &p.model {
                PointModel::Torus(t) => {
                    let c: Vec<String> = t.coordinates().iter().map(|x| x.to_string()).collect();
                    let _ = writeln!(s, "torus {} {}", p.name, c.join(","));
                }
                PointModel::Curve(coords) => {
                    let c: Vec<String> = coords.iter().map(|(i, q)| format!("{i}:{q}")).collect();
                    let _ = writeln!(s, "curve-point {} {}", p.name, c.join(";"));
                }
            }
        }
        if let Some(d) = &self.presentation {
            let _ = writeln!(
                s,
                "presentation {:?} {:?} {:?}",
                d.block_ranks, d.generator_blocks, d.torsion_generators
            );
            for pt in &d.points {
                for c in pt {
                    let _ = writeln!(s, "  {} {:?} {:?}", c.block, c.free, c.torsion);
                }
            }
        }
        let ls: Vec<String> = self.primes.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "primes {}", ls.join(","));
        for ((l, i), list) in &self.matches {
            let items: Vec<String> = list.iter().map(describe_torsion).collect();
            let _ = writeln!(s, "match {l} {i} {}", items.join(","));
        }
        s
    }

    pub fn content_hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }

    /// `G_R` for the combined point: machine-verified for tori, declared for curves.
    pub fn subgroup(&self) -> Result<PresentedSubgroup, LabError> {
        let torus: Vec<TorusPoint> = self
            .points
            .iter()
            .filter_map(|p| match &p.model {
                PointModel::Torus(t) => Some(t.clone()),
                PointModel::Curve(_) => None,
            })
            .collect();
        if torus.len() == self.points.len() {
            return Ok(PresentedSubgroup::torus(&torus)?);
        }
        if !torus.is_empty() {
            return config("criterion for mixed torus and elliptic studies is not supported");
        }
        let Some(decl) = &self.presentation else {
            return config("elliptic studies need a declared presentation");
        };
        Ok(PresentedSubgroup::declared(decl)?)
    }

    pub fn target(&self, name: &str) -> Option<&Target> {
        self.targets.iter().find(|t| t.name == name)
    }
}

fn describe_torsion(t: &TorsionDescriptor) -> String {
    match t {
        TorsionDescriptor::TorusSign(s) => format!("{}1", if s.as_i64() < 0 { "-" } else { "+" }),
        TorsionDescriptor::TorusRootClass(n) => format!("mu#{n}"),
        TorsionDescriptor::CurvePoint { curve, point, order } => format!("{curve}{point}#{order}"),
    }
}

/// Column layout shared by scan records, CSV and cache files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub valuations: Vec<(u64, usize)>,
    pub labels: Vec<(u64, usize)>,
}

impl Layout {
    pub fn valuation_column(&self, l: u64, i: usize) -> Option<usize> {
        self.valuations.iter().position(|&c| c == (l, i))
    }

    pub fn label_column(&self, l: u64, i: usize) -> Option<usize> {
        self.labels.iter().position(|&c| c == (l, i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Included,
    Excluded(ExclusionReason),
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Included => 0,
            Status::Excluded(r) => r.code(),
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        if code == 0 {
            Some(Status::Included)
        } else {
            ExclusionReason::from_code(code).map(Status::Excluded)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub p: u64,
    pub status: Status,
    /// One entry per layout valuation column; empty when excluded.
    pub valuations: Vec<u8>,
    /// One entry per layout label column; empty when excluded.
    pub labels: Vec<Option<u16>>,
}

impl ScanRecord {
    fn excluded(p: u64, reason: ExclusionReason) -> Self {
        Self {
            p,
            status: Status::Excluded(reason),
            valuations: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn is_included(&self) -> bool {
        self.status == Status::Included
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scan {
    pub study_hash: [u8; 32],
    pub bound: u64,
    pub layout: Layout,
    pub records: Vec<ScanRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    pub threads: usize,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            threads: thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
        }
    }
}

fn exclusion_of(e: &GroupsError) -> Option<ExclusionReason> {
    match e {
        GroupsError::Excluded { reason, .. } => Some(*reason),
        GroupsError::TorsionCollision(..) => Some(ExclusionReason::TorsionCollision),
        GroupsError::TorsionOrderMismatch { .. } => Some(ExclusionReason::TorsionOrder),
        GroupsError::Arith(ArithError::BudgetExceeded { .. }) => Some(ExclusionReason::Budget),
        _ => None,
    }
}

/// Scans every prime `p ≤ bound`.
pub fn run_scan(study: &Study, bound: u64, opts: &ScanOptions) -> Result<Scan, LabError> {
    run_scan_range(study, 2, bound, opts)
}

/// Scans the primes in `[lo, hi]`.
pub fn run_scan_range(study: &Study, lo: u64, hi: u64, opts: &ScanOptions) -> Result<Scan, LabError> {
    study.validate()?;
    let layout = study.layout();
    let primes = if hi < lo { Vec::new() } else { primes_in_range(lo, hi) };
    let threads = opts.threads.max(1);
    if threads == 1 {
        let records = primes
            .iter()
            .map(|&p| scan_prime(study, &layout, p, opts.seed))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Scan {
            study_hash: study.content_hash(),
            bound: hi,
            layout,
            records,
        });
    }
    let chunk = primes.len().div_ceil(threads).max(1);
    let blocks: Vec<Result<Vec<ScanRecord>, LabError>> = thread::scope(|s| {
        let handles: Vec<_> = primes
            .chunks(chunk)
            .map(|block| {
                let layout = &layout;
                s.spawn(move || block.iter().map(|&p| scan_prime(study, layout, p, opts.seed)).collect())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scan worker panicked"))
            .collect()
    });
    let mut records = Vec::with_capacity(primes.len());
    for b in blocks {
        records.extend(b?);
    }
    Ok(Scan {
        study_hash: study.content_hash(),
        bound: hi,
        layout,
        records,
    })
}

/// Joins scans of consecutive intervals.
pub fn concat_scans(parts: Vec<Scan>) -> Result<Scan, LabError> {
    let mut it = parts.into_iter();
    let Some(mut acc) = it.next() else {
        return Err(LabError::NoRecords);
    };
    for part in it {
        if part.study_hash != acc.study_hash || part.layout != acc.layout {
            return config("scans of different studies cannot be joined");
        }
        if part
            .records
            .first()
            .zip(acc.records.last())
            .is_some_and(|(a, b)| a.p <= b.p)
        {
            return config("scans overlap or are out of order");
        }
        acc.records.extend(part.records);
        acc.bound = part.bound;
    }
    Ok(acc)
}

fn reduce_point(
    study: &Study,
    point: &StudyPoint,
    p: u64,
    curves: &mut HashMap<usize, (CurveModP, u64)>,
    seed: u64,
) -> Result<(ReducedPoint, u64), GroupsError> {
    match &point.model {
        PointModel::Torus(t) => {
            let residues = t
                .coordinates()
                .iter()
                .map(|c| c.residue(p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((ReducedPoint::Torus { p, residues }, p - 1))
        }
        PointModel::Curve(coords) => {
            let mut reduced = Vec::with_capacity(coords.len());
            let mut exponent = 1u64;
            for (c, q) in coords {
                let curve = &study.curves[*c].1;
                let (cm, pt) = curve_reduce_point(curve, q, p)?;
                let n = match curves.get(c) {
                    Some(&(_, n)) => n,
                    None => {
                        let n = cm.group_order(seed)?;
                        curves.insert(*c, (cm, n));
                        n
                    }
                };
                exponent = crate::arith::lcm(exponent, n);
                reduced.push((cm, pt));
            }
            Ok((ReducedPoint::Curve { coords: reduced }, exponent))
        }
    }
}

fn scan_prime(study: &Study, layout: &Layout, p: u64, seed: u64) -> Result<ScanRecord, LabError> {
    if study.primes.contains(&p) {
        return Ok(ScanRecord::excluded(p, ExclusionReason::InPrimeSet));
    }
    let mut curves = HashMap::new();
    let mut reduced = Vec::with_capacity(study.points.len());
    for pt in &study.points {
        match reduce_point(study, pt, p, &mut curves, seed) {
            Ok(r) => reduced.push(r),
            Err(e) => match exclusion_of(&e) {
                Some(reason) => return Ok(ScanRecord::excluded(p, reason)),
                None => return Err(e.into()),
            },
        }
    }
    let mut parts: HashMap<(u64, usize), LPart<ReducedPoint>> = HashMap::new();
    let mut valuations = Vec::with_capacity(layout.valuations.len());
    for &(l, i) in &layout.valuations {
        let (g, n) = &reduced[i];
        let part = l_primary_part_from_multiple(g, *n, l);
        valuations.push(u8::try_from(part.a).expect("valuation fits in a byte"));
        parts.insert((l, i), part);
    }
    let mut labels = Vec::with_capacity(layout.labels.len());
    for key in &layout.labels {
        let list = &study.matches[key];
        match match_l_part(&parts[key], list, key.0) {
            Ok(found) => labels.push(found.map(|x| x as u16)),
            Err(e) => match exclusion_of(&e) {
                Some(reason) => return Ok(ScanRecord::excluded(p, reason)),
                None => return Err(e.into()),
            },
        }
    }
    Ok(ScanRecord {
        p,
        status: Status::Included,
        valuations,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub bound: u64,
    pub matches: u64,
    pub included: u64,
    pub excluded: u64,
    /// `π(bound)`, excluded primes included.
    pub prime_count: u64,
    pub estimate: f64,
    pub half_width: f64,
}

impl DensityEstimate {
    pub fn from_counts(bound: u64, matches: u64, included: u64, excluded: u64) -> Self {
        let n = included + excluded;
        let (estimate, half_width) = if n == 0 {
            (0.0, 1.0)
        } else {
            (matches as f64 / n as f64, wilson_half_width(matches, n, Z_95))
        };
        Self {
            bound,
            matches,
            included,
            excluded,
            prime_count: n,
            estimate,
            half_width,
        }
    }

    /// `|estimate − value| ≤ k` half-widths.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.half_width
    }
}

/// Half-width of the Wilson score interval for `k` successes in `n` trials.
pub fn wilson_half_width(k: u64, n: u64, z: f64) -> f64 {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// Predicate for records whose valuations equal the target.
pub fn target_matcher(layout: &Layout, target: &Target) -> Result<impl Fn(&ScanRecord) -> bool, LabError> {
    let cols = target
        .values
        .iter()
        .map(|(&(l, i), &a)| {
            layout
                .valuation_column(l, i)
                .map(|c| (c, a))
                .ok_or_else(|| LabError::Config(format!("target {} references unknown column ({l}, {i})", target.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(move |r: &ScanRecord| r.is_included() && cols.iter().all(|&(c, a)| u32::from(r.valuations[c]) == a))
}

pub fn tally(scan: &Scan, target: &Target) -> Result<DensityEstimate, LabError> {
    tally_up_to(scan, target, scan.bound)
}

fn tally_up_to(scan: &Scan, target: &Target, bound: u64) -> Result<DensityEstimate, LabError> {
    let hit = target_matcher(&scan.layout, target)?;
    let (mut m, mut inc, mut exc) = (0, 0, 0);
    for r in scan.records.iter().take_while(|r| r.p <= bound) {
        if r.is_included() {
            inc += 1;
            if hit(r) {
                m += 1;
            }
        } else {
            exc += 1;
        }
    }
    Ok(DensityEstimate::from_counts(bound, m, inc, exc))
}

/// One estimate per checkpoint, each equal to a tally of the truncated scan.
pub fn convergence_series(scan: &Scan, target: &Target, checkpoints: &[u64]) -> Result<Vec<DensityEstimate>, LabError> {
    if scan.records.is_empty() {
        return Err(LabError::NoRecords);
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return config("checkpoints must be strictly ascending");
    }
    if checkpoints.last().is_some_and(|&c| c > scan.bound) {
        return config(format!("checkpoint beyond scan bound {}", scan.bound));
    }
    let hit = target_matcher(&scan.layout, target)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let (mut m, mut inc, mut exc) = (0, 0, 0);
    let mut it = scan.records.iter().peekable();
    for &c in checkpoints {
        while let Some(r) = it.next_if(|r| r.p <= c) {
            if r.is_included() {
                inc += 1;
                m += u64::from(hit(r));
            } else {
                exc += 1;
            }
        }
        out.push(DensityEstimate::from_counts(c, m, inc, exc));
    }
    Ok(out)
}

impl Scan {
    pub fn to_bytes(&self) -> Vec<u8> {
        let nv = self.layout.valuations.len();
        let nl = self.layout.labels.len();
        let mut out = Vec::with_capacity(64 + self.records.len() * (9 + nv + 2 * nl));
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.study_hash);
        out.extend_from_slice(&self.bound.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for cols in [&self.layout.valuations, &self.layout.labels] {
            out.extend_from_slice(&(cols.len() as u16).to_le_bytes());
            for &(l, i) in cols.iter() {
                out.extend_from_slice(&l.to_le_bytes());
                out.extend_from_slice(&(i as u16).to_le_bytes());
            }
        }
        for r in &self.records {
            out.extend_from_slice(&r.p.to_le_bytes());
            out.push(r.status.code());
            if r.is_included() {
                out.extend_from_slice(&r.valuations);
                for lab in &r.labels {
                    out.extend_from_slice(&lab.unwrap_or(NO_LABEL).to_le_bytes());
                }
            } else {
                out.extend(std::iter::repeat_n(0u8, nv));
                out.extend(std::iter::repeat_n(0xFFu8, 2 * nl));
            }
        }
        out
    }

    /// Parses a cache, rejecting it unless it was written for `expected_hash`.
    pub fn from_bytes(bytes: &[u8], expected_hash: &[u8; 32]) -> Result<Scan, LabError> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != CACHE_MAGIC {
            return Err(LabError::CorruptCache("bad magic".into()));
        }
        let version = u16::from_le_bytes(rd.array()?);
        if version != CACHE_VERSION {
            return Err(LabError::StaleCache(format!(
                "format version {version}, expected {CACHE_VERSION}"
            )));
        }
        let study_hash: [u8; 32] = rd.array()?;
        if &study_hash != expected_hash {
            return Err(LabError::StaleCache("study content changed".into()));
        }
        let bound = u64::from_le_bytes(rd.array()?);
        let count = u64::from_le_bytes(rd.array()?);
        let mut cols = Vec::new();
        for _ in 0..2 {
            let n = u16::from_le_bytes(rd.array()?);
            let mut c = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let l = u64::from_le_bytes(rd.array()?);
                let i = u16::from_le_bytes(rd.array()?) as usize;
                c.push((l, i));
            }
            cols.push(c);
        }
        let labels_cols = cols.pop().expect("two column lists");
        let layout = Layout {
            valuations: cols.pop().expect("two column lists"),
            labels: labels_cols,
        };
        let (nv, nl) = (layout.valuations.len(), layout.labels.len());
        let width = 9 + nv + 2 * nl;
        let remaining = bytes.len() - rd.pos;
        if (remaining as u128) != count as u128 * width as u128 {
            return Err(LabError::CorruptCache(format!(
                "expected {count} records of {width} bytes, found {remaining} bytes"
            )));
        }
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let p = u64::from_le_bytes(rd.array()?);
            let code = rd.take(1)?[0];
            let status =
                Status::from_code(code).ok_or_else(|| LabError::CorruptCache(format!("status code {code}")))?;
            let vals = rd.take(nv)?.to_vec();
            let mut labels = Vec::with_capacity(nl);
            for _ in 0..nl {
                let x = u16::from_le_bytes(rd.array()?);
                labels.push((x != NO_LABEL).then_some(x));
            }
            records.push(match status {
                Status::Included => ScanRecord {
                    p,
                    status,
                    valuations: vals,
                    labels,
                },
                Status::Excluded(reason) => ScanRecord::excluded(p, reason),
            });
        }
        Ok(Scan {
            study_hash,
            bound,
            layout,
            records,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LabError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(LabError::CorruptCache("truncated".into()));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], LabError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn cache_write(scan: &Scan, path: &Path) -> Result<(), LabError> {
    std::fs::write(path, scan.to_bytes())?;
    Ok(())
}

pub fn cache_read(path: &Path, study: &Study) -> Result<Scan, LabError> {
    let bytes = std::fs::read(path)?;
    Scan::from_bytes(&bytes, &study.content_hash())
}
