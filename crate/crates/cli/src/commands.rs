//! Subcommand implementations and their exit-code mapping.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use redlab::arith::ArithError;
use redlab::groups::GroupsError;
use redlab::kummer::exact_density;
use redlab::lab::{
    cache_read, cache_write, convergence_series, run_scan, tally, target_matcher, LabError, PointModel, Scan,
    ScanOptions, Study,
};
use redlab::structure::{decide_criterion, StructureError, Target};
use thiserror::Error;

use crate::report::{
    exclusion_counts, scan_csv, series_csv, CriterionReport, EmpiricalReport, OracleReport, Report, TargetReport,
    WitnessReport, AGREEMENT_HALF_WIDTHS,
};
use crate::study_file::{StudyFile, StudyFileError};

pub const CACHE_ENV: &str = "REDLAB_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Study(#[from] StudyFileError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0} target(s) disagree with their oracle values")]
    Disagreement(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("budget exhausted: {0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Study(_) | CliError::Config(_) => 2,
            CliError::Disagreement(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Budget(_) => 5,
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn from_structure(e: StructureError) -> CliError {
    match e {
        StructureError::SearchTooLarge { .. } => CliError::Budget(e.to_string()),
        e => CliError::Config(e.to_string()),
    }
}

fn from_lab(e: LabError) -> CliError {
    match e {
        LabError::Io(source) => CliError::Io {
            path: PathBuf::new(),
            source,
        },
        LabError::Structure(s) => from_structure(s),
        LabError::Groups(GroupsError::Arith(a @ ArithError::BudgetExceeded { .. })) => CliError::Budget(a.to_string()),
        e => CliError::Config(e.to_string()),
    }
}

/// Settings shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub bound: Option<u64>,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<Vec<u64>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl RunOptions {
    fn scan_options(&self, study: &Study) -> ScanOptions {
        let mut o = ScanOptions::default();
        if let Some(t) = self.threads {
            o.threads = t.max(1);
        }
        o.seed = self.seed.unwrap_or(study.scan.seed);
        o
    }

    fn bound(&self, sf: &StudyFile) -> Result<u64, CliError> {
        let b = self.bound.unwrap_or_else(|| sf.study.default_bound());
        match sf.budget {
            Some(max) if b > max => Err(CliError::Budget(format!("bound {b} exceeds the study budget {max}"))),
            _ => Ok(b),
        }
    }

    fn checkpoints(&self, study: &Study, bound: u64) -> Vec<u64> {
        let mut c: Vec<u64> = self
            .checkpoints
            .clone()
            .unwrap_or_else(|| study.scan.checkpoints.clone());
        c.retain(|&x| x <= bound);
        if c.last() != Some(&bound) {
            c.push(bound);
        }
        c.sort_unstable();
        c.dedup();
        c
    }

    fn cache_dir(&self) -> Option<PathBuf> {
        self.cache_dir
            .clone()
            .or_else(|| self.out.as_ref().map(|o| o.join(".cache")))
    }
}

/// What a command produced: its report (if any), files written and a summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub report: Option<Report>,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
    files.push(path);
    Ok(())
}

/// Runs or loads the scan for `study` up to `bound`.
pub fn load_or_scan(study: &Study, bound: u64, opts: &RunOptions, notes: &mut String) -> Result<Scan, CliError> {
    let scan_opts = opts.scan_options(study);
    let Some(dir) = opts.cache_dir() else {
        return run_scan(study, bound, &scan_opts).map_err(from_lab);
    };
    let path = dir.join(format!("{}-{bound}.rdl", &hex(&study.content_hash())[..16]));
    if path.exists() {
        match cache_read(&path, study) {
            Ok(scan) if scan.bound == bound => {
                let _ = writeln!(notes, "cache hit: {}", path.display());
                return Ok(scan);
            }
            Ok(_) => {}
            Err(LabError::Io(e)) => return Err(io_error(&path, e)),
            Err(e) => {
                let _ = writeln!(notes, "ignoring cache {}: {e}", path.display());
            }
        }
    }
    let scan = run_scan(study, bound, &scan_opts).map_err(from_lab)?;
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    cache_write(&scan, &path).map_err(|e| match e {
        LabError::Io(source) => io_error(&path, source),
        e => from_lab(e),
    })?;
    Ok(scan)
}

fn empty_report(study: &Study) -> Report {
    Report {
        study: study.name.clone(),
        study_hash: hex(&study.content_hash()),
        bound: None,
        exclusions: Default::default(),
        targets: study
            .targets
            .iter()
            .map(|t| TargetReport {
                name: t.name.clone(),
                values: target_values(t),
                criterion: None,
                empirical: None,
                oracle: None,
                oracle_note: None,
                agreement: None,
            })
            .collect(),
    }
}

fn target_values(t: &Target) -> String {
    let parts: Vec<String> = t.values.iter().map(|((l, i), a)| format!("{l}:{i}={a}")).collect();
    parts.join(" ")
}

fn require_targets(study: &Study) -> Result<(), CliError> {
    if study.targets.is_empty() {
        return Err(CliError::Config("the study declares no [targets]".into()));
    }
    Ok(())
}

fn fill_criteria(study: &Study, report: &mut Report) -> Result<(), CliError> {
    let sub = study.subgroup().map_err(from_lab)?;
    for (t, tr) in study.targets.iter().zip(&mut report.targets) {
        let v = decide_criterion(&sub, t).map_err(from_structure)?;
        tr.criterion = Some(CriterionReport {
            verdict: v.verdict.to_string(),
            conditional_on_declaration: v.conditional_on_declaration,
            witnesses: v
                .witnesses()
                .map(|w| WitnessReport {
                    l: w.l,
                    level: w.level,
                    component: w.component,
                    coordinates: w.describe(&sub),
                })
                .collect(),
        });
    }
    Ok(())
}

fn fill_empirical(study: &Study, scan: &Scan, checkpoints: &[u64], report: &mut Report) -> Result<(), CliError> {
    report.bound = Some(scan.bound);
    report.exclusions = exclusion_counts(scan);
    for (t, tr) in study.targets.iter().zip(&mut report.targets) {
        let estimate = tally(scan, t).map_err(from_lab)?;
        let hit = target_matcher(&scan.layout, t).map_err(from_lab)?;
        let last_match = scan.records.iter().rev().find(|r| hit(r)).map(|r| r.p);
        let series = convergence_series(scan, t, checkpoints).map_err(from_lab)?;
        tr.empirical = Some(EmpiricalReport {
            estimate,
            last_match,
            series,
        });
    }
    Ok(())
}

/// Oracle values exist for single-coordinate torus studies and one ℓ per target.
fn fill_oracle(study: &Study, report: &mut Report) {
    let base = match study.points.as_slice() {
        [p] => match &p.model {
            PointModel::Torus(t) if t.rank() == 1 => Some(t.coordinates()[0].clone()),
            _ => None,
        },
        _ => None,
    };
    for (t, tr) in study.targets.iter().zip(&mut report.targets) {
        let Some(r) = &base else {
            tr.oracle_note = Some("oracle needs a study with a single rational base point".into());
            continue;
        };
        let [((l, _), a)] = t.values.iter().collect::<Vec<_>>()[..] else {
            tr.oracle_note = Some("oracle needs a target at a single ℓ".into());
            continue;
        };
        match exact_density(r, *l, *a) {
            Ok(d) => {
                tr.oracle = Some(OracleReport {
                    value: d.value.to_string(),
                    decimal: *d.value.numer() as f64 / *d.value.denom() as f64,
                    level: d.level,
                })
            }
            Err(e) => tr.oracle_note = Some(e.to_string()),
        }
    }
}

fn fill_agreement(report: &mut Report) {
    for t in &mut report.targets {
        if let (Some(e), Some(o)) = (&t.empirical, &t.oracle) {
            t.agreement = Some(e.estimate.agrees_with(o.decimal, AGREEMENT_HALF_WIDTHS));
        }
    }
}

fn write_report(report: &Report, opts: &RunOptions, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if let Some(dir) = &opts.out {
        write_file(dir, "report.json", &report.to_json(), files)?;
        write_file(dir, "report.csv", &report.to_csv(), files)?;
    }
    Ok(())
}

fn finish(report: Report, files: Vec<PathBuf>, notes: String) -> Result<Outcome, CliError> {
    let mut summary = notes;
    summary.push_str(&render(&report));
    Ok(Outcome {
        report: Some(report),
        files,
        summary,
    })
}

pub fn analyze(sf: &StudyFile, opts: &RunOptions) -> Result<Outcome, CliError> {
    require_targets(&sf.study)?;
    let mut report = empty_report(&sf.study);
    fill_criteria(&sf.study, &mut report)?;
    let mut files = Vec::new();
    write_report(&report, opts, &mut files)?;
    finish(report, files, String::new())
}

pub fn scan(sf: &StudyFile, opts: &RunOptions) -> Result<Outcome, CliError> {
    let bound = opts.bound(sf)?;
    let mut notes = String::new();
    let scan = load_or_scan(&sf.study, bound, opts, &mut notes)?;
    let mut files = Vec::new();
    if let Some(dir) = &opts.out {
        write_file(dir, "scan.csv", &scan_csv(&scan), &mut files)?;
    }
    let included = scan.records.iter().filter(|r| r.is_included()).count();
    let _ = writeln!(
        notes,
        "scanned {} primes up to {bound}: {included} included, {} excluded",
        scan.records.len(),
        scan.records.len() - included
    );
    for (reason, n) in exclusion_counts(&scan) {
        let _ = writeln!(notes, "  excluded ({reason}): {n}");
    }
    Ok(Outcome {
        report: None,
        files,
        summary: notes,
    })
}

pub fn density(sf: &StudyFile, opts: &RunOptions) -> Result<Outcome, CliError> {
    require_targets(&sf.study)?;
    let bound = opts.bound(sf)?;
    let mut notes = String::new();
    let scan = load_or_scan(&sf.study, bound, opts, &mut notes)?;
    let mut report = empty_report(&sf.study);
    fill_empirical(&sf.study, &scan, &opts.checkpoints(&sf.study, bound), &mut report)?;
    fill_oracle(&sf.study, &mut report);
    fill_agreement(&mut report);
    let mut files = Vec::new();
    write_report(&report, opts, &mut files)?;
    if let Some(dir) = &opts.out {
        write_file(dir, "series.csv", &series_csv(&report), &mut files)?;
    }
    finish(report, files, notes)
}

pub fn oracle(sf: &StudyFile, opts: &RunOptions) -> Result<Outcome, CliError> {
    require_targets(&sf.study)?;
    let mut report = empty_report(&sf.study);
    fill_oracle(&sf.study, &mut report);
    let mut files = Vec::new();
    write_report(&report, opts, &mut files)?;
    finish(report, files, String::new())
}

pub fn full_report(sf: &StudyFile, opts: &RunOptions) -> Result<Outcome, CliError> {
    require_targets(&sf.study)?;
    let bound = opts.bound(sf)?;
    let mut notes = String::new();
    let mut report = empty_report(&sf.study);
    fill_criteria(&sf.study, &mut report)?;
    let scan = load_or_scan(&sf.study, bound, opts, &mut notes)?;
    fill_empirical(&sf.study, &scan, &opts.checkpoints(&sf.study, bound), &mut report)?;
    fill_oracle(&sf.study, &mut report);
    fill_agreement(&mut report);
    let mut files = Vec::new();
    write_report(&report, opts, &mut files)?;
    if let Some(dir) = &opts.out {
        write_file(dir, "series.csv", &series_csv(&report), &mut files)?;
        write_file(dir, "scan.csv", &scan_csv(&scan), &mut files)?;
    }
    finish(report, files, notes)
}

/// Human-readable report text.
pub fn render(report: &Report) -> String {
    let mut s = String::new();
    let _ = write!(s, "study {}", report.study);
    if let Some(b) = report.bound {
        let _ = write!(s, ", primes up to {b}");
        let excluded: u64 = report.exclusions.values().sum();
        if excluded > 0 {
            let parts: Vec<String> = report.exclusions.iter().map(|(k, v)| format!("{k} {v}")).collect();
            let _ = write!(
                s,
                " ({excluded} excluded: {}; density denominator π(X) counts them)",
                parts.join(", ")
            );
        }
    }
    s.push('\n');
    for t in &report.targets {
        let _ = writeln!(s, "target {} [{}]", t.name, t.values);
        if let Some(c) = &t.criterion {
            let flag = if c.conditional_on_declaration {
                " (conditional on the declared presentation)"
            } else {
                ""
            };
            let _ = writeln!(s, "  criterion: {}{flag}", c.verdict);
            for w in &c.witnesses {
                let _ = writeln!(
                    s,
                    "  witness ℓ={}: ({}) at level {}, component {}",
                    w.l,
                    w.coordinates.join(", "),
                    w.level,
                    w.component
                );
            }
        }
        if let Some(e) = &t.empirical {
            let d = &e.estimate;
            let _ = writeln!(
                s,
                "  empirical: {}/{} = {:.6} ± {:.6} (95% Wilson)",
                d.matches, d.prime_count, d.estimate, d.half_width
            );
            if c_is_finite(t) {
                match e.last_match {
                    Some(p) => {
                        let _ = writeln!(s, "  no matches in ({p}, {}]: bounded evidence, not proof", d.bound);
                    }
                    None => {
                        let _ = writeln!(s, "  no matches up to {}: bounded evidence, not proof", d.bound);
                    }
                }
            }
            if e.series.len() > 1 {
                let pts: Vec<String> = e
                    .series
                    .iter()
                    .map(|x| format!("{}:{:.5}", x.bound, x.estimate))
                    .collect();
                let _ = writeln!(s, "  convergence: {}", pts.join("  "));
            }
        }
        if let Some(o) = &t.oracle {
            let _ = writeln!(s, "  oracle: {} = {:.6} (level {})", o.value, o.decimal, o.level);
        } else if let Some(n) = &t.oracle_note {
            let _ = writeln!(s, "  oracle: n/a ({n})");
        }
        if let Some(a) = t.agreement {
            let _ = writeln!(
                s,
                "  agreement: {} (within {AGREEMENT_HALF_WIDTHS} half-widths)",
                if a { "OK" } else { "FAILED" }
            );
        }
    }
    s
}

fn c_is_finite(t: &TargetReport) -> bool {
    t.criterion.as_ref().is_some_and(|c| c.verdict == "Finite")
}

/// Maps a finished report to its exit status.
pub fn check_agreement(outcome: &Outcome) -> Result<(), CliError> {
    match &outcome.report {
        Some(r) if r.has_disagreement() => Err(CliError::Disagreement(
            r.targets.iter().filter(|t| t.agreement == Some(false)).count(),
        )),
        _ => Ok(()),
    }
}
