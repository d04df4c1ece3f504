//! Reports: per-target verdicts, estimates and oracle values, as JSON and CSV.

use std::collections::BTreeMap;

use redlab::lab::{DensityEstimate, Scan, Status};
use serde::{Deserialize, Serialize};

/// Empirical and oracle values agree when they differ by at most this many
/// Wilson half-widths.
pub const AGREEMENT_HALF_WIDTHS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub study: String,
    pub study_hash: String,
    pub bound: Option<u64>,
    /// Excluded primes below the bound, by reason.
    pub exclusions: BTreeMap<String, u64>,
    pub targets: Vec<TargetReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub name: String,
    /// Target valuations as `ℓ:i=a` entries.
    pub values: String,
    pub criterion: Option<CriterionReport>,
    pub empirical: Option<EmpiricalReport>,
    pub oracle: Option<OracleReport>,
    /// Why no oracle value exists, when one was requested.
    pub oracle_note: Option<String>,
    pub agreement: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub verdict: String,
    pub conditional_on_declaration: bool,
    pub witnesses: Vec<WitnessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub l: u64,
    pub level: u32,
    pub component: u64,
    pub coordinates: Vec<String>,
}

impl WitnessReport {
    fn render(&self) -> String {
        format!("l={}:({})", self.l, self.coordinates.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub estimate: DensityEstimate,
    /// Largest matching prime below the bound.
    pub last_match: Option<u64>,
    pub series: Vec<DensityEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Exact value as `n/d`.
    pub value: String,
    pub decimal: f64,
    pub level: u32,
}

const REPORT_COLUMNS: [&str; 14] = [
    "target",
    "values",
    "verdict",
    "declared",
    "witness",
    "matches",
    "included",
    "prime_count",
    "estimate",
    "half_width",
    "last_match",
    "oracle",
    "oracle_decimal",
    "agreement",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// One row per target.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS).expect("in-memory write");
        for t in &self.targets {
            let c = t.criterion.as_ref();
            let e = t.empirical.as_ref().map(|e| &e.estimate);
            let witness: Vec<String> = c
                .map(|c| c.witnesses.iter().map(WitnessReport::render).collect())
                .unwrap_or_default();
            let row = [
                t.name.clone(),
                t.values.clone(),
                opt(c.map(|c| &c.verdict)),
                opt(c.map(|c| c.conditional_on_declaration)),
                witness.join(";"),
                opt(e.map(|e| e.matches)),
                opt(e.map(|e| e.included)),
                opt(e.map(|e| e.prime_count)),
                opt(e.map(|e| e.estimate)),
                opt(e.map(|e| e.half_width)),
                opt(t.empirical.as_ref().and_then(|e| e.last_match)),
                opt(t.oracle.as_ref().map(|o| &o.value)),
                opt(t.oracle.as_ref().map(|o| o.decimal)),
                opt(t.agreement),
            ];
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Whether any oracle comparison failed.
    pub fn has_disagreement(&self) -> bool {
        self.targets.iter().any(|t| t.agreement == Some(false))
    }
}

pub fn exclusion_counts(scan: &Scan) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for r in &scan.records {
        if let Status::Excluded(reason) = r.status {
            *out.entry(reason.as_str().to_string()).or_insert(0) += 1;
        }
    }
    out
}

/// Per-prime scan rows: `p,status,reason,v_l{ℓ}_i{i}…,lpart_l{ℓ}_i{i}…`.
pub fn scan_csv(scan: &Scan) -> String {
    let mut out = String::from("p,status,reason");
    for (l, i) in &scan.layout.valuations {
        out.push_str(&format!(",v_l{l}_i{i}"));
    }
    for (l, i) in &scan.layout.labels {
        out.push_str(&format!(",lpart_l{l}_i{i}"));
    }
    out.push('\n');
    let cols = scan.layout.valuations.len() + scan.layout.labels.len();
    for r in &scan.records {
        out.push_str(&r.p.to_string());
        match r.status {
            Status::Included => {
                out.push_str(",included,");
                for v in &r.valuations {
                    out.push_str(&format!(",{v}"));
                }
                for l in &r.labels {
                    out.push(',');
                    if let Some(l) = l {
                        out.push_str(&l.to_string());
                    }
                }
            }
            Status::Excluded(reason) => {
                out.push_str(",excluded,");
                out.push_str(reason.as_str());
                out.push_str(&",".repeat(cols));
            }
        }
        out.push('\n');
    }
    out
}

/// Convergence rows: `target,checkpoint,matches,prime_count,estimate,half_width`.
pub fn series_csv(report: &Report) -> String {
    let mut out = String::from("target,checkpoint,matches,prime_count,estimate,half_width\n");
    for t in &report.targets {
        let Some(e) = &t.empirical else { continue };
        for s in &e.series {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t.name, s.bound, s.matches, s.prime_count, s.estimate, s.half_width
            ));
        }
    }
    out
}
