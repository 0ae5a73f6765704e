//! Report structures with a stable field schema. The human rendering goes to
//! standard output; the same data serializes to JSON behind --out so a run
//! can be reproduced bit-for-bit from its own provenance block.

use std::fmt::Write as _;
use std::path::Path;

use cotrend::DecisionOutcome;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Clone, Serialize)]
pub struct CacheIdentity {
    pub path: String,
    pub basis: String,
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct AnalysisProvenance {
    pub input: String,
    pub t: usize,
    pub p: usize,
    pub k: usize,
    pub basis: String,
    pub log: bool,
    pub normalize_start: bool,
    pub date_column: Option<String>,
    pub labels: Vec<String>,
    pub methods: Vec<String>,
    pub level: f64,
    pub norm: String,
    pub cache: Option<CacheIdentity>,
}

#[derive(Serialize)]
pub struct EstimateEntry {
    pub method: String,
    pub s_hat: usize,
    pub r_hat: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

/// K·π²·‖τ⁽ⁱ⁾‖ₕ for the hypothesis of i common trends.
#[derive(Serialize)]
pub struct StatisticEntry {
    pub order: usize,
    pub statistic: f64,
}

#[derive(Serialize)]
pub struct StripeCoordinate {
    pub j: usize,
    pub log_statistic: f64,
    pub lower_log: f64,
    pub mean_log: f64,
    pub upper_log: f64,
    pub inside: bool,
}

#[derive(Serialize)]
pub struct StripeReport {
    /// Method whose ŝ anchors the stripe.
    pub method: String,
    pub s_hat: usize,
    pub coverage: f64,
    pub reps: usize,
    /// Band construction; "pointwise" per coordinate, not simultaneous.
    pub kind: String,
    pub coordinates: Vec<StripeCoordinate>,
}

#[derive(Serialize)]
pub struct AnalysisReport {
    pub schema: &'static str,
    pub provenance: AnalysisProvenance,
    pub eigenvalues: Vec<f64>,
    pub statistics: Vec<StatisticEntry>,
    pub estimates: Vec<EstimateEntry>,
    pub stripe: Option<StripeReport>,
}

#[derive(Serialize)]
pub struct SubsystemReport {
    pub labels: Vec<String>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
pub struct HypothesisTest {
    pub kind: String,
    /// Number of restriction directions.
    pub l: usize,
    pub outcome: DecisionOutcome,
    pub restricted: SubsystemReport,
    pub complement: Option<SubsystemReport>,
}

#[derive(Serialize)]
pub struct HypothesisProvenance {
    pub input: String,
    pub t: usize,
    pub p: usize,
    pub k: usize,
    pub basis: String,
    pub log: bool,
    pub normalize_start: bool,
    pub source: String,
    pub s_full: usize,
    pub rule: String,
    pub method: String,
    pub nu: f64,
    pub eta: f64,
    pub cache: Option<CacheIdentity>,
}

#[derive(Serialize)]
pub struct HypothesisReport {
    pub schema: &'static str,
    pub provenance: HypothesisProvenance,
    pub tests: Vec<HypothesisTest>,
    /// Conjunction of z over all emitted tests.
    pub z_all: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render_analysis(r: &AnalysisReport) -> String {
    let p = &r.provenance;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "panel: {} ({} series, T = {}, K = {}, basis {})",
        p.input, p.p, p.t, p.k, p.basis
    );
    let _ = writeln!(
        out,
        "preprocessing: log = {}, normalize-start = {}{}",
        yes_no(p.log),
        yes_no(p.normalize_start),
        match &p.date_column {
            Some(name) => format!(", date column '{name}' dropped"),
            None => String::new(),
        }
    );
    let _ = writeln!(out, "\nsquared canonical correlations");
    for (j, l) in r.eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "  {:>3}  {:>12.8}", j + 1, l);
    }
    let _ = writeln!(out, "\ntest statistics, K*pi^2*||tau(i)||, norm {}", p.norm);
    for s in &r.statistics {
        let _ = writeln!(out, "  {:>3}  {:>14.6}", s.order, s.statistic);
    }
    let _ = writeln!(out, "\nselected number of common trends");
    let _ = writeln!(out, "  {:<12} {:>6} {:>6}", "method", "s_hat", "r_hat");
    for e in &r.estimates {
        let _ = writeln!(out, "  {:<12} {:>6} {:>6}", e.method, e.s_hat, e.r_hat);
    }
    if let Some(stripe) = &r.stripe {
        let _ = writeln!(
            out,
            "\nconfidence stripe at s_hat = {} [{}], coverage {:.2}, {} draws, {}",
            stripe.s_hat, stripe.method, stripe.coverage, stripe.reps, stripe.kind
        );
        let _ = writeln!(
            out,
            "  {:>3} {:>11} {:>11} {:>11} {:>11}  verdict",
            "j", "log stat", "lower", "mean", "upper"
        );
        for c in &stripe.coordinates {
            let _ = writeln!(
                out,
                "  {:>3} {:>11.4} {:>11.4} {:>11.4} {:>11.4}  {}",
                c.j,
                c.log_statistic,
                c.lower_log,
                c.mean_log,
                c.upper_log,
                if c.inside { "inside" } else { "outside" }
            );
        }
    }
    out
}

pub fn render_hypothesis(r: &HypothesisReport) -> String {
    let p = &r.provenance;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "panel: {} ({} series, T = {}, K = {}, basis {})",
        p.input, p.p, p.t, p.k, p.basis
    );
    let _ = writeln!(
        out,
        "restriction: {} with s-full = {}, rule {}, method {}, nu = {}, eta = {}",
        p.source, p.s_full, p.rule, p.method, p.nu, p.eta
    );
    for test in &r.tests {
        let o = &test.outcome;
        let _ = writeln!(
            out,
            "\n[{}] expected trend split: {} in span, {} in complement",
            test.kind, o.expected.0, o.expected.1
        );
        let _ = writeln!(
            out,
            "  restricted subsystem ({} series): estimated {} trends (expected {}) -> w = {}",
            test.restricted.labels.len(),
            o.s_hat_h,
            o.expected.0,
            yes_no(o.w)
        );
        let _ = writeln!(
            out,
            "    eigenvalues: {}",
            fmt_list(&test.restricted.eigenvalues)
        );
        match &test.complement {
            Some(c) => {
                let _ = writeln!(
                    out,
                    "  complement subsystem ({} series): estimated {} trends (expected {}) -> v = {}",
                    c.labels.len(),
                    o.s_hat_hperp,
                    o.expected.1,
                    yes_no(o.v)
                );
                let _ = writeln!(out, "    eigenvalues: {}", fmt_list(&c.eigenvalues));
            }
            None => {
                let _ = writeln!(out, "  complement subsystem: empty -> v = {}", yes_no(o.v));
            }
        }
        let _ = writeln!(out, "  decision z = {}", yes_no(o.z));
        if let Some(varsigma) = o.varsigma {
            let _ = writeln!(
                out,
                "  sequential-test significance not adjusted for: {varsigma}"
            );
        }
    }
    let _ = writeln!(
        out,
        "\noverall: restriction {} at the stated levels",
        if r.z_all { "ACCEPTED" } else { "REJECTED" }
    );
    out
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}
