//! Report types, CSV output and human-readable tables.

use std::fmt::Write as _;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::lmc::{ChainResult, Lemma3Bound, TheoryBound};
use crate::transport::ReferenceW2;

pub const SOFTWARE: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One assertion with the tolerance it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub tolerance: String,
    /// Recorded for context; does not affect the suite verdict.
    pub informational: bool,
}

impl Check {
    /// Passes when `measured <= limit`.
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64, tolerance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured <= limit,
            measured,
            limit,
            tolerance: tolerance.into(),
            informational: false,
        }
    }

    /// Passes when `measured >= limit`.
    pub fn at_least(name: impl Into<String>, measured: f64, limit: f64, tolerance: impl Into<String>) -> Self {
        Self { passed: measured >= limit, ..Self::at_most(name, measured, limit, tolerance) }
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub software: &'static str,
    pub version: &'static str,
    pub suite: String,
    pub scale: String,
    pub seed: u64,
    pub runtime_seconds: f64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.informational)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && !c.informational)
    }
}

/// Constants and bound values for a configuration; no chains are run.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub eta: f64,
    pub eta_cap: f64,
    pub w2_init: f64,
    /// Simplified smoothing gap of the base potential.
    pub smoothing_gap: f64,
    /// Same gap before the large-`d` simplification.
    pub smoothing_gap_envelope: f64,
    pub estimator_bias_sq: f64,
    pub lemma3: Lemma3Bound,
    pub theorem1: TheoryBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedEcho {
    pub eta: f64,
    pub eta_cap: f64,
    pub w2_init: f64,
    pub thinning: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleMetrics {
    pub chains: usize,
    pub dim: usize,
    pub steps: usize,
    pub evals_total: u64,
    pub runtime_seconds: f64,
    pub mean: Vec<f64>,
    pub mean_sq_norm: f64,
    pub w2_to_target: Option<ReferenceW2>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub software: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub resolved: ResolvedEcho,
    pub metrics: SampleMetrics,
    pub bounds: Option<BoundsReport>,
    pub checks: Vec<Check>,
}

/// `chain,coordinate_0,...,coordinate_{d-1}`, one row per chain, LF line ends.
/// Values use the shortest representation that parses back to the same `f64`.
pub fn samples_csv(result: &ChainResult) -> String {
    let mut out = String::from("chain");
    for j in 0..result.dim {
        write!(out, ",coordinate_{j}").unwrap();
    }
    out.push('\n');
    for c in 0..result.chains {
        write!(out, "{c}").unwrap();
        for v in result.state(c) {
            write!(out, ",{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// `x` with 9 significant digits, switching to exponent form outside
/// `[1e-4, 1e9)`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&mag) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn checks_table(title: &str, checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
    let mut out = format!("{title}\n");
    writeln!(out, "  {:<width$}  {:>6}  {:>16}  {:>16}  tolerance", "check", "result", "measured", "limit").unwrap();
    for c in checks {
        let verdict = match (c.passed, c.informational) {
            (true, _) => "pass",
            (false, true) => "info",
            (false, false) => "FAIL",
        };
        writeln!(
            out,
            "  {:<width$}  {:>6}  {:>16}  {:>16}  {}",
            c.name,
            verdict,
            sig9(c.measured),
            sig9(c.limit),
            c.tolerance
        )
        .unwrap();
    }
    out
}

pub fn bounds_table(b: &BoundsReport) -> String {
    let t = &b.theorem1;
    let mut out = String::new();
    writeln!(out, "eta            {}", sig9(b.eta)).unwrap();
    writeln!(out, "eta cap        {}  (2 / (M + 2 lambda))", sig9(b.eta_cap)).unwrap();
    writeln!(out, "M              {}", sig9(t.m)).unwrap();
    writeln!(out, "a              {}", sig9(t.a)).unwrap();
    writeln!(out, "W2 init        {}", sig9(b.w2_init)).unwrap();
    writeln!(out, "smoothing gap  {}  (envelope {})", sig9(b.smoothing_gap), sig9(b.smoothing_gap_envelope)).unwrap();
    writeln!(out, "bias^2 bound   {}", sig9(b.estimator_bias_sq)).unwrap();
    let l3 = &b.lemma3;
    writeln!(
        out,
        "smoothing W2   general {}  simplified {}  ({})",
        sig9(l3.w2_general),
        sig9(l3.w2_simplified),
        if l3.simplified_applicable { "simplified applies" } else { "general form used" }
    )
    .unwrap();
    writeln!(out, "mixing bound terms:").unwrap();
    for term in &t.terms {
        writeln!(out, "  {:<30} {:>16}  {}", term.name, sig9(term.value), term.formula).unwrap();
    }
    writeln!(out, "  {:<30} {:>16}", "total", sig9(t.w2_mixing)).unwrap();
    writeln!(out, "  {:<30} {:>16}  exponent K instead of K/2", "total (recursion form)", sig9(t.w2_mixing_recursion))
        .unwrap();
    for note in &t.notes {
        writeln!(out, "note: {note}").unwrap();
    }
    out
}
