//! Artifact writers: `energies.csv`, `checks.json` and small tables.

use std::fs;
use std::io;
use std::path::Path;

use jmgt_core::diagnostics::EnergyReport;
use jmgt_core::CheckReport;
use serde::Serialize;

pub const ENERGY_COLUMNS: [&str; 9] = [
    "t",
    "E1",
    "E2",
    "D",
    "Y",
    "linf_psi_t",
    "h3_psi",
    "h3_psi_t",
    "picard_iters",
];

#[derive(Serialize)]
struct EnergyRow {
    t: f64,
    #[serde(rename = "E1")]
    e1: f64,
    #[serde(rename = "E2")]
    e2: f64,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "Y")]
    y: f64,
    linf_psi_t: f64,
    h3_psi: f64,
    h3_psi_t: f64,
    picard_iters: usize,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, csv::Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
}

/// Rows `0, stride, 2·stride, …` of `reports`; returns the row count.
pub fn write_energies(path: &Path, reports: &[EnergyReport], stride: usize) -> Result<usize, csv::Error> {
    let mut w = csv_writer(path)?;
    let mut rows = 0;
    for r in reports.iter().step_by(stride.max(1)) {
        w.serialize(EnergyRow {
            t: r.t,
            e1: r.e1,
            e2: r.e2,
            d: r.d,
            y: r.y,
            linf_psi_t: r.linf_psi_t,
            h3_psi: r.h3_psi,
            h3_psi_t: r.h3_psi_t,
            picard_iters: r.picard_iters,
        })?;
        rows += 1;
    }
    if rows == 0 {
        w.write_record(ENERGY_COLUMNS)?;
    }
    w.flush()?;
    Ok(rows)
}

/// Any serializable rows, header from field names.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-simulation summary in the verdict file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub kernel: String,
    pub delta: f64,
    pub dt: f64,
    pub termination: &'static str,
    /// Time of the failed step for non-completed runs.
    pub termination_time: Option<f64>,
    pub steps: usize,
    pub eta: f64,
    pub datum_h3: f64,
    pub boundary_gradient_residual: f64,
    pub blowup_time: Option<f64>,
    pub sup_y: f64,
    pub growth_linf_psi_t: f64,
}

/// Contents of `checks.json`; key order is the declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub scenario: &'static str,
    pub passed: bool,
    pub seed: u64,
    pub runs: Vec<RunSummary>,
    pub checks: Vec<CheckReport>,
}

impl Verdict {
    pub fn new(scenario: &'static str, seed: u64, runs: Vec<RunSummary>, checks: Vec<CheckReport>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            scenario,
            passed,
            seed,
            runs,
            checks,
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn write_verdict(path: &Path, verdict: &Verdict) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(verdict).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
