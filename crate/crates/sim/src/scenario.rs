//! Scenario execution and the checks attached to each scenario.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use jmgt_core::diagnostics::{
    bootstrap_residual, energy_identity_check, energy_inequality_check, energy_reports, estimate_eta_for,
    DiagnosticsError, EnergyReport,
};
use jmgt_core::kernels::{monotonicity_check, KernelError};
use jmgt_core::quadrature::{build_weights, discrete_positivity_check, QuadratureError};
use jmgt_core::solver::{
    exponential_mode_solution, Solver, SolverConfig, SolverError, SourceSpec, Termination, Trajectory,
};
use jmgt_core::spectral::{BoxDomain, GridField, ModalField, SpectralError};
use jmgt_core::{CheckReport, KernelSpec};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{
    ConvergenceOptions, GlobalOptions, InitialPreset, InviscidOptions, PositivityOptions, RunConfig, Scenario,
    SourcePreset,
};
use crate::output::{write_energies, write_table, write_verdict, RunSummary, Verdict};

/// Signal length, step and trial count of the η̂ estimate behind `D`.
pub const ETA_STEPS: usize = 128;
pub const ETA_DT: f64 = 0.05;
pub const ETA_TRIALS: usize = 500;

/// Slack in the `‖∇Δψ‖ ≤ sup‖∇Δz‖ + ‖∇Δψ₀‖` bound.
pub const Z_RELATION_SLACK: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// One finished simulation with its energy series.
#[derive(Debug, Clone)]
pub struct RunData {
    pub name: String,
    pub config: SolverConfig,
    pub trajectory: Trajectory,
    pub reports: Vec<EnergyReport>,
    pub eta: f64,
}

impl RunData {
    pub fn completed(&self) -> bool {
        self.trajectory.termination == Termination::Completed
    }

    /// `sup_t ‖ψ_t‖_∞ / ‖ψ_t(0)‖_∞` over the steps that were taken.
    pub fn growth(&self) -> f64 {
        let recs = &self.trajectory.records;
        let first = recs[0].linf_psi_t;
        let sup = recs.iter().map(|r| r.linf_psi_t).fold(0.0, f64::max);
        if first > 0.0 {
            sup / first
        } else if sup == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// [`Self::growth`], or infinity if the run broke down before the horizon.
    pub fn effective_growth(&self) -> f64 {
        if self.completed() {
            self.growth()
        } else {
            f64::INFINITY
        }
    }

    pub fn summary(&self) -> RunSummary {
        let term = self.trajectory.termination;
        RunSummary {
            name: self.name.clone(),
            kernel: self.config.kernel.label(),
            delta: self.config.delta,
            dt: self.config.dt,
            termination: term.label(),
            termination_time: match term {
                Termination::Completed => None,
                Termination::NonFinite { t } | Termination::PicardDivergence { t } => Some(t),
            },
            steps: self.trajectory.records.len() - 1,
            eta: self.eta,
            datum_h3: self.trajectory.datum_h3,
            boundary_gradient_residual: self.trajectory.boundary_gradient_residual,
            blowup_time: self.trajectory.blowup_time,
            sup_y: self.reports.last().map_or(0.0, |r| r.y),
            growth_linf_psi_t: self.growth(),
        }
    }
}

pub fn initial_field(preset: &InitialPreset, domain: &Arc<BoxDomain>) -> Result<ModalField, SpectralError> {
    match preset {
        InitialPreset::Zero => Ok(ModalField::zeros(domain)),
        InitialPreset::SingleMode { k, amplitude } => ModalField::single_mode(domain, k, *amplitude),
        InitialPreset::SmoothBump { amplitude, decay } => {
            let centre: Vec<f64> = domain.lengths().iter().map(|l| 0.5 * l).collect();
            Ok(GridField::from_fn(domain, true, |x| {
                let r2: f64 = x.iter().zip(&centre).map(|(a, c)| (a - c) * (a - c)).sum();
                amplitude * (-decay * r2).exp()
            })
            .to_modal())
        }
    }
}

pub fn source_spec(preset: &SourcePreset, domain: &Arc<BoxDomain>) -> Result<SourceSpec, SpectralError> {
    match preset {
        SourcePreset::None => Ok(SourceSpec::none()),
        SourcePreset::DecayingMode { k, amplitude, rate } => SourceSpec::decaying_mode(domain, k, *amplitude, *rate),
    }
}

/// Run one simulation with `ψ₂ = 0` and estimate `η̂` for its kernel.
pub fn execute(
    name: impl Into<String>,
    config: SolverConfig,
    psi0: &ModalField,
    source: SourceSpec,
    seed: u64,
) -> Result<RunData, RunError> {
    let eta = estimate_eta_for(&config.kernel, ETA_DT, ETA_STEPS, ETA_TRIALS, seed)?.eta;
    let solver = Solver::new(config.clone(), source)?;
    let trajectory = solver.run(psi0, &ModalField::zeros(&config.domain))?;
    let reports = energy_reports(
        &trajectory.records,
        config.delta,
        eta,
        trajectory.boundary_gradient_residual,
    )?;
    Ok(RunData {
        name: name.into(),
        config,
        trajectory,
        reports,
        eta,
    })
}

fn named(run: &str, check: &str) -> String {
    if run.is_empty() {
        check.to_string()
    } else {
        format!("{run}/{check}")
    }
}

pub fn completion_check(run: &RunData) -> CheckReport {
    let mut c = CheckReport::new(named(&run.name, "completed"), 0.0);
    c.measure("steps", (run.trajectory.records.len() - 1) as f64);
    match run.trajectory.termination {
        Termination::Completed => {}
        Termination::NonFinite { t } => c.fail(format!("non-finite state at t={t}")),
        Termination::PicardDivergence { t } => c.fail(format!("Picard iteration diverged at t={t}")),
    }
    c
}

/// `z(0) = 0` exactly and `sup‖∇Δψ‖ ≤ sup‖∇Δz‖ + ‖∇Δψ₀‖ + slack`.
pub fn z_relation_check(run: &RunData) -> CheckReport {
    let recs = &run.trajectory.records;
    let mut c = CheckReport::new(named(&run.name, "z_relation"), Z_RELATION_SLACK);
    let z0 = recs[0].h3_z;
    let sup_psi = recs.iter().map(|r| r.h3_psi).fold(0.0, f64::max);
    let sup_z = recs.iter().map(|r| r.h3_z).fold(0.0, f64::max);
    let datum = run.trajectory.datum_h3;
    c.measure("h3_z_initial", z0)
        .measure("sup_h3_psi", sup_psi)
        .measure("sup_h3_z", sup_z)
        .measure("datum_h3", datum);
    if z0 != 0.0 {
        c.fail(format!("z(0) = tau psi_t(0) + psi(0) is not zero: norm {z0:e}"));
    }
    let excess = sup_psi - (sup_z + datum);
    c.measure("excess", excess);
    if !(excess <= Z_RELATION_SLACK) {
        c.fail(format!("sup psi norm exceeds the z bound by {excess:e}"));
    }
    c
}

/// Relative change of `Y` over `[start·T, T]`.
pub fn y_plateau_check(run: &RunData, start: f64, tolerance: f64) -> CheckReport {
    let mut c = CheckReport::new(named(&run.name, "y_plateau"), tolerance);
    let last = run.reports.last().expect("records start with the initial state");
    let t0 = start * run.config.t_final;
    let at_start = run
        .reports
        .iter()
        .find(|r| r.t >= t0 - 1e-9 * run.config.dt)
        .unwrap_or(last);
    let rel = if at_start.y > 0.0 {
        (last.y - at_start.y) / at_start.y
    } else if last.y == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    c.measure("window_start", at_start.t)
        .measure("y_window_start", at_start.y)
        .measure("sup_y", last.y)
        .measure("relative_change", rel);
    if !last.y.is_finite() {
        c.fail("sup Y is not finite");
    }
    if !run.completed() {
        c.fail("run did not reach the horizon");
    }
    if !(rel < tolerance) {
        c.fail(format!("Y changes by {rel:.3e} on [{}, {}]", at_start.t, last.t));
    }
    c
}

pub fn bootstrap_check(run: &RunData, source: &SourceSpec, transient_fraction: f64) -> CheckReport {
    let tol = jmgt_core::diagnostics::PLATEAU_GROWTH;
    let mut c = CheckReport::new(named(&run.name, "bootstrap_plateau"), tol);
    let horizon = run.config.t_final.max(run.config.dt);
    let norm = source.w11_h2_norm(&run.config.domain, horizon, run.config.steps().max(1000));
    c.measure("source_norm", norm);
    match bootstrap_residual(&run.reports, norm, run.trajectory.datum_h3, transient_fraction) {
        Ok(b) => {
            c.measure("sup_c_star", b.sup)
                .measure("sup_c_star_at_window_start", b.sup_at_window_start)
                .measure("window_start", b.window_start);
            if !b.sup.is_finite() {
                c.fail("C* is unbounded");
            }
            if !b.plateau {
                c.fail(format!(
                    "sup C* grows from {:.6e} to {:.6e} after t={}",
                    b.sup_at_window_start, b.sup, b.window_start
                ));
            }
        }
        Err(e) => c.fail(e.to_string()),
    }
    c
}

/// Identity and inequality checks at `tolerance · max(E₁(0), 1)`.
pub fn energy_checks(run: &RunData, tolerance: f64) -> Vec<CheckReport> {
    if !run.config.track_identity {
        return Vec::new();
    }
    let recs = &run.trajectory.records;
    let tol = tolerance * recs[0].e1.max(1.0);
    let mut identity = energy_identity_check(recs, tol);
    identity.name = named(&run.name, &identity.name);
    let mut inequality = energy_inequality_check(recs, run.config.delta, run.eta, tol);
    inequality.name = named(&run.name, &inequality.name);
    vec![identity, inequality]
}

fn energies_path(dir: &Path, run: &RunData) -> PathBuf {
    if run.name.is_empty() {
        dir.join("energies.csv")
    } else {
        dir.join(&run.name).join("energies.csv")
    }
}

fn dir_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

/// Kernel admissibility checks: sign pattern of `K, −K', K''` on a geometric
/// grid and positivity of the discrete quadratic form.
pub fn kernel_checks(kernel: &KernelSpec, opts: &PositivityOptions, seed: u64) -> Result<Vec<CheckReport>, RunError> {
    let grid: Vec<f64> = (0..opts.grid_points)
        .map(|i| opts.grid_min * (opts.grid_max / opts.grid_min).powf(i as f64 / (opts.grid_points - 1) as f64))
        .collect();
    let mut mono = monotonicity_check(kernel, &grid, opts.rel_step)?;
    let weights = build_weights(kernel, opts.dt, opts.steps)?;
    let mut pos = discrete_positivity_check(&weights, opts.trials, seed);
    let eta = estimate_eta_for(kernel, opts.dt, opts.steps, opts.trials, seed)?;
    pos.measure("eta_estimate", eta.eta);
    let label = kernel.label();
    mono.name = format!("{label}/{}", mono.name);
    pos.name = format!("{label}/{}", pos.name);
    Ok(vec![mono, pos])
}

/// Execute the configured scenario, write its artifacts under `out` and
/// return the verdict (also written to `out/checks.json`).
pub fn run_scenario(config: &RunConfig, out: &Path) -> Result<Verdict, RunError> {
    let seed = config.output.seed;
    let stride = config.output.stride;
    let name = config.scenario.kind().name();
    let (runs, checks) = match &config.scenario {
        Scenario::PositivitySuite => (Vec::new(), kernel_checks(&config.kernel, &config.positivity, seed)?),
        Scenario::Simulate => {
            let run = single_run(config, "", config.solver().clone())?;
            write_energies(&energies_path(out, &run), &run.reports, stride)?;
            let checks = vec![completion_check(&run), z_relation_check(&run)];
            (vec![run.summary()], checks)
        }
        Scenario::SmallDataGlobal(opts) => small_data_global(config, opts, out)?,
        Scenario::InviscidGrowth(opts) => inviscid_growth(config, opts, out)?,
        Scenario::KernelCompare(extra) => kernel_compare(config, extra, out)?,
        Scenario::ConvergenceStudy(opts) => convergence_study(config.solver(), opts, seed, out)?,
    };
    let verdict = Verdict::new(name, seed, runs, checks);
    write_verdict(&out.join("checks.json"), &verdict)?;
    Ok(verdict)
}

fn single_run(config: &RunConfig, name: &str, solver: SolverConfig) -> Result<RunData, RunError> {
    let psi0 = initial_field(&config.initial, &solver.domain)?;
    let source = source_spec(&config.source, &solver.domain)?;
    execute(name, solver, &psi0, source, config.output.seed)
}

fn small_data_global(
    config: &RunConfig,
    opts: &GlobalOptions,
    out: &Path,
) -> Result<(Vec<RunSummary>, Vec<CheckReport>), RunError> {
    let run = single_run(config, "", config.solver().clone())?;
    write_energies(&energies_path(out, &run), &run.reports, config.output.stride)?;
    let source = source_spec(&config.source, &run.config.domain)?;
    let mut checks = vec![
        completion_check(&run),
        z_relation_check(&run),
        y_plateau_check(&run, opts.plateau_start, opts.plateau_tolerance),
        bootstrap_check(&run, &source, opts.transient_fraction),
    ];
    checks.extend(energy_checks(&run, opts.identity_tolerance));
    Ok((vec![run.summary()], checks))
}

/// The configured run against the same run with `δ = 0`.
pub fn inviscid_pair(config: &RunConfig) -> Result<(RunData, RunData), RunError> {
    let damped_cfg = config.solver().clone();
    let mut inviscid_cfg = damped_cfg.clone();
    inviscid_cfg.delta = 0.0;
    let (inviscid, damped) = rayon::join(
        || single_run(config, "inviscid", inviscid_cfg),
        || single_run(config, "damped", damped_cfg),
    );
    Ok((inviscid?, damped?))
}

/// Growth of `sup‖ψ_t‖_∞` by `growth_factor` (or a non-finite state) without
/// memory; strictly less growth with it, a broken-down run counting as
/// unbounded growth.
pub fn growth_checks(inviscid: &RunData, damped: &RunData, growth_factor: f64) -> Vec<CheckReport> {
    let mut grow = CheckReport::new("inviscid_growth", growth_factor);
    let g0 = inviscid.growth();
    grow.measure("growth", g0);
    if let Some(t) = inviscid.trajectory.blowup_time {
        grow.measure("blowup_time", t);
    }
    let non_finite = match inviscid.trajectory.termination {
        Termination::NonFinite { t } => {
            grow.measure("non_finite_time", t);
            true
        }
        Termination::PicardDivergence { t } => {
            grow.measure("picard_divergence_time", t);
            false
        }
        Termination::Completed => false,
    };
    if !(g0 >= growth_factor || non_finite) {
        grow.fail(format!("sup |psi_t| grows only by {g0:.3} < {growth_factor}"));
    }
    let mut contrast = CheckReport::new("damping_reduces_growth", 0.0);
    let (e0, e1) = (inviscid.effective_growth(), damped.effective_growth());
    contrast
        .measure("growth_inviscid", g0)
        .measure("growth_damped", damped.growth())
        .measure("inviscid_completed", f64::from(u8::from(inviscid.completed())));
    if !damped.completed() {
        contrast.fail("the damped run did not complete");
    }
    if !(e1 < e0) {
        contrast.fail(format!("damped growth {e1:.3} is not below inviscid growth {e0:.3}"));
    }
    vec![grow, contrast]
}

fn inviscid_growth(
    config: &RunConfig,
    opts: &InviscidOptions,
    out: &Path,
) -> Result<(Vec<RunSummary>, Vec<CheckReport>), RunError> {
    let (inviscid, damped) = inviscid_pair(config)?;
    let mut checks = growth_checks(&inviscid, &damped, opts.growth_factor);
    for run in [&inviscid, &damped] {
        write_energies(&energies_path(out, run), &run.reports, config.output.stride)?;
        checks.push(z_relation_check(run));
    }
    checks.push(completion_check(&damped));
    Ok((vec![inviscid.summary(), damped.summary()], checks))
}

#[derive(Serialize)]
struct CompareRow {
    kernel: String,
    eta: f64,
    termination: &'static str,
    sup_y: f64,
    final_e: f64,
    final_d: f64,
}

fn kernel_compare(
    config: &RunConfig,
    extra: &[KernelSpec],
    out: &Path,
) -> Result<(Vec<RunSummary>, Vec<CheckReport>), RunError> {
    let kernels: Vec<KernelSpec> = std::iter::once(config.kernel).chain(extra.iter().copied()).collect();
    let runs = kernels
        .par_iter()
        .enumerate()
        .map(|(i, k)| {
            let mut cfg = config.solver().clone();
            cfg.kernel = *k;
            single_run(config, &format!("{i}_{}", dir_name(&k.label())), cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for run in &runs {
        write_energies(&energies_path(out, run), &run.reports, config.output.stride)?;
        checks.push(completion_check(run));
        checks.push(z_relation_check(run));
        let last = run.reports.last().expect("initial record");
        rows.push(CompareRow {
            kernel: run.config.kernel.label(),
            eta: run.eta,
            termination: run.trajectory.termination.label(),
            sup_y: last.y,
            final_e: last.e1 + last.e2,
            final_d: last.d,
        });
    }
    write_table(&out.join("kernel_compare.csv"), &rows)?;
    Ok((runs.iter().map(RunData::summary).collect(), checks))
}

/// One level of a `Δt`-halving study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub error: f64,
    /// `log₂(e_{l−1}/e_l)`; absent on the coarsest level.
    pub order: Option<f64>,
}

/// Manufactured single-mode study: max-in-time error of the mode amplitude
/// against `φ`, per level, plus the per-level run data.
pub fn manufactured_study(
    base: &SolverConfig,
    opts: &ConvergenceOptions,
    seed: u64,
) -> Result<(Vec<ConvergenceRow>, Vec<RunData>), RunError> {
    let levels: Vec<(Vec<f64>, RunData)> = (0..opts.levels)
        .into_par_iter()
        .map(|l| {
            let mut cfg = base.clone();
            cfg.dt = base.dt / f64::from(1u32 << l);
            let m = exponential_mode_solution(&cfg, &opts.k, opts.phi.clone())?;
            let idx = cfg.domain.flat_index(&opts.k).expect("validated mode");
            let solver = Solver::new(cfg.clone(), m.source.clone())?;
            let mut errs = Vec::with_capacity(solver.steps() + 1);
            let trajectory = solver.run_with(&m.psi0, &m.psi2, 1, &mut |rec, state| {
                errs.push((state.psi(&cfg.domain).coeffs()[idx] - m.psi(rec.t)).abs());
            })?;
            let eta = jmgt_core::diagnostics::estimate_eta_for(&cfg.kernel, ETA_DT, ETA_STEPS, ETA_TRIALS, seed)?.eta;
            let reports = energy_reports(
                &trajectory.records,
                cfg.delta,
                eta,
                trajectory.boundary_gradient_residual,
            )?;
            let run = RunData {
                name: format!("level_{l}"),
                config: cfg,
                trajectory,
                reports,
                eta,
            };
            Ok((errs, run))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    for (errs, run) in &levels {
        let error = errs.iter().copied().fold(0.0, f64::max);
        let order = rows.last().map(|p| (p.error / error).log2());
        rows.push(ConvergenceRow {
            dt: run.config.dt,
            error,
            order,
        });
    }
    Ok((rows, levels.into_iter().map(|(_, r)| r).collect()))
}

fn convergence_study(
    base: &SolverConfig,
    opts: &ConvergenceOptions,
    seed: u64,
    out: &Path,
) -> Result<(Vec<RunSummary>, Vec<CheckReport>), RunError> {
    let (rows, runs) = manufactured_study(base, opts, seed)?;
    write_table(&out.join("convergence.csv"), &rows)?;
    let mut order = CheckReport::new("convergence_order", opts.min_order);
    for r in &rows {
        order.measure(format!("error_dt_{:e}", r.dt), r.error);
    }
    let min = rows.iter().filter_map(|r| r.order).fold(f64::INFINITY, f64::min);
    order.measure("min_order", min);
    if !(min >= opts.min_order) {
        order.fail(format!("observed order {min:.3} below {}", opts.min_order));
    }
    let mut checks = vec![order];
    for run in &runs {
        checks.push(completion_check(run));
        checks.push(z_relation_check(run));
    }
    Ok((runs.iter().map(RunData::summary).collect(), checks))
}
