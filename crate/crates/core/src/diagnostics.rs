//! Energy, dissipation and bootstrap functionals evaluated on solver output.
//!
//! ```text
//! E₁ = ½‖Δ(ψ_t + τψ_tt)‖² + ½c²‖∇Δ(ψ + τψ_t)‖²
//! E₂ = ½‖Δ(ψ + τψ_t)‖²   + ½c²‖∇Δ(ξ + τψ)‖²
//! D  = (δ/η) ∫‖∇Δ(τψ_t + ψ)‖²,   𝐄 = sup (E₁ + E₂),   𝐘 = 𝐄 + D
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::check::CheckReport;
use crate::kernels::{Kernel, KernelSpec};
use crate::quadrature::{build_weights, quadratic_form, QuadratureError};
use crate::solver::{SolverConfig, SolverState, StepRecord};
use crate::spectral::{sobolev_seminorm, ModalField, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("bootstrap denominator vanishes: all data are zero")]
    DegenerateDenominator,
    #[error("eta must be positive, got {0}")]
    InvalidEta(f64),
    #[error("empty report series")]
    Empty,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One row of the energy time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    /// `∫‖∇Δ(τψ_t + ψ)‖²`.
    pub d_raw: f64,
    /// `(δ/η̂) d_raw`.
    pub d: f64,
    /// Running sup of `E₁ + E₂` over recorded steps.
    pub e_sup: f64,
    pub y: f64,
    pub linf_psi_t: f64,
    pub h3_psi: f64,
    pub h3_psi_t: f64,
    /// `‖Δ(τψ_tt + ψ_t)‖`.
    pub h2_y: f64,
    /// `∫‖∇Δψ‖²`.
    pub h3_psi_sq_int: f64,
    /// `∫‖∇Δψ_t‖²`.
    pub h3_psi_t_sq_int: f64,
    pub picard_iters: usize,
    /// Largest `|∇ψ₀|` on the boundary; set on the first row only.
    pub boundary_gradient_residual: Option<f64>,
}

/// `E₁` from `ψ`, `ψ_t`, `ψ_tt`.
pub fn energy_e1(psi: &ModalField, v: &ModalField, w: &ModalField, tau: f64, c: f64) -> Result<f64, SpectralError> {
    let y = v.axpy(tau, w)?;
    let z = psi.axpy(tau, v)?;
    Ok(0.5 * (sobolev_seminorm(&y, 2).powi(2) + c * c * sobolev_seminorm(&z, 3).powi(2)))
}

/// `E₂` from `ψ`, `ψ_t` and the integrated potential `ξ`.
pub fn energy_e2(psi: &ModalField, v: &ModalField, xi: &ModalField, tau: f64, c: f64) -> Result<f64, SpectralError> {
    let z = psi.axpy(tau, v)?;
    let s = xi.axpy(tau, psi)?;
    Ok(0.5 * (sobolev_seminorm(&z, 2).powi(2) + c * c * sobolev_seminorm(&s, 3).powi(2)))
}

/// `(E₁, E₂)` recomputed from a solver state.
pub fn state_energies(config: &SolverConfig, state: &SolverState) -> Result<(f64, f64), SpectralError> {
    let d = &config.domain;
    let (tau, c) = (config.tau, config.c);
    let psi = state.psi(d);
    let v = state.psi_t(d, tau);
    let w = state.psi_tt(d, tau);
    Ok((
        energy_e1(&psi, &v, &w, tau, c)?,
        energy_e2(&psi, &v, &state.xi(d), tau, c)?,
    ))
}

/// `(δ/η) d_raw`.
pub fn dissipation_d(delta: f64, eta: f64, d_raw: f64) -> Result<f64, DiagnosticsError> {
    if !(eta > 0.0) {
        return Err(DiagnosticsError::InvalidEta(eta));
    }
    Ok(if delta == 0.0 { 0.0 } else { delta / eta * d_raw })
}

/// Trapezoidal accumulation of `‖∇Δz‖²` over a sequence of snapshots.
#[derive(Debug, Clone, Default)]
pub struct DissipationAccumulator {
    raw: f64,
    last: Option<(f64, f64)>,
}

impl DissipationAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add the snapshot `z = τψ_t + ψ` at time `t`.
    pub fn push(&mut self, t: f64, z: &ModalField) {
        let q = sobolev_seminorm(z, 3).powi(2);
        if let Some((t0, q0)) = self.last {
            self.raw += 0.5 * (t - t0) * (q0 + q);
        }
        self.last = Some((t, q));
    }

    pub fn raw(&self) -> f64 {
        self.raw
    }

    pub fn value(&self, delta: f64, eta: f64) -> Result<f64, DiagnosticsError> {
        dissipation_d(delta, eta, self.raw)
    }
}

/// Energy reports from solver records, with `D` scaled by `δ/η̂`.
pub fn energy_reports(
    records: &[StepRecord],
    delta: f64,
    eta: f64,
    boundary_gradient_residual: f64,
) -> Result<Vec<EnergyReport>, DiagnosticsError> {
    let mut e_sup: f64 = 0.0;
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        e_sup = e_sup.max(r.e1 + r.e2);
        let d = dissipation_d(delta, eta, r.integrals.d_raw)?;
        out.push(EnergyReport {
            t: r.t,
            e1: r.e1,
            e2: r.e2,
            d_raw: r.integrals.d_raw,
            d,
            e_sup,
            y: e_sup + d,
            linf_psi_t: r.linf_psi_t,
            h3_psi: r.h3_psi,
            h3_psi_t: r.h3_psi_t,
            h2_y: r.h2_y,
            h3_psi_sq_int: r.integrals.h3_psi_sq,
            h3_psi_t_sq_int: r.integrals.h3_psi_t_sq,
            picard_iters: r.picard_iters,
            boundary_gradient_residual: (i == 0).then_some(boundary_gradient_residual),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaEstimate {
    /// Smallest observed `Q_K / Q_exp`; an empirical estimate, not a bound.
    pub eta: f64,
    pub trials: usize,
    pub steps: usize,
    pub dt: f64,
}

/// Estimate the strong-positivity constant by minimising `Q_K(y)/Q_exp(y)`
/// over random signals with `y(0) = 0`: random signs, uniform noise and
/// sinusoids with log-uniform frequency in `[0.01, π/Δt]`, cycled.
pub fn estimate_eta<K: Kernel + ?Sized>(
    kernel: &K,
    dt: f64,
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<EtaEstimate, QuadratureError> {
    let steps = steps.max(1);
    let reference = KernelSpec::exponential(1.0).expect("unit exponential is valid");
    let wk = build_weights(kernel, dt, steps)?;
    let we = build_weights(&reference, dt, steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; steps + 1];
    let mut eta = f64::INFINITY;
    for trial in 0..trials.max(1) {
        match trial % 3 {
            0 => y[1..]
                .iter_mut()
                .for_each(|v| *v = if rng.random::<bool>() { 1.0 } else { -1.0 }),
            1 => y[1..].iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0)),
            _ => {
                // log-uniform so that low frequencies, where the ratio is
                // typically smallest, are sampled as often as high ones
                let (lo, hi) = (1e-2f64, std::f64::consts::PI / dt);
                let omega = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                for (n, v) in y.iter_mut().enumerate().skip(1) {
                    *v = (omega * n as f64 * dt + phase).sin();
                }
            }
        }
        let q_exp = quadratic_form(&we, &y)?;
        if q_exp > 0.0 {
            eta = eta.min(quadratic_form(&wk, &y)? / q_exp);
        }
    }
    Ok(EtaEstimate {
        eta,
        trials: trials.max(1),
        steps,
        dt,
    })
}

/// [`estimate_eta`] for a [`KernelSpec`]; the Dirac kernel has `η = 1` exactly.
pub fn estimate_eta_for(
    kernel: &KernelSpec,
    dt: f64,
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<EtaEstimate, QuadratureError> {
    if kernel.is_dirac() {
        return Ok(EtaEstimate {
            eta: 1.0,
            trials: 0,
            steps,
            dt,
        });
    }
    estimate_eta(kernel, dt, steps, trials, seed)
}

/// Fraction of the horizon treated as the initial transient.
pub const TRANSIENT_FRACTION: f64 = 0.1;
/// Allowed growth of the running sup of `C*` across the plateau window.
pub const PLATEAU_GROWTH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    /// `(t, C*(t))`.
    pub series: Vec<(f64, f64)>,
    pub sup: f64,
    /// Running sup of `C*` at the start of the window.
    pub sup_at_window_start: f64,
    pub window_start: f64,
    pub plateau: bool,
}

/// Smallest constant making
/// `𝐄 + D ≤ C*(𝐄(0) + ‖∇Δψ₀‖⁴ + ‖f̃‖² + D²)` hold at each recorded time.
///
/// The plateau test passes when the running sup of `C*(t)` grows by at most
/// [`PLATEAU_GROWTH`] over `[window_fraction·T, T]`.
pub fn bootstrap_residual(
    reports: &[EnergyReport],
    source_norm: f64,
    datum_h3: f64,
    window_fraction: f64,
) -> Result<BootstrapReport, DiagnosticsError> {
    let first = reports.first().ok_or(DiagnosticsError::Empty)?;
    let e0 = first.e1 + first.e2;
    let fixed = e0 + datum_h3.powi(4) + source_norm * source_norm;
    let t_end = reports.last().map_or(0.0, |r| r.t);
    let window_start = first.t + window_fraction * (t_end - first.t);
    let mut series = Vec::with_capacity(reports.len());
    let mut sup: f64 = 0.0;
    let mut sup_at_window_start = None;
    for r in reports {
        let denom = fixed + r.d * r.d;
        if denom == 0.0 {
            return Err(DiagnosticsError::DegenerateDenominator);
        }
        let c = (r.e_sup + r.d) / denom;
        if r.t >= window_start && sup_at_window_start.is_none() {
            sup_at_window_start = Some(sup.max(c));
        }
        sup = sup.max(c);
        series.push((r.t, c));
    }
    let start = sup_at_window_start.unwrap_or(sup);
    Ok(BootstrapReport {
        series,
        sup,
        sup_at_window_start: start,
        window_start,
        plateau: sup <= start * (1.0 + PLATEAU_GROWTH),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StraussReport {
    /// `M < bound` whenever `M ≤ c₁ + c₂M^κ` and `M(0) ≤ bound`.
    Holds { bound: f64, margin: f64 },
    /// `margin = rhs − lhs ≤ 0` in the smallness condition.
    ConditionFails { margin: f64 },
    /// Parameters outside `c₁, c₂ > 0`, `κ > 1`.
    Invalid,
}

/// Smallness condition `c₁ c₂^{1/(κ−1)} < (1 − 1/κ) κ^{−1/(κ−1)}` of the
/// barrier argument for `M ≤ c₁ + c₂M^κ`, evaluated in log space.
pub fn strauss_bound(c1: f64, c2: f64, kappa: f64) -> StraussReport {
    if !(c1 > 0.0 && c2 > 0.0 && kappa > 1.0) || !(c1.is_finite() && c2.is_finite() && kappa.is_finite()) {
        return StraussReport::Invalid;
    }
    let e = 1.0 / (kappa - 1.0);
    let log_lhs = c1.ln() + e * c2.ln();
    let log_rhs = (1.0 - 1.0 / kappa).ln() - e * kappa.ln();
    let margin = log_rhs.exp() - log_lhs.exp();
    if log_lhs < log_rhs {
        StraussReport::Holds {
            bound: c1 / (1.0 - 1.0 / kappa),
            margin,
        }
    } else {
        StraussReport::ConditionFails { margin }
    }
}

/// Empirical constants of the component bounds
///
/// ```text
/// sup‖∇Δψ‖², ∫‖∇Δψ‖²  ≤ C (∫‖∇Δz‖² + ‖∇Δψ₀‖²)
/// ∫‖∇Δψ_t‖²          ≤ C (∫‖∇Δz‖² + ∫‖∇Δψ‖²)
/// ```
///
/// taken as the max over recorded times. Returns `[C_∞, C_2, C_t]`.
pub fn dissipation_constants(reports: &[EnergyReport], datum_h3: f64) -> [f64; 3] {
    let ratio = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    let datum_sq = datum_h3 * datum_h3;
    let mut sup_psi: f64 = 0.0;
    let mut out = [0.0f64; 3];
    for r in reports {
        sup_psi = sup_psi.max(r.h3_psi * r.h3_psi);
        let base = r.d_raw + datum_sq;
        out[0] = out[0].max(ratio(sup_psi, base));
        // over [0, t] with t → 0 the integral ratio is dominated by the datum term
        out[1] = out[1].max(ratio(r.h3_psi_sq_int, base));
        out[2] = out[2].max(ratio(r.h3_psi_t_sq_int, r.d_raw + r.h3_psi_sq_int));
    }
    out
}

/// Allowed relative spread of the constants between two resolutions.
pub const CONSTANT_SPREAD: f64 = 0.1;

/// Compare [`dissipation_constants`] on a coarse and a fine run of the same
/// problem; the constants must be finite and agree within [`CONSTANT_SPREAD`].
pub fn dissipation_control_check(coarse: &[EnergyReport], fine: &[EnergyReport], datum_h3: f64) -> CheckReport {
    let mut report = CheckReport::new("dissipation_control", CONSTANT_SPREAD);
    let a = dissipation_constants(coarse, datum_h3);
    let b = dissipation_constants(fine, datum_h3);
    for (i, name) in ["c_inf_psi", "c_l2_psi", "c_l2_psi_t"].into_iter().enumerate() {
        report.measure(format!("{name}_coarse"), a[i]);
        report.measure(format!("{name}_fine"), b[i]);
        if !(a[i].is_finite() && b[i].is_finite()) {
            report.fail(format!("{name} is unbounded"));
            continue;
        }
        let scale = a[i].abs().max(b[i].abs());
        if scale > 0.0 && (a[i] - b[i]).abs() > CONSTANT_SPREAD * scale {
            report.fail(format!("{name} changes from {} to {} under refinement", a[i], b[i]));
        }
    }
    report
}

/// Discrete form of
/// `E₁ + E₂ + (δη̂/2)∫‖∇Δz‖² ≤ E₁(0) + E₂(0) + R₁ + R₂`,
/// the energy identity combined with the kernel lower bound. `tol` absorbs
/// the time discretisation error.
pub fn energy_inequality_check(records: &[StepRecord], delta: f64, eta: f64, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("energy_inequality", tol);
    let Some(first) = records.first() else {
        report.fail("empty record series");
        return report;
    };
    let e0 = first.e1 + first.e2;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_identity: f64 = 0.0;
    for r in records {
        let lhs = r.e1 + r.e2 + 0.5 * delta * eta * r.integrals.d_raw;
        let rhs = e0 + r.integrals.r1 + r.integrals.r2;
        let excess = lhs - rhs;
        worst = worst.max(excess);
        worst_identity = worst_identity.max(r.identity_residual.abs());
        if excess > tol {
            report.fail(format!("inequality violated by {excess:.3e} at t={}", r.t));
        }
    }
    report.measure("max_excess", worst);
    report.measure("max_identity_residual", worst_identity);
    report
}

/// Identity residual check: `max_n |residual_n| ≤ tol`.
pub fn energy_identity_check(records: &[StepRecord], tol: f64) -> CheckReport {
    let mut report = CheckReport::new("energy_identity", tol);
    let worst = records.iter().map(|r| r.identity_residual.abs()).fold(0.0, f64::max);
    report.measure("max_residual", worst);
    if !(worst <= tol) {
        report.fail(format!("identity residual {worst:.3e} exceeds {tol:.3e}"));
    }
    report
}
