use std::f64::consts::PI;
use std::sync::Arc;

use jmgt_core::diagnostics::{
    bootstrap_residual, dissipation_constants, dissipation_control_check, energy_identity_check,
    energy_inequality_check, energy_reports, estimate_eta, estimate_eta_for, state_energies, strauss_bound,
    DiagnosticsError, EnergyReport, StraussReport,
};
use jmgt_core::kernels::{Kernel, KernelError};
use jmgt_core::solver::{Solver, SolverConfig, SourceSpec, Trajectory};
use jmgt_core::spectral::{BoxDomain, ModalField};
use jmgt_core::KernelSpec;
use proptest::prelude::*;

struct TwiceExp;
impl Kernel for TwiceExp {
    fn value(&self, t: f64) -> Result<f64, KernelError> {
        Ok(2.0 * (-t).exp())
    }
}

fn small_run(dt: f64, t_final: f64, sigma: f64, amplitude: f64) -> (SolverConfig, Trajectory) {
    let d = BoxDomain::interval(PI, 16).unwrap();
    let mut cfg = SolverConfig::new(Arc::clone(&d), KernelSpec::abel(0.5).unwrap(), dt, t_final);
    cfg.sigma = sigma;
    let source = SourceSpec::decaying_mode(&d, &[1], 1e-3, 0.5).unwrap();
    let solver = Solver::new(cfg.clone(), source).unwrap();
    let psi0 = ModalField::single_mode(&d, &[1], amplitude).unwrap();
    (cfg, solver.run(&psi0, &ModalField::zeros(&d)).unwrap())
}

#[test]
fn eta_examples() {
    let e = estimate_eta(&KernelSpec::exponential(1.0).unwrap(), 0.05, 128, 60, 1).unwrap();
    assert!((e.eta - 1.0).abs() < 1e-12);
    let e = estimate_eta(&TwiceExp, 0.05, 128, 60, 1).unwrap();
    assert!((e.eta - 2.0).abs() < 1e-9, "{}", e.eta);
    assert_eq!(
        estimate_eta_for(&KernelSpec::dirac(), 0.05, 128, 60, 1).unwrap().eta,
        1.0
    );
}

/// Abel(½): frozen regression value; the continuous infimum of
/// `Re K̂(ω)(1 + ω²)` is `cos(π/4)(4/3)3^{1/4} ≈ 1.2408` at `ω² = 1/3`.
#[test]
fn abel_eta_baseline() {
    let e = estimate_eta(&KernelSpec::abel(0.5).unwrap(), 0.05, 128, 500, 2024).unwrap();
    let frozen = 1.369_459_015_759_829;
    assert!((e.eta - frozen).abs() < 1e-9 * frozen, "{}", e.eta);
    let infimum = (PI / 4.0).cos() * 4.0 / 3.0 * 3f64.powf(0.25);
    assert!(e.eta > infimum && e.eta < 1.15 * infimum);
}

#[test]
fn recomputed_energies_match_solver_records() {
    let (cfg, traj) = small_run(0.01, 1.0, 1.0, 0.05);
    let (e1, e2) = state_energies(&cfg, &traj.final_state).unwrap();
    let rec = traj.records.last().unwrap();
    assert!((e1 - rec.e1).abs() <= 1e-12 * rec.e1);
    assert!((e2 - rec.e2).abs() <= 1e-12 * rec.e2);
}

#[test]
fn sup_energy_and_dissipation_are_nondecreasing() {
    let (_, traj) = small_run(0.01, 2.0, 1.0, 0.05);
    let reports = energy_reports(&traj.records, 0.5, 1.37, traj.boundary_gradient_residual).unwrap();
    for w in reports.windows(2) {
        assert!(w[1].e_sup >= w[0].e_sup && w[1].d >= w[0].d && w[1].y >= w[0].y);
    }
    assert!(reports[0].boundary_gradient_residual.is_some());
    assert!(reports[1..].iter().all(|r| r.boundary_gradient_residual.is_none()));
    assert!(reports
        .iter()
        .all(|r| r.e1.is_finite() && r.e1 >= 0.0 && r.e2 >= 0.0 && r.d >= 0.0));
    let inviscid = energy_reports(&traj.records, 0.0, 1.37, 0.0).unwrap();
    assert!(inviscid.iter().all(|r| r.d == 0.0));
}

#[test]
fn bootstrap_examples() {
    let d = BoxDomain::interval(PI, 8).unwrap();
    let cfg = SolverConfig::new(Arc::clone(&d), KernelSpec::abel(0.5).unwrap(), 0.01, 1.0);
    let zero = ModalField::zeros(&d);
    let traj = Solver::new(cfg, SourceSpec::none()).unwrap().run(&zero, &zero).unwrap();
    let reports = energy_reports(&traj.records, 0.5, 1.37, 0.0).unwrap();
    let b = bootstrap_residual(&reports, 0.0, 1.0, 0.1).unwrap();
    assert!(b.series.iter().all(|&(_, c)| c == 0.0));
    assert!(b.plateau);
    assert_eq!(
        bootstrap_residual(&reports, 0.0, 0.0, 0.1),
        Err(DiagnosticsError::DegenerateDenominator)
    );
    assert_eq!(bootstrap_residual(&[], 1.0, 1.0, 0.1), Err(DiagnosticsError::Empty));
}

#[test]
fn linear_run_has_bootstrap_plateau() {
    let (cfg, traj) = small_run(0.02, 100.0, 0.0, 0.05);
    let reports = energy_reports(&traj.records, cfg.delta, 1.37, 0.0).unwrap();
    let norm = SourceSpec::decaying_mode(&cfg.domain, &[1], 1e-3, 0.5)
        .unwrap()
        .w11_h2_norm(&cfg.domain, 100.0, 2000);
    let b = bootstrap_residual(&reports, norm, traj.datum_h3, 0.1).unwrap();
    assert!(b.plateau, "sup {} vs {}", b.sup, b.sup_at_window_start);
    assert!(b.sup.is_finite() && b.sup > 0.0);
}

fn report(e: f64, d: f64) -> EnergyReport {
    EnergyReport {
        t: 0.0,
        e1: e,
        e2: 0.0,
        d_raw: d,
        d,
        e_sup: e,
        y: e + d,
        linf_psi_t: 0.0,
        h3_psi: 0.0,
        h3_psi_t: 0.0,
        h2_y: 0.0,
        h3_psi_sq_int: 0.0,
        h3_psi_t_sq_int: 0.0,
        picard_iters: 0,
        boundary_gradient_residual: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// The bound checked by direct evaluation: when the condition
    /// holds the reported bound exceeds the smallest fixed point of
    /// `M = c₁ + c₂M^κ`, i.e. `c₁ + c₂B^κ < B`; when it fails no such `B` below
    /// the critical point exists.
    #[test]
    fn strauss_agrees_with_direct_evaluation(lc1 in -6.0f64..1.0, lc2 in -4.0f64..4.0, kappa in 1.05f64..6.0) {
        let (c1, c2) = (10f64.powf(lc1), 10f64.powf(lc2));
        let m_star = (c2 * kappa).powf(-1.0 / (kappa - 1.0));
        let g_min = c1 + c2 * m_star.powf(kappa) - m_star;
        match strauss_bound(c1, c2, kappa) {
            StraussReport::Holds { bound, margin } => {
                prop_assert!(margin > 0.0);
                prop_assert!(g_min < 1e-12 * m_star);
                prop_assert!(c1 + c2 * bound.powf(kappa) <= bound * (1.0 + 1e-12));
            }
            StraussReport::ConditionFails { margin } => {
                prop_assert!(margin <= 0.0);
                prop_assert!(g_min > -1e-12 * m_star);
            }
            StraussReport::Invalid => prop_assert!(false),
        }
    }

    /// `E, D → s²E, s²D`, datum⁴ → s⁴ datum⁴, ‖f̃‖² → s²‖f̃‖²: then
    /// `C*_s = N/(E₀ + f² + s²(datum⁴ + D²))` with unscaled `N, E₀, f, datum, D`.
    #[test]
    fn bootstrap_scaling(e0 in 0.01f64..1.0, e in 0.01f64..1.0, d in 0.0f64..1.0, f in 0.0f64..1.0, h in 0.01f64..1.0, s in prop::sample::select(vec![0.5, 2.0])) {
        let base = [report(e0, 0.0), report(e, d)];
        let scaled = [report(s * s * e0, 0.0), report(s * s * e, s * s * d)];
        let c1 = bootstrap_residual(&base, f, h, 0.1).unwrap().series[1].1;
        let cs = bootstrap_residual(&scaled, s * f, s * h, 0.1).unwrap().series[1].1;
        let predicted = (e + d) / (e0 + f * f + s * s * (h.powi(4) + d * d));
        prop_assert!((c1 - (e + d) / (e0 + f * f + h.powi(4) + d * d)).abs() < 1e-12 * c1);
        prop_assert!((cs - predicted).abs() < 1e-12 * predicted);
    }
}

#[test]
fn strauss_examples() {
    assert!(matches!(strauss_bound(0.1, 1.0, 2.0), StraussReport::Holds { bound, .. } if (bound - 0.2).abs() < 1e-15));
    assert!(matches!(
        strauss_bound(0.3, 1.0, 2.0),
        StraussReport::ConditionFails { .. }
    ));
    assert!(matches!(strauss_bound(0.99, 1e-200, 2.0), StraussReport::Holds { .. }));
}

#[test]
fn dissipation_control_constants() {
    let d = BoxDomain::interval(PI, 8).unwrap();
    let cfg = SolverConfig::new(Arc::clone(&d), KernelSpec::abel(0.5).unwrap(), 0.01, 0.5);
    let zero = ModalField::zeros(&d);
    let traj = Solver::new(cfg, SourceSpec::none()).unwrap().run(&zero, &zero).unwrap();
    let reports = energy_reports(&traj.records, 0.5, 1.37, 0.0).unwrap();
    assert_eq!(dissipation_constants(&reports, 0.0), [0.0; 3]);
    assert!(dissipation_control_check(&reports, &reports, 0.0).passed);

    let (cfg, coarse) = small_run(0.02, 10.0, 0.0, 0.05);
    let (_, fine) = small_run(0.01, 10.0, 0.0, 0.05);
    let rc = energy_reports(&coarse.records, cfg.delta, 1.37, 0.0).unwrap();
    let rf = energy_reports(&fine.records, cfg.delta, 1.37, 0.0).unwrap();
    let check = dissipation_control_check(&rc, &rf, coarse.datum_h3);
    assert!(check.passed, "{:?} {:?}", check.measured, check.failures);
    assert!(check.value("c_inf_psi_fine").unwrap() > 0.0);
}

#[test]
fn energy_inequality_holds_on_smooth_run() {
    let (cfg, traj) = small_run(0.01, 5.0, 1.0, 0.05);
    let e0 = traj.records[0].e1.max(1.0);
    let eta = estimate_eta(&cfg.kernel, 0.05, 128, 500, 2024).unwrap().eta;
    let check = energy_inequality_check(&traj.records, cfg.delta, eta, 1e-4 * e0);
    assert!(check.passed, "{:?}", check.measured);
    assert!(energy_identity_check(&traj.records, 1e-4 * e0).passed);
}
