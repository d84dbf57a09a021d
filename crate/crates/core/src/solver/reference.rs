//! Independent high-accuracy oracles for single linear modes.

use thiserror::Error;

use super::{SolverConfig, SolverError, SourceSpec};
use crate::kernels::{KernelFamily, SoeApprox};
use crate::quadrature::{SoeRecursion, SoeState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t={t}")]
    TooManySteps { t: f64 },
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince integration of `y' = f(t, y)`, returning the state
/// at each of the increasing `outputs` (which must be `≥ t0`).
pub fn dopri5<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Vec<f64>>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = outputs
        .iter()
        .find(|&&o| o > t0)
        .map_or(1e-3, |&o| ((o - t0) * 0.01).max(1e-6));
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut result = Vec::with_capacity(outputs.len());
    let mut budget = 10_000_000usize;

    for &target in outputs {
        while t < target {
            budget = budget.checked_sub(1).ok_or(OdeError::TooManySteps { t })?;
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            f(t, &y, &mut k[0]);
            for s in 1..7 {
                for i in 0..n {
                    stage[i] = y[i] + step * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                f(t + C[s] * step, &stage, &mut k[s]);
            }
            let mut err: f64 = 0.0;
            for i in 0..n {
                let hi = (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>();
                let lo = (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
                y5[i] = y[i] + step * hi;
                let sc = atol + rtol * y[i].abs().max(y5[i].abs());
                err = err.max((step * (hi - lo) / sc).abs());
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y.copy_from_slice(&y5);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !(last && err <= 1.0) {
                h = step * factor;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t });
            }
        }
        result.push(y.clone());
    }
    Ok(result)
}

/// Reference trajectory of one mode, sampled on the solver grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_t: Vec<f64>,
    pub psi_tt: Vec<f64>,
    /// `z = ψ + τψ_t`.
    pub z: Vec<f64>,
}

/// Solve the linear modal ODE
///
/// ```text
/// τw' = −w − c²λψ − τc²λv − δλ (K⋆(τw + v)) + f_k,   ψ' = v, v' = w
/// ```
///
/// with DOPRI5. An exponential kernel `e^{-βt}` is realised by one extra
/// variable `q' = −βq + (τw + v)`.
pub fn mode_ode_reference(
    config: &SolverConfig,
    k: &[usize],
    psi0: f64,
    psi2: f64,
    source: &SourceSpec,
    t_final: f64,
    tol: f64,
) -> Result<ModeTrajectory, SolverError> {
    if config.sigma != 0.0 {
        return Err(SolverError::UnsupportedKernel);
    }
    let memory = match (config.delta == 0.0, config.kernel.family()) {
        (true, _) => Memory::Off,
        (false, KernelFamily::Dirac) => Memory::Dirac,
        (false, KernelFamily::Exponential { beta }) => Memory::Exp(beta),
        _ => return Err(SolverError::UnsupportedKernel),
    };
    let domain = &config.domain;
    let flat = domain
        .flat_index(k)
        .ok_or_else(|| SolverError::Config(format!("mode {k:?} outside the basis")))?;
    let lambda = domain.eigenvalues()[flat];
    let (tau, c2, delta) = (config.tau, config.c * config.c, config.delta);
    let mut buf = vec![0.0; domain.len()];

    let rhs = |t: f64, u: &[f64], du: &mut [f64]| {
        let (psi, v, w) = (u[0], u[1], u[2]);
        let y = tau * w + v;
        let conv = match memory {
            Memory::Off => 0.0,
            Memory::Dirac => y,
            Memory::Exp(_) => u[3],
        };
        source.f_into(t, &mut buf);
        du[0] = v;
        du[1] = w;
        du[2] = (-w - c2 * lambda * psi - tau * c2 * lambda * v - delta * lambda * conv + buf[flat]) / tau;
        if let Memory::Exp(beta) = memory {
            du[3] = -beta * u[3] + y;
        }
    };
    let mut u0 = vec![psi0, -psi0 / tau, psi2];
    if matches!(memory, Memory::Exp(_)) {
        u0.push(0.0);
    }
    let steps = (t_final / config.dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=steps).map(|n| n as f64 * config.dt).collect();
    let states = dopri5(rhs, 0.0, &u0, &times, tol, tol * 1e-3)?;
    let mut out = ModeTrajectory {
        t: times,
        psi: Vec::with_capacity(steps + 1),
        psi_t: Vec::with_capacity(steps + 1),
        psi_tt: Vec::with_capacity(steps + 1),
        z: Vec::with_capacity(steps + 1),
    };
    for s in states {
        out.psi.push(s[0]);
        out.psi_t.push(s[1]);
        out.psi_tt.push(s[2]);
        out.z.push(s[0] + tau * s[1]);
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Memory {
    Off,
    Dirac,
    Exp(f64),
}

/// `ψ(t_n) = (1/τ)(e^{-·/τ}⋆z)(t_n) + e^{-t_n/τ}ψ₀` from samples of `z` on a
/// uniform grid, integrating the exponential exactly against the linear
/// interpolant of `z`.
pub fn psi_from_z(z: &[f64], dt: f64, tau: f64, psi0: f64) -> Vec<f64> {
    let approx = SoeApprox {
        weights: vec![1.0],
        rates: vec![1.0 / tau],
        certificate: 0.0,
        t_min: dt,
        horizon: dt * z.len().max(2) as f64,
    };
    let rec = SoeRecursion::new(&approx, dt);
    let mut state = SoeState::new(&rec);
    z.iter()
        .enumerate()
        .map(|(n, &zn)| state.push(&rec, zn) / tau + (-(n as f64) * dt / tau).exp() * psi0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dopri_matches_exponential() {
        let out = dopri5(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], &[0.5, 1.0, 3.0], 1e-12, 1e-14).unwrap();
        for (o, t) in out.iter().zip([0.5f64, 1.0, 3.0]) {
            assert!((o[0] - (-t).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn homogeneous_and_step_response() {
        let dt = 0.01;
        let psi = psi_from_z(&vec![0.0; 101], dt, 2.0, 1.0);
        for (n, p) in psi.iter().enumerate() {
            assert!((p - (-(n as f64) * dt / 2.0).exp()).abs() < 1e-14);
        }
        let psi = psi_from_z(&vec![1.0; 101], dt, 1.0, 0.0);
        for (n, p) in psi.iter().enumerate() {
            assert!((p - (1.0 - (-(n as f64) * dt).exp())).abs() < 1e-14);
        }
    }
}
