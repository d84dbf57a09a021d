//! Closed-form single-mode solutions of the linear problem.
//!
//! With `ψ = φ(t) v_k`, `φ = Σ a_i e^{-r_i t}` and an exponential (or Dirac)
//! kernel, every term of the equation is again a sum of exponentials, so the
//! forcing that makes `φ` exact is available in closed form.

use std::sync::Arc;

use super::{ExpSum, SolverConfig, SolverError, SourceAmplitude, SourceSpec};
use crate::kernels::KernelFamily;
use crate::spectral::ModalField;

#[derive(Debug, Clone)]
pub struct ManufacturedMode {
    pub k: Vec<usize>,
    /// `φ(t)`.
    pub amplitude: ExpSum,
    /// Forcing with `f̃` the decaying antiderivative of `f`.
    pub source: SourceSpec,
    /// `f(t)` as a sum of exponentials.
    pub forcing: ExpSum,
    pub psi0: ModalField,
    pub psi2: ModalField,
    tau: f64,
}

impl ManufacturedMode {
    pub fn psi(&self, t: f64) -> f64 {
        self.amplitude.value(t)
    }

    pub fn psi_t(&self, t: f64) -> f64 {
        self.amplitude.derivative(t)
    }

    pub fn psi_tt(&self, t: f64) -> f64 {
        self.amplitude
            .terms
            .iter()
            .map(|(a, r)| a * r * r * (-r * t).exp())
            .sum()
    }

    /// `ψ + τψ_t`.
    pub fn z(&self, t: f64) -> f64 {
        self.psi(t) + self.tau * self.psi_t(t)
    }

    /// `τψ_tt + ψ_t`.
    pub fn y(&self, t: f64) -> f64 {
        self.tau * self.psi_tt(t) + self.psi_t(t)
    }
}

/// Forcing that makes `φ(t) v_k` an exact solution of the linear (`σ = 0`)
/// problem under `config`. The initial data are `ψ₀ = φ(0) v_k` and
/// `ψ₂ = φ''(0) v_k`; `φ'(0) = −φ(0)/τ` is required.
pub fn exponential_mode_solution(
    config: &SolverConfig,
    k: &[usize],
    amplitude: ExpSum,
) -> Result<ManufacturedMode, SolverError> {
    if config.sigma != 0.0 {
        return Err(SolverError::UnsupportedKernel);
    }
    let (tau, c2, delta) = (config.tau, config.c * config.c, config.delta);
    let beta = match (delta == 0.0, config.kernel.family()) {
        (true, _) | (false, KernelFamily::Dirac) => None,
        (false, KernelFamily::Exponential { beta }) => Some(beta),
        _ => return Err(SolverError::UnsupportedKernel),
    };
    let domain = &config.domain;
    let flat = domain
        .flat_index(k)
        .ok_or_else(|| SolverError::Config(format!("mode {k:?} outside the basis")))?;
    let lambda = domain.eigenvalues()[flat];

    let phi0 = amplitude.value(0.0);
    let phi1 = amplitude.derivative(0.0);
    if (tau * phi1 + phi0).abs() > 1e-12 * (1.0 + phi0.abs()) {
        return Err(SolverError::Config(format!(
            "manufactured amplitude violates psi_1 = -psi_0/tau: {phi1} vs {}",
            -phi0 / tau
        )));
    }

    let mut terms = Vec::with_capacity(amplitude.terms.len() + 1);
    let mut beta_coeff = 0.0;
    for &(a, r) in &amplitude.terms {
        if !(r > 0.0) {
            return Err(SolverError::Config(format!(
                "manufactured rates must be positive, got {r}"
            )));
        }
        // τφ''' + φ'' + c²λφ + τc²λφ' on a e^{-rt}
        let mut coeff = a * (-tau * r * r * r + r * r + c2 * lambda - tau * c2 * lambda * r);
        // Y = τφ'' + φ' on a e^{-rt}
        let b = a * (tau * r * r - r);
        match beta {
            None => coeff += delta * lambda * b,
            Some(beta) => {
                if (beta - r).abs() < 1e-12 * beta {
                    return Err(SolverError::Config(
                        "manufactured rate coincides with the kernel rate".into(),
                    ));
                }
                // e^{-β·} ⋆ e^{-r·} = (e^{-rt} − e^{-βt})/(β − r)
                let m = b / (beta - r);
                coeff += delta * lambda * m;
                beta_coeff -= delta * lambda * m;
            }
        }
        terms.push((coeff, r));
    }
    if let Some(beta) = beta {
        if beta_coeff != 0.0 {
            terms.push((beta_coeff, beta));
        }
    }
    let forcing = ExpSum { terms };
    let f_tilde = ExpSum {
        terms: forcing.terms.iter().map(|&(c, r)| (-c / r, r)).collect(),
    };
    let profile = ModalField::single_mode(domain, k, 1.0)?;
    let source = SourceSpec::none().with_term(&profile, Arc::new(f_tilde));
    let psi2 = amplitude.terms.iter().map(|(a, r)| a * r * r).sum::<f64>();
    Ok(ManufacturedMode {
        k: k.to_vec(),
        psi0: profile.scaled(phi0),
        psi2: profile.scaled(psi2),
        amplitude,
        source,
        forcing,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::spectral::BoxDomain;
    use std::f64::consts::PI;

    #[test]
    fn forcing_satisfies_the_mode_equation() {
        // check against finite differences and a direct quadrature of the memory term
        let domain = BoxDomain::interval(PI, 4).unwrap();
        let mut cfg = SolverConfig::new(domain, KernelSpec::exponential(0.7).unwrap(), 0.01, 1.0);
        cfg.sigma = 0.0;
        cfg.tau = 2.0;
        cfg.delta = 0.3;
        let phi = ExpSum {
            terms: vec![(1.5, 1.0), (-0.5, 2.0)],
        };
        let m = exponential_mode_solution(&cfg, &[2], phi).unwrap();
        let (lambda, tau, delta) = (4.0, 2.0, 0.3);
        let t = 1.3;
        let h = 1e-3;
        let psi_ttt = (m.psi_tt(t + h) - m.psi_tt(t - h)) / (2.0 * h);
        let n = 20_000;
        let ds = t / n as f64;
        let conv: f64 = (0..=n)
            .map(|i| {
                let s = i as f64 * ds;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (-0.7 * (t - s)).exp() * m.y(s)
            })
            .sum::<f64>()
            * ds;
        let lhs = tau * psi_ttt + m.psi_tt(t) + lambda * m.psi(t) + tau * lambda * m.psi_t(t) + delta * lambda * conv;
        assert!(
            (lhs - m.forcing.value(t)).abs() < 1e-6,
            "{lhs} vs {}",
            m.forcing.value(t)
        );
        assert_eq!(m.z(0.0), 0.0);
    }

    #[test]
    fn rejects_incompatible_data() {
        let domain = BoxDomain::interval(PI, 4).unwrap();
        let mut cfg = SolverConfig::new(domain, KernelSpec::dirac(), 0.01, 1.0);
        cfg.sigma = 0.0;
        assert!(exponential_mode_solution(&cfg, &[1], ExpSum::single(1.0, 2.0)).is_err());
        assert!(exponential_mode_solution(&cfg, &[1], ExpSum::single(1.0, 1.0)).is_ok());
    }
}
