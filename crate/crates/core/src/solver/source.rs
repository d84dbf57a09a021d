//! Sources `f = ∂_t f̃` given as finite modal expansions with scalar amplitudes.

use std::fmt::Debug;
use std::sync::Arc;

use crate::spectral::{seminorm_sq, BoxDomain, ModalField, SpectralError};

/// Time profile `a(t)` of one source term; `f̃ ∝ a`, `f ∝ a'`.
pub trait SourceAmplitude: Send + Sync + Debug {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

/// `a(t) = Σ c_i e^{-r_i t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    pub terms: Vec<(f64, f64)>,
}

impl ExpSum {
    pub fn single(coeff: f64, rate: f64) -> Self {
        Self {
            terms: vec![(coeff, rate)],
        }
    }
}

impl SourceAmplitude for ExpSum {
    fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|(c, r)| c * (-r * t).exp()).sum()
    }

    fn derivative(&self, t: f64) -> f64 {
        self.terms.iter().map(|(c, r)| -r * c * (-r * t).exp()).sum()
    }
}

#[derive(Debug, Clone)]
struct SourceTerm {
    profile: Vec<f64>,
    amplitude: Arc<dyn SourceAmplitude>,
}

#[derive(Debug, Clone, Default)]
pub struct SourceSpec {
    terms: Vec<SourceTerm>,
}

impl SourceSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_term(mut self, profile: &ModalField, amplitude: Arc<dyn SourceAmplitude>) -> Self {
        self.terms.push(SourceTerm {
            profile: profile.coeffs().to_vec(),
            amplitude,
        });
        self
    }

    /// `f̃ = A e^{-rt} v_k`.
    pub fn decaying_mode(
        domain: &Arc<BoxDomain>,
        k: &[usize],
        amplitude: f64,
        rate: f64,
    ) -> Result<Self, SpectralError> {
        let profile = ModalField::single_mode(domain, k, 1.0)?;
        Ok(Self::none().with_term(&profile, Arc::new(ExpSum::single(amplitude, rate))))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn check_len(&self, len: usize) -> Result<(), SpectralError> {
        match self.terms.iter().find(|t| t.profile.len() != len) {
            Some(t) => Err(SpectralError::ShapeMismatch {
                expected: len,
                got: t.profile.len(),
            }),
            None => Ok(()),
        }
    }

    fn combine(&self, out: &mut [f64], scalar: impl Fn(&dyn SourceAmplitude) -> f64) {
        out.fill(0.0);
        for term in &self.terms {
            let a = scalar(term.amplitude.as_ref());
            for (o, p) in out.iter_mut().zip(&term.profile) {
                *o += a * p;
            }
        }
    }

    /// Modal coefficients of `f̃(t)`.
    pub fn f_tilde_into(&self, t: f64, out: &mut [f64]) {
        self.combine(out, |a| a.value(t));
    }

    /// Modal coefficients of `f(t)`.
    pub fn f_into(&self, t: f64, out: &mut [f64]) {
        self.combine(out, |a| a.derivative(t));
    }

    /// `∫_0^T ‖Δf̃‖ + ‖Δf‖ dt` by the trapezoid rule with `steps` panels.
    pub fn w11_h2_norm(&self, domain: &BoxDomain, horizon: f64, steps: usize) -> f64 {
        if self.is_zero() || !(horizon > 0.0) {
            return 0.0;
        }
        let steps = steps.max(1);
        let h = horizon / steps as f64;
        let mut buf = vec![0.0; domain.len()];
        let mut total = 0.0;
        for i in 0..=steps {
            let t = i as f64 * h;
            self.f_tilde_into(t, &mut buf);
            let mut v = seminorm_sq(domain, &buf, 2).sqrt();
            self.f_into(t, &mut buf);
            v += seminorm_sq(domain, &buf, 2).sqrt();
            total += if i == 0 || i == steps { 0.5 * v } else { v };
        }
        total * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn decaying_mode_values_and_norm() {
        let d = BoxDomain::interval(PI, 4).unwrap();
        let s = SourceSpec::decaying_mode(&d, &[2], 3.0, 0.5).unwrap();
        let mut buf = vec![0.0; 4];
        s.f_tilde_into(2.0, &mut buf);
        assert!((buf[1] - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
        s.f_into(0.0, &mut buf);
        assert_eq!(buf[1], -1.5);
        // ‖Δv_2‖ = 4 (π/2)^{1/2}; ∫ A e^{-rt}(1 + r) dt = A (1 + r)/r over [0, ∞)
        let exact = 4.0 * (PI / 2.0).sqrt() * 3.0 * (1.0 + 0.5) / 0.5;
        let numeric = s.w11_h2_norm(&d, 80.0, 80_000);
        assert!((numeric - exact).abs() < 1e-6 * exact);
    }
}
