//! Sum-of-exponentials approximation `K(t) ≈ Σ w_j e^{-λ_j t}` on `[t_min, T]`.
//!
//! Completely monotone kernels are Laplace transforms of positive measures, so
//! a nonnegative combination of decaying exponentials can approximate them
//! uniformly in relative error. Candidate rates sit on a geometric ladder and
//! the weights come from a row-scaled nonnegative least-squares fit; the
//! ladder is refined until the validation grid certifies the tolerance.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Kernel, KernelError, KernelFamily, KernelSpec};
use crate::nnls::nnls;

#[derive(Debug, Clone, Copy)]
pub struct SoeFitOptions {
    pub max_terms: usize,
    pub validation_points: usize,
    /// Candidate rates per decade on successive refinement passes.
    pub densities: &'static [usize],
}

impl Default for SoeFitOptions {
    fn default() -> Self {
        Self {
            max_terms: 64,
            validation_points: 10_000,
            densities: &[3, 4, 6, 8, 12, 16],
        }
    }
}

/// Fitted exponentials together with the error certificate measured on the
/// validation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoeApprox {
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
    /// Max relative error over the validation grid.
    pub certificate: f64,
    pub t_min: f64,
    pub horizon: f64,
}

impl SoeApprox {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn value(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.rates)
            .map(|(w, l)| w * (-l * t).exp())
            .sum()
    }

    /// Max relative error against `kernel` on `points` geometric nodes.
    pub fn validate<K: Kernel + ?Sized>(&self, kernel: &K, points: usize) -> Result<f64, KernelError> {
        let mut worst: f64 = 0.0;
        for t in geometric_grid(self.t_min, self.horizon, points) {
            let k = kernel.value(t)?;
            worst = worst.max((self.value(t) - k).abs() / k.abs());
        }
        Ok(worst)
    }
}

fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let ratio = (b / a).ln();
    (0..n).map(|i| a * (ratio * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn soe_fit(kernel: &KernelSpec, horizon: f64, t_min: f64, tol: f64) -> Result<SoeApprox, KernelError> {
    soe_fit_with(kernel, horizon, t_min, tol, &SoeFitOptions::default())
}

pub fn soe_fit_with(
    kernel: &KernelSpec,
    horizon: f64,
    t_min: f64,
    tol: f64,
    options: &SoeFitOptions,
) -> Result<SoeApprox, KernelError> {
    if !(t_min > 0.0 && horizon > t_min) {
        return Err(KernelError::InvalidParameter(format!(
            "soe fit needs 0 < t_min < T, got t_min={t_min}, T={horizon}"
        )));
    }
    if !(tol > 0.0) {
        return Err(KernelError::InvalidParameter(format!(
            "soe tolerance must be positive, got {tol}"
        )));
    }
    match kernel.family() {
        KernelFamily::Dirac => Err(KernelError::DiracNotPointwise),
        KernelFamily::Exponential { beta } => Ok(SoeApprox {
            weights: vec![1.0],
            rates: vec![beta],
            certificate: 0.0,
            t_min,
            horizon,
        }),
        KernelFamily::RegularizedAbel { alpha, beta } => {
            // e^{-βt} multiplies every term, so relative error carries over
            let abel = KernelSpec::abel(alpha)?;
            let mut fit = soe_fit_with(&abel, horizon, t_min, tol, options)?;
            for rate in &mut fit.rates {
                *rate += beta;
            }
            fit.certificate = fit.validate(kernel, options.validation_points)?;
            if fit.certificate > tol {
                return Err(KernelError::FitFailure {
                    achieved: fit.certificate,
                    terms: fit.len(),
                    tol,
                });
            }
            Ok(fit)
        }
        _ => nnls_fit(kernel, horizon, t_min, tol, options),
    }
}

fn nnls_fit(
    kernel: &KernelSpec,
    horizon: f64,
    t_min: f64,
    tol: f64,
    options: &SoeFitOptions,
) -> Result<SoeApprox, KernelError> {
    let validation = geometric_grid(t_min, horizon, options.validation_points);
    let reference: Vec<f64> = validation.iter().map(|&t| kernel.value(t)).collect::<Result<_, _>>()?;

    let lambda_lo = 1e-6 / horizon;
    let lambda_hi = 50.0 / t_min;
    let decades = (lambda_hi / lambda_lo).log10();
    let mut best: Option<(f64, usize)> = None;

    for &density in options.densities {
        let n_cand = (decades * density as f64).ceil() as usize + 1;
        let rates = geometric_grid(lambda_lo, lambda_hi, n_cand);
        let nodes = geometric_grid(t_min, horizon, 4 * n_cand);

        let mut a = DMatrix::zeros(nodes.len(), rates.len());
        for (i, &t) in nodes.iter().enumerate() {
            let scale = 1.0 / kernel.value(t)?;
            for (j, &l) in rates.iter().enumerate() {
                a[(i, j)] = scale * (-l * t).exp();
            }
        }

        // Lawson reweighting: rows with large relative error gain weight,
        // which drives the least-squares solution toward the minimax one.
        let mut row_weight = vec![1.0; nodes.len()];
        let mut fit: Option<SoeApprox> = None;
        for _ in 0..LAWSON_PASSES {
            let x = weighted_nnls(&a, &row_weight);
            let mut candidate = to_approx(&x, &rates, t_min, horizon);
            candidate.certificate = validation
                .iter()
                .zip(&reference)
                .map(|(&t, &k)| (candidate.value(t) - k).abs() / k)
                .fold(0.0, f64::max);
            let done = candidate.certificate <= tol;
            if fit.as_ref().is_none_or(|f| candidate.certificate < f.certificate) {
                fit = Some(candidate);
            }
            if done {
                break;
            }
            let errors = (&a * &x).map(|v| (v - 1.0).abs());
            let total: f64 = row_weight.iter().zip(errors.iter()).map(|(w, e)| w * e).sum();
            if !(total > 0.0) {
                break;
            }
            for (w, e) in row_weight.iter_mut().zip(errors.iter()) {
                *w = (*w * e / total).max(1e-12);
            }
        }
        let fit = fit.expect("at least one pass");

        if best.is_none_or(|(err, _)| fit.certificate < err) {
            best = Some((fit.certificate, fit.len()));
        }
        if fit.certificate <= tol && fit.len() <= options.max_terms {
            return Ok(fit);
        }
    }
    let (achieved, terms) = best.unwrap_or((f64::INFINITY, 0));
    Err(KernelError::FitFailure { achieved, terms, tol })
}

/// Reweighting passes per candidate ladder.
const LAWSON_PASSES: usize = 8;

/// NNLS on `diag(√ω) A` with unit-norm columns; returns unscaled coefficients.
fn weighted_nnls(a: &DMatrix<f64>, row_weight: &[f64]) -> DVector<f64> {
    let mut scaled = a.clone();
    for (i, w) in row_weight.iter().enumerate() {
        scaled.row_mut(i).scale_mut(w.sqrt());
    }
    let b = DVector::from_iterator(row_weight.len(), row_weight.iter().map(|w| w.sqrt()));
    let norms: Vec<f64> = scaled.column_iter().map(|c| c.norm()).collect();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*n);
    }
    let mut x = nnls(&scaled, &b, 20 * norms.len());
    for (j, n) in norms.iter().enumerate() {
        x[j] /= n;
    }
    x
}

fn to_approx(x: &DVector<f64>, rates: &[f64], t_min: f64, horizon: f64) -> SoeApprox {
    let (weights, rates) = x
        .iter()
        .zip(rates)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, l)| (*w, *l))
        .unzip();
    SoeApprox {
        weights,
        rates,
        certificate: f64::INFINITY,
        t_min,
        horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_is_exact() {
        let fit = soe_fit(&KernelSpec::exponential(3.0).unwrap(), 10.0, 1e-3, 1e-6).unwrap();
        assert_eq!(fit.weights, vec![1.0]);
        assert_eq!(fit.rates, vec![3.0]);
        assert_eq!(fit.certificate, 0.0);
    }

    #[test]
    fn dirac_is_rejected() {
        assert_eq!(
            soe_fit(&KernelSpec::dirac(), 10.0, 1e-3, 1e-6),
            Err(KernelError::DiracNotPointwise)
        );
    }

    #[test]
    fn impossible_tolerance_reports_failure() {
        let options = SoeFitOptions {
            max_terms: 64,
            validation_points: 500,
            densities: &[2],
        };
        let err = soe_fit_with(&KernelSpec::abel(0.5).unwrap(), 10.0, 1e-3, 1e-14, &options).unwrap_err();
        match err {
            KernelError::FitFailure { achieved, terms, .. } => {
                assert!(achieved > 1e-14 && terms > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn regularized_abel_shifts_rates() {
        let k = KernelSpec::regularized_abel(0.5, 2.0).unwrap();
        let fit = soe_fit(&k, 5.0, 1e-2, 1e-6).unwrap();
        assert!(fit.rates.iter().all(|&l| l > 2.0));
        assert!(fit.validate(&k, 2000).unwrap() <= 1e-6);
    }

    #[test]
    fn abel_half_fits_with_few_terms() {
        let k = KernelSpec::abel(0.5).unwrap();
        let fit = soe_fit(&k, 10.0, 1e-3, 1e-6).unwrap();
        assert!(fit.len() <= 40, "{} terms", fit.len());
        assert!(fit.certificate <= 1e-6);
        assert!(fit.weights.iter().all(|&w| w > 0.0));
        assert!(fit.rates.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn polynomial_weights_are_nonnegative() {
        let k = KernelSpec::polynomial(2.0).unwrap();
        let fit = soe_fit(&k, 10.0, 1e-3, 1e-6).unwrap();
        assert!(fit.weights.iter().all(|&w| w >= 0.0));
        assert!(fit.validate(&k, 10_000).unwrap() <= 1e-6);
    }

    #[test]
    fn mittag_leffler_kernel_fits() {
        let k = KernelSpec::mittag_leffler(0.5, 0.8).unwrap();
        let fit = soe_fit(&k, 10.0, 1e-2, 1e-6).unwrap();
        assert!(fit.certificate <= 1e-6);
    }
}
