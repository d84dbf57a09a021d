//! Gamma-function helpers and the two-parameter Mittag-Leffler function.
//!
//! `E_{α,β}(z) = Σ_k z^k / Γ(αk + β)` is evaluated on the real line by one of
//! three routes:
//!
//! * the power series, whenever its absolute-term sum stays small enough that
//!   cancellation cannot eat the requested accuracy (always for `z ≥ 0`);
//! * the optimally truncated asymptotic expansion `-Σ_{k≥1} z^{-k}/Γ(β-αk)`
//!   for large negative `z`, when its smallest term certifies the tolerance;
//! * for `0 < α < 1` and `z < 0`, the real integral representation
//!   `E_{α,β}(z) = ∫_0^∞ K(α,β,r,z) dr` (valid for `β < 1+α`; larger `β` are
//!   brought into range with `E_{α,β} = (E_{α,β-α} - 1/Γ(β-α)) / z`).

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};
use thiserror::Error;

use crate::integrate::{integrate_with_breaks, Tolerance};

/// Target relative accuracy of [`mittag_leffler`].
pub const ML_REL_TOL: f64 = 1e-12;

/// Hard cap on series terms before the series route gives up.
pub const ML_MAX_SERIES_TERMS: usize = 2000;

/// Below this `|z|` the power series is always tried first.
pub const ML_SERIES_RADIUS: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("Mittag-Leffler parameters must be positive (alpha={alpha}, beta={beta})")]
    Domain { alpha: f64, beta: f64 },
    #[error("Mittag-Leffler evaluation at z={z} (alpha={alpha}, beta={beta}) did not reach tolerance; best estimate error {achieved:.3e}")]
    ConvergenceFailure {
        alpha: f64,
        beta: f64,
        z: f64,
        achieved: f64,
    },
}

/// `1/Γ(x)`, zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else if x == x.floor() && x <= 20.0 {
        // exact 1/(n-1)!; the Lanczos value is off by an ulp at small integers
        1.0 / (1..x as u64).map(|k| k as f64).product::<f64>()
    } else {
        1.0 / gamma(x)
    }
}

pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

/// Evaluate `E_{α,β}(z)` to relative accuracy [`ML_REL_TOL`].
pub fn mittag_leffler(alpha: f64, beta: f64, z: f64) -> Result<f64, SpecialError> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(SpecialError::Domain { alpha, beta });
    }
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    if alpha == 1.0 && beta == 1.0 {
        return Ok(z.exp());
    }

    let series = if z > 0.0 || z.abs() <= ML_SERIES_RADIUS || alpha >= 1.0 {
        match series(alpha, beta, z) {
            Ok(v) => return Ok(v),
            Err(e) => Some(e),
        }
    } else {
        None
    };

    if z < 0.0 {
        if let Some(v) = asymptotic_negative(alpha, beta, z) {
            return Ok(v);
        }
        if alpha < 1.0 {
            return integral_negative(alpha, beta, z);
        }
    }
    Err(series.unwrap_or(SpecialError::ConvergenceFailure {
        alpha,
        beta,
        z,
        achieved: f64::INFINITY,
    }))
}

fn series(alpha: f64, beta: f64, z: f64) -> Result<f64, SpecialError> {
    let ln_abs_z = z.abs().ln();
    let negative = z < 0.0;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut abs_sum = 0.0;
    let mut small_run = 0;
    for k in 0..ML_MAX_SERIES_TERMS {
        let arg = alpha * k as f64 + beta;
        let term_abs = (k as f64 * ln_abs_z - ln_gamma(arg)).exp();
        let term = if negative && k % 2 == 1 { -term_abs } else { term_abs };
        // Kahan summation keeps the rounding floor at ~eps * abs_sum.
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        abs_sum += term_abs;

        // Only stop once past the peak of the terms (Γ growth dominates).
        let past_peak = alpha * (arg.max(1.0)).ln() > ln_abs_z;
        if past_peak && term_abs <= 0.25 * f64::EPSILON * sum.abs() {
            small_run += 1;
            if small_run >= 3 {
                let rounding = 4.0 * f64::EPSILON * abs_sum;
                if rounding <= ML_REL_TOL * sum.abs() {
                    return Ok(sum);
                }
                return Err(SpecialError::ConvergenceFailure {
                    alpha,
                    beta,
                    z,
                    achieved: rounding / sum.abs(),
                });
            }
        } else {
            small_run = 0;
        }
        if !abs_sum.is_finite() {
            break;
        }
    }
    Err(SpecialError::ConvergenceFailure {
        alpha,
        beta,
        z,
        achieved: f64::INFINITY,
    })
}

/// `-Σ_{k=1}^{K} z^{-k}/Γ(β-αk)`, truncated before the smallest term.
/// Only trusted for `0 < α < 1` where no exponential contribution exists on
/// the negative axis.
fn asymptotic_negative(alpha: f64, beta: f64, z: f64) -> Option<f64> {
    if alpha >= 1.0 {
        return None;
    }
    let mut sum: f64 = 0.0;
    let mut prev_abs = f64::INFINITY;
    let mut zpow = 1.0;
    for k in 1..200 {
        zpow /= z;
        let term = -zpow * rgamma(beta - alpha * k as f64);
        let term_abs = term.abs();
        if term_abs > prev_abs && prev_abs.is_finite() && prev_abs > 0.0 {
            // divergence sets in: the last accepted term bounds the error
            break;
        }
        if term_abs == 0.0 {
            // pole of Γ: this power vanishes identically
            continue;
        }
        if term_abs <= ML_REL_TOL * 0.1 * sum.abs() && sum != 0.0 {
            return Some(sum + term);
        }
        sum += term;
        prev_abs = term_abs;
    }
    None
}

fn integral_negative(alpha: f64, beta: f64, z: f64) -> Result<f64, SpecialError> {
    if beta >= 1.0 + alpha {
        let lower = integral_negative(alpha, beta - alpha, z)?;
        return Ok((lower - rgamma(beta - alpha)) / z);
    }
    let x = -z;
    let expo = (1.0 - beta) / alpha;
    let s1 = (PI * (1.0 - beta)).sin();
    let s2 = (PI * (1.0 - beta + alpha)).sin();
    let cos_pa = (PI * alpha).cos();
    let scale = 1.0 / (alpha * PI);
    // r^expo R(r) with R smooth except for exp(-r^{1/α})
    let rational =
        move |r: f64| (-r.powf(1.0 / alpha)).exp() * (r * s1 + x * s2) / (r * r + 2.0 * r * x * cos_pa + x * x);
    // Beyond r_max the integrand is below e^{-60} relative to its scale.
    let r_max = 60f64.powf(alpha).max(2.0 * x);

    let tol = Tolerance {
        abs_tol: 0.0,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    // [0, 1]: substitute r = u^{1/(expo+1)} to absorb the algebraic factor.
    let p = expo + 1.0;
    let head = integrate_with_breaks(
        |u: f64| {
            let r = u.powf(1.0 / p);
            rational(r) / p
        },
        &[0.0, 1.0],
        tol,
    );
    let mut breaks = vec![1.0];
    if x > 1.0 && x < r_max {
        breaks.push(x);
    }
    breaks.push(r_max);
    let tail = integrate_with_breaks(|r: f64| r.powf(expo) * rational(r), &breaks, tol);
    match (head, tail) {
        (Ok(h), Ok(t)) => Ok(scale * (h + t)),
        (h, t) => {
            let achieved = h.err().map_or(0.0, |e| e.achieved) + t.err().map_or(0.0, |e| e.achieved);
            Err(SpecialError::ConvergenceFailure {
                alpha,
                beta,
                z,
                achieved,
            })
        }
    }
}
