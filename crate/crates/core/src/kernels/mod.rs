//! Memory kernels for the nonlocal damping term and their admissibility checks.
//!
//! Every kernel except the Dirac limit is a locally integrable, completely
//! monotone function on `(0, ∞)`. The [`Kernel`] trait is what the rest of the
//! crate consumes: point values plus the two local moments over a subinterval
//! that product integration needs.

mod soe;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::check::CheckReport;
use crate::integrate::{integrate, Tolerance};
use crate::quadrature::{self, QuadratureError};
use crate::special::{mittag_leffler, SpecialError};

pub use soe::{soe_fit, SoeApprox, SoeFitOptions};

/// Relative accuracy the numerically integrated moments must certify.
pub const MOMENT_REL_TOL: f64 = 1e-12;

/// Relative finite-difference step used by [`monotonicity_check`].
pub const FD_REL_STEP: f64 = 1e-4;

/// Sign checks accept `value ≥ -SIGN_TOL · scale`.
pub const SIGN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("the Dirac kernel has no pointwise values")]
    DiracNotPointwise,
    #[error("kernel evaluated at t={0}; it is only defined for t > 0")]
    DomainError(f64),
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("moment integral on [{a}, {b}] reached relative error {achieved:.3e}, needed {MOMENT_REL_TOL:e}")]
    MomentQuadratureFailure { a: f64, b: f64, achieved: f64 },
    #[error("sum-of-exponentials fit reached {achieved:.3e} with {terms} terms (tolerance {tol:.1e})")]
    FitFailure { achieved: f64, terms: usize, tol: f64 },
}

/// `∫_a^b K(s) ds` and `∫_a^b (s - a) K(s) ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub zeroth: f64,
    pub first_local: f64,
}

/// A causal convolution kernel usable by the quadrature and check routines.
pub trait Kernel: Send + Sync {
    fn value(&self, t: f64) -> Result<f64, KernelError>;

    /// `γ` such that `K(s) ~ s^{γ-1}` as `s → 0`, when the kernel is singular.
    fn singular_order(&self) -> Option<f64> {
        None
    }

    fn moments(&self, a: f64, b: f64) -> Result<Moments, KernelError> {
        numeric_moments(self, a, b)
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn value(&self, t: f64) -> Result<f64, KernelError> {
        (**self).value(t)
    }
    fn singular_order(&self) -> Option<f64> {
        (**self).singular_order()
    }
    fn moments(&self, a: f64, b: f64) -> Result<Moments, KernelError> {
        (**self).moments(a, b)
    }
}

/// Kernel families with their parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    /// `t^{α-1}/Γ(α)`, `0 < α < 1`.
    Abel { alpha: f64 },
    /// `e^{-βt}`, `β > 0`.
    Exponential { beta: f64 },
    /// `t^{α-1} e^{-βt}/Γ(α)`, `0 < α < 1`, `β > 0`.
    RegularizedAbel { alpha: f64, beta: f64 },
    /// `t^{β-1} E_{α,β}(-t^α)/Γ(1-α)`, `0 < α ≤ β ≤ 1`, `α < 1`.
    MittagLeffler { alpha: f64, beta: f64 },
    /// `(1+t)^{-p}`, `p > 1`.
    Polynomial { p: f64 },
    /// `δ_0`; only the solver understands it.
    Dirac,
}

/// A validated kernel. Construct with [`KernelSpec::new`] or the shorthands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct KernelSpec {
    family: KernelFamily,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Result<Self, KernelError> {
        use KernelFamily::*;
        let bad = |msg: String| Err(KernelError::InvalidParameter(msg));
        let finite = |x: f64| x.is_finite();
        match family {
            Abel { alpha } if !(finite(alpha) && alpha > 0.0 && alpha < 1.0) => {
                return bad(format!("abel alpha must lie in (0,1), got {alpha}"))
            }
            Exponential { beta } if !(finite(beta) && beta > 0.0) => {
                return bad(format!("exponential beta must be positive, got {beta}"))
            }
            RegularizedAbel { alpha, beta }
                if !(finite(alpha) && alpha > 0.0 && alpha < 1.0 && finite(beta) && beta > 0.0) =>
            {
                return bad(format!(
                    "regularized abel needs 0<alpha<1 and beta>0, got alpha={alpha}, beta={beta}"
                ))
            }
            MittagLeffler { alpha, beta }
                if !(finite(alpha) && finite(beta) && alpha > 0.0 && alpha < 1.0 && alpha <= beta && beta <= 1.0) =>
            {
                return bad(format!(
                    "mittag-leffler kernel needs 0<alpha<1 and alpha<=beta<=1, got alpha={alpha}, beta={beta}"
                ))
            }
            Polynomial { p } if !(finite(p) && p > 1.0) => {
                return bad(format!("polynomial exponent must exceed 1, got {p}"))
            }
            _ => {}
        }
        Ok(Self { family })
    }

    pub fn abel(alpha: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Abel { alpha })
    }

    pub fn exponential(beta: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Exponential { beta })
    }

    pub fn regularized_abel(alpha: f64, beta: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::RegularizedAbel { alpha, beta })
    }

    pub fn mittag_leffler(alpha: f64, beta: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::MittagLeffler { alpha, beta })
    }

    pub fn polynomial(p: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Polynomial { p })
    }

    pub fn dirac() -> Self {
        Self {
            family: KernelFamily::Dirac,
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.family, KernelFamily::Dirac)
    }

    /// Short label used in reports, e.g. `abel(alpha=0.5)`.
    pub fn label(&self) -> String {
        use KernelFamily::*;
        match self.family {
            Abel { alpha } => format!("abel(alpha={alpha})"),
            Exponential { beta } => format!("exponential(beta={beta})"),
            RegularizedAbel { alpha, beta } => {
                format!("regularized_abel(alpha={alpha},beta={beta})")
            }
            MittagLeffler { alpha, beta } => format!("mittag_leffler(alpha={alpha},beta={beta})"),
            Polynomial { p } => format!("polynomial(p={p})"),
            Dirac => "dirac".to_string(),
        }
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let family = KernelFamily::deserialize(deserializer)?;
        KernelSpec::new(family).map_err(serde::de::Error::custom)
    }
}

/// Point value `K(t)` of a (non-Dirac) kernel.
pub fn evaluate(kernel: &KernelSpec, t: f64) -> Result<f64, KernelError> {
    kernel.value(t)
}

impl Kernel for KernelSpec {
    fn value(&self, t: f64) -> Result<f64, KernelError> {
        use KernelFamily::*;
        if self.is_dirac() {
            return Err(KernelError::DiracNotPointwise);
        }
        if !(t > 0.0) {
            return Err(KernelError::DomainError(t));
        }
        Ok(match self.family {
            Abel { alpha } => t.powf(alpha - 1.0) / gamma(alpha),
            Exponential { beta } => (-beta * t).exp(),
            RegularizedAbel { alpha, beta } => t.powf(alpha - 1.0) * (-beta * t).exp() / gamma(alpha),
            MittagLeffler { alpha, beta } => {
                t.powf(beta - 1.0) * mittag_leffler(alpha, beta, -t.powf(alpha))? / gamma(1.0 - alpha)
            }
            Polynomial { p } => (1.0 + t).powf(-p),
            Dirac => unreachable!(),
        })
    }

    fn singular_order(&self) -> Option<f64> {
        use KernelFamily::*;
        match self.family {
            Abel { alpha } | RegularizedAbel { alpha, .. } => Some(alpha),
            MittagLeffler { beta, .. } if beta < 1.0 => Some(beta),
            _ => None,
        }
    }

    fn moments(&self, a: f64, b: f64) -> Result<Moments, KernelError> {
        use KernelFamily::*;
        if self.is_dirac() {
            return Err(KernelError::DiracNotPointwise);
        }
        if !(a >= 0.0 && b > a) {
            return Err(KernelError::DomainError(a));
        }
        match self.family {
            Abel { alpha } => {
                let g = gamma(alpha);
                let h = b - a;
                let (zeroth, first_local) = if a == 0.0 {
                    (h.powf(alpha) / alpha, h.powf(alpha + 1.0) / (alpha + 1.0))
                } else {
                    power_moments(a, alpha - 1.0, h)
                };
                Ok(Moments {
                    zeroth: zeroth / g,
                    first_local: first_local / g,
                })
            }
            Exponential { beta } => {
                let h = b - a;
                let x = beta * h;
                let ea = (-beta * a).exp();
                // ∫_0^h e^{-β(a+u)} du and ∫_0^h u e^{-β(a+u)} du in stable form
                let zeroth = ea * h * phi1(x);
                let first_local = ea * h * h * phi2(x);
                Ok(Moments { zeroth, first_local })
            }
            Polynomial { p } => {
                let (zeroth, first_local) = power_moments(1.0 + a, -p, b - a);
                Ok(Moments { zeroth, first_local })
            }
            RegularizedAbel { .. } | MittagLeffler { .. } => numeric_moments(self, a, b),
            Dirac => unreachable!(),
        }
    }
}

/// `∫_0^h (c+u)^e du` and `∫_0^h u (c+u)^e du` for `c > 0`.
///
/// Far from the origin (`h ≤ c/4`) the binomial series in `h/c` avoids the
/// cancellation between the two endpoint antiderivatives.
fn power_moments(c: f64, e: f64, h: f64) -> (f64, f64) {
    let r = h / c;
    let ce = c.powf(e);
    if r <= 0.25 {
        let mut coef = 1.0;
        let mut rk = 1.0;
        let (mut m0, mut m1) = (0.0, 0.0);
        for k in 0..60 {
            let t0 = coef * rk / (k as f64 + 1.0);
            let t1 = coef * rk / (k as f64 + 2.0);
            m0 += t0;
            m1 += t1;
            if t0.abs() < 1e-17 * m0.abs() {
                break;
            }
            coef *= (e - k as f64) / (k as f64 + 1.0);
            rk *= r;
        }
        (ce * h * m0, ce * h * h * m1)
    } else {
        let l = r.ln_1p();
        let lift = |q: f64| if q == 0.0 { l } else { (q * l).exp_m1() / q };
        let m0 = c * ce * lift(e + 1.0);
        // u (c+u)^e = (c+u)^{e+1} - c (c+u)^e
        let m1 = c * c * ce * (lift(e + 2.0) - lift(e + 1.0));
        (m0, m1)
    }
}

/// `(1 - e^{-x})/x`
pub(crate) fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - e^{-x}(1+x))/x² = ∫_0^1 u e^{-xu} du`
pub(crate) fn phi2(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Σ (-x)^k / (k! (k+2))
        let mut term = 1.0;
        let mut sum = 0.5;
        for k in 1..20 {
            term *= -x / k as f64;
            sum += term / (k as f64 + 2.0);
        }
        sum
    } else {
        (-(-x).exp_m1() - x * (-x).exp()) / (x * x)
    }
}

/// Moments by adaptive Gauss–Kronrod. A singular left endpoint at zero is
/// absorbed by the substitution `s = b u^{1/γ}`, which turns `s^{γ-1} ds` into
/// `(b^γ/γ) du`.
pub fn numeric_moments<K: Kernel + ?Sized>(kernel: &K, a: f64, b: f64) -> Result<Moments, KernelError> {
    let tol = Tolerance {
        abs_tol: 0.0,
        rel_tol: 0.1 * MOMENT_REL_TOL,
        max_intervals: 4000,
    };
    let fail = |achieved: f64| KernelError::MomentQuadratureFailure { a, b, achieved };
    let evaluate = |s: f64| kernel.value(s).unwrap_or(f64::NAN);

    let (zeroth, first_local) = match kernel.singular_order() {
        Some(gam) if a == 0.0 && gam < 1.0 => {
            let pre = b.powf(gam) / gam;
            let smooth = |u: f64| {
                let s = b * u.powf(1.0 / gam);
                if s <= 0.0 {
                    return (0.0, 0.0);
                }
                let g = evaluate(s) * s.powf(1.0 - gam);
                (g, g * s)
            };
            let z = integrate(|u| smooth(u).0, 0.0, 1.0, tol).map_err(|e| fail(e.achieved / e.value.abs()))?;
            let f = integrate(|u| smooth(u).1, 0.0, 1.0, tol).map_err(|e| fail(e.achieved / e.value.abs()))?;
            (pre * z, pre * f)
        }
        _ => {
            let z = integrate(evaluate, a, b, tol).map_err(|e| fail(e.achieved / e.value.abs()))?;
            let f = integrate(|s| (s - a) * evaluate(s), a, b, tol).map_err(|e| fail(e.achieved / e.value.abs()))?;
            (z, f)
        }
    };
    if !(zeroth.is_finite() && first_local.is_finite()) {
        return Err(fail(f64::INFINITY));
    }
    Ok(Moments { zeroth, first_local })
}

/// Finite-difference sign check of `(-1)^n K^{(n)}(t) ≥ 0`, `n = 0, 1, 2`.
///
/// Central differences with step `rel_step · t`; each value is compared with
/// `-SIGN_TOL · |K(t)| / t^n`. The report also records whether `K'` was
/// visibly nonzero somewhere on the grid.
pub fn monotonicity_check<K: Kernel + ?Sized>(
    kernel: &K,
    grid: &[f64],
    rel_step: f64,
) -> Result<CheckReport, KernelError> {
    let mut report = CheckReport::new("kernel_monotonicity", SIGN_TOL);
    report.measure("rel_step", rel_step);
    let mut worst = [f64::INFINITY; 3];
    let mut violations = [0usize; 3];
    let mut span = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    let mut max_slope: f64 = 0.0;
    let mut prev = 0.0;
    for &t in grid {
        if !(t > 0.0) {
            return Err(KernelError::DomainError(t));
        }
        if t <= prev {
            return Err(KernelError::InvalidParameter(format!(
                "grid must be strictly increasing (at t={t})"
            )));
        }
        prev = t;
        let h = (rel_step * t).clamp(f64::MIN_POSITIVE, 0.5 * t);
        let k0 = kernel.value(t)?;
        let km = kernel.value(t - h)?;
        let kp = kernel.value(t + h)?;
        let values = [k0, -(kp - km) / (2.0 * h), (kp - 2.0 * k0 + km) / (h * h)];
        for (n, &v) in values.iter().enumerate() {
            let scale = k0.abs().max(km.abs()).max(kp.abs()) / t.powi(n as i32);
            let normalized = if scale > 0.0 { v / scale } else { 0.0 };
            worst[n] = worst[n].min(normalized);
            if v < -SIGN_TOL * scale || !v.is_finite() {
                violations[n] += 1;
                span[n] = (span[n].0.min(t), span[n].1.max(t));
                report.fail(format!("n={n}: (-1)^n K^(n)({t:.6e}) = {v:.6e}"));
            }
        }
        let slope_scale = k0.abs() / t;
        if slope_scale > 0.0 {
            max_slope = max_slope.max(values[1].abs() / slope_scale);
        }
    }
    for n in 0..3 {
        report.measure(format!("min_normalized_n{n}"), worst[n]);
        report.measure(format!("violations_n{n}"), violations[n] as f64);
        if violations[n] > 0 {
            report.measure(format!("first_violation_t_n{n}"), span[n].0);
            report.measure(format!("last_violation_t_n{n}"), span[n].1);
        }
    }
    report.measure("max_normalized_slope", max_slope);
    if max_slope <= 1e3 * SIGN_TOL {
        report.fail("K_t vanishes on the whole grid".to_string());
    }
    Ok(report)
}

/// The two discrete quadratic forms `Σ_n (K⋆y)(t_n) y(t_n) Δt` for the kernel
/// and for `e^{-t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityForms {
    pub q_kernel: f64,
    pub q_exp: f64,
}

impl PositivityForms {
    /// Whether `Q_K ≥ η Q_exp` holds for the given constant.
    pub fn holds(&self, eta: f64) -> bool {
        self.q_kernel >= eta * self.q_exp
    }
}

pub fn strong_positivity_form<K: Kernel + ?Sized>(
    kernel: &K,
    y: &[f64],
    dt: f64,
) -> Result<PositivityForms, QuadratureError> {
    if y.is_empty() {
        return Ok(PositivityForms {
            q_kernel: 0.0,
            q_exp: 0.0,
        });
    }
    let n = y.len() - 1;
    let reference = KernelSpec::exponential(1.0).expect("unit exponential is valid");
    let wk = quadrature::build_weights(kernel, dt, n.max(1))?;
    let we = quadrature::build_weights(&reference, dt, n.max(1))?;
    Ok(PositivityForms {
        q_kernel: quadrature::quadratic_form(&wk, y)?,
        q_exp: quadrature::quadratic_form(&we, y)?,
    })
}
