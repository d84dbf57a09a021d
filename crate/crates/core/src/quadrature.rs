//! Discrete Laplace convolution `(K⋆g)(t_n) = ∫_0^{t_n} K(s) g(t_n - s) ds` on
//! a uniform grid.
//!
//! `g` is replaced by its piecewise-linear interpolant and the kernel is
//! integrated exactly against each hat function, so
//!
//! ```text
//! (K⋆g)_n = Σ_{m=0}^{n-1} A_m g_{n-m} + B_m g_{n-1-m},
//! A_m = (1/h)∫_{t_m}^{t_{m+1}} K(s)(t_{m+1} - s) ds,
//! B_m = (1/h)∫_{t_m}^{t_{m+1}} K(s)(s - t_m) ds.
//! ```
//!
//! The fast path keeps the first interval exact and replaces the kernel on
//! `[h, ∞)` by a sum of exponentials, each of which obeys a one-step
//! recursion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::check::CheckReport;
use crate::kernels::{phi1, phi2, Kernel, KernelError, SoeApprox};

/// Discrete positivity passes if `min Q ≥ -POSITIVITY_TOL · scale`.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("history of {got} samples does not fit weights built for {max} steps")]
    IndexError { got: usize, max: usize },
    #[error("invalid step size {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionWeights {
    pub dt: f64,
    pub steps: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ConvolutionWeights {
    /// `∫_0^{t_n} K`, which is what the weights reproduce for `g ≡ 1`.
    pub fn kernel_mass(&self, n: usize) -> f64 {
        self.a[..n].iter().zip(&self.b[..n]).map(|(a, b)| a + b).sum()
    }
}

pub fn build_weights<K: Kernel + ?Sized>(
    kernel: &K,
    dt: f64,
    steps: usize,
) -> Result<ConvolutionWeights, QuadratureError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(QuadratureError::InvalidStep(dt));
    }
    let steps = steps.max(1);
    let mut a = Vec::with_capacity(steps);
    let mut b = Vec::with_capacity(steps);
    for m in 0..steps {
        let lo = m as f64 * dt;
        let hi = (m + 1) as f64 * dt;
        let moments = kernel.moments(lo, hi)?;
        let bm = moments.first_local / dt;
        a.push(moments.zeroth - bm);
        b.push(bm);
    }
    Ok(ConvolutionWeights { dt, steps, a, b })
}

/// Discrete `(K⋆g)(t_n)` for `history = [g_0, …, g_n]`.
pub fn convolve_at(weights: &ConvolutionWeights, history: &[f64]) -> Result<f64, QuadratureError> {
    let Some(n) = history.len().checked_sub(1) else {
        return Ok(0.0);
    };
    if n > weights.steps {
        return Err(QuadratureError::IndexError {
            got: history.len(),
            max: weights.steps,
        });
    }
    let mut sum = 0.0;
    for m in 0..n {
        sum += weights.a[m] * history[n - m] + weights.b[m] * history[n - 1 - m];
    }
    Ok(sum)
}

/// Everything in `(K⋆g)_{n+1}` except `A_0 g_{n+1}`, given `history = [g_0, …, g_n]`.
///
/// Implicit steppers add the newest sample's weight on their own.
pub fn tail(weights: &ConvolutionWeights, history: &[f64]) -> Result<f64, QuadratureError> {
    let Some(n) = history.len().checked_sub(1) else {
        return Ok(0.0);
    };
    if n + 1 > weights.steps {
        return Err(QuadratureError::IndexError {
            got: history.len() + 1,
            max: weights.steps,
        });
    }
    let mut sum = weights.b[0] * history[n];
    for m in 1..=n {
        sum += weights.a[m] * history[n + 1 - m] + weights.b[m] * history[n - m];
    }
    Ok(sum)
}

/// `(K⋆g)_n` for every `n = 0..=g.len()-1`. Quadratic cost.
pub fn convolve_all(weights: &ConvolutionWeights, g: &[f64]) -> Result<Vec<f64>, QuadratureError> {
    (0..g.len()).map(|n| convolve_at(weights, &g[..=n])).collect()
}

/// `Σ_{n≥1} (K⋆y)_n y_n Δt`.
pub fn quadratic_form(weights: &ConvolutionWeights, y: &[f64]) -> Result<f64, QuadratureError> {
    let conv = convolve_all(weights, y)?;
    Ok(conv.iter().zip(y).skip(1).map(|(c, y)| c * y).sum::<f64>() * weights.dt)
}

/// Precomputed one-step coefficients for a sum-of-exponentials history.
///
/// With `x_j = λ_j h` the exponential convolution of a linear segment is
/// `a_j g_new + b_j g_prev`, `b_j = h φ₂(x_j)`, `a_j = h φ₁(x_j) − b_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoeRecursion {
    pub dt: f64,
    weights: Vec<f64>,
    decay: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    /// Weights of `g_n` and `g_{n-1}` over the newest interval `[0, h]`.
    pub local: (f64, f64),
}

impl SoeRecursion {
    /// Pure SoE: the kernel is replaced by the exponentials everywhere.
    pub fn new(approx: &SoeApprox, dt: f64) -> Self {
        let mut rec = Self::build(approx, dt, (0.0, 0.0));
        let a0 = rec.weights.iter().zip(&rec.a).map(|(w, a)| w * a).sum();
        let b0 = rec.weights.iter().zip(&rec.b).map(|(w, b)| w * b).sum();
        rec.local = (a0, b0);
        rec
    }

    /// Exact product integration on `[0, h]`, exponentials on `[h, t_n]`.
    pub fn hybrid<K: Kernel + ?Sized>(approx: &SoeApprox, kernel: &K, dt: f64) -> Result<Self, QuadratureError> {
        let first = kernel.moments(0.0, dt)?;
        let b0 = first.first_local / dt;
        Ok(Self::build(approx, dt, (first.zeroth - b0, b0)))
    }

    fn build(approx: &SoeApprox, dt: f64, local: (f64, f64)) -> Self {
        let n = approx.len();
        let mut rec = Self {
            dt,
            weights: approx.weights.clone(),
            decay: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            local,
        };
        for &lambda in &approx.rates {
            let x = lambda * dt;
            let b = dt * phi2(x);
            rec.decay.push((-x).exp());
            rec.a.push(dt * phi1(x) - b);
            rec.b.push(b);
        }
        rec
    }

    pub fn terms(&self) -> usize {
        self.weights.len()
    }
}

/// Auxiliary accumulators `q_j`, one per exponential, for one scalar channel.
///
/// Before step `n` they hold `e^{-λ_j h} ∫_0^{t_{n-1}} e^{-λ_j u} g(t_{n-1}-u) du`,
/// the contribution of `[h, t_n]` to `(K⋆g)_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoeState {
    pub q: Vec<f64>,
    last: Option<f64>,
}

impl SoeState {
    pub fn new(recursion: &SoeRecursion) -> Self {
        Self {
            q: vec![0.0; recursion.terms()],
            last: None,
        }
    }

    /// `Σ w_j q_j`: the far-history part of the next convolution value.
    pub fn history_value(&self, recursion: &SoeRecursion) -> f64 {
        recursion.weights.iter().zip(&self.q).map(|(w, q)| w * q).sum()
    }

    /// Fold the segment `[g_prev, g_new]` into the accumulators.
    pub fn advance(&mut self, recursion: &SoeRecursion, g_prev: f64, g_new: f64) {
        for j in 0..self.q.len() {
            self.q[j] = recursion.decay[j] * (self.q[j] + recursion.a[j] * g_new + recursion.b[j] * g_prev);
        }
        self.last = Some(g_new);
    }

    /// Feed the next sample and return `(K⋆g)` at its time. The first sample
    /// only primes the cache (`(K⋆g)(0) = 0`).
    pub fn push(&mut self, recursion: &SoeRecursion, g: f64) -> f64 {
        match self.last {
            None => {
                self.last = Some(g);
                0.0
            }
            Some(prev) => soe_step(self, recursion, prev, g),
        }
    }

    pub fn last_sample(&self) -> Option<f64> {
        self.last
    }
}

/// One step of the recursion: returns `(K⋆g)_n` from `g_{n-1}`, `g_n`, then
/// advances the state to step `n + 1`.
pub fn soe_step(state: &mut SoeState, recursion: &SoeRecursion, g_prev: f64, g_new: f64) -> f64 {
    let value = recursion.local.0 * g_new + recursion.local.1 * g_prev + state.history_value(recursion);
    state.advance(recursion, g_prev, g_new);
    value
}

/// Random-signal check of `Σ (K⋆y)_n y_n Δt ≥ 0`.
///
/// Signals start at `y_0 = 0`: the piecewise-linear form is not semidefinite
/// in the first sample, whose row contributes nothing while its column does.
/// Half the trials are ±1 sequences, half uniform on `[-1, 1]`.
pub fn discrete_positivity_check(weights: &ConvolutionWeights, trials: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = weights.steps;
    let mass = weights.kernel_mass(n);
    let mut report = CheckReport::new("discrete_positivity", POSITIVITY_TOL);
    let mut min_q = f64::INFINITY;
    let mut min_normalized = f64::INFINITY;
    let mut y = vec![0.0; n + 1];
    for trial in 0..trials.max(1) {
        for v in y.iter_mut().skip(1) {
            *v = if trial % 2 == 0 {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.random_range(-1.0..=1.0)
            };
        }
        let q = quadratic_form(weights, &y).expect("signal length matches weights");
        let scale = mass * y.iter().map(|v| v * v).sum::<f64>() * weights.dt;
        let normalized = if scale > 0.0 { q / scale } else { 0.0 };
        min_q = min_q.min(q);
        min_normalized = min_normalized.min(normalized);
        if normalized < -POSITIVITY_TOL {
            report.fail(format!("trial {trial}: Q = {q:.6e} (scale {scale:.3e})"));
        }
    }
    report.measure("min_q", min_q);
    report.measure("min_q_over_scale", min_normalized);
    report.measure("trials", trials.max(1) as f64);
    report
}
