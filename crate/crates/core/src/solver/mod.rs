//! Time stepping of the modal JMGT system
//!
//! ```text
//! τψ_ttt + ψ_tt − c²Δψ − τc²Δψ_t − δ K⋆Δ(τψ_tt + ψ_t) = 2σ∇ψ·∇ψ_t + f.
//! ```
//!
//! Each sine mode carries `ψ`, `Z = ψ + τψ_t` and `Y = Z_t = ψ_t + τψ_tt`:
//!
//! ```text
//! ψ' = (Z − ψ)/τ,   Z' = Y,   Y' = −c²λZ − δλ K⋆Y + N + f.
//! ```
//!
//! This is the `(ψ, ψ_t, ψ_tt)` system in different coordinates; the
//! trapezoidal rule commutes with that affine change, so the scheme is the
//! Crank–Nicolson scheme on `(ψ, v, w)`. Working with `Z` makes `Z(0) = 0`
//! exact instead of up to rounding. The newest history weight and the linear
//! terms are implicit; the gradient nonlinearity `N = 2σ∇ψ·∇ψ_t` is resolved
//! by Picard iteration.

mod manufactured;
mod reference;
mod source;

use std::sync::Arc;

use thiserror::Error;

use crate::kernels::{soe_fit, KernelError, KernelSpec};
use crate::quadrature::{build_weights, ConvolutionWeights, QuadratureError, SoeRecursion, SoeState};
use crate::spectral::{elliptic_solve, gradient_dot, laplacian, BoxDomain, ModalField, SpectralError};

pub use manufactured::{exponential_mode_solution, ManufacturedMode};
pub use reference::{dopri5, mode_ode_reference, psi_from_z, ModeTrajectory, OdeError};
pub use source::{ExpSum, SourceAmplitude, SourceSpec};

/// Default Picard tolerance, relative to `1 + ‖state‖`.
pub const PICARD_TOL: f64 = 1e-10;
pub const PICARD_MAX_ITER: usize = 50;

/// `‖ψ_t‖_∞` beyond this multiple of its initial value flags blow-up.
pub const BLOWUP_FACTOR: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("Picard iteration failed at t={t} (residual {residual:.3e} after {iterations} iterations)")]
    PicardDivergence { t: f64, residual: f64, iterations: usize },
    #[error("non-finite coefficients at t={t}")]
    NonFinite { t: f64 },
    #[error("the reference integrator supports only sigma = 0 with dirac or exponential kernels")]
    UnsupportedKernel,
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistoryBackend {
    /// Full product-integration history, `O(n)` per step.
    Exact,
    /// Exact newest interval plus a sum-of-exponentials tail fitted to `tol`.
    Soe { tol: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub tau: f64,
    pub c: f64,
    pub delta: f64,
    pub sigma: f64,
    pub kernel: KernelSpec,
    pub dt: f64,
    pub t_final: f64,
    pub domain: Arc<BoxDomain>,
    pub history: HistoryBackend,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub dealias: bool,
    /// Accumulate the memory and source terms of the energy identities.
    /// Costs a second history channel.
    pub track_identity: bool,
}

impl SolverConfig {
    /// Defaults for everything but the physics, kernel, grid and horizon.
    pub fn new(domain: Arc<BoxDomain>, kernel: KernelSpec, dt: f64, t_final: f64) -> Self {
        Self {
            tau: 1.0,
            c: 1.0,
            delta: 0.5,
            sigma: 1.0,
            kernel,
            dt,
            t_final,
            domain,
            history: HistoryBackend::Exact,
            picard_tol: PICARD_TOL,
            picard_max_iter: PICARD_MAX_ITER,
            dealias: true,
            track_identity: true,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be nonnegative, got {}", self.delta));
        }
        if !self.sigma.is_finite() {
            return bad(format!("sigma must be finite, got {}", self.sigma));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be nonnegative, got {}", self.t_final));
        }
        if !(self.picard_tol > 0.0) || self.picard_max_iter == 0 {
            return bad("picard tolerance and iteration cap must be positive".into());
        }
        if let HistoryBackend::Soe { tol } = self.history {
            if self.kernel.is_dirac() {
                return bad("the dirac kernel needs the exact history backend".into());
            }
            if !(tol > 0.0 && tol < 1.0) {
                return bad(format!("soe tolerance must lie in (0, 1), got {tol}"));
            }
        }
        Ok(())
    }

    /// Number of steps to reach `t_final`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt + 1e-9).floor() as usize
    }
}

/// How the memory term is evaluated for a run.
#[derive(Debug, Clone)]
enum Memory {
    Off,
    Dirac,
    Exact(ConvolutionWeights),
    Soe(SoeRecursion),
}

/// Memory channel storage for one convolved quantity, all modes at once.
#[derive(Debug, Clone)]
enum Channel {
    Off,
    /// Samples `g_0, …, g_n`, time-major.
    Exact(Vec<f64>),
    Soe(Vec<SoeState>),
}

/// Trapezoid-accumulated time integrals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Integrals {
    /// `∫ ‖∇Δ(ψ + τψ_t)‖²`.
    pub d_raw: f64,
    /// `∫ ‖∇Δψ‖²`.
    pub h3_psi_sq: f64,
    /// `∫ ‖∇Δψ_t‖²`.
    pub h3_psi_t_sq: f64,
    /// `∫ ⟨K⋆∇ΔY, ∇ΔY⟩`.
    pub q1: f64,
    /// `∫ ⟨K⋆∇ΔZ, ∇ΔZ⟩`.
    pub q2: f64,
    /// `∫ ⟨Δ(N + f), ΔY⟩`.
    pub r1: f64,
    /// `∫ ⟨Δ(σ|∇ψ|² + f̃), ΔZ⟩`.
    pub r2: f64,
}

impl Integrals {
    fn fields(&mut self) -> [&mut f64; 7] {
        [
            &mut self.d_raw,
            &mut self.h3_psi_sq,
            &mut self.h3_psi_t_sq,
            &mut self.q1,
            &mut self.q2,
            &mut self.r1,
            &mut self.r2,
        ]
    }

    /// Values in declaration order.
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.d_raw,
            self.h3_psi_sq,
            self.h3_psi_t_sq,
            self.q1,
            self.q2,
            self.r1,
            self.r2,
        ]
    }
}

/// Scalar quantities recorded after every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    pub integrals: Integrals,
    /// `E₁ + E₂ + δ(Q₁ + Q₂) − E₁(0) − E₂(0) − R₁ − R₂`; zero when not tracked.
    pub identity_residual: f64,
    pub linf_psi_t: f64,
    /// `‖∇Δψ‖`.
    pub h3_psi: f64,
    /// `‖∇Δψ_t‖`.
    pub h3_psi_t: f64,
    /// `‖∇Δz‖`, `z = τψ_t + ψ`.
    pub h3_z: f64,
    /// `‖Δ(τψ_tt + ψ_t)‖`.
    pub h2_y: f64,
    pub picard_iters: usize,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    n: usize,
    t: f64,
    psi: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    xi: Vec<f64>,
    /// `Y'` at the current time, reused by the next trapezoidal step.
    g_rhs: Vec<f64>,
    /// Nonlinearity at the current time.
    nonlinear: Vec<f64>,
    hist_y: Channel,
    hist_z: Channel,
    integrals: Integrals,
    /// Integrands at the current time, same order as [`Integrals`].
    integrands: [f64; 7],
    e0: (f64, f64),
    record: StepRecord,
}

impl SolverState {
    pub fn step_index(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn field(&self, domain: &Arc<BoxDomain>, coeffs: Vec<f64>) -> ModalField {
        ModalField::from_coeffs(domain, coeffs).expect("state length matches domain")
    }

    pub fn psi(&self, domain: &Arc<BoxDomain>) -> ModalField {
        self.field(domain, self.psi.clone())
    }

    /// `z = ψ + τψ_t`.
    pub fn z(&self, domain: &Arc<BoxDomain>) -> ModalField {
        self.field(domain, self.z.clone())
    }

    /// `τψ_tt + ψ_t`.
    pub fn y(&self, domain: &Arc<BoxDomain>) -> ModalField {
        self.field(domain, self.y.clone())
    }

    pub fn xi(&self, domain: &Arc<BoxDomain>) -> ModalField {
        self.field(domain, self.xi.clone())
    }

    /// `ψ_t = (z − ψ)/τ`.
    pub fn psi_t(&self, domain: &Arc<BoxDomain>, tau: f64) -> ModalField {
        self.field(
            domain,
            self.z.iter().zip(&self.psi).map(|(z, p)| (z - p) / tau).collect(),
        )
    }

    /// `ψ_tt = (y − ψ_t)/τ`.
    pub fn psi_tt(&self, domain: &Arc<BoxDomain>, tau: f64) -> ModalField {
        self.field(
            domain,
            self.y
                .iter()
                .zip(self.z.iter().zip(&self.psi))
                .map(|(y, (z, p))| (y - (z - p) / tau) / tau)
                .collect(),
        )
    }

    pub fn integrals(&self) -> Integrals {
        self.integrals
    }

    pub fn record(&self) -> &StepRecord {
        &self.record
    }

    /// `E₁(0)` and `E₂(0)`.
    pub fn initial_energies(&self) -> (f64, f64) {
        self.e0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    NonFinite { t: f64 },
    PicardDivergence { t: f64 },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::NonFinite { .. } => "non_finite",
            Termination::PicardDivergence { .. } => "picard_divergence",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One record per step, starting with the initial state.
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    pub final_state: SolverState,
    /// First time `‖ψ_t‖_∞` exceeded [`BLOWUP_FACTOR`] times its initial value.
    pub blowup_time: Option<f64>,
    /// `‖∇Δψ₀‖`.
    pub datum_h3: f64,
    /// Largest `|∇ψ₀|` on the boundary grid.
    pub boundary_gradient_residual: f64,
}

/// Configured stepper: the immutable part of a simulation.
#[derive(Debug, Clone)]
pub struct Solver {
    config: SolverConfig,
    source: SourceSpec,
    memory: Memory,
    steps: usize,
}

impl Solver {
    pub fn new(config: SolverConfig, source: SourceSpec) -> Result<Self, SolverError> {
        config.validate()?;
        source.check_len(config.domain.len())?;
        let steps = config.steps();
        let memory = if config.delta == 0.0 {
            Memory::Off
        } else if config.kernel.is_dirac() {
            Memory::Dirac
        } else {
            match config.history {
                HistoryBackend::Exact => Memory::Exact(build_weights(&config.kernel, config.dt, steps.max(1))?),
                HistoryBackend::Soe { tol } => {
                    let horizon = config.t_final.max(2.0 * config.dt);
                    let approx = soe_fit(&config.kernel, horizon, config.dt, tol)?;
                    Memory::Soe(SoeRecursion::hybrid(&approx, &config.kernel, config.dt)?)
                }
            }
        };
        Ok(Self {
            config,
            source,
            memory,
            steps,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn source(&self) -> &SourceSpec {
        &self.source
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn domain(&self) -> &Arc<BoxDomain> {
        &self.config.domain
    }

    fn new_channel(&self) -> Channel {
        match &self.memory {
            Memory::Off | Memory::Dirac => Channel::Off,
            Memory::Exact(_) => Channel::Exact(Vec::new()),
            Memory::Soe(rec) => Channel::Soe(vec![SoeState::new(rec); self.domain().len()]),
        }
    }

    /// Weight of the newest sample in the convolution.
    fn newest_weight(&self) -> f64 {
        match &self.memory {
            Memory::Off => 0.0,
            Memory::Dirac => 1.0,
            Memory::Exact(w) => w.a[0],
            Memory::Soe(rec) => rec.local.0,
        }
    }

    /// Convolution at step `n + 1` minus the newest-sample term, given the
    /// channel after step `n`.
    fn history_tail(&self, channel: &Channel, n: usize, out: &mut [f64]) {
        let modes = out.len();
        out.fill(0.0);
        match (&self.memory, channel) {
            (Memory::Exact(w), Channel::Exact(g)) => {
                let at = |step: usize| &g[step * modes..(step + 1) * modes];
                for (o, v) in out.iter_mut().zip(at(n)) {
                    *o = w.b[0] * v;
                }
                for m in 1..=n {
                    let (a, b) = (w.a[m], w.b[m]);
                    for ((o, x), y) in out.iter_mut().zip(at(n + 1 - m)).zip(at(n - m)) {
                        *o += a * x + b * y;
                    }
                }
            }
            (Memory::Soe(rec), Channel::Soe(states)) => {
                for (o, s) in out.iter_mut().zip(states) {
                    let last = s.last_sample().unwrap_or(0.0);
                    *o = rec.local.1 * last + s.history_value(rec);
                }
            }
            _ => {}
        }
    }

    fn push_channel(&self, channel: &mut Channel, samples: &[f64]) {
        match (&self.memory, channel) {
            (Memory::Exact(_), Channel::Exact(g)) => g.extend_from_slice(samples),
            (Memory::Soe(rec), Channel::Soe(states)) => {
                for (s, &v) in states.iter_mut().zip(samples) {
                    match s.last_sample() {
                        None => {
                            s.push(rec, v);
                        }
                        Some(prev) => s.advance(rec, prev, v),
                    }
                }
            }
            _ => {}
        }
    }

    /// Full convolution of a channel at the newest sample `newest`.
    fn convolution(&self, channel: &Channel, n_prev: Option<usize>, newest: &[f64], out: &mut [f64]) {
        match &self.memory {
            Memory::Off => out.fill(0.0),
            Memory::Dirac => out.copy_from_slice(newest),
            _ => {
                match n_prev {
                    // (K⋆g)(0) = 0
                    None => out.fill(0.0),
                    Some(n) => {
                        self.history_tail(channel, n, out);
                        let a0 = self.newest_weight();
                        for (o, v) in out.iter_mut().zip(newest) {
                            *o += a0 * v;
                        }
                    }
                }
            }
        }
    }

    /// Set up `v₀ = −ψ₀/τ`, `w₀ = ψ₂`, `ξ₀` and zero history.
    pub fn initialize(&self, psi0: &ModalField, psi2: &ModalField) -> Result<SolverState, SolverError> {
        let domain = self.domain();
        let reference = ModalField::zeros(domain);
        reference.same_domain(psi0)?;
        reference.same_domain(psi2)?;
        let cfg = &self.config;
        let tau = cfg.tau;
        let c2 = cfg.c * cfg.c;
        let k = domain.len();

        let psi1 = psi0.scaled(-1.0 / tau);
        let psi = psi0.coeffs().to_vec();
        let z = vec![0.0; k];
        let y: Vec<f64> = psi1
            .coeffs()
            .iter()
            .zip(psi2.coeffs())
            .map(|(v, w)| v + tau * w)
            .collect();

        // -c²Δξ₀ = σ|∇ψ₀|² − τψ₂ − ψ₁ + τc²Δψ₀ + f̃(0)
        let mut ft0 = vec![0.0; k];
        self.source.f_tilde_into(0.0, &mut ft0);
        let quad = gradient_dot(psi0, psi0, 0.5 * cfg.sigma, cfg.dealias)?;
        let lap = laplacian(psi0);
        let rhs: Vec<f64> = (0..k)
            .map(|i| quad.coeffs()[i] - tau * psi2.coeffs()[i] - psi1.coeffs()[i] + tau * c2 * lap.coeffs()[i] + ft0[i])
            .collect();
        let xi = elliptic_solve(&ModalField::from_coeffs(domain, rhs)?, c2).into_coeffs();

        let nonlinear = gradient_dot(psi0, &psi1, cfg.sigma, cfg.dealias)?.into_coeffs();

        let mut state = SolverState {
            n: 0,
            t: 0.0,
            psi,
            z,
            y,
            xi,
            g_rhs: vec![0.0; k],
            nonlinear,
            hist_y: self.new_channel(),
            hist_z: self.new_channel(),
            integrals: Integrals::default(),
            integrands: [0.0; 7],
            e0: (0.0, 0.0),
            record: blank_record(),
        };
        let lambda = domain.eigenvalues();
        let g0: Vec<f64> = state.y.iter().zip(lambda).map(|(y, l)| -l * y).collect();
        let mut conv_y = vec![0.0; k];
        self.convolution(&state.hist_y, None, &g0, &mut conv_y);
        let mut conv_z = vec![0.0; k];
        if cfg.track_identity {
            self.convolution(&state.hist_z, None, &state.z, &mut conv_z);
        }
        let mut f0 = vec![0.0; k];
        self.source.f_into(0.0, &mut f0);
        for i in 0..k {
            state.g_rhs[i] = -c2 * lambda[i] * state.z[i] + cfg.delta * conv_y[i] + state.nonlinear[i] + f0[i];
        }
        self.push_channel(&mut state.hist_y, &g0);
        if cfg.track_identity {
            let z0 = state.z.clone();
            self.push_channel(&mut state.hist_z, &z0);
        }
        state.integrands = self.integrands(&state, &conv_y, &conv_z, &f0, &ft0)?;
        state.record = self.make_record(&state, 0)?;
        state.e0 = (state.record.e1, state.record.e2);
        state.record.identity_residual = 0.0;
        Ok(state)
    }

    /// Integrands of [`Integrals`] at the state's current time.
    fn integrands(
        &self,
        state: &SolverState,
        conv_y: &[f64],
        conv_z: &[f64],
        f: &[f64],
        f_tilde: &[f64],
    ) -> Result<[f64; 7], SolverError> {
        let domain = self.domain();
        let cfg = &self.config;
        let lambda = domain.eigenvalues();
        let w = domain.mode_norm_sq();
        let tau = cfg.tau;
        let mut out = [0.0; 7];
        let quad = if cfg.track_identity && cfg.sigma != 0.0 {
            Some(gradient_dot(&state.psi(domain), &state.psi(domain), 0.5 * cfg.sigma, cfg.dealias)?.into_coeffs())
        } else {
            None
        };
        for (i, &l) in lambda.iter().enumerate() {
            let l2 = l * l;
            let l3 = l2 * l;
            let v = (state.z[i] - state.psi[i]) / tau;
            out[0] += l3 * state.z[i] * state.z[i];
            out[1] += l3 * state.psi[i] * state.psi[i];
            out[2] += l3 * v * v;
            if cfg.track_identity {
                // conv_y is K⋆(−λY)
                out[3] += -l2 * conv_y[i] * state.y[i];
                out[4] += l3 * conv_z[i] * state.z[i];
                out[5] += l2 * (state.nonlinear[i] + f[i]) * state.y[i];
                let p = quad.as_ref().map_or(0.0, |q| q[i]);
                out[6] += l2 * (p + f_tilde[i]) * state.z[i];
            }
        }
        Ok(out.map(|v| v * w))
    }

    fn make_record(&self, state: &SolverState, picard_iters: usize) -> Result<StepRecord, SolverError> {
        let domain = self.domain();
        let cfg = &self.config;
        let lambda = domain.eigenvalues();
        let w = domain.mode_norm_sq();
        let c2 = cfg.c * cfg.c;
        let tau = cfg.tau;
        let (mut e1, mut e2, mut h2y, mut h3z, mut h3p, mut h3v) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &l) in lambda.iter().enumerate() {
            let l2 = l * l;
            let l3 = l2 * l;
            let (psi, z, y) = (state.psi[i], state.z[i], state.y[i]);
            let v = (z - psi) / tau;
            let s = state.xi[i] + tau * psi;
            e1 += l2 * y * y + c2 * l3 * z * z;
            e2 += l2 * z * z + c2 * l3 * s * s;
            h2y += l2 * y * y;
            h3z += l3 * z * z;
            h3p += l3 * psi * psi;
            h3v += l3 * v * v;
        }
        let e1 = 0.5 * w * e1;
        let e2 = 0.5 * w * e2;
        let ints = state.integrals;
        let identity_residual = if cfg.track_identity {
            e1 + e2 + cfg.delta * (ints.q1 + ints.q2) - state.e0.0 - state.e0.1 - ints.r1 - ints.r2
        } else {
            0.0
        };
        Ok(StepRecord {
            n: state.n,
            t: state.t,
            e1,
            e2,
            integrals: ints,
            identity_residual,
            linf_psi_t: state.psi_t(domain, tau).linf_norm(),
            h3_psi: (w * h3p).sqrt(),
            h3_psi_t: (w * h3v).sqrt(),
            h3_z: (w * h3z).sqrt(),
            h2_y: (w * h2y).sqrt(),
            picard_iters,
        })
    }

    /// Advance one step. On error the state is left unchanged.
    pub fn step(&self, state: &mut SolverState) -> Result<(), SolverError> {
        let cfg = &self.config;
        let domain = Arc::clone(self.domain());
        let lambda = domain.eigenvalues();
        let k = lambda.len();
        let h = cfg.dt;
        let tau = cfg.tau;
        let c2 = cfg.c * cfg.c;
        let n = state.n;
        let t_new = (n + 1) as f64 * h;

        let mut tail = vec![0.0; k];
        if matches!(self.memory, Memory::Exact(_) | Memory::Soe(_)) {
            self.history_tail(&state.hist_y, n, &mut tail);
        }
        let a0 = self.newest_weight();
        let mut f_new = vec![0.0; k];
        let mut ft_new = vec![0.0; k];
        self.source.f_into(t_new, &mut f_new);
        self.source.f_tilde_into(t_new, &mut ft_new);

        // Y⁺ = (base + (h/2) N⁺) / denom
        let mut base = vec![0.0; k];
        let mut denom = vec![0.0; k];
        for i in 0..k {
            let l = lambda[i];
            let (z, y) = (state.z[i], state.y[i]);
            let explicit = -c2 * l * (z + 0.5 * h * y) + cfg.delta * tail[i] + f_new[i];
            base[i] = y + 0.5 * h * state.g_rhs[i] + 0.5 * h * explicit;
            denom[i] = 1.0 + 0.5 * h * (0.5 * h * c2 * l + cfg.delta * l * a0);
        }
        let r = 0.5 * h / tau;
        let solve = |nl: &[f64], psi: &mut [f64], z: &mut [f64], y: &mut [f64]| {
            for i in 0..k {
                y[i] = (base[i] + 0.5 * h * nl[i]) / denom[i];
                z[i] = state.z[i] + 0.5 * h * (state.y[i] + y[i]);
                psi[i] = (state.psi[i] * (1.0 - r) + r * (state.z[i] + z[i])) / (1.0 + r);
            }
        };

        let mut nl = state.nonlinear.clone();
        let (mut psi, mut z, mut y) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        solve(&nl, &mut psi, &mut z, &mut y);
        let mut iterations = 1;
        if cfg.sigma != 0.0 {
            let mut prev_residual = f64::INFINITY;
            let mut growth = 0;
            loop {
                if !all_finite(&[&psi, &z, &y]) {
                    return Err(SolverError::NonFinite { t: t_new });
                }
                let psi_f = ModalField::from_coeffs(&domain, psi.clone())?;
                let v_f = ModalField::from_coeffs(&domain, z.iter().zip(&psi).map(|(z, p)| (z - p) / tau).collect())?;
                let nl_new = gradient_dot(&psi_f, &v_f, cfg.sigma, cfg.dealias)?.into_coeffs();
                let (mut p2, mut z2, mut y2) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
                solve(&nl_new, &mut p2, &mut z2, &mut y2);
                iterations += 1;
                let residual = l2_diff(&[&p2, &z2, &y2], &[&psi, &z, &y]);
                let scale = 1.0 + l2_norm(&[&p2, &z2, &y2]);
                (psi, z, y, nl) = (p2, z2, y2, nl_new);
                if !residual.is_finite() {
                    return Err(SolverError::NonFinite { t: t_new });
                }
                if residual <= cfg.picard_tol * scale {
                    break;
                }
                growth = if residual > prev_residual { growth + 1 } else { 0 };
                prev_residual = residual;
                if growth >= 3 || iterations >= cfg.picard_max_iter {
                    return Err(SolverError::PicardDivergence {
                        t: t_new,
                        residual,
                        iterations,
                    });
                }
            }
        }
        if !all_finite(&[&psi, &z, &y, &nl]) {
            return Err(SolverError::NonFinite { t: t_new });
        }

        // commit
        let g_new: Vec<f64> = y.iter().zip(lambda).map(|(y, l)| -l * y).collect();
        let mut conv_y = vec![0.0; k];
        match self.memory {
            Memory::Off => {}
            Memory::Dirac => conv_y.copy_from_slice(&g_new),
            _ => {
                for i in 0..k {
                    conv_y[i] = a0 * g_new[i] + tail[i];
                }
            }
        }
        let mut conv_z = vec![0.0; k];
        if cfg.track_identity {
            self.convolution(&state.hist_z, Some(n), &z, &mut conv_z);
        }
        for i in 0..k {
            state.g_rhs[i] = -c2 * lambda[i] * z[i] + cfg.delta * conv_y[i] + nl[i] + f_new[i];
            state.xi[i] += 0.5 * h * (state.psi[i] + psi[i]);
        }
        state.psi = psi;
        state.z = z;
        state.y = y;
        state.nonlinear = nl;
        state.n = n + 1;
        state.t = t_new;
        self.push_channel(&mut state.hist_y, &g_new);
        if cfg.track_identity {
            let z_new = state.z.clone();
            self.push_channel(&mut state.hist_z, &z_new);
        }
        let integrands = self.integrands(state, &conv_y, &conv_z, &f_new, &ft_new)?;
        for ((acc, old), new) in state
            .integrals
            .fields()
            .into_iter()
            .zip(state.integrands)
            .zip(integrands)
        {
            *acc += 0.5 * h * (old + new);
        }
        state.integrands = integrands;
        state.record = self.make_record(state, iterations)?;
        if !state.record.e1.is_finite() || !state.record.e2.is_finite() {
            return Err(SolverError::NonFinite { t: t_new });
        }
        Ok(())
    }

    /// Step to the horizon, calling `observer` on the initial record and on
    /// every record whose step index is a multiple of `stride`.
    pub fn run_with(
        &self,
        psi0: &ModalField,
        psi2: &ModalField,
        stride: usize,
        observer: &mut dyn FnMut(&StepRecord, &SolverState),
    ) -> Result<Trajectory, SolverError> {
        let stride = stride.max(1);
        let mut state = self.initialize(psi0, psi2)?;
        let mut records = Vec::with_capacity(self.steps + 1);
        records.push(state.record);
        observer(&state.record, &state);
        let initial_linf = state.record.linf_psi_t;
        let mut blowup_time = None;
        let mut termination = Termination::Completed;
        while state.n < self.steps {
            match self.step(&mut state) {
                Ok(()) => {}
                Err(SolverError::NonFinite { t }) => {
                    termination = Termination::NonFinite { t };
                    break;
                }
                Err(SolverError::PicardDivergence { t, .. }) => {
                    termination = Termination::PicardDivergence { t };
                    break;
                }
                Err(e) => return Err(e),
            }
            let rec = state.record;
            if blowup_time.is_none() && initial_linf > 0.0 && rec.linf_psi_t > BLOWUP_FACTOR * initial_linf {
                blowup_time = Some(rec.t);
            }
            records.push(rec);
            if state.n % stride == 0 {
                observer(&rec, &state);
            }
        }
        Ok(Trajectory {
            records,
            termination,
            final_state: state,
            blowup_time,
            datum_h3: crate::spectral::sobolev_seminorm(psi0, 3),
            boundary_gradient_residual: psi0.boundary_gradient_residual(),
        })
    }

    pub fn run(&self, psi0: &ModalField, psi2: &ModalField) -> Result<Trajectory, SolverError> {
        self.run_with(psi0, psi2, 1, &mut |_, _| {})
    }
}

fn blank_record() -> StepRecord {
    StepRecord {
        n: 0,
        t: 0.0,
        e1: 0.0,
        e2: 0.0,
        integrals: Integrals::default(),
        identity_residual: 0.0,
        linf_psi_t: 0.0,
        h3_psi: 0.0,
        h3_psi_t: 0.0,
        h3_z: 0.0,
        h2_y: 0.0,
        picard_iters: 0,
    }
}

fn all_finite(parts: &[&[f64]]) -> bool {
    parts.iter().all(|p| p.iter().all(|v| v.is_finite()))
}

fn l2_norm(parts: &[&[f64]]) -> f64 {
    parts.iter().flat_map(|p| p.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

fn l2_diff(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y.iter()))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
