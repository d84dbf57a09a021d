//! Run configuration: TOML text in, validated [`RunConfig`] out.
//!
//! Grammar (all tables optional unless the scenario needs them; every key is
//! checked, unknown keys are rejected):
//!
//! ```toml
//! scenario = "small_data_global"   # simulate | small_data_global | inviscid_growth
//!                                  # | kernel_compare | convergence_study | positivity_suite
//! [physics]                        # defaults: tau = c = 1, delta = 0.5, sigma = 1
//! tau = 1.0
//! c = 1.0
//! delta = 0.5
//! sigma = 1.0
//!
//! [kernel]                         # abel{alpha} | exponential{beta} | regularized_abel{alpha, beta}
//! type = "abel"                    # | mittag_leffler{alpha, beta} | polynomial{p} | dirac
//! alpha = 0.5
//!
//! [domain]
//! lengths = ["pi"]                 # numbers or "pi", "2pi", "3*pi/2", ...
//! modes = [32]
//!
//! [time]
//! dt = 5e-3
//! t_final = 100.0
//!
//! [numerics]                       # all optional
//! history = "exact"                # or "soe" with soe_tol
//! picard_tol = 1e-10
//! picard_max_iter = 50
//! dealias = true
//! track_identity = true
//!
//! [initial]                        # zero | single_mode{k, amplitude} | smooth_bump{amplitude, decay}
//! preset = "single_mode"
//! k = [1]
//! amplitude = 1e-2
//!
//! [source]                         # none | decaying_mode{k, amplitude, rate}
//! preset = "decaying_mode"
//! k = [1]
//! amplitude = 1e-3
//! rate = 0.5
//!
//! [output]                         # defaults: dir = "out", stride = 1, seed = 2024
//! dir = "out/small_data"
//! stride = 20
//! seed = 2024
//! ```
//!
//! Scenario tables: `[global]` (small_data_global), `[inviscid]`,
//! `[compare]`, `[convergence]`, `[positivity]`; see the field docs of the
//! corresponding option structs. `[positivity]` is also read by
//! `check-kernel` for any scenario.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use jmgt_core::kernels::KernelFamily;
use jmgt_core::solver::{exponential_mode_solution, ExpSum, HistoryBackend, SolverConfig};
use jmgt_core::spectral::BoxDomain;
use jmgt_core::KernelSpec;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Offending key of a validation error.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { key, .. } => Some(key),
            ConfigError::Parse { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Simulate,
    SmallDataGlobal,
    InviscidGrowth,
    KernelCompare,
    ConvergenceStudy,
    PositivitySuite,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Simulate => "simulate",
            ScenarioKind::SmallDataGlobal => "small_data_global",
            ScenarioKind::InviscidGrowth => "inviscid_growth",
            ScenarioKind::KernelCompare => "kernel_compare",
            ScenarioKind::ConvergenceStudy => "convergence_study",
            ScenarioKind::PositivitySuite => "positivity_suite",
        }
    }

    fn needs_solver(&self) -> bool {
        !matches!(self, ScenarioKind::PositivitySuite)
    }

    fn needs_initial(&self) -> bool {
        !matches!(self, ScenarioKind::PositivitySuite | ScenarioKind::ConvergenceStudy)
    }
}

/// Initial position `ψ₀`; `ψ₂ = 0` and `ψ₁ = −ψ₀/τ`, so `z(0) = 0`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPreset {
    Zero,
    SingleMode {
        k: Vec<usize>,
        amplitude: f64,
    },
    /// `amplitude · exp(−decay |x − centre|²)` projected on the sine basis.
    SmoothBump {
        amplitude: f64,
        decay: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourcePreset {
    None,
    /// `f̃ = amplitude · e^{−rate·t} v_k`.
    DecayingMode {
        k: Vec<usize>,
        amplitude: f64,
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOptions {
    /// `Y` must settle on `[plateau_start·T, T]`.
    pub plateau_start: f64,
    /// Allowed relative change of `Y` on that window.
    pub plateau_tolerance: f64,
    /// Leading fraction of the horizon excluded from the `C*` plateau test.
    pub transient_fraction: f64,
    /// Identity and inequality tolerance, relative to `max(E(0), 1)`.
    pub identity_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InviscidOptions {
    /// Required growth of `sup ‖ψ_t‖_∞` in the `δ = 0` run.
    pub growth_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    pub levels: usize,
    pub k: Vec<usize>,
    /// `φ(t) = Σ a e^{−r t}` as `(a, r)` pairs.
    pub phi: ExpSum,
    pub min_order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityOptions {
    pub trials: usize,
    pub steps: usize,
    pub dt: f64,
    /// Geometric monotonicity grid on `[grid_min, grid_max]`.
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub rel_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Simulate,
    SmallDataGlobal(GlobalOptions),
    InviscidGrowth(InviscidOptions),
    /// Extra kernels run next to the base one.
    KernelCompare(Vec<KernelSpec>),
    ConvergenceStudy(ConvergenceOptions),
    PositivitySuite,
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::Simulate => ScenarioKind::Simulate,
            Scenario::SmallDataGlobal(_) => ScenarioKind::SmallDataGlobal,
            Scenario::InviscidGrowth(_) => ScenarioKind::InviscidGrowth,
            Scenario::KernelCompare(_) => ScenarioKind::KernelCompare,
            Scenario::ConvergenceStudy(_) => ScenarioKind::ConvergenceStudy,
            Scenario::PositivitySuite => ScenarioKind::PositivitySuite,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub stride: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub kernel: KernelSpec,
    /// Absent only for `positivity_suite`.
    pub solver: Option<SolverConfig>,
    pub initial: InitialPreset,
    pub source: SourcePreset,
    pub positivity: PositivityOptions,
    pub output: OutputOptions,
}

impl RunConfig {
    /// Solver settings; panics for `positivity_suite`, which has none.
    pub fn solver(&self) -> &SolverConfig {
        self.solver.as_ref().expect("scenario has a solver configuration")
    }
}

/// A length: a number or a multiple of π written as text.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Length {
    Number(f64),
    Text(String),
}

/// `"pi"`, `"2pi"`, `"2*pi"`, `"pi/2"`, `"3pi/4"` or a plain number.
pub fn parse_length(text: &str) -> Option<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (head, denom) = match s.split_once('/') {
        Some((h, d)) => (h, d.parse::<f64>().ok()?),
        None => (s.as_str(), 1.0),
    };
    let coeff = head.strip_suffix("pi").or_else(|| head.strip_suffix('π'))?;
    let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
    let a = if coeff.is_empty() {
        1.0
    } else {
        coeff.parse::<f64>().ok()?
    };
    Some(a * PI / denom)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<ScenarioKind>,
    physics: Option<RawPhysics>,
    kernel: Option<KernelFamily>,
    domain: Option<RawDomain>,
    time: Option<RawTime>,
    numerics: Option<RawNumerics>,
    initial: Option<InitialPreset>,
    source: Option<SourcePreset>,
    output: Option<RawOutput>,
    global: Option<RawGlobal>,
    inviscid: Option<RawInviscid>,
    compare: Option<RawCompare>,
    convergence: Option<RawConvergence>,
    positivity: Option<RawPositivity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    tau: Option<f64>,
    c: Option<f64>,
    delta: Option<f64>,
    sigma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lengths: Vec<Length>,
    modes: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: f64,
    t_final: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum HistoryKind {
    Exact,
    Soe,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    history: Option<HistoryKind>,
    soe_tol: Option<f64>,
    picard_tol: Option<f64>,
    picard_max_iter: Option<usize>,
    dealias: Option<bool>,
    track_identity: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    stride: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGlobal {
    plateau_start: Option<f64>,
    plateau_tolerance: Option<f64>,
    transient_fraction: Option<f64>,
    identity_tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInviscid {
    growth_factor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    kernels: Vec<KernelFamily>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvergence {
    levels: Option<usize>,
    k: Option<Vec<usize>>,
    phi: Option<Vec<(f64, f64)>>,
    min_order: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPositivity {
    trials: Option<usize>,
    steps: Option<usize>,
    dt: Option<f64>,
    grid_min: Option<f64>,
    grid_max: Option<f64>,
    grid_points: Option<usize>,
    rel_step: Option<f64>,
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    validate(raw)
}

fn kernel_spec(family: KernelFamily, key: &str) -> Result<KernelSpec, ConfigError> {
    KernelSpec::new(family).map_err(|e| {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        let param = match family {
            KernelFamily::Abel { .. } => "alpha",
            KernelFamily::Exponential { .. } => "beta",
            KernelFamily::Polynomial { .. } => "p",
            KernelFamily::RegularizedAbel { alpha, .. } | KernelFamily::MittagLeffler { alpha, .. } => {
                if unit(alpha) {
                    "beta"
                } else {
                    "alpha"
                }
            }
            KernelFamily::Dirac => "type",
        };
        ConfigError::invalid(&format!("{key}.{param}"), e.to_string())
    })
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::invalid(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn fraction(key: &str, v: f64) -> Result<f64, ConfigError> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("must lie in [0, 1), got {v}")))
    }
}

fn check_mode(key: &str, k: &[usize], domain: &BoxDomain) -> Result<(), ConfigError> {
    if domain.flat_index(k).is_none() {
        return Err(ConfigError::invalid(
            key,
            format!("mode {k:?} is not resolved by modes {:?}", domain.modes()),
        ));
    }
    Ok(())
}

fn unused(present: bool, key: &str, scenario: ScenarioKind) -> Result<(), ConfigError> {
    if present {
        return Err(ConfigError::invalid(
            key,
            format!("not used by scenario {}", scenario.name()),
        ));
    }
    Ok(())
}

fn validate(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let kind = raw
        .scenario
        .ok_or_else(|| ConfigError::invalid("scenario", "missing"))?;
    let family = raw.kernel.ok_or_else(|| ConfigError::invalid("kernel", "missing"))?;
    let kernel = kernel_spec(family, "kernel")?;

    unused(
        raw.global.is_some() && kind != ScenarioKind::SmallDataGlobal,
        "global",
        kind,
    )?;
    unused(
        raw.inviscid.is_some() && kind != ScenarioKind::InviscidGrowth,
        "inviscid",
        kind,
    )?;
    unused(
        raw.compare.is_some() && kind != ScenarioKind::KernelCompare,
        "compare",
        kind,
    )?;
    unused(
        raw.convergence.is_some() && kind != ScenarioKind::ConvergenceStudy,
        "convergence",
        kind,
    )?;

    let positivity = {
        let p = raw.positivity.unwrap_or_default();
        let opts = PositivityOptions {
            trials: p.trials.unwrap_or(1000),
            steps: p.steps.unwrap_or(128),
            dt: positive("positivity.dt", p.dt.unwrap_or(0.05))?,
            grid_min: positive("positivity.grid_min", p.grid_min.unwrap_or(0.01))?,
            grid_max: positive("positivity.grid_max", p.grid_max.unwrap_or(10.0))?,
            grid_points: p.grid_points.unwrap_or(200),
            rel_step: positive("positivity.rel_step", p.rel_step.unwrap_or(1e-4))?,
        };
        if opts.trials == 0 || opts.steps == 0 {
            return Err(ConfigError::invalid(
                "positivity.trials",
                "trials and steps must be positive",
            ));
        }
        if opts.grid_min >= opts.grid_max || opts.grid_points < 2 {
            return Err(ConfigError::invalid(
                "positivity.grid_max",
                "need grid_min < grid_max and 2+ points",
            ));
        }
        opts
    };

    let out = raw.output.unwrap_or_default();
    let output = OutputOptions {
        dir: out.dir.unwrap_or_else(|| PathBuf::from("out")),
        stride: out.stride.unwrap_or(1),
        seed: out.seed.unwrap_or(2024),
    };
    if output.stride == 0 {
        return Err(ConfigError::invalid("output.stride", "must be at least 1"));
    }

    if !kind.needs_solver() {
        unused(raw.initial.is_some(), "initial", kind)?;
        unused(raw.source.is_some(), "source", kind)?;
        if kernel.is_dirac() {
            return Err(ConfigError::invalid(
                "kernel.type",
                "dirac has no pointwise values to check",
            ));
        }
        return Ok(RunConfig {
            scenario: Scenario::PositivitySuite,
            kernel,
            solver: None,
            initial: InitialPreset::Zero,
            source: SourcePreset::None,
            positivity,
            output,
        });
    }

    let dom = raw.domain.ok_or_else(|| ConfigError::invalid("domain", "missing"))?;
    let lengths = dom
        .lengths
        .iter()
        .map(|l| match l {
            Length::Number(v) => Ok(*v),
            Length::Text(s) => parse_length(s)
                .ok_or_else(|| ConfigError::invalid("domain.lengths", format!("cannot read length {s:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let domain = BoxDomain::new(&lengths, &dom.modes).map_err(|e| ConfigError::invalid("domain", e.to_string()))?;

    let time = raw.time.ok_or_else(|| ConfigError::invalid("time", "missing"))?;
    let mut solver = SolverConfig::new(Arc::clone(&domain), kernel, positive("time.dt", time.dt)?, time.t_final);
    if !(time.t_final >= 0.0 && time.t_final.is_finite()) {
        return Err(ConfigError::invalid(
            "time.t_final",
            format!("must be nonnegative, got {}", time.t_final),
        ));
    }
    let ph = raw.physics.unwrap_or_default();
    solver.tau = positive("physics.tau", ph.tau.unwrap_or(solver.tau))?;
    solver.c = positive("physics.c", ph.c.unwrap_or(solver.c))?;
    solver.delta = ph.delta.unwrap_or(solver.delta);
    if !(solver.delta >= 0.0 && solver.delta.is_finite()) {
        return Err(ConfigError::invalid(
            "physics.delta",
            format!("must be nonnegative, got {}", solver.delta),
        ));
    }
    solver.sigma = ph.sigma.unwrap_or(solver.sigma);
    if !solver.sigma.is_finite() {
        return Err(ConfigError::invalid("physics.sigma", "must be finite"));
    }
    let num = raw.numerics.unwrap_or_default();
    solver.history = match (num.history.unwrap_or(HistoryKind::Exact), num.soe_tol) {
        (HistoryKind::Exact, None) => HistoryBackend::Exact,
        (HistoryKind::Exact, Some(_)) => {
            return Err(ConfigError::invalid(
                "numerics.soe_tol",
                "only meaningful with history = \"soe\"",
            ))
        }
        (HistoryKind::Soe, tol) => {
            let tol = tol.unwrap_or(1e-6);
            if !(tol > 0.0 && tol < 1.0) {
                return Err(ConfigError::invalid(
                    "numerics.soe_tol",
                    format!("must lie in (0, 1), got {tol}"),
                ));
            }
            if kernel.is_dirac() {
                return Err(ConfigError::invalid(
                    "numerics.history",
                    "the dirac kernel needs exact history",
                ));
            }
            HistoryBackend::Soe { tol }
        }
    };
    solver.picard_tol = positive("numerics.picard_tol", num.picard_tol.unwrap_or(solver.picard_tol))?;
    solver.picard_max_iter = num.picard_max_iter.unwrap_or(solver.picard_max_iter);
    if solver.picard_max_iter == 0 {
        return Err(ConfigError::invalid("numerics.picard_max_iter", "must be at least 1"));
    }
    solver.dealias = num.dealias.unwrap_or(solver.dealias);
    solver.track_identity = num.track_identity.unwrap_or(solver.track_identity);
    solver
        .validate()
        .map_err(|e| ConfigError::invalid("physics", e.to_string()))?;

    let initial = match (raw.initial, kind.needs_initial()) {
        (Some(_), false) => {
            return Err(ConfigError::invalid(
                "initial",
                "data come from the manufactured solution",
            ))
        }
        (None, true) => return Err(ConfigError::invalid("initial", "missing")),
        (None, false) => InitialPreset::Zero,
        (Some(p), true) => {
            match &p {
                InitialPreset::Zero => {}
                InitialPreset::SingleMode { k, amplitude } => {
                    check_mode("initial.k", k, &domain)?;
                    if !amplitude.is_finite() {
                        return Err(ConfigError::invalid("initial.amplitude", "must be finite"));
                    }
                }
                InitialPreset::SmoothBump { amplitude, decay } => {
                    if !amplitude.is_finite() {
                        return Err(ConfigError::invalid("initial.amplitude", "must be finite"));
                    }
                    positive("initial.decay", *decay)?;
                }
            }
            p
        }
    };
    let source = match raw.source {
        Some(_) if kind == ScenarioKind::ConvergenceStudy => {
            return Err(ConfigError::invalid(
                "source",
                "forcing comes from the manufactured solution",
            ))
        }
        None => SourcePreset::None,
        Some(p) => {
            if let SourcePreset::DecayingMode { k, amplitude, rate } = &p {
                check_mode("source.k", k, &domain)?;
                if !amplitude.is_finite() {
                    return Err(ConfigError::invalid("source.amplitude", "must be finite"));
                }
                positive("source.rate", *rate)?;
            }
            p
        }
    };

    let scenario = match kind {
        ScenarioKind::Simulate => Scenario::Simulate,
        ScenarioKind::SmallDataGlobal => {
            let g = raw.global.unwrap_or_default();
            Scenario::SmallDataGlobal(GlobalOptions {
                plateau_start: fraction("global.plateau_start", g.plateau_start.unwrap_or(0.5))?,
                plateau_tolerance: positive("global.plateau_tolerance", g.plateau_tolerance.unwrap_or(0.05))?,
                transient_fraction: fraction(
                    "global.transient_fraction",
                    g.transient_fraction
                        .unwrap_or(jmgt_core::diagnostics::TRANSIENT_FRACTION),
                )?,
                identity_tolerance: positive("global.identity_tolerance", g.identity_tolerance.unwrap_or(1e-4))?,
            })
        }
        ScenarioKind::InviscidGrowth => {
            if solver.delta == 0.0 {
                return Err(ConfigError::invalid(
                    "physics.delta",
                    "the damped comparison run needs delta > 0",
                ));
            }
            let g = raw.inviscid.unwrap_or_default();
            let growth_factor = positive("inviscid.growth_factor", g.growth_factor.unwrap_or(10.0))?;
            if growth_factor <= 1.0 {
                return Err(ConfigError::invalid("inviscid.growth_factor", "must exceed 1"));
            }
            Scenario::InviscidGrowth(InviscidOptions { growth_factor })
        }
        ScenarioKind::KernelCompare => {
            let c = raw
                .compare
                .ok_or_else(|| ConfigError::invalid("compare.kernels", "missing"))?;
            if c.kernels.is_empty() {
                return Err(ConfigError::invalid("compare.kernels", "needs at least one kernel"));
            }
            let kernels = c
                .kernels
                .into_iter()
                .enumerate()
                .map(|(i, f)| kernel_spec(f, &format!("compare.kernels[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            if solver.history != HistoryBackend::Exact && kernels.iter().any(|k| k.is_dirac()) {
                return Err(ConfigError::invalid("compare.kernels", "dirac needs exact history"));
            }
            Scenario::KernelCompare(kernels)
        }
        ScenarioKind::ConvergenceStudy => {
            let c = raw.convergence.unwrap_or_default();
            let levels = c.levels.unwrap_or(4);
            if levels < 2 {
                return Err(ConfigError::invalid("convergence.levels", "needs at least 2 levels"));
            }
            let k = c.k.unwrap_or_else(|| vec![1; domain.dimension()]);
            check_mode("convergence.k", &k, &domain)?;
            let phi = ExpSum {
                terms: c.phi.unwrap_or_else(|| vec![(1.5, 1.0), (-0.5, 2.0)]),
            };
            if solver.sigma != 0.0 {
                return Err(ConfigError::invalid(
                    "physics.sigma",
                    "the manufactured solution needs sigma = 0",
                ));
            }
            exponential_mode_solution(&solver, &k, phi.clone())
                .map_err(|e| ConfigError::invalid("convergence.phi", e.to_string()))?;
            Scenario::ConvergenceStudy(ConvergenceOptions {
                levels,
                k,
                phi,
                min_order: c.min_order.unwrap_or(1.8),
            })
        }
        ScenarioKind::PositivitySuite => unreachable!("handled above"),
    };

    Ok(RunConfig {
        scenario,
        kernel,
        solver: Some(solver),
        initial,
        source,
        positivity,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(parse_length("pi"), Some(PI));
        assert_eq!(parse_length("2pi"), Some(2.0 * PI));
        assert_eq!(parse_length("2 * pi"), Some(2.0 * PI));
        assert_eq!(parse_length("3pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_length("1.5"), Some(1.5));
        assert_eq!(parse_length("tau"), None);
        assert_eq!(parse_length("pi/x"), None);
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
