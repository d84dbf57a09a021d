//! Dirichlet-Laplacian sine basis on boxes `Π [0, L_i]`, `d ≤ 3`.
//!
//! A field is `ψ = Σ_k c_k Π_i sin(k_i π x_i / L_i)` with `1 ≤ k_i ≤ M_i`,
//! stored row-major (axis 0 slowest). Every linear operator of the model is
//! diagonal here; only the gradient product needs the physical grid.
//!
//! Grids use `P` intervals per axis and include both boundary nodes. With
//! dealiasing on, `P = 2M + 1`: the product of two gradients is a cosine
//! polynomial of degree `≤ 2M` in every direction, which DCT-I on `P + 1`
//! nodes recovers exactly, so the sine coefficients that come back are the
//! exact L² projection of the product. With dealiasing off, `P = M + 1`.

use std::sync::Arc;

use nalgebra::DMatrix;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("fields live on different domains")]
    DomainMismatch,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("expected {expected} coefficients, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Per-axis transform matrices for one grid resolution.
#[derive(Debug, Clone)]
struct AxisGrid {
    intervals: usize,
    /// `(P+1) × M`: `sin(kπj/P)`.
    sin_eval: DMatrix<f64>,
    /// `(P+1) × M`: `(kπ/L) cos(kπj/P)`.
    cos_deriv: DMatrix<f64>,
    /// `M × (P+1)`: DST-I, `(2/P) Σ_{j=1}^{P-1} f_j sin(kπj/P)`.
    dst: DMatrix<f64>,
    /// `M × (P+1)`: cosine samples to sine coefficients (DCT-I, then L² projection).
    cos_to_sine: DMatrix<f64>,
}

impl AxisGrid {
    fn new(length: f64, modes: usize, intervals: usize) -> Self {
        let p = intervals;
        let pf = p as f64;
        // boundary rows are exactly zero rather than sin(kπ) in floating point
        let sin_eval = DMatrix::from_fn(p + 1, modes, |j, k| {
            if j == 0 || j == p {
                0.0
            } else {
                ((k + 1) as f64 * PI * j as f64 / pf).sin()
            }
        });
        let cos_deriv = DMatrix::from_fn(p + 1, modes, |j, k| {
            let kk = (k + 1) as f64;
            kk * PI / length * (kk * PI * j as f64 / pf).cos()
        });
        let dst = DMatrix::from_fn(modes, p + 1, |k, j| {
            if j == 0 || j == p {
                0.0
            } else {
                2.0 / pf * ((k + 1) as f64 * PI * j as f64 / pf).sin()
            }
        });
        // a_m = (2/P) Σ'' f_j cos(mπj/P) / (2 if m ∈ {0, P})
        let dct = DMatrix::from_fn(p + 1, p + 1, |m, j| {
            let end = |i: usize| i == 0 || i == p;
            let half = if end(j) { 0.5 } else { 1.0 };
            let edge = if end(m) { 0.5 } else { 1.0 };
            2.0 / pf * half * edge * (m as f64 * PI * j as f64 / pf).cos()
        });
        // (2/L)∫ cos(mπx/L) sin(kπx/L) dx
        let proj = DMatrix::from_fn(modes, p + 1, |k, m| {
            let k = (k + 1) as i64;
            let m = m as i64;
            if k == m || (k + m) % 2 == 0 {
                0.0
            } else {
                2.0 / PI * (2 * k) as f64 / ((k * k - m * m) as f64)
            }
        });
        Self {
            intervals: p,
            sin_eval,
            cos_deriv,
            dst,
            cos_to_sine: proj * dct,
        }
    }
}

#[derive(Debug, Clone)]
struct Axis {
    length: f64,
    modes: usize,
    plain: AxisGrid,
    fine: AxisGrid,
}

/// Tensor-product box with its sine basis.
#[derive(Debug, Clone)]
pub struct BoxDomain {
    axes: Vec<Axis>,
    eigenvalues: Vec<f64>,
}

impl PartialEq for BoxDomain {
    fn eq(&self, other: &Self) -> bool {
        self.lengths() == other.lengths() && self.modes() == other.modes()
    }
}

impl BoxDomain {
    pub fn new(lengths: &[f64], modes: &[usize]) -> Result<Arc<Self>, SpectralError> {
        if lengths.is_empty() || lengths.len() > 3 {
            return Err(SpectralError::InvalidDomain(format!(
                "dimension must be 1, 2 or 3, got {}",
                lengths.len()
            )));
        }
        if lengths.len() != modes.len() {
            return Err(SpectralError::InvalidDomain(format!(
                "{} lengths but {} mode counts",
                lengths.len(),
                modes.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(SpectralError::InvalidDomain(format!(
                "edge length {l} must be positive"
            )));
        }
        if modes.contains(&0) {
            return Err(SpectralError::InvalidDomain("at least one mode per axis".into()));
        }
        let axes: Vec<Axis> = lengths
            .iter()
            .zip(modes)
            .map(|(&length, &m)| Axis {
                length,
                modes: m,
                plain: AxisGrid::new(length, m, m + 1),
                fine: AxisGrid::new(length, m, 2 * m + 1),
            })
            .collect();
        let mut domain = Self {
            axes,
            eigenvalues: Vec::new(),
        };
        domain.eigenvalues = (0..domain.len())
            .map(|flat| {
                domain
                    .multi_index(flat)
                    .iter()
                    .zip(&domain.axes)
                    .map(|(&k, ax)| (k as f64 * PI / ax.length).powi(2))
                    .sum()
            })
            .collect();
        Ok(Arc::new(domain))
    }

    /// One-dimensional interval `[0, L]` with `M` modes.
    pub fn interval(length: f64, modes: usize) -> Result<Arc<Self>, SpectralError> {
        Self::new(&[length], &[modes])
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.length).collect()
    }

    pub fn modes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.modes).collect()
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.modes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid intervals per axis for the given dealias setting.
    pub fn grid_intervals(&self, dealias: bool) -> Vec<usize> {
        self.axes.iter().map(|a| grid(a, dealias).intervals).collect()
    }

    /// `λ_k = Σ_i (k_i π / L_i)²`, in storage order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `‖v_k‖²_{L²} = Π L_i / 2`, the same for every basis function.
    pub fn mode_norm_sq(&self) -> f64 {
        self.axes.iter().map(|a| 0.5 * a.length).product()
    }

    /// 1-based multi-index of a flat position.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut k = vec![0; self.axes.len()];
        for (i, ax) in self.axes.iter().enumerate().rev() {
            k[i] = flat % ax.modes + 1;
            flat /= ax.modes;
        }
        k
    }

    /// Flat position of a 1-based multi-index.
    pub fn flat_index(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.axes.len() {
            return None;
        }
        let mut flat = 0;
        for (&ki, ax) in k.iter().zip(&self.axes) {
            if ki == 0 || ki > ax.modes {
                return None;
            }
            flat = flat * ax.modes + (ki - 1);
        }
        Some(flat)
    }
}

fn grid(axis: &Axis, dealias: bool) -> &AxisGrid {
    if dealias {
        &axis.fine
    } else {
        &axis.plain
    }
}

/// Contract `data` (row-major, `shape`) with `mat` along `axis`.
fn apply_axis(data: &[f64], shape: &[usize], axis: usize, mat: &DMatrix<f64>) -> (Vec<f64>, Vec<usize>) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let n_in = shape[axis];
    let n_out = mat.nrows();
    debug_assert_eq!(mat.ncols(), n_in);
    let mut out = vec![0.0; outer * n_out * inner];
    for o in 0..outer {
        for r in 0..n_out {
            let dst = &mut out[(o * n_out + r) * inner..(o * n_out + r + 1) * inner];
            for c in 0..n_in {
                let w = mat[(r, c)];
                if w == 0.0 {
                    continue;
                }
                let src = &data[(o * n_in + c) * inner..(o * n_in + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = n_out;
    (out, new_shape)
}

/// Modal coefficients on a shared domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalField {
    domain: Arc<BoxDomain>,
    coeffs: Vec<f64>,
}

impl ModalField {
    pub fn zeros(domain: &Arc<BoxDomain>) -> Self {
        Self {
            domain: Arc::clone(domain),
            coeffs: vec![0.0; domain.len()],
        }
    }

    pub fn from_coeffs(domain: &Arc<BoxDomain>, coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        if coeffs.len() != domain.len() {
            return Err(SpectralError::ShapeMismatch {
                expected: domain.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            domain: Arc::clone(domain),
            coeffs,
        })
    }

    /// `amplitude · v_k` for a 1-based multi-index `k`.
    pub fn single_mode(domain: &Arc<BoxDomain>, k: &[usize], amplitude: f64) -> Result<Self, SpectralError> {
        let flat = domain
            .flat_index(k)
            .ok_or_else(|| SpectralError::InvalidDomain(format!("mode {k:?} outside the basis")))?;
        let mut f = Self::zeros(domain);
        f.coeffs[flat] = amplitude;
        Ok(f)
    }

    pub fn domain(&self) -> &Arc<BoxDomain> {
        &self.domain
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn same_domain(&self, other: &Self) -> Result<(), SpectralError> {
        if Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain {
            Ok(())
        } else {
            Err(SpectralError::DomainMismatch)
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|c| s * c)
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self, SpectralError> {
        self.same_domain(other)?;
        Ok(Self {
            domain: Arc::clone(&self.domain),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + s * b).collect(),
        })
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: Arc::clone(&self.domain),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    fn map_with_eigen(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            domain: Arc::clone(&self.domain),
            coeffs: self
                .coeffs
                .iter()
                .zip(self.domain.eigenvalues())
                .map(|(&c, &l)| f(c, l))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Point values on the grid selected by `dealias`.
    pub fn to_grid(&self, dealias: bool) -> GridField {
        let mut data = self.coeffs.clone();
        let mut shape = self.domain.modes();
        for (i, ax) in self.domain.axes.iter().enumerate() {
            (data, shape) = apply_axis(&data, &shape, i, &grid(ax, dealias).sin_eval);
        }
        GridField {
            domain: Arc::clone(&self.domain),
            dealias,
            shape,
            values: data,
        }
    }

    /// Grid values of `∂_axis ψ`.
    fn derivative_on_grid(&self, axis: usize, dealias: bool) -> (Vec<f64>, Vec<usize>) {
        let mut data = self.coeffs.clone();
        let mut shape = self.domain.modes();
        for (i, ax) in self.domain.axes.iter().enumerate() {
            let g = grid(ax, dealias);
            let mat = if i == axis { &g.cos_deriv } else { &g.sin_eval };
            (data, shape) = apply_axis(&data, &shape, i, mat);
        }
        (data, shape)
    }

    /// Largest `|∇ψ|` component over boundary grid nodes.
    pub fn boundary_gradient_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for axis in 0..self.domain.dimension() {
            let (data, shape) = self.derivative_on_grid(axis, true);
            for (flat, v) in data.iter().enumerate() {
                let mut rest = flat;
                let mut on_boundary = false;
                for &n in shape.iter().rev() {
                    let j = rest % n;
                    rest /= n;
                    on_boundary |= j == 0 || j == n - 1;
                }
                if on_boundary {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    /// Max of `|ψ|` over the fine grid.
    pub fn linf_norm(&self) -> f64 {
        self.to_grid(true).values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Coefficients `-λ_k c_k`.
pub fn laplacian(f: &ModalField) -> ModalField {
    f.map_with_eigen(|c, l| -l * c)
}

/// `(Σ λ_k^s c_k² · Π L_i/2)^{1/2}`; `s = 3` is `‖∇Δf‖_{L²}`.
pub fn sobolev_seminorm(f: &ModalField, s: u32) -> f64 {
    seminorm_sq(f.domain(), f.coeffs(), s).sqrt()
}

/// Squared seminorm straight from a coefficient slice.
pub fn seminorm_sq(domain: &BoxDomain, coeffs: &[f64], s: u32) -> f64 {
    coeffs
        .iter()
        .zip(domain.eigenvalues())
        .map(|(c, l)| l.powi(s as i32) * c * c)
        .sum::<f64>()
        * domain.mode_norm_sq()
}

/// Solve `-c² Δξ = rhs`.
pub fn elliptic_solve(rhs: &ModalField, c2: f64) -> ModalField {
    rhs.map_with_eigen(|r, l| r / (c2 * l))
}

/// Sine coefficients of `2σ ∇ψ·∇φ`.
pub fn gradient_dot(
    psi: &ModalField,
    phi: &ModalField,
    sigma: f64,
    dealias: bool,
) -> Result<ModalField, SpectralError> {
    psi.same_domain(phi)?;
    let domain = psi.domain();
    if sigma == 0.0 {
        return Ok(ModalField::zeros(domain));
    }
    let mut product: Option<(Vec<f64>, Vec<usize>)> = None;
    for axis in 0..domain.dimension() {
        let (a, shape) = psi.derivative_on_grid(axis, dealias);
        let (b, _) = phi.derivative_on_grid(axis, dealias);
        match &mut product {
            None => product = Some((a.iter().zip(&b).map(|(x, y)| x * y).collect(), shape)),
            Some((acc, _)) => {
                for ((p, x), y) in acc.iter_mut().zip(&a).zip(&b) {
                    *p += x * y;
                }
            }
        }
    }
    let (mut data, mut shape) = product.expect("dimension ≥ 1");
    for (i, ax) in domain.axes.iter().enumerate() {
        (data, shape) = apply_axis(&data, &shape, i, &grid(ax, dealias).cos_to_sine);
    }
    for v in &mut data {
        *v *= 2.0 * sigma;
    }
    ModalField::from_coeffs(domain, data)
}

/// Point values on a tensor grid including boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: Arc<BoxDomain>,
    dealias: bool,
    shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    /// Sample `f` on the grid selected by `dealias`.
    pub fn from_fn(domain: &Arc<BoxDomain>, dealias: bool, f: impl Fn(&[f64]) -> f64) -> Self {
        let intervals = domain.grid_intervals(dealias);
        let shape: Vec<usize> = intervals.iter().map(|p| p + 1).collect();
        let lengths = domain.lengths();
        let total: usize = shape.iter().product();
        let mut x = vec![0.0; shape.len()];
        let values = (0..total)
            .map(|mut flat| {
                for i in (0..shape.len()).rev() {
                    x[i] = (flat % shape[i]) as f64 * lengths[i] / intervals[i] as f64;
                    flat /= shape[i];
                }
                f(&x)
            })
            .collect();
        Self {
            domain: Arc::clone(domain),
            dealias,
            shape,
            values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// DST-I back to sine coefficients.
    pub fn to_modal(&self) -> ModalField {
        let mut data = self.values.clone();
        let mut shape = self.shape.clone();
        for (i, ax) in self.domain.axes.iter().enumerate() {
            (data, shape) = apply_axis(&data, &shape, i, &grid(ax, self.dealias).dst);
        }
        ModalField {
            domain: Arc::clone(&self.domain),
            coeffs: data,
        }
    }

    /// Trapezoid-rule `∫ f²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let intervals = self.domain.grid_intervals(self.dealias);
        let lengths = self.domain.lengths();
        let mut sum = 0.0;
        for (flat, v) in self.values.iter().enumerate() {
            let mut rest = flat;
            let mut w = 1.0;
            for i in (0..self.shape.len()).rev() {
                let j = rest % self.shape[i];
                rest /= self.shape[i];
                let h = lengths[i] / intervals[i] as f64;
                w *= if j == 0 || j == intervals[i] { 0.5 * h } else { h };
            }
            sum += w * v * v;
        }
        sum
    }
}
