//! Spectral Galerkin simulation of the Jordan–Moore–Gibson–Thompson equation
//! with a nonlocal memory damping term, plus the energy diagnostics used to
//! probe small-data global boundedness.
//!
//! Modules, roughly in dependency order:
//!
//! * [`kernels`]: memory kernels, their admissibility checks, SoE fits;
//! * [`quadrature`]: product-integration convolution weights and the SoE recursion;
//! * [`spectral`]: Dirichlet sine basis on boxes, norms, the gradient nonlinearity;
//! * [`solver`]: Crank–Nicolson/Picard time stepping of the modal system;
//! * [`diagnostics`]: energies, dissipation, bootstrap and Strauss-type checks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod diagnostics;
pub mod integrate;
pub mod kernels;
mod nnls;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod spectral;

pub use check::CheckReport;
pub use kernels::{evaluate, Kernel, KernelError, KernelFamily, KernelSpec};
pub use special::mittag_leffler;
