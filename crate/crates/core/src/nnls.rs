//! Lawson–Hanson nonnegative least squares.

use nalgebra::{DMatrix, DVector};

/// Solve `min ‖A x − b‖₂` subject to `x ≥ 0`.
///
/// Columns should be scaled to comparable norms by the caller.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let atb_norm = (a.transpose() * b).amax();
    let tol = 1e-12 * atb_norm.max(f64::MIN_POSITIVE) * n as f64;

    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = solve_passive(a, b, &idx);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // step back toward the feasible region until one variable hits zero
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= 1e-15 * z.amax() {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if passive.iter().all(|&p| !p) {
                break;
            }
        }
    }
    x
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    // Householder QR is backward stable, so the residual stays small even
    // when nearly parallel exponential columns make R badly conditioned.
    let sub = a.select_columns(idx);
    let qr = sub.qr();
    let rhs = qr.q().transpose() * b;
    qr.r()
        .solve_upper_triangular(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| DVector::zeros(idx.len()))
}
