use std::f64::consts::PI;
use std::sync::Arc;

use jmgt_core::spectral::{
    elliptic_solve, gradient_dot, laplacian, sobolev_seminorm, BoxDomain, GridField, ModalField,
};
use proptest::prelude::*;

fn domain_strategy() -> impl Strategy<Value = Arc<BoxDomain>> {
    (1usize..=3)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(0.5f64..4.0, d),
                prop::collection::vec(1usize..=7, d),
            )
        })
        .prop_map(|(l, m)| BoxDomain::new(&l, &m).unwrap())
}

fn field_strategy() -> impl Strategy<Value = ModalField> {
    domain_strategy().prop_flat_map(|d| {
        let n = d.len();
        prop::collection::vec(-1.0f64..1.0, n).prop_map(move |c| ModalField::from_coeffs(&d, c).unwrap())
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_round_trip(f in field_strategy(), dealias in any::<bool>()) {
        let back = f.to_grid(dealias).to_modal();
        prop_assert!(max_diff(back.coeffs(), f.coeffs()) < 1e-12);
    }

    #[test]
    fn parseval(f in field_strategy(), dealias in any::<bool>()) {
        let grid = f.to_grid(dealias).l2_norm_sq();
        let modal = sobolev_seminorm(&f, 0).powi(2);
        prop_assert!((grid - modal).abs() <= 1e-10 * modal.max(1e-300));
    }

    #[test]
    fn elliptic_inverts_laplacian(f in field_strategy(), c2 in 0.1f64..10.0) {
        let back = elliptic_solve(&laplacian(&f).scaled(-c2), c2);
        prop_assert!(max_diff(back.coeffs(), f.coeffs()) < 1e-13);
    }

    #[test]
    fn boundary_nodes_vanish(f in field_strategy(), dealias in any::<bool>()) {
        let g = f.to_grid(dealias);
        let shape = g.shape().to_vec();
        for (flat, v) in g.values.iter().enumerate() {
            let mut rest = flat;
            let mut boundary = false;
            for &n in shape.iter().rev() {
                let j = rest % n;
                rest /= n;
                boundary |= j == 0 || j == n - 1;
            }
            if boundary {
                prop_assert!(v.abs() < 1e-14, "boundary value {:e} shape {:?}", v, shape);
            }
        }
    }

    /// `2σ ψ'φ'` for band-limited sine sums against the symbolic product
    /// `kj cos kx cos jx = (kj/2)(cos (k−j)x + cos (k+j)x)` projected with
    /// `(2/π)∫ cos mx sin nx = (2/π) n (1 − (−1)^{n+m}) / (n² − m²)`.
    #[test]
    fn gradient_dot_matches_symbolic_product(
        a in prop::collection::vec(-1.0f64..1.0, 4),
        b in prop::collection::vec(-1.0f64..1.0, 4),
        sigma in -2.0f64..2.0,
    ) {
        let m = 12;
        let d = BoxDomain::interval(PI, m).unwrap();
        let mut ca = vec![0.0; m];
        let mut cb = vec![0.0; m];
        ca[..4].copy_from_slice(&a);
        cb[..4].copy_from_slice(&b);
        let psi = ModalField::from_coeffs(&d, ca).unwrap();
        let phi = ModalField::from_coeffs(&d, cb).unwrap();
        let got = gradient_dot(&psi, &phi, sigma, true).unwrap();
        let cos_to_sine = |mm: i64, n: i64| -> f64 {
            if (n + mm) % 2 == 0 || n == mm.abs() { 0.0 } else { 2.0 / PI * 2.0 * n as f64 / (n * n - mm * mm) as f64 }
        };
        for n in 1..=m as i64 {
            let mut expected = 0.0;
            for k in 1..=4i64 {
                for j in 1..=4i64 {
                    let w = a[k as usize - 1] * b[j as usize - 1] * (k * j) as f64 / 2.0;
                    expected += w * (cos_to_sine(k - j, n) + cos_to_sine(k + j, n));
                }
            }
            expected *= 2.0 * sigma;
            prop_assert!((got.coeffs()[n as usize - 1] - expected).abs() < 1e-10, "n={}: {} vs {}", n, got.coeffs()[n as usize - 1], expected);
        }
    }
}

#[test]
fn laplacian_examples() {
    let d1 = BoxDomain::interval(PI, 4).unwrap();
    assert_eq!(
        laplacian(&ModalField::single_mode(&d1, &[1], 1.0).unwrap()).coeffs()[0],
        -1.0
    );
    assert_eq!(
        laplacian(&ModalField::single_mode(&d1, &[3], 1.0).unwrap()).coeffs()[2],
        -9.0
    );
    let d2 = BoxDomain::new(&[PI, PI], &[3, 3]).unwrap();
    let f = ModalField::single_mode(&d2, &[1, 2], 1.0).unwrap();
    let idx = d2.flat_index(&[1, 2]).unwrap();
    assert!((laplacian(&f).coeffs()[idx] + 5.0).abs() < 1e-14);
}

#[test]
fn seminorm_and_elliptic_examples() {
    let d = BoxDomain::interval(PI, 4).unwrap();
    let zero = ModalField::zeros(&d);
    for s in 0..=3 {
        assert_eq!(sobolev_seminorm(&zero, s), 0.0);
    }
    let sinx = ModalField::single_mode(&d, &[1], 1.0).unwrap();
    assert!((sobolev_seminorm(&sinx, 3) - (PI / 2.0).sqrt()).abs() < 1e-15);
    assert!((sobolev_seminorm(&sinx.scaled(2.0), 0) - 2.0 * (PI / 2.0).sqrt()).abs() < 1e-15);
    assert_eq!(elliptic_solve(&sinx, 1.0).coeffs(), sinx.coeffs());
    let sin2 = ModalField::single_mode(&d, &[2], 1.0).unwrap();
    assert_eq!(elliptic_solve(&sin2, 4.0).coeffs()[1], 1.0 / 16.0);
    assert_eq!(elliptic_solve(&zero, 3.0).coeffs(), zero.coeffs());
}

#[test]
fn gradient_dot_of_zero_and_symmetry() {
    let d = BoxDomain::new(&[PI, 2.0], &[5, 4]).unwrap();
    let zero = ModalField::zeros(&d);
    let f = GridField::from_fn(&d, true, |x| (x[0]).sin().powi(3) * (PI * x[1] / 2.0).sin()).to_modal();
    let g = GridField::from_fn(&d, true, |x| x[0] * (PI - x[0]) * x[1] * (2.0 - x[1])).to_modal();
    assert!(gradient_dot(&zero, &f, 1.0, true)
        .unwrap()
        .coeffs()
        .iter()
        .all(|&c| c == 0.0));
    let fg = gradient_dot(&f, &g, 0.7, true).unwrap();
    let gf = gradient_dot(&g, &f, 0.7, true).unwrap();
    assert!(max_diff(fg.coeffs(), gf.coeffs()) < 1e-13);
    let other = BoxDomain::interval(PI, 5).unwrap();
    assert!(gradient_dot(&f, &ModalField::zeros(&other), 1.0, true).is_err());
}
