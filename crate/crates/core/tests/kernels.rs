use jmgt_core::kernels::{monotonicity_check, soe_fit, strong_positivity_form, KernelFamily};
use jmgt_core::{evaluate, mittag_leffler, KernelError, KernelSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|a| KernelSpec::abel(a).unwrap()),
        (0.1f64..5.0).prop_map(|b| KernelSpec::exponential(b).unwrap()),
        (0.05f64..0.95, 0.1f64..3.0).prop_map(|(a, b)| KernelSpec::regularized_abel(a, b).unwrap()),
        (0.1f64..0.9, 0.0f64..1.0).prop_map(|(a, s)| KernelSpec::mittag_leffler(a, a + s * (1.0 - a)).unwrap()),
        (1.05f64..4.0).prop_map(|p| KernelSpec::polynomial(p).unwrap()),
    ]
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn values_are_finite_and_nonnegative(k in kernel_strategy(), t in 1e-3f64..50.0) {
        let v = evaluate(&k, t).unwrap();
        prop_assert!(v.is_finite() && v >= 0.0, "{} at {}: {}", k.label(), t, v);
    }

    #[test]
    fn assumption_holds_on_random_grids(k in kernel_strategy(), a in 1e-3f64..0.1, b in 1.0f64..20.0) {
        let report = monotonicity_check(&k, &geometric(a, b, 60), 1e-4).unwrap();
        prop_assert!(report.passed, "{}: {:?}", k.label(), report.failures);
    }

    #[test]
    fn unit_mittag_leffler_is_exp(z in -10.0f64..2.0) {
        let e = z.exp();
        prop_assert!((mittag_leffler(1.0, 1.0, z).unwrap() - e).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn out_of_range_parameters_are_rejected(x in 1.0f64..5.0, y in -5.0f64..=0.0) {
        prop_assert!(KernelSpec::abel(x).is_err());
        prop_assert!(KernelSpec::abel(y).is_err());
        prop_assert!(KernelSpec::exponential(y).is_err());
        prop_assert!(KernelSpec::regularized_abel(0.5, y).is_err());
        prop_assert!(KernelSpec::polynomial(1.0 + y / 5.0).is_err());
        prop_assert!(KernelSpec::mittag_leffler(0.5, 0.5 * x).is_err() || x <= 2.0);
        prop_assert!(KernelSpec::mittag_leffler(0.6, 0.5).is_err());
    }

    /// Positivity of the discrete form (η = 0) for signals with `y(0) = 0`.
    #[test]
    fn quadratic_form_is_nonnegative(k in kernel_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0; 65];
        y[1..].iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let dt = 0.05;
        let forms = strong_positivity_form(&k, &y, dt).unwrap();
        let scale: f64 = y.iter().map(|v| v * v).sum::<f64>() * dt;
        prop_assert!(forms.q_kernel >= -1e-10 * scale, "{}: {}", k.label(), forms.q_kernel);
    }
}

#[test]
fn evaluate_examples() {
    let e = KernelSpec::exponential(1.0).unwrap();
    assert!((evaluate(&e, 1e-15).unwrap() - 1.0).abs() < 1e-14);
    assert_eq!(evaluate(&KernelSpec::polynomial(2.0).unwrap(), 1.0).unwrap(), 0.25);
    let abel = evaluate(&KernelSpec::abel(0.5).unwrap(), 1.0).unwrap();
    assert!((abel - 0.564_189_583_547_756_3).abs() < 1e-15);
    assert_eq!(evaluate(&KernelSpec::dirac(), 1.0), Err(KernelError::DiracNotPointwise));
    assert!(matches!(evaluate(&e, 0.0), Err(KernelError::DomainError(_))));
}

#[test]
fn mittag_leffler_examples() {
    assert!((mittag_leffler(1.0, 1.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-14);
    assert_eq!(mittag_leffler(0.5, 1.0, 0.0).unwrap(), 1.0);
    // 200-term series in exact rational arithmetic (mpmath, 30 digits)
    let oracle = 0.136_606_007_391_949_28;
    assert!((mittag_leffler(0.5, 0.5, -1.0).unwrap() - oracle).abs() < 1e-12 * oracle);
    // the α = 1 kernel has a Γ(0) pole and is not constructed
    assert!(KernelSpec::mittag_leffler(1.0, 1.0).is_err());
}

#[test]
fn monotonicity_examples() {
    let grid: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
    let e2 = KernelSpec::exponential(2.0).unwrap();
    assert!(monotonicity_check(&e2, &grid, 1e-4).unwrap().passed);
    let abel = KernelSpec::abel(0.5).unwrap();
    assert!(
        monotonicity_check(&abel, &geometric(0.01, 10.0, 200), 1e-4)
            .unwrap()
            .passed
    );
}

#[test]
fn strong_positivity_examples() {
    let abel = KernelSpec::abel(0.5).unwrap();
    let zero = strong_positivity_form(&abel, &[0.0; 33], 0.1).unwrap();
    assert_eq!((zero.q_kernel, zero.q_exp), (0.0, 0.0));
    let e1 = KernelSpec::exponential(1.0).unwrap();
    let f = strong_positivity_form(&e1, &[1.0; 101], 0.01).unwrap();
    assert_eq!(f.q_kernel, f.q_exp);
    assert!(f.holds(1.0));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut y = vec![0.0; 257];
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        y[1..]
            .iter_mut()
            .for_each(|v| *v = if rng.random::<bool>() { 1.0 } else { -1.0 });
        worst = worst.min(strong_positivity_form(&abel, &y, 0.05).unwrap().q_kernel);
    }
    assert!(worst >= 0.0, "{worst}");
}

#[test]
fn soe_certificates_hold_on_validation_grid() {
    for k in [KernelSpec::abel(0.5).unwrap(), KernelSpec::polynomial(2.0).unwrap()] {
        let fit = soe_fit(&k, 10.0, 1e-3, 1e-6).unwrap();
        assert!(fit.len() <= 40, "{}: {} terms", k.label(), fit.len());
        assert!(fit.weights.iter().all(|&w| w >= 0.0));
        assert!(fit.rates.iter().all(|&r| r > 0.0));
        let achieved = fit.validate(&k, 10_000).unwrap();
        assert!(achieved <= 1e-6, "{}: {achieved:e}", k.label());
        assert!(achieved <= fit.certificate * (1.0 + 1e-9));
    }
    let e3 = soe_fit(&KernelSpec::exponential(3.0).unwrap(), 10.0, 1e-3, 1e-6).unwrap();
    assert_eq!(
        (e3.weights.clone(), e3.rates.clone(), e3.certificate),
        (vec![1.0], vec![3.0], 0.0)
    );
}

#[test]
fn family_reports_parameters() {
    let k = KernelSpec::regularized_abel(0.3, 2.0).unwrap();
    assert_eq!(k.family(), KernelFamily::RegularizedAbel { alpha: 0.3, beta: 2.0 });
}
