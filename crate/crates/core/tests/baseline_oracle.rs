use modesel_core::baseline::{
    crlb_variance, curvature_integral_closed, curvature_integral_numeric, efficiency_gain, fisher_info,
    fisher_info_numeric, intensity, required_photons, DirectDetectionSpec, FidelityTarget,
};
use proptest::prelude::*;

fn spec(sigma: f64, theta: f64, target: FidelityTarget) -> DirectDetectionSpec {
    DirectDetectionSpec::new(sigma, theta, target).unwrap()
}

/// `∫ I″² / I` by composite Simpson on ±14σ with the analytic second
/// derivative of the Gaussian intensity.
fn simpson_curvature(sigma: f64) -> f64 {
    let n = 200_000usize;
    let half = 14.0 * sigma;
    let h = 2.0 * half / n as f64;
    let f = |x: f64| {
        let s2 = sigma * sigma;
        let d2 = intensity(sigma, x) * (x * x / (s2 * s2) - 1.0 / s2);
        d2 * d2 / intensity(sigma, x)
    };
    let mut acc = f(-half) + f(half);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(-half + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn intensity_is_normalised() {
    let s = simpson_curvature(1.0);
    assert!((s - 2.0).abs() < 1e-10);
    let n = 100_000;
    let h = 40.0 / n as f64;
    let total: f64 = (0..=n).map(|i| intensity(2.0, -20.0 + i as f64 * h)).sum::<f64>() * h;
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn unit_fisher_example() {
    let s = spec(1.0, 1.0, FidelityTarget::P68);
    assert!((fisher_info(&s, 8.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((fisher_info_numeric(&s, 8.0).unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(fisher_info(&spec(1.0, 0.0, FidelityTarget::P68), 8.0).unwrap(), 0.0);
    assert_eq!(fisher_info(&s, 16.0).unwrap(), 2.0 * fisher_info(&s, 8.0).unwrap());
}

#[test]
fn crlb_examples() {
    let s = spec(20.0, 10.0, FidelityTarget::P68);
    assert!((crlb_variance(&s, 100.0).unwrap() - 128.0).abs() < 1e-12);
    assert!((crlb_variance(&s, 200.0).unwrap() - 64.0).abs() < 1e-12);
    let wide = spec(40.0, 10.0, FidelityTarget::P68);
    assert!((crlb_variance(&wide, 100.0).unwrap() / 128.0 - 16.0).abs() < 1e-12);
    assert!(crlb_variance(&spec(20.0, 0.0, FidelityTarget::P68), 100.0).is_err());
    // Var·F = 1
    let f = fisher_info(&s, 100.0).unwrap();
    assert!((crlb_variance(&s, 100.0).unwrap() * f - 1.0).abs() < 1e-14);
}

#[test]
fn required_photon_examples() {
    let n10 = required_photons(&spec(20.0, 10.0, FidelityTarget::P68)).unwrap();
    assert!((n10 - 8.0 * 160_000.0 / (4.8 * 1e4)).abs() < 1e-12);
    assert!((n10 - 26.7).abs() < 0.1);
    let n3 = required_photons(&spec(20.0, 3.0, FidelityTarget::P68)).unwrap();
    assert!((n3 - 3292.0).abs() < 1.0, "{n3}");
    let n95 = required_photons(&spec(20.0, 10.0, FidelityTarget::P95)).unwrap();
    assert!((n95 / n10 - 12.0).abs() < 1e-12);
    let custom = required_photons(&spec(20.0, 10.0, FidelityTarget::Custom(1.0))).unwrap();
    assert!((custom - 128.0).abs() < 1e-12);
}

#[test]
fn efficiency_gain_examples() {
    let s = spec(20.0, 3.0, FidelityTarget::P68);
    let g = efficiency_gain(534.0, &s).unwrap();
    assert!((g - 6.2).abs() < 0.05, "{g}");
    let n = required_photons(&s).unwrap();
    assert!((efficiency_gain(n, &s).unwrap() - 1.0).abs() < 1e-15);
    let half = spec(20.0, 1.5, FidelityTarget::P68);
    assert!((efficiency_gain(534.0, &half).unwrap() / g - 16.0).abs() < 1e-10);
}

#[test]
fn outside_validity_domain_still_computes() {
    let s = spec(20.0, 30.0, FidelityTarget::P68);
    assert!(!s.in_validity_domain());
    assert!(required_photons(&s).unwrap() > 0.0);
    assert!(DirectDetectionSpec::new(-1.0, 1.0, FidelityTarget::P68).is_err());
    assert!(DirectDetectionSpec::new(1.0, 1.0, FidelityTarget::Custom(0.0)).is_err());
}

proptest! {
    #[test]
    fn numeric_curvature_matches_closed_form(sigma in 1.0f64..50.0) {
        let num = curvature_integral_numeric(sigma);
        let closed = curvature_integral_closed(sigma);
        prop_assert!((num / closed - 1.0).abs() < 1e-8, "{num} vs {closed}");
    }

    #[test]
    fn numeric_fisher_matches_closed(sigma in 1.0f64..50.0, frac in 0.01f64..0.99, n in 1.0f64..1e6) {
        let s = spec(sigma, frac * sigma, FidelityTarget::P95);
        let a = fisher_info(&s, n).unwrap();
        let b = fisher_info_numeric(&s, n).unwrap();
        prop_assert!((a / b - 1.0).abs() < 1e-8);
        prop_assert!((a - n * s.theta_x.powi(2) / (8.0 * sigma.powi(4))).abs() <= 1e-14 * a);
    }

    #[test]
    fn simpson_oracle_agrees(sigma in 1.0f64..50.0) {
        let s = simpson_curvature(sigma);
        prop_assert!((s / curvature_integral_closed(sigma) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn inverse_fourth_power_law(sigma in 5.0f64..50.0, theta in 0.1f64..5.0, scale in 1.01f64..4.0) {
        let a = required_photons(&spec(sigma, theta, FidelityTarget::P68)).unwrap();
        let b = required_photons(&spec(sigma, theta * scale, FidelityTarget::P68)).unwrap();
        prop_assert!((a / b / scale.powi(4) - 1.0).abs() < 1e-10);
        prop_assert!(b < a);
        let wider = required_photons(&spec(sigma * scale, theta, FidelityTarget::P68)).unwrap();
        prop_assert!(wider > a);
    }
}
