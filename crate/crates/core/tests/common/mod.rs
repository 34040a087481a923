//! Oracles shared by the integration tests. Nothing here calls the
//! Gauss–Hermite machinery under test.
#![allow(dead_code)]

use modesel_core::modes::{eval_hg, eval_psf, GaussianPsf, ModeBasis, ModeIndex};
use modesel_core::Complex64;
use rayon::prelude::*;

/// Uniform grid of `n` points on `[center - half, center + half]`.
pub fn grid(center: f64, half: f64, n: usize) -> (Vec<f64>, f64) {
    let dx = 2.0 * half / (n - 1) as f64;
    ((0..n).map(|i| center - half + i as f64 * dx).collect(), dx)
}

/// Unit-amplitude-normalised centred Gaussian of width `sigma`.
pub fn gaussian(sigma: f64, x: f64, y: f64) -> f64 {
    (1.0 / (2.0 * std::f64::consts::PI * sigma * sigma)).sqrt()
        * (-(x * x + y * y) / (4.0 * sigma * sigma)).exp()
}

/// Trapezoidal `∫∫ f dx dy` on a 2048² grid spanning ±`half` around the origin.
pub fn trapezoid_2d<F: Fn(f64, f64) -> Complex64 + Sync>(half: f64, f: F) -> Complex64 {
    let n = 2048;
    let (xs, dx) = grid(0.0, half, n);
    let sum: Complex64 = xs
        .par_iter()
        .enumerate()
        .map(|(j, &y)| {
            let wy = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let row: Complex64 = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    f(x, y) * wx
                })
                .sum();
            row * wy
        })
        .sum();
    sum * dx * dx
}

/// Dense-grid triple overlap `∫∫ pump · psf · collection` with the pump a
/// superposition of basis modes displaced by `shift_x`.
pub fn grid_triple_overlap(
    basis: &ModeBasis,
    coeffs: &[Complex64],
    shift_x: f64,
    psf: &GaussianPsf,
    sigma_f: f64,
) -> Complex64 {
    let n = 2048;
    let widest = basis.sigma_p().max(psf.sigma_s).max(sigma_f);
    let half = 12.0 * widest + psf.center_x.abs() + shift_x.abs();
    let (xs, dx) = grid(0.0, half, n);
    let sigma = basis.sigma_p();
    let scale = (2.0 * std::f64::consts::PI).sqrt() * sigma;
    let idx = basis.indices();
    let tx: Vec<Vec<f64>> = idx
        .iter()
        .map(|i| xs.iter().map(|&x| eval_hg(basis, ModeIndex::new(i.l, 0), x - shift_x, 0.0) * scale).collect())
        .collect();
    let ty: Vec<Vec<f64>> = idx
        .iter()
        .map(|i| xs.iter().map(|&y| eval_hg(basis, ModeIndex::new(0, i.m), 0.0, y)).collect())
        .collect();
    let sum: Complex64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = xs[j];
            let wy = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let mut row = Complex64::new(0.0, 0.0);
            for (i, &x) in xs.iter().enumerate() {
                let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                let pump: Complex64 = (0..idx.len()).map(|k| coeffs[k] * (tx[k][i] * ty[k][j])).sum();
                row += pump * (eval_psf(psf, x, y) * gaussian(sigma_f, x, y) * wx);
            }
            row * wy
        })
        .sum();
    sum * dx * dx
}

/// Grid-oracle `eta_rel`: leaked, renormalised, misaligned pump against every
/// component of `components`, over the aligned reference.
pub fn grid_eta_rel(
    basis: &ModeBasis,
    coeffs: &[Complex64],
    components: &[(f64, GaussianPsf)],
    sigma_s: f64,
    sigma_f: f64,
    leak: f64,
    misalign: f64,
) -> f64 {
    let mut indices = basis.indices().to_vec();
    let mut c = coeffs.to_vec();
    match indices.iter().position(|i| *i == ModeIndex::FUNDAMENTAL) {
        Some(p) => c[p] += leak,
        None => {
            indices.push(ModeIndex::FUNDAMENTAL);
            c.push(Complex64::new(leak, 0.0));
        }
    }
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|z| *z /= norm);
    let full = ModeBasis::from_indices(basis.sigma_p(), indices).unwrap();
    let fundamental = ModeBasis::new(basis.sigma_p(), &[0], &[0]).unwrap();
    let reference = grid_triple_overlap(
        &fundamental,
        &[Complex64::new(1.0, 0.0)],
        0.0,
        &GaussianPsf::centered(sigma_s).unwrap(),
        sigma_f,
    );
    components
        .iter()
        .map(|(w, psf)| w * grid_triple_overlap(&full, &c, misalign, psf, sigma_f).norm_sqr())
        .sum::<f64>()
        / reference.norm_sqr()
}

/// `H_n(u)` from its explicit coefficients
/// `Σ_k (-1)^k n! / (k! (n-2k)!) (2u)^{n-2k}`.
pub fn hermite_explicit(n: usize, u: f64) -> f64 {
    let fact = |k: usize| (1..=k).fold(1.0f64, |a, b| a * b as f64);
    (0..=n / 2)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * fact(n) / (fact(k) * fact(n - 2 * k)) * (2.0 * u).powi((n - 2 * k) as i32)
        })
        .sum()
}

/// Closed form for `∫∫ Π_i g_i` with `g_i` normalised Gaussians of width
/// `sigma_i` centred at `(c_i, 0)`.
pub fn gaussian_triple_closed(params: [(f64, f64); 3]) -> f64 {
    let pref: f64 = params
        .iter()
        .map(|(s, _)| 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * s))
        .product();
    let a: Vec<f64> = params.iter().map(|(s, _)| 0.25 / (s * s)).collect();
    let asum: f64 = a.iter().sum();
    let ac: f64 = a.iter().zip(&params).map(|(ai, (_, c))| ai * c).sum();
    let ac2: f64 = a.iter().zip(&params).map(|(ai, (_, c))| ai * c * c).sum();
    let x_part = (std::f64::consts::PI / asum).sqrt() * (-(ac2 - ac * ac / asum)).exp();
    let y_part = (std::f64::consts::PI / asum).sqrt();
    pref * x_part * y_part
}
