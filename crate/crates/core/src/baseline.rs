//! Direct-detection benchmark.
//!
//! For two incoherent sources at `±θ` imaged with a Gaussian PSF of width
//! `σ`, the Fisher information for `θ` from `N` detected photons is
//! `F = (Nθ²/16) ∫ I″²/I dx`, and `∫ I″²/I dx = 2/σ⁴`. The variance floor
//! used for the comparison is `8σ⁴/(θ²N)`. A target fidelity maps to a
//! variance budget `k·θ²` (`k = 4.8` for 68 %, `k = 0.4` for 95 %).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::modes::gauss_hermite;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityTarget {
    P68,
    P95,
    Custom(f64),
}

impl FidelityTarget {
    /// Variance budget in units of `θ²`.
    pub fn variance_factor(&self) -> f64 {
        match self {
            FidelityTarget::P68 => 4.8,
            FidelityTarget::P95 => 0.4,
            FidelityTarget::Custom(k) => *k,
        }
    }

    pub fn fidelity(&self) -> Option<f64> {
        match self {
            FidelityTarget::P68 => Some(0.68),
            FidelityTarget::P95 => Some(0.95),
            FidelityTarget::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectDetectionSpec {
    pub sigma: f64,
    pub theta_x: f64,
    pub target: FidelityTarget,
}

impl DirectDetectionSpec {
    pub fn new(sigma: f64, theta_x: f64, target: FidelityTarget) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {sigma}"));
        }
        if !(theta_x >= 0.0 && theta_x.is_finite()) {
            return invalid(format!("theta_x must be non-negative, got {theta_x}"));
        }
        if !(target.variance_factor() > 0.0) {
            return invalid("variance factor must be positive");
        }
        Ok(Self { sigma, theta_x, target })
    }

    /// The small-separation expansion holds for `0 < θ < σ`.
    pub fn in_validity_domain(&self) -> bool {
        self.theta_x > 0.0 && self.theta_x < self.sigma
    }

    fn warn_outside_domain(&self) {
        if !self.in_validity_domain() {
            log::warn!(
                "theta_x = {} outside the small-separation domain (0, {})",
                self.theta_x,
                self.sigma
            );
        }
    }
}

/// 1-D intensity of the Gaussian PSF, `|ψ(x)|²`.
pub fn intensity(sigma: f64, x: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// `∫ I″(x)² / I(x) dx` evaluated numerically: `I″` by an eighth-order
/// central difference, the integral by Gauss–Hermite quadrature matched to
/// the intensity envelope.
pub fn curvature_integral_numeric(sigma: f64) -> f64 {
    const STENCIL: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    let h = sigma / 64.0;
    let second = |x: f64| {
        let mut acc = STENCIL[0] * intensity(sigma, x);
        for (k, c) in STENCIL.iter().enumerate().skip(1) {
            let dx = k as f64 * h;
            acc += c * (intensity(sigma, x + dx) + intensity(sigma, x - dx));
        }
        acc / (h * h)
    };
    let rule = gauss_hermite(64);
    rule.integrate(0.0, std::f64::consts::SQRT_2 * sigma, |x| {
        let d2 = second(x);
        d2 * d2 / intensity(sigma, x)
    })
}

pub fn curvature_integral_closed(sigma: f64) -> f64 {
    2.0 / sigma.powi(4)
}

/// `F = N θ² / (8 σ⁴)` (1/μm²).
pub fn fisher_info(spec: &DirectDetectionSpec, n: f64) -> Result<f64> {
    check_photons(n)?;
    spec.warn_outside_domain();
    Ok(n * spec.theta_x * spec.theta_x / 16.0 * curvature_integral_closed(spec.sigma))
}

/// Same as [`fisher_info`] with the curvature integral done numerically.
pub fn fisher_info_numeric(spec: &DirectDetectionSpec, n: f64) -> Result<f64> {
    check_photons(n)?;
    spec.warn_outside_domain();
    Ok(n * spec.theta_x * spec.theta_x / 16.0 * curvature_integral_numeric(spec.sigma))
}

fn check_photons(n: f64) -> Result<()> {
    if !(n > 0.0 && n.is_finite()) {
        return invalid(format!("photon count must be positive, got {n}"));
    }
    Ok(())
}

/// `Var[θ] ≥ 8σ⁴ / (θ² N)` (μm²).
pub fn crlb_variance(spec: &DirectDetectionSpec, n: f64) -> Result<f64> {
    check_photons(n)?;
    if !(spec.theta_x > 0.0) {
        return invalid("theta_x must be positive for the variance bound");
    }
    spec.warn_outside_domain();
    Ok(8.0 * spec.sigma.powi(4) / (spec.theta_x * spec.theta_x * n))
}

/// Photons needed for the bound to reach `k·θ²`: `N = 8σ⁴ / (k θ⁴)`.
pub fn required_photons(spec: &DirectDetectionSpec) -> Result<f64> {
    if !(spec.theta_x > 0.0) {
        return invalid("theta_x must be positive");
    }
    spec.warn_outside_domain();
    Ok(8.0 * spec.sigma.powi(4) / (spec.target.variance_factor() * spec.theta_x.powi(4)))
}

/// How many times more photons direct detection needs than `experimental_n`.
pub fn efficiency_gain(experimental_n: f64, spec: &DirectDetectionSpec) -> Result<f64> {
    check_photons(experimental_n)?;
    Ok(required_photons(spec)? / experimental_n)
}
