//! Hermite–Gaussian mode algebra, Gaussian point-spread functions and the
//! single- and two-source signal states.

mod hermite;
mod quadrature;

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

pub use hermite::{hermite, scaled_hermite, scaled_hermite_into};
pub use quadrature::{
    gauss_hermite, order_for_degree, overlap2d, Envelope, Field2d, FnField, GaussHermite, Uniform,
    MAX_ORDER,
};

/// HG mode label: `l` is the x-order, `m` the y-order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub l: usize,
    pub m: usize,
}

impl ModeIndex {
    pub const FUNDAMENTAL: ModeIndex = ModeIndex { l: 0, m: 0 };

    pub fn new(l: usize, m: usize) -> Self {
        Self { l, m }
    }

    pub fn order(&self) -> usize {
        self.l + self.m
    }
}

/// Truncated HG basis of width `sigma_p`.
///
/// Built from an l-list and an m-list, the index order is row-major:
/// `(l0,m0), (l0,m1), …, (l1,m0), …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBasis {
    sigma_p: f64,
    indices: Vec<ModeIndex>,
}

impl ModeBasis {
    pub fn new(sigma_p: f64, l_list: &[usize], m_list: &[usize]) -> Result<Self> {
        let indices = l_list
            .iter()
            .flat_map(|&l| m_list.iter().map(move |&m| ModeIndex::new(l, m)))
            .collect();
        Self::from_indices(sigma_p, indices)
    }

    pub fn from_indices(sigma_p: f64, indices: Vec<ModeIndex>) -> Result<Self> {
        if !(sigma_p > 0.0 && sigma_p.is_finite()) {
            return invalid(format!("basis width must be positive, got {sigma_p}"));
        }
        if indices.is_empty() {
            return invalid("mode basis is empty");
        }
        let mut seen = std::collections::HashSet::new();
        for idx in &indices {
            if !seen.insert(*idx) {
                return invalid(format!("duplicate mode ({}, {}) in basis", idx.l, idx.m));
            }
        }
        Ok(Self { sigma_p, indices })
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }

    pub fn indices(&self) -> &[ModeIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, idx: ModeIndex) -> Option<usize> {
        self.indices.iter().position(|&i| i == idx)
    }

    pub fn max_l(&self) -> usize {
        self.indices.iter().map(|i| i.l).max().unwrap_or(0)
    }

    pub fn max_m(&self) -> usize {
        self.indices.iter().map(|i| i.m).max().unwrap_or(0)
    }

    pub fn mode(&self, idx: ModeIndex) -> HgMode {
        HgMode::new(self.sigma_p, idx)
    }
}

/// Normalised HG amplitude `Φ_lm(x, y)` for width `sigma`, centred at the origin.
pub fn hg_amplitude(sigma: f64, idx: ModeIndex, x: f64, y: f64) -> f64 {
    let u = x / (SQRT_2 * sigma);
    let v = y / (SQRT_2 * sigma);
    let envelope = (-(x * x + y * y) / (4.0 * sigma * sigma)).exp();
    scaled_hermite(idx.l, u) * scaled_hermite(idx.m, v) * envelope / ((2.0 * PI).sqrt() * sigma)
}

/// Evaluates basis mode `idx` at `(x, y)`. Any `(l, m)` is accepted, not only
/// members of the basis.
pub fn eval_hg(basis: &ModeBasis, idx: ModeIndex, x: f64, y: f64) -> f64 {
    hg_amplitude(basis.sigma_p, idx, x, y)
}

/// One HG mode as a field, optionally displaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgMode {
    pub sigma: f64,
    pub index: ModeIndex,
    pub center_x: f64,
    pub center_y: f64,
}

impl HgMode {
    pub fn new(sigma: f64, index: ModeIndex) -> Self {
        Self { sigma, index, center_x: 0.0, center_y: 0.0 }
    }

    pub fn shifted(mut self, dx: f64, dy: f64) -> Self {
        self.center_x += dx;
        self.center_y += dy;
        self
    }
}

impl Field2d for HgMode {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(
            hg_amplitude(self.sigma, self.index, x - self.center_x, y - self.center_y),
            0.0,
        )
    }
    fn envelope(&self) -> Envelope {
        Envelope { sigma: self.sigma, center_x: self.center_x, center_y: self.center_y }
    }
    fn degree(&self) -> usize {
        self.index.order()
    }
}

/// Gaussian point-spread amplitude of width `sigma_s` centred at `(center_x, center_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPsf {
    pub sigma_s: f64,
    pub center_x: f64,
    pub center_y: f64,
}

impl GaussianPsf {
    pub fn new(sigma_s: f64, center_x: f64, center_y: f64) -> Result<Self> {
        if !(sigma_s > 0.0 && sigma_s.is_finite()) {
            return invalid(format!("PSF width must be positive, got {sigma_s}"));
        }
        if !(center_x.is_finite() && center_y.is_finite()) {
            return invalid("PSF centre must be finite");
        }
        Ok(Self { sigma_s, center_x, center_y })
    }

    pub fn centered(sigma_s: f64) -> Result<Self> {
        Self::new(sigma_s, 0.0, 0.0)
    }
}

pub fn eval_psf(psf: &GaussianPsf, x: f64, y: f64) -> f64 {
    let dx = x - psf.center_x;
    let dy = y - psf.center_y;
    let s2 = psf.sigma_s * psf.sigma_s;
    (1.0 / (2.0 * PI * s2)).sqrt() * (-(dx * dx + dy * dy) / (4.0 * s2)).exp()
}

impl Field2d for GaussianPsf {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(eval_psf(self, x, y), 0.0)
    }
    fn envelope(&self) -> Envelope {
        Envelope { sigma: self.sigma_s, center_x: self.center_x, center_y: self.center_y }
    }
    fn degree(&self) -> usize {
        0
    }
}

/// Incoherent mixture of Gaussian PSFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    components: Vec<(f64, GaussianPsf)>,
}

impl SignalState {
    /// Weights must be positive and sum to one; all components share one width.
    pub fn new(components: Vec<(f64, GaussianPsf)>) -> Result<Self> {
        if components.is_empty() {
            return invalid("signal state has no components");
        }
        if components.iter().any(|(w, _)| !(*w > 0.0 && w.is_finite())) {
            return invalid("signal weights must be positive");
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("signal weights sum to {total}, expected 1"));
        }
        let sigma = components[0].1.sigma_s;
        if components.iter().any(|(_, p)| p.sigma_s != sigma) {
            return invalid("signal components must share one PSF width");
        }
        Ok(Self { components })
    }

    /// Single source on axis.
    pub fn single(sigma_s: f64) -> Result<Self> {
        Self::new(vec![(1.0, GaussianPsf::centered(sigma_s)?)])
    }

    /// Two equally bright incoherent sources at `±theta_x`.
    pub fn symmetric_pair(sigma_s: f64, theta_x: f64) -> Result<Self> {
        Self::new(vec![
            (0.5, GaussianPsf::new(sigma_s, theta_x, 0.0)?),
            (0.5, GaussianPsf::new(sigma_s, -theta_x, 0.0)?),
        ])
    }

    /// A single source displaced by `theta_x`, the one-directional shift used
    /// to emulate the pair against an antisymmetric pump.
    pub fn one_sided(sigma_s: f64, theta_x: f64) -> Result<Self> {
        Self::new(vec![(1.0, GaussianPsf::new(sigma_s, theta_x, 0.0)?)])
    }

    pub fn components(&self) -> &[(f64, GaussianPsf)] {
        &self.components
    }

    pub fn sigma_s(&self) -> f64 {
        self.components[0].1.sigma_s
    }
}
