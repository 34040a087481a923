//! Gauss–Hermite product quadrature for overlaps of Gaussian-enveloped fields.
//!
//! Every field in this crate is a polynomial times a (possibly shifted)
//! Gaussian, so the product of three fields is a polynomial times a single
//! Gaussian. Rescaling coordinates to that combined Gaussian makes the
//! Gauss–Hermite rule exact once its order exceeds half the polynomial degree.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest rule order built. Beyond this the outermost Hermite-function
/// values start to underflow during node refinement.
pub const MAX_ORDER: usize = 320;

const MIN_ORDER: usize = 16;
const REFINE_STEP: usize = 16;
const STABLE_TOL: f64 = 1e-12;

/// Nodes and weights for `∫ f(u) exp(-u²) du`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `weights[i] * exp(nodes[i]²)`, the weights for integrating `f(u)` itself.
    pub scaled_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!((1..=MAX_ORDER).contains(&n), "Gauss-Hermite order {n} out of range");
        let mut nodes = vec![0.0; n];
        let mut scaled = vec![0.0; n];
        let half = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..half {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut prev_fn = 0.0;
            for _ in 0..200 {
                let (fn_, fnm1) = hermite_functions(n, z);
                let deriv = (2.0 * nf).sqrt() * fnm1 - z * fn_;
                let dz = fn_ / deriv;
                z -= dz;
                prev_fn = fnm1;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, fnm1) = hermite_functions(n, z);
            let fnm1 = if fnm1 == 0.0 { prev_fn } else { fnm1 };
            let w = 1.0 / (nf * fnm1 * fnm1);
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            scaled[i] = w;
            scaled[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[half - 1] = 0.0;
        }
        // ascending order
        nodes.reverse();
        scaled.reverse();
        let weights = nodes.iter().zip(&scaled).map(|(u, w)| w * (-u * u).exp()).collect();
        Self { nodes, weights, scaled_weights: scaled }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫ f(x) dx` with `x = center + scale·u`, assuming `f` decays like
    /// `exp(-u²)` times a polynomial.
    pub fn integrate<F: Fn(f64) -> f64>(&self, center: f64, scale: f64, f: F) -> f64 {
        scale
            * self
                .nodes
                .iter()
                .zip(&self.scaled_weights)
                .map(|(&u, &w)| w * f(center + scale * u))
                .sum::<f64>()
    }
}

/// Orthonormal Hermite functions `(φ_n(z), φ_{n-1}(z))`.
fn hermite_functions(n: usize, z: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * z * z).exp();
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * z * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Shared, lazily built rule of order `n`.
pub fn gauss_hermite(n: usize) -> Arc<GaussHermite> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(GaussHermite::new(n));
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Gaussian amplitude envelope `exp(-((x-cx)² + (y-cy)²) / (4σ²))`.
/// An infinite `sigma` stands for a flat envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub sigma: f64,
    pub center_x: f64,
    pub center_y: f64,
}

impl Envelope {
    pub fn flat() -> Self {
        Self { sigma: f64::INFINITY, center_x: 0.0, center_y: 0.0 }
    }

    fn curvature(&self) -> f64 {
        if self.sigma.is_infinite() {
            0.0
        } else {
            0.25 / (self.sigma * self.sigma)
        }
    }
}

/// A complex transverse field with a Gaussian envelope.
pub trait Field2d: Sync {
    fn value(&self, x: f64, y: f64) -> Complex64;
    fn envelope(&self) -> Envelope;
    /// Total polynomial degree in `(x, y)` multiplying the envelope.
    fn degree(&self) -> usize;
}

/// Constant field `h ≡ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Field2d for Uniform {
    fn value(&self, _x: f64, _y: f64) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }
    fn envelope(&self) -> Envelope {
        Envelope::flat()
    }
    fn degree(&self) -> usize {
        0
    }
}

/// Wraps a closure as a field with a declared envelope and degree.
pub struct FnField<F> {
    pub f: F,
    pub envelope: Envelope,
    pub degree: usize,
}

impl<F> Field2d for FnField<F>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    fn value(&self, x: f64, y: f64) -> Complex64 {
        (self.f)(x, y)
    }
    fn envelope(&self) -> Envelope {
        self.envelope
    }
    fn degree(&self) -> usize {
        self.degree
    }
}

/// Quadrature order used for a product of total polynomial degree `degree`.
pub fn order_for_degree(degree: usize) -> usize {
    MIN_ORDER.max(degree / 2 + 16).min(MAX_ORDER - REFINE_STEP)
}

/// `∫∫ f(x,y) · g(x,y) · conj(h(x,y)) dx dy`.
///
/// The rule is centred on the combined envelope and refined in steps of
/// 16 nodes until two successive orders agree to `1e-12` of the absolute
/// integrand mass.
pub fn overlap2d(f: &dyn Field2d, g: &dyn Field2d, h: &dyn Field2d) -> Result<Complex64> {
    let envs = [f.envelope(), g.envelope(), h.envelope()];
    let curv: f64 = envs.iter().map(Envelope::curvature).sum();
    if curv <= 0.0 || !curv.is_finite() {
        return Err(Error::InvalidInput(
            "overlap integrand has no decaying Gaussian envelope".into(),
        ));
    }
    let cx = envs.iter().map(|e| e.curvature() * e.center_x).sum::<f64>() / curv;
    let cy = envs.iter().map(|e| e.curvature() * e.center_y).sum::<f64>() / curv;
    let scale = 1.0 / curv.sqrt();

    let degree = f.degree() + g.degree() + h.degree();
    let mut order = order_for_degree(degree);
    let mut previous: Option<Complex64> = None;
    let mut change = f64::INFINITY;
    while order <= MAX_ORDER {
        let (value, mass) = product_rule(f, g, h, order, cx, cy, scale);
        if let Some(prev) = previous {
            change = (value - prev).norm();
            if change <= STABLE_TOL * mass.max(value.norm()) {
                return Ok(value);
            }
        }
        previous = Some(value);
        order += REFINE_STEP;
    }
    Err(Error::NonConvergence { order: order - REFINE_STEP, change })
}

fn product_rule(
    f: &dyn Field2d,
    g: &dyn Field2d,
    h: &dyn Field2d,
    order: usize,
    cx: f64,
    cy: f64,
    scale: f64,
) -> (Complex64, f64) {
    let rule = gauss_hermite(order);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for (&v, &wy) in rule.nodes.iter().zip(&rule.scaled_weights) {
        let y = cy + scale * v;
        for (&u, &wx) in rule.nodes.iter().zip(&rule.scaled_weights) {
            let x = cx + scale * u;
            let term = f.value(x, y) * g.value(x, y) * h.value(x, y).conj() * (wx * wy);
            mass += term.norm();
            sum += term;
        }
    }
    let area = scale * scale;
    (sum * area, mass * area)
}
