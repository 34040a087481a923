//! Pump optimisation under the odd-parity constraint.
//!
//! With only odd-`l` modes the pump is antisymmetric in x, so it never
//! converts the centred single source and converts `ψ(x∓θ)` with equal
//! efficiency. Maximising conversion of the pair then reduces to maximising
//! `|Σ c_j κ_j|²` over unit vectors, solved exactly by the principal
//! eigenvector of `½(κ₊κ₊† + κ₋κ₋†)`. The feedback path emulates the
//! laboratory loop: noisy photon counts driving SPSA ascent.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::modes::{overlap2d, GaussianPsf, HgMode, ModeBasis, ModeIndex, SignalState};
use crate::photon_stats::sample_poisson;
use crate::upconv::{l2_norm, matched_collection_width, reference_amplitude, ConversionKernel, CountModel, PumpProfile};
use crate::{Error, Result};

/// Overlaps are in units of the reference amplitude; below this they are
/// quadrature noise.
const ZERO_AMPLITUDE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub sigma_p: f64,
    pub sigma_s: f64,
    pub sigma_f: f64,
}

impl Geometry {
    /// Collection mode matched to the pump and signal widths.
    pub fn matched(sigma_p: f64, sigma_s: f64) -> Self {
        Self { sigma_p, sigma_s, sigma_f: matched_collection_width(sigma_p, sigma_s) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_p", self.sigma_p), ("sigma_s", self.sigma_s), ("sigma_f", self.sigma_f)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

impl Default for Geometry {
    /// 22.5 μm pump, 20.5 μm signal inside the crystal.
    fn default() -> Self {
        Self::matched(22.5, 20.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Eigen,
    Feedback,
}

/// SPSA schedule: step `a/(k+A)^alpha`, perturbation `c/k^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackParams {
    pub a: f64,
    pub big_a: f64,
    pub c: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub iterations: usize,
    /// Pulses per evaluation in units of `1/eta0`, i.e. photons the aligned
    /// reference would yield. `None` evaluates the expected rate exactly.
    pub shots: Option<f64>,
    pub seed: u64,
    /// Coefficient step below which the loop is declared converged.
    pub tolerance: f64,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        Self {
            a: 0.2,
            big_a: 10.0,
            c: 0.1,
            alpha: 0.602,
            gamma: 0.101,
            iterations: 500,
            shots: Some(1e4),
            seed: 0,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSpec {
    pub l_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub theta_x: f64,
    pub geometry: Geometry,
    pub method: Method,
    pub feedback: FeedbackParams,
}

impl OptimizationSpec {
    /// Twenty modes, `l ∈ {1,3,5,7}`, `m ∈ {0..4}`, eigen method.
    pub fn default_basis(theta_x: f64) -> Self {
        Self {
            l_list: vec![1, 3, 5, 7],
            m_list: vec![0, 1, 2, 3, 4],
            theta_x,
            geometry: Geometry::default(),
            method: Method::Eigen,
            feedback: FeedbackParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.l_list.is_empty() || self.m_list.is_empty() {
            return invalid("mode set is empty");
        }
        if let Some(l) = self.l_list.iter().find(|l| *l % 2 == 0) {
            return invalid(format!("pump x-orders must be odd, got l = {l}"));
        }
        if !(self.theta_x >= 0.0 && self.theta_x.is_finite()) {
            return invalid(format!("theta_x must be non-negative, got {}", self.theta_x));
        }
        let f = &self.feedback;
        if self.method == Method::Feedback {
            if f.shots.is_some_and(|s| !(s >= 1.0)) {
                return invalid("feedback shot budget must be at least 1");
            }
            if !(f.a > 0.0 && f.c > 0.0 && f.big_a >= 0.0) {
                return invalid("feedback gains must be positive");
            }
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<ModeBasis> {
        ModeBasis::new(self.geometry.sigma_p, &self.l_list, &self.m_list)
    }

    fn model(&self) -> CountModel {
        CountModel { sigma_f: self.geometry.sigma_f, ..CountModel::ideal(self.geometry.sigma_p, self.geometry.sigma_s) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub pump: PumpProfile,
    /// Conversion efficiency of `pump` on the pair, relative to the reference.
    pub objective: f64,
    /// Objective estimates per iteration (the single optimum for the eigen path).
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// `κ_j = ⟨Φ_j · ψ(x−θ) · f⟩` in units of the aligned reference amplitude,
/// ordered like the basis.
pub fn overlap_vector(spec: &OptimizationSpec) -> Result<Vec<Complex64>> {
    spec.validate()?;
    signed_overlap_vector(spec, spec.theta_x)
}

fn signed_overlap_vector(spec: &OptimizationSpec, shift: f64) -> Result<Vec<Complex64>> {
    let g = spec.geometry;
    let basis = spec.basis()?;
    let model = spec.model();
    let reference = reference_amplitude(g.sigma_p, g.sigma_s, &model)?;
    let signal = GaussianPsf::new(g.sigma_s, shift, 0.0)?;
    let collection = HgMode::new(g.sigma_f, ModeIndex::FUNDAMENTAL);
    let kappa = basis
        .indices()
        .iter()
        .map(|&idx| overlap2d(&basis.mode(idx), &signal, &collection).map(|a| a / reference))
        .collect::<Result<Vec<_>>>()?;
    let scale = kappa.iter().map(|k| k.norm()).fold(0.0, f64::max);
    for k in &kappa {
        assert!(k.im.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE), "imaginary overlap residue {k}");
    }
    Ok(kappa)
}

/// Global optimum over the spanned subspace.
pub fn optimize_eigen(spec: &OptimizationSpec) -> Result<OptimizationResult> {
    spec.validate()?;
    let plus = signed_overlap_vector(spec, spec.theta_x)?;
    let minus = signed_overlap_vector(spec, -spec.theta_x)?;
    if l2_norm(&plus) <= ZERO_AMPLITUDE && l2_norm(&minus) <= ZERO_AMPLITUDE {
        return Err(Error::Degenerate(format!(
            "overlap vector vanishes at theta_x = {}",
            spec.theta_x
        )));
    }
    let n = plus.len();
    let matrix: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| 0.5 * (plus[i] * plus[j].conj() + minus[i] * minus[j].conj()))
                .collect()
        })
        .collect();
    let (lambda, v) = principal_eigenvector(&matrix);
    let mut coeffs: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
    pin_phase(&mut coeffs);
    let pump = PumpProfile::new(spec.basis()?, coeffs)?.into_optimized();
    Ok(OptimizationResult { pump, objective: lambda, trace: vec![lambda], converged: true })
}

/// Principal eigenpair of a Hermitian positive semidefinite matrix by power
/// iteration. Rank-one inputs converge in a single step.
pub fn principal_eigenvector(matrix: &[Vec<Complex64>]) -> (f64, Vec<Complex64>) {
    let n = matrix.len();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        matrix
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    };
    // Start from the largest column so the iterate is never orthogonal to a
    // nonzero range.
    let col = (0..n)
        .max_by(|&a, &b| matrix[a][a].re.total_cmp(&matrix[b][b].re))
        .unwrap_or(0);
    let mut v: Vec<Complex64> = matrix.iter().map(|row| row[col]).collect();
    let mut norm = l2_norm(&v);
    if norm == 0.0 {
        v = vec![Complex64::new(1.0, 0.0); n];
        norm = l2_norm(&v);
    }
    v.iter_mut().for_each(|z| *z /= norm);
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = apply(&v);
        let wn = l2_norm(&w);
        if wn == 0.0 {
            return (0.0, v);
        }
        let next: Vec<Complex64> = w.iter().map(|z| z / wn).collect();
        // Compare up to global phase.
        let overlap: Complex64 = v.iter().zip(&next).map(|(a, b)| a.conj() * b).sum();
        let delta = 1.0 - overlap.norm();
        v = next;
        let new_lambda = wn;
        let settled = delta.abs() < 1e-15 && (new_lambda - lambda).abs() <= 1e-15 * new_lambda;
        lambda = new_lambda;
        if settled {
            break;
        }
    }
    let mv = apply(&v);
    let rayleigh: Complex64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
    (rayleigh.re, v)
}

/// Rotates the global phase so the first non-negligible coefficient is
/// positive real.
pub fn pin_phase(coeffs: &mut [Complex64]) {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if let Some(first) = coeffs.iter().find(|c| c.norm() > 1e-9 * scale).copied() {
        let rot = first.conj() / first.norm();
        coeffs.iter_mut().for_each(|c| *c *= rot);
        // exact zero imaginary part on the pinned entry
        if let Some(c) = coeffs.iter_mut().find(|c| c.norm() > 1e-9 * scale) {
            *c = Complex64::new(c.norm(), 0.0);
        }
    }
}

/// Noisy SPSA ascent on the counts produced by the optimised pump on the
/// symmetric pair.
///
/// Each evaluation samples `Poisson(shots · rate_total / eta0)` and divides by
/// `shots`, so the measured value is `gain_opt·eta_rel + dark/eta0`. The step
/// gains assume that quantity is of order one, which holds when `gain_opt`
/// sits at the equal-count operating point.
/// Consecutive sub-tolerance steps required before the loop stops.
pub const STALL_WINDOW: usize = 8;

pub fn optimize_feedback(spec: &OptimizationSpec, model: &CountModel) -> Result<OptimizationResult> {
    spec.validate()?;
    model.validate()?;
    if model.eta0 <= 0.0 {
        return invalid("feedback needs a positive eta0");
    }
    let basis = spec.basis()?;
    let pair = SignalState::symmetric_pair(spec.geometry.sigma_s, spec.theta_x)?;
    let model = CountModel { sigma_f: spec.geometry.sigma_f, ..*model };
    let kernel = ConversionKernel::new(&basis, &pair, &model)?;
    let params = spec.feedback;
    let n = basis.len();
    let dark_rel = model.dark_per_pulse / model.eta0;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let measure = |c: &[Complex64], rng: &mut ChaCha8Rng| -> f64 {
        let expected = model.gain_opt * kernel.eta_rel(c) + dark_rel;
        match params.shots {
            Some(shots) => sample_poisson(shots * expected, rng) as f64 / shots,
            None => expected,
        }
    };
    let to_objective = |y: f64| (y - dark_rel) / model.gain_opt;

    let mut current = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let mut best = current.clone();
    let mut best_estimate = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(params.iterations);
    let mut converged = false;
    let mut still = 0;

    for k in 1..=params.iterations {
        let kf = k as f64;
        let ak = params.a / (kf + params.big_a).powf(params.alpha);
        let ck = params.c / kf.powf(params.gamma);
        let delta: Vec<(f64, f64)> = (0..n)
            .map(|_| (sign(rng.gen::<bool>()), sign(rng.gen::<bool>())))
            .collect();
        let perturbed = |s: f64| -> Vec<Complex64> {
            current
                .iter()
                .zip(&delta)
                .map(|(c, (dr, di))| c + s * ck * Complex64::new(*dr, *di))
                .collect()
        };
        let y_plus = measure(&perturbed(1.0), &mut rng);
        let y_minus = measure(&perturbed(-1.0), &mut rng);

        let estimate = to_objective(0.5 * (y_plus + y_minus));
        trace.push(estimate);
        if estimate > best_estimate {
            best_estimate = estimate;
            best.clone_from(&current);
        }

        let diff = (y_plus - y_minus) / (2.0 * ck);
        let mut next: Vec<Complex64> = current
            .iter()
            .zip(&delta)
            .map(|(c, (dr, di))| c + ak * Complex64::new(diff / dr, diff / di))
            .collect();
        let norm = l2_norm(&next);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("feedback iterate collapsed to zero".into()));
        }
        next.iter_mut().for_each(|c| *c /= norm);
        let step = l2_norm(&next.iter().zip(&current).map(|(a, b)| a - b).collect::<Vec<_>>());
        current = next;
        // Tied Poisson counts give an exact zero step.
        still = if step < params.tolerance { still + 1 } else { 0 };
        if still >= STALL_WINDOW {
            converged = true;
            break;
        }
    }

    if params.iterations > 0 {
        let final_estimate = to_objective(measure(&current, &mut rng));
        trace.push(final_estimate);
        if final_estimate >= best_estimate {
            best.clone_from(&current);
        }
    }
    let mut coeffs = best;
    pin_phase(&mut coeffs);
    let objective = kernel.eta_rel(&coeffs);
    let pump = PumpProfile::new(basis, coeffs)?.into_optimized();
    Ok(OptimizationResult { pump, objective, trace, converged })
}

fn sign(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// Dispatches on `spec.method`.
pub fn optimize(spec: &OptimizationSpec, model: &CountModel) -> Result<OptimizationResult> {
    match spec.method {
        Method::Eigen => optimize_eigen(spec),
        Method::Feedback => optimize_feedback(spec, model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mode(theta: f64) -> OptimizationSpec {
        OptimizationSpec { l_list: vec![1], m_list: vec![0], ..OptimizationSpec::default_basis(theta) }
    }

    #[test]
    fn zero_displacement_gives_zero_vector_and_degenerate_eigen() {
        let spec = OptimizationSpec::default_basis(0.0);
        let kappa = overlap_vector(&spec).unwrap();
        assert!(kappa.iter().all(|k| k.norm() < 1e-15));
        assert!(matches!(optimize_eigen(&spec), Err(Error::Degenerate(_))));
    }

    #[test]
    fn first_order_linearity_in_displacement() {
        let k1 = overlap_vector(&single_mode(0.01)).unwrap()[0].re;
        let k2 = overlap_vector(&single_mode(0.02)).unwrap()[0].re;
        assert!((k2 / k1 - 2.0).abs() < 1e-6, "{}", k2 / k1);
    }

    #[test]
    fn one_dimensional_basis() {
        let spec = single_mode(5.0);
        let kappa = overlap_vector(&spec).unwrap();
        let res = optimize_eigen(&spec).unwrap();
        assert_eq!(res.pump.coeffs(), &[Complex64::new(1.0, 0.0)]);
        assert!((res.objective - kappa[0].norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn even_l_is_rejected() {
        let spec = OptimizationSpec { l_list: vec![1, 2], ..OptimizationSpec::default_basis(3.0) };
        assert!(overlap_vector(&spec).is_err());
    }

    #[test]
    fn phase_pinning() {
        let mut c = vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, -2.0), Complex64::new(1.0, 1.0)];
        pin_phase(&mut c);
        assert_eq!(c[1], Complex64::new(2.0, 0.0));
        assert!((c[2] - Complex64::new(-1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let z = Complex64::new(0.0, 0.0);
        let m = vec![
            vec![Complex64::new(1.0, 0.0), z, z],
            vec![z, Complex64::new(3.0, 0.0), z],
            vec![z, z, Complex64::new(2.0, 0.0)],
        ];
        let (l, v) = principal_eigenvector(&m);
        assert!((l - 3.0).abs() < 1e-9);
        assert!((v[1].norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_iterations_return_initial_pump() {
        let mut spec = OptimizationSpec::default_basis(5.0);
        spec.method = Method::Feedback;
        spec.feedback.iterations = 0;
        let model = CountModel::matched(22.5, 20.5);
        let res = optimize_feedback(&spec, &model).unwrap();
        let u = 1.0 / 20f64.sqrt();
        assert!(res.pump.coeffs().iter().all(|c| (c - Complex64::new(u, 0.0)).norm() < 1e-15));
        assert!(res.trace.is_empty());
        assert!(!res.converged);
    }
}
