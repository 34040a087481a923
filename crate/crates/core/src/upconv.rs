//! Sum-frequency count model.
//!
//! The detected rate for one signal component is proportional to the squared
//! triple overlap of pump, signal and the Gaussian collection mode of the
//! single-mode fibre. Rates are reported relative to the aligned
//! all-Gaussian configuration. Incoherent components add in probability.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::modes::{
    overlap2d, Envelope, Field2d, GaussianPsf, HgMode, ModeBasis, ModeIndex, SignalState,
};
use crate::{Error, Result};

/// Dark-count rate of the reference detector.
pub const DARK_RATE_HZ: f64 = 3.0;
/// Pulse repetition rate of the reference source.
pub const REPETITION_RATE_HZ: f64 = 50.0e6;

const MAX_PUMP_ORDER: usize = 63;
/// Relative efficiencies below this are quadrature noise.
const ZERO_ETA: f64 = 1e-24;

/// Width of the collection mode matched to the Gaussian × Gaussian product.
pub fn matched_collection_width(sigma_p: f64, sigma_s: f64) -> f64 {
    sigma_p * sigma_s / (sigma_p * sigma_p + sigma_s * sigma_s).sqrt()
}

/// Unit-norm pump superposition over a mode basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpProfile {
    basis: ModeBasis,
    coeffs: Vec<Complex64>,
    /// Set for the optimised pump setting, which receives `gain_opt`.
    optimized: bool,
}

impl PumpProfile {
    /// Normalises `coeffs`; fails on a length mismatch or a zero vector.
    pub fn new(basis: ModeBasis, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return invalid(format!(
                "{} coefficients for a {}-mode basis",
                coeffs.len(),
                basis.len()
            ));
        }
        if basis.max_l() > MAX_PUMP_ORDER || basis.max_m() > MAX_PUMP_ORDER {
            return invalid(format!("pump mode order above {MAX_PUMP_ORDER}"));
        }
        let norm = l2_norm(&coeffs);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("pump coefficient vector has zero norm".into()));
        }
        let coeffs = coeffs.into_iter().map(|c| c / norm).collect();
        Ok(Self { basis, coeffs, optimized: false })
    }

    /// The fundamental Gaussian pump of width `sigma_p`.
    pub fn gaussian(sigma_p: f64) -> Result<Self> {
        let basis = ModeBasis::from_indices(sigma_p, vec![ModeIndex::FUNDAMENTAL])?;
        Self::new(basis, vec![Complex64::new(1.0, 0.0)])
    }

    pub fn into_optimized(mut self) -> Self {
        self.optimized = true;
        self
    }

    pub fn is_optimized(&self) -> bool {
        self.optimized
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.coeffs)
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Imperfection and scale parameters of the upconversion detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountModel {
    /// Collection-mode width (μm).
    pub sigma_f: f64,
    /// Detections per pulse for the aligned all-Gaussian configuration.
    pub eta0: f64,
    /// Multiplier applied to the optimised pump setting.
    pub gain_opt: f64,
    /// Dark and background counts per pulse gate.
    pub dark_per_pulse: f64,
    /// Pump centroid error along x (μm).
    pub misalign_x: f64,
    /// Amplitude of spurious fundamental-mode content in the pump.
    pub leak_even: f64,
}

impl CountModel {
    /// Matched collection mode, detector dark counts only.
    pub fn matched(sigma_p: f64, sigma_s: f64) -> Self {
        Self {
            sigma_f: matched_collection_width(sigma_p, sigma_s),
            eta0: 1e-4,
            gain_opt: 1.0,
            dark_per_pulse: DARK_RATE_HZ / REPETITION_RATE_HZ,
            misalign_x: 0.0,
            leak_even: 0.0,
        }
    }

    /// Same as [`CountModel::matched`] without dark counts.
    pub fn ideal(sigma_p: f64, sigma_s: f64) -> Self {
        Self { dark_per_pulse: 0.0, ..Self::matched(sigma_p, sigma_s) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return invalid(format!("sigma_f must be positive, got {}", self.sigma_f));
        }
        if !(self.eta0 >= 0.0 && self.eta0.is_finite()) {
            return invalid(format!("eta0 must be non-negative, got {}", self.eta0));
        }
        if !(self.gain_opt > 0.0 && self.gain_opt.is_finite()) {
            return invalid(format!("gain_opt must be positive, got {}", self.gain_opt));
        }
        if !(self.dark_per_pulse >= 0.0 && self.dark_per_pulse.is_finite()) {
            return invalid(format!(
                "dark_per_pulse must be non-negative, got {}",
                self.dark_per_pulse
            ));
        }
        if !self.misalign_x.is_finite() || !self.leak_even.is_finite() {
            return invalid("misalign_x and leak_even must be finite");
        }
        Ok(())
    }

    fn collection_mode(&self) -> HgMode {
        HgMode::new(self.sigma_f, ModeIndex::FUNDAMENTAL)
    }
}

/// Pump field after even-mode leakage and misalignment.
#[derive(Debug, Clone)]
pub struct PumpField {
    sigma: f64,
    indices: Vec<ModeIndex>,
    coeffs: Vec<Complex64>,
    shift_x: f64,
    max_l: usize,
    max_m: usize,
}

impl PumpField {
    /// The pump as delivered: `normalize(pump + leak·HG00)` displaced by the
    /// misalignment.
    pub fn effective(pump: &PumpProfile, model: &CountModel) -> Result<Self> {
        let (indices, coeffs) = leaked_coeffs(pump.basis(), pump.coeffs(), model.leak_even)?;
        Ok(Self::from_parts(pump.basis().sigma_p(), indices, coeffs, model.misalign_x))
    }

    pub fn ideal(pump: &PumpProfile) -> Self {
        Self::from_parts(
            pump.basis().sigma_p(),
            pump.basis().indices().to_vec(),
            pump.coeffs().to_vec(),
            0.0,
        )
    }

    fn from_parts(sigma: f64, indices: Vec<ModeIndex>, coeffs: Vec<Complex64>, shift_x: f64) -> Self {
        let max_l = indices.iter().map(|i| i.l).max().unwrap_or(0);
        let max_m = indices.iter().map(|i| i.m).max().unwrap_or(0);
        Self { sigma, indices, coeffs, shift_x, max_l, max_m }
    }
}

impl Field2d for PumpField {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        let mut hx = [0.0; MAX_PUMP_ORDER + 1];
        let mut hy = [0.0; MAX_PUMP_ORDER + 1];
        let xs = x - self.shift_x;
        let s = self.sigma;
        crate::modes::scaled_hermite_into(xs / (std::f64::consts::SQRT_2 * s), &mut hx[..=self.max_l]);
        crate::modes::scaled_hermite_into(y / (std::f64::consts::SQRT_2 * s), &mut hy[..=self.max_m]);
        let envelope = (-(xs * xs + y * y) / (4.0 * s * s)).exp()
            / ((2.0 * std::f64::consts::PI).sqrt() * s);
        let sum: Complex64 = self
            .indices
            .iter()
            .zip(&self.coeffs)
            .map(|(i, c)| c * (hx[i.l] * hy[i.m]))
            .sum();
        sum * envelope
    }

    fn envelope(&self) -> Envelope {
        Envelope { sigma: self.sigma, center_x: self.shift_x, center_y: 0.0 }
    }

    fn degree(&self) -> usize {
        self.indices.iter().map(ModeIndex::order).max().unwrap_or(0)
    }
}

/// Adds `leak·HG00` to a coefficient vector and renormalises. The fundamental
/// mode is appended to the index list when the basis lacks it.
fn leaked_coeffs(
    basis: &ModeBasis,
    coeffs: &[Complex64],
    leak: f64,
) -> Result<(Vec<ModeIndex>, Vec<Complex64>)> {
    let mut indices = basis.indices().to_vec();
    let mut out = coeffs.to_vec();
    if leak != 0.0 {
        let pos = match basis.position(ModeIndex::FUNDAMENTAL) {
            Some(p) => p,
            None => {
                indices.push(ModeIndex::FUNDAMENTAL);
                out.push(Complex64::new(0.0, 0.0));
                out.len() - 1
            }
        };
        out[pos] += leak;
    }
    let norm = l2_norm(&out);
    if !(norm > 0.0) {
        return Err(Error::Degenerate("leakage cancels the pump entirely".into()));
    }
    out.iter_mut().for_each(|c| *c /= norm);
    Ok((indices, out))
}

/// `∫∫ g_p · g_s · conj(f)` for centred fundamentals: the aligned reference.
pub fn reference_amplitude(sigma_p: f64, sigma_s: f64, model: &CountModel) -> Result<Complex64> {
    let pump = HgMode::new(sigma_p, ModeIndex::FUNDAMENTAL);
    let signal = GaussianPsf::centered(sigma_s)?;
    overlap2d(&pump, &signal, &model.collection_mode())
}

/// Conversion efficiency relative to the aligned all-Gaussian reference.
pub fn eta_rel(pump: &PumpProfile, state: &SignalState, model: &CountModel) -> Result<f64> {
    model.validate()?;
    let field = PumpField::effective(pump, model)?;
    let reference = reference_amplitude(pump.basis().sigma_p(), state.sigma_s(), model)?;
    assert!(reference.norm() > 0.0, "reference overlap vanished for positive widths");
    let collection = model.collection_mode();
    let mut total = 0.0;
    for (weight, psf) in state.components() {
        let amp = overlap2d(&field, psf, &collection)?;
        total += weight * amp.norm_sqr();
    }
    Ok(total / reference.norm_sqr())
}

/// Expected detections per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rate_signal: f64,
    pub rate_total: f64,
    pub eta_rel: f64,
}

pub fn expected_rate(pump: &PumpProfile, state: &SignalState, model: &CountModel) -> Result<RateReport> {
    let eta = eta_rel(pump, state, model)?;
    Ok(rate_from_eta(eta, pump.is_optimized(), model))
}

pub(crate) fn rate_from_eta(eta: f64, optimized: bool, model: &CountModel) -> RateReport {
    let gain = if optimized { model.gain_opt } else { 1.0 };
    let rate_signal = model.eta0 * gain * eta;
    RateReport { rate_signal, rate_total: rate_signal + model.dark_per_pulse, eta_rel: eta }
}

/// `S = O_A / O_B`: expected optimised-pump counts (dark included) on the
/// single source over those on the symmetric pair at `±theta_x`.
pub fn selectivity(pump: &PumpProfile, model: &CountModel, sigma_s: f64, theta_x: f64) -> Result<f64> {
    if !(theta_x > 0.0) {
        return invalid(format!("theta_x must be positive, got {theta_x}"));
    }
    let o_a = expected_rate(pump, &SignalState::single(sigma_s)?, model)?.rate_total;
    let b = expected_rate(pump, &SignalState::symmetric_pair(sigma_s, theta_x)?, model)?;
    let o_b = b.rate_total;
    if o_b <= 0.0 || (b.eta_rel < ZERO_ETA && model.dark_per_pulse == 0.0) {
        return Err(Error::Degenerate("expected O_B is zero".into()));
    }
    Ok(o_a / o_b)
}

/// Gain that equalises the optimised- and Gaussian-pump counts on `state`.
pub fn calibrated_gain(
    gaussian: &PumpProfile,
    optimized: &PumpProfile,
    state: &SignalState,
    model: &CountModel,
) -> Result<f64> {
    let g = eta_rel(gaussian, state, model)?;
    let o = eta_rel(optimized, state, model)?;
    if o < ZERO_ETA {
        return Err(Error::Degenerate("optimised pump does not convert the signal".into()));
    }
    Ok(g / o)
}

/// Precomputed per-mode overlaps for fast repeated efficiency evaluation.
///
/// Conversion is linear in the pump coefficients, so
/// `eta_rel(c) = Σ_k w_k |Σ_j c̃_j K_kj|²` where `c̃` is the leaked, normalised
/// coefficient vector and `K_kj` the overlap of misaligned mode `j` with
/// component `k`, in units of the reference amplitude.
#[derive(Debug, Clone)]
pub struct ConversionKernel {
    basis_len: usize,
    leak_pos: Option<usize>,
    padded_len: usize,
    leak: f64,
    weights: Vec<f64>,
    rows: Vec<Vec<Complex64>>,
}

impl ConversionKernel {
    pub fn new(basis: &ModeBasis, state: &SignalState, model: &CountModel) -> Result<Self> {
        model.validate()?;
        let mut indices = basis.indices().to_vec();
        let leak_pos = if model.leak_even != 0.0 {
            Some(basis.position(ModeIndex::FUNDAMENTAL).unwrap_or_else(|| {
                indices.push(ModeIndex::FUNDAMENTAL);
                indices.len() - 1
            }))
        } else {
            None
        };
        let reference = reference_amplitude(basis.sigma_p(), state.sigma_s(), model)?;
        let collection = model.collection_mode();
        let mut rows = Vec::with_capacity(state.components().len());
        for (_, psf) in state.components() {
            let row = indices
                .iter()
                .map(|&idx| {
                    let mode = HgMode::new(basis.sigma_p(), idx).shifted(model.misalign_x, 0.0);
                    overlap2d(&mode, psf, &collection).map(|a| a / reference)
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self {
            basis_len: basis.len(),
            leak_pos,
            padded_len: indices.len(),
            leak: model.leak_even,
            weights: state.components().iter().map(|(w, _)| *w).collect(),
            rows,
        })
    }

    /// Efficiency of the pump with coefficients `coeffs` (any norm).
    pub fn eta_rel(&self, coeffs: &[Complex64]) -> f64 {
        assert_eq!(coeffs.len(), self.basis_len, "coefficient length mismatch");
        let norm = l2_norm(coeffs);
        if norm == 0.0 {
            return 0.0;
        }
        let mut eff = Vec::with_capacity(self.padded_len);
        eff.extend(coeffs.iter().map(|c| c / norm));
        eff.resize(self.padded_len, Complex64::new(0.0, 0.0));
        if let Some(p) = self.leak_pos {
            eff[p] += self.leak;
        }
        let eff_norm2: f64 = eff.iter().map(|c| c.norm_sqr()).sum();
        if eff_norm2 == 0.0 {
            return 0.0;
        }
        let total: f64 = self
            .rows
            .iter()
            .zip(&self.weights)
            .map(|(row, w)| {
                let amp: Complex64 = row.iter().zip(&eff).map(|(k, c)| k * c).sum();
                w * amp.norm_sqr()
            })
            .sum();
        total / eff_norm2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SP: f64 = 22.5;
    const SS: f64 = 20.5;

    fn odd_pump() -> PumpProfile {
        let basis = ModeBasis::new(SP, &[1, 3], &[0, 2]).unwrap();
        let c = vec![
            Complex64::new(0.8, 0.0),
            Complex64::new(-0.1, 0.2),
            Complex64::new(0.3, 0.0),
            Complex64::new(0.05, -0.1),
        ];
        PumpProfile::new(basis, c).unwrap()
    }

    #[test]
    fn pump_is_normalised() {
        let p = odd_pump();
        assert!((p.norm() - 1.0).abs() < 1e-12);
        let basis = ModeBasis::new(SP, &[1], &[0]).unwrap();
        assert!(PumpProfile::new(basis.clone(), vec![Complex64::new(0.0, 0.0)]).is_err());
        assert!(PumpProfile::new(basis, vec![]).is_err());
    }

    #[test]
    fn aligned_gaussian_is_the_reference() {
        let model = CountModel::ideal(SS, SS);
        let pump = PumpProfile::gaussian(SS).unwrap();
        let eta = eta_rel(&pump, &SignalState::single(SS).unwrap(), &model).unwrap();
        assert!((eta - 1.0).abs() < 1e-12, "{eta}");
    }

    #[test]
    fn odd_pump_does_not_convert_centred_source() {
        let model = CountModel::ideal(SP, SS);
        let eta = eta_rel(&odd_pump(), &SignalState::single(SS).unwrap(), &model).unwrap();
        assert!(eta.abs() < 1e-12, "{eta}");
    }

    #[test]
    fn dark_only_rates() {
        let mut model = CountModel::ideal(SP, SS);
        model.dark_per_pulse = 6e-8;
        let r = expected_rate(&odd_pump(), &SignalState::single(SS).unwrap(), &model).unwrap();
        assert!(r.rate_signal.abs() < 1e-16);
        assert!((r.rate_total - 6e-8).abs() < 1e-20);
        assert!((DARK_RATE_HZ / REPETITION_RATE_HZ - 6e-8).abs() < 1e-22);
    }

    #[test]
    fn rate_is_product_of_scales() {
        let model = CountModel { eta0: 1e-3, dark_per_pulse: 0.0, ..CountModel::ideal(SP, SS) };
        let r = rate_from_eta(0.5, false, &model);
        assert!((r.rate_signal - 5e-4).abs() < 1e-18);
        assert_eq!(r.rate_total, r.rate_signal);
        let boosted = CountModel { gain_opt: 3.0, ..model };
        assert!((rate_from_eta(0.5, true, &boosted).rate_signal - 1.5e-3).abs() < 1e-18);
        assert!((rate_from_eta(0.5, false, &boosted).rate_signal - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn ideal_odd_pump_has_zero_selectivity() {
        let model = CountModel::ideal(SP, SS);
        let s = selectivity(&odd_pump().into_optimized(), &model, SS, 5.0).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pump_with_dark_counts_has_unit_selectivity() {
        // HG(0,1) is odd in y and converts neither state.
        let basis = ModeBasis::new(SP, &[0], &[1]).unwrap();
        let pump = PumpProfile::new(basis, vec![Complex64::new(1.0, 0.0)]).unwrap();
        let model = CountModel::matched(SP, SS);
        let s = selectivity(&pump, &model, SS, 5.0).unwrap();
        assert!((s - 1.0).abs() < 1e-9, "{s}");
        let ideal = CountModel::ideal(SP, SS);
        assert!(matches!(selectivity(&pump, &ideal, SS, 5.0), Err(Error::Degenerate(_))));
        assert!(selectivity(&pump, &model, SS, 0.0).is_err());
    }

    #[test]
    fn kernel_matches_direct_evaluation() {
        let model = CountModel { leak_even: 0.07, misalign_x: 1.3, ..CountModel::matched(SP, SS) };
        let pump = odd_pump();
        for state in [
            SignalState::single(SS).unwrap(),
            SignalState::symmetric_pair(SS, 4.0).unwrap(),
            SignalState::one_sided(SS, -6.0).unwrap(),
        ] {
            let direct = eta_rel(&pump, &state, &model).unwrap();
            let kernel = ConversionKernel::new(pump.basis(), &state, &model).unwrap();
            let fast = kernel.eta_rel(pump.coeffs());
            assert!((direct - fast).abs() <= 1e-12 * direct.max(1e-6), "{direct} vs {fast}");
        }
    }

    #[test]
    fn calibrated_gain_equalises_pair_counts() {
        let model = CountModel::matched(SP, SS);
        let gauss = PumpProfile::gaussian(SP).unwrap();
        let opt = odd_pump().into_optimized();
        let pair = SignalState::symmetric_pair(SS, 5.0).unwrap();
        let gain = calibrated_gain(&gauss, &opt, &pair, &model).unwrap();
        let tuned = CountModel { gain_opt: gain, ..model };
        let g = expected_rate(&gauss, &pair, &tuned).unwrap().rate_total;
        let o = expected_rate(&opt, &pair, &tuned).unwrap().rate_total;
        assert!((g - o).abs() < 1e-12 * g);
    }
}
