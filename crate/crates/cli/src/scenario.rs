//! Per-separation pipeline: optimise the pump, derive the count rates under
//! both hypotheses, then estimate fidelity over the budget list.

use modesel_core::classifier::{
    calibrated_threshold, fidelity, n_min, planning_threshold, pulses_for_budget, FidelityEstimate,
    SessionRates, SessionScenario, Threshold,
};
use modesel_core::modes::SignalState;
use modesel_core::photon_stats::substream;
use modesel_core::pump_opt::{optimize, optimize_eigen, Method, OptimizationResult};
use modesel_core::upconv::{calibrated_gain, expected_rate, CountModel, PumpProfile};
use modesel_core::{Complex64, Error};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, ThresholdMode};

/// Optimised pump plus the session rates it produces at one separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operating {
    pub theta_x_um: f64,
    pub optimization: OptimizationResult,
    pub gain_opt: f64,
    pub case_a: SessionRates,
    pub case_b: SessionRates,
    pub selectivity: f64,
    pub r_a: f64,
    pub r_b: f64,
    /// `None` when `R_A ≥ 1` and no budget separates the hypotheses.
    pub n_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_ave_target: f64,
    pub pulses_each: u64,
    pub r_t: f64,
    pub estimate: FidelityEstimate,
}

/// Deterministic seed for one (separation, purpose, index) cell.
pub fn cell_seed(seed: u64, theta_index: usize, purpose: u64, index: u64) -> u64 {
    let stream = ((theta_index as u64) << 40) | (purpose << 32) | index;
    substream(seed, stream).next_u64()
}

pub const PURPOSE_SWEEP: u64 = 1;
pub const PURPOSE_CALIBRATION: u64 = 2;
pub const PURPOSE_BENCHMARK: u64 = 3;
pub const PURPOSE_REPRODUCE: u64 = 4;

/// Gaussian- and optimised-pump rates per pulse on `state`.
fn rates(gaussian: &PumpProfile, pump: &PumpProfile, state: &SignalState, model: &CountModel) -> Result<SessionRates, Error> {
    Ok(SessionRates {
        gaussian: expected_rate(gaussian, state, model)?.rate_total,
        optimized: expected_rate(pump, state, model)?.rate_total,
    })
}

/// Runs the optimiser at `theta_x` and derives the operating point. With no
/// configured gain, the gain is calibrated so that `O_B = G_B` in the full
/// count model.
pub fn operating_point(cfg: &ScenarioConfig, theta_index: usize, theta_x: f64) -> Result<Operating, Error> {
    let spec = cfg.optimization_spec(theta_x);
    let gaussian = PumpProfile::gaussian(cfg.geometry.sigma_p)?;
    let pair = SignalState::symmetric_pair(cfg.geometry.sigma_s, theta_x)?;
    let single = SignalState::single(cfg.geometry.sigma_s)?;
    let neutral = cfg.count_model(1.0);

    let optimization = match spec.method {
        Method::Eigen => optimize_eigen(&spec)?,
        Method::Feedback => {
            let gain = match cfg.count_model.gain_opt {
                Some(g) => g,
                None => {
                    let eigen = optimize_eigen(&spec)?.pump;
                    calibrated_gain(&gaussian, &eigen, &pair, &neutral)?
                }
            };
            let mut spec = spec.clone();
            spec.feedback.seed = cell_seed(spec.feedback.seed, theta_index, 0, 0);
            optimize(&spec, &cfg.count_model(gain))?
        }
    };
    let pump = &optimization.pump;
    let gain_opt = match cfg.count_model.gain_opt {
        Some(g) => g,
        None => calibrated_gain(&gaussian, pump, &pair, &neutral)?,
    };
    let model = cfg.count_model(gain_opt);
    let case_a = rates(&gaussian, pump, &single, &model)?;
    let case_b = rates(&gaussian, pump, &pair, &model)?;
    if !(case_b.optimized > 0.0 && case_b.gaussian > 0.0) {
        return Err(Error::Degenerate("case-B rates vanish".into()));
    }
    let selectivity = case_a.optimized / case_b.optimized;
    let r_a = case_a.expected_ratio();
    let r_b = case_b.expected_ratio();
    let n_min = if r_a < 1.0 { n_min(r_a).ok() } else { None };
    Ok(Operating { theta_x_um: theta_x, optimization, gain_opt, case_a, case_b, selectivity, r_a, r_b, n_min })
}

/// Threshold for the pulse allocation, per the configured mode.
pub fn session_threshold(
    cfg: &ScenarioConfig,
    op: &Operating,
    pulses: u64,
    seed: u64,
) -> Result<Threshold, Error> {
    match cfg.budgets.threshold {
        ThresholdMode::Planning => planning_threshold(&op.case_a, &op.case_b, pulses, pulses),
        ThresholdMode::Calibrated => {
            calibrated_threshold(&op.case_a, &op.case_b, pulses, pulses, cfg.budgets.calibration_sessions, seed)
        }
    }
}

/// Fidelity at one target budget. Zero budgets yield zero pulses and an
/// all-inconclusive estimate.
pub fn fidelity_at(
    cfg: &ScenarioConfig,
    op: &Operating,
    n_ave: f64,
    trials: u64,
    seed: u64,
    calibration_seed: u64,
) -> Result<CurvePoint, Error> {
    let pulses = pulses_for_budget(&op.case_b, n_ave)?;
    let threshold = if pulses == 0 {
        Threshold { r_t: f64::NAN }
    } else {
        session_threshold(cfg, op, pulses, calibration_seed)?
    };
    let scenario = SessionScenario {
        case_a: op.case_a,
        case_b: op.case_b,
        pulses_gaussian: pulses,
        pulses_optimized: pulses,
        threshold,
    };
    let estimate = fidelity(&scenario, trials, seed)?;
    Ok(CurvePoint { n_ave_target: n_ave, pulses_each: pulses, r_t: threshold.r_t, estimate })
}

/// Fidelity curve over the configured budgets.
pub fn fidelity_curve(cfg: &ScenarioConfig, theta_index: usize, op: &Operating) -> Result<Vec<CurvePoint>, Error> {
    cfg.budgets
        .n_ave
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let seed = cell_seed(cfg.seed, theta_index, PURPOSE_SWEEP, j as u64);
            let cal = cell_seed(cfg.seed, theta_index, PURPOSE_CALIBRATION, j as u64);
            fidelity_at(cfg, op, n, cfg.trials, seed, cal)
        })
        .collect()
}

/// Outcome of the budget search for one fidelity target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSearch {
    pub target: f64,
    /// Smallest budget found whose fidelity interval clears the target.
    pub n_ave: Option<f64>,
    pub fidelity: Option<f64>,
    pub capped: bool,
}

/// Bisection in `log N_ave` for the smallest budget whose Wilson lower
/// bound reaches `target`. All candidates share one seed.
pub fn search_budget(
    cfg: &ScenarioConfig,
    op: &Operating,
    target: f64,
    seed: u64,
) -> Result<BudgetSearch, Error> {
    let cal = seed ^ 0x5bd1_e995;
    let clears = |n: f64| -> Result<(bool, f64), Error> {
        let p = fidelity_at(cfg, op, n, cfg.trials, seed, cal)?;
        Ok((p.estimate.ci_lo >= target, p.estimate.fidelity))
    };
    let cap = cfg.benchmark.max_n_ave;
    let (ok, f_cap) = clears(cap)?;
    if !ok {
        return Ok(BudgetSearch { target, n_ave: None, fidelity: Some(f_cap), capped: true });
    }
    let (mut lo, mut hi) = (1.0f64, cap);
    let mut f_hi = f_cap;
    if clears(lo)?.0 {
        return Ok(BudgetSearch { target, n_ave: Some(lo), fidelity: Some(clears(lo)?.1), capped: false });
    }
    for _ in 0..cfg.benchmark.bisection_steps {
        let mid = (lo * hi).sqrt();
        let (ok, f) = clears(mid)?;
        if ok {
            hi = mid;
            f_hi = f;
        } else {
            lo = mid;
        }
        if hi / lo < 1.001 {
            break;
        }
    }
    Ok(BudgetSearch { target, n_ave: Some(hi), fidelity: Some(f_hi), capped: false })
}

/// Real and imaginary parts, for reports.
pub fn split_complex(c: &[Complex64]) -> Vec<[f64; 2]> {
    c.iter().map(|z| [z.re, z.im]).collect()
}

/// Even-mode leakage at which the operating point has `R_A = target`, by
/// bisection. Leakage raises `R_A` monotonically from its dark-count floor
/// toward one.
pub fn calibrate_leak(cfg: &ScenarioConfig, theta_index: usize, theta_x: f64, target: f64) -> Result<f64, Error> {
    let r_a = |leak: f64| -> Result<f64, Error> {
        let mut c = cfg.clone();
        c.count_model.leak_even = leak;
        Ok(operating_point(&c, theta_index, theta_x)?.r_a)
    };
    let floor = r_a(0.0)?;
    if floor >= target {
        return Err(Error::InvalidInput(format!(
            "R_A is already {floor:.4} without leakage, above the target {target:.4}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 0.05f64);
    while r_a(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::InvalidInput(format!("no leakage reaches R_A = {target}")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if r_a(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
