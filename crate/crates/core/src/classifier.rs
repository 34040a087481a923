//! Extinction-ratio test between the single-source (A) and two-source (B)
//! hypotheses.
//!
//! Each session counts photons with the Gaussian pump (`G`) and the optimised
//! pump (`O`). The statistic is `R = O/G` with shot-noise error
//! `ΔR = R·sqrt((O+G)/(O·G))`. A session is called A when `R < R_t` and B
//! otherwise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::photon_stats::{substream, CountPair, CountStream, CountingPlan};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

const FIDELITY_CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub r: f64,
    pub dr: f64,
    pub valid: bool,
}

impl RatioEstimate {
    const INVALID: Self = Self { r: f64::NAN, dr: f64::NAN, valid: false };

    /// Ratio from (possibly fractional) expected counts.
    pub fn from_expected(g: f64, o: f64) -> Self {
        if !(g > 0.0 && o > 0.0) {
            return Self::INVALID;
        }
        let r = o / g;
        Self { r, dr: r * ((o + g) / (o * g)).sqrt(), valid: true }
    }
}

pub fn ratio(counts: CountPair) -> RatioEstimate {
    if counts.g == 0 || counts.o == 0 {
        return RatioEstimate::INVALID;
    }
    RatioEstimate::from_expected(counts.g as f64, counts.o as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub r_t: f64,
}

fn require_valid(ra: &RatioEstimate, rb: &RatioEstimate) -> Result<()> {
    if !ra.valid || !rb.valid {
        return invalid("ratio estimate is invalid (zero counts)");
    }
    Ok(())
}

/// `R_t = (R_A + R_B + ΔR_A − ΔR_B) / 2`.
pub fn threshold(ra: &RatioEstimate, rb: &RatioEstimate) -> Result<Threshold> {
    require_valid(ra, rb)?;
    Ok(Threshold { r_t: 0.5 * (ra.r + rb.r + ra.dr - rb.dr) })
}

/// `R_A + ΔR_A < R_B − ΔR_B`, strictly.
pub fn discriminable(ra: &RatioEstimate, rb: &RatioEstimate) -> Result<bool> {
    require_valid(ra, rb)?;
    Ok(ra.r + ra.dr < rb.r - rb.dr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    A,
    B,
    Inconclusive,
}

pub fn classify(counts: CountPair, t: &Threshold) -> Verdict {
    let est = ratio(counts);
    if !est.valid {
        Verdict::Inconclusive
    } else if est.r < t.r_t {
        Verdict::A
    } else {
        Verdict::B
    }
}

/// Minimum total photon count at which the shot-noise bands separate, at the
/// `G_B = O_B` operating point:
/// `N_min = 2(√2 + √(R_A(1+R_A)))² / (R_A − 1)²`.
pub fn n_min(r_a: f64) -> Result<f64> {
    if !(r_a >= 0.0 && r_a.is_finite()) {
        return invalid(format!("R_A must be finite and non-negative, got {r_a}"));
    }
    if r_a == 1.0 {
        return Err(Error::Singular("N_min diverges at R_A = 1".into()));
    }
    // 2(√2 + s)² expanded so that R_A = 0 gives exactly 4
    let s = (r_a * (1.0 + r_a)).sqrt();
    let num = 4.0 + 4.0 * std::f64::consts::SQRT_2 * s + 2.0 * r_a * (1.0 + r_a);
    Ok(num / ((r_a - 1.0) * (r_a - 1.0)))
}

/// The `R_A ∈ [0, 1)` with `n_min(R_A) = n`, by bisection. Requires `n ≥ 4`.
pub fn invert_n_min(n: f64) -> Result<f64> {
    if !(n >= 4.0 && n.is_finite()) {
        return invalid(format!("N_min below 4 is unattainable, got {n}"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if n_min(mid)? < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pick = if (n_min(lo)? - n).abs() <= (n_min(hi).unwrap_or(f64::INFINITY) - n).abs() { lo } else { hi };
    Ok(pick)
}

/// Per-pulse expected rates under one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionRates {
    pub gaussian: f64,
    pub optimized: f64,
}

impl SessionRates {
    pub fn expected_counts(&self, pulses_gaussian: u64, pulses_optimized: u64) -> (f64, f64) {
        (self.gaussian * pulses_gaussian as f64, self.optimized * pulses_optimized as f64)
    }

    pub fn expected_ratio(&self) -> f64 {
        self.optimized / self.gaussian
    }
}

/// Everything a Monte Carlo session needs: rates under both hypotheses, the
/// pulse allocation and the decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionScenario {
    pub case_a: SessionRates,
    pub case_b: SessionRates,
    pub pulses_gaussian: u64,
    pub pulses_optimized: u64,
    pub threshold: Threshold,
}

/// Equal pulse split giving `⟨G_B + O_B⟩ ≈ n_ave`.
pub fn pulses_for_budget(case_b: &SessionRates, n_ave: f64) -> Result<u64> {
    let per_pulse = case_b.gaussian + case_b.optimized;
    if !(n_ave >= 0.0 && n_ave.is_finite()) {
        return invalid(format!("photon budget must be non-negative, got {n_ave}"));
    }
    if !(per_pulse > 0.0) {
        return Err(Error::Degenerate("case-B rates are zero".into()));
    }
    Ok((n_ave / per_pulse).round() as u64)
}

/// Threshold from expected counts (planning mode).
pub fn planning_threshold(
    case_a: &SessionRates,
    case_b: &SessionRates,
    pulses_gaussian: u64,
    pulses_optimized: u64,
) -> Result<Threshold> {
    let (ga, oa) = case_a.expected_counts(pulses_gaussian, pulses_optimized);
    let (gb, ob) = case_b.expected_counts(pulses_gaussian, pulses_optimized);
    threshold(&RatioEstimate::from_expected(ga, oa), &RatioEstimate::from_expected(gb, ob))
}

/// Threshold from the mean counts of `sessions` sampled calibration sessions
/// per hypothesis (experiment-emulation mode).
pub fn calibrated_threshold(
    case_a: &SessionRates,
    case_b: &SessionRates,
    pulses_gaussian: u64,
    pulses_optimized: u64,
    sessions: u64,
    seed: u64,
) -> Result<Threshold> {
    if sessions == 0 {
        return invalid("calibration needs at least one session");
    }
    let plan = CountingPlan { pulses_gaussian, pulses_optimized, seed };
    let mean = |rates: &SessionRates, stream: u64| {
        let mut s = CountStream::from_rng(substream(seed, stream));
        let (mut g, mut o) = (0u64, 0u64);
        for _ in 0..sessions {
            let c = s.sample(rates.gaussian, rates.optimized, &plan);
            g += c.g;
            o += c.o;
        }
        (g as f64 / sessions as f64, o as f64 / sessions as f64)
    };
    let (ga, oa) = mean(case_a, 0);
    let (gb, ob) = mean(case_b, 1);
    threshold(&RatioEstimate::from_expected(ga, oa), &RatioEstimate::from_expected(gb, ob))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub fidelity: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: u64,
    pub correct: u64,
    pub inconclusive: u64,
    /// Empirical `⟨G_B + O_B⟩` over the case-B sessions, if any ran.
    pub n_ave: Option<f64>,
}

#[derive(Default)]
struct Tally {
    correct: u64,
    inconclusive: u64,
    b_sessions: u64,
    b_photons: u64,
}

/// Probability of a correct call with ground truth drawn A/B with
/// probability ½ each. Inconclusive sessions count as wrong. Trials are
/// split into fixed chunks with their own substreams, so the estimate does
/// not depend on the number of worker threads.
pub fn fidelity(scenario: &SessionScenario, trials: u64, seed: u64) -> Result<FidelityEstimate> {
    if trials == 0 {
        return invalid("fidelity needs at least one trial");
    }
    let plan = CountingPlan {
        pulses_gaussian: scenario.pulses_gaussian,
        pulses_optimized: scenario.pulses_optimized,
        seed,
    };
    let chunks = trials.div_ceil(FIDELITY_CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let n = FIDELITY_CHUNK.min(trials - chunk * FIDELITY_CHUNK);
            let mut stream = CountStream::from_rng(substream(seed, chunk));
            let mut t = Tally::default();
            for _ in 0..n {
                let truth_b = stream.rng().gen_bool(0.5);
                let rates = if truth_b { &scenario.case_b } else { &scenario.case_a };
                let counts = stream.sample(rates.gaussian, rates.optimized, &plan);
                let verdict = classify(counts, &scenario.threshold);
                match (verdict, truth_b) {
                    (Verdict::Inconclusive, _) => t.inconclusive += 1,
                    (Verdict::B, true) | (Verdict::A, false) => t.correct += 1,
                    _ => {}
                }
                if truth_b {
                    t.b_sessions += 1;
                    t.b_photons += counts.total();
                }
            }
            t
        })
        .reduce(Tally::default, |a, b| Tally {
            correct: a.correct + b.correct,
            inconclusive: a.inconclusive + b.inconclusive,
            b_sessions: a.b_sessions + b.b_sessions,
            b_photons: a.b_photons + b.b_photons,
        });
    let (ci_lo, ci_hi) = wilson_interval(tally.correct, trials, Z_95);
    Ok(FidelityEstimate {
        fidelity: tally.correct as f64 / trials as f64,
        ci_lo,
        ci_hi,
        trials,
        correct: tally.correct,
        inconclusive: tally.inconclusive,
        n_ave: (tally.b_sessions > 0).then(|| tally.b_photons as f64 / tally.b_sessions as f64),
    })
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}
