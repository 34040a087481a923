//! Seeded Poisson photon counting.
//!
//! Small means use sequential inversion; means of 30 and above use Hörmann's
//! transformed rejection with squeeze (PTRS), which is exact and runs in
//! constant expected time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

const INVERSION_LIMIT: f64 = 30.0;

/// Pulse allocation for one session: Gaussian-pump pulses, then
/// optimised-pump pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingPlan {
    pub pulses_gaussian: u64,
    pub pulses_optimized: u64,
    pub seed: u64,
}

impl CountingPlan {
    pub fn equal_split(pulses_each: u64, seed: u64) -> Self {
        Self { pulses_gaussian: pulses_each, pulses_optimized: pulses_each, seed }
    }
}

/// Gaussian-pump counts `g` and optimised-pump counts `o` from one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountPair {
    pub g: u64,
    pub o: u64,
}

impl CountPair {
    pub fn new(g: u64, o: u64) -> Self {
        Self { g, o }
    }

    pub fn total(&self) -> u64 {
        self.g + self.o
    }
}

/// Generator for substream `stream` of `seed`. Distinct streams never overlap.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one Poisson variate of mean `lambda`.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    assert!(lambda >= 0.0 && lambda.is_finite(), "Poisson mean must be finite and non-negative, got {lambda}");
    if lambda == 0.0 {
        0
    } else if lambda < INVERSION_LIMIT {
        inversion(lambda, rng)
    } else {
        ptrs(lambda, rng)
    }
}

fn inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.gen();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        // cdf can stall just below u once the terms underflow
        if p == 0.0 {
            break;
        }
    }
    k
}

fn ptrs<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * loglam - ln_factorial(k as u64) {
            return k as u64;
        }
    }
}

/// `ln(k!)`: exact table below 10, Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_945_6,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_469,
    ];
    if k < 10 {
        return TABLE[k as usize];
    }
    let x = k as f64 + 1.0;
    let x2 = 1.0 / (x * x);
    let series = (((((-1.0 / 1680.0) * x2 + 1.0 / 1260.0) * x2 - 1.0 / 360.0) * x2) + 1.0 / 12.0) / x;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// A single-owner stream of sessions drawn from one generator.
#[derive(Debug, Clone)]
pub struct CountStream {
    rng: ChaCha8Rng,
}

impl CountStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    /// `G ~ Poisson(rate_g · pulses_gaussian)`, `O ~ Poisson(rate_o · pulses_optimized)`.
    pub fn sample(&mut self, rate_g: f64, rate_o: f64, plan: &CountingPlan) -> CountPair {
        let g = sample_poisson(rate_g * plan.pulses_gaussian as f64, &mut self.rng);
        let o = sample_poisson(rate_o * plan.pulses_optimized as f64, &mut self.rng);
        CountPair { g, o }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// One session drawn from the generator seeded by `plan.seed`.
pub fn sample_counts(rate_g: f64, rate_o: f64, plan: &CountingPlan) -> Result<CountPair> {
    if !(rate_g >= 0.0 && rate_o >= 0.0 && rate_g.is_finite() && rate_o.is_finite()) {
        return invalid(format!("rates must be finite and non-negative, got ({rate_g}, {rate_o})"));
    }
    Ok(CountStream::new(plan.seed).sample(rate_g, rate_o, plan))
}

/// `⟨G + O⟩` over case-B sessions.
pub fn n_ave(pairs: &[CountPair]) -> Result<f64> {
    if pairs.is_empty() {
        return invalid("cannot average an empty list of sessions");
    }
    Ok(pairs.iter().map(|p| p.total() as f64).sum::<f64>() / pairs.len() as f64)
}
