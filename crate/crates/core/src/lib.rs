//! Mode-selective sum-frequency classification of one versus two closely
//! spaced incoherent point sources.
//!
//! The crate is organised bottom-up:
//!
//! - [`modes`]: Hermite–Gaussian mode algebra, Gaussian PSFs, signal states and
//!   Gauss–Hermite overlap quadrature.
//! - [`upconv`]: pump profiles, the count model, conversion efficiency and
//!   selectivity.
//! - [`pump_opt`]: closed-form (principal eigenvector) and noisy feedback
//!   (SPSA) pump optimisation under the odd-parity constraint.
//! - [`photon_stats`]: seeded Poisson photon counting.
//! - [`classifier`]: the extinction-ratio test, its threshold, the minimum
//!   photon budget and Monte Carlo fidelity.
//! - [`baseline`]: direct-detection Fisher information and required photon
//!   counts.
//!
//! All lengths are in micrometres.

pub mod baseline;
pub mod classifier;
mod error;
pub mod modes;
pub mod photon_stats;
pub mod pump_opt;
pub mod upconv;

pub use error::{Error, Result};
pub use num_complex::Complex64;
