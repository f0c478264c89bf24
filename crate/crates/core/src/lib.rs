//! Derivative density estimation through the power spectrum of a wave function.
//!
//! Given `N` uniform samples of a phase function `S` on `[0, L]`, the squared
//! magnitude of the scaled DFT of `exp(i S / tau) / sqrt(L)` at
//! `tau = B L / (pi N)` approximates the density of the derivative `S'`.
//! Besides the estimator this crate carries analytic ground truths, a
//! quadrature laboratory for the continuous transform, baseline estimators and
//! a convergence harness.

pub mod baselines;
pub mod cli;
pub mod convergence;
pub mod error;
pub mod fit;
pub mod functions;
pub mod oracle_ft;
pub mod spectrum;
pub mod truth;

pub use error::{Error, Result};
pub use functions::{builtin, AnalyticFunction, SampledFunction};
pub use spectrum::{SpectrumEstimate, WaveField};
