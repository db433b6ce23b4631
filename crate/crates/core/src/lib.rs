//! Simulation and verification laboratory for shallow ReLU networks with
//! heavy-tailed weight initialization.
//!
//! The crate has three layers:
//!
//! - **Exact limit objects.** Stable laws in one dimension ([`stable`]),
//!   multivariate stable laws given by discrete spectral measures
//!   ([`spectral`]), and the closed-form spectral measures of the
//!   infinite-width limits of the network outputs and of the rescaled
//!   neural tangent kernel ([`limits`]).
//! - **Finite-width objects.** The network itself with its rescaled forward
//!   pass and gradients ([`network`]), the empirical kernel and its two-part
//!   decomposition ([`kernel`]), and explicit-Euler gradient-flow training
//!   ([`training`]).
//! - **Statistical verification.** Empirical characteristic functions, tail
//!   index estimation, two-sample tests, tail-measure convergence checks,
//!   width sweeps, prefactor calibration, and eigenvalue quantile studies
//!   ([`verify`]), with deterministic parallel replication ([`rng`]) and
//!   plain-text reporting ([`report`]).
//!
//! All randomness flows through [`rng::stream_rng`], so every experiment is
//! reproducible bit-for-bit from a master seed, independent of worker count.

pub mod error;
pub mod kernel;
pub mod limits;
pub mod network;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod stable;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
