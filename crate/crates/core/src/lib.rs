//! Numerical kernels for studying regularization by noise in the stochastic
//! heat equation with singular multiplicative space-time noise.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computations: every routine is a deterministic function of its inputs and
//! seeds. File formats, configuration, parallel scheduling and the command
//! line live in the companion `rbnlab` crate.
//!
//! Module map:
//!
//! - [`paths`]: exact fractional Brownian motion on a uniform grid.
//! - [`occupation`]: occupation measures, local times, averaged fields and
//!   the admissible exponent regions.
//! - [`sewing`]: germs, dyadic sewing and Volterra sewing with singular
//!   kernels.
//! - [`spectral`]: Fourier fields on the torus `[0, 2π)`, Sobolev norms and
//!   the heat semigroup.
//! - [`spde`]: singular diffusion coefficients, cut-off mollification, the
//!   exponential Euler scheme and the Monte Carlo checks built on it.
//!
//! Supporting modules: [`fft`], [`quad`], [`rng`], [`stats`], [`ensemble`].
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ensemble;
pub mod error;
pub mod fft;
pub mod occupation;
pub mod profile;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod sewing;
pub mod spde;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
