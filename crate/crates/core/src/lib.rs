//! Optimal control of excitation transfer and keeping in spin chains.
//!
//! The crate propagates `dψ/dt = -i (H₀ + σ(t)(u₁V₁ + u₂V₂)) ψ` exactly under
//! piecewise-constant controls, computes objective values and their adjoint
//! gradients, and drives two optimizers: a projected gradient method with
//! heavy-ball terms and a genetic algorithm over a low-dimensional sine class.

pub mod adjoint;
pub mod artifacts;
pub mod config;
pub mod control;
pub mod error;
pub mod ga;
pub mod linalg;
pub mod model;
pub mod gpm;
pub mod objective;
pub mod par;
pub mod propagator;
pub mod runner;
pub mod robustness;

#[cfg(test)]
pub(crate) mod testing;

pub use error::{Error, Result};
