//! Multi-agent target tracking on the unit sphere.
//!
//! A second-order flock chases a prescribed target on S². The crate provides
//! the building blocks in layers:
//!
//! * [`geom`]: sphere-constrained vector algebra and the admissible family of
//!   rotation operators (the regularized transport `P` and the classical
//!   Rodrigues rotation);
//! * [`dynamics`]: the target system and the multi-agent tracking system with
//!   full-information or zero extra control, optional rotational flocking and
//!   radial feedback;
//! * [`frame`]: the co-moving rigid frame of the target and the equivalent
//!   structural system living in it;
//! * [`analysis`]: energy, the six-dimensional and per-agent weighted
//!   linearized systems, closed-form spectra with a numeric cross-check, and
//!   rendezvous metrics;
//! * [`flatspace`]: the Euclidean comparison model with its closed-form
//!   tracking solution;
//! * [`sim`]: fixed-step RK4 integration, diagnostics, decomposition
//!   cross-checks and parameter sweeps;
//! * [`validate`]: the named check suites behind the command-line validator.

// Integrator kernels index flat state vectors and fixed-size matrices in
// lockstep; explicit loops keep the layout visible.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod dynamics;
pub mod flatspace;
pub mod frame;
pub mod geom;
pub mod rng;
pub mod sim;
pub mod validate;
