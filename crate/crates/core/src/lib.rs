//! Fine-grained downlink analysis of LEO satellite constellations modelled as a
//! homogeneous Poisson point process on a sphere.
//!
//! The crate computes the moments of the conditional coverage probability
//! `P_s(θ)` (the probability, over fading only, that the SIR at a typical user
//! exceeds `θ` for a fixed constellation), fits a beta distribution to the first
//! two moments to approximate its CCDF (the SIR meta distribution), and ships a
//! seeded Monte Carlo simulator that serves as an independent oracle.
//!
//! Module map:
//!
//! * [`geometry`]: cap, distances and visibility on the satellite sphere.
//! * [`special`]: Gauss-Chebyshev rules, incomplete gamma/beta, combinatorics.
//! * [`analytic`]: conditional coverage, moments, variance, beta fit.
//! * [`simulator`]: Poisson constellations and per-realization coverage.
//! * [`cli`]: the `leo-meta` command-line front end.

pub mod analytic;
pub mod cli;
mod error;
pub mod geometry;
pub mod simulator;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{DerivedGeometry, SystemConfig};
