//! Camera selection for multi-view reconstruction, treated as a portfolio
//! problem: cameras are assets, delivered resolution is return, and
//! correlated disruptions are market risk. The library picks a selection
//! vector minimizing the variance of total delivered resolution subject to
//! a quality floor and a budget cap, then measures how reliably that
//! selection clears a reconstruction-quality threshold under Monte Carlo
//! disruption replay.
//!
//! Module map:
//! - [`model`]: camera/availability types and the moment quantities
//!   (expected resolution, resolution covariance) the optimizer consumes.
//! - [`optimizer`]: the genetic-algorithm solver, an exhaustive grid oracle
//!   for cross-checking it, baseline strategies, and an independent
//!   feasibility verifier.
//! - [`disruption`]: spatially and temporally correlated availability
//!   sampling (Gaussian copula over an AR(1) latent field, Beta marginals).
//! - [`sim`]: the epoch-level Monte Carlo harness and statistics.
//! - [`scenario`]: the text scenario-file format.
//! - [`report`]: deterministic CSV emission.

pub mod cli;
pub mod disruption;
pub mod model;
pub mod optimizer;
pub mod report;
pub mod scenario;
pub mod seeds;
pub mod sim;
