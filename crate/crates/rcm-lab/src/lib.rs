//! Random connection network laboratory.
//!
//! A Poisson point cloud of intensity `rho` is scattered over the unit square
//! (or its torus), and every pair of points at distance `d` is wired
//! independently with probability `g(d / r)`, where `g` is a normalized
//! connection profile and
//!
//! ```text
//! r = sqrt((ln rho + b) / (C rho)),      C = 2 pi INT x g(x) dx
//! ```
//!
//! is the critical scaling radius at offset `b`. At this scaling the number
//! of isolated nodes tends to a Poisson law with mean `exp(-b)`, the
//! no-isolated-node and connectivity probabilities both tend to
//! `exp(-exp(-b))`, and all other components merge into a single unbounded
//! one. The crate provides the pieces needed to check those laws at finite
//! density:
//!
//! - [`geometry`]: the domain, toroidal metric and seeded Poisson sampling;
//! - [`connfn`]: the connection-profile catalogue, its normalization
//!   constant and the critical radius;
//! - [`graph`]: deterministic keyed graph builders (exact and grid-pruned)
//!   plus component statistics;
//! - [`theory`]: limit predictions and exact finite-density integral
//!   formulas for the isolated mean and small-component counts;
//! - [`chenstein`]: computable Poisson-approximation error bounds for the
//!   isolated-node count;
//! - [`montecarlo`]: seeded trial batteries, estimators and convergence
//!   sweeps that tie the above together.
//!
//! Every random draw is addressed by a `(seed, context)` key rather than by
//! position in a shared sequence, so results are reproducible bit for bit
//! across runs and across worker counts.

pub mod chenstein;
pub mod connfn;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod montecarlo;
pub mod quad;
pub mod stats;
pub mod stream;
pub mod theory;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
