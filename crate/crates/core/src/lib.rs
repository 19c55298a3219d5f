//! Numerical laboratory for Carleman-weighted energy estimates of the
//! stochastic wave equation
//!
//!   dy_t - Laplace(y) dt = (a1 y_t + a2 . grad y + a3 y + f) dt
//!                          + (a4 y + g) dw(t)
//!
//! on space-time cylinders over an interval, rectangle or disk, with
//! homogeneous Dirichlet boundary data. The crate provides
//!
//! * analytic domain geometry (radial bounds, observed boundary part,
//!   admissible coupling and horizon windows),
//! * the Carleman weight family theta = exp(lambda(|x - x0|^2 - c (t - T/2)^2))
//!   with its coefficient functions and a lattice positivity certifier,
//! * a pointwise multiplier-identity laboratory (deterministic and
//!   Brownian-driven residual checks, pointwise inequality scans),
//! * an explicit stochastic solver for the wave system with counter-based
//!   reproducible noise,
//! * integrated Carleman and observability budgets with empirical constants,
//! * a config-driven CLI producing CSV reports and plot scripts.

pub mod config;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod grid;
pub mod identity;
pub mod numerics;
pub mod profile;
pub mod report;
pub mod rng;
pub mod runner;
pub mod spde;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{DomainSpec, GeometryReport, Shape};
