//! Stochastic particle toolkit for homogeneous kinetic equations with linear
//! symmetric binary interactions.
//!
//! The crate covers the full pipeline of the underlying theory at desk
//! scale:
//!
//! - [`sampling`]: counter-based keyed random streams, random coefficients
//!   with exact moments and support bounds, initial-condition sampling;
//! - [`kinetics`]: the mixing rule v' = p v + q v*, admissibility
//!   statistics, the three quasi-invariant scalings, the spectral function
//!   S(s) and the slim/fat tail dichotomy;
//! - [`montecarlo`]: the pairwise interaction scheme (plain and
//!   quasi-invariant), histograms, and ensemble statistics;
//! - [`moments`]: closed-form mean/energy evolution, the RK4 moment
//!   recursion, and the per-vertex graph moment systems;
//! - [`equilibria`]: closed-form limit distributions (inverse gamma,
//!   Gaussian, transported profiles, algebraic tails, the solvable
//!   two-vertex pair);
//! - [`fourier`]: empirical characteristic functions and the s-Fourier
//!   metrics d_s and D_s;
//! - [`graph`]: kinetic dynamics on a finite graph with migration.
//!
//! With the default `parallel` feature the interaction loops run on rayon;
//! disabling it yields a sequential build producing bit-identical results.

pub mod equilibria;
pub mod error;
pub mod fourier;
pub mod graph;
pub mod kinetics;
pub mod math;
pub mod moments;
pub mod montecarlo;
pub mod quadrature;
pub mod sampling;

pub use error::{Error, Result};
