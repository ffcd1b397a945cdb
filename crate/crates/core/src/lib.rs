//! Travelling-wave homology for scalar reaction-diffusion problems.
//!
//! The crate discretizes the travelling-wave equation
//! `u_tt - c u_t + Δu + f(x, u) = 0` on a point, an interval or a circle,
//! finds the stationary solutions and their Morse indices, computes the
//! index-1 connecting orbits of the resulting (Galerkin-truncated) flow,
//! and assembles the ℤ₂ chain complex whose homology is invariant under
//! changes of the wave speed and admissible changes of the nonlinearity.
//!
//! Module map:
//!
//! * [`model`]: domains, discrete Laplacians, nonlinearities, hypothesis
//!   validators, homotopies and the energy functional.
//! * [`stationary`]: Newton/deflation search for rest points, Morse indices
//!   and hyperbolicity.
//! * [`flow`]: the first-order flow, its linearization, time integration and
//!   spectral flow along trajectories.
//! * [`orbits`]: heteroclinic orbit search (planar shooting and Galerkin
//!   collocation), mod-2 counts, tail rates and continuation counts.
//! * [`homology`]: chain complexes over GF(2), homology, direct sums,
//!   continuation maps and the forcing argument.
//! * [`io`]: problem and experiment files, result persistence and the
//!   stage pipeline used by the `twh` binary.

pub mod error;
pub mod flow;
pub mod homology;
pub mod io;
pub mod linalg;
pub mod model;
pub mod orbits;
pub mod stationary;

pub use error::{Error, Result};
