//! Spectral Galerkin / implicit midpoint solver for the stochastic semiclassical
//! nonlinear Schrödinger equation on the torus, with a Monte Carlo laboratory
//! for strong convergence rates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod lab;
pub mod noise;
pub mod semigroup;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
