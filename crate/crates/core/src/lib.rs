//! Gamma kernel density estimation on `[0, ∞)`.
//!
//! The estimator itself is tiny; most of this crate is the machinery needed to
//! study it honestly: exact bias functionals by quadrature, Monte Carlo `L^p`
//! risk with reproducible random streams, the test densities used to probe
//! boundary behaviour at `x = 1`, and experiments that fit convergence rates.

pub mod densities;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod kernel;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod specfun;

pub use error::{Error, Result};
