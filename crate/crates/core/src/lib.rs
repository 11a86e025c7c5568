//! Numerical toolkit for scalar integral functionals `∫ f(x, Du) dx` whose
//! densities satisfy (p,q)-growth conditions.
//!
//! The crate is organised the way an experiment flows:
//!
//! - [`density`]: energy densities `f(x, ξ)` with closed-form ξ-derivatives and
//!   a declared [`GrowthEnvelope`](density::GrowthEnvelope).
//! - [`verify`]: sampling-based measurement of the convexity, growth,
//!   x-regularity and comparison constants of a density.
//! - [`approx`]: the frozen-coefficient approximants `f_h` built from a smooth
//!   partition of unity on a cube lattice, mollification and the diagonal
//!   selection of scales.
//! - [`solve`]: midpoint-rule discrete energies on tensor grids, their exact
//!   gradients, and a nonlinear conjugate-gradient minimizer for Dirichlet
//!   problems.
//! - [`harness`]: config files, experiment pipeline and CSV reports used by the
//!   `pqlab` binary.

pub mod approx;
pub mod density;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod solve;
pub mod verify;

pub use error::{Error, Result};
