//! Numerical tools for the Gelfand-Tsetlin model of unitary representations
//! of `SO(N,1)`: ladder coefficients, `M`-invariant distributions, and
//! coboundary solvers for a single factor and for tensor products.

pub mod coboundary;
pub mod coefficients;
pub mod distributions;
pub mod error;
pub mod gc_lattice;
pub mod operator;
pub mod product;
pub mod rep_params;
pub mod sampling;
pub mod suites;

pub use error::{Result, WeylError};

/// Complex scalars used throughout.
pub type C64 = num_complex::Complex64;
