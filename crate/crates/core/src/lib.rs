//! Circle patterns with prescribed combinatorics and intersection angles:
//! radius solvers, hyperbolic functionals, layout, discrete conformal maps and
//! electrical-network diagnostics.

pub mod bquad;
pub mod dcmap;
pub mod error;
pub mod euclid;
pub mod harness;
pub mod hyper;
pub mod kernel;
pub mod layout;
pub mod network;
pub mod sparse;

pub use error::{Error, Result};
