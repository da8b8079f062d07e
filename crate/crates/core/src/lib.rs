//! Convex Tikhonov regularization on finite-dimensional ill-posed problems,
//! with tools for measuring convergence rates, regularity index functions and
//! Kurdyka-Łojasiewicz inequalities along the regularization path.

pub mod error;
pub mod fit;
pub mod index;
pub mod kl;
pub mod lab;
pub mod model;
pub mod penalty;
pub mod regularity;
pub mod solver;

pub use error::{Error, Result};
