//! Recovery of interior vertex weights of a weighted graph from Neumann
//! boundary spectral data, via the boundary control method for the discrete
//! wave equation.

pub mod error;
pub mod graph;
pub mod laplacian;
pub mod wave;
pub mod spectral_nd;
pub mod control;
pub mod reconstruct;
pub mod pipeline;

pub use error::{Error, Result};
