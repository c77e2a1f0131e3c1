//! Domain-decomposition subspace neural network solver for PDEs.

pub mod assembly;
pub mod basis;
pub mod cli;
pub mod deriv;
pub mod domain;
pub mod error;
pub mod problems;
pub mod solver;
pub mod training;

pub use error::{Error, Result};
