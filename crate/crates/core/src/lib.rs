//! Subwavelength resonator chains with time-modulated material parameters:
//! capacitance matrices, Floquet analysis of the resulting Hill systems and
//! the second-order perturbative description of degenerate edge modes.

pub mod capacitance;
pub mod error;
pub mod floquet;
pub mod geometry;
pub mod hill;
pub mod analysis;
pub mod linalg;
pub mod perturbation;

pub use error::{Error, Result};
