//! Landau and Landau-Fermi-Dirac collision functionals, entropy dissipation
//! versus Fisher information bounds, and a spatially homogeneous solver.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod conv;
pub mod decay;
pub mod dissipation;
pub mod dist;
pub mod error;
pub mod functionals;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
