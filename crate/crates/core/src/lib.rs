//! Numerical tools for Schrödinger operators `H_V = H_0 + V` on the rooted
//! binary tree: exact finite-section resolvents, perturbation determinants,
//! discrete spectrum, trace formulas and weighted sum rules.

pub mod conformal;
pub mod determinant;
pub mod error;
#[cfg(test)]
mod properties;
pub mod quadrature;
pub mod radial;
pub mod resolvent;
pub mod spectrum;
pub mod sum_rules;
pub mod traces;
pub mod tree;

pub use conformal::{CosCoeffs, DiskPoint, EnergyPoint, WeightSpec};
pub use error::{Error, Result};
pub use tree::{Potential, VertexId};
