//! Shared fixtures for the kernel benchmarks.

use bethe_core::{Potential, VertexId};
use num_complex::Complex64;

/// Uniform random potential on the ball of the given depth, amplitude 2.
pub fn fixture(depth: u32) -> Potential {
    Potential::random(depth as u64, depth, 2.0, None)
}

/// An interior disk point away from the real axis.
pub fn interior_point() -> Complex64 {
    Complex64::new(0.35, 0.4)
}

/// The root-to-leaf vertex on the left edge of a ball.
pub fn left_leaf(depth: u32) -> VertexId {
    VertexId::new(depth, 1).expect("valid vertex")
}
