use num_complex::Complex64;
use thiserror::Error;

use crate::tree::VertexId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed vertex ({depth}, {index}): index must lie in [1, 2^depth]")]
    MalformedVertex { depth: u32, index: u64 },

    #[error("vertex {vertex} lies deeper than the declared support depth {support_depth}")]
    OutsideSupport {
        vertex: VertexId,
        support_depth: u32,
    },

    #[error("energy {0} lies on the band [-2√2, 2√2]")]
    OnBand(Complex64),

    #[error("ζ = 0 has no finite energy image")]
    ZeroDiskPoint,

    #[error("disk point {0} is outside the closed unit disk or at a band edge")]
    InvalidDiskPoint(Complex64),

    #[error("radius {0} outside (0, 1]")]
    InvalidRadius(f64),

    #[error("weight has odd trigonometric content (sine coefficient {0:e})")]
    OddWeight(f64),

    #[error("weight takes the negative value {value:e} at θ = {theta}")]
    NegativeWeight { theta: f64, value: f64 },

    #[error("polynomial has a nonzero odd coefficient at degree {0}")]
    OddPolynomial(usize),

    #[error("resolvent has a pole at ζ = {0}")]
    Pole(Complex64),

    #[error("ball depth {ball} is smaller than the required depth {required}")]
    InsufficientDepth { ball: u32, required: u32 },

    #[error("factorization ratio vanishes at ζ = {0}")]
    VanishingRatio(Complex64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
