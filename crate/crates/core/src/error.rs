use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh level {0} out of range [1, 12]")]
    LevelOutOfRange(u32),

    #[error("permittivity exponent m = {0} must be at least 2")]
    InvalidExponent(u32),

    #[error("pseudo-frequency s = {0} must be positive and finite")]
    InvalidFrequency(f64),

    #[error("triangle {id} out of range (mesh has {len} triangles)")]
    TriangleOutOfRange { id: usize, len: usize },

    #[error("non-finite value {value} of interpolated field at node {node}")]
    NonFiniteField { node: usize, value: f64 },

    #[error("point ({x}, {y}) is not on boundary segment {segment:?}")]
    NotOnSegment { segment: crate::mesh::Segment, x: f64, y: f64 },

    #[error("empty mesh")]
    EmptyMesh,

    #[error("non-finite matrix or load entry produced while assembling element {element}")]
    NonFiniteAssembly { element: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("conjugate gradient breakdown at iteration {iteration}: non-positive curvature {curvature:.3e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("negative weight {0} encountered in weighted norm")]
    NegativeWeight(f64),

    #[error("reference norm is zero")]
    ZeroNorm,

    #[error("convergence rate needs positive errors, got {fine} and {coarse}")]
    InvalidRateInput { fine: f64, coarse: f64 },

    #[error("effectivity undefined for zero true error")]
    ZeroTrueError,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("I/O error at {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
