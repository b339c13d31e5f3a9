//! Error type shared by all modules.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("geometry places no target nodes on the lattice (no exit set)")]
    NoBoundaryNodes,

    #[error("point ({0}, {1}) lies outside the grid bounding box")]
    OutOfDomain(f64, f64),

    #[error("field has {found} values but the grid has {expected} nodes")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grids do not share a bounding box or spec")]
    GridMismatch,

    #[error("time step {h} too large: every control foot exits the box at every updated node")]
    StepTooLarge { h: f64 },

    #[error("fixed-point iteration did not converge: {iterations} iterations, residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("auxiliary solve for part {part} did not converge: {iterations} iterations, residual {residual:.3e}")]
    PartNotConverged {
        part: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("unknown problem name `{0}`")]
    UnknownProblem(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unsupported partition: scheme {scheme} with {m} parts")]
    UnsupportedPartition { scheme: String, m: usize },

    #[error("subdomain masks leave {count} nodes uncovered (first: node {first}); raise the error or Lipschitz coefficients")]
    CoverageViolation { count: usize, first: usize },

    #[error("empty field list")]
    EmptyFieldList,

    #[error("no closed-form solution for `{0}`")]
    NoClosedForm(String),

    #[error("missing reference field `{0}`; generate it first (bench --make-refs)")]
    MissingReference(PathBuf),

    #[error("malformed field file: {0}")]
    ParseField(String),

    #[error("invalid arguments: {0}")]
    InvalidArgs(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
