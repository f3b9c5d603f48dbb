use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph is disconnected: vertex {0} is unreachable from vertex 0")]
    DisconnectedGraph(usize),
    #[error("nonpositive weight {value} on {what}")]
    NonpositiveWeight { what: String, value: f64 },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("graph has no boundary vertices")]
    EmptyBoundary,
    #[error("graph has no interior vertices")]
    EmptyInterior,
    #[error("edge {0}-{1} joins two boundary vertices")]
    BoundaryBoundaryEdge(usize, usize),
    #[error("edge {0}-{1} references an unknown vertex")]
    UnknownVertex(usize, usize),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("boundary vertex {vertex} has {count} interior neighbors, expected exactly one")]
    NonuniqueBoundaryNeighbor { vertex: usize, count: usize },
    #[error("boundary vertex {0} has no recorded interior edge weight")]
    MissingBoundaryEdgeWeight(usize),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("boundary data must vanish at t = 0 (max |f(0,z)| = {0:e})")]
    IncompatibleInitialData(f64),
    #[error("horizon T = {0} is too small (need T >= 2)")]
    HorizonTooSmall(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("function is not harmonic (relative residual {0:e})")]
    NotHarmonic(f64),
    #[error("reference has zero norm")]
    ZeroReference,
    #[error("subset cap {0} is below 2")]
    SubsetCapTooSmall(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
