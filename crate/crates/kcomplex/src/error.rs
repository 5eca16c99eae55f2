use thiserror::Error;

use crate::complex::Vertex;
use crate::lattice::IndexLattice;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("closure violated: {missing} is a subset of {edge} but is not an edge")]
    ClosureViolation { edge: String, missing: String },

    #[error("vertex {0} is not in the universe")]
    BadVertex(String),

    #[error("system is not partite with respect to the given partition: {0}")]
    NotPartite(String),

    #[error("{vector:?} is not a {k}-vector over {r} parts")]
    NotAKVector {
        vector: Vec<i64>,
        k: usize,
        r: usize,
    },

    #[error("allocation is empty")]
    EmptyAllocation,

    #[error("index vector {0:?} does not occur in the allocation")]
    IndexNotInAllocation(Vec<i64>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0:?} is not in the lattice")]
    NotInLattice(Vec<i64>),

    #[error("no decomposition of {target:?} with coefficients bounded by {bound}")]
    BoundTooSmall { target: Vec<i64>, bound: i64 },

    #[error("malformed certificate: {0}")]
    MalformedCert(String),

    #[error("top level is empty")]
    EmptyTopLevel,

    #[error("edge {0} is not a top-level edge")]
    UnknownEdge(String),

    #[error("fractional matchings live on different hosts")]
    MixedHost,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("absorber unavailable: lattice incomplete on partition with {} parts", .partition.len())]
    AbsorberUnavailable {
        partition: Vec<Vec<Vertex>>,
        part_map: Vec<usize>,
        lattice: Box<IndexLattice>,
    },

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("absorption failed: {0}")]
    AbsorptionFailed(String),

    #[error("instance too large for exhaustive search: {size} > {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("unsatisfiable: {0}")]
    Unsatisfiable(String),

    #[error("bad fractional family: {0}")]
    BadFamily(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
