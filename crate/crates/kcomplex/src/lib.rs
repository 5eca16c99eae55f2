//! Perfect matchings in dense `k`-complexes: index lattices, barrier
//! certificates, fractional matchings, nibble rounding, absorption and an
//! end-to-end driver.

pub mod absorbing;
pub mod barrier;
pub mod complex;
pub mod error;
pub mod io;
pub mod lattice;
pub mod lp;
pub mod oracle;
pub mod pipeline;
pub mod rounding;
pub mod scalar;

pub use complex::{
    build_complex, degree_sequences, index_vector, matching_stats, Allocation,
    DegreeSequenceReport, Edge, IndexVector, KComplex, KSystem, Matching, MatchingStats, Partition,
    Vertex, VertexUniverse,
};
pub use error::{Error, Result};
pub use lattice::{IndexLattice, PartiteContext};
pub use pipeline::{decide, run_general, run_theorem711, Certificate, PipelineConfig};
pub use scalar::{Rational, Scalar};

pub type ExactFractionalMatching = lp::FractionalMatching<Rational>;
pub type FractionalMatchingF64 = lp::FractionalMatching<f64>;
pub type FractionalMatchingF32 = lp::FractionalMatching<f32>;
pub type ExactExtraction = lp::Extraction<Rational>;
pub type ExactMatchingStats = MatchingStats<Rational>;
pub type MatchingStatsF64 = MatchingStats<f64>;
