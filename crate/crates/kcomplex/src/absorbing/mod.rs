//! Closed partitions, absorbing families and the final absorption step.

mod absorber;
mod reach;

pub use absorber::{
    absorb, build_absorber, AbsorberAudit, AbsorberConfig, AbsorberState, AbsorbingSet, Absorption,
    Reserve,
};
pub use reach::{
    closed_partition, reachable_neighborhood, ClosedPartition, ClosureParams, Neighborhood,
    PartWitness, ReachEstimate, ReachabilityParams,
};

use crate::complex::{Edge, KSystem, Vertex};
use crate::oracle::{perfect_matching_within, MAX_PM_CAP};

/// A perfect matching of `H[vertices]`, if one exists and the set is small
/// enough to search.
pub(crate) fn local_pm(sys: &KSystem, vertices: &[Vertex]) -> Option<Vec<Edge>> {
    let k = sys.k();
    if vertices.is_empty() {
        return Some(Vec::new());
    }
    if !vertices.len().is_multiple_of(k) || vertices.len() > MAX_PM_CAP {
        return None;
    }
    let edges = sys.top_within(vertices);
    perfect_matching_within(&edges, vertices, k, MAX_PM_CAP)
        .ok()
        .flatten()
        .map(|m| m.edges().to_vec())
}
