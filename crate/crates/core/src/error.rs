use thiserror::Error;

use crate::graph::VertexId;

/// Errors raised by graph construction and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("edge list is empty")]
    EmptyGraph,
    #[error("graph is disconnected: vertex {0} is unreachable from vertex 0")]
    DisconnectedGraph(VertexId),
    #[error("edge ({0}, {1}) has non-positive or non-finite weight {2}")]
    NonPositiveWeight(VertexId, VertexId, f64),
    #[error("edge ({0}, {1}) listed with conflicting weights {2} and {3}")]
    ConflictingWeight(VertexId, VertexId, f64, f64),
    #[error("self-loop at vertex {0} but self-loops are disabled")]
    SelfLoop(VertexId),
    #[error("vertex {0} out of range for a graph with {1} vertices")]
    VertexOutOfRange(VertexId, usize),
    #[error("inner radius {0} exceeds outer radius {1}")]
    RadiusOrder(usize, usize),
    #[error("size parameter too small: {0}")]
    SizeTooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid block weight sequence: {0}")]
    BadWeightSequence(String),
    #[error("radius/time {requested} exceeds the exactness horizon {horizon} at vertex {vertex}")]
    HorizonExceeded {
        vertex: VertexId,
        requested: usize,
        horizon: usize,
    },
    #[error("source vertex {0} is not in the set")]
    SourceOutsideSet(VertexId),
    #[error("set covers the whole graph; the killed walk never exits")]
    AbsorbingSet,
    #[error("vertex set is empty")]
    EmptySet,
    #[error("set is the whole graph")]
    WholeGraph,
    #[error("sets intersect at vertex {0}")]
    SetsIntersect(VertexId),
    #[error("no admissible potential separates the sets")]
    NoSeparation,
    #[error("value {requested} lies beyond the computed exit profile (max {available})")]
    BeyondProfile { requested: f64, available: f64 },
    #[error("exhaustive enumeration would exceed {0} subsets")]
    BudgetTooLarge(usize),
    #[error("bad constants: {0}")]
    BadConstants(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("graph file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
