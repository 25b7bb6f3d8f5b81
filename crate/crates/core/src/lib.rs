//! Heat kernels, Dirichlet eigenvalues, effective resistances and mean exit
//! times of reversible random walks on weighted graphs.

pub mod dirichlet;
pub mod error;
pub mod estimates;
pub mod generators;
pub mod graph;
pub mod io;
pub mod isoperimetry;
pub mod kernel;
pub mod linalg;
pub mod montecarlo;
pub mod potential;
pub mod spectral;
pub mod volume;

pub use error::{Error, Result};
pub use graph::{build_graph, Edge, GraphBuilder, GraphMeta, VertexId, VertexSet, WeightedGraph};
