//! Entropic optimal transport on data-manifold graphs.
//!
//! The Sinkhorn kernel is the graph heat operator `e^{-tL}`, applied with a
//! Chebyshev polynomial filter of the sparse Laplacian so no dense `n x n`
//! kernel is ever formed.

pub mod assignment;
pub mod barycenter;
pub mod bench;
pub mod bessel;
pub mod error;
pub mod graph;
pub mod heat;
pub mod sparse;
pub mod transport;

#[cfg(test)]
pub(crate) mod testutil;

pub use barycenter::{sinkhorn_barycenter, BarycenterResult, DistributionFamily};
pub use error::{Error, Result};
pub use graph::{knn_alpha_decay_graph, laplacian, GraphLaplacian, LaplacianKind, PointCloud};
pub use heat::{build_filter, exact_heat_oracle, HeatFilter, HeatOperator};
pub use sparse::SparseSymMatrix;
pub use transport::{geodesic_sinkhorn, Distribution, SinkhornParams, TransportResult, VertexWeights};
