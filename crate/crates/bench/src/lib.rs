//! Shared fixtures for the criterion benches.

use specconv::data::erdos_renyi;
use specconv::{build_graph_matrix, csr_from_edges, DenseMatrix, GraphMatrixKind, SparseMatrix, Stream};

/// Sparse random graph with mean degree about `degree`, as `S`, plus uniform
/// features.
pub fn fixture(n: usize, degree: f64, feat_dim: usize, kind: GraphMatrixKind) -> (SparseMatrix, DenseMatrix) {
    let mut rng = Stream::new(7);
    let g = erdos_renyi(n, (degree / n as f64).min(1.0), &mut rng);
    let s = build_graph_matrix(&csr_from_edges(&g, false).expect("valid graph"), kind).expect("graph matrix");
    let x = DenseMatrix::random_uniform(n, feat_dim, -1.0, 1.0, &mut rng);
    (s, x)
}
