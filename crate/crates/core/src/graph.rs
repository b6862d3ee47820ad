//! Graphs, canonical CSR matrices and the graph matrices used as the
//! propagation operator `S`.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Edge list over `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub undirected: bool,
}

impl Graph {
    pub fn undirected(n: usize, edges: Vec<(usize, usize)>) -> Self {
        Graph { n, edges, undirected: true }
    }

    /// Path graph 0 - 1 - ... - (n-1).
    pub fn path(n: usize) -> Self {
        Graph::undirected(n, (1..n).map(|v| (v - 1, v)).collect())
    }

    /// Validates endpoints and returns the edge set in canonical form
    /// (`u < v` for undirected graphs), sorted.
    pub fn canonical_edges(&self) -> Result<Vec<(usize, usize)>> {
        let mut seen = HashSet::with_capacity(self.edges.len());
        let mut out = Vec::with_capacity(self.edges.len());
        for &(u, v) in &self.edges {
            if u >= self.n || v >= self.n {
                return Err(Error::Construction(format!("edge ({u}, {v}) out of range for n = {}", self.n)));
            }
            let e = if self.undirected && u > v { (v, u) } else { (u, v) };
            if !seen.insert(e) {
                return Err(Error::Construction(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            out.push(e);
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Compressed sparse row matrix in canonical form: column indices strictly
/// increasing within each row.
///
/// Graph matrices are square; rectangular instances are used for sparse node
/// feature blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from raw CSR arrays, checking every canonical-form invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 {
            return Err(Error::Construction("row_ptr must have length n+1 and start at 0".into()));
        }
        if row_ptr[n_rows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::Construction("row_ptr[n] must equal nnz".into()));
        }
        for r in 0..n_rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(Error::Construction("row_ptr must be non-decreasing".into()));
            }
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Construction(format!("row {r}: column indices not strictly increasing")));
            }
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::Construction(format!("row {r}: column index out of range")));
            }
        }
        Ok(SparseMatrix { n_rows, n_cols, row_ptr, col_idx, values })
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trip: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = trip.iter().find(|&&(r, c, _)| r >= n_rows || c >= n_cols) {
            return Err(Error::Construction(format!("entry ({r}, {c}) out of range")));
        }
        trip.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::from_csr(n_rows, n_cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        SparseMatrix { n_rows: n, n_cols: n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Sparse copy of a dense matrix (exact zeros dropped).
    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(d.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..d.rows() {
            for (j, &v) in d.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { n_rows: d.rows(), n_cols: d.cols(), row_ptr, col_idx, values }
    }

    /// Node count of a square matrix.
    pub fn n(&self) -> usize {
        self.n_rows
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of row `r` as (column, value).
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row_entries(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row_entries(r) {
                trip.push((c, r, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, trip).expect("transpose of canonical CSR")
    }

    /// Same sparsity pattern, values replaced entry-wise.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[p] = f(r, self.col_idx[p], self.values[p]);
            }
        }
        out
    }

    /// Entry-wise `self + c * other` (union of patterns).
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::shape("SparseMatrix::add_scaled", "dimension mismatch"));
        }
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            trip.extend(self.row_entries(r).map(|(col, v)| (r, col, v)));
            trip.extend(other.row_entries(r).map(|(col, v)| (r, col, c * v)));
        }
        Self::from_triplets(self.n_rows, self.n_cols, trip)
    }
}

/// Which graph matrix to build from an adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GraphMatrixKind {
    /// `I - L = D^-1/2 A D^-1/2`
    AdjNorm,
    /// `L = I - D^-1/2 A D^-1/2`
    Lap,
    /// `L - I`
    LapShifted,
    /// `2L / lambda_star - I`
    LapScaled { lambda_star: f64 },
    /// Renormalized adjacency with self loops, `D^-1/2 (A + I) D^-1/2`.
    AdjRenorm,
    /// `L / 2`
    LapHalf,
}

impl GraphMatrixKind {
    pub fn lap_scaled_default() -> Self {
        GraphMatrixKind::LapScaled { lambda_star: 2.0 }
    }

    pub fn parse(name: &str, lambda_star: f64) -> Result<Self> {
        Ok(match name {
            "adj-norm" => GraphMatrixKind::AdjNorm,
            "lap" => GraphMatrixKind::Lap,
            "lap-shifted" => GraphMatrixKind::LapShifted,
            "lap-scaled" => GraphMatrixKind::LapScaled { lambda_star },
            "adj-renorm" => GraphMatrixKind::AdjRenorm,
            "lap-half" => GraphMatrixKind::LapHalf,
            other => return Err(Error::param(format!("unknown graph matrix '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GraphMatrixKind::AdjNorm => "adj-norm",
            GraphMatrixKind::Lap => "lap",
            GraphMatrixKind::LapShifted => "lap-shifted",
            GraphMatrixKind::LapScaled { .. } => "lap-scaled",
            GraphMatrixKind::AdjRenorm => "adj-renorm",
            GraphMatrixKind::LapHalf => "lap-half",
        }
    }
}

/// Canonical CSR adjacency with unit weights; undirected edges are mirrored.
pub fn csr_from_edges(graph: &Graph, add_self_loops: bool) -> Result<SparseMatrix> {
    let edges = graph.canonical_edges()?;
    let mut trip = Vec::with_capacity(2 * edges.len() + graph.n);
    let mut seen = HashSet::with_capacity(2 * edges.len());
    for (u, v) in edges {
        if !seen.insert((u, v)) {
            return Err(Error::Construction(format!("duplicate edge ({u}, {v})")));
        }
        trip.push((u, v, 1.0));
        if graph.undirected && u != v {
            if !seen.insert((v, u)) {
                return Err(Error::Construction(format!("duplicate edge ({v}, {u})")));
            }
            trip.push((v, u, 1.0));
        }
    }
    if add_self_loops {
        for i in 0..graph.n {
            if seen.contains(&(i, i)) {
                return Err(Error::Construction(format!("self loop ({i}, {i}) already present")));
            }
            trip.push((i, i, 1.0));
        }
    }
    SparseMatrix::from_triplets(graph.n, graph.n, trip)
}

/// Row sums.
pub fn degree_vector(a: &SparseMatrix) -> Vec<f64> {
    (0..a.n_rows()).map(|r| a.row_entries(r).map(|(_, v)| v).sum()).collect()
}

/// `D^-1/2 A D^-1/2` with `D^-1/2 = 0` on zero-degree nodes.
fn sym_normalize(a: &SparseMatrix) -> SparseMatrix {
    let inv_sqrt: Vec<f64> = degree_vector(a).into_iter().map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    a.map_values(|r, c, v| inv_sqrt[r] * v * inv_sqrt[c])
}

/// Builds the requested graph matrix from adjacency `a`.
pub fn build_graph_matrix(a: &SparseMatrix, kind: GraphMatrixKind) -> Result<SparseMatrix> {
    if !a.is_square() {
        return Err(Error::shape("build_graph_matrix", "adjacency must be square"));
    }
    let n = a.n();
    let eye = SparseMatrix::identity(n);
    let adj_norm = || sym_normalize(a);
    match kind {
        GraphMatrixKind::AdjNorm => Ok(adj_norm()),
        GraphMatrixKind::Lap => eye.add_scaled(-1.0, &adj_norm()),
        GraphMatrixKind::LapShifted => SparseMatrix::zeros(n).add_scaled(-1.0, &adj_norm()),
        GraphMatrixKind::LapScaled { lambda_star } => {
            if !(lambda_star > 0.0 && lambda_star <= 2.0) {
                return Err(Error::param(format!("lambda_star must lie in (0, 2], got {lambda_star}")));
            }
            let lap = eye.add_scaled(-1.0, &adj_norm())?;
            let scale = 2.0 / lambda_star;
            lap.map_values(|_, _, v| scale * v).add_scaled(-1.0, &eye)
        }
        GraphMatrixKind::AdjRenorm => Ok(sym_normalize(&a.add_scaled(1.0, &eye)?)),
        GraphMatrixKind::LapHalf => {
            let lap = eye.add_scaled(-1.0, &adj_norm())?;
            Ok(lap.map_values(|_, _, v| 0.5 * v))
        }
    }
}

/// Row-wise CSR product `S * H`. Rows are independent, and each row sums its
/// stored entries in ascending column order, so the result does not depend on
/// the number of threads.
pub fn spmm(s: &SparseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    if s.n_cols() != h.rows() {
        return Err(Error::shape("spmm", format!("{}x{} times {:?}", s.n_rows(), s.n_cols(), h.shape())));
    }
    let c = h.cols();
    let mut out = DenseMatrix::zeros(s.n_rows(), c);
    if c == 0 {
        return Ok(out);
    }
    let row_kernel = |(r, o_row): (usize, &mut [f64])| {
        for (col, v) in s.row_entries(r) {
            for (o, &x) in o_row.iter_mut().zip(h.row(col)) {
                *o += v * x;
            }
        }
    };
    if s.nnz() * c >= 1 << 16 {
        out.as_mut_slice().par_chunks_mut(c).enumerate().for_each(row_kernel);
    } else {
        out.as_mut_slice().chunks_mut(c).enumerate().for_each(row_kernel);
    }
    Ok(out)
}

/// `S^T * G` without materializing the transpose.
pub fn spmm_transpose(s: &SparseMatrix, g: &DenseMatrix) -> Result<DenseMatrix> {
    if s.n_rows() != g.rows() {
        return Err(Error::shape("spmm_transpose", format!("({}x{})^T times {:?}", s.n_rows(), s.n_cols(), g.shape())));
    }
    let c = g.cols();
    let mut out = DenseMatrix::zeros(s.n_cols(), c);
    for r in 0..s.n_rows() {
        let g_row = g.row(r);
        for (col, v) in s.row_entries(r) {
            for (o, &x) in out.row_mut(col).iter_mut().zip(g_row) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> SparseMatrix {
        csr_from_edges(&Graph::path(3), false).unwrap()
    }

    #[test]
    fn single_edge_is_mirrored() {
        let a = csr_from_edges(&Graph::undirected(2, vec![(0, 1)]), false).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
    }

    #[test]
    fn empty_graph_with_self_loops_is_identity() {
        let a = csr_from_edges(&Graph::undirected(3, vec![]), true).unwrap();
        assert_eq!(a, SparseMatrix::identity(3));
    }

    #[test]
    fn path_graph_has_four_entries() {
        assert_eq!(p3().nnz(), 4);
    }

    #[test]
    fn construction_errors() {
        assert!(csr_from_edges(&Graph::undirected(2, vec![(0, 2)]), false).is_err());
        assert!(csr_from_edges(&Graph::undirected(3, vec![(0, 1), (1, 0)]), false).is_err());
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn degrees() {
        assert_eq!(degree_vector(&p3()), vec![1.0, 2.0, 1.0]);
        assert_eq!(degree_vector(&SparseMatrix::identity(3)), vec![1.0; 3]);
        assert_eq!(degree_vector(&SparseMatrix::zeros(2)), vec![0.0; 2]);
    }

    #[test]
    fn p3_laplacian() {
        let l = build_graph_matrix(&p3(), GraphMatrixKind::Lap).unwrap();
        let h = -1.0 / 2f64.sqrt();
        for i in 0..3 {
            assert!((l.get(i, i) - 1.0).abs() < 1e-15);
        }
        for (r, c) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((l.get(r, c) - h).abs() < 1e-15);
        }
        assert_eq!(l.get(0, 2), 0.0);
    }

    #[test]
    fn p3_renormalized_adjacency() {
        let s = build_graph_matrix(&p3(), GraphMatrixKind::AdjRenorm).unwrap();
        assert!((s.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((s.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((s.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_laplacian_at_two_is_shifted() {
        let a = p3();
        let scaled = build_graph_matrix(&a, GraphMatrixKind::lap_scaled_default()).unwrap();
        let shifted = build_graph_matrix(&a, GraphMatrixKind::LapShifted).unwrap();
        let d = scaled.to_dense().max_abs_diff(&shifted.to_dense()).unwrap();
        assert!(d < 1e-15);
        assert!(build_graph_matrix(&a, GraphMatrixKind::LapScaled { lambda_star: 0.0 }).is_err());
        assert!(build_graph_matrix(&a, GraphMatrixKind::LapScaled { lambda_star: -1.0 }).is_err());
    }

    #[test]
    fn isolated_nodes_get_zero_rows() {
        let a = csr_from_edges(&Graph::undirected(3, vec![(0, 1)]), false).unwrap();
        let s = build_graph_matrix(&a, GraphMatrixKind::AdjNorm).unwrap();
        assert_eq!(s.row_entries(2).count(), 0);
        let l = build_graph_matrix(&a, GraphMatrixKind::Lap).unwrap();
        assert_eq!(l.get(2, 2), 1.0);
        assert!(l.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn spmm_basics() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(spmm(&SparseMatrix::identity(3), &h).unwrap(), h);
        assert_eq!(spmm(&SparseMatrix::zeros(3), &h).unwrap(), DenseMatrix::zeros(3, 2));
        let ones = DenseMatrix::filled(3, 1, 1.0);
        assert_eq!(spmm(&p3(), &ones).unwrap().as_slice(), &[1.0, 2.0, 1.0]);
        assert!(spmm(&p3(), &DenseMatrix::zeros(2, 1)).is_err());
    }
}
