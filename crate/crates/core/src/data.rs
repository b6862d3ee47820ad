//! Datasets, the SGCD v1 container, and synthetic generators.
//!
//! SGCD v1 layout, little-endian, single file:
//!
//! ```text
//! offset  size          field
//! 0       4             magic "SGCD"
//! 4       4             version (u32) = 1
//! 8       8             n (u64)
//! 16      8             feat_dim (u64)
//! 24      8             num_classes (u64)
//! 32      8             num_edges (u64)
//! 40      4 n feat_dim  features, row-major f32
//! ...     4 n           labels (u32)
//! ...     16 num_edges  edges as (u, v) u64 pairs with u < v
//! ```

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{build_graph_matrix, csr_from_edges, Graph, GraphMatrixKind};
use crate::oracle::spectral_filter_matrix;
use crate::rng::{Purpose, Stream};
use std::collections::HashSet;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SGCD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub feat_dim: usize,
    pub num_classes: usize,
    /// n x feat_dim, row-major.
    pub features: Vec<f32>,
    pub labels: Vec<u32>,
    /// Undirected edges, each stored once with u < v.
    pub edges: Vec<(usize, usize)>,
}

impl Dataset {
    /// Checks sizes, label range, and edge canonical form.
    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.n * self.feat_dim || self.labels.len() != self.n {
            return Err(Error::Validation("feature or label count does not match n".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Validation(format!("num_classes = {} < 2", self.num_classes)));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l as usize >= self.num_classes) {
            return Err(Error::Validation(format!("label {bad} outside 0..{}", self.num_classes)));
        }
        let mut seen = HashSet::with_capacity(self.edges.len());
        for &(u, v) in &self.edges {
            if u >= v || v >= self.n {
                return Err(Error::Validation(format!("edge ({u}, {v}) is not canonical in 0..{}", self.n)));
            }
            if !seen.insert((u, v)) {
                return Err(Error::Validation(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> Graph {
        Graph::undirected(self.n, self.edges.clone())
    }

    /// Features promoted to f64.
    pub fn features_matrix(&self) -> DenseMatrix {
        let data = self.features.iter().map(|&v| f64::from(v)).collect();
        DenseMatrix::from_vec(self.n, self.feat_dim, data).expect("validated sizes")
    }
}

pub fn encode(ds: &Dataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * ds.features.len() + 4 * ds.n + 16 * ds.edges.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [ds.n, ds.feat_dim, ds.num_classes, ds.edges.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for f in &ds.features {
        out.extend_from_slice(&f.to_le_bytes());
    }
    for l in &ds.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for &(u, v) in &ds.edges {
        out.extend_from_slice(&(u as u64).to_le_bytes());
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    Ok(out)
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

fn as_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in memory")))
}

/// Parses and validates an SGCD v1 byte buffer.
///
/// The file length must match the header exactly, every label must be below
/// `num_classes`, and the largest label must be `num_classes - 1`.
pub fn decode(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = as_usize(u64_at(bytes, 8), "n")?;
    let feat_dim = as_usize(u64_at(bytes, 16), "feat_dim")?;
    let num_classes = as_usize(u64_at(bytes, 24), "num_classes")?;
    let num_edges = as_usize(u64_at(bytes, 32), "num_edges")?;
    let overflow = || Error::Format("header sizes overflow".into());
    let feat_bytes = n.checked_mul(feat_dim).and_then(|v| v.checked_mul(4)).ok_or_else(overflow)?;
    let label_bytes = n.checked_mul(4).ok_or_else(overflow)?;
    let edge_bytes = num_edges.checked_mul(16).ok_or_else(overflow)?;
    let expected = HEADER_LEN
        .checked_add(feat_bytes)
        .and_then(|v| v.checked_add(label_bytes))
        .and_then(|v| v.checked_add(edge_bytes))
        .ok_or_else(overflow)?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("file is {} bytes, header implies {expected}", bytes.len())));
    }
    let mut at = HEADER_LEN;
    let features = bytes[at..at + feat_bytes]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    at += feat_bytes;
    let labels: Vec<u32> = bytes[at..at + label_bytes]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    at += label_bytes;
    let mut edges = Vec::with_capacity(num_edges);
    for c in bytes[at..].chunks_exact(16) {
        let u = as_usize(u64_at(c, 0), "edge endpoint")?;
        let v = as_usize(u64_at(c, 8), "edge endpoint")?;
        edges.push((u, v));
    }
    let ds = Dataset { n, feat_dim, num_classes, features, labels, edges };
    ds.validate()?;
    let max_label = ds.labels.iter().copied().max().map_or(0, |m| m as usize);
    if n == 0 || max_label + 1 != num_classes {
        return Err(Error::Validation(format!("num_classes = {num_classes} but the largest label is {max_label}")));
    }
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode(ds)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode(&std::fs::read(path)?)
}

/// Erdos-Renyi graph: each pair `u < v` is an edge with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut Stream) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.uniform() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::undirected(n, edges)
}

/// Regression fixture: graph, features, and spectrally filtered targets.
#[derive(Debug, Clone)]
pub struct FilterFixture {
    pub graph: Graph,
    pub features: DenseMatrix,
    pub targets: DenseMatrix,
}

/// Largest node count accepted by [`synth_filter_dataset`] (dense eigensolver).
pub const FILTER_FIXTURE_MAX_N: usize = 200;

/// ER graph (p = 0.1), standard normal features, and targets
/// `U diag(filter(lambda)) U^T X + noise` where `lambda, U` come from the
/// normalized Laplacian.
pub fn synth_filter_dataset(
    n: usize,
    seed: u64,
    filter: impl Fn(f64) -> f64,
    feat_dim: usize,
    noise_sigma: f64,
) -> Result<FilterFixture> {
    if n > FILTER_FIXTURE_MAX_N {
        return Err(Error::param(format!("filter fixture limited to {FILTER_FIXTURE_MAX_N} nodes")));
    }
    let mut rng = Stream::substream(seed, Purpose::Synthetic);
    let graph = erdos_renyi(n, 0.1, &mut rng);
    let features = DenseMatrix::random_normal(n, feat_dim, &mut rng);
    let lap = build_graph_matrix(&csr_from_edges(&graph, false)?, GraphMatrixKind::Lap)?;
    let mut targets = spectral_filter_matrix(&lap.to_dense(), filter, &features)?;
    if noise_sigma > 0.0 {
        for v in targets.as_mut_slice() {
            *v += noise_sigma * rng.normal();
        }
    }
    Ok(FilterFixture { graph, features, targets })
}

/// Classification data that a linear model separates perfectly: one-hot class
/// features and edges only between nodes of the same class.
pub fn synth_separable_dataset(n: usize, num_classes: usize, p_in: f64, seed: u64) -> Result<Dataset> {
    if num_classes < 2 || n < num_classes {
        return Err(Error::param("need at least two classes and one node per class"));
    }
    let mut rng = Stream::substream(seed, Purpose::Synthetic);
    // every class appears at least once
    let labels: Vec<u32> = rng.permutation(n).into_iter().map(|i| (i % num_classes) as u32).collect();
    let mut features = vec![0f32; n * num_classes];
    for (v, &l) in labels.iter().enumerate() {
        features[v * num_classes + l as usize] = 1.0;
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if labels[u] == labels[v] && rng.uniform() < p_in {
                edges.push((u, v));
            }
        }
    }
    Ok(Dataset { n, feat_dim: num_classes, num_classes, features, labels, edges })
}
