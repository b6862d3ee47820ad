//! Dense third-order coefficient tensors `w[i, j, k]` of shape I x J x (K+1).

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTensor {
    dims: (usize, usize, usize),
    /// Frontal slices `W_k`, each I x J.
    slices: Vec<DenseMatrix>,
}

impl CoeffTensor {
    pub fn zeros(i: usize, j: usize, orders: usize) -> Self {
        CoeffTensor { dims: (i, j, orders), slices: vec![DenseMatrix::zeros(i, j); orders] }
    }

    pub fn from_slices(slices: Vec<DenseMatrix>) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::shape("CoeffTensor", "no frontal slices"))?;
        let (i, j) = first.shape();
        if slices.iter().any(|s| s.shape() != (i, j)) {
            return Err(Error::shape("CoeffTensor", "frontal slices differ in shape"));
        }
        Ok(CoeffTensor { dims: (i, j, slices.len()), slices })
    }

    pub fn from_fn(i: usize, j: usize, orders: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let slices = (0..orders).map(|k| DenseMatrix::from_fn(i, j, |a, b| f(a, b, k))).collect();
        CoeffTensor { dims: (i, j, orders), slices }
    }

    /// (I, J, K+1)
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Polynomial order K.
    pub fn order(&self) -> usize {
        self.dims.2 - 1
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.slices[k][(i, j)]
    }

    pub fn slice(&self, k: usize) -> &DenseMatrix {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[DenseMatrix] {
        &self.slices
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::shape("CoeffTensor::max_abs_diff", format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let mut m = 0.0f64;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }
}
