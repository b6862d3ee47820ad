//! The algebra that layer code is written against.
//!
//! Propagation and every coefficient decomposition are written once, generic
//! over [`Backend`]. [`Eval`] evaluates eagerly on dense matrices; the
//! autodiff tape implements the same trait and records each step. Both call the
//! kernels in [`kernels`], so a recorded forward pass is bit-identical to the
//! eager one.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use serde::{Deserialize, Serialize};

/// Points inside a layer where a training harness may apply dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropSite {
    /// On raw node features.
    Features,
    /// On the signal entering the spectral convolution.
    Signals,
    /// After the input transform `X C + b_C`.
    AfterC,
    /// After the core transform `(...) G1 + b_G`.
    AfterG,
    /// On the propagated sum `Z` before the output transform.
    OnZ,
}

/// Dropout probability per site. All zero disables dropout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DropoutRates {
    pub features: f64,
    pub signals: f64,
    pub after_c: f64,
    pub after_g: f64,
    pub on_z: f64,
}

impl DropoutRates {
    pub fn rate(&self, site: DropSite) -> f64 {
        match site {
            DropSite::Features => self.features,
            DropSite::Signals => self.signals,
            DropSite::AfterC => self.after_c,
            DropSite::AfterG => self.after_g,
            DropSite::OnZ => self.on_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for r in [self.features, self.signals, self.after_c, self.after_g, self.on_z] {
            check_rate(r)?;
        }
        Ok(())
    }
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

pub trait Backend<'s> {
    type Val: Clone;

    fn value<'a>(&'a self, v: &'a Self::Val) -> &'a DenseMatrix;
    fn constant(&mut self, m: DenseMatrix) -> Self::Val;

    fn matmul(&mut self, a: &Self::Val, b: &Self::Val) -> Result<Self::Val>;
    /// `a * b^T`
    fn matmul_bt(&mut self, a: &Self::Val, b: &Self::Val) -> Result<Self::Val>;
    fn spmm(&mut self, s: &'s SparseMatrix, h: &Self::Val) -> Result<Self::Val>;
    fn add(&mut self, a: &Self::Val, b: &Self::Val) -> Result<Self::Val>;
    fn sub(&mut self, a: &Self::Val, b: &Self::Val) -> Result<Self::Val>;
    fn scale(&mut self, a: &Self::Val, c: f64) -> Self::Val;
    /// `a * diag(v[row, :])`
    fn col_scale_row(&mut self, a: &Self::Val, v: &Self::Val, row: usize) -> Result<Self::Val>;
    /// `a * diag(v[row, :])^-1`
    fn col_div_row(&mut self, a: &Self::Val, v: &Self::Val, row: usize) -> Result<Self::Val>;
    /// `v_flat[idx] * a` for a vector-shaped `v`.
    fn scale_by_entry(&mut self, a: &Self::Val, v: &Self::Val, idx: usize) -> Result<Self::Val>;
    /// `a + 1 b^T` with `b` a 1 x c row vector.
    fn add_bias(&mut self, a: &Self::Val, b: &Self::Val) -> Result<Self::Val>;
    /// Mode-3 contraction of an unfolded n x (Q R) block with row `row` of `m`:
    /// `out[v, q] = sum_r a[v, q + r Q] * m[row, r]`.
    fn mode3(&mut self, a: &Self::Val, m: &Self::Val, row: usize, q: usize) -> Result<Self::Val>;
    fn hcat(&mut self, a: &Self::Val, b: &Self::Val) -> Result<Self::Val>;
    fn relu(&mut self, a: &Self::Val) -> Self::Val;
    /// `softplus(a) + shift`, entry-wise.
    fn softplus(&mut self, a: &Self::Val, shift: f64) -> Self::Val;
    fn dropout(&mut self, a: &Self::Val, site: DropSite) -> Result<Self::Val>;
}

/// Eager evaluation on dense matrices; dropout sites are identity.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

impl<'s> Backend<'s> for Eval {
    type Val = DenseMatrix;

    fn value<'a>(&'a self, v: &'a DenseMatrix) -> &'a DenseMatrix {
        v
    }

    fn constant(&mut self, m: DenseMatrix) -> DenseMatrix {
        m
    }

    fn matmul(&mut self, a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        a.matmul(b)
    }

    fn matmul_bt(&mut self, a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        a.matmul_transpose_b(b)
    }

    fn spmm(&mut self, s: &'s SparseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
        crate::graph::spmm(s, h)
    }

    fn add(&mut self, a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        a.add(b)
    }

    fn sub(&mut self, a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        a.sub(b)
    }

    fn scale(&mut self, a: &DenseMatrix, c: f64) -> DenseMatrix {
        a.scale(c)
    }

    fn col_scale_row(&mut self, a: &DenseMatrix, v: &DenseMatrix, row: usize) -> Result<DenseMatrix> {
        kernels::col_scale_row(a, v, row)
    }

    fn col_div_row(&mut self, a: &DenseMatrix, v: &DenseMatrix, row: usize) -> Result<DenseMatrix> {
        kernels::col_div_row(a, v, row)
    }

    fn scale_by_entry(&mut self, a: &DenseMatrix, v: &DenseMatrix, idx: usize) -> Result<DenseMatrix> {
        kernels::scale_by_entry(a, v, idx)
    }

    fn add_bias(&mut self, a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        kernels::add_bias(a, b)
    }

    fn mode3(&mut self, a: &DenseMatrix, m: &DenseMatrix, row: usize, q: usize) -> Result<DenseMatrix> {
        kernels::mode3(a, m, row, q)
    }

    fn hcat(&mut self, a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        a.hcat(b)
    }

    fn relu(&mut self, a: &DenseMatrix) -> DenseMatrix {
        a.map(|v| v.max(0.0))
    }

    fn softplus(&mut self, a: &DenseMatrix, shift: f64) -> DenseMatrix {
        a.map(|v| kernels::softplus(v) + shift)
    }

    fn dropout(&mut self, a: &DenseMatrix, _site: DropSite) -> Result<DenseMatrix> {
        Ok(a.clone())
    }
}

/// Forward kernels shared by every backend.
pub mod kernels {
    use super::*;

    fn check_row(op: &'static str, a: &DenseMatrix, v: &DenseMatrix, row: usize) -> Result<()> {
        if row >= v.rows() || v.cols() != a.cols() {
            return Err(Error::shape(op, format!("row {row} of {:?} against {:?}", v.shape(), a.shape())));
        }
        Ok(())
    }

    pub fn col_scale_row(a: &DenseMatrix, v: &DenseMatrix, row: usize) -> Result<DenseMatrix> {
        check_row("col_scale_row", a, v, row)?;
        let d = v.row(row);
        Ok(DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] * d[j]))
    }

    pub fn col_div_row(a: &DenseMatrix, v: &DenseMatrix, row: usize) -> Result<DenseMatrix> {
        check_row("col_div_row", a, v, row)?;
        let d = v.row(row);
        Ok(DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] / d[j]))
    }

    pub fn scale_by_entry(a: &DenseMatrix, v: &DenseMatrix, idx: usize) -> Result<DenseMatrix> {
        if v.rows() != 1 && v.cols() != 1 || idx >= v.as_slice().len() {
            return Err(Error::shape("scale_by_entry", format!("entry {idx} of {:?}", v.shape())));
        }
        Ok(a.scale(v.as_slice()[idx]))
    }

    pub fn add_bias(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != 1 || b.cols() != a.cols() {
            return Err(Error::shape("add_bias", format!("bias {:?} for {:?}", b.shape(), a.shape())));
        }
        let bias = b.row(0);
        Ok(DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + bias[j]))
    }

    pub fn mode3(a: &DenseMatrix, m: &DenseMatrix, row: usize, q: usize) -> Result<DenseMatrix> {
        let r = m.cols();
        if q == 0 || a.cols() != q * r || row >= m.rows() {
            return Err(Error::shape(
                "mode3",
                format!("{:?} with Q = {q} against M {:?} row {row}", a.shape(), m.shape()),
            ));
        }
        let mrow = m.row(row);
        Ok(DenseMatrix::from_fn(a.rows(), q, |i, qq| {
            let arow = a.row(i);
            let mut acc = 0.0;
            for (rr, &w) in mrow.iter().enumerate() {
                acc += arow[qq + rr * q] * w;
            }
            acc
        }))
    }

    /// Inverted-dropout multipliers: 0 with probability `rate`, else
    /// `1 / (1 - rate)`. Draws one uniform per entry in row-major order.
    pub fn dropout_mask(len: usize, rate: f64, rng: &mut crate::rng::Stream) -> Vec<f64> {
        let keep = 1.0 / (1.0 - rate);
        (0..len).map(|_| if rng.uniform() < rate { 0.0 } else { keep }).collect()
    }

    /// Numerically stable `ln(1 + e^x)`.
    pub fn softplus(x: f64) -> f64 {
        if x > 30.0 {
            x
        } else if x < -30.0 {
            x.exp()
        } else {
            x.exp().ln_1p()
        }
    }

    /// Derivative of [`softplus`].
    pub fn sigmoid(x: f64) -> f64 {
        if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        }
    }
}
