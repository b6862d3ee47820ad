//! Coefficient decompositions of the generalized convolution
//! `Y = sum_k P_k(S) X W_k`.
//!
//! Every forward pass is written against [`Backend`], so the same code runs
//! eagerly and on the autodiff tape. Matrices are stored with the shapes below
//! (biases are 1 x c row vectors):
//!
//! | variant    | parameters |
//! |------------|------------|
//! | full       | `W_k`: I x J for k = 0..=K |
//! | scalar     | `W`: I x J, `b`: 1 x J, `coeff`: 1 x (K+1) |
//! | per-output | `W`: I x J, `b`: 1 x J, `A`: (K+1) x J |
//! | per-input  | `W`: I x J, `b`: 1 x J, `A`: (K+1) x I |
//! | CP         | `C`: I x R, `b_C`: 1 x R, `P`: J x R, `b_P`: 1 x J, `M`: (K+1) x R |
//! | Tucker     | `C`: I x P, `b_C`: 1 x P, `G1`: P x QR, `b_G`: 1 x QR, `P`: J x Q, `b_P`: 1 x J, `M`: (K+1) x R |
//!
//! In `G1` the core entry `g[p, q, r]` sits at column `q + r Q`.

use crate::basis::{propagate, BasisSpec, FavardCoeffs};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use crate::ops::{Backend, DropSite, Eval};
use crate::tensor::CoeffTensor;
use serde::{Deserialize, Serialize};

/// A weight matrix with its bias.
#[derive(Debug, Clone)]
pub struct Affine<V = DenseMatrix> {
    pub weight: V,
    pub bias: V,
}

#[derive(Debug, Clone)]
pub struct CpFactors<V = DenseMatrix> {
    pub c: V,
    pub b_c: V,
    pub p: V,
    pub b_p: V,
    pub m: V,
}

/// Tucker factors. `input` and `output` are `None` when the corresponding
/// factor is fixed to the identity (Tucker-1 drops both, Tucker-2 drops `input`);
/// the bias attached to an identity factor is dropped with it.
#[derive(Debug, Clone)]
pub struct TuckerFactors<V = DenseMatrix> {
    pub input: Option<Affine<V>>,
    pub g1: V,
    pub b_g: V,
    pub output: Option<Affine<V>>,
    pub m: V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum AlphaMode {
    /// `coeff` holds [`gcn_alpha`].
    Gcn,
    /// `coeff` holds [`appnp_alpha`] for the given teleport probability.
    Appnp { teleport: f64 },
    /// `coeff` holds free coefficients.
    Learned,
    /// `coeff` holds the values `gamma` at the Chebyshev nodes.
    ChebInterp,
}

#[derive(Debug, Clone)]
pub struct ScalarDecomp<V = DenseMatrix> {
    pub w: V,
    pub b: V,
    pub mode: AlphaMode,
    pub coeff: V,
}

#[derive(Debug, Clone)]
pub struct PerOutputDecomp<V = DenseMatrix> {
    pub w: V,
    pub b: V,
    pub a: V,
    /// Propagate `X W + 1 b^T` instead of adding `b` after propagation.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct PerInputDecomp<V = DenseMatrix> {
    pub w: V,
    pub b: V,
    pub a: V,
}

#[derive(Debug, Clone)]
pub struct FullCoefficients<V = DenseMatrix> {
    pub wk: Vec<V>,
}

#[derive(Debug, Clone)]
pub enum Decomposition<V = DenseMatrix> {
    Full(FullCoefficients<V>),
    Scalar(ScalarDecomp<V>),
    PerOutput(PerOutputDecomp<V>),
    PerInput(PerInputDecomp<V>),
    Cp(CpFactors<V>),
    Tucker(TuckerFactors<V>),
}

/// Basis, order, and (for Favard) the positive recurrence coefficients.
#[derive(Debug, Clone, Copy)]
pub struct PolyFilter<'a, V = DenseMatrix> {
    pub basis: BasisSpec,
    pub k: usize,
    pub favard: Option<&'a FavardCoeffs<V>>,
}

impl<'a, V> PolyFilter<'a, V> {
    pub fn new(basis: BasisSpec, k: usize) -> Self {
        PolyFilter { basis, k, favard: None }
    }

    pub fn with_favard(k: usize, coeffs: &'a FavardCoeffs<V>) -> Self {
        PolyFilter { basis: BasisSpec::Favard, k, favard: Some(coeffs) }
    }
}

/// `alpha = e_1`.
pub fn gcn_alpha(k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::param("GCN coefficients need K >= 1"));
    }
    let mut a = vec![0.0; k + 1];
    a[1] = 1.0;
    Ok(a)
}

/// `alpha_k = (1-a)^k a` for k < K and `alpha_K = (1-a)^K`.
pub fn appnp_alpha(teleport: f64, k: usize) -> Result<Vec<f64>> {
    if !(teleport > 0.0 && teleport <= 1.0) {
        return Err(Error::param(format!("teleport {teleport} outside (0, 1]")));
    }
    let keep = 1.0 - teleport;
    Ok((0..=k)
        .map(|i| {
            let decay = keep.powi(i as i32);
            if i < k {
                decay * teleport
            } else {
                decay
            }
        })
        .collect())
}

/// Chebyshev nodes `x_l = cos((l + 1/2) pi / (K+1))`.
pub fn chebyshev_nodes(k: usize) -> Vec<f64> {
    let n = (k + 1) as f64;
    (0..=k).map(|l| ((l as f64 + 0.5) * std::f64::consts::PI / n).cos()).collect()
}

/// The (K+1) x (K+1) matrix `T` with `alpha = gamma T`, i.e.
/// `T[l, k] = 2/(K+1) T_k(x_l)`.
pub fn chebii_matrix(k: usize) -> DenseMatrix {
    let nodes = chebyshev_nodes(k);
    let scale = 2.0 / (k + 1) as f64;
    let mut t = DenseMatrix::zeros(k + 1, k + 1);
    for (l, &x) in nodes.iter().enumerate() {
        let (mut prev, mut cur) = (1.0, x);
        for order in 0..=k {
            let value = match order {
                0 => 1.0,
                1 => x,
                _ => {
                    let next = 2.0 * x * cur - prev;
                    prev = cur;
                    cur = next;
                    next
                }
            };
            t[(l, order)] = scale * value;
        }
    }
    t
}

/// `alpha_k = 2/(K+1) sum_l gamma_l T_k(x_l)` with K = `gamma.len() - 1`.
pub fn chebii_alpha(gamma: &[f64]) -> Result<Vec<f64>> {
    if gamma.is_empty() {
        return Err(Error::param("chebii_alpha needs at least one value"));
    }
    let k = gamma.len() - 1;
    let alpha = DenseMatrix::row_vector(gamma).matmul(&chebii_matrix(k))?;
    Ok(alpha.into_vec())
}

impl ScalarDecomp<DenseMatrix> {
    pub fn gcn(w: DenseMatrix, b: DenseMatrix, k: usize) -> Result<Self> {
        Ok(ScalarDecomp { w, b, mode: AlphaMode::Gcn, coeff: DenseMatrix::row_vector(&gcn_alpha(k)?) })
    }

    pub fn appnp(w: DenseMatrix, b: DenseMatrix, teleport: f64, k: usize) -> Result<Self> {
        Ok(ScalarDecomp {
            w,
            b,
            mode: AlphaMode::Appnp { teleport },
            coeff: DenseMatrix::row_vector(&appnp_alpha(teleport, k)?),
        })
    }

    /// The effective `alpha` row vector.
    pub fn alpha(&self) -> Result<Vec<f64>> {
        match self.mode {
            AlphaMode::ChebInterp => chebii_alpha(self.coeff.as_slice()),
            _ => Ok(self.coeff.as_slice().to_vec()),
        }
    }
}

/// `sum_k V_k diag(coeffs[k, :])`.
fn weighted_sum<'s, B: Backend<'s>>(bk: &mut B, v: &[B::Val], coeffs: &B::Val) -> Result<B::Val> {
    let mut acc = bk.col_scale_row(&v[0], coeffs, 0)?;
    for (k, vk) in v.iter().enumerate().skip(1) {
        let term = bk.col_scale_row(vk, coeffs, k)?;
        acc = bk.add(&acc, &term)?;
    }
    Ok(acc)
}

fn run_filter<'s, B: Backend<'s>>(
    bk: &mut B,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    h: &B::Val,
) -> Result<Vec<B::Val>> {
    propagate(bk, s, &filter.basis, filter.favard, h, filter.k)
}

fn check_order(op: &'static str, rows: usize, k: usize) -> Result<()> {
    if rows != k + 1 {
        return Err(Error::shape(op, format!("{rows} coefficient rows for K = {k}")));
    }
    Ok(())
}

/// `Y = sum_k V_k W_k` with `V = P(S) X`.
pub fn forward_full<'s, B: Backend<'s>>(
    bk: &mut B,
    x: &B::Val,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    d: &FullCoefficients<B::Val>,
) -> Result<B::Val> {
    check_order("forward_full", d.wk.len(), filter.k)?;
    let v = run_filter(bk, s, filter, x)?;
    let mut acc = bk.matmul(&v[0], &d.wk[0])?;
    for (vk, wk) in v.iter().zip(&d.wk).skip(1) {
        let term = bk.matmul(vk, wk)?;
        acc = bk.add(&acc, &term)?;
    }
    Ok(acc)
}

/// `Y = (sum_k alpha_k V_k) W + 1 b^T` with `V = P(S) X`.
pub fn forward_scalar<'s, B: Backend<'s>>(
    bk: &mut B,
    x: &B::Val,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    d: &ScalarDecomp<B::Val>,
) -> Result<B::Val> {
    let len = bk.value(&d.coeff).as_slice().len();
    check_order("forward_scalar", len, filter.k)?;
    let alpha = match d.mode {
        AlphaMode::ChebInterp => {
            let t = bk.constant(chebii_matrix(filter.k));
            bk.matmul(&d.coeff, &t)?
        }
        _ => d.coeff.clone(),
    };
    let v = run_filter(bk, s, filter, x)?;
    let mut z = bk.scale_by_entry(&v[0], &alpha, 0)?;
    for (k, vk) in v.iter().enumerate().skip(1) {
        let term = bk.scale_by_entry(vk, &alpha, k)?;
        z = bk.add(&z, &term)?;
    }
    let z = bk.dropout(&z, DropSite::OnZ)?;
    let y = bk.matmul(&z, &d.w)?;
    bk.add_bias(&y, &d.b)
}

/// `Y[:, j] = sum_k A[k, j] (P_k(S) X W)[:, j] + b_j`.
pub fn forward_per_output<'s, B: Backend<'s>>(
    bk: &mut B,
    x: &B::Val,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    d: &PerOutputDecomp<B::Val>,
) -> Result<B::Val> {
    check_order("forward_per_output", bk.value(&d.a).rows(), filter.k)?;
    let mut h = bk.matmul(x, &d.w)?;
    if d.strict {
        h = bk.add_bias(&h, &d.b)?;
    }
    let v = run_filter(bk, s, filter, &h)?;
    let y = weighted_sum(bk, &v, &d.a)?;
    if d.strict {
        Ok(y)
    } else {
        bk.add_bias(&y, &d.b)
    }
}

/// `Z[:, i] = sum_k A[k, i] (P_k(S) X)[:, i]`, `Y = Z W + 1 b^T`.
pub fn forward_per_input<'s, B: Backend<'s>>(
    bk: &mut B,
    x: &B::Val,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    d: &PerInputDecomp<B::Val>,
) -> Result<B::Val> {
    check_order("forward_per_input", bk.value(&d.a).rows(), filter.k)?;
    let v = run_filter(bk, s, filter, x)?;
    let z = weighted_sum(bk, &v, &d.a)?;
    let z = bk.dropout(&z, DropSite::OnZ)?;
    let y = bk.matmul(&z, &d.w)?;
    bk.add_bias(&y, &d.b)
}

/// CP layer: `H = X C + 1 b_C^T`, `Z = sum_k P_k(S) H diag(M[k, :])`,
/// `Y = Z P^T + 1 b_P^T`.
pub fn forward_cp<'s, B: Backend<'s>>(
    bk: &mut B,
    x: &B::Val,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    f: &CpFactors<B::Val>,
) -> Result<B::Val> {
    check_order("forward_cp", bk.value(&f.m).rows(), filter.k)?;
    let h = bk.matmul(x, &f.c)?;
    let h = bk.add_bias(&h, &f.b_c)?;
    let h = bk.dropout(&h, DropSite::AfterC)?;
    let v = run_filter(bk, s, filter, &h)?;
    let z = weighted_sum(bk, &v, &f.m)?;
    let z = bk.dropout(&z, DropSite::OnZ)?;
    let y = bk.matmul_bt(&z, &f.p)?;
    bk.add_bias(&y, &f.b_p)
}

/// Tucker layer: `H1 = (X C + 1 b_C^T) G1 + 1 b_G^T`, propagate, contract the
/// R-mode of each `V_k` with `M[k, :]`, then `Y = Z P^T + 1 b_P^T`.
pub fn forward_tucker<'s, B: Backend<'s>>(
    bk: &mut B,
    x: &B::Val,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    f: &TuckerFactors<B::Val>,
) -> Result<B::Val> {
    let (m_rows, r) = bk.value(&f.m).shape();
    check_order("forward_tucker", m_rows, filter.k)?;
    let qr = bk.value(&f.g1).cols();
    if r == 0 || qr % r != 0 {
        return Err(Error::shape("forward_tucker", format!("G1 has {qr} columns, not a multiple of R = {r}")));
    }
    let q = qr / r;
    let h = match &f.input {
        Some(c) => {
            let h = bk.matmul(x, &c.weight)?;
            let h = bk.add_bias(&h, &c.bias)?;
            bk.dropout(&h, DropSite::AfterC)?
        }
        None => x.clone(),
    };
    let h1 = bk.matmul(&h, &f.g1)?;
    let h1 = bk.add_bias(&h1, &f.b_g)?;
    let h1 = bk.dropout(&h1, DropSite::AfterG)?;
    let v = run_filter(bk, s, filter, &h1)?;
    let mut z = bk.mode3(&v[0], &f.m, 0, q)?;
    for (k, vk) in v.iter().enumerate().skip(1) {
        let term = bk.mode3(vk, &f.m, k, q)?;
        z = bk.add(&z, &term)?;
    }
    let z = bk.dropout(&z, DropSite::OnZ)?;
    match &f.output {
        Some(p) => {
            let y = bk.matmul_bt(&z, &p.weight)?;
            bk.add_bias(&y, &p.bias)
        }
        None => Ok(z),
    }
}

pub fn forward<'s, B: Backend<'s>>(
    bk: &mut B,
    x: &B::Val,
    s: &'s SparseMatrix,
    filter: &PolyFilter<'_, B::Val>,
    d: &Decomposition<B::Val>,
) -> Result<B::Val> {
    match d {
        Decomposition::Full(d) => forward_full(bk, x, s, filter, d),
        Decomposition::Scalar(d) => forward_scalar(bk, x, s, filter, d),
        Decomposition::PerOutput(d) => forward_per_output(bk, x, s, filter, d),
        Decomposition::PerInput(d) => forward_per_input(bk, x, s, filter, d),
        Decomposition::Cp(f) => forward_cp(bk, x, s, filter, f),
        Decomposition::Tucker(f) => forward_tucker(bk, x, s, filter, f),
    }
}

impl<V> Decomposition<V> {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Decomposition::Full(_) => "full",
            Decomposition::Scalar(_) => "scalar",
            Decomposition::PerOutput(_) => "per-output",
            Decomposition::PerInput(_) => "per-input",
            Decomposition::Cp(_) => "cp",
            Decomposition::Tucker(f) => match (&f.input, &f.output) {
                (Some(_), Some(_)) => "tucker",
                (None, Some(_)) => "tucker2",
                (None, None) => "tucker1",
                (Some(_), None) => "tucker-no-output",
            },
        }
    }
}

impl Decomposition<DenseMatrix> {
    /// Eager forward pass.
    pub fn apply(&self, x: &DenseMatrix, s: &SparseMatrix, filter: &PolyFilter<'_>) -> Result<DenseMatrix> {
        forward(&mut Eval, x, s, filter, self)
    }

    /// (I, J, K) implied by the parameter shapes, after checking consistency.
    pub fn dims(&self) -> Result<(usize, usize, usize)> {
        let bad = |detail: String| Err(Error::shape("Decomposition::dims", detail));
        let order =
            |rows: usize| rows.checked_sub(1).ok_or_else(|| Error::shape("Decomposition::dims", "no coefficient rows"));
        match self {
            Decomposition::Full(d) => {
                let first = d.wk.first().ok_or_else(|| Error::shape("Decomposition::dims", "no slices"))?;
                if d.wk.iter().any(|w| w.shape() != first.shape()) {
                    return bad("slices differ in shape".into());
                }
                Ok((first.rows(), first.cols(), d.wk.len() - 1))
            }
            Decomposition::Scalar(d) => {
                let (i, j) = d.w.shape();
                if d.b.shape() != (1, j) || d.coeff.rows() != 1 {
                    return bad(format!("W {:?}, b {:?}, coeff {:?}", d.w.shape(), d.b.shape(), d.coeff.shape()));
                }
                Ok((i, j, order(d.coeff.cols())?))
            }
            Decomposition::PerOutput(d) => {
                let (i, j) = d.w.shape();
                if d.b.shape() != (1, j) || d.a.cols() != j {
                    return bad(format!("W {:?}, b {:?}, A {:?}", d.w.shape(), d.b.shape(), d.a.shape()));
                }
                Ok((i, j, order(d.a.rows())?))
            }
            Decomposition::PerInput(d) => {
                let (i, j) = d.w.shape();
                if d.b.shape() != (1, j) || d.a.cols() != i {
                    return bad(format!("W {:?}, b {:?}, A {:?}", d.w.shape(), d.b.shape(), d.a.shape()));
                }
                Ok((i, j, order(d.a.rows())?))
            }
            Decomposition::Cp(f) => {
                let (i, r) = f.c.shape();
                let j = f.p.rows();
                if f.p.cols() != r || f.m.cols() != r || f.b_c.shape() != (1, r) || f.b_p.shape() != (1, j) {
                    return bad(format!(
                        "C {:?}, b_C {:?}, P {:?}, b_P {:?}, M {:?}",
                        f.c.shape(),
                        f.b_c.shape(),
                        f.p.shape(),
                        f.b_p.shape(),
                        f.m.shape()
                    ));
                }
                Ok((i, j, order(f.m.rows())?))
            }
            Decomposition::Tucker(f) => {
                let (pd, qr) = f.g1.shape();
                let r = f.m.cols();
                if r == 0 || qr % r != 0 || f.b_g.shape() != (1, qr) {
                    return bad(format!("G1 {:?}, b_G {:?}, M {:?}", f.g1.shape(), f.b_g.shape(), f.m.shape()));
                }
                let q = qr / r;
                let i = match &f.input {
                    Some(c) if c.weight.cols() == pd && c.bias.shape() == (1, pd) => c.weight.rows(),
                    Some(c) => return bad(format!("C {:?} against P = {pd}", c.weight.shape())),
                    None => pd,
                };
                let j = match &f.output {
                    Some(p) if p.weight.cols() == q && p.bias.shape() == (1, p.weight.rows()) => p.weight.rows(),
                    Some(p) => return bad(format!("P {:?} against Q = {q}", p.weight.shape())),
                    None => q,
                };
                Ok((i, j, order(f.m.rows())?))
            }
        }
    }

    /// Channels carried through the polynomial filter for input width `i`.
    pub fn propagated_channels(&self) -> Result<usize> {
        let (i, j, _) = self.dims()?;
        Ok(match self {
            Decomposition::Full(_) | Decomposition::Scalar(_) | Decomposition::PerInput(_) => i,
            Decomposition::PerOutput(_) => j,
            Decomposition::Cp(f) => f.c.cols(),
            Decomposition::Tucker(f) => f.g1.cols(),
        })
    }
}

/// `w[i, j, k] = sum_pqr g[p, q, r] c[i, p] p[j, q] m[k, r]` with `G1` unfolded
/// as `g[p, q, r] = G1[p, q + r Q]`.
fn tucker_tensor(c: &DenseMatrix, g1: &DenseMatrix, p: &DenseMatrix, m: &DenseMatrix) -> CoeffTensor {
    let (i_dim, pd) = c.shape();
    let (j_dim, q) = p.shape();
    let (orders, r) = m.shape();
    // core contracted with C and P first: t[i, j, r]
    let mut t = vec![0.0; i_dim * j_dim * r];
    for i in 0..i_dim {
        for pp in 0..pd {
            let cip = c[(i, pp)];
            if cip == 0.0 {
                continue;
            }
            for rr in 0..r {
                for qq in 0..q {
                    let g = g1[(pp, qq + rr * q)];
                    if g == 0.0 {
                        continue;
                    }
                    for j in 0..j_dim {
                        t[(i * j_dim + j) * r + rr] += cip * g * p[(j, qq)];
                    }
                }
            }
        }
    }
    CoeffTensor::from_fn(i_dim, j_dim, orders, |i, j, k| {
        (0..r).map(|rr| t[(i * j_dim + j) * r + rr] * m[(k, rr)]).sum()
    })
}

/// The coefficient tensor `W` of a decomposition. Biases are not part of it;
/// see [`materialize_affine`].
pub fn materialize_tensor(d: &Decomposition) -> Result<CoeffTensor> {
    let (i_dim, j_dim, k) = d.dims()?;
    Ok(match d {
        Decomposition::Full(d) => CoeffTensor::from_slices(d.wk.clone())?,
        Decomposition::Scalar(d) => {
            let alpha = d.alpha()?;
            CoeffTensor::from_fn(i_dim, j_dim, k + 1, |i, j, kk| alpha[kk] * d.w[(i, j)])
        }
        Decomposition::PerOutput(d) => CoeffTensor::from_fn(i_dim, j_dim, k + 1, |i, j, kk| d.a[(kk, j)] * d.w[(i, j)]),
        Decomposition::PerInput(d) => CoeffTensor::from_fn(i_dim, j_dim, k + 1, |i, j, kk| d.a[(kk, i)] * d.w[(i, j)]),
        Decomposition::Cp(f) => CoeffTensor::from_fn(i_dim, j_dim, k + 1, |i, j, kk| {
            (0..f.c.cols()).map(|r| f.c[(i, r)] * f.p[(j, r)] * f.m[(kk, r)]).sum()
        }),
        Decomposition::Tucker(f) => {
            let c = f.input.as_ref().map_or_else(|| DenseMatrix::identity(i_dim), |a| a.weight.clone());
            let p = f.output.as_ref().map_or_else(|| DenseMatrix::identity(j_dim), |a| a.weight.clone());
            tucker_tensor(&c, &f.g1, &p, &f.m)
        }
    })
}

/// Affine form of a decomposition: a tensor over I+1 input channels and an
/// output bias such that `forward(X) = sum_k P_k(S) [X | 1] W_k + 1 b^T`.
pub fn materialize_affine(d: &Decomposition) -> Result<(CoeffTensor, DenseMatrix)> {
    let (i_dim, j_dim, k) = d.dims()?;
    let orders = k + 1;
    let zero_bias = DenseMatrix::zeros(1, j_dim);
    // Tensor with an appended all-zero input channel.
    let padded = |t: CoeffTensor| {
        CoeffTensor::from_fn(i_dim + 1, j_dim, orders, |i, j, kk| if i < i_dim { t.get(i, j, kk) } else { 0.0 })
    };
    Ok(match d {
        Decomposition::Full(_) => (padded(materialize_tensor(d)?), zero_bias),
        Decomposition::Scalar(s) => (padded(materialize_tensor(d)?), s.b.clone()),
        Decomposition::PerInput(s) => (padded(materialize_tensor(d)?), s.b.clone()),
        Decomposition::PerOutput(s) if !s.strict => (padded(materialize_tensor(d)?), s.b.clone()),
        Decomposition::PerOutput(s) => {
            let w_aug = s.w.vcat(&s.b)?;
            let t = CoeffTensor::from_fn(i_dim + 1, j_dim, orders, |i, j, kk| s.a[(kk, j)] * w_aug[(i, j)]);
            (t, zero_bias)
        }
        Decomposition::Cp(f) => {
            let aug = Decomposition::Cp(CpFactors {
                c: f.c.vcat(&f.b_c)?,
                b_c: f.b_c.clone(),
                p: f.p.clone(),
                b_p: f.b_p.clone(),
                m: f.m.clone(),
            });
            (materialize_tensor(&aug)?, f.b_p.clone())
        }
        Decomposition::Tucker(f) => {
            let pd = f.g1.rows();
            // [[C, 0], [b_C^T, 1]] maps [X | 1] to [X C + 1 b_C^T | 1].
            let (c, b_c) = match &f.input {
                Some(a) => (a.weight.clone(), a.bias.clone()),
                None => (DenseMatrix::identity(i_dim), DenseMatrix::zeros(1, pd)),
            };
            let c_aug = DenseMatrix::from_fn(i_dim + 1, pd + 1, |i, p| match (i < i_dim, p < pd) {
                (true, true) => c[(i, p)],
                (true, false) => 0.0,
                (false, true) => b_c[(0, p)],
                (false, false) => 1.0,
            });
            let g_aug = f.g1.vcat(&f.b_g)?;
            let (p, b_p) = match &f.output {
                Some(a) => (a.weight.clone(), a.bias.clone()),
                None => (DenseMatrix::identity(j_dim), zero_bias),
            };
            (tucker_tensor(&c_aug, &g_aug, &p, &f.m), b_p)
        }
    })
}
