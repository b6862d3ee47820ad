//! Dense reference implementations. Cubic cost, intended for tests and the
//! `verify` suites only.

use crate::basis::{binomial, BasisSpec, JacobiCoeffs};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::tensor::CoeffTensor;

const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Scalar Favard recurrence coefficients shared by every channel:
/// `q[k]` and `r[k]` for k = 0..=K.
#[derive(Debug, Clone, Copy)]
pub struct ScalarFavard<'a> {
    pub q: &'a [f64],
    pub r: &'a [f64],
}

/// `P_0(S), ..., P_K(S)` as dense matrices.
pub fn dense_basis_matrices(
    s: &DenseMatrix,
    basis: &BasisSpec,
    favard: Option<ScalarFavard<'_>>,
    k: usize,
) -> Result<Vec<DenseMatrix>> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::shape("dense_basis_matrices", format!("{:?} is not square", s.shape())));
    }
    basis.validate(k)?;
    let id = DenseMatrix::identity(n);
    let mut p: Vec<DenseMatrix> = Vec::with_capacity(k + 1);
    match *basis {
        BasisSpec::Monomial => {
            p.push(id);
            for i in 1..=k {
                let next = s.matmul(&p[i - 1])?;
                p.push(next);
            }
        }
        BasisSpec::Chebyshev => {
            p.push(id);
            if k >= 1 {
                p.push(s.clone());
            }
            for i in 2..=k {
                let next = s.matmul(&p[i - 1])?.scale(2.0).sub(&p[i - 2])?;
                p.push(next);
            }
        }
        BasisSpec::Jacobi { a, b } => {
            p.push(id.clone());
            if k >= 1 {
                let mut p1 = id.scale((a - b) / 2.0);
                p1.axpy((a + b + 2.0) / 2.0, s)?;
                p.push(p1);
            }
            for i in 2..=k {
                let c = JacobiCoeffs::at(i, a, b)?;
                let mut next = s.matmul(&p[i - 1])?.scale(c.theta);
                next.axpy(c.theta_prime, &p[i - 1])?;
                next.axpy(-c.theta_second, &p[i - 2])?;
                p.push(next);
            }
        }
        BasisSpec::Bernstein => {
            // C(K, k) S^k (I - S)^(K - k) from explicit powers.
            let i_minus_s = id.sub(s)?;
            let mut s_pow = vec![id.clone()];
            let mut c_pow = vec![id];
            for i in 1..=k {
                let next_s = s.matmul(&s_pow[i - 1])?;
                let next_c = i_minus_s.matmul(&c_pow[i - 1])?;
                s_pow.push(next_s);
                c_pow.push(next_c);
            }
            for i in 0..=k {
                p.push(s_pow[i].matmul(&c_pow[k - i])?.scale(binomial(k, i)));
            }
        }
        BasisSpec::Favard => {
            let f = favard.ok_or_else(|| Error::param("Favard basis requires coefficients"))?;
            if f.q.len() < k + 1 || f.r.len() < k + 1 {
                return Err(Error::shape("dense_basis_matrices", "too few Favard coefficients"));
            }
            if f.q.iter().any(|&q| !(q > 0.0)) {
                return Err(Error::param("Favard q must be positive"));
            }
            p.push(id.scale(1.0 / f.q[0]));
            if k >= 1 {
                let mut num = s.matmul(&p[0])?;
                num.axpy(-f.r[0], &p[0])?;
                p.push(num.scale(1.0 / f.q[1]));
            }
            for i in 2..=k {
                let mut num = s.matmul(&p[i - 1])?;
                num.axpy(-f.r[i - 1], &p[i - 1])?;
                num.axpy(-f.q[i - 1], &p[i - 2])?;
                p.push(num.scale(1.0 / f.q[i]));
            }
        }
    }
    Ok(p)
}

/// `Y[:, j] = sum_k sum_i w[i, j, k] P_k(S) x_i`, evaluated term by term.
pub fn dense_forward(
    x: &DenseMatrix,
    s: &DenseMatrix,
    w: &CoeffTensor,
    basis: &BasisSpec,
    favard: Option<ScalarFavard<'_>>,
) -> Result<DenseMatrix> {
    let (n, i_dim) = x.shape();
    let (wi, j_dim, orders) = w.dims();
    if wi != i_dim || s.rows() != n {
        return Err(Error::shape("dense_forward", format!("X {:?}, S {:?}, W {:?}", x.shape(), s.shape(), w.dims())));
    }
    let k = orders - 1;
    let p = dense_basis_matrices(s, basis, favard, k)?;
    let mut y = DenseMatrix::zeros(n, j_dim);
    for (kk, pk) in p.iter().enumerate() {
        for i in 0..i_dim {
            let xi = DenseMatrix::from_vec(n, 1, x.column(i))?;
            let u = pk.matmul(&xi)?;
            for j in 0..j_dim {
                let wijk = w.get(i, j, kk);
                for v in 0..n {
                    y[(v, j)] += wijk * u[(v, 0)];
                }
            }
        }
    }
    Ok(y)
}

/// [`dense_forward`] on `[X | 1]` plus an output bias, matching the affine form
/// returned by `layers::materialize_affine`.
pub fn dense_forward_affine(
    x: &DenseMatrix,
    s: &DenseMatrix,
    w: &CoeffTensor,
    bias: &DenseMatrix,
    basis: &BasisSpec,
    favard: Option<ScalarFavard<'_>>,
) -> Result<DenseMatrix> {
    let x_aug = x.hcat(&DenseMatrix::filled(x.rows(), 1, 1.0))?;
    let y = dense_forward(&x_aug, s, w, basis, favard)?;
    if bias.shape() != (1, y.cols()) {
        return Err(Error::shape("dense_forward_affine", "bias width"));
    }
    Ok(DenseMatrix::from_fn(y.rows(), y.cols(), |v, j| y[(v, j)] + bias[(0, j)]))
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: DenseMatrix,
}

fn check_symmetric(s: &DenseMatrix) -> Result<()> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::shape("symmetric_eigen", format!("{:?} is not square", s.shape())));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (s[(i, j)] - s[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::param(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Cyclic Jacobi rotations.
pub fn symmetric_eigen(s: &DenseMatrix) -> Result<EigenPair> {
    check_symmetric(s)?;
    let n = s.rows();
    let mut a = s.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = s.frobenius().max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    Ok(EigenPair {
        eigenvalues: order.iter().map(|&i| a[(i, i)]).collect(),
        eigenvectors: DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]),
    })
}

/// `U diag(h(lambda)) U^T X` applied column-wise.
pub fn spectral_filter_matrix(s: &DenseMatrix, h: impl Fn(f64) -> f64, x: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = symmetric_eigen(s)?;
    spectral_filter_with(&eig, h, x)
}

/// As [`spectral_filter_matrix`] with a precomputed decomposition.
pub fn spectral_filter_with(eig: &EigenPair, h: impl Fn(f64) -> f64, x: &DenseMatrix) -> Result<DenseMatrix> {
    let u = &eig.eigenvectors;
    let coeffs = u.matmul_transpose_a(x)?;
    let scaled = DenseMatrix::from_fn(coeffs.rows(), coeffs.cols(), |i, j| h(eig.eigenvalues[i]) * coeffs[(i, j)]);
    u.matmul(&scaled)
}

/// `U diag(h(lambda)) U^T x`.
pub fn spectral_filter(s: &DenseMatrix, h: impl Fn(f64) -> f64, x: &[f64]) -> Result<Vec<f64>> {
    let col = DenseMatrix::from_vec(x.len(), 1, x.to_vec())?;
    Ok(spectral_filter_matrix(s, h, &col)?.into_vec())
}
