//! Polynomial bases and their sparse propagation sequences
//! `V_k = P_k(S) H`, `k = 0..=K`.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use crate::ops::{kernels, Backend, Eval};
use serde::{Deserialize, Serialize};

/// Largest Bernstein order accepted; beyond this the binomial weights lose
/// integer exactness in double precision too badly to be useful.
pub const BERNSTEIN_MAX_ORDER: usize = 60;

/// Lower bound added to the softplus map that keeps Favard `q` positive.
pub const FAVARD_Q_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "basis")]
pub enum BasisSpec {
    Monomial,
    Chebyshev,
    Bernstein,
    Jacobi {
        a: f64,
        b: f64,
    },
    /// Learnable three-term recurrence; coefficients are supplied separately.
    Favard,
}

impl BasisSpec {
    pub fn jacobi_default() -> Self {
        BasisSpec::Jacobi { a: 0.0, b: 0.0 }
    }

    pub fn parse(name: &str, a: f64, b: f64) -> Result<Self> {
        Ok(match name {
            "monomial" => BasisSpec::Monomial,
            "chebyshev" => BasisSpec::Chebyshev,
            "bernstein" => BasisSpec::Bernstein,
            "jacobi" => BasisSpec::Jacobi { a, b },
            "favard" => BasisSpec::Favard,
            other => return Err(Error::param(format!("unknown basis '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BasisSpec::Monomial => "monomial",
            BasisSpec::Chebyshev => "chebyshev",
            BasisSpec::Bernstein => "bernstein",
            BasisSpec::Jacobi { .. } => "jacobi",
            BasisSpec::Favard => "favard",
        }
    }

    /// Checks that the basis is well defined up to order `k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        match *self {
            BasisSpec::Bernstein if k > BERNSTEIN_MAX_ORDER => {
                Err(Error::param(format!("Bernstein order {k} exceeds {BERNSTEIN_MAX_ORDER}")))
            }
            BasisSpec::Jacobi { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::param("Jacobi parameters must be finite"));
                }
                for order in 2..=k {
                    JacobiCoeffs::at(order, a, b)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Recurrence coefficients of the Jacobi basis at order `k >= 2`:
/// `P_k(s) = (theta s + theta_prime) P_{k-1}(s) - theta_second P_{k-2}(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiCoeffs {
    pub theta: f64,
    pub theta_prime: f64,
    pub theta_second: f64,
}

impl JacobiCoeffs {
    pub fn at(k: usize, a: f64, b: f64) -> Result<Self> {
        let kf = k as f64;
        let d1 = 2.0 * kf * (kf + a + b);
        let d2 = d1 * (2.0 * kf + a + b - 2.0);
        let d3 = kf * (kf + a + b) * (2.0 * kf + a + b - 2.0);
        if d1 == 0.0 || d2 == 0.0 || d3 == 0.0 {
            return Err(Error::Construction(format!("Jacobi recurrence undefined at order {k} for a = {a}, b = {b}")));
        }
        let s = 2.0 * kf + a + b;
        Ok(JacobiCoeffs {
            theta: s * (s - 1.0) / d1,
            theta_prime: (s - 1.0) * (a * a - b * b) / d2,
            theta_second: (kf + a - 1.0) * (kf + b - 1.0) * s / d3,
        })
    }
}

/// Per-order, per-channel Favard coefficients: `q[k, c]` holds the positive
/// normalizers and `r[k, c]` the shifts. Both are (K+1) x channels.
#[derive(Debug, Clone)]
pub struct FavardCoeffs<V> {
    pub q: V,
    pub r: V,
}

/// Unconstrained Favard parameters; `q = softplus(raw_q) + FAVARD_Q_FLOOR`.
#[derive(Debug, Clone, PartialEq)]
pub struct FavardParams {
    pub raw_q: DenseMatrix,
    pub r: DenseMatrix,
}

impl FavardParams {
    pub fn new(raw_q: DenseMatrix, r: DenseMatrix) -> Result<Self> {
        if raw_q.shape() != r.shape() {
            return Err(Error::shape("FavardParams", "raw_q and r must share a shape"));
        }
        Ok(FavardParams { raw_q, r })
    }

    /// Parameters whose derived `q` is 1 everywhere and `r` is 0, i.e. the
    /// recurrence `V_k = S V_{k-1} - V_{k-2}`.
    pub fn unit(k: usize, channels: usize) -> Self {
        FavardParams {
            raw_q: DenseMatrix::filled(k + 1, channels, inverse_q_map(1.0)),
            r: DenseMatrix::zeros(k + 1, channels),
        }
    }

    pub fn q(&self) -> DenseMatrix {
        self.raw_q.map(q_map)
    }

    pub fn coeffs(&self) -> FavardCoeffs<DenseMatrix> {
        FavardCoeffs { q: self.q(), r: self.r.clone() }
    }
}

/// Positive map from raw parameter to `q`.
pub fn q_map(raw: f64) -> f64 {
    kernels::softplus(raw) + FAVARD_Q_FLOOR
}

/// Inverse of [`q_map`] for `q > FAVARD_Q_FLOOR`.
pub fn inverse_q_map(q: f64) -> f64 {
    let y = q - FAVARD_Q_FLOOR;
    // ln(e^y - 1)
    y + (-(-y).exp()).ln_1p()
}

/// Buffers `V_0..V_K`, all n x c.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationSequence {
    pub buffers: Vec<DenseMatrix>,
}

impl PropagationSequence {
    pub fn order(&self) -> usize {
        self.buffers.len() - 1
    }
}

/// Binomial coefficient as the nearest double.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Runs the recurrence of `basis` on `h` through backend `bk`.
///
/// `favard` must be supplied exactly when `basis` is [`BasisSpec::Favard`];
/// its matrices are (K+1) x c with c the column count of `h`.
pub fn propagate<'s, B: Backend<'s>>(
    bk: &mut B,
    s: &'s SparseMatrix,
    basis: &BasisSpec,
    favard: Option<&FavardCoeffs<B::Val>>,
    h: &B::Val,
    k: usize,
) -> Result<Vec<B::Val>> {
    basis.validate(k)?;
    let (n, _) = bk.value(h).shape();
    if s.n_cols() != n || !s.is_square() {
        return Err(Error::shape(
            "propagate",
            format!("graph matrix {}x{} against signal with {n} rows", s.n_rows(), s.n_cols()),
        ));
    }
    match *basis {
        BasisSpec::Monomial => {
            let mut out = vec![h.clone()];
            for i in 1..=k {
                let next = bk.spmm(s, &out[i - 1])?;
                out.push(next);
            }
            Ok(out)
        }
        BasisSpec::Chebyshev => {
            let mut out = vec![h.clone()];
            if k >= 1 {
                let v1 = bk.spmm(s, h)?;
                out.push(v1);
            }
            for i in 2..=k {
                let sv = bk.spmm(s, &out[i - 1])?;
                let twice = bk.scale(&sv, 2.0);
                let next = bk.sub(&twice, &out[i - 2])?;
                out.push(next);
            }
            Ok(out)
        }
        BasisSpec::Jacobi { a, b } => {
            let mut out = vec![h.clone()];
            if k >= 1 {
                let sv = bk.spmm(s, h)?;
                let lhs = bk.scale(h, (a - b) / 2.0);
                let rhs = bk.scale(&sv, (a + b + 2.0) / 2.0);
                let v1 = bk.add(&lhs, &rhs)?;
                out.push(v1);
            }
            for i in 2..=k {
                let c = JacobiCoeffs::at(i, a, b)?;
                let sv = bk.spmm(s, &out[i - 1])?;
                let t1 = bk.scale(&sv, c.theta);
                let t2 = bk.scale(&out[i - 1], c.theta_prime);
                let t3 = bk.scale(&out[i - 2], c.theta_second);
                let partial = bk.add(&t1, &t2)?;
                let next = bk.sub(&partial, &t3)?;
                out.push(next);
            }
            Ok(out)
        }
        BasisSpec::Bernstein => {
            // w[i] = (I - S)^i H
            let mut w = vec![h.clone()];
            for i in 1..=k {
                let sw = bk.spmm(s, &w[i - 1])?;
                let next = bk.sub(&w[i - 1], &sw)?;
                w.push(next);
            }
            let mut out = Vec::with_capacity(k + 1);
            for order in 0..=k {
                let mut acc = w[k - order].clone();
                for _ in 0..order {
                    acc = bk.spmm(s, &acc)?;
                }
                out.push(bk.scale(&acc, binomial(k, order)));
            }
            Ok(out)
        }
        BasisSpec::Favard => {
            let coeffs = favard.ok_or_else(|| Error::param("Favard basis requires coefficients"))?;
            let c = bk.value(h).cols();
            for (name, m) in [("q", bk.value(&coeffs.q)), ("r", bk.value(&coeffs.r))] {
                if m.rows() < k + 1 || m.cols() != c {
                    return Err(Error::shape(
                        "propagate_favard",
                        format!("{name} is {:?}, need {}x{c}", m.shape(), k + 1),
                    ));
                }
            }
            if let Some(bad) = bk.value(&coeffs.q).as_slice().iter().find(|&&q| !(q > 0.0)) {
                return Err(Error::param(format!("Favard q must be positive, found {bad}")));
            }
            let v0 = bk.col_div_row(h, &coeffs.q, 0)?;
            let mut out = vec![v0];
            if k >= 1 {
                let sv = bk.spmm(s, &out[0])?;
                let shift = bk.col_scale_row(&out[0], &coeffs.r, 0)?;
                let num = bk.sub(&sv, &shift)?;
                let v1 = bk.col_div_row(&num, &coeffs.q, 1)?;
                out.push(v1);
            }
            for i in 2..=k {
                let sv = bk.spmm(s, &out[i - 1])?;
                let shift = bk.col_scale_row(&out[i - 1], &coeffs.r, i - 1)?;
                let back = bk.col_scale_row(&out[i - 2], &coeffs.q, i - 1)?;
                let partial = bk.sub(&sv, &shift)?;
                let num = bk.sub(&partial, &back)?;
                let next = bk.col_div_row(&num, &coeffs.q, i)?;
                out.push(next);
            }
            Ok(out)
        }
    }
}

fn eager(
    s: &SparseMatrix,
    basis: BasisSpec,
    favard: Option<&FavardCoeffs<DenseMatrix>>,
    h: &DenseMatrix,
    k: usize,
) -> Result<PropagationSequence> {
    let buffers = propagate(&mut Eval, s, &basis, favard, h, k)?;
    Ok(PropagationSequence { buffers })
}

pub fn propagate_monomial(s: &SparseMatrix, h: &DenseMatrix, k: usize) -> Result<PropagationSequence> {
    eager(s, BasisSpec::Monomial, None, h, k)
}

pub fn propagate_chebyshev(s: &SparseMatrix, h: &DenseMatrix, k: usize) -> Result<PropagationSequence> {
    eager(s, BasisSpec::Chebyshev, None, h, k)
}

pub fn propagate_jacobi(s: &SparseMatrix, h: &DenseMatrix, k: usize, a: f64, b: f64) -> Result<PropagationSequence> {
    eager(s, BasisSpec::Jacobi { a, b }, None, h, k)
}

pub fn propagate_bernstein(s: &SparseMatrix, h: &DenseMatrix, k: usize) -> Result<PropagationSequence> {
    eager(s, BasisSpec::Bernstein, None, h, k)
}

/// Favard propagation; the order is taken from the parameter rows (K+1).
pub fn propagate_favard(s: &SparseMatrix, h: &DenseMatrix, params: &FavardParams) -> Result<PropagationSequence> {
    let k = params.raw_q.rows().checked_sub(1).ok_or_else(|| Error::param("empty Favard parameters"))?;
    eager(s, BasisSpec::Favard, Some(&params.coeffs()), h, k)
}

/// Favard propagation from already-positive coefficients.
pub fn propagate_favard_coeffs(
    s: &SparseMatrix,
    h: &DenseMatrix,
    coeffs: &FavardCoeffs<DenseMatrix>,
) -> Result<PropagationSequence> {
    let k = coeffs.q.rows().checked_sub(1).ok_or_else(|| Error::param("empty Favard parameters"))?;
    eager(s, BasisSpec::Favard, Some(coeffs), h, k)
}
