//! Reverse-mode differentiation on a Wengert tape.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{spmm_transpose, SparseMatrix};
use crate::ops::{check_rate, kernels, Backend, DropSite, DropoutRates};
use crate::rng::Stream;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<'s> {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    SpMM(&'s SparseMatrix, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    ColScaleRow { a: Var, v: Var, row: usize },
    ColDivRow { a: Var, v: Var, row: usize },
    ScaleByEntry { a: Var, v: Var, idx: usize },
    AddBias { a: Var, b: Var },
    Mode3 { a: Var, m: Var, row: usize, q: usize },
    HCat(Var, Var),
    Relu(Var),
    Softplus(Var),
    Dropout { a: Var, mask: Vec<f64> },
    LogSoftmax(Var),
    MaskedNll { logp: Var, targets: Vec<(usize, usize)> },
    MaskedMse { pred: Var, target: DenseMatrix, rows: Vec<usize> },
}

#[derive(Debug)]
struct Node<'s> {
    op: Op<'s>,
    value: DenseMatrix,
    needs_grad: bool,
}

struct DropoutCtx {
    rates: DropoutRates,
    rng: Stream,
}

/// Append-only record of a computation. Graph matrices are borrowed for `'s`
/// and never differentiated.
pub struct Tape<'s> {
    nodes: Vec<Node<'s>>,
    params: Vec<Var>,
    dropout: Option<DropoutCtx>,
}

impl<'s> Default for Tape<'s> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'s> Tape<'s> {
    /// A tape whose dropout sites are identity.
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), params: Vec::new(), dropout: None }
    }

    /// A tape in training mode: dropout sites draw masks from `rng`.
    pub fn training(rates: DropoutRates, rng: Stream) -> Result<Self> {
        rates.validate()?;
        Ok(Tape { nodes: Vec::new(), params: Vec::new(), dropout: Some(DropoutCtx { rates, rng }) })
    }

    /// Hands back the dropout stream, advanced past every mask drawn.
    pub fn into_rng(self) -> Option<Stream> {
        self.dropout.map(|d| d.rng)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<'s>, value: DenseMatrix, inputs: &[Var]) -> Var {
        let needs_grad = match op {
            Op::Leaf => false,
            Op::Param(_) => true,
            _ => inputs.iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    /// Registers a trainable value. Gradients come back from [`Tape::backward`]
    /// in registration order.
    pub fn param(&mut self, value: DenseMatrix) -> Var {
        let idx = self.params.len();
        let v = self.push(Op::Param(idx), value, &[]);
        self.params.push(v);
        v
    }

    pub fn leaf(&mut self, value: DenseMatrix) -> Var {
        self.push(Op::Leaf, value, &[])
    }

    pub fn get(&self, v: Var) -> &DenseMatrix {
        self.val(v)
    }

    /// Dropout with an explicit rate, independent of the configured sites.
    pub fn dropout_rate(&mut self, a: Var, rate: f64) -> Result<Var> {
        check_rate(rate)?;
        let Some(ctx) = self.dropout.as_mut() else {
            return Ok(a);
        };
        if rate == 0.0 {
            return Ok(a);
        }
        let mask = kernels::dropout_mask(self.nodes[a.0].value.as_slice().len(), rate, &mut ctx.rng);
        let x = self.val(a);
        let data = x.as_slice().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = DenseMatrix::from_vec(x.rows(), x.cols(), data)?;
        Ok(self.push(Op::Dropout { a, mask }, value, &[a]))
    }

    /// Row-wise `x - logsumexp(x)`.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let value = log_softmax(self.val(a));
        self.push(Op::LogSoftmax(a), value, &[a])
    }

    /// `-(1/|rows|) sum_r logp[r, labels[r]]` over the listed rows.
    pub fn masked_nll(&mut self, logp: Var, labels: &[usize], rows: &[usize]) -> Result<Var> {
        let lp = self.val(logp);
        if rows.is_empty() {
            return Err(Error::param("masked_nll over an empty mask"));
        }
        let mut targets = Vec::with_capacity(rows.len());
        for &r in rows {
            let y = *labels.get(r).ok_or_else(|| Error::shape("masked_nll", "row beyond labels"))?;
            if r >= lp.rows() || y >= lp.cols() {
                return Err(Error::shape("masked_nll", format!("target ({r}, {y}) outside {:?}", lp.shape())));
            }
            targets.push((r, y));
        }
        let value = DenseMatrix::filled(1, 1, nll(lp, &targets));
        Ok(self.push(Op::MaskedNll { logp, targets }, value, &[logp]))
    }

    /// Mean squared error over the listed rows (mean over all their entries).
    pub fn masked_mse(&mut self, pred: Var, target: &DenseMatrix, rows: &[usize]) -> Result<Var> {
        let p = self.val(pred);
        if p.shape() != target.shape() {
            return Err(Error::shape("masked_mse", format!("{:?} vs {:?}", p.shape(), target.shape())));
        }
        if rows.is_empty() || rows.iter().any(|&r| r >= p.rows()) {
            return Err(Error::param("masked_mse needs a nonempty in-range mask"));
        }
        let value = DenseMatrix::filled(1, 1, mse(p, target, rows));
        Ok(self.push(Op::MaskedMse { pred, target: target.clone(), rows: rows.to_vec() }, value, &[pred]))
    }

    /// Gradients of the 1 x 1 value `loss` with respect to every registered
    /// parameter, in registration order. Parameters the loss does not depend on
    /// get exact zeros.
    pub fn backward(&self, loss: Var) -> Result<Vec<DenseMatrix>> {
        if self.val(loss).shape() != (1, 1) {
            return Err(Error::Tape(format!("loss must be 1 x 1, got {:?}", self.val(loss).shape())));
        }
        let mut adj: Vec<Option<DenseMatrix>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(DenseMatrix::filled(1, 1, 1.0));
        let mut grads: Vec<DenseMatrix> = self
            .params
            .iter()
            .map(|p| {
                let (r, c) = self.val(*p).shape();
                DenseMatrix::zeros(r, c)
            })
            .collect();
        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.push_adjoints(node, g, &mut adj, &mut grads)?;
        }
        Ok(grads)
    }

    fn push_adjoints(
        &self,
        node: &Node<'s>,
        g: DenseMatrix,
        adj: &mut [Option<DenseMatrix>],
        grads: &mut [DenseMatrix],
    ) -> Result<()> {
        let needs = |v: Var| self.nodes[v.0].needs_grad;
        let mut acc = |v: Var, contrib: DenseMatrix| -> Result<()> {
            match adj[v.0].as_mut() {
                Some(existing) => existing.add_assign(&contrib),
                None => {
                    adj[v.0] = Some(contrib);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Param(i) => grads[*i] = g,
            Op::MatMul(a, b) => {
                if needs(*a) {
                    acc(*a, g.matmul_transpose_b(self.val(*b))?)?;
                }
                if needs(*b) {
                    acc(*b, self.val(*a).matmul_transpose_a(&g)?)?;
                }
            }
            Op::MatMulBt(a, b) => {
                if needs(*a) {
                    acc(*a, g.matmul(self.val(*b))?)?;
                }
                if needs(*b) {
                    acc(*b, g.matmul_transpose_a(self.val(*a))?)?;
                }
            }
            Op::SpMM(s, h) => acc(*h, spmm_transpose(s, &g)?)?,
            Op::Add(a, b) => {
                if needs(*a) {
                    acc(*a, g.clone())?;
                }
                if needs(*b) {
                    acc(*b, g)?;
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    acc(*a, g.clone())?;
                }
                if needs(*b) {
                    acc(*b, g.scale(-1.0))?;
                }
            }
            Op::Scale(a, c) => acc(*a, g.scale(*c))?,
            Op::ColScaleRow { a, v, row } => {
                if needs(*a) {
                    acc(*a, kernels::col_scale_row(&g, self.val(*v), *row)?)?;
                }
                if needs(*v) {
                    let sums = column_dot(&g, self.val(*a));
                    acc(*v, row_embed(self.val(*v).shape(), *row, &sums))?;
                }
            }
            Op::ColDivRow { a, v, row } => {
                if needs(*a) {
                    acc(*a, kernels::col_div_row(&g, self.val(*v), *row)?)?;
                }
                if needs(*v) {
                    let d = self.val(*v).row(*row);
                    let sums: Vec<f64> =
                        column_dot(&g, self.val(*a)).iter().zip(d).map(|(s, dj)| -s / (dj * dj)).collect();
                    acc(*v, row_embed(self.val(*v).shape(), *row, &sums))?;
                }
            }
            Op::ScaleByEntry { a, v, idx } => {
                if needs(*a) {
                    acc(*a, kernels::scale_by_entry(&g, self.val(*v), *idx)?)?;
                }
                if needs(*v) {
                    let (r, c) = self.val(*v).shape();
                    let mut dv = DenseMatrix::zeros(r, c);
                    dv.as_mut_slice()[*idx] = column_dot(&g, self.val(*a)).iter().sum();
                    acc(*v, dv)?;
                }
            }
            Op::AddBias { a, b } => {
                if needs(*b) {
                    let mut db = DenseMatrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (d, x) in db.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *d += x;
                        }
                    }
                    acc(*b, db)?;
                }
                if needs(*a) {
                    acc(*a, g)?;
                }
            }
            Op::Mode3 { a, m, row, q } => {
                let (q, row) = (*q, *row);
                let mv = self.val(*m);
                let r = mv.cols();
                if needs(*a) {
                    let mrow = mv.row(row);
                    let da = DenseMatrix::from_fn(g.rows(), q * r, |v, col| g[(v, col % q)] * mrow[col / q]);
                    acc(*a, da)?;
                }
                if needs(*m) {
                    let av = self.val(*a);
                    let mut sums = vec![0.0; r];
                    for v in 0..g.rows() {
                        let (grow, arow) = (g.row(v), av.row(v));
                        for (rr, s) in sums.iter_mut().enumerate() {
                            for (qq, gv) in grow.iter().enumerate() {
                                *s += gv * arow[qq + rr * q];
                            }
                        }
                    }
                    acc(*m, row_embed(mv.shape(), row, &sums))?;
                }
            }
            Op::HCat(a, b) => {
                let ca = self.val(*a).cols();
                if needs(*a) {
                    acc(*a, DenseMatrix::from_fn(g.rows(), ca, |i, j| g[(i, j)]))?;
                }
                if needs(*b) {
                    acc(*b, DenseMatrix::from_fn(g.rows(), g.cols() - ca, |i, j| g[(i, ca + j)]))?;
                }
            }
            Op::Relu(a) => acc(*a, g.zip_map(self.val(*a), "relu", |gv, x| if x > 0.0 { gv } else { 0.0 })?)?,
            Op::Softplus(a) => acc(*a, g.zip_map(self.val(*a), "softplus", |gv, x| gv * kernels::sigmoid(x))?)?,
            Op::Dropout { a, mask } => {
                let data = g.as_slice().iter().zip(mask).map(|(gv, m)| gv * m).collect();
                acc(*a, DenseMatrix::from_vec(g.rows(), g.cols(), data)?)?;
            }
            Op::LogSoftmax(a) => {
                let y = &node.value;
                let dx = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| {
                    let total: f64 = g.row(i).iter().sum();
                    g[(i, j)] - y[(i, j)].exp() * total
                });
                acc(*a, dx)?;
            }
            Op::MaskedNll { logp, targets } => {
                let (r, c) = self.val(*logp).shape();
                let mut d = DenseMatrix::zeros(r, c);
                let w = -g[(0, 0)] / targets.len() as f64;
                for &(row, y) in targets {
                    d[(row, y)] += w;
                }
                acc(*logp, d)?;
            }
            Op::MaskedMse { pred, target, rows } => {
                let p = self.val(*pred);
                let mut d = DenseMatrix::zeros(p.rows(), p.cols());
                let w = 2.0 * g[(0, 0)] / (rows.len() * p.cols()) as f64;
                for &row in rows {
                    for j in 0..p.cols() {
                        d[(row, j)] += w * (p[(row, j)] - target[(row, j)]);
                    }
                }
                acc(*pred, d)?;
            }
        }
        Ok(())
    }
}

/// `out[j] = sum_i g[i, j] a[i, j]`.
fn column_dot(g: &DenseMatrix, a: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; g.cols()];
    for i in 0..g.rows() {
        for ((o, gv), av) in out.iter_mut().zip(g.row(i)).zip(a.row(i)) {
            *o += gv * av;
        }
    }
    out
}

fn row_embed(shape: (usize, usize), row: usize, values: &[f64]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(shape.0, shape.1);
    m.row_mut(row).copy_from_slice(values);
    m
}

/// Row-wise log-softmax.
pub fn log_softmax(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

fn nll(logp: &DenseMatrix, targets: &[(usize, usize)]) -> f64 {
    -targets.iter().map(|&(r, y)| logp[(r, y)]).sum::<f64>() / targets.len() as f64
}

/// Masked negative log-likelihood of row-wise log-probabilities.
pub fn masked_nll(logp: &DenseMatrix, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::param("masked_nll over an empty mask"));
    }
    let targets: Vec<(usize, usize)> = rows.iter().map(|&r| (r, labels[r])).collect();
    Ok(nll(logp, &targets))
}

/// Mean squared error over the entries of the listed rows.
pub fn mse(pred: &DenseMatrix, target: &DenseMatrix, rows: &[usize]) -> f64 {
    let mut total = 0.0;
    for &r in rows {
        for (p, t) in pred.row(r).iter().zip(target.row(r)) {
            total += (p - t) * (p - t);
        }
    }
    total / (rows.len() * pred.cols()) as f64
}

impl<'s> Backend<'s> for Tape<'s> {
    type Val = Var;

    fn value<'a>(&'a self, v: &'a Var) -> &'a DenseMatrix {
        self.val(*v)
    }

    fn constant(&mut self, m: DenseMatrix) -> Var {
        self.leaf(m)
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let value = self.val(*a).matmul(self.val(*b))?;
        Ok(self.push(Op::MatMul(*a, *b), value, &[*a, *b]))
    }

    fn matmul_bt(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let value = self.val(*a).matmul_transpose_b(self.val(*b))?;
        Ok(self.push(Op::MatMulBt(*a, *b), value, &[*a, *b]))
    }

    fn spmm(&mut self, s: &'s SparseMatrix, h: &Var) -> Result<Var> {
        let value = crate::graph::spmm(s, self.val(*h))?;
        Ok(self.push(Op::SpMM(s, *h), value, &[*h]))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let value = self.val(*a).add(self.val(*b))?;
        Ok(self.push(Op::Add(*a, *b), value, &[*a, *b]))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let value = self.val(*a).sub(self.val(*b))?;
        Ok(self.push(Op::Sub(*a, *b), value, &[*a, *b]))
    }

    fn scale(&mut self, a: &Var, c: f64) -> Var {
        let value = self.val(*a).scale(c);
        self.push(Op::Scale(*a, c), value, &[*a])
    }

    fn col_scale_row(&mut self, a: &Var, v: &Var, row: usize) -> Result<Var> {
        let value = kernels::col_scale_row(self.val(*a), self.val(*v), row)?;
        Ok(self.push(Op::ColScaleRow { a: *a, v: *v, row }, value, &[*a, *v]))
    }

    fn col_div_row(&mut self, a: &Var, v: &Var, row: usize) -> Result<Var> {
        let value = kernels::col_div_row(self.val(*a), self.val(*v), row)?;
        Ok(self.push(Op::ColDivRow { a: *a, v: *v, row }, value, &[*a, *v]))
    }

    fn scale_by_entry(&mut self, a: &Var, v: &Var, idx: usize) -> Result<Var> {
        let value = kernels::scale_by_entry(self.val(*a), self.val(*v), idx)?;
        Ok(self.push(Op::ScaleByEntry { a: *a, v: *v, idx }, value, &[*a, *v]))
    }

    fn add_bias(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let value = kernels::add_bias(self.val(*a), self.val(*b))?;
        Ok(self.push(Op::AddBias { a: *a, b: *b }, value, &[*a, *b]))
    }

    fn mode3(&mut self, a: &Var, m: &Var, row: usize, q: usize) -> Result<Var> {
        let value = kernels::mode3(self.val(*a), self.val(*m), row, q)?;
        Ok(self.push(Op::Mode3 { a: *a, m: *m, row, q }, value, &[*a, *m]))
    }

    fn hcat(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let value = self.val(*a).hcat(self.val(*b))?;
        Ok(self.push(Op::HCat(*a, *b), value, &[*a, *b]))
    }

    fn relu(&mut self, a: &Var) -> Var {
        let value = self.val(*a).map(|v| v.max(0.0));
        self.push(Op::Relu(*a), value, &[*a])
    }

    fn softplus(&mut self, a: &Var, shift: f64) -> Var {
        let value = self.val(*a).map(|v| kernels::softplus(v) + shift);
        self.push(Op::Softplus(*a), value, &[*a])
    }

    fn dropout(&mut self, a: &Var, site: DropSite) -> Result<Var> {
        let rate = match &self.dropout {
            Some(ctx) => ctx.rates.rate(site),
            None => return Ok(*a),
        };
        self.dropout_rate(*a, rate)
    }
}

/// Outcome of [`finite_diff_check`].
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error per parameter.
    pub per_param: Vec<f64>,
    pub max_rel_error: f64,
    pub coordinates_checked: usize,
}

/// Compares `grads` with central differences of `loss` at `params`.
///
/// At most `max_coords` coordinates per parameter are probed, chosen at random
/// from `rng` when the parameter is larger. The relative error of a coordinate
/// is `|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)`.
pub fn finite_diff_check(
    mut loss: impl FnMut(&[DenseMatrix]) -> Result<f64>,
    params: &[DenseMatrix],
    grads: &[DenseMatrix],
    step: f64,
    max_coords: usize,
    rng: &mut Stream,
) -> Result<GradCheckReport> {
    if params.len() != grads.len() {
        return Err(Error::shape("finite_diff_check", "one gradient per parameter"));
    }
    let mut work = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    let mut checked = 0;
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape("finite_diff_check", format!("{:?} vs {:?}", p.shape(), g.shape())));
        }
    }
    for pi in 0..params.len() {
        let len = params[pi].as_slice().len();
        let coords: Vec<usize> = if len <= max_coords {
            (0..len).collect()
        } else {
            rng.permutation(len).into_iter().take(max_coords).collect()
        };
        let mut worst = 0.0f64;
        for c in coords {
            let orig = params[pi].as_slice()[c];
            work[pi].as_mut_slice()[c] = orig + step;
            let up = loss(&work)?;
            work[pi].as_mut_slice()[c] = orig - step;
            let down = loss(&work)?;
            work[pi].as_mut_slice()[c] = orig;
            let fd = (up - down) / (2.0 * step);
            let ad = grads[pi].as_slice()[c];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
            checked += 1;
        }
        per_param.push(worst);
    }
    let max_rel_error = per_param.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport { per_param, max_rel_error, coordinates_checked: checked })
}
