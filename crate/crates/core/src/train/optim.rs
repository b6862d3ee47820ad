use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Learning rate and weight decay shared by a set of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

/// First and second moments per tensor, plus the step counter.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub t: u64,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam update with bias correction. Weight decay is added to the
/// gradient before the moment updates. `group_of[i]` indexes `groups` for
/// tensor `i`.
pub fn adam_step(
    params: &mut [DenseMatrix],
    grads: &[DenseMatrix],
    groups: &[ParamGroup],
    group_of: &[usize],
    state: &mut AdamState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != group_of.len() {
        return Err(Error::shape("adam_step", "params, grads and group map differ in length"));
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len() {
        return Err(Error::shape("adam_step", "state was built for a different parameter set"));
    }
    state.t += 1;
    let c1 = 1.0 - BETA1.powi(state.t as i32);
    let c2 = 1.0 - BETA2.powi(state.t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].shape() != p.shape() {
            return Err(Error::shape("adam_step", format!("tensor {i}: {:?} vs {:?}", p.shape(), g.shape())));
        }
        let group = groups.get(group_of[i]).ok_or_else(|| Error::shape("adam_step", "group index out of range"))?;
        let (lr, wd) = (group.learning_rate, group.weight_decay);
        let m = state.m[i].as_mut_slice();
        let v = state.v[i].as_mut_slice();
        for (((w, &gr), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
            let gr = gr + wd * *w;
            *mi = BETA1 * *mi + (1.0 - BETA1) * gr;
            *vi = BETA2 * *vi + (1.0 - BETA2) * gr * gr;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *w -= lr * mhat / (vhat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
