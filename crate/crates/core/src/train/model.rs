use super::config::{Architecture, BiasInit, ModelVariant, TrainConfig};
use crate::autodiff::{Tape, Var};
use crate::basis::{inverse_q_map, BasisSpec, FavardCoeffs, FAVARD_Q_FLOOR};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use crate::layers::{
    appnp_alpha, forward, gcn_alpha, Affine, AlphaMode, CpFactors, Decomposition, FullCoefficients, PerInputDecomp,
    PerOutputDecomp, PolyFilter, ScalarDecomp, TuckerFactors,
};
use crate::ops::{Backend, DropSite, Eval};
use crate::rng::Stream;

/// I.i.d. uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_params(rows: usize, cols: usize, fan_in: usize, rng: &mut Stream) -> DenseMatrix {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    DenseMatrix::random_uniform(rows, cols, -bound, bound, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub group: &'static str,
    pub value: DenseMatrix,
}

/// Trainable tensors in a fixed order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub params: Vec<Param>,
}

impl ParamStore {
    fn add(&mut self, name: impl Into<String>, group: &'static str, value: DenseMatrix) -> usize {
        self.params.push(Param { name: name.into(), group, value });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn values(&self) -> Vec<DenseMatrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn set_values(&mut self, values: Vec<DenseMatrix>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::shape("ParamStore::set_values", "parameter count"));
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(Error::shape("ParamStore::set_values", p.name.clone()));
            }
            p.value = v;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Full(Vec<usize>),
    Scalar { w: usize, b: usize, coeff: Coeff, mode: AlphaMode },
    PerOutput { w: usize, b: usize, a: usize, strict: bool },
    PerInput { w: usize, b: usize, a: usize },
    Cp { c: usize, b_c: usize, p: usize, b_p: usize, m: usize },
    Tucker { input: Option<(usize, usize)>, g1: usize, b_g: usize, output: Option<(usize, usize)>, m: usize },
}

#[derive(Debug, Clone)]
enum Coeff {
    Param(usize),
    Fixed(DenseMatrix),
}

/// A single-layer spectral model, optionally preceded by a dense ReLU layer.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: TrainConfig,
    pub in_dim: usize,
    pub out_dim: usize,
    pub params: ParamStore,
    feat: Option<(usize, usize)>,
    layout: Layout,
    favard: Option<(usize, usize)>,
}

impl Model {
    /// Builds the model and draws initial parameters from `rng`.
    pub fn assemble(config: &TrainConfig, in_dim: usize, out_dim: usize, rng: &mut Stream) -> Result<Self> {
        config.validate()?;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::param("model needs positive input and output widths"));
        }
        let k = config.k;
        let orders = k + 1;
        let mut ps = ParamStore::default();
        let bias = |cols: usize, fan_in: usize, rng: &mut Stream| match config.bias_init {
            BiasInit::Uniform => init_params(1, cols, fan_in, rng),
            BiasInit::Zero => DenseMatrix::zeros(1, cols),
        };
        let feat = match config.architecture {
            Architecture::Linear => None,
            Architecture::Hybrid => {
                let h = config.hidden_dim;
                let w = ps.add("feat.weight", "feat", init_params(in_dim, h, in_dim, rng));
                let b = ps.add("feat.bias", "feat", bias(h, in_dim, rng));
                Some((w, b))
            }
        };
        let i = if feat.is_some() { config.hidden_dim } else { in_dim };
        let j = out_dim;
        let ranks = config.ranks;
        let (layout, channels) = match config.variant {
            ModelVariant::Full => {
                let wk = (0..orders).map(|kk| ps.add(format!("W{kk}"), "W", init_params(i, j, i, rng))).collect();
                (Layout::Full(wk), i)
            }
            ModelVariant::ScalarFixedGcn
            | ModelVariant::ScalarFixedAppnp
            | ModelVariant::ScalarLearned
            | ModelVariant::ScalarChebii => {
                let w = ps.add("W", "W", init_params(i, j, i, rng));
                let b = ps.add("b", "W", bias(j, i, rng));
                let (coeff, mode) = match config.variant {
                    ModelVariant::ScalarFixedGcn => {
                        (Coeff::Fixed(DenseMatrix::row_vector(&gcn_alpha(k)?)), AlphaMode::Gcn)
                    }
                    ModelVariant::ScalarFixedAppnp => (
                        Coeff::Fixed(DenseMatrix::row_vector(&appnp_alpha(config.teleport, k)?)),
                        AlphaMode::Appnp { teleport: config.teleport },
                    ),
                    ModelVariant::ScalarLearned => (
                        Coeff::Param(ps.add("alpha", "alpha", init_params(1, orders, orders, rng))),
                        AlphaMode::Learned,
                    ),
                    _ => (
                        Coeff::Param(ps.add("gamma", "alpha", init_params(1, orders, orders, rng))),
                        AlphaMode::ChebInterp,
                    ),
                };
                (Layout::Scalar { w, b, coeff, mode }, i)
            }
            ModelVariant::PerOutput => {
                let w = ps.add("W", "W", init_params(i, j, i, rng));
                let b = ps.add("b", "W", bias(j, i, rng));
                let a = ps.add("A", "alpha", init_params(orders, j, orders, rng));
                let strict = config.strict_per_output;
                (Layout::PerOutput { w, b, a, strict }, j)
            }
            ModelVariant::PerInput => {
                let w = ps.add("W", "W", init_params(i, j, i, rng));
                let b = ps.add("b", "W", bias(j, i, rng));
                let a = ps.add("A", "alpha", init_params(orders, i, orders, rng));
                (Layout::PerInput { w, b, a }, i)
            }
            ModelVariant::Cp => {
                let r = ranks.r;
                let c = ps.add("C", "C", init_params(i, r, i, rng));
                let b_c = ps.add("b_C", "C", bias(r, i, rng));
                let p = ps.add("P", "P", init_params(j, r, r, rng));
                let b_p = ps.add("b_P", "P", bias(j, r, rng));
                let m = ps.add("M", "M", init_params(orders, r, orders, rng));
                (Layout::Cp { c, b_c, p, b_p, m }, r)
            }
            ModelVariant::Tucker | ModelVariant::Tucker1 | ModelVariant::Tucker2 => {
                let r = ranks.r;
                let has_c = config.variant == ModelVariant::Tucker;
                let has_p = config.variant != ModelVariant::Tucker1;
                let pd = if has_c { ranks.p_dim } else { i };
                let q = if has_p { ranks.q } else { j };
                let input = has_c.then(|| {
                    let c = ps.add("C", "C", init_params(i, pd, i, rng));
                    let b_c = ps.add("b_C", "C", bias(pd, i, rng));
                    (c, b_c)
                });
                let g1 = ps.add("G1", "G", init_params(pd, q * r, pd, rng));
                let b_g = ps.add("b_G", "G", bias(q * r, pd, rng));
                let output = has_p.then(|| {
                    let p = ps.add("P", "P", init_params(j, q, q, rng));
                    let b_p = ps.add("b_P", "P", bias(j, q, rng));
                    (p, b_p)
                });
                let m = ps.add("M", "M", init_params(orders, r, orders, rng));
                (Layout::Tucker { input, g1, b_g, output, m }, q * r)
            }
        };
        let favard = match config.basis {
            BasisSpec::Favard => {
                let raw_q = ps.add("favard.raw_q", "basis", DenseMatrix::filled(orders, channels, inverse_q_map(1.0)));
                let r = ps.add("favard.r", "basis", init_params(orders, channels, orders, rng));
                Some((raw_q, r))
            }
            _ => None,
        };
        Ok(Model { config: config.clone(), in_dim, out_dim, params: ps, feat, layout, favard })
    }

    /// The spectral layer with parameters taken from `vals`.
    pub fn decomposition<V: Clone>(&self, vals: &[V], fixed: impl FnMut(&DenseMatrix) -> V) -> Decomposition<V> {
        let mut fixed = fixed;
        let v = |i: usize| vals[i].clone();
        match &self.layout {
            Layout::Full(wk) => Decomposition::Full(FullCoefficients { wk: wk.iter().map(|&i| v(i)).collect() }),
            Layout::Scalar { w, b, coeff, mode } => Decomposition::Scalar(ScalarDecomp {
                w: v(*w),
                b: v(*b),
                mode: *mode,
                coeff: match coeff {
                    Coeff::Param(i) => v(*i),
                    Coeff::Fixed(m) => fixed(m),
                },
            }),
            Layout::PerOutput { w, b, a, strict } => {
                Decomposition::PerOutput(PerOutputDecomp { w: v(*w), b: v(*b), a: v(*a), strict: *strict })
            }
            Layout::PerInput { w, b, a } => Decomposition::PerInput(PerInputDecomp { w: v(*w), b: v(*b), a: v(*a) }),
            Layout::Cp { c, b_c, p, b_p, m } => {
                Decomposition::Cp(CpFactors { c: v(*c), b_c: v(*b_c), p: v(*p), b_p: v(*b_p), m: v(*m) })
            }
            Layout::Tucker { input, g1, b_g, output, m } => Decomposition::Tucker(TuckerFactors {
                input: input.map(|(w, b)| Affine { weight: v(w), bias: v(b) }),
                g1: v(*g1),
                b_g: v(*b_g),
                output: output.map(|(w, b)| Affine { weight: v(w), bias: v(b) }),
                m: v(*m),
            }),
        }
    }

    /// Logits (or regression outputs) for every node.
    pub fn forward<'s, B: Backend<'s>>(
        &self,
        bk: &mut B,
        vals: &[B::Val],
        x: &B::Val,
        s: &'s SparseMatrix,
    ) -> Result<B::Val> {
        let x = bk.dropout(x, DropSite::Features)?;
        let signal = match self.feat {
            Some((w, b)) => {
                let h = bk.matmul(&x, &vals[w])?;
                let h = bk.add_bias(&h, &vals[b])?;
                bk.relu(&h)
            }
            None => x,
        };
        let signal = bk.dropout(&signal, DropSite::Signals)?;
        let favard = match self.favard {
            Some((raw_q, r)) => Some(FavardCoeffs { q: bk.softplus(&vals[raw_q], FAVARD_Q_FLOOR), r: vals[r].clone() }),
            None => None,
        };
        let filter = PolyFilter { basis: self.config.basis, k: self.config.k, favard: favard.as_ref() };
        let d = self.decomposition(vals, |m| bk.constant(m.clone()));
        forward(bk, &signal, s, &filter, &d)
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, x: &DenseMatrix, s: &SparseMatrix) -> Result<DenseMatrix> {
        self.predict_with(&self.params.values(), x, s)
    }

    pub fn predict_with(&self, vals: &[DenseMatrix], x: &DenseMatrix, s: &SparseMatrix) -> Result<DenseMatrix> {
        self.forward(&mut Eval, vals, x, s)
    }

    /// Registers the current parameters on `tape` (in store order) and records
    /// the forward pass.
    pub fn record<'s>(&self, tape: &mut Tape<'s>, x: &DenseMatrix, s: &'s SparseMatrix) -> Result<Var> {
        self.record_with(tape, &self.params.values(), x, s)
    }

    pub fn record_with<'s>(
        &self,
        tape: &mut Tape<'s>,
        vals: &[DenseMatrix],
        x: &DenseMatrix,
        s: &'s SparseMatrix,
    ) -> Result<Var> {
        let vars: Vec<Var> = vals.iter().map(|v| tape.param(v.clone())).collect();
        let xv = tape.leaf(x.clone());
        self.forward(tape, &vars, &xv, s)
    }
}
