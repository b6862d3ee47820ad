//! Property suites run by `specconv verify`. Each check reports the measured
//! worst case next to its tolerance.

use crate::autodiff::{finite_diff_check, log_softmax, masked_nll, Tape};
use crate::basis::{
    propagate_bernstein, propagate_chebyshev, propagate_favard, propagate_favard_coeffs, propagate_jacobi, BasisSpec,
    FavardCoeffs, FavardParams,
};
use crate::data::erdos_renyi;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{build_graph_matrix, csr_from_edges, spmm, GraphMatrixKind, SparseMatrix};
use crate::layers::{
    appnp_alpha, chebii_alpha, materialize_affine, Affine, AlphaMode, CpFactors, Decomposition, FullCoefficients,
    PerInputDecomp, PerOutputDecomp, PolyFilter, ScalarDecomp, TuckerFactors,
};
use crate::oracle::{dense_forward_affine, spectral_filter_matrix, ScalarFavard};
use crate::rng::{Purpose, Stream};
use crate::train::{Architecture, Model, ModelVariant, Ranks, TrainConfig};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Oracle,
    Collapse,
    Basis,
    Gradients,
    Scalar,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Oracle, Suite::Collapse, Suite::Basis, Suite::Gradients, Suite::Scalar];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::Collapse => "collapse",
            Suite::Basis => "basis",
            Suite::Gradients => "gradients",
            Suite::Scalar => "scalar",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| Error::param(format!("unknown suite '{name}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub check: String,
    pub instances: usize,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(suite: Suite, check: impl Into<String>, instances: usize, measured: f64, tolerance: f64) -> Self {
        CheckOutcome {
            suite,
            check: check.into(),
            instances,
            measured,
            tolerance,
            passed: measured.is_finite() && measured <= tolerance,
        }
    }
}

pub const ORACLE_TOL: f64 = 1e-10;
pub const ORACLE_INSTANCES: usize = 50;
pub const COLLAPSE_TOL: f64 = 1e-12;
pub const COLLAPSE_INSTANCES: usize = 20;
pub const CHEBYSHEV_SPECTRAL_TOL: f64 = 1e-8;
pub const BERNSTEIN_UNITY_TOL: f64 = 1e-10;
pub const LEGENDRE_TOL: f64 = 1e-10;
pub const FAVARD_REDUCED_TOL: f64 = 1e-12;
pub const GRAD_TOL: f64 = 1e-5;
pub const GRAD_TOL_FAVARD: f64 = 1e-4;
pub const APPNP_SUM_TOL: f64 = 1e-12;
pub const CHEBII_TOL: f64 = 1e-12;

/// Decomposition variants covered by the oracle suite.
pub const ORACLE_VARIANTS: [&str; 8] =
    ["full", "scalar", "per-output", "per-input", "cp", "tucker", "tucker1", "tucker2"];

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = Stream::substream(seed, Purpose::Check);
    match suite {
        Suite::Oracle => oracle_suite(&mut rng),
        Suite::Collapse => collapse_suite(&mut rng),
        Suite::Basis => basis_suite(&mut rng),
        Suite::Gradients => gradient_suite(&mut rng),
        Suite::Scalar => scalar_suite(&mut rng),
    }
}

pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for suite in Suite::ALL {
        out.extend(run_suite(suite, seed)?);
    }
    Ok(out)
}

fn rand(r: usize, c: usize, rng: &mut Stream) -> DenseMatrix {
    DenseMatrix::random_uniform(r, c, -1.0, 1.0, rng)
}

fn between(lo: usize, hi: usize, rng: &mut Stream) -> usize {
    lo + rng.below((hi - lo + 1) as u64) as usize
}

const ALL_KINDS: [GraphMatrixKind; 6] = [
    GraphMatrixKind::AdjNorm,
    GraphMatrixKind::Lap,
    GraphMatrixKind::LapShifted,
    GraphMatrixKind::LapScaled { lambda_star: 2.0 },
    GraphMatrixKind::AdjRenorm,
    GraphMatrixKind::LapHalf,
];

/// Random Erdos-Renyi graph matrix with `n` in `[lo, hi]`.
pub fn random_graph_matrix(lo: usize, hi: usize, kind: GraphMatrixKind, rng: &mut Stream) -> Result<SparseMatrix> {
    let n = between(lo, hi, rng);
    let p = rng.uniform_range(0.1, 0.5);
    let g = erdos_renyi(n, p, rng);
    build_graph_matrix(&csr_from_edges(&g, false)?, kind)
}

fn random_basis(rng: &mut Stream) -> BasisSpec {
    match rng.below(5) {
        0 => BasisSpec::Monomial,
        1 => BasisSpec::Chebyshev,
        2 => BasisSpec::Bernstein,
        3 => random_jacobi(rng),
        _ => BasisSpec::Favard,
    }
}

fn random_jacobi(rng: &mut Stream) -> BasisSpec {
    BasisSpec::Jacobi { a: rng.uniform_range(-0.5, 2.0), b: rng.uniform_range(-0.5, 2.0) }
}

/// Channel-uniform Favard coefficients: the per-order values plus their
/// broadcast to `channels` columns.
fn random_favard(k: usize, channels: usize, rng: &mut Stream) -> (Vec<f64>, Vec<f64>, FavardCoeffs<DenseMatrix>) {
    let q: Vec<f64> = (0..=k).map(|_| rng.uniform_range(0.8, 1.5)).collect();
    let r: Vec<f64> = (0..=k).map(|_| rng.uniform_range(-0.3, 0.3)).collect();
    let coeffs = FavardCoeffs {
        q: DenseMatrix::from_fn(k + 1, channels, |kk, _| q[kk]),
        r: DenseMatrix::from_fn(k + 1, channels, |kk, _| r[kk]),
    };
    (q, r, coeffs)
}

/// Random decomposition of the named variant with ranks in `1..=5`.
pub fn random_decomposition(variant: &str, i: usize, j: usize, k: usize, rng: &mut Stream) -> Result<Decomposition> {
    let orders = k + 1;
    let rank = |rng: &mut Stream| between(1, 5, rng);
    Ok(match variant {
        "full" => Decomposition::Full(FullCoefficients { wk: (0..orders).map(|_| rand(i, j, rng)).collect() }),
        "scalar" => {
            let (w, b) = (rand(i, j, rng), rand(1, j, rng));
            match rng.below(4) {
                0 if k >= 1 => Decomposition::Scalar(ScalarDecomp::gcn(w, b, k)?),
                1 => {
                    let teleport = rng.uniform_range(0.05, 1.0);
                    Decomposition::Scalar(ScalarDecomp::appnp(w, b, teleport, k)?)
                }
                2 => Decomposition::Scalar(ScalarDecomp {
                    w,
                    b,
                    mode: AlphaMode::ChebInterp,
                    coeff: rand(1, orders, rng),
                }),
                _ => {
                    Decomposition::Scalar(ScalarDecomp { w, b, mode: AlphaMode::Learned, coeff: rand(1, orders, rng) })
                }
            }
        }
        "per-output" => Decomposition::PerOutput(PerOutputDecomp {
            w: rand(i, j, rng),
            b: rand(1, j, rng),
            a: rand(orders, j, rng),
            strict: rng.below(2) == 1,
        }),
        "per-input" => {
            Decomposition::PerInput(PerInputDecomp { w: rand(i, j, rng), b: rand(1, j, rng), a: rand(orders, i, rng) })
        }
        "cp" => {
            let r = rank(rng);
            Decomposition::Cp(CpFactors {
                c: rand(i, r, rng),
                b_c: rand(1, r, rng),
                p: rand(j, r, rng),
                b_p: rand(1, j, rng),
                m: rand(orders, r, rng),
            })
        }
        "tucker" | "tucker1" | "tucker2" => {
            let has_c = variant == "tucker";
            let has_p = variant != "tucker1";
            let pd = if has_c { rank(rng) } else { i };
            let q = if has_p { rank(rng) } else { j };
            let r = rank(rng);
            let input = has_c.then(|| Affine { weight: rand(i, pd, rng), bias: rand(1, pd, rng) });
            let output = has_p.then(|| Affine { weight: rand(j, q, rng), bias: rand(1, j, rng) });
            Decomposition::Tucker(TuckerFactors {
                input,
                g1: rand(pd, q * r, rng),
                b_g: rand(1, q * r, rng),
                output,
                m: rand(orders, r, rng),
            })
        }
        other => return Err(Error::param(format!("unknown decomposition variant '{other}'"))),
    })
}

/// Fast forward against the dense triple-sum oracle for one random instance.
fn oracle_instance(variant: &str, basis: BasisSpec, rng: &mut Stream) -> Result<f64> {
    let kind = ALL_KINDS[rng.below(ALL_KINDS.len() as u64) as usize];
    let s = random_graph_matrix(2, 30, kind, rng)?;
    let n = s.n();
    let (i, j, k) = (between(1, 8, rng), between(1, 8, rng), between(0, 6, rng));
    let d = random_decomposition(variant, i, j, k, rng)?;
    let x = rand(n, i, rng);
    let (w, bias) = materialize_affine(&d)?;
    let s_dense = s.to_dense();
    if basis == BasisSpec::Favard {
        let (q, r, coeffs) = random_favard(k, d.propagated_channels()?, rng);
        let fast = d.apply(&x, &s, &PolyFilter::with_favard(k, &coeffs))?;
        let slow = dense_forward_affine(&x, &s_dense, &w, &bias, &basis, Some(ScalarFavard { q: &q, r: &r }))?;
        return fast.max_abs_diff(&slow);
    }
    let fast = d.apply(&x, &s, &PolyFilter::new(basis, k))?;
    let slow = dense_forward_affine(&x, &s_dense, &w, &bias, &basis, None)?;
    fast.max_abs_diff(&slow)
}

fn oracle_suite(rng: &mut Stream) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for variant in ORACLE_VARIANTS {
        for basis_idx in 0..5 {
            let mut worst = 0.0f64;
            let mut label = "";
            for _ in 0..ORACLE_INSTANCES {
                let basis = match basis_idx {
                    0 => BasisSpec::Monomial,
                    1 => BasisSpec::Chebyshev,
                    2 => BasisSpec::Bernstein,
                    3 => random_jacobi(rng),
                    _ => BasisSpec::Favard,
                };
                label = basis.name();
                worst = worst.max(oracle_instance(variant, basis, rng)?);
            }
            out.push(CheckOutcome::new(
                Suite::Oracle,
                format!("{variant}/{label}"),
                ORACLE_INSTANCES,
                worst,
                ORACLE_TOL,
            ));
        }
    }
    Ok(out)
}

const BOUNDED_KINDS: [GraphMatrixKind; 5] = [
    GraphMatrixKind::AdjNorm,
    GraphMatrixKind::LapShifted,
    GraphMatrixKind::LapScaled { lambda_star: 2.0 },
    GraphMatrixKind::AdjRenorm,
    GraphMatrixKind::LapHalf,
];

struct CollapseCase {
    s: SparseMatrix,
    x: DenseMatrix,
    basis: BasisSpec,
    k: usize,
    favard: Option<FavardCoeffs<DenseMatrix>>,
}

impl CollapseCase {
    fn draw(i: usize, rng: &mut Stream) -> Result<Self> {
        let kind = BOUNDED_KINDS[rng.below(BOUNDED_KINDS.len() as u64) as usize];
        let s = random_graph_matrix(2, 30, kind, rng)?;
        let x = rand(s.n(), i, rng);
        Ok(CollapseCase { s, x, basis: random_basis(rng), k: between(0, 6, rng), favard: None })
    }

    /// Both sides propagate `channels` columns; Favard coefficients are shared
    /// across channels so their layout does not matter.
    fn eval(&mut self, d: &Decomposition, rng: &mut Stream) -> Result<DenseMatrix> {
        if self.basis == BasisSpec::Favard {
            let channels = d.propagated_channels()?;
            let coeffs = match &self.favard {
                Some(f) => FavardCoeffs {
                    q: DenseMatrix::from_fn(self.k + 1, channels, |kk, _| f.q[(kk, 0)]),
                    r: DenseMatrix::from_fn(self.k + 1, channels, |kk, _| f.r[(kk, 0)]),
                },
                None => random_favard(self.k, channels, rng).2,
            };
            let y = d.apply(&self.x, &self.s, &PolyFilter::with_favard(self.k, &coeffs))?;
            self.favard = Some(coeffs);
            return Ok(y);
        }
        d.apply(&self.x, &self.s, &PolyFilter::new(self.basis, self.k))
    }
}

fn collapse_suite(rng: &mut Stream) -> Result<Vec<CheckOutcome>> {
    let (mut superdiag, mut per_output, mut rank_one) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..COLLAPSE_INSTANCES {
        // Tucker with a superdiagonal core is CP with P scaled by the diagonal.
        let (i, j, r) = (between(1, 8, rng), between(1, 8, rng), between(1, 5, rng));
        let mut case = CollapseCase::draw(i, rng)?;
        let orders = case.k + 1;
        let (c, b_c, p, b_p, m) =
            (rand(i, r, rng), rand(1, r, rng), rand(j, r, rng), rand(1, j, rng), rand(orders, r, rng));
        let lambda: Vec<f64> = (0..r).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let mut g1 = DenseMatrix::zeros(r, r * r);
        for (t, &l) in lambda.iter().enumerate() {
            g1[(t, t + t * r)] = l;
        }
        let tucker = Decomposition::Tucker(TuckerFactors {
            input: Some(Affine { weight: c.clone(), bias: b_c.clone() }),
            g1,
            b_g: DenseMatrix::zeros(1, r * r),
            output: Some(Affine { weight: p.clone(), bias: b_p.clone() }),
            m: m.clone(),
        });
        let cp = Decomposition::Cp(CpFactors {
            c,
            b_c,
            p: DenseMatrix::from_fn(j, r, |jj, t| p[(jj, t)] * lambda[t]),
            b_p,
            m,
        });
        let a = case.eval(&tucker, rng)?;
        let b = case.eval(&cp, rng)?;
        superdiag = superdiag.max(a.max_abs_diff(&b)?);

        // CP with P = I and R = J is the per-output variant.
        let (i, j) = (between(1, 8, rng), between(1, 8, rng));
        let mut case = CollapseCase::draw(i, rng)?;
        let orders = case.k + 1;
        let (w, bias, alpha) = (rand(i, j, rng), rand(1, j, rng), rand(orders, j, rng));
        let strict = rng.below(2) == 1;
        let po = Decomposition::PerOutput(PerOutputDecomp { w: w.clone(), b: bias.clone(), a: alpha.clone(), strict });
        let (b_c, b_p) = if strict { (bias, DenseMatrix::zeros(1, j)) } else { (DenseMatrix::zeros(1, j), bias) };
        let cp = Decomposition::Cp(CpFactors { c: w, b_c, p: DenseMatrix::identity(j), b_p, m: alpha });
        let a = case.eval(&po, rng)?;
        let b = case.eval(&cp, rng)?;
        per_output = per_output.max(a.max_abs_diff(&b)?);

        // Tucker with Q = R = 1 is rank-1 CP.
        let (i, j, pd) = (between(1, 8, rng), between(1, 8, rng), between(1, 5, rng));
        let mut case = CollapseCase::draw(i, rng)?;
        let orders = case.k + 1;
        let (c, b_c, g1, b_g) = (rand(i, pd, rng), rand(1, pd, rng), rand(pd, 1, rng), rand(1, 1, rng));
        let (p, b_p, m) = (rand(j, 1, rng), rand(1, j, rng), rand(orders, 1, rng));
        let mut cp_bias = b_c.matmul(&g1)?;
        cp_bias[(0, 0)] += b_g[(0, 0)];
        let cp = Decomposition::Cp(CpFactors {
            c: c.matmul(&g1)?,
            b_c: cp_bias,
            p: p.clone(),
            b_p: b_p.clone(),
            m: m.clone(),
        });
        let tucker = Decomposition::Tucker(TuckerFactors {
            input: Some(Affine { weight: c, bias: b_c }),
            g1,
            b_g,
            output: Some(Affine { weight: p, bias: b_p }),
            m,
        });
        let a = case.eval(&tucker, rng)?;
        let b = case.eval(&cp, rng)?;
        rank_one = rank_one.max(a.max_abs_diff(&b)?);
    }
    Ok(vec![
        CheckOutcome::new(Suite::Collapse, "tucker-superdiagonal=cp", COLLAPSE_INSTANCES, superdiag, COLLAPSE_TOL),
        CheckOutcome::new(Suite::Collapse, "cp-identity-p=per-output", COLLAPSE_INSTANCES, per_output, COLLAPSE_TOL),
        CheckOutcome::new(Suite::Collapse, "tucker-q1-r1=rank1-cp", COLLAPSE_INSTANCES, rank_one, COLLAPSE_TOL),
    ])
}

fn basis_suite(rng: &mut Stream) -> Result<Vec<CheckOutcome>> {
    const INSTANCES: usize = 20;
    let (mut cheb, mut bern, mut legendre, mut favard, mut favard_params) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..INSTANCES {
        // Chebyshev against cos(k arccos lambda) on the eigenbasis.
        let kind = [GraphMatrixKind::AdjNorm, GraphMatrixKind::LapShifted][rng.below(2) as usize];
        let s = random_graph_matrix(2, 20, kind, rng)?;
        let h = rand(s.n(), between(1, 4, rng), rng);
        let seq = propagate_chebyshev(&s, &h, 8)?;
        let s_dense = s.to_dense();
        for (k, v) in seq.buffers.iter().enumerate() {
            let expect = spectral_filter_matrix(&s_dense, |l| (k as f64 * l.clamp(-1.0, 1.0).acos()).cos(), &h)?;
            cheb = cheb.max(v.max_abs_diff(&expect)?);
        }

        // Bernstein buffers sum to the input.
        let s = random_graph_matrix(2, 30, GraphMatrixKind::LapHalf, rng)?;
        let h = rand(s.n(), between(1, 4, rng), rng);
        let k = between(0, 10, rng);
        let seq = propagate_bernstein(&s, &h, k)?;
        let mut total = DenseMatrix::zeros(h.rows(), h.cols());
        for v in &seq.buffers {
            total.add_assign(v)?;
        }
        bern = bern.max(total.max_abs_diff(&h)?);

        // Legendre P_2.
        let kind = BOUNDED_KINDS[rng.below(BOUNDED_KINDS.len() as u64) as usize];
        let s = random_graph_matrix(2, 30, kind, rng)?;
        let h = rand(s.n(), between(1, 4, rng), rng);
        let seq = propagate_jacobi(&s, &h, 2, 0.0, 0.0)?;
        let s2h = spmm(&s, &spmm(&s, &h)?)?;
        let expect = s2h.scale(1.5).sub(&h.scale(0.5))?;
        legendre = legendre.max(seq.buffers[2].max_abs_diff(&expect)?);

        // Favard with q = 1, r = 0 is V_k = S V_{k-1} - V_{k-2}.
        let k = between(0, 10, rng);
        let c = h.cols();
        let unit = FavardCoeffs { q: DenseMatrix::filled(k + 1, c, 1.0), r: DenseMatrix::zeros(k + 1, c) };
        let seq = propagate_favard_coeffs(&s, &h, &unit)?;
        let mut reduced = vec![h.clone()];
        if k >= 1 {
            reduced.push(spmm(&s, &h)?);
        }
        for kk in 2..=k {
            let next = spmm(&s, &reduced[kk - 1])?.sub(&reduced[kk - 2])?;
            reduced.push(next);
        }
        for (a, b) in seq.buffers.iter().zip(&reduced) {
            favard = favard.max(a.max_abs_diff(b)?);
        }
        let seq = propagate_favard(&s, &h, &FavardParams::unit(k, c))?;
        for (a, b) in seq.buffers.iter().zip(&reduced) {
            favard_params = favard_params.max(a.max_abs_diff(b)?);
        }
    }
    Ok(vec![
        CheckOutcome::new(Suite::Basis, "chebyshev=cos(k acos lambda)", INSTANCES, cheb, CHEBYSHEV_SPECTRAL_TOL),
        CheckOutcome::new(Suite::Basis, "bernstein-partition-of-unity", INSTANCES, bern, BERNSTEIN_UNITY_TOL),
        CheckOutcome::new(Suite::Basis, "jacobi(0,0)=legendre-p2", INSTANCES, legendre, LEGENDRE_TOL),
        CheckOutcome::new(Suite::Basis, "favard-unit=reduced-recurrence", INSTANCES, favard, FAVARD_REDUCED_TOL),
        CheckOutcome::new(
            Suite::Basis,
            "favard-unit-params=reduced-recurrence",
            INSTANCES,
            favard_params,
            FAVARD_REDUCED_TOL,
        ),
    ])
}

/// Finite-difference step for gradient checks.
pub const GRAD_STEP: f64 = 1e-4;

/// Smallest hidden pre-activation magnitude kept at gradient-check points.
pub const KINK_MARGIN: f64 = 1e-2;

fn kink_margin(model: &Model, params: &[DenseMatrix], x: &DenseMatrix) -> Result<f64> {
    let find = |name: &str| model.params.params.iter().position(|p| p.name == name);
    let (Some(w), Some(b)) = (find("feat.weight"), find("feat.bias")) else {
        return Ok(f64::INFINITY);
    };
    let pre = x.matmul(&params[w])?;
    let mut margin = f64::INFINITY;
    for i in 0..pre.rows() {
        for (v, bias) in pre.row(i).iter().zip(params[b].row(0)) {
            margin = margin.min((v + bias).abs());
        }
    }
    Ok(margin)
}

/// Worst relative gradient error per parameter group for one model.
pub fn gradient_errors(config: &TrainConfig, rng: &mut Stream) -> Result<Vec<(String, f64)>> {
    let n = 10;
    let s = build_graph_matrix(&csr_from_edges(&erdos_renyi(n, 0.4, rng), false)?, config.graph_matrix)?;
    let in_dim = 4;
    let classes = 3;
    let x = rand(n, in_dim, rng);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(classes as u64) as usize).collect();
    let rows: Vec<usize> = (0..n).collect();
    let model = Model::assemble(config, in_dim, classes, rng)?;
    // Perturb away from the initial point so no parameter sits at a special
    // value, and keep every hidden pre-activation clear of the ReLU kink.
    let mut params = Vec::new();
    for _ in 0..1000 {
        params = model
            .params
            .values()
            .into_iter()
            .map(|v| {
                let noise = DenseMatrix::random_uniform(v.rows(), v.cols(), -0.3, 0.3, rng);
                v.add(&noise).expect("same shape")
            })
            .collect();
        if kink_margin(&model, &params, &x)? >= KINK_MARGIN {
            break;
        }
    }
    let mut tape = Tape::new();
    let logits = model.record_with(&mut tape, &params, &x, &s)?;
    let logp = tape.log_softmax(logits);
    let loss = tape.masked_nll(logp, &labels, &rows)?;
    let grads = tape.backward(loss)?;
    let report = finite_diff_check(
        |vals| masked_nll(&log_softmax(&model.predict_with(vals, &x, &s)?), &labels, &rows),
        &params,
        &grads,
        GRAD_STEP,
        usize::MAX,
        rng,
    )?;
    let mut groups: Vec<(String, f64)> = Vec::new();
    for (p, err) in model.params.params.iter().zip(&report.per_param) {
        match groups.iter_mut().find(|(g, _)| *g == p.group) {
            Some((_, worst)) => *worst = worst.max(*err),
            None => groups.push((p.group.to_string(), *err)),
        }
    }
    Ok(groups)
}

/// Configurations covered by the gradient suite.
pub fn gradient_configs() -> Vec<TrainConfig> {
    let mut out = Vec::new();
    for architecture in [Architecture::Linear, Architecture::Hybrid] {
        for variant in [ModelVariant::Cp, ModelVariant::Tucker] {
            for basis in [
                BasisSpec::Monomial,
                BasisSpec::Chebyshev,
                BasisSpec::Bernstein,
                BasisSpec::Jacobi { a: 1.0, b: 0.5 },
                BasisSpec::Favard,
            ] {
                let graph_matrix = match basis {
                    BasisSpec::Bernstein => GraphMatrixKind::LapHalf,
                    _ => GraphMatrixKind::AdjNorm,
                };
                out.push(TrainConfig {
                    variant,
                    architecture,
                    basis,
                    graph_matrix,
                    k: 3,
                    ranks: Ranks { r: 3, p_dim: 3, q: 2 },
                    hidden_dim: 5,
                    ..TrainConfig::default()
                });
            }
        }
    }
    out
}

fn gradient_suite(rng: &mut Stream) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for config in gradient_configs() {
        let arch = match config.architecture {
            Architecture::Linear => "linear",
            Architecture::Hybrid => "hybrid",
        };
        for (group, err) in gradient_errors(&config, rng)? {
            let tol = if group == "basis" { GRAD_TOL_FAVARD } else { GRAD_TOL };
            out.push(CheckOutcome::new(
                Suite::Gradients,
                format!("{arch}/{}/{}/{group}", config.variant.name(), config.basis.name()),
                1,
                err,
                tol,
            ));
        }
    }
    Ok(out)
}

fn scalar_suite(rng: &mut Stream) -> Result<Vec<CheckOutcome>> {
    const INSTANCES: usize = 20;
    let mut gcn = 0.0f64;
    for _ in 0..INSTANCES {
        let s = random_graph_matrix(2, 30, GraphMatrixKind::AdjRenorm, rng)?;
        let (i, j, k) = (between(1, 8, rng), between(1, 8, rng), between(1, 6, rng));
        let (x, w) = (rand(s.n(), i, rng), rand(i, j, rng));
        let d = Decomposition::Scalar(ScalarDecomp::gcn(w.clone(), DenseMatrix::zeros(1, j), k)?);
        let y = d.apply(&x, &s, &PolyFilter::new(BasisSpec::Monomial, k))?;
        gcn = gcn.max(y.max_abs_diff(&spmm(&s, &x)?.matmul(&w)?)?);
    }
    let mut appnp = 0.0f64;
    let mut grid = 0;
    for t in 1..=20 {
        for k in 0..=20 {
            let sum: f64 = appnp_alpha(t as f64 * 0.05, k)?.iter().sum();
            appnp = appnp.max((sum - 1.0).abs());
            grid += 1;
        }
    }
    let mut chebii = 0.0f64;
    for k in 0..=10 {
        let gamma = vec![rng.uniform_range(-2.0, 2.0); k + 1];
        let alpha = chebii_alpha(&gamma)?;
        chebii = alpha[1..].iter().fold(chebii, |m, a| m.max(a.abs()));
    }
    Ok(vec![
        CheckOutcome::new(Suite::Scalar, "gcn-alpha=one-hop", INSTANCES, gcn, 0.0),
        CheckOutcome::new(Suite::Scalar, "appnp-alpha-sums-to-one", grid, appnp, APPNP_SUM_TOL),
        CheckOutcome::new(Suite::Scalar, "chebii-constant-gamma", 11, chebii, CHEBII_TOL),
    ])
}
