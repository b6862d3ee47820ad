use proptest::prelude::*;
use specconv::basis::{
    propagate_bernstein, propagate_chebyshev, propagate_jacobi, propagate_monomial, PropagationSequence,
};
use specconv::data::{decode, encode, erdos_renyi, HEADER_LEN};
use specconv::oracle::symmetric_eigen;
use specconv::train::{split_nodes, MaskKind, ModelVariant, Ranks};
use specconv::{
    build_graph_matrix, csr_from_edges, spmm, BasisSpec, Checkpoint, Dataset, DenseMatrix, GraphMatrixKind, Model,
    SparseMatrix, Stream, TrainConfig,
};

fn graph_matrix(n: usize, p: f64, seed: u64, kind: GraphMatrixKind) -> SparseMatrix {
    let g = erdos_renyi(n, p, &mut Stream::new(seed));
    build_graph_matrix(&csr_from_edges(&g, false).unwrap(), kind).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = GraphMatrixKind> {
    prop_oneof![
        Just(GraphMatrixKind::AdjNorm),
        Just(GraphMatrixKind::Lap),
        Just(GraphMatrixKind::LapShifted),
        (0.5f64..=2.0).prop_map(|l| GraphMatrixKind::LapScaled { lambda_star: l }),
        Just(GraphMatrixKind::AdjRenorm),
        Just(GraphMatrixKind::LapHalf),
    ]
}

fn basis_strategy() -> impl Strategy<Value = BasisSpec> {
    prop_oneof![
        Just(BasisSpec::Monomial),
        Just(BasisSpec::Chebyshev),
        Just(BasisSpec::Bernstein),
        (-0.9f64..2.0, -0.9f64..2.0).prop_map(|(a, b)| BasisSpec::Jacobi { a, b }),
    ]
}

fn max_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn run(s: &SparseMatrix, h: &DenseMatrix, basis: BasisSpec, k: usize) -> PropagationSequence {
    match basis {
        BasisSpec::Monomial => propagate_monomial(s, h, k),
        BasisSpec::Chebyshev => propagate_chebyshev(s, h, k),
        BasisSpec::Bernstein => propagate_bernstein(s, h, k),
        BasisSpec::Jacobi { a, b } => propagate_jacobi(s, h, k, a, b),
        BasisSpec::Favard => unreachable!(),
    }
    .unwrap()
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..12, 0usize..4, 2usize..5, any::<u64>()).prop_map(|(n, feat_dim, classes, seed)| {
        let mut rng = Stream::new(seed);
        let mut labels: Vec<u32> = (0..n).map(|_| rng.below(classes as u64) as u32).collect();
        // Class count must equal max label + 1.
        labels[rng.below(n as u64) as usize] = classes as u32 - 1;
        let features = (0..n * feat_dim).map(|_| rng.normal() as f32).collect();
        let edges = erdos_renyi(n, 0.3, &mut rng).canonical_edges().unwrap();
        Dataset { n, feat_dim, num_classes: classes, features, labels, edges }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagation_is_linear(
        n in 2usize..20, p in 0.05f64..0.6, seed in any::<u64>(), kind in kind_strategy(),
        basis in basis_strategy(), k in 0usize..7, a in -2.0f64..2.0, b in -2.0f64..2.0,
    ) {
        let s = graph_matrix(n, p, seed, kind);
        let mut rng = Stream::new(seed ^ 1);
        let h1 = DenseMatrix::random_uniform(n, 3, -1.0, 1.0, &mut rng);
        let h2 = DenseMatrix::random_uniform(n, 3, -1.0, 1.0, &mut rng);
        let mixed = h1.scale(a).add(&h2.scale(b)).unwrap();
        let lhs = run(&s, &mixed, basis, k);
        let (r1, r2) = (run(&s, &h1, basis, k), run(&s, &h2, basis, k));
        for kk in 0..=k {
            let rhs = r1.buffers[kk].scale(a).add(&r2.buffers[kk].scale(b)).unwrap();
            let scale = 1.0 + rhs.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(max_diff(&lhs.buffers[kk], &rhs) <= 1e-12 * scale);
        }
    }

    #[test]
    fn spmm_matches_dense(n in 1usize..25, p in 0.0f64..0.7, seed in any::<u64>(), kind in kind_strategy(), c in 1usize..5) {
        let s = graph_matrix(n, p, seed, kind);
        let h = DenseMatrix::random_uniform(n, c, -1.0, 1.0, &mut Stream::new(seed));
        let dense = s.to_dense().matmul(&h).unwrap();
        prop_assert!(max_diff(&spmm(&s, &h).unwrap(), &dense) <= 1e-14);
    }

    #[test]
    fn graph_matrices_are_symmetric(n in 1usize..25, p in 0.0f64..0.7, seed in any::<u64>(), kind in kind_strategy()) {
        let s = graph_matrix(n, p, seed, kind).to_dense();
        prop_assert_eq!(s.clone(), s.transpose());
    }

    #[test]
    fn adjacency_plus_laplacian_is_identity(n in 1usize..25, p in 0.0f64..0.7, seed in any::<u64>()) {
        let adj = graph_matrix(n, p, seed, GraphMatrixKind::AdjNorm).to_dense();
        let lap = graph_matrix(n, p, seed, GraphMatrixKind::Lap).to_dense();
        let sum = adj.add(&lap).unwrap();
        prop_assert!(max_diff(&sum, &DenseMatrix::identity(n)) <= 1e-15);
    }

    #[test]
    fn laplacian_spectrum_in_range(n in 1usize..16, p in 0.0f64..0.7, seed in any::<u64>()) {
        let lap = graph_matrix(n, p, seed, GraphMatrixKind::Lap).to_dense();
        let eig = symmetric_eigen(&lap).unwrap();
        for &l in &eig.eigenvalues {
            prop_assert!((-1e-10..=2.0 + 1e-10).contains(&l), "eigenvalue {}", l);
        }
    }

    #[test]
    fn masks_disjoint_and_exhaustive(n in 5usize..400, seed in any::<u64>()) {
        let m = split_nodes(n, seed).unwrap();
        for v in 0..n {
            let hits = [MaskKind::Train, MaskKind::Val, MaskKind::Test].iter().filter(|&&k| m.mask(k)[v]).count();
            prop_assert_eq!(hits, 1);
        }
        let (tr, va, _) = m.sizes();
        prop_assert_eq!(tr, (0.6 * n as f64).round() as usize);
        prop_assert_eq!(va, (0.2 * n as f64).round() as usize);
        prop_assert_eq!(m.clone(), split_nodes(n, seed).unwrap());
    }

    #[test]
    fn dataset_round_trip(ds in dataset_strategy()) {
        let bytes = encode(&ds).unwrap();
        prop_assert_eq!(bytes.len(), HEADER_LEN + 4 * ds.features.len() + 4 * ds.n + 16 * ds.edges.len());
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn header_corruption_is_rejected(ds in dataset_strategy(), at in 0usize..HEADER_LEN, flip in 1u8..=255) {
        let mut bytes = encode(&ds).unwrap();
        bytes[at] ^= flip;
        prop_assert!(decode(&bytes).is_err());
    }

    #[test]
    fn truncation_is_rejected(ds in dataset_strategy(), cut in 1usize..64) {
        let bytes = encode(&ds).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(decode(&bytes[..keep]).is_err());
    }

    #[test]
    fn jacobi_half_half_is_scaled_chebyshev(n in 2usize..16, p in 0.1f64..0.6, seed in any::<u64>(), k in 1usize..9) {
        let s = graph_matrix(n, p, seed, GraphMatrixKind::AdjNorm);
        let h = DenseMatrix::random_uniform(n, 2, -1.0, 1.0, &mut Stream::new(seed));
        let jac = propagate_jacobi(&s, &h, k, -0.5, -0.5).unwrap();
        let cheb = propagate_chebyshev(&s, &h, k).unwrap();
        for kk in 0..=k {
            // Columns are parallel: J_k = c_k T_k with a constant c_k.
            let (j, t) = (jac.buffers[kk].as_slice(), cheb.buffers[kk].as_slice());
            let pivot = t.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
            if t[pivot].abs() < 1e-8 {
                continue;
            }
            let c = j[pivot] / t[pivot];
            let worst = j.iter().zip(t).map(|(x, y)| (x - c * y).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= 1e-10 * (1.0 + c.abs()), "k = {}: {}", kk, worst);
        }
    }

    #[test]
    fn checkpoint_round_trip(
        variant in prop::sample::select(ModelVariant::ALL.to_vec()),
        hybrid in any::<bool>(), k in 1usize..5, seed in any::<u64>(),
        in_dim in 1usize..6, out_dim in 2usize..5,
    ) {
        let config = TrainConfig {
            variant,
            architecture: if hybrid {
                specconv::train::Architecture::Hybrid
            } else {
                specconv::train::Architecture::Linear
            },
            basis: BasisSpec::Favard,
            k,
            ranks: Ranks { r: 3, p_dim: 2, q: 2 },
            hidden_dim: 4,
            seed,
            ..TrainConfig::default()
        };
        let model = Model::assemble(&config, in_dim, out_dim, &mut Stream::new(seed)).unwrap();
        let ck = Checkpoint::from_model(&model).unwrap();
        let back = Checkpoint::decode(&ck.encode()).unwrap();
        prop_assert_eq!(&back, &ck);
        let restored = back.to_model().unwrap();
        prop_assert_eq!(&restored.params, &model.params);
        let x = DenseMatrix::random_uniform(6, in_dim, -1.0, 1.0, &mut Stream::new(seed));
        let s = graph_matrix(6, 0.5, seed, GraphMatrixKind::AdjNorm);
        prop_assert_eq!(restored.predict(&x, &s).unwrap(), model.predict(&x, &s).unwrap());
    }
}

#[test]
fn checkpoint_rejects_other_configs() {
    let config = TrainConfig { k: 3, ranks: Ranks { r: 2, p_dim: 2, q: 2 }, ..TrainConfig::default() };
    let model = Model::assemble(&config, 4, 3, &mut Stream::new(0)).unwrap();
    let mut ck = Checkpoint::from_model(&model).unwrap();
    ck.blobs.pop();
    assert!(ck.to_model().is_err());

    let mut ck = Checkpoint::from_model(&model).unwrap();
    let mut meta = ck.meta().unwrap();
    meta.config.k = 4;
    ck.metadata = serde_json::to_string(&meta).unwrap();
    assert!(matches!(ck.to_model(), Err(specconv::Error::CheckpointMismatch(_))));
}
