//! Sparse kernels against dense reference evaluations, and the structural
//! invariants of label masking.

use labelgcn::data::{build_input, sample_split, visibility_for_phase, LabelVisibility, Phase, SplitSizes};
use labelgcn::model::{forward_input, init_params, ModelConfig, Mode};
use labelgcn::sparse::{build_adjacency, normalize_adjacency, propagate_masked, propagate_masked_adjoint, spmm};
use labelgcn::synthetic::{random_edges, PlantedPartition};
use labelgcn::{DenseMatrix, LabelColumnMask};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` built densely from the edge list.
fn dense_ahat(edges: &[(usize, usize)], n: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j) in edges {
        if i != j {
            a[i][j] = 1.0;
            a[j][i] = 1.0;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect()
}

fn dense_product(m: &[Vec<f64>], x: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(m.len(), x.n_cols(), |i, c| (0..m.len()).map(|j| m[i][j] * x.get(j, c)).sum())
}

fn max_rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let scale = b.max_abs().max(1e-300);
    a.data().iter().zip(b.data()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn random_graph(seed: u64, max_n: usize) -> (usize, Vec<(usize, usize)>, DenseMatrix, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_n);
    let p = rng.gen_range(0.0..0.4);
    let edges = random_edges(n, p, &mut rng);
    let x = DenseMatrix::from_fn(n, 7, |_, _| rng.gen_range(-2.0..2.0));
    (n, edges, x, rng)
}

#[test]
fn kernels_match_dense_oracle() {
    for seed in 0..50 {
        let (n, edges, x, _) = random_graph(seed, 50);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        let dense = dense_ahat(&edges, n);
        assert!(max_rel(&spmm(ahat.matrix(), &x).unwrap(), &dense_product(&dense, &x)) <= 1e-12);

        // masked oracle: (Â − diag(Â)) on label columns, Â elsewhere
        let mask = LabelColumnMask::trailing(7, 3);
        let mut off_diag = dense.clone();
        for (i, row) in off_diag.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        let full = dense_product(&dense, &x);
        let off = dense_product(&off_diag, &x);
        let expected = DenseMatrix::from_fn(n, 7, |i, c| if c >= 4 { off.get(i, c) } else { full.get(i, c) });
        assert!(max_rel(&propagate_masked(&ahat, &x, &mask).unwrap(), &expected) <= 1e-12);

        // adjoint oracle: transpose of the masked operator, column by column
        let expected_adj = DenseMatrix::from_fn(n, 7, |j, c| {
            (0..n)
                .map(|i| if c >= 4 { off_diag[i][j] } else { dense[i][j] } * x.get(i, c))
                .sum()
        });
        assert!(max_rel(&propagate_masked_adjoint(&ahat, &x, &mask).unwrap(), &expected_adj) <= 1e-12);
    }
}

#[test]
fn adjoint_satisfies_the_inner_product_identity() {
    for seed in 0..20 {
        let (n, edges, x, mut rng) = random_graph(seed, 40);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        let g = DenseMatrix::from_fn(n, 7, |_, _| rng.gen_range(-1.0..1.0));
        let mask = LabelColumnMask::new(vec![1, 5]).unwrap();
        let fwd = propagate_masked(&ahat, &x, &mask).unwrap();
        let adj = propagate_masked_adjoint(&ahat, &g, &mask).unwrap();
        let lhs: f64 = fwd.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(adj.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}

#[test]
fn own_label_never_reaches_first_layer() {
    for seed in 0..100 {
        let (n, edges, _, mut rng) = random_graph(seed, 30);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        let (d, k) = (5, 3);
        let x = DenseMatrix::from_fn(n, d + k, |_, c| if c < d { rng.gen_range(-1.0..1.0) } else { 0.0 });
        let input = labelgcn::data::InputMatrix {
            x,
            mask: LabelColumnMask::trailing(d + k, k),
        };
        let cfg = ModelConfig {
            input_dim: d + k,
            hidden_dim: 8,
            n_classes: k,
            dropout_rate: 0.5,
            masked_first_layer: true,
        };
        let params = init_params(&cfg, seed).unwrap();
        let i = rng.gen_range(0..n);
        let mut perturbed = input.clone();
        perturbed.x.set(i, d + rng.gen_range(0..k), 1.0);
        let a = forward_input(&params, &cfg, &ahat, &input, Mode::Eval).unwrap();
        let b = forward_input(&params, &cfg, &ahat, &perturbed, Mode::Eval).unwrap();
        assert_eq!(a.z1.row(i), b.z1.row(i));
        assert_eq!(a.h1.row(i), b.h1.row(i));
    }
}

#[test]
fn neighbour_labels_do_reach_first_layer() {
    // path 0 - 1: node 1's label must move node 0's pre-activation
    let ahat = normalize_adjacency(&build_adjacency(&[(0, 1)], 2).unwrap()).unwrap();
    let x = DenseMatrix::from_rows(&[[0.5, 0.0, 0.0], [0.5, 0.0, 0.0]]).unwrap();
    let input = labelgcn::data::InputMatrix {
        x,
        mask: LabelColumnMask::trailing(3, 2),
    };
    let cfg = ModelConfig {
        input_dim: 3,
        hidden_dim: 4,
        n_classes: 2,
        dropout_rate: 0.0,
        masked_first_layer: true,
    };
    let params = init_params(&cfg, 2).unwrap();
    let mut with_label = input.clone();
    with_label.x.set(1, 2, 1.0);
    let a = forward_input(&params, &cfg, &ahat, &input, Mode::Eval).unwrap();
    let b = forward_input(&params, &cfg, &ahat, &with_label, Mode::Eval).unwrap();
    // Â[0,1] = 1/2, so z1 moves by exactly W0 row 2 scaled by 1/2
    for h in 0..4 {
        let expected = 0.5 * params.w0.get(2, h);
        assert!((b.z1.get(0, h) - a.z1.get(0, h) - expected).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empty_mask_is_plain_spmm(seed in any::<u64>()) {
        let (n, edges, x, _) = random_graph(seed, 25);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        prop_assert_eq!(
            propagate_masked(&ahat, &x, &LabelColumnMask::empty()).unwrap(),
            spmm(ahat.matrix(), &x).unwrap()
        );
    }

    #[test]
    fn non_label_columns_are_untouched(seed in any::<u64>(), k in 1usize..4) {
        let (n, edges, x, _) = random_graph(seed, 25);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        let masked = propagate_masked(&ahat, &x, &LabelColumnMask::trailing(7, k)).unwrap();
        let plain = spmm(ahat.matrix(), &x).unwrap();
        for i in 0..n {
            prop_assert_eq!(&masked.row(i)[..7 - k], &plain.row(i)[..7 - k]);
        }
    }

    #[test]
    fn isolated_nodes_see_no_labels(seed in any::<u64>()) {
        let (n, mut edges, x, _) = random_graph(seed, 25);
        edges.retain(|&(a, b)| a != 0 && b != 0);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        let out = propagate_masked(&ahat, &x, &LabelColumnMask::trailing(7, 3)).unwrap();
        prop_assert!(out.row(0)[4..].iter().all(|&v| v == 0.0));
        prop_assert!(out.row(0)[..4].iter().zip(&x.row(0)[..4]).all(|(a, b)| a == b));
    }

    #[test]
    fn normalized_adjacency_is_symmetric_with_unit_spectral_bound(seed in any::<u64>()) {
        let (n, edges, _, _) = random_graph(seed, 30);
        let ahat = normalize_adjacency(&build_adjacency(&edges, n).unwrap()).unwrap();
        prop_assert!(ahat.matrix().is_symmetric());
        // Â·1-style bound: every row of D̃^{-1/2}(A+I)D̃^{-1/2} applied to D̃^{1/2}1 gives D̃^{1/2}1
        let deg: Vec<f64> = (0..n).map(|i| ahat.matrix().row_nnz(i) as f64).collect();
        let v = DenseMatrix::from_fn(n, 1, |i, _| deg[i].sqrt());
        let av = spmm(ahat.matrix(), &v).unwrap();
        for i in 0..n {
            prop_assert!((av.get(i, 0) - v.get(i, 0)).abs() < 1e-12 * v.get(i, 0));
        }
    }

    #[test]
    fn splits_are_disjoint_and_visibility_is_nested(seed in any::<u64>(), f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0) {
        let ds = PlantedPartition { n: 120, ..Default::default() }.generate(seed % 8).unwrap();
        let sizes = SplitSizes { train: 10, validation: 10, test: 30, support: 50 };
        let split = sample_split(&ds, sizes, seed).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).chain(&split.test).chain(&split.support).copied().collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), sizes.total());

        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let small = visibility_for_phase(&split, Phase::Inference, lo, seed).unwrap();
        let large = visibility_for_phase(&split, Phase::Inference, hi, seed).unwrap();
        let training = visibility_for_phase(&split, Phase::Training, hi, seed).unwrap();
        prop_assert!(large.is_superset_of(&small));
        prop_assert!(small.is_superset_of(&training));
        prop_assert!(split.test.iter().all(|&t| !large.contains(t)));

        // label block rows are non-zero exactly for visible nodes
        let input = build_input(&ds, &large);
        for i in 0..ds.n() {
            let has = input.x.row(i)[ds.d()..].iter().any(|&v| v != 0.0);
            prop_assert_eq!(has, large.contains(i));
        }
        let none = build_input(&ds, &LabelVisibility::none());
        prop_assert!(none.x.rows().all(|r| r[ds.d()..].iter().all(|&v| v == 0.0)));
    }
}
