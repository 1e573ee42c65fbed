use npforest_core::datagen::{random_sparse_precision, sample_npn, NpnSpec, Transform};
use npforest_core::forest::kruskal_stages;
use npforest_core::glasso::{
    glasso_fit, glasso_path, graph_from_precision, kkt_residual, lambda_grid,
};
use npforest_core::marginals::covariance;
use npforest_core::numerics::{seeded_rng, Cholesky};
use npforest_core::{GlassoConfig, Graph, SymMatrix};
use proptest::prelude::*;
use rand::Rng;

fn labels(d: usize) -> Vec<String> {
    Graph::unlabeled(d).vertices().to_vec()
}

/// Best total weight over all forests with exactly k edges, by enumeration.
fn brute_force_best(d: usize, w: &[Vec<f64>], k: usize) -> f64 {
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << pairs.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let chosen = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &p)| p);
        let g = Graph::from_edges(labels(d), chosen.clone()).unwrap();
        if g.is_acyclic() {
            best = best.max(chosen.map(|(i, j)| w[i][j]).sum());
        }
    }
    best
}

fn random_weights(d: usize, vals: &[f64]) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; d]; d];
    let mut it = vals.iter();
    for i in 0..d {
        for j in i + 1..d {
            let v = *it.next().unwrap();
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    w
}

fn random_covariance(d: usize, seed: u64) -> SymMatrix {
    let mut rng = seeded_rng(seed);
    let b: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut s = SymMatrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            let v: f64 = (0..d).map(|k| b[k * d + i] * b[k * d + j]).sum::<f64>() / d as f64;
            s.set(i, j, v + if i == j { 0.1 } else { 0.0 });
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kruskal_stages_are_optimal_nested_forests(d in 2usize..=5, vals in proptest::collection::vec(-1.0f64..1.0, 10)) {
        let w = random_weights(d, &vals);
        let st = kruskal_stages(&w, &labels(d)).unwrap();
        prop_assert_eq!(st.stages.len(), d);
        for k in 0..d {
            let g = &st.stages[k];
            prop_assert_eq!(g.n_edges(), k);
            prop_assert!(g.is_acyclic());
            if k > 0 {
                prop_assert!(st.stages[k - 1].edge_set().is_subset(&g.edge_set()));
            }
            let total: f64 = g.edges().iter().map(|e| w[e.i][e.j]).sum();
            prop_assert!((total - brute_force_best(d, &w, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn glasso_kkt_certificate(d in 2usize..=8, seed in any::<u64>(), lambda in 0.01f64..0.8) {
        let s = random_covariance(d, seed);
        let est = glasso_fit(&s, &GlassoConfig::new(lambda)).unwrap();
        prop_assert!(est.kkt_residual <= 1e-6);
        prop_assert!(kkt_residual(&s, &est.omega, lambda, true).unwrap() <= 1e-6);
        prop_assert!(Cholesky::new(&est.omega).is_ok());
    }

    #[test]
    fn glasso_permutation_equivariance(d in 2usize..=7, seed in any::<u64>(), lambda in 0.02f64..0.5) {
        let s = random_covariance(d, seed);
        let mut perm: Vec<usize> = (0..d).collect();
        perm.reverse();
        perm.rotate_left(seed as usize % d);
        let a = glasso_fit(&s, &GlassoConfig::new(lambda)).unwrap();
        let b = glasso_fit(&s.permuted(&perm), &GlassoConfig::new(lambda)).unwrap();
        let ap = a.omega.permuted(&perm);
        let scale = a.omega.diagonal().into_iter().fold(1.0f64, f64::max);
        for i in 0..d {
            for j in 0..d {
                prop_assert!((ap.get(i, j) - b.omega.get(i, j)).abs() <= 1e-4 * scale);
            }
        }
    }
}

#[test]
fn glasso_path_sparsity_is_mostly_monotone() {
    let lambdas: Vec<f64> = lambda_grid(0.02, 0.6, 30)
        .unwrap()
        .into_iter()
        .rev()
        .collect();
    let (mut ok, mut total) = (0, 0);
    for seed in 0..20 {
        let omega = random_sparse_precision(10, 12, seed).unwrap();
        let sigma = Cholesky::new(&omega).unwrap().inverse();
        let spec = NpnSpec::new(vec![0.0; 10], sigma, vec![Transform::identity(); 10]).unwrap();
        let s = covariance(&sample_npn(&spec, 200, seed + 100).unwrap());
        let path = glasso_path(&s, &lambdas, &GlassoConfig::default()).unwrap();
        let counts: Vec<usize> = path
            .iter()
            .map(|e| graph_from_precision(e, labels(10), None).unwrap().n_edges())
            .collect();
        for w in counts.windows(2) {
            total += 1;
            if w[1] >= w[0] {
                ok += 1;
            }
        }
    }
    let frac = ok as f64 / total as f64;
    assert!(frac >= 0.95, "{frac}");
}
