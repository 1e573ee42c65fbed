//! Fixtures shared by the benchmarks.

use npforest_core::datagen::{random_sparse_precision, sample_npn, NpnSpec, Transform};
use npforest_core::numerics::Cholesky;
use npforest_core::{Dataset, SymMatrix};

/// Unit-diagonal covariance whose inverse has `edges` off-diagonal nonzeros.
pub fn sparse_covariance(d: usize, edges: usize, seed: u64) -> SymMatrix {
    let omega = random_sparse_precision(d, edges, seed).expect("valid sparse precision");
    let s = Cholesky::new(&omega).expect("positive definite").inverse();
    let mut r = SymMatrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            r.set(i, j, s.get(i, j) / (s.get(i, i) * s.get(j, j)).sqrt());
        }
    }
    r
}

pub fn gaussian_sample(d: usize, edges: usize, n: usize, seed: u64) -> Dataset {
    let spec = NpnSpec::new(
        vec![0.0; d],
        sparse_covariance(d, edges, seed),
        vec![Transform::identity(); d],
    )
    .expect("valid spec");
    sample_npn(&spec, n, seed).expect("sampling succeeds")
}
