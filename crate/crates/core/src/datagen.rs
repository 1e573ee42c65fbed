//! Seeded synthetic data: nonparanormal samples with monotone marginal
//! transforms, sparse precision matrices and tree-structured Gaussians.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glasso::support_graph;
use crate::graph::Graph;
use crate::numerics::{seeded_rng, standard_normal, Cholesky, Rng, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformFamily {
    /// `sign(x) |x|^α`
    Power,
    /// `⌊x⌋` plus a logistic step on the fractional part, rescaled so the
    /// map is continuous across integers.
    Logistic,
    /// `x + sin(αx)/α`
    Sinusoid,
    Identity,
}

/// One monotone component `f` with `Z = f(X)` Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub family: TransformFamily,
    pub alpha: f64,
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

impl Transform {
    pub fn new(family: TransformFamily, alpha: f64) -> Result<Self> {
        let t = Self { family, alpha };
        t.validate()?;
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            family: TransformFamily::Identity,
            alpha: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.family == TransformFamily::Sinusoid && self.alpha < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "sinusoid transform needs alpha >= 1, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Range of the raw logistic step over one unit interval.
    fn logistic_bounds(&self) -> (f64, f64) {
        (sigmoid(-0.5 * self.alpha), sigmoid(0.5 * self.alpha))
    }

    pub fn forward(&self, x: f64) -> f64 {
        let a = self.alpha;
        match self.family {
            TransformFamily::Identity => x,
            TransformFamily::Power => x.signum() * x.abs().powf(a),
            TransformFamily::Logistic => {
                let k = x.floor();
                let (lo, hi) = self.logistic_bounds();
                k + (sigmoid(a * (x - k - 0.5)) - lo) / (hi - lo)
            }
            TransformFamily::Sinusoid => x + (a * x).sin() / a,
        }
    }

    pub fn inverse(&self, z: f64) -> f64 {
        let a = self.alpha;
        match self.family {
            TransformFamily::Identity => z,
            TransformFamily::Power => z.signum() * z.abs().powf(1.0 / a),
            TransformFamily::Logistic => {
                let k = z.floor();
                let (lo, hi) = self.logistic_bounds();
                let s = lo + (z - k) * (hi - lo);
                k + 0.5 + (s / (1.0 - s)).ln() / a
            }
            TransformFamily::Sinusoid => {
                // |f(x) − x| ≤ 1/α brackets the root.
                let (mut lo, mut hi) = (z - 1.0 / a, z + 1.0 / a);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.forward(mid) < z {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let a = self.alpha;
        match self.family {
            TransformFamily::Identity => 1.0,
            TransformFamily::Power => a * x.abs().powf(a - 1.0),
            TransformFamily::Logistic => {
                let (lo, hi) = self.logistic_bounds();
                let s = sigmoid(a * (x - x.floor() - 0.5));
                a * s * (1.0 - s) / (hi - lo)
            }
            TransformFamily::Sinusoid => 1.0 + (a * x).cos(),
        }
    }
}

/// `X` with `f(X) ~ N(μ, Σ)` coordinatewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpnSpec {
    pub mu: Vec<f64>,
    pub sigma: SymMatrix,
    pub transforms: Vec<Transform>,
}

impl NpnSpec {
    pub fn new(mu: Vec<f64>, sigma: SymMatrix, transforms: Vec<Transform>) -> Result<Self> {
        let spec = Self {
            mu,
            sigma,
            transforms,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mu.len();
        if self.sigma.dim() != d || self.transforms.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if self.sigma.dim() != d {
                    self.sigma.dim()
                } else {
                    self.transforms.len()
                },
            });
        }
        for t in &self.transforms {
            t.validate()?;
        }
        Cholesky::new(&self.sigma)?;
        Ok(())
    }
}

/// Draws `n` rows: `Z = μ + Lε` with `LLᵀ = Σ`, then `Xⱼ = fⱼ⁻¹(Zⱼ)`.
pub fn sample_npn(spec: &NpnSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.dim();
    let chol = Cholesky::new(&spec.sigma)?;
    let mut rng = seeded_rng(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut eps = vec![0.0; d];
    for _ in 0..n {
        for e in eps.iter_mut() {
            *e = standard_normal(&mut rng);
        }
        let z = chol.lower_mul(&eps);
        for j in 0..d {
            values.push(spec.transforms[j].inverse(spec.mu[j] + z[j]));
        }
    }
    Dataset::new((1..=d).map(|k| format!("X{k}")).collect(), n, values)
}

/// Exact nonparanormal log density.
#[derive(Debug, Clone)]
pub struct NpnDensity {
    spec: NpnSpec,
    chol: Cholesky,
    log_norm: f64,
}

impl NpnDensity {
    pub fn new(spec: &NpnSpec) -> Result<Self> {
        spec.validate()?;
        let chol = Cholesky::new(&spec.sigma)?;
        let d = spec.dim() as f64;
        let log_norm = -0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * chol.log_det();
        Ok(Self {
            spec: spec.clone(),
            chol,
            log_norm,
        })
    }

    /// Gaussian log density at `f(x)` plus `Σ log |fⱼ'(xⱼ)|`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let d = self.spec.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        let mut jac = 0.0;
        let mut r = Vec::with_capacity(d);
        for (j, (&xj, t)) in x.iter().zip(&self.spec.transforms).enumerate() {
            let dj = t.derivative(xj).abs();
            if !(dj >= 1e-300) || !dj.is_finite() {
                return Err(Error::SingularJacobian(j));
            }
            jac += dj.ln();
            r.push(t.forward(xj) - self.spec.mu[j]);
        }
        self.chol.forward_solve(&mut r);
        let quad: f64 = r.iter().map(|v| v * v).sum();
        Ok(self.log_norm - 0.5 * quad + jac)
    }
}

pub fn npn_log_density(spec: &NpnSpec, x: &[f64]) -> Result<f64> {
    NpnDensity::new(spec)?.log_density(x)
}

/// A precision matrix with exactly `n_edges` nonzero off-diagonal pairs
/// chosen uniformly, magnitudes uniform on `[0.2, 0.5]` with random signs, and
/// diagonal equal to the absolute row sum plus 0.1.
pub fn random_sparse_precision(d: usize, n_edges: usize, seed: u64) -> Result<SymMatrix> {
    let max = d * d.saturating_sub(1) / 2;
    if n_edges > max {
        return Err(Error::TooManyEdges {
            requested: n_edges,
            max,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect();
    let mut rng = seeded_rng(seed);
    let mut chosen: Vec<usize> = sample_indices(&mut rng, max, n_edges).into_vec();
    chosen.sort_unstable();
    let mut omega = SymMatrix::zeros(d);
    for idx in chosen {
        let (i, j) = pairs[idx];
        let mag: f64 = rng.random_range(0.2..=0.5);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        omega.set(i, j, sign * mag);
    }
    for i in 0..d {
        let s: f64 = omega.row(i).iter().map(|v| v.abs()).sum();
        omega.set(i, i, s + 0.1);
    }
    Ok(omega)
}

/// Edge set of a precision matrix (entries above 1e-12).
pub fn precision_support(omega: &SymMatrix) -> Result<Graph> {
    let labels = (1..=omega.dim()).map(|k| format!("X{k}")).collect();
    support_graph(omega, labels, Some(1e-12))
}

/// Uniform random labelled spanning tree on `d` vertices via a Prüfer
/// sequence.
pub fn random_spanning_tree(d: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    match d {
        0 | 1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let seq: Vec<usize> = (0..d - 2).map(|_| rng.random_range(0..d)).collect();
    let mut degree = vec![1usize; d];
    for &v in &seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(d - 1);
    for &v in &seq {
        let leaf = (0..d)
            .find(|&u| degree[u] == 1)
            .expect("a leaf always exists");
        edges.push((leaf.min(v), leaf.max(v)));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..d).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Samples a random spanning tree, then a Gaussian Markov tree with unit
/// variances and correlation `link_rho` across every edge.
pub fn sample_tree_gaussian(
    d: usize,
    link_rho: f64,
    seed: u64,
    n: usize,
) -> Result<(Dataset, Graph)> {
    if d < 2 {
        return Err(Error::InvalidSpec(format!("tree needs d >= 2, got {d}")));
    }
    if !(link_rho.abs() < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "link correlation must lie in (-1, 1), got {link_rho}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let edges = random_spanning_tree(d, &mut rng);
    let labels: Vec<String> = (1..=d).map(|k| format!("X{k}")).collect();
    let tree = Graph::from_edges(labels.clone(), edges.iter().copied())?;

    let mut adj = vec![Vec::new(); d];
    for &(i, j) in &edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut order = vec![0usize];
    let mut parent = vec![usize::MAX; d];
    let mut seen = vec![false; d];
    seen[0] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = v;
                order.push(w);
            }
        }
    }

    let c = (1.0 - link_rho * link_rho).sqrt();
    let mut values = vec![0.0; n * d];
    for s in 0..n {
        let row = &mut values[s * d..(s + 1) * d];
        for &v in &order {
            let e = standard_normal(&mut rng);
            row[v] = if parent[v] == usize::MAX {
                e
            } else {
                link_rho * row[parent[v]] + c * e
            };
        }
    }
    Ok((Dataset::new(labels, n, values)?, tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::covariance;

    fn corr(data: &Dataset, i: usize, j: usize) -> f64 {
        let s = covariance(data);
        s.get(i, j) / (s.get(i, i) * s.get(j, j)).sqrt()
    }

    fn all_families() -> Vec<Transform> {
        vec![
            Transform::new(TransformFamily::Power, 0.8).unwrap(),
            Transform::new(TransformFamily::Power, 0.9).unwrap(),
            Transform::new(TransformFamily::Logistic, 5.0).unwrap(),
            Transform::new(TransformFamily::Logistic, 10.0).unwrap(),
            Transform::new(TransformFamily::Sinusoid, 5.0).unwrap(),
            Transform::new(TransformFamily::Sinusoid, 10.0).unwrap(),
        ]
    }

    #[test]
    fn inverse_roundtrip() {
        for t in all_families() {
            for k in -80..=80 {
                let z = k as f64 * 0.05 + 0.0123;
                let back = t.forward(t.inverse(z));
                assert!((back - z).abs() < 1e-8, "{t:?} z={z} back={back}");
            }
        }
    }

    #[test]
    fn logistic_is_continuous_and_increasing() {
        let t = Transform::new(TransformFamily::Logistic, 5.0).unwrap();
        for k in -3..=3 {
            let x = k as f64;
            assert!((t.forward(x - 1e-12) - t.forward(x)).abs() < 1e-9);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..1000 {
            let y = t.forward(-2.0 + k as f64 * 0.004);
            assert!(y > prev);
            prev = y;
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for t in all_families() {
            for &x in &[-1.3, -0.4, 0.37, 0.77, 2.1] {
                let h = 1e-6;
                let fd = (t.forward(x + h) - t.forward(x - h)) / (2.0 * h);
                assert!(
                    (fd - t.derivative(x)).abs() < 1e-5 * (1.0 + fd.abs()),
                    "{t:?} at {x}"
                );
            }
        }
    }

    #[test]
    fn validation() {
        assert!(Transform::new(TransformFamily::Sinusoid, 0.5).is_err());
        assert!(Transform::new(TransformFamily::Power, 0.0).is_err());
        let bad = NpnSpec::new(
            vec![0.0, 0.0],
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(),
            vec![Transform::identity(); 2],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn identity_and_unit_power_match_gaussian_draw() {
        let sigma = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let id = NpnSpec::new(
            vec![0.3, -1.0],
            sigma.clone(),
            vec![Transform::identity(); 2],
        )
        .unwrap();
        let x = sample_npn(&id, 50, 4).unwrap();

        let chol = Cholesky::new(&sigma).unwrap();
        let mut rng = seeded_rng(4);
        for s in 0..50 {
            let eps = [standard_normal(&mut rng), standard_normal(&mut rng)];
            let z = chol.lower_mul(&eps);
            assert_eq!(x.get(s, 0), 0.3 + z[0]);
            assert_eq!(x.get(s, 1), -1.0 + z[1]);
        }

        let p1 = NpnSpec::new(
            vec![0.3, -1.0],
            sigma,
            vec![Transform::new(TransformFamily::Power, 1.0).unwrap(); 2],
        )
        .unwrap();
        assert_eq!(sample_npn(&p1, 50, 4).unwrap(), x);
    }

    #[test]
    fn identity_density_is_gaussian() {
        let sigma = SymMatrix::from_rows(&[vec![2.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let spec = NpnSpec::new(vec![1.0, 0.0], sigma, vec![Transform::identity(); 2]).unwrap();
        let x = [0.4, 0.9];
        // Closed-form bivariate Normal density.
        let (s1, s2, r) = (2f64.sqrt(), 1.0, 0.6 / 2f64.sqrt());
        let (u, v) = ((x[0] - 1.0) / s1, x[1] / s2);
        let q = (u * u - 2.0 * r * u * v + v * v) / (1.0 - r * r);
        let oracle = -(2.0 * std::f64::consts::PI * s1 * s2 * (1.0 - r * r).sqrt()).ln() - 0.5 * q;
        assert!((npn_log_density(&spec, &x).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn power_density_singular_at_zero() {
        let spec = NpnSpec::new(
            vec![0.0],
            SymMatrix::identity(1),
            vec![Transform::new(TransformFamily::Power, 0.8).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            npn_log_density(&spec, &[0.0]),
            Err(Error::SingularJacobian(0))
        ));
    }

    #[test]
    fn sparse_precision_support_and_pd() {
        let omega = random_sparse_precision(10, 10, 99).unwrap();
        assert!(Cholesky::new(&omega).is_ok());
        assert_eq!(precision_support(&omega).unwrap().n_edges(), 10);
        for i in 0..10 {
            for j in 0..i {
                let v = omega.get(i, j).abs();
                assert!(v == 0.0 || (0.2..=0.5).contains(&v));
            }
        }
        let diag = random_sparse_precision(4, 0, 1).unwrap();
        assert_eq!(diag.max_abs_off_diagonal(), 0.0);
        assert!(matches!(
            random_sparse_precision(4, 7, 1),
            Err(Error::TooManyEdges {
                requested: 7,
                max: 6
            })
        ));
    }

    #[test]
    fn spanning_trees_are_trees() {
        let mut rng = seeded_rng(0);
        for d in 2..12 {
            let e = random_spanning_tree(d, &mut rng);
            let g = Graph::from_edges(Graph::unlabeled(d).vertices().to_vec(), e).unwrap();
            assert_eq!(g.n_edges(), d - 1);
            assert!(g.is_acyclic());
        }
    }

    #[test]
    fn spanning_trees_are_uniform_on_four_vertices() {
        // Cayley: 16 labelled trees on 4 vertices.
        let mut rng = seeded_rng(12);
        let mut counts = std::collections::BTreeMap::new();
        let draws = 16_000;
        for _ in 0..draws {
            let mut e = random_spanning_tree(4, &mut rng);
            e.sort();
            *counts.entry(e).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 16);
        for &c in counts.values() {
            assert!((c as f64 - 1000.0).abs() < 150.0, "{c}");
        }
    }

    #[test]
    fn tree_gaussian_correlations() {
        let (data, tree) = sample_tree_gaussian(2, 0.6, 3, 5000).unwrap();
        assert_eq!(tree.n_edges(), 1);
        assert!((corr(&data, 0, 1) - 0.6).abs() < 0.05);

        let (data, _) = sample_tree_gaussian(4, 0.0, 3, 5000).unwrap();
        for i in 0..4 {
            for j in 0..i {
                assert!(corr(&data, i, j).abs() < 0.05);
            }
        }

        // Walk every tree pair: correlation is ρ^(path length).
        let (data, tree) = sample_tree_gaussian(5, 0.6, 8, 5000).unwrap();
        let mut dist = [[usize::MAX; 5]; 5];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0;
        }
        for e in tree.edges() {
            dist[e.i][e.j] = 1;
            dist[e.j][e.i] = 1;
        }
        for k in 0..5 {
            for i in 0..5 {
                for j in 0..5 {
                    if dist[i][k] != usize::MAX && dist[k][j] != usize::MAX {
                        dist[i][j] = dist[i][j].min(dist[i][k] + dist[k][j]);
                    }
                }
            }
        }
        for i in 0..5 {
            for j in 0..i {
                let oracle = 0.6f64.powi(dist[i][j] as i32);
                assert!((corr(&data, i, j) - oracle).abs() < 0.05, "({i},{j})");
            }
        }
    }
}
