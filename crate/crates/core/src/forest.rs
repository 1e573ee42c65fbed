//! Chow–Liu forests: Kruskal stages over a weight matrix, held-out pruning
//! and the resulting forest density.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::kde::{
    rescale_to_unit_cube, AffineMap, BandwidthRule, BivariateTable, GridSpec, UnivariateTable,
    VarBandwidth, DEFAULT_FLOOR, DEFAULT_GRID_SIZE,
};
use crate::mutual_info::{heldout_loglik_select, DensityTables, HeldoutSelection, MiMatrix};
use crate::numerics::seeded_rng;

pub use crate::graph::{closest_on_path, graph_diff};

/// Disjoint sets over `0..n` with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

/// Nested forests `E⁽⁰⁾ ⊂ … ⊂ E⁽ᵈ⁻¹⁾` produced by Kruskal's greedy order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KruskalStages {
    /// Always `d` entries (one per k = 0..d−1).
    pub stages: Vec<Graph>,
    /// Accepted edges in acceptance order.
    pub order: Vec<Edge>,
    /// True when fewer than `d − 1` edges could be accepted and the last
    /// forest was repeated.
    pub padded: bool,
}

/// Greedy maximum-weight forest sequence. Every finite-weight edge that does
/// not close a cycle is accepted, negative weights included; `-inf` marks an
/// absent edge. Ties go to the lexicographically smaller `(i, j)`.
pub fn kruskal_stages(weights: &[Vec<f64>], labels: &[String]) -> Result<KruskalStages> {
    let d = weights.len();
    if labels.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: labels.len(),
        });
    }
    if let Some(row) = weights.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: row.len(),
        });
    }
    let mut candidates = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let (a, b) = (weights[i][j], weights[j][i]);
            if a.to_bits() != b.to_bits() && a != b {
                return Err(Error::NonSymmetricWeights(i, j));
            }
            if a.is_nan() || a == f64::INFINITY {
                return Err(Error::Domain(format!("weight ({i}, {j}) is {a}")));
            }
            if a != f64::NEG_INFINITY {
                candidates.push((i, j, a));
            }
        }
    }
    candidates.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));

    let mut uf = UnionFind::new(d);
    let mut current = Graph::new(labels.to_vec());
    let mut stages = vec![current.clone()];
    let mut order = Vec::new();
    for (i, j, w) in candidates {
        if stages.len() == d.max(1) {
            break;
        }
        if uf.union(i, j) {
            current.add_edge(i, j, Some(w))?;
            order.push(Edge {
                i,
                j,
                weight: Some(w),
            });
            stages.push(current.clone());
        }
    }
    let padded = stages.len() < d;
    while stages.len() < d {
        stages.push(current.clone());
    }
    Ok(KruskalStages {
        stages,
        order,
        padded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub split_fraction: f64,
    pub seed: u64,
    pub grid_size: usize,
    pub bandwidth: BandwidthRule,
    pub floor: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            split_fraction: 0.5,
            seed: 0,
            grid_size: DEFAULT_GRID_SIZE,
            bandwidth: BandwidthRule::default(),
            floor: DEFAULT_FLOOR,
        }
    }
}

/// Rows in the first split: `ceil(fraction · n)`.
pub fn split_sizes(n: usize, fraction: f64) -> Result<(usize, usize)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n1 = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let n1 = n1.min(n);
    Ok((n1, n - n1))
}

/// Forest density built from grid tables in unit-cube coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestDensityModel {
    pub forest: Graph,
    pub grid: GridSpec,
    pub floor: f64,
    pub bandwidths: Vec<VarBandwidth>,
    pub maps: Vec<AffineMap>,
    pub vertex_tables: Vec<UnivariateTable>,
    /// Aligned with `forest.edges()`.
    pub edge_tables: Vec<BivariateTable>,
}

impl ForestDensityModel {
    pub fn from_tables(
        forest: Graph,
        tables: &DensityTables,
        maps: Vec<AffineMap>,
    ) -> Result<Self> {
        let d = tables.dim();
        if forest.n_vertices() != d || maps.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if maps.len() != d {
                    maps.len()
                } else {
                    forest.n_vertices()
                },
            });
        }
        let edge_tables = forest
            .edges()
            .iter()
            .map(|e| tables.joint(e.i, e.j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            forest,
            grid: tables.grid().clone(),
            floor: tables.floor(),
            bandwidths: tables.bandwidths().to_vec(),
            maps,
            vertex_tables: (0..d).map(|k| tables.marginal(k).clone()).collect(),
            edge_tables,
        })
    }

    pub fn dim(&self) -> usize {
        self.maps.len()
    }

    /// `Σ_edges log p(uᵢ,u_j) + Σ_v (1 − deg v) log p(u_v)` for a point
    /// already in unit-cube coordinates.
    pub fn log_density_unit(&self, u: &[f64]) -> Result<f64> {
        let d = self.dim();
        if u.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.len(),
            });
        }
        let mut degree = vec![0i64; d];
        let mut total = 0.0;
        for (e, t) in self.forest.edges().iter().zip(&self.edge_tables) {
            degree[e.i] += 1;
            degree[e.j] += 1;
            total += t.interpolate(u[e.i], u[e.j]).ln();
        }
        for k in 0..d {
            let w = 1 - degree[k];
            if w != 0 {
                total += w as f64 * self.vertex_tables[k].interpolate(u[k]).ln();
            }
        }
        Ok(total)
    }

    /// Log density in original coordinates, including the log Jacobian of
    /// the rescaling.
    pub fn evaluate_log_density(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        let u: Vec<f64> = x.iter().zip(&self.maps).map(|(&v, m)| m.apply(v)).collect();
        let jac: f64 = self.maps.iter().map(|m| m.scale.abs().ln()).sum();
        Ok(self.log_density_unit(&u)? + jac)
    }
}

/// Everything produced by [`fit_forest`].
#[derive(Debug, Clone)]
pub struct ForestFit {
    pub model: ForestDensityModel,
    pub mi: MiMatrix,
    pub stages: KruskalStages,
    pub selection: HeldoutSelection,
    /// Row indices (into the input) of each split, ascending.
    pub split1: Vec<usize>,
    pub split2: Vec<usize>,
}

/// Seeded row split of `n` rows into index sets of sizes `split_sizes`.
pub fn split_rows(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let (n1, _) = split_sizes(n, fraction)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(seed));
    let mut a = perm[..n1].to_vec();
    let mut b = perm[n1..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

/// Rescales to the unit cube, splits rows, builds the mutual information
/// matrix and Kruskal stages on the first split, and keeps the stage with the
/// best held-out log-likelihood on the second.
pub fn fit_forest(data: &Dataset, cfg: &ForestConfig) -> Result<ForestFit> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if n < 4 {
        return Err(Error::TooFewRows {
            needed: 4,
            found: n,
        });
    }
    if d < 2 {
        return Err(Error::Domain(format!(
            "forest estimation needs d >= 2, got {d}"
        )));
    }
    let (split1, split2) = split_rows(n, cfg.split_fraction, cfg.seed)?;
    if split1.len() < 2 || split2.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 4,
            found: n,
        });
    }
    let (unit, maps) = rescale_to_unit_cube(data)?;
    let d1 = unit.select_rows(&split1);
    let d2 = unit.select_rows(&split2);
    let grid = GridSpec::midpoints(cfg.grid_size)?;
    let tables = DensityTables::with_rule(&d1, &cfg.bandwidth, &grid, cfg.floor)?;
    let mi = tables.mi_matrix()?;
    let stages = kruskal_stages(&mi.entries.to_rows(), data.names())?;
    let selection = heldout_loglik_select(&stages.stages, &tables, &d2)?;
    let forest = stages.stages[selection.k_hat].clone();
    let model = ForestDensityModel::from_tables(forest, &tables, maps)?;
    Ok(ForestFit {
        model,
        mi,
        stages,
        selection,
        split1,
        split2,
    })
}
