//! Plug-in mutual information and entropy on the grid, the pairwise mutual
//! information matrix, and the held-out quantities used to prune a forest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::ForestDensityModel;
use crate::graph::Graph;
use crate::kde::{
    check_bandwidth, check_floor, BandwidthRule, BivariateTable, GridSpec, KernelBasis,
    UnivariateTable, VarBandwidth,
};
use crate::numerics::{std_normal_pdf, SymMatrix};

/// `(1/m²) ΣΣ J log(J / (pᵢ p_j))`. Swapping the two variables (transposed
/// joint, swapped marginals) gives a bit-identical result.
pub fn mi_grid(
    joint: &BivariateTable,
    marg_i: &UnivariateTable,
    marg_j: &UnivariateTable,
) -> Result<f64> {
    let m = joint.m();
    if marg_i.grid != joint.grid || marg_j.grid != joint.grid || joint.values.len() != m * m {
        return Err(Error::GridMismatch);
    }
    let term = |a: usize, b: usize| {
        let v = joint.at(a, b);
        v * (v / (marg_i.values[a] * marg_j.values[b])).ln()
    };
    let mut sum = 0.0;
    for a in 0..m {
        sum += term(a, a);
        for b in a + 1..m {
            sum += term(a, b) + term(b, a);
        }
    }
    Ok(sum / (m * m) as f64)
}

/// `(1/m) Σ p (−log p)` over the grid.
pub fn entropy_grid(marg: &UnivariateTable) -> f64 {
    let s: f64 = marg.values.iter().map(|&p| -p * p.ln()).sum();
    s / marg.grid.m() as f64
}

/// Kernel bases and marginal tables for one sample in unit-cube coordinates.
#[derive(Debug, Clone)]
pub struct DensityTables {
    data: Dataset,
    grid: GridSpec,
    bandwidths: Vec<VarBandwidth>,
    floor: f64,
    uni: Vec<KernelBasis>,
    bi: Option<Vec<KernelBasis>>,
    marginals: Vec<UnivariateTable>,
}

impl DensityTables {
    pub fn build(
        data: &Dataset,
        bandwidths: &[VarBandwidth],
        grid: &GridSpec,
        floor: f64,
    ) -> Result<Self> {
        check_floor(floor)?;
        if bandwidths.len() != data.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: data.n_cols(),
                found: bandwidths.len(),
            });
        }
        for h in bandwidths {
            check_bandwidth(h.univariate)?;
            check_bandwidth(h.bivariate)?;
        }
        let columns = data.columns();
        let basis = |pick: fn(&VarBandwidth) -> f64| -> Result<Vec<KernelBasis>> {
            columns
                .par_iter()
                .zip(bandwidths.par_iter())
                .map(|(c, h)| KernelBasis::new(c, pick(h), grid))
                .collect()
        };
        let uni = basis(|h| h.univariate)?;
        let bi = if bandwidths.iter().all(|h| h.univariate == h.bivariate) {
            None
        } else {
            Some(basis(|h| h.bivariate)?)
        };
        let marginals = uni
            .iter()
            .zip(bandwidths)
            .map(|(b, h)| UnivariateTable::from_basis(b, grid, h.univariate, floor))
            .collect();
        Ok(Self {
            data: data.clone(),
            grid: grid.clone(),
            bandwidths: bandwidths.to_vec(),
            floor,
            uni,
            bi,
            marginals,
        })
    }

    /// Bandwidths from `rule` applied to `data`, then [`DensityTables::build`].
    pub fn with_rule(
        data: &Dataset,
        rule: &BandwidthRule,
        grid: &GridSpec,
        floor: f64,
    ) -> Result<Self> {
        let bw = rule.bandwidths(data)?;
        Self::build(data, &bw, grid, floor)
    }

    pub fn dim(&self) -> usize {
        self.data.n_cols()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn bandwidths(&self) -> &[VarBandwidth] {
        &self.bandwidths
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn marginal(&self, k: usize) -> &UnivariateTable {
        &self.marginals[k]
    }

    fn bi_basis(&self, k: usize) -> &KernelBasis {
        match &self.bi {
            Some(b) => &b[k],
            None => &self.uni[k],
        }
    }

    pub fn joint(&self, i: usize, j: usize) -> Result<BivariateTable> {
        let h = (self.bandwidths[i].bivariate, self.bandwidths[j].bivariate);
        BivariateTable::from_bases(
            self.bi_basis(i),
            self.bi_basis(j),
            &self.grid,
            h,
            self.floor,
        )
        .map_err(|e| Error::AtPair {
            i,
            j,
            source: Box::new(e),
        })
    }

    pub fn mi_matrix(&self) -> Result<MiMatrix> {
        let d = self.dim();
        if d < 2 {
            return Err(Error::Domain(format!(
                "mutual information needs d >= 2, got {d}"
            )));
        }
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| {
                let joint = self.joint(i, j)?;
                mi_grid(&joint, &self.marginals[i], &self.marginals[j])
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut entries = SymMatrix::zeros(d);
        for (&(i, j), v) in pairs.iter().zip(values) {
            entries.set(i, j, v);
        }
        Ok(MiMatrix {
            entries,
            grid: self.grid.clone(),
            bandwidths: self.bandwidths.clone(),
        })
    }
}

/// Estimated pairwise mutual information with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiMatrix {
    pub entries: SymMatrix,
    pub grid: GridSpec,
    pub bandwidths: Vec<VarBandwidth>,
}

impl MiMatrix {
    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }
}

/// Mutual information matrix of `data` (unit-cube coordinates).
pub fn mi_matrix(
    data: &Dataset,
    bandwidths: &[VarBandwidth],
    grid: &GridSpec,
    floor: f64,
) -> Result<MiMatrix> {
    DensityTables::build(data, bandwidths, grid, floor)?.mi_matrix()
}

/// Held-out averages of split-1 kernel estimates evaluated at split-2 points.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutTerms {
    /// `(1/n₂) Σ log p̂₁(Xₖ)` per vertex.
    pub vertex: Vec<f64>,
    /// `(1/n₂) Σ log(p̂₁(Xᵢ,X_j) / (p̂₁(Xᵢ) p̂₁(X_j)))` per pair.
    pub edge: SymMatrix,
}

fn kernel_row(sample: &[f64], x: f64, h: f64, out: &mut [f64]) {
    for (o, &s) in out.iter_mut().zip(sample) {
        *o = std_normal_pdf((s - x) / h) / h;
    }
}

/// Evaluates the split-1 kernel estimates pointwise at every split-2 row.
pub fn heldout_terms(tables: &DensityTables, split2: &Dataset) -> Result<HeldoutTerms> {
    let d = tables.dim();
    if split2.n_cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: split2.n_cols(),
        });
    }
    let n2 = split2.n_rows();
    if n2 == 0 {
        return Err(Error::TooFewRows {
            needed: 1,
            found: 0,
        });
    }
    let columns = tables.data.columns();
    let n1 = tables.data.n_rows();
    let floor = tables.floor;
    let separate_bi = tables.bi.is_some();
    let n_pairs = d * (d - 1) / 2;

    let per_row: Vec<Vec<f64>> = (0..n2)
        .into_par_iter()
        .map(|s| {
            let x = split2.row(s);
            let mut uni = vec![0.0; d * n1];
            let mut bi = if separate_bi {
                vec![0.0; d * n1]
            } else {
                Vec::new()
            };
            let mut out = Vec::with_capacity(d + n_pairs);
            for k in 0..d {
                let h = tables.bandwidths[k];
                let row = &mut uni[k * n1..(k + 1) * n1];
                kernel_row(&columns[k], x[k], h.univariate, row);
                out.push((row.iter().sum::<f64>() / n1 as f64).max(floor).ln());
                if separate_bi {
                    kernel_row(
                        &columns[k],
                        x[k],
                        h.bivariate,
                        &mut bi[k * n1..(k + 1) * n1],
                    );
                }
            }
            let kb = if separate_bi { &bi } else { &uni };
            for i in 0..d {
                let ki = &kb[i * n1..(i + 1) * n1];
                for j in i + 1..d {
                    let kj = &kb[j * n1..(j + 1) * n1];
                    let joint = ki.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / n1 as f64;
                    out.push(joint.max(floor).ln() - out[i] - out[j]);
                }
            }
            out
        })
        .collect();

    let mut sums = vec![0.0; d + n_pairs];
    for row in &per_row {
        for (acc, v) in sums.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let n2f = n2 as f64;
    let vertex = sums[..d].iter().map(|v| v / n2f).collect();
    let mut edge = SymMatrix::zeros(d);
    let mut p = d;
    for i in 0..d {
        for j in i + 1..d {
            edge.set(i, j, sums[p] / n2f);
            p += 1;
        }
    }
    Ok(HeldoutTerms { vertex, edge })
}

/// Symmetric matrix of held-out edge weights with a zero diagonal.
pub fn heldout_edge_weights(tables: &DensityTables, split2: &Dataset) -> Result<SymMatrix> {
    Ok(heldout_terms(tables, split2)?.edge)
}

/// Held-out log-likelihood for each stage and the stage that maximises it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutSelection {
    pub k_hat: usize,
    pub curve: Vec<f64>,
}

/// Walks the nested stages once, adding the terms of newly included edges.
/// Ties go to the smallest k.
pub fn select_from_terms(stages: &[Graph], terms: &HeldoutTerms) -> Result<HeldoutSelection> {
    let first = stages.first().ok_or(Error::EmptyStageList)?;
    let mut value: f64 = terms.vertex.iter().sum();
    for e in first.edges() {
        value += terms.edge.get(e.i, e.j);
    }
    let mut curve = vec![value];
    for w in stages.windows(2) {
        for e in w[1].edges() {
            if !w[0].contains(e.i, e.j) {
                value += terms.edge.get(e.i, e.j);
            }
        }
        curve.push(value);
    }
    Ok(HeldoutSelection {
        k_hat: argmax_first(&curve),
        curve,
    })
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

pub fn heldout_loglik_select(
    stages: &[Graph],
    tables: &DensityTables,
    split2: &Dataset,
) -> Result<HeldoutSelection> {
    if stages.is_empty() {
        return Err(Error::EmptyStageList);
    }
    select_from_terms(stages, &heldout_terms(tables, split2)?)
}

/// `(1/m²) ΣΣ p̂₂(a,b) log(p̂₁(a,b) / (p̂₁(a) p̂₁(b)))`.
fn edge_cross_term(
    joint1: &BivariateTable,
    marg1_i: &UnivariateTable,
    marg1_j: &UnivariateTable,
    joint2: &BivariateTable,
) -> Result<f64> {
    let m = joint1.m();
    if joint2.grid != joint1.grid || marg1_i.grid != joint1.grid || marg1_j.grid != joint1.grid {
        return Err(Error::GridMismatch);
    }
    let mut sum = 0.0;
    for a in 0..m {
        for b in 0..m {
            let ratio = joint1.at(a, b) / (marg1_i.values[a] * marg1_j.values[b]);
            sum += joint2.at(a, b) * ratio.ln();
        }
    }
    Ok(sum / (m * m) as f64)
}

/// `(1/m) Σ p̂₂ log p̂₁`.
fn vertex_cross_term(marg1: &UnivariateTable, marg2: &UnivariateTable) -> Result<f64> {
    if marg1.grid != marg2.grid {
        return Err(Error::GridMismatch);
    }
    let s: f64 = marg1
        .values
        .iter()
        .zip(&marg2.values)
        .map(|(p1, p2)| p2 * p1.ln())
        .sum();
    Ok(s / marg1.grid.m() as f64)
}

/// Grid held-out risk of every stage: minus the cross edge terms of the stage
/// minus the cross vertex terms, with split-1 tables `t1` and split-2 tables
/// `t2` on the same grid.
pub fn heldout_risk_curve(
    stages: &[Graph],
    t1: &DensityTables,
    t2: &DensityTables,
) -> Result<Vec<f64>> {
    if stages.is_empty() {
        return Err(Error::EmptyStageList);
    }
    if t1.grid != t2.grid {
        return Err(Error::GridMismatch);
    }
    let mut vertex = 0.0;
    for k in 0..t1.dim() {
        vertex += vertex_cross_term(&t1.marginals[k], &t2.marginals[k])?;
    }
    let mut cache = std::collections::BTreeMap::new();
    let mut curve = Vec::with_capacity(stages.len());
    for g in stages {
        let mut edge = 0.0;
        for e in g.edges() {
            edge += match cache.entry((e.i, e.j)) {
                std::collections::btree_map::Entry::Occupied(v) => *v.get(),
                std::collections::btree_map::Entry::Vacant(slot) => *slot.insert(edge_cross_term(
                    &t1.joint(e.i, e.j)?,
                    &t1.marginals[e.i],
                    &t1.marginals[e.j],
                    &t2.joint(e.i, e.j)?,
                )?),
            };
        }
        curve.push(-edge - vertex);
    }
    Ok(curve)
}

/// Grid held-out risk of a fitted model on `split2` given in original
/// coordinates. Split-2 tables use `rule` on the model's grid and floor.
pub fn heldout_risk(
    model: &ForestDensityModel,
    split2: &Dataset,
    rule: &BandwidthRule,
) -> Result<f64> {
    let d = model.maps.len();
    if split2.n_cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: split2.n_cols(),
        });
    }
    let unit = split2.map(|j, x| model.maps[j].apply(x));
    let t2 = DensityTables::with_rule(&unit, rule, &model.grid, model.floor)?;
    let mut risk = 0.0;
    for k in 0..d {
        risk -= vertex_cross_term(&model.vertex_tables[k], &t2.marginals[k])?;
    }
    for (e, joint1) in model.forest.edges().iter().zip(&model.edge_tables) {
        risk -= edge_cross_term(
            joint1,
            &model.vertex_tables[e.i],
            &model.vertex_tables[e.j],
            &t2.joint(e.i, e.j)?,
        )?;
    }
    Ok(risk)
}
