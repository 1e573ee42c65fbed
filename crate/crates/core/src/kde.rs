//! Gaussian-kernel density estimates evaluated on a regular grid over the
//! unit cube, and the bandwidth rules used to build them.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::std_normal_pdf;

/// Default number of grid points per dimension.
pub const DEFAULT_GRID_SIZE: usize = 100;
/// Lower bound applied to every density value so logarithms stay finite.
pub const DEFAULT_FLOOR: f64 = 1e-8;
/// Rescaled data occupies `[MARGIN, 1 - MARGIN]`.
pub const UNIT_CUBE_MARGIN: f64 = 0.025;

/// Evaluation points shared by every table along each dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    points: Vec<f64>,
}

impl GridSpec {
    /// Midpoints of `m` equal cells of `[0, 1]`.
    pub fn midpoints(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("grid needs at least one point".into()));
        }
        Ok(Self {
            points: (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect(),
        })
    }

    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("grid needs at least one point".into()));
        }
        if points.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("grid points must lie in [0, 1]".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Lower bracketing node and interpolation weight for `u`, clamped to the
    /// outer nodes. Requires at least two points.
    fn locate(&self, u: f64) -> (usize, f64) {
        let p = &self.points;
        let m = p.len();
        if u <= p[0] {
            return (0, 0.0);
        }
        if u >= p[m - 1] {
            return (m - 2, 1.0);
        }
        let lo = p.partition_point(|&x| x <= u) - 1;
        (lo, (u - p[lo]) / (p[lo + 1] - p[lo]))
    }
}

/// Bandwidths attached to one variable: `univariate` for its own table,
/// `bivariate` for its coordinate in every pair table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBandwidth {
    pub univariate: f64,
    pub bivariate: f64,
}

/// How per-variable bandwidths are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `1.06 min(σ̂, IQR/1.34) n^{-1/(2β+2)}`, shared by both tables of a variable.
    NormalReference { beta: f64 },
    /// `(log n / n)^{1/(1+2β)}` and `(log n / n)^{1/(2+2β)}`.
    Theoretical { beta: f64 },
    /// Fixed values in unit-cube coordinates.
    Fixed { h1: f64, h2: f64 },
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::NormalReference { beta: 2.0 }
    }
}

impl BandwidthRule {
    pub fn bandwidths(&self, data: &Dataset) -> Result<Vec<VarBandwidth>> {
        let n = data.n_rows();
        match *self {
            BandwidthRule::NormalReference { beta } => (0..data.n_cols())
                .map(|j| {
                    let h =
                        bandwidth_normal_reference(&data.column(j), beta).map_err(|e| match e {
                            Error::ConstantColumn(_) => Error::ConstantColumn(j),
                            e => e,
                        })?;
                    Ok(VarBandwidth {
                        univariate: h,
                        bivariate: h,
                    })
                })
                .collect(),
            BandwidthRule::Theoretical { beta } => {
                let h = VarBandwidth {
                    univariate: bandwidth_theoretical(n, beta, 1)?,
                    bivariate: bandwidth_theoretical(n, beta, 2)?,
                };
                Ok(vec![h; data.n_cols()])
            }
            BandwidthRule::Fixed { h1, h2 } => {
                check_bandwidth(h1)?;
                check_bandwidth(h2)?;
                let h = VarBandwidth {
                    univariate: h1,
                    bivariate: h2,
                };
                Ok(vec![h; data.n_cols()])
            }
        }
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::BadBandwidth(h))
    }
}

/// `(log n / n)^{1/(dims + 2β)}` with unit constant.
pub fn bandwidth_theoretical(n: usize, beta: f64, dims: usize) -> Result<f64> {
    bandwidth_theoretical_real(n as f64, beta, dims)
}

/// As [`bandwidth_theoretical`] for a real-valued sample size.
pub fn bandwidth_theoretical_real(n: f64, beta: f64, dims: usize) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(Error::Domain(format!("bandwidth needs n >= 2, got {n}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if dims != 1 && dims != 2 {
        return Err(Error::Domain(format!("dims must be 1 or 2, got {dims}")));
    }
    Ok((n.ln() / n).powf(1.0 / (dims as f64 + 2.0 * beta)))
}

/// Sample quantile by linear interpolation between order statistics
/// (type 7). `sorted` must be nonempty and nondecreasing.
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Normal-reference bandwidth `1.06 min(σ̂, IQR/1.34) n^{-1/(2β+2)}`, with σ̂
/// the sample standard deviation (divisor n − 1). A zero interquartile range
/// falls back to σ̂ alone.
///
/// A constant sample yields `ConstantColumn(0)`; [`BandwidthRule`] re-tags it
/// with the real column index.
pub fn bandwidth_normal_reference(column: &[f64], beta: f64) -> Result<f64> {
    let n = column.len();
    if n < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: n,
        });
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let mean = column.iter().sum::<f64>() / n as f64;
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::ConstantColumn(0));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_type7(&sorted, 0.75) - quantile_type7(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(1.06 * spread * (n as f64).powf(-1.0 / (2.0 * beta + 2.0)))
}

/// Kernel values `φ((xₛ − gₖ)/h)/h` for every grid node k and sample s,
/// stored node-major.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    m: usize,
    n: usize,
    values: Vec<f64>,
}

impl KernelBasis {
    pub fn new(sample: &[f64], h: f64, grid: &GridSpec) -> Result<Self> {
        check_bandwidth(h)?;
        let (m, n) = (grid.m(), sample.len());
        let mut values = Vec::with_capacity(m * n);
        for &g in grid.points() {
            values.extend(sample.iter().map(|&x| std_normal_pdf((x - g) / h) / h));
        }
        Ok(Self { m, n, values })
    }

    fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    /// Average kernel value at each node.
    pub fn density(&self) -> Vec<f64> {
        let nf = self.n as f64;
        (0..self.m)
            .map(|k| self.node(k).iter().sum::<f64>() / nf)
            .collect()
    }

    /// Product-kernel density on the `m × m` grid; rows follow `self`.
    pub fn joint_density(&self, other: &KernelBasis) -> Result<Vec<f64>> {
        if self.n != other.n {
            return Err(Error::LengthMismatch(self.n, other.n));
        }
        if self.m != other.m {
            return Err(Error::GridMismatch);
        }
        let nf = self.n as f64;
        let mut out = Vec::with_capacity(self.m * other.m);
        for a in 0..self.m {
            let ka = self.node(a);
            for b in 0..other.m {
                let s: f64 = ka.iter().zip(other.node(b)).map(|(x, y)| x * y).sum();
                out.push(s / nf);
            }
        }
        Ok(out)
    }
}

pub(crate) fn check_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "density floor must be positive, got {floor}"
        )))
    }
}

/// Univariate density values on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateTable {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub floor: f64,
}

impl UnivariateTable {
    pub(crate) fn from_basis(basis: &KernelBasis, grid: &GridSpec, h: f64, floor: f64) -> Self {
        let values = basis.density().into_iter().map(|v| v.max(floor)).collect();
        Self {
            grid: grid.clone(),
            values,
            bandwidth: h,
            floor,
        }
    }

    /// Riemann sum `(1/m) Σ p(xₖ)`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.m() as f64
    }

    /// Piecewise-linear interpolation, constant beyond the outer nodes.
    pub fn interpolate(&self, u: f64) -> f64 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        let (k, t) = self.grid.locate(u);
        (1.0 - t) * self.values[k] + t * self.values[k + 1]
    }
}

/// Bivariate density values on the `m × m` grid, row-major with the first
/// variable indexing rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateTable {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub bandwidths: (f64, f64),
    pub floor: f64,
}

impl BivariateTable {
    pub(crate) fn from_bases(
        a: &KernelBasis,
        b: &KernelBasis,
        grid: &GridSpec,
        bandwidths: (f64, f64),
        floor: f64,
    ) -> Result<Self> {
        let values = a
            .joint_density(b)?
            .into_iter()
            .map(|v| v.max(floor))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            values,
            bandwidths,
            floor,
        })
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.m() + b]
    }

    /// Riemann sum `(1/m²) ΣΣ p(xₐ, x_b)`.
    pub fn mass(&self) -> f64 {
        let m = self.m() as f64;
        self.values.iter().sum::<f64>() / (m * m)
    }

    pub fn transposed(&self) -> Self {
        let m = self.m();
        let mut values = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                values[b * m + a] = self.values[a * m + b];
            }
        }
        Self {
            grid: self.grid.clone(),
            values,
            bandwidths: (self.bandwidths.1, self.bandwidths.0),
            floor: self.floor,
        }
    }

    /// Bilinear interpolation, constant beyond the outer nodes.
    pub fn interpolate(&self, u: f64, v: f64) -> f64 {
        let m = self.m();
        if m == 1 {
            return self.values[0];
        }
        let (a, s) = self.grid.locate(u);
        let (b, t) = self.grid.locate(v);
        let p00 = self.values[a * m + b];
        let p01 = self.values[a * m + b + 1];
        let p10 = self.values[(a + 1) * m + b];
        let p11 = self.values[(a + 1) * m + b + 1];
        (1.0 - s) * ((1.0 - t) * p00 + t * p01) + s * ((1.0 - t) * p10 + t * p11)
    }
}

pub fn kde_univariate(
    sample: &[f64],
    h: f64,
    grid: &GridSpec,
    floor: f64,
) -> Result<UnivariateTable> {
    check_floor(floor)?;
    let basis = KernelBasis::new(sample, h, grid)?;
    Ok(UnivariateTable::from_basis(&basis, grid, h, floor))
}

/// Product-kernel bivariate KDE. `bandwidths` are the per-coordinate widths;
/// pass equal values for a single shared bandwidth.
pub fn kde_bivariate(
    x: &[f64],
    y: &[f64],
    bandwidths: (f64, f64),
    grid: &GridSpec,
    floor: f64,
) -> Result<BivariateTable> {
    check_floor(floor)?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let a = KernelBasis::new(x, bandwidths.0, grid)?;
    let b = KernelBasis::new(y, bandwidths.1, grid)?;
    BivariateTable::from_bases(&a, &b, grid, bandwidths, floor)
}

/// The map `x ↦ offset + scale·x` for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.offset + self.scale * x
    }

    pub fn invert(&self, u: f64) -> f64 {
        (u - self.offset) / self.scale
    }
}

/// Maps each column affinely so its minimum lands on 0.025 and its maximum on
/// 0.975.
pub fn rescale_to_unit_cube(data: &Dataset) -> Result<(Dataset, Vec<AffineMap>)> {
    if data.n_rows() == 0 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: 0,
        });
    }
    let maps = (0..data.n_cols())
        .map(|j| {
            let col = data.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(Error::ConstantColumn(j));
            }
            let scale = (1.0 - 2.0 * UNIT_CUBE_MARGIN) / (hi - lo);
            Ok(AffineMap {
                offset: UNIT_CUBE_MARGIN - scale * lo,
                scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scaled = data.map(|j, x| maps[j].apply(x));
    Ok((scaled, maps))
}
