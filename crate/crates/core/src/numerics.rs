//! Scalar and matrix primitives shared by the estimators: the standard Normal
//! distribution, symmetric matrices with Cholesky-based inversion, and seeded
//! random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Pivots at or below this multiple of the largest diagonal entry are treated
/// as zero by the Cholesky factorization.
pub const PD_TOLERANCE: f64 = 1e-12;

/// Seeded random stream used by every stochastic operation.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x), evaluated through the complementary error function so both tails
/// keep full relative precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Φ⁻¹(p) for p in (0, 1).
///
/// Acklam's rational approximation (relative error ~1e-9) refined by one
/// Halley step on [`std_normal_cdf`]. Upper-half arguments are reflected, so
/// `q(p) == -q(1 - p)` holds exactly whenever `1 - p` is representable.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p == 0.5 {
        return 0.0;
    }
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // Halley refinement.
    let e = std_normal_cdf(x) - p;
    let u = e / std_normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// A dense symmetric matrix stored row-major. Symmetry is exact: every write
/// goes to both triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from rows, rejecting any asymmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(dim, entries)
    }

    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Sets entries (i, j) and (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
        self.entries[j * self.dim + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..i {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }

    /// Plain matrix product `self · other` (not necessarily symmetric).
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                for j in 0..d {
                    out[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Symmetric permutation: entry (i, j) of the result is entry
    /// (perm[i], perm[j]) of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                out.set(i, j, self.get(perm[i], perm[j]));
            }
        }
        out
    }

    /// Returns the sub-matrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().take(a + 1) {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = M`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn new(m: &SymMatrix) -> Result<Self> {
        let d = m.dim();
        let max_diag = m.diagonal().into_iter().fold(0.0_f64, f64::max);
        let threshold = PD_TOLERANCE * max_diag;
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut pivot = m.get(j, j);
            for k in 0..j {
                pivot -= l[j * d + k] * l[j * d + k];
            }
            if !(pivot > threshold) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot });
            }
            let root = pivot.sqrt();
            l[j * d + j] = root;
            for i in j + 1..d {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / root;
            }
        }
        Ok(Self { dim: d, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// log|M| = 2 Σ log Lᵢᵢ.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.lower(i, i).ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower(i, k) * b[k];
            }
            b[i] = s / self.lower(i, i);
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_solve(&self, y: &mut [f64]) {
        let d = self.dim;
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= self.lower(k, i) * y[k];
            }
            y[i] = s / self.lower(i, i);
        }
    }

    /// `L z`, used to colour white noise.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|k| self.lower(i, k) * z[k]).sum())
            .collect()
    }

    /// M⁻¹, symmetrised from the lower triangle.
    pub fn inverse(&self) -> SymMatrix {
        let d = self.dim;
        let mut inv = SymMatrix::zeros(d);
        let mut col = vec![0.0; d];
        for j in 0..d {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.forward_solve(&mut col);
            self.backward_solve(&mut col);
            for i in j..d {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

/// Log-determinant and inverse of a symmetric positive-definite matrix.
pub fn chol_logdet_inverse(m: &SymMatrix) -> Result<(f64, SymMatrix)> {
    let chol = Cholesky::new(m)?;
    Ok((chol.log_det(), chol.inverse()))
}
