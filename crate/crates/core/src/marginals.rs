//! Winsorized empirical CDFs and the Normal-score transform that maps each
//! variable to approximate Gaussianity before precision estimation.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{std_normal_quantile, SymMatrix};

/// CDF truncation level `1 / (4 n^{1/4} sqrt(pi log n))`.
pub fn default_delta(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "truncation level needs n >= 2, got {n}"
        )));
    }
    let n = n as f64;
    Ok(1.0 / (4.0 * n.powf(0.25) * (std::f64::consts::PI * n.ln()).sqrt()))
}

/// Fraction of `sorted` that is `<= t`.
pub fn empirical_cdf(sorted: &[f64], t: f64) -> f64 {
    let count = sorted.partition_point(|&v| v <= t);
    count as f64 / sorted.len() as f64
}

/// Empirical CDF clamped to `[delta, 1 - delta]`.
pub fn winsorized_cdf(sorted: &[f64], t: f64, delta: f64) -> f64 {
    empirical_cdf(sorted, t).clamp(delta, 1.0 - delta)
}

/// How transformed values are located and scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationMode {
    /// Plain Normal scores Φ⁻¹(F̃(x)): mean 0, scale 1.
    #[default]
    NormalScores,
    /// `mu + sigma * Φ⁻¹(F̃(x))`, preserving each column's sample mean and
    /// standard deviation.
    MatchMoments,
}

/// Per-column Winsorized empirical CDF state fitted on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTransform {
    names: Vec<String>,
    sorted: Vec<Vec<f64>>,
    n: usize,
    delta: f64,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    mode: IdentificationMode,
}

impl MarginalTransform {
    /// Fits the transform. `delta_override` replaces [`default_delta`].
    pub fn fit(
        data: &Dataset,
        delta_override: Option<f64>,
        mode: IdentificationMode,
    ) -> Result<Self> {
        let n = data.n_rows();
        if n < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                found: n,
            });
        }
        if let Some(j) = data.find_constant_column() {
            return Err(Error::ConstantColumn(j));
        }
        let delta = match delta_override {
            Some(d) if d > 0.0 && d < 0.5 => d,
            Some(d) => {
                return Err(Error::Domain(format!(
                    "delta must lie in (0, 0.5), got {d}"
                )))
            }
            None => default_delta(n)?,
        };
        let mut sorted = Vec::with_capacity(data.n_cols());
        let mut mu = Vec::with_capacity(data.n_cols());
        let mut sigma = Vec::with_capacity(data.n_cols());
        for j in 0..data.n_cols() {
            let mut col = data.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            col.sort_by(f64::total_cmp);
            sorted.push(col);
            mu.push(mean);
            sigma.push(var.sqrt());
        }
        Ok(Self {
            names: data.names().to_vec(),
            sorted,
            n,
            delta,
            mu,
            sigma,
            mode,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> IdentificationMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.sorted.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sorted_column(&self, j: usize) -> &[f64] {
        &self.sorted[j]
    }

    /// h̃ⱼ(x) = Φ⁻¹(F̃ⱼ(x)).
    pub fn score(&self, j: usize, x: f64) -> f64 {
        let p = winsorized_cdf(&self.sorted[j], x, self.delta);
        // p lies in [delta, 1 - delta] with 0 < delta < 0.5.
        std_normal_quantile(p).expect("winsorized cdf is inside (0, 1)")
    }

    /// The transformed value f̃ⱼ(x) under the fitted identification mode.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let h = self.score(j, x);
        match self.mode {
            IdentificationMode::NormalScores => h,
            IdentificationMode::MatchMoments => self.mu[j] + self.sigma[j] * h,
        }
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        self.check_dim(data)?;
        Ok(data.map(|j, x| self.transform_value(j, x)))
    }

    /// Sample covariance (divisor n) of the transformed data.
    pub fn transformed_covariance(&self, data: &Dataset) -> Result<SymMatrix> {
        let t = self.transform(data)?;
        Ok(covariance(&t))
    }

    fn check_dim(&self, data: &Dataset) -> Result<()> {
        if data.n_cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: data.n_cols(),
            });
        }
        Ok(())
    }
}

/// Covariance with divisor n. Sums run over rows in order, so equal inputs
/// give bit-identical output.
pub fn covariance(data: &Dataset) -> SymMatrix {
    let (n, d) = (data.n_rows(), data.n_cols());
    let nf = n as f64;
    let means: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| data.get(i, j)).sum::<f64>() / nf)
        .collect();
    let mut cov = SymMatrix::zeros(d);
    for j in 0..d {
        for k in 0..=j {
            let s: f64 = (0..n)
                .map(|i| (data.get(i, j) - means[j]) * (data.get(i, k) - means[k]))
                .sum();
            cov.set(j, k, s / nf);
        }
    }
    cov
}
