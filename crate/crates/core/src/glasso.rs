//! ℓ1-penalised Gaussian precision estimation.
//!
//! Minimises `tr(Ω S) − log|Ω| + λ Σⱼₖ |Ωⱼₖ|` by block coordinate descent over
//! columns of Ω. With `W = Ω⁻¹` partitioned around column j, fixing the
//! remaining block Ω₁₁ turns the column update into
//!
//! ```text
//! min_γ  ½ γᵀ A γ + s₁₂ᵀ γ + Σₖ λⱼₖ |γₖ|,   A = (s₂₂ + λⱼⱼ) Ω₁₁⁻¹
//! ω₂₂ = 1 / (s₂₂ + λⱼⱼ) + γᵀ Ω₁₁⁻¹ γ
//! ```
//!
//! a lasso solved by cyclic coordinate descent. `Ω₁₁⁻¹` and the updated `W`
//! come from rank-one corrections, so every iterate stays positive definite
//! and the objective never increases. Convergence is declared on the KKT
//! residual, which doubles as an implementation-independent certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{Cholesky, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoConfig {
    pub lambda: f64,
    pub max_outer_iters: usize,
    /// Largest tolerated KKT violation.
    pub tol: f64,
    /// Penalise the diagonal as well (the ‖Ω‖₁ sum runs over all entries).
    pub penalize_diagonal: bool,
}

impl GlassoConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Domain("max_outer_iters must be positive".into()));
        }
        Ok(())
    }
}

impl Default for GlassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_outer_iters: 200,
            tol: 1e-6,
            penalize_diagonal: true,
        }
    }
}

/// A fitted precision matrix together with its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub omega: SymMatrix,
    pub sigma: SymMatrix,
    pub lambda: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Per-entry penalty weights. `f64::INFINITY` pins an entry to zero.
struct Penalty {
    weights: SymMatrix,
}

impl Penalty {
    fn uniform(d: usize, lambda: f64, penalize_diagonal: bool) -> Self {
        let mut weights = SymMatrix::zeros(d);
        for j in 0..d {
            for k in 0..j {
                weights.set(j, k, lambda);
            }
            weights.set(j, j, if penalize_diagonal { lambda } else { 0.0 });
        }
        Self { weights }
    }

    fn pattern(pattern: &Graph) -> Self {
        let d = pattern.n_vertices();
        let mut weights = SymMatrix::zeros(d);
        for j in 0..d {
            for k in 0..j {
                if !pattern.contains(j, k) {
                    weights.set(j, k, f64::INFINITY);
                }
            }
        }
        Self { weights }
    }

    #[inline]
    fn get(&self, j: usize, k: usize) -> f64 {
        self.weights.get(j, k)
    }

    fn is_zero(&self) -> bool {
        self.weights.as_slice().iter().all(|&w| w == 0.0)
    }
}

/// Maximum violation of the stationarity conditions of the penalised
/// objective at `omega`, using `w = omega⁻¹`. Entries with infinite penalty
/// are unconstrained.
fn kkt_violation(s: &SymMatrix, omega: &SymMatrix, w: &SymMatrix, pen: &Penalty) -> f64 {
    let d = s.dim();
    let mut worst = 0.0_f64;
    for j in 0..d {
        for k in 0..=j {
            let p = pen.get(j, k);
            if p.is_infinite() {
                continue;
            }
            let gap = w.get(j, k) - s.get(j, k);
            let o = omega.get(j, k);
            let v = if j == k || o != 0.0 {
                // Ωⱼⱼ > 0 always, so the diagonal uses sign +1.
                (gap - p * o.signum()).abs()
            } else {
                (gap.abs() - p).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// KKT residual of `omega` for the penalised objective at `lambda`.
///
/// Conditions with `W = Ω⁻¹`: `Wⱼₖ = Sⱼₖ + λ sign(Ωⱼₖ)` where `Ωⱼₖ ≠ 0`,
/// `|Wⱼₖ − Sⱼₖ| ≤ λ` where `Ωⱼₖ = 0`, and `Wⱼⱼ = Sⱼⱼ + λ` (or `Sⱼⱼ` when the
/// diagonal is unpenalised).
pub fn kkt_residual(
    s: &SymMatrix,
    omega: &SymMatrix,
    lambda: f64,
    penalize_diagonal: bool,
) -> Result<f64> {
    check_square(s, omega.dim())?;
    let w = Cholesky::new(omega)?.inverse();
    let pen = Penalty::uniform(s.dim(), lambda, penalize_diagonal);
    Ok(kkt_violation(s, omega, &w, &pen))
}

/// Value of `tr(Ω S) − log|Ω| + λ‖Ω‖₁`.
pub fn objective(
    s: &SymMatrix,
    omega: &SymMatrix,
    lambda: f64,
    penalize_diagonal: bool,
) -> Result<f64> {
    let pen = Penalty::uniform(s.dim(), lambda, penalize_diagonal);
    let chol = Cholesky::new(omega)?;
    Ok(penalized_objective(s, omega, chol.log_det(), &pen))
}

fn penalized_objective(s: &SymMatrix, omega: &SymMatrix, log_det: f64, pen: &Penalty) -> f64 {
    let d = s.dim();
    let mut trace = 0.0;
    let mut l1 = 0.0;
    for j in 0..d {
        for k in 0..d {
            let o = omega.get(j, k);
            trace += o * s.get(k, j);
            if o != 0.0 {
                l1 += pen.get(j, k) * o.abs();
            }
        }
    }
    trace - log_det + l1
}

fn check_square(s: &SymMatrix, d: usize) -> Result<()> {
    if s.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: s.dim(),
        });
    }
    Ok(())
}

fn check_diagonal(s: &SymMatrix) -> Result<()> {
    for j in 0..s.dim() {
        let v = s.get(j, j);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!(
                "diagonal entry {j} must be positive, got {v}"
            )));
        }
    }
    Ok(())
}

/// Unpenalised maximum-likelihood precision `S⁻¹`.
pub fn mle_precision(s: &SymMatrix) -> Result<PrecisionEstimate> {
    let chol = Cholesky::new(s)?;
    Ok(PrecisionEstimate {
        omega: chol.inverse(),
        sigma: s.clone(),
        lambda: 0.0,
        iterations: 0,
        kkt_residual: 0.0,
    })
}

/// Fits the graphical lasso at `cfg.lambda`.
pub fn glasso_fit(s: &SymMatrix, cfg: &GlassoConfig) -> Result<PrecisionEstimate> {
    glasso_fit_warm(s, cfg, None)
}

/// As [`glasso_fit`], starting from a previous solution.
pub fn glasso_fit_warm(
    s: &SymMatrix,
    cfg: &GlassoConfig,
    warm: Option<&PrecisionEstimate>,
) -> Result<PrecisionEstimate> {
    cfg.validate()?;
    check_diagonal(s)?;
    let pen = Penalty::uniform(s.dim(), cfg.lambda, cfg.penalize_diagonal);
    let mut est = solve(s, &pen, cfg.max_outer_iters, cfg.tol, warm)?;
    est.lambda = cfg.lambda;
    Ok(est)
}

/// Fits a descending sequence of penalties, warm-starting each from the last.
pub fn glasso_path(
    s: &SymMatrix,
    lambdas: &[f64],
    cfg: &GlassoConfig,
) -> Result<Vec<PrecisionEstimate>> {
    for pair in lambdas.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::Domain(
                "path lambdas must be strictly decreasing".into(),
            ));
        }
    }
    if let Some(&l) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Domain(format!(
            "path lambdas must be positive, got {l}"
        )));
    }
    let mut out: Vec<PrecisionEstimate> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let point = GlassoConfig { lambda, ..*cfg };
        let est = glasso_fit_warm(s, &point, out.last()).map_err(|e| Error::AtLambda {
            lambda,
            source: Box::new(e),
        })?;
        out.push(est);
    }
    Ok(out)
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn lambda_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::Domain(format!("bad lambda grid {lo}:{hi}:{count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect())
}

/// Gaussian maximum likelihood with Ωⱼₖ forced to zero off the given pattern.
/// Uses `cfg.tol` and `cfg.max_outer_iters`; the penalty fields are ignored.
pub fn refit_mle(s: &SymMatrix, pattern: &Graph, cfg: &GlassoConfig) -> Result<PrecisionEstimate> {
    check_square(s, pattern.n_vertices())?;
    check_diagonal(s)?;
    let pen = Penalty::pattern(pattern);
    solve(s, &pen, cfg.max_outer_iters, cfg.tol, None)
}

/// Edges where `|Ωⱼₖ|` exceeds `zero_tol` (default `1e-8 · max diagonal`).
pub fn graph_from_precision(
    est: &PrecisionEstimate,
    labels: Vec<String>,
    zero_tol: Option<f64>,
) -> Result<Graph> {
    support_graph(&est.omega, labels, zero_tol)
}

/// Edges where `|Ω_jk|` exceeds `zero_tol` (default `1e-8 · max Ω_jj`),
/// weighted by `Ω_jk`.
pub fn support_graph(
    omega: &SymMatrix,
    labels: Vec<String>,
    zero_tol: Option<f64>,
) -> Result<Graph> {
    check_square(omega, labels.len())?;
    let tol =
        zero_tol.unwrap_or_else(|| 1e-8 * omega.diagonal().into_iter().fold(0.0_f64, f64::max));
    let mut g = Graph::new(labels);
    for j in 0..omega.dim() {
        for k in j + 1..omega.dim() {
            let v = omega.get(j, k);
            if v.abs() > tol {
                g.add_edge(j, k, Some(v))?;
            }
        }
    }
    Ok(g)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn solve(
    s: &SymMatrix,
    pen: &Penalty,
    max_outer: usize,
    tol: f64,
    warm: Option<&PrecisionEstimate>,
) -> Result<PrecisionEstimate> {
    let d = s.dim();
    if pen.is_zero() {
        // Unpenalised and unconstrained: the optimum is S⁻¹ or does not exist.
        Cholesky::new(s)?;
    }

    let (mut omega, mut w) = match warm {
        Some(prev) if prev.omega.dim() == d => (prev.omega.clone(), prev.sigma.clone()),
        _ => {
            let diag: Vec<f64> = (0..d).map(|j| s.get(j, j) + pen.get(j, j)).collect();
            let inv: Vec<f64> = diag.iter().map(|v| 1.0 / v).collect();
            (
                SymMatrix::from_diagonal(&inv),
                SymMatrix::from_diagonal(&diag),
            )
        }
    };
    if warm.is_some() {
        // Zero any entry the new penalty pins, then refresh W exactly.
        for j in 0..d {
            for k in 0..j {
                if pen.get(j, k).is_infinite() {
                    omega.set(j, k, 0.0);
                }
            }
        }
        w = Cholesky::new(&omega)?.inverse();
    }

    let inner_tol = tol * 1e-3;
    let mut residual = kkt_violation(s, &omega, &w, pen);
    let mut prev_obj = if cfg!(debug_assertions) {
        Some(penalized_objective(
            s,
            &omega,
            Cholesky::new(&omega)?.log_det(),
            pen,
        ))
    } else {
        None
    };
    if residual <= tol {
        return Ok(PrecisionEstimate {
            omega,
            sigma: w,
            lambda: 0.0,
            iterations: 0,
            kkt_residual: residual,
        });
    }

    let mut ws = Workspace::new(d);
    for iter in 1..=max_outer {
        for j in 0..d {
            update_column(s, pen, &mut omega, &mut w, j, inner_tol, &mut ws)?;
        }
        let chol = Cholesky::new(&omega)?;
        w = chol.inverse();
        residual = kkt_violation(s, &omega, &w, pen);
        if let Some(prev) = prev_obj {
            let obj = penalized_objective(s, &omega, chol.log_det(), pen);
            debug_assert!(
                obj <= prev + 1e-9 * (1.0 + prev.abs()),
                "objective increased: {prev} -> {obj}"
            );
            prev_obj = Some(obj);
        }
        if residual <= tol {
            return Ok(PrecisionEstimate {
                omega,
                sigma: w,
                lambda: 0.0,
                iterations: iter,
                kkt_residual: residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_outer,
        residual,
    })
}

struct Workspace {
    rest: Vec<usize>,
    /// Ω₁₁⁻¹ (row-major over `rest`).
    inv11: Vec<f64>,
    gamma: Vec<f64>,
    /// A γ, kept in sync with γ.
    a_gamma: Vec<f64>,
    u: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        let m = d.saturating_sub(1);
        Self {
            rest: Vec::with_capacity(m),
            inv11: vec![0.0; m * m],
            gamma: vec![0.0; m],
            a_gamma: vec![0.0; m],
            u: vec![0.0; m],
        }
    }
}

fn update_column(
    s: &SymMatrix,
    pen: &Penalty,
    omega: &mut SymMatrix,
    w: &mut SymMatrix,
    j: usize,
    inner_tol: f64,
    ws: &mut Workspace,
) -> Result<()> {
    let d = s.dim();
    ws.rest.clear();
    ws.rest.extend((0..d).filter(|&k| k != j));
    let m = d - 1;
    let w22 = w.get(j, j);

    // Ω₁₁⁻¹ = W₁₁ − w₁₂ w₁₂ᵀ / w₂₂.
    for (a, &ka) in ws.rest.iter().enumerate() {
        let wa = w.get(ka, j);
        for (b, &kb) in ws.rest.iter().enumerate().take(a + 1) {
            let v = w.get(ka, kb) - wa * w.get(kb, j) / w22;
            ws.inv11[a * m + b] = v;
            ws.inv11[b * m + a] = v;
        }
    }

    let scale = s.get(j, j) + pen.get(j, j);
    for (a, &ka) in ws.rest.iter().enumerate() {
        ws.gamma[a] = if pen.get(j, ka).is_infinite() {
            0.0
        } else {
            omega.get(ka, j)
        };
    }
    for a in 0..m {
        let row = &ws.inv11[a * m..(a + 1) * m];
        ws.a_gamma[a] = scale * row.iter().zip(&ws.gamma).map(|(x, g)| x * g).sum::<f64>();
    }

    // Cyclic coordinate descent on the column lasso.
    const MAX_INNER: usize = 10_000;
    for _ in 0..MAX_INNER {
        let mut max_change = 0.0_f64;
        for a in 0..m {
            let ka = ws.rest[a];
            let p = pen.get(j, ka);
            if p.is_infinite() {
                continue;
            }
            let a_aa = scale * ws.inv11[a * m + a];
            let old = ws.gamma[a];
            let r = s.get(ka, j) + ws.a_gamma[a] - a_aa * old;
            let new = -soft_threshold(r, p) / a_aa;
            let delta = new - old;
            if delta != 0.0 {
                ws.gamma[a] = new;
                let row = &ws.inv11[a * m..(a + 1) * m];
                for (ag, x) in ws.a_gamma.iter_mut().zip(row) {
                    *ag += scale * x * delta;
                }
                max_change = max_change.max(delta.abs() * a_aa);
            }
        }
        if max_change <= inner_tol {
            break;
        }
    }

    // u = Ω₁₁⁻¹ γ = Aγ / scale; c = 1 / scale is the Schur complement.
    for a in 0..m {
        ws.u[a] = ws.a_gamma[a] / scale;
    }
    let c = 1.0 / scale;
    let quad: f64 = ws.gamma.iter().zip(&ws.u).map(|(g, u)| g * u).sum();
    if !quad.is_finite() {
        return Err(Error::NotPositiveDefinite {
            index: j,
            pivot: f64::NAN,
        });
    }

    for (a, &ka) in ws.rest.iter().enumerate() {
        omega.set(ka, j, ws.gamma[a]);
    }
    omega.set(j, j, c + quad);

    w.set(j, j, scale);
    for (a, &ka) in ws.rest.iter().enumerate() {
        w.set(ka, j, -ws.u[a] * scale);
        for (b, &kb) in ws.rest.iter().enumerate().take(a + 1) {
            w.set(ka, kb, ws.inv11[a * m + b] + ws.u[a] * ws.u[b] * scale);
        }
    }
    Ok(())
}
