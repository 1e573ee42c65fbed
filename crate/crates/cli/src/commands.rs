//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use npforest_core::datagen::{
    precision_support, random_sparse_precision, sample_npn, sample_tree_gaussian, NpnSpec,
    Transform, TransformFamily,
};
use npforest_core::forest::fit_forest;
use npforest_core::glasso::{
    glasso_fit, glasso_path, graph_from_precision, lambda_grid, refit_mle, PrecisionEstimate,
};
use npforest_core::graph::graph_diff;
use npforest_core::ingest::{log_returns, read_csv, standardize, winsorize_mad, write_csv_to};
use npforest_core::kde::{BandwidthRule, DEFAULT_FLOOR};
use npforest_core::numerics::Cholesky;
use npforest_core::{
    Dataset, Error, ForestConfig, GlassoConfig, Graph, IdentificationMode, MarginalTransform,
    Result, SymMatrix,
};
use serde::Serialize;
use serde_json::json;

use crate::formats::{fmt_f64, read_graph, write_graph, GraphFormat, SCHEMA_VERSION};
use crate::output::{to_value, with_suffix, Manifest};

#[derive(Debug, Parser)]
#[command(
    name = "npforest",
    version,
    about = "Nonparanormal and forest graph estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normal-score transform followed by the graphical lasso.
    Npn(NpnArgs),
    /// Kernel-density Chow–Liu forest with held-out pruning.
    Forest(ForestArgs),
    /// Symmetric difference and common edges of two graphs.
    Diff(DiffArgs),
    /// Graphical lasso on a covariance matrix.
    Glasso(GlassoArgs),
    /// Synthetic data.
    Gen(GenArgs),
    /// Price or measurement preprocessing.
    Ingest(IngestArgs),
}

/// Runs a parsed command and returns the manifest path.
pub fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Npn(a) => run_npn(&a),
        Command::Forest(a) => run_forest(&a),
        Command::Diff(a) => run_diff(&a),
        Command::Glasso(a) => run_glasso(&a),
        Command::Gen(a) => run_gen(&a),
        Command::Ingest(a) => run_ingest(&a),
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Scores,
    Moments,
}

impl From<ModeArg> for IdentificationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Scores => IdentificationMode::NormalScores,
            ModeArg::Moments => IdentificationMode::MatchMoments,
        }
    }
}

/// `lo:hi:count`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl std::str::FromStr for LambdaGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:count, got {s:?}"));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        Ok(Self {
            lo: num(parts[0])?,
            hi: num(parts[1])?,
            count: parts[2]
                .parse()
                .map_err(|e| format!("{:?}: {e}", parts[2]))?,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct NpnArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(
        long,
        conflicts_with = "lambda_grid",
        required_unless_present = "lambda_grid"
    )]
    pub lambda: Option<f64>,
    #[arg(long, value_name = "LO:HI:COUNT")]
    pub lambda_grid: Option<LambdaGrid>,
    /// Truncation level; defaults to 1/(4 n^{1/4} sqrt(π log n)).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value = "scores")]
    pub mode: ModeArg,
    #[arg(long)]
    pub output_prefix: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: GraphFormat,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long)]
    pub unpenalized_diagonal: bool,
}

fn glasso_config(
    lambda: f64,
    tol: f64,
    max_iters: usize,
    unpenalized_diagonal: bool,
) -> GlassoConfig {
    GlassoConfig {
        lambda,
        tol,
        max_outer_iters: max_iters,
        penalize_diagonal: !unpenalized_diagonal,
    }
}

#[derive(Serialize)]
struct PathPoint {
    lambda: f64,
    edges: usize,
    kkt_residual: f64,
    iterations: usize,
    file: PathBuf,
}

fn run_npn(a: &NpnArgs) -> Result<PathBuf> {
    let mut manifest = Manifest::new("npn", a)?;
    manifest.input(&a.input)?;
    let data = read_csv(&a.input)?;
    let transform = MarginalTransform::fit(&data, a.delta, a.mode.into())?;
    let s = transform.transformed_covariance(&data)?;
    let cfg = glasso_config(0.0, a.tol, a.max_iters, a.unpenalized_diagonal);

    let (lambdas, estimates, names): (Vec<f64>, Vec<PrecisionEstimate>, Vec<String>) =
        match (a.lambda, a.lambda_grid) {
            (Some(l), _) => {
                let est = glasso_fit(&s, &GlassoConfig { lambda: l, ..cfg })?;
                (
                    vec![l],
                    vec![est],
                    vec![format!("graph.{}", a.format.extension())],
                )
            }
            (None, Some(g)) => {
                let grid = lambda_grid(g.lo, g.hi, g.count)?;
                let descending: Vec<f64> = grid.iter().rev().copied().collect();
                let mut path = glasso_path(&s, &descending, &cfg)?;
                path.reverse();
                let names = (0..grid.len())
                    .map(|k| format!("lambda-{k:03}.{}", a.format.extension()))
                    .collect();
                (grid, path, names)
            }
            (None, None) => {
                return Err(Error::InvalidSpec("give --lambda or --lambda-grid".into()))
            }
        };

    let mut points = Vec::with_capacity(lambdas.len());
    for ((lambda, est), name) in lambdas.iter().zip(&estimates).zip(names) {
        let g = graph_from_precision(est, data.names().to_vec(), None)?;
        let file = with_suffix(&a.output_prefix, &name);
        manifest.emit(file.clone(), write_graph(&g, a.format)?.as_bytes())?;
        points.push(PathPoint {
            lambda: *lambda,
            edges: g.n_edges(),
            kkt_residual: est.kkt_residual,
            iterations: est.iterations,
            file,
        });
    }
    manifest.results = json!({
        "n": data.n_rows(),
        "d": data.n_cols(),
        "delta": transform.delta(),
        "path": to_value(&points)?,
    });
    manifest.finish(&a.output_prefix)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BandwidthArg {
    Auto,
    Fixed { h1: f64, h2: f64 },
}

impl std::str::FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(BandwidthArg::Auto);
        }
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("expected auto or h1,h2, got {s:?}"))?;
        let h1: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let h2: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        Ok(BandwidthArg::Fixed { h1, h2 })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ForestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// `auto` (normal reference, β = 2) or fixed unit-cube bandwidths `h1,h2`.
    #[arg(long, default_value = "auto")]
    pub bandwidth: BandwidthArg,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub output_prefix: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: GraphFormat,
}

#[derive(Serialize)]
struct ModelFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    model: &'a npforest_core::ForestDensityModel,
}

fn run_forest(a: &ForestArgs) -> Result<PathBuf> {
    let mut manifest = Manifest::new("forest", a)?;
    manifest.input(&a.input)?;
    let data = read_csv(&a.input)?;
    let cfg = ForestConfig {
        split_fraction: a.split,
        seed: a.seed,
        grid_size: a.grid_size,
        bandwidth: match a.bandwidth {
            BandwidthArg::Auto => BandwidthRule::default(),
            BandwidthArg::Fixed { h1, h2 } => BandwidthRule::Fixed { h1, h2 },
        },
        floor: a.floor,
    };
    let fit = fit_forest(&data, &cfg)?;

    let graph_file = with_suffix(
        &a.output_prefix,
        &format!("forest.{}", a.format.extension()),
    );
    manifest.emit(
        graph_file,
        write_graph(&fit.model.forest, a.format)?.as_bytes(),
    )?;

    let mut curve = String::from("k\tloglik\n");
    for (k, v) in fit.selection.curve.iter().enumerate() {
        curve.push_str(&format!("{k}\t{}\n", fmt_f64(*v)));
    }
    manifest.emit(with_suffix(&a.output_prefix, "curve.tsv"), curve.as_bytes())?;

    let model = ModelFile {
        schema_version: SCHEMA_VERSION,
        model: &fit.model,
    };
    let mut model_json =
        serde_json::to_string(&model).map_err(|e| Error::Internal(e.to_string()))?;
    model_json.push('\n');
    manifest.emit(
        with_suffix(&a.output_prefix, "model.json"),
        model_json.as_bytes(),
    )?;

    manifest.results = json!({
        "n": data.n_rows(),
        "d": data.n_cols(),
        "n_split1": fit.split1.len(),
        "n_split2": fit.split2.len(),
        "k_hat": fit.selection.k_hat,
        "padded": fit.stages.padded,
        "bandwidths": to_value(&fit.model.bandwidths)?,
        "kruskal_order": to_value(&fit.stages.order)?,
    });
    manifest.finish(&a.output_prefix)
}

#[derive(Debug, Args, Serialize)]
pub struct DiffArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: GraphFormat,
}

fn run_diff(a: &DiffArgs) -> Result<PathBuf> {
    let mut manifest = Manifest::new("diff", a)?;
    manifest.input(&a.a)?;
    manifest.input(&a.b)?;
    let ga = read_graph(&a.a)?;
    let gb = read_graph(&a.b)?;
    let (sym, common) = graph_diff(&ga, &gb)?;
    let ext = a.format.extension();
    manifest.emit(
        with_suffix(&a.out_prefix, &format!("symdiff.{ext}")),
        write_graph(&sym, a.format)?.as_bytes(),
    )?;
    manifest.emit(
        with_suffix(&a.out_prefix, &format!("common.{ext}")),
        write_graph(&common, a.format)?.as_bytes(),
    )?;
    manifest.results = json!({
        "symmetric_difference": sym.n_edges(),
        "common": common.n_edges(),
    });
    manifest.finish(&a.out_prefix)
}

#[derive(Debug, Args, Serialize)]
pub struct GlassoArgs {
    /// Covariance matrix as CSV: a header of labels, then d rows.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    /// Re-estimate without penalty on the selected edge set.
    #[arg(long)]
    pub refit: bool,
    #[arg(long)]
    pub output_prefix: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: GraphFormat,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long)]
    pub unpenalized_diagonal: bool,
}

pub fn read_matrix(path: &Path) -> Result<(Vec<String>, SymMatrix)> {
    let table = read_csv(path)?;
    if table.n_rows() != table.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: table.n_cols(),
            found: table.n_rows(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..table.n_rows()).map(|i| table.row(i).to_vec()).collect();
    Ok((table.names().to_vec(), SymMatrix::from_rows(&rows)?))
}

fn matrix_csv(names: &[String], m: &SymMatrix) -> Result<Vec<u8>> {
    let d = m.dim();
    let values = (0..d).flat_map(|i| m.row(i).to_vec()).collect();
    let table = Dataset::new(names.to_vec(), d, values)?;
    let mut buf = Vec::new();
    write_csv_to(&table, &mut buf)?;
    Ok(buf)
}

fn run_glasso(a: &GlassoArgs) -> Result<PathBuf> {
    let mut manifest = Manifest::new("glasso", a)?;
    manifest.input(&a.input)?;
    let (names, s) = read_matrix(&a.input)?;
    let cfg = glasso_config(a.lambda, a.tol, a.max_iters, a.unpenalized_diagonal);
    let est = glasso_fit(&s, &cfg)?;
    let graph = graph_from_precision(&est, names.clone(), None)?;
    let final_est = if a.refit {
        refit_mle(&s, &graph, &cfg)?
    } else {
        est.clone()
    };
    let ext = a.format.extension();
    manifest.emit(
        with_suffix(&a.output_prefix, &format!("graph.{ext}")),
        write_graph(&graph, a.format)?.as_bytes(),
    )?;
    manifest.emit(
        with_suffix(&a.output_prefix, "precision.csv"),
        &matrix_csv(&names, &final_est.omega)?,
    )?;
    manifest.emit(
        with_suffix(&a.output_prefix, "covariance.csv"),
        &matrix_csv(&names, &final_est.sigma)?,
    )?;
    manifest.results = json!({
        "edges": graph.n_edges(),
        "kkt_residual": est.kkt_residual,
        "iterations": est.iterations,
        "refit": a.refit,
    });
    manifest.finish(&a.output_prefix)
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    /// Nonparanormal with the given Σ (or identity).
    Npn,
    /// Gaussian Markov tree on a random spanning tree.
    Tree,
    /// Nonparanormal whose precision has a random sparse support.
    Sparse,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Power,
    Logistic,
    Sinusoid,
    Identity,
}

impl From<FamilyArg> for TransformFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Power => TransformFamily::Power,
            FamilyArg::Logistic => TransformFamily::Logistic,
            FamilyArg::Sinusoid => TransformFamily::Sinusoid,
            FamilyArg::Identity => TransformFamily::Identity,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "npn")]
    pub kind: GenKind,
    #[arg(long, value_enum, default_value = "identity")]
    pub family: FamilyArg,
    /// One value for every coordinate, or one per coordinate.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub alpha: Vec<f64>,
    /// Covariance CSV for `--kind npn`; identity of size `--d` when absent.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Link correlation for `--kind tree`.
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    /// Number of nonzero precision pairs for `--kind sparse`.
    #[arg(long)]
    pub edges: Option<usize>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output_prefix: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: GraphFormat,
}

fn transforms(a: &GenArgs, d: usize) -> Result<Vec<Transform>> {
    let alphas = match a.alpha.len() {
        1 => vec![a.alpha[0]; d],
        k if k == d => a.alpha.clone(),
        k => {
            return Err(Error::InvalidSpec(format!(
                "--alpha has {k} values for {d} coordinates"
            )))
        }
    };
    alphas
        .into_iter()
        .map(|al| Transform::new(a.family.into(), al))
        .collect()
}

fn need_d(a: &GenArgs) -> Result<usize> {
    a.d.ok_or_else(|| Error::InvalidSpec(format!("--kind {:?} needs --d", a.kind).to_lowercase()))
}

/// Rescales a covariance to unit diagonal.
fn to_correlation(s: &SymMatrix) -> SymMatrix {
    let d = s.dim();
    let mut r = SymMatrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            r.set(i, j, s.get(i, j) / (s.get(i, i) * s.get(j, j)).sqrt());
        }
    }
    r
}

fn run_gen(a: &GenArgs) -> Result<PathBuf> {
    let mut manifest = Manifest::new("gen", a)?;
    let (data, truth): (Dataset, Option<Graph>) = match a.kind {
        GenKind::Npn => {
            let sigma = match &a.sigma {
                Some(p) => {
                    manifest.input(p)?;
                    read_matrix(p)?.1
                }
                None => SymMatrix::identity(need_d(a)?),
            };
            let d = sigma.dim();
            let spec = NpnSpec::new(vec![0.0; d], sigma, transforms(a, d)?)?;
            (sample_npn(&spec, a.n, a.seed)?, None)
        }
        GenKind::Tree => {
            let (data, tree) = sample_tree_gaussian(need_d(a)?, a.rho, a.seed, a.n)?;
            (data, Some(tree))
        }
        GenKind::Sparse => {
            let d = need_d(a)?;
            let edges = a
                .edges
                .ok_or_else(|| Error::InvalidSpec("--kind sparse needs --edges".into()))?;
            let omega = random_sparse_precision(d, edges, a.seed)?;
            let sigma = to_correlation(&Cholesky::new(&omega)?.inverse());
            let spec = NpnSpec::new(vec![0.0; d], sigma, transforms(a, d)?)?;
            let data = sample_npn(&spec, a.n, a.seed.wrapping_add(1))?;
            (data, Some(precision_support(&omega)?.without_weights()))
        }
    };
    let mut csv = Vec::new();
    write_csv_to(&data, &mut csv)?;
    manifest.emit(with_suffix(&a.output_prefix, "data.csv"), &csv)?;
    if let Some(g) = &truth {
        let ext = a.format.extension();
        manifest.emit(
            with_suffix(&a.output_prefix, &format!("truth.{ext}")),
            write_graph(g, a.format)?.as_bytes(),
        )?;
    }
    manifest.results = json!({ "n": data.n_rows(), "d": data.n_cols() });
    manifest.finish(&a.output_prefix)
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Replace prices by row-wise log returns.
    #[arg(long)]
    pub log_returns: bool,
    /// Clip each column to mean ± C·(mean absolute deviation).
    #[arg(long, value_name = "C", num_args = 0..=1, default_missing_value = "3")]
    pub winsorize_mad: Option<f64>,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub output_prefix: PathBuf,
}

fn run_ingest(a: &IngestArgs) -> Result<PathBuf> {
    let mut manifest = Manifest::new("ingest", a)?;
    manifest.input(&a.input)?;
    let raw = read_csv(&a.input)?;
    let mut data = raw.clone();
    if a.log_returns {
        data = log_returns(&data)?;
    }
    let mut constant = Vec::new();
    if let Some(c) = a.winsorize_mad {
        let w = winsorize_mad(&data, c)?;
        constant = w.constant_columns;
        data = w.data;
    }
    if a.standardize {
        data = standardize(&data)?;
    }
    let mut csv = Vec::new();
    write_csv_to(&data, &mut csv)?;
    manifest.emit(with_suffix(&a.output_prefix, "data.csv"), &csv)?;
    let flagged: Vec<&str> = constant.iter().map(|&j| data.names()[j].as_str()).collect();
    manifest.results = json!({
        "rows_in": raw.n_rows(),
        "rows_out": data.n_rows(),
        "d": data.n_cols(),
        "constant_columns": flagged,
    });
    manifest.finish(&a.output_prefix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_value_formats() {
        let g: LambdaGrid = "0.16:1.2:50".parse().unwrap();
        assert_eq!(
            g,
            LambdaGrid {
                lo: 0.16,
                hi: 1.2,
                count: 50
            }
        );
        assert!("0.1:2".parse::<LambdaGrid>().is_err());
        assert_eq!("auto".parse::<BandwidthArg>().unwrap(), BandwidthArg::Auto);
        assert_eq!(
            "0.05, 0.08".parse::<BandwidthArg>().unwrap(),
            BandwidthArg::Fixed { h1: 0.05, h2: 0.08 }
        );
        assert!("0.05".parse::<BandwidthArg>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
