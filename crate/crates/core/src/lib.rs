//! Nonparanormal and forest density estimation for high-dimensional data.
//!
//! The nonparanormal pipeline replaces each marginal by Winsorized Normal
//! scores and fits a graphical lasso to their covariance. The forest pipeline
//! estimates pairwise mutual information with kernel density tables, builds
//! Chow–Liu forests with Kruskal's algorithm and prunes them on held-out data.

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod glasso;
pub mod graph;
pub mod ingest;
pub mod kde;
pub mod marginals;
pub mod mutual_info;
pub mod numerics;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use forest::{fit_forest, ForestConfig, ForestDensityModel, ForestFit};
pub use glasso::{GlassoConfig, PrecisionEstimate};
pub use graph::{Edge, Graph};
pub use kde::{BandwidthRule, GridSpec};
pub use marginals::{IdentificationMode, MarginalTransform};
pub use numerics::SymMatrix;
