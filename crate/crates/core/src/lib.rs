//! Low-rank self-representation by LogDet minimization, and subspace
//! clustering on top of it.
//!
//! The pipeline solves
//!
//! ```text
//! minimize_Z  log det(I + ZᵀZ) + ρ‖X − XZ‖²_F
//! ```
//!
//! with augmented Lagrange multipliers ([`alm_solver`]), builds a powered
//! cosine affinity from the principal directions of the solution
//! ([`affinity`]), and partitions it with normalized spectral clustering
//! ([`spectral_cluster`]).

pub mod affinity;
pub mod alm_solver;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod linalg;
pub mod logdet_prox;
pub mod pipeline;
pub mod spectral_cluster;

pub use affinity::{build_affinity, skinny_svd, AffinityMatrix, AffinitySide};
pub use alm_solver::{solve, SolverConfig, SolverResult, Termination};
pub use datagen::{generate, LabeledDataset, NoiseModel, SyntheticSpec};
pub use error::{Error, Result};
pub use evaluation::{clustering_error, corruption_sweep, rho_sweep, ErrorReport};
pub use linalg::{DenseMatrix, SpectralDecomposition};
pub use logdet_prox::{
    logdet_gradient, logdet_prox_matrix, logdet_value, scalar_prox, ScalarProxProblem,
};
pub use pipeline::{run_pipeline, segment, ClusterOptions, DataSource, PipelineConfig, RunRecord};
pub use spectral_cluster::{spectral_cluster, ClusteringResult};
