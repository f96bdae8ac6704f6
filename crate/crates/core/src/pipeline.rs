//! The end-to-end segmentation pipeline: representation, skinny SVD,
//! angle affinity, spectral clustering, and optional evaluation.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::affinity::{
    build_affinity, skinny_svd, AffinityMatrix, AffinitySide, DEFAULT_ALPHA, DEFAULT_RANK_TOL,
};
use crate::alm_solver::{solve, SolverConfig, SolverResult, Termination};
use crate::datagen::{generate, SyntheticSpec};
use crate::error::{Error, Result};
use crate::evaluation::{clustering_error, ErrorReport};
use crate::io::{ingest_labels, ingest_matrix, write_json};
use crate::linalg::DenseMatrix;
use crate::spectral_cluster::{spectral_cluster, ClusteringResult};

/// Everything after the solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    pub alpha: u32,
    pub affinity_side: AffinitySide,
    pub rank_tol: f64,
    /// Seed for the k-means stage.
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            affinity_side: AffinitySide::Left,
            rank_tol: DEFAULT_RANK_TOL,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub solver: SolverResult,
    pub retained_rank: usize,
    pub affinity: AffinityMatrix,
    pub clustering: ClusteringResult,
}

/// Representation → skinny SVD → affinity → spectral clustering.
pub fn segment(
    x: &DenseMatrix,
    k: usize,
    solver: &SolverConfig,
    options: &ClusterOptions,
) -> Result<Segmentation> {
    if k < 2 || k > x.ncols() {
        return Err(Error::invalid(format!(
            "need 2 <= k <= n (k={k}, n={})",
            x.ncols()
        )));
    }
    let result = solve(x, solver)?;
    let decomp = skinny_svd(&result.z, options.rank_tol)?;
    let affinity = build_affinity(&decomp, options.alpha, options.affinity_side)?;
    let clustering = spectral_cluster(&affinity, k, options.seed)?;
    Ok(Segmentation {
        retained_rank: decomp.rank(),
        solver: result,
        affinity,
        clustering,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    Files {
        matrix: PathBuf,
        labels: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: DataSource,
    pub k: usize,
    pub solver: SolverConfig,
    pub alpha: u32,
    pub affinity_side: AffinitySide,
    pub rank_tol: f64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(source: DataSource, k: usize) -> Self {
        let opts = ClusterOptions::default();
        Self {
            source,
            k,
            solver: SolverConfig::default(),
            alpha: opts.alpha,
            affinity_side: opts.affinity_side,
            rank_tol: opts.rank_tol,
            seed: opts.seed,
            output_path: None,
        }
    }

    pub fn cluster_options(&self) -> ClusterOptions {
        ClusterOptions {
            alpha: self.alpha,
            affinity_side: self.affinity_side,
            rank_tol: self.rank_tol,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.alpha < 1 {
            return Err(Error::invalid("alpha must be at least 1"));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::invalid(format!(
                "rank_tol must lie in (0, 1), got {}",
                self.rank_tol
            )));
        }
        self.solver.validate()?;
        if let DataSource::Synthetic(spec) = &self.source {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub termination: Termination,
    pub final_residual: f64,
    pub relative_residual: f64,
    pub dual_spectral_norm: f64,
    pub residual_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub relative_change_trace: Vec<f64>,
    pub multiplier_step_trace: Vec<f64>,
}

impl SolverDiagnostics {
    pub fn from_result(r: &SolverResult) -> Result<Self> {
        Ok(Self {
            iterations: r.iterations,
            termination: r.termination,
            final_residual: r.final_residual(),
            relative_residual: r.relative_residual(),
            dual_spectral_norm: r.dual_spectral_norm()?,
            residual_trace: r.residual_trace.clone(),
            objective_trace: r.objective_trace.clone(),
            relative_change_trace: r.relative_change_trace.clone(),
            multiplier_step_trace: r.multiplier_step_trace.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub labels: Vec<usize>,
    pub error_rate: Option<f64>,
    pub evaluation: Option<ErrorReport>,
    pub retained_rank: usize,
    pub kmeans_inertia: f64,
    pub solver: SolverDiagnostics,
    pub config: PipelineConfig,
    pub duration_secs: f64,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Loads the data (and ground truth, if any) named by a [`DataSource`].
pub fn load_source(source: &DataSource) -> Result<(DenseMatrix, Option<Vec<usize>>)> {
    match source {
        DataSource::Synthetic(spec) => {
            let ds = generate(spec)?;
            Ok((ds.x, Some(ds.labels)))
        }
        DataSource::Files { matrix, labels } => {
            let x = ingest_matrix(matrix)?;
            let truth = match labels {
                Some(p) => {
                    let l = ingest_labels(p)?;
                    if l.len() != x.ncols() {
                        return Err(Error::DimensionMismatch(format!(
                            "{} labels for a matrix with {} columns",
                            l.len(),
                            x.ncols()
                        )));
                    }
                    Some(l)
                }
                None => None,
            };
            Ok((x, truth))
        }
    }
}

/// Runs the whole pipeline and, if `output_path` is set, writes the record there as JSON.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunRecord> {
    let start = Instant::now();
    config.validate()?;
    let (x, truth) = load_source(&config.source)?;
    if x.ncols() < config.k {
        return Err(Error::DimensionMismatch(format!(
            "{} data points but k = {}",
            x.ncols(),
            config.k
        )));
    }
    let seg = segment(&x, config.k, &config.solver, &config.cluster_options())?;
    let evaluation = match &truth {
        Some(t) => Some(clustering_error(&seg.clustering.labels, t)?),
        None => None,
    };
    let record = RunRecord {
        error_rate: evaluation.as_ref().map(|e| e.error_rate),
        evaluation,
        retained_rank: seg.retained_rank,
        kmeans_inertia: seg.clustering.kmeans_inertia,
        solver: SolverDiagnostics::from_result(&seg.solver)?,
        labels: seg.clustering.labels,
        config: config.clone(),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = &config.output_path {
        write_json(&record, path)?;
    }
    Ok(record)
}
