//! Augmented Lagrange multiplier solver for
//!
//! ```text
//! minimize  log det(I + ZᵀZ) + ρ‖X − XW‖²_F   subject to  Z = W
//! ```
//!
//! Each iteration runs the W-step (SPD linear solve), the Z-step (LogDet
//! proximal operator), the dual ascent on Y and the geometric penalty growth
//! `β_k = β₀ γᵏ`.

use nalgebra::{Cholesky, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, singular_values, spectral_norm, DenseMatrix};
use crate::logdet_prox::{logdet_prox_matrix, logdet_value};

/// How the W-step linear system `(βI + 2ρXᵀX) W = rhs` is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WSolveMethod {
    /// Fresh Cholesky factorization every iteration.
    #[default]
    Cholesky,
    /// One eigendecomposition of `XᵀX`, shifted by β each iteration.
    CachedEigen,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Weight of the self-expression fidelity term.
    pub rho: f64,
    /// Initial penalty β₀.
    pub beta0: f64,
    /// Penalty growth factor γ.
    pub gamma: f64,
    /// Stopping tolerance on the relative change of Z.
    pub tol: f64,
    pub max_iters: usize,
    pub w_solve: WSolveMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 55.0,
            beta0: 0.3,
            gamma: 1.1,
            tol: 1e-5,
            max_iters: 100,
            w_solve: WSolveMethod::Cholesky,
        }
    }
}

impl SolverConfig {
    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("rho", self.rho)?;
        positive("beta0", self.beta0)?;
        positive("tol", self.tol)?;
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(Error::invalid(format!(
                "gamma must exceed 1, got {}",
                self.gamma
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }

    /// Penalty at iteration `k`, `β₀ γᵏ`.
    pub fn beta_at(&self, k: usize) -> f64 {
        self.beta0 * self.gamma.powi(k as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Iterate of the solver: representation, split variable, dual and penalty.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub z: DenseMatrix,
    pub w: DenseMatrix,
    pub y: DenseMatrix,
    pub beta: f64,
    pub iter: usize,
}

impl SolverState {
    /// `Z = I`, `Y = 0`, `W = Z`.
    pub fn initial(n: usize, config: &SolverConfig) -> Self {
        Self::from_z(DenseMatrix::identity(n, n), config)
    }

    pub fn from_z(z: DenseMatrix, config: &SolverConfig) -> Self {
        let n = z.nrows();
        Self {
            w: z.clone(),
            z,
            y: DenseMatrix::zeros(n, n),
            beta: config.beta0,
            iter: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub z: DenseMatrix,
    pub w: DenseMatrix,
    pub y: DenseMatrix,
    pub iterations: usize,
    pub termination: Termination,
    /// `‖Z − W‖_F` after each iteration.
    pub residual_trace: Vec<f64>,
    /// `log det(I + WᵀW) + ρ‖X − XW‖²_F` after each iteration.
    pub objective_trace: Vec<f64>,
    /// `‖Z_{k+1} − Z_k‖_F / max(1, ‖Z_k‖_F)`.
    pub relative_change_trace: Vec<f64>,
    /// Penalty used by each iteration.
    pub beta_trace: Vec<f64>,
    /// `β_k ‖Z_{k+1} − Z_k‖_F`, which must vanish for the limit to be stationary.
    pub multiplier_step_trace: Vec<f64>,
}

impl SolverResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_trace.last().copied().unwrap_or(0.0)
    }

    pub fn relative_residual(&self) -> f64 {
        let zn = self.z.norm();
        if zn > 0.0 {
            self.final_residual() / zn
        } else {
            self.final_residual()
        }
    }

    pub fn dual_spectral_norm(&self) -> Result<f64> {
        spectral_norm(&self.y)
    }
}

/// Eigendecomposition of the Gram matrix `XᵀX`, reusable for every β.
#[derive(Clone, Debug)]
pub struct GramEigen {
    vectors: DenseMatrix,
    values: DVector<f64>,
}

impl GramEigen {
    pub fn new(x: &DenseMatrix) -> Self {
        Self::from_gram(x.transpose() * x)
    }

    fn from_gram(gram: DenseMatrix) -> Self {
        let eig = SymmetricEigen::new(gram);
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.map(|l| l.max(0.0)),
        }
    }

    /// `(βI + 2ρ G)⁻¹ rhs`.
    fn solve(&self, rhs: &DenseMatrix, beta: f64, rho: f64) -> DenseMatrix {
        let mut proj = self.vectors.transpose() * rhs;
        for (i, mut row) in proj.row_iter_mut().enumerate() {
            row /= beta + 2.0 * rho * self.values[i];
        }
        &self.vectors * proj
    }
}

/// W-step of one iteration:
/// `W = (βI + 2ρXᵀX)⁻¹ (2ρXᵀX + Y + βZ)`, solved without forming an inverse.
pub fn update_w(
    x: &DenseMatrix,
    z: &DenseMatrix,
    y: &DenseMatrix,
    beta: f64,
    rho: f64,
    cached: Option<&GramEigen>,
) -> Result<DenseMatrix> {
    let n = x.ncols();
    if z.shape() != (n, n) || y.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Z {:?} and Y {:?} must both be {n}x{n}",
            z.shape(),
            y.shape()
        )));
    }
    if !(beta > 0.0 && rho > 0.0) {
        return Err(Error::invalid(format!(
            "beta and rho must be positive (beta={beta}, rho={rho})"
        )));
    }
    let gram = x.transpose() * x;
    let step = WStep {
        gram,
        eigen: cached.cloned(),
        rho,
    };
    step.solve(z, y, beta)
}

struct WStep {
    gram: DenseMatrix,
    eigen: Option<GramEigen>,
    rho: f64,
}

impl WStep {
    fn new(x: &DenseMatrix, rho: f64, method: WSolveMethod) -> Self {
        let gram = x.transpose() * x;
        let eigen = match method {
            WSolveMethod::Cholesky => None,
            WSolveMethod::CachedEigen => Some(GramEigen::from_gram(gram.clone())),
        };
        Self { gram, eigen, rho }
    }

    fn solve(&self, z: &DenseMatrix, y: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
        let two_rho_gram = &self.gram * (2.0 * self.rho);
        let rhs = &two_rho_gram + y + z * beta;
        if let Some(eigen) = &self.eigen {
            return Ok(eigen.solve(&rhs, beta, self.rho));
        }
        let n = self.gram.nrows();
        let system = two_rho_gram + DenseMatrix::identity(n, n) * beta;
        let chol = Cholesky::new(system).ok_or_else(|| {
            Error::numerical(format!("W-step system not positive definite (beta={beta})"))
        })?;
        Ok(chol.solve(&rhs))
    }
}

/// Z-step: `prox_{F/β}(W − Y/β)`.
pub fn update_z(w: &DenseMatrix, y: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
    if w.shape() != y.shape() {
        return Err(Error::DimensionMismatch(format!(
            "W {:?} vs Y {:?}",
            w.shape(),
            y.shape()
        )));
    }
    logdet_prox_matrix(&(w - y / beta), beta)
}

/// Dual ascent `Y + β(Z − W)`.
pub fn update_dual(y: &DenseMatrix, z: &DenseMatrix, w: &DenseMatrix, beta: f64) -> DenseMatrix {
    y + (z - w) * beta
}

/// `log det(I + ZᵀZ) + ρ‖X − XZ‖²_F`.
pub fn objective(x: &DenseMatrix, z: &DenseMatrix, rho: f64) -> Result<f64> {
    Ok(logdet_value(z)? + rho * (x - x * z).norm_squared())
}

/// `F(Z) + ρ‖X − XW‖² + (β/2)‖Z − W‖² + ⟨Y, Z − W⟩`.
pub fn augmented_lagrangian(
    x: &DenseMatrix,
    z: &DenseMatrix,
    w: &DenseMatrix,
    y: &DenseMatrix,
    beta: f64,
    rho: f64,
) -> Result<f64> {
    let diff = z - w;
    Ok(logdet_value(z)?
        + rho * (x - x * w).norm_squared()
        + 0.5 * beta * diff.norm_squared()
        + y.dot(&diff))
}

/// Drives the iteration one step at a time; [`solve`] wraps this.
pub struct AlmSolver<'a> {
    x: &'a DenseMatrix,
    config: SolverConfig,
    w_step: WStep,
    state: SolverState,
}

/// Diagnostics for a single iteration.
#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    pub beta: f64,
    pub residual: f64,
    pub relative_change: f64,
    pub multiplier_step: f64,
}

impl<'a> AlmSolver<'a> {
    pub fn new(x: &'a DenseMatrix, config: SolverConfig) -> Result<Self> {
        Self::check_inputs(x, &config)?;
        let state = SolverState::initial(x.ncols(), &config);
        Ok(Self::with_state(x, config, state))
    }

    /// Start from a caller-supplied representation instead of the identity.
    pub fn warm_start(x: &'a DenseMatrix, config: SolverConfig, z0: DenseMatrix) -> Result<Self> {
        Self::check_inputs(x, &config)?;
        let n = x.ncols();
        if z0.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "initial Z is {:?}, expected {n}x{n}",
                z0.shape()
            )));
        }
        ensure_finite(&z0, "initial Z")?;
        let state = SolverState::from_z(z0, &config);
        Ok(Self::with_state(x, config, state))
    }

    fn check_inputs(x: &DenseMatrix, config: &SolverConfig) -> Result<()> {
        config.validate()?;
        ensure_finite(x, "data matrix")?;
        if x.ncols() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 data columns, got {}",
                x.ncols()
            )));
        }
        Ok(())
    }

    fn with_state(x: &'a DenseMatrix, config: SolverConfig, state: SolverState) -> Self {
        let w_step = WStep::new(x, config.rho, config.w_solve);
        Self {
            x,
            config,
            w_step,
            state,
        }
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// One W → Z → Y → β round.
    pub fn step(&mut self) -> Result<StepReport> {
        let k = self.state.iter;
        let beta = self.config.beta_at(k);
        let wrap = |e: Error| Error::Iteration {
            iteration: k,
            source: Box::new(e),
        };

        let w = self
            .w_step
            .solve(&self.state.z, &self.state.y, beta)
            .map_err(wrap)?;
        let z = update_z(&w, &self.state.y, beta).map_err(wrap)?;
        let y = update_dual(&self.state.y, &z, &w, beta);

        let change = (&z - &self.state.z).norm();
        let report = StepReport {
            beta,
            residual: (&z - &w).norm(),
            relative_change: change / self.state.z.norm().max(1.0),
            multiplier_step: beta * change,
        };

        self.state = SolverState {
            z,
            w,
            y,
            beta: self.config.beta_at(k + 1),
            iter: k + 1,
        };
        Ok(report)
    }

    pub fn run(mut self) -> Result<SolverResult> {
        let cap = self.config.max_iters;
        let mut residual_trace = Vec::with_capacity(cap);
        let mut objective_trace = Vec::with_capacity(cap);
        let mut relative_change_trace = Vec::with_capacity(cap);
        let mut beta_trace = Vec::with_capacity(cap);
        let mut multiplier_step_trace = Vec::with_capacity(cap);
        let mut termination = Termination::MaxIters;

        while self.state.iter < cap {
            let report = self.step()?;
            let k = self.state.iter - 1;
            let obj = objective(self.x, &self.state.w, self.config.rho).map_err(|e| {
                Error::Iteration {
                    iteration: k,
                    source: Box::new(e),
                }
            })?;

            residual_trace.push(report.residual);
            objective_trace.push(obj);
            relative_change_trace.push(report.relative_change);
            beta_trace.push(report.beta);
            multiplier_step_trace.push(report.multiplier_step);

            let residual_ok = report.residual <= self.config.tol * self.state.z.norm().max(1.0);
            if report.relative_change <= self.config.tol && residual_ok {
                termination = Termination::Converged;
                break;
            }
        }

        let SolverState { z, w, y, iter, .. } = self.state;
        Ok(SolverResult {
            z,
            w,
            y,
            iterations: iter,
            termination,
            residual_trace,
            objective_trace,
            relative_change_trace,
            beta_trace,
            multiplier_step_trace,
        })
    }
}

/// Runs the solver from `Z = I`, `Y = 0`.
pub fn solve(x: &DenseMatrix, config: &SolverConfig) -> Result<SolverResult> {
    AlmSolver::new(x, *config)?.run()
}

/// Runs the solver from a given initial representation (e.g. a nuclear-norm solution).
pub fn solve_warm(x: &DenseMatrix, config: &SolverConfig, z0: DenseMatrix) -> Result<SolverResult> {
    AlmSolver::warm_start(x, *config, z0)?.run()
}

/// Numerical rank: count of singular values above `rel_tol · σ₁`.
pub fn numerical_rank(m: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let top = s.iter().copied().fold(0.0, f64::max);
    Ok(s.iter().filter(|&&v| v > rel_tol * top).count())
}
