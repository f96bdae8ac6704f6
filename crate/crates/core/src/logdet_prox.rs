//! Proximal operator and spectral gradient of the LogDet rank surrogate
//! `F(Z) = log det(I + ZᵀZ) = Σ log(1 + σᵢ²)`.
//!
//! `F` is unitarily invariant, so its proximal operator under a Frobenius
//! penalty acts on the singular values of the anchor one at a time. Each
//! scalar problem
//!
//! ```text
//! minimize_{σ ≥ 0}  log(1 + σ²) + (β/2)(σ − s)²
//! ```
//!
//! has stationarity condition `βσ³ − βsσ² + (β + 2)σ − βs = 0`, which is
//! solved in closed form and then polished with one Newton step.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, thin_svd, DenseMatrix};

/// One scalar proximal subproblem: shrink the singular value `target` under penalty `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarProxProblem {
    target: f64,
    beta: f64,
}

impl ScalarProxProblem {
    pub fn new(target: f64, beta: f64) -> Result<Self> {
        if !target.is_finite() || !beta.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite scalar prox input (target={target}, beta={beta})"
            )));
        }
        if target < 0.0 {
            return Err(Error::invalid(format!(
                "target must be nonnegative, got {target}"
            )));
        }
        if beta <= 0.0 {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { target, beta })
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `log(1 + σ²) + (β/2)(σ − s)²`.
    pub fn objective(&self, sigma: f64) -> f64 {
        let d = sigma - self.target;
        (sigma * sigma).ln_1p() + 0.5 * self.beta * d * d
    }

    /// Derivative of [`objective`](Self::objective): `2σ/(1+σ²) + β(σ − s)`.
    pub fn stationarity(&self, sigma: f64) -> f64 {
        2.0 * sigma / (1.0 + sigma * sigma) + self.beta * (sigma - self.target)
    }

    fn stationarity_slope(&self, sigma: f64) -> f64 {
        let q = 1.0 + sigma * sigma;
        2.0 * (1.0 - sigma * sigma) / (q * q) + self.beta
    }

    fn polish(&self, root: f64) -> f64 {
        let g = self.stationarity(root);
        let slope = self.stationarity_slope(root);
        if g == 0.0 || slope.abs() < f64::EPSILON {
            return root;
        }
        let stepped = root - g / slope;
        if stepped.is_finite() && self.stationarity(stepped).abs() <= g.abs() {
            stepped
        } else {
            root
        }
    }

    /// Global minimizer over `σ ≥ 0`; lies in `[0, target]`.
    pub fn solve(&self) -> f64 {
        let s = self.target;
        if s == 0.0 {
            return 0.0;
        }
        // Monic form of the stationarity cubic.
        let roots = real_cubic_roots(-s, 1.0 + 2.0 / self.beta, -s);

        let mut best = 0.0;
        let mut best_val = self.objective(0.0);
        let mut candidates: Vec<f64> = roots
            .into_iter()
            .filter(|r| *r >= 0.0)
            .map(|r| self.polish(r).clamp(0.0, s))
            .collect();
        candidates.sort_by(f64::total_cmp);
        for sigma in candidates {
            let val = self.objective(sigma);
            if val < best_val {
                best = sigma;
                best_val = val;
            }
        }
        best
    }
}

/// Real roots of the monic cubic `x³ + a x² + b x + c`, ascending.
///
/// Trigonometric form when three roots are real, Cardano with the
/// cancellation-free sign choice otherwise.
pub fn real_cubic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let shift = a / 3.0;
    let q3 = q * q * q;

    let mut roots = if r * r < q3 {
        let theta = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let tau = 2.0 * std::f64::consts::PI;
        vec![
            m * (theta / 3.0).cos() - shift,
            m * ((theta + tau) / 3.0).cos() - shift,
            m * ((theta - tau) / 3.0).cos() - shift,
        ]
    } else {
        let big_a = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
        let big_b = if big_a == 0.0 { 0.0 } else { q / big_a };
        vec![big_a + big_b - shift]
    };
    roots.sort_by(f64::total_cmp);
    roots
}

/// Minimizer of `σ ↦ log(1+σ²) + (β/2)(σ − target)²` over `σ ≥ 0`.
pub fn scalar_prox(problem: ScalarProxProblem) -> f64 {
    problem.solve()
}

/// `log det(I + ZᵀZ) = Σ log(1 + σᵢ²)`, from a Cholesky factor of the
/// smaller of `I + ZᵀZ` and `I + ZZᵀ` (the two determinants agree).
pub fn logdet_value(z: &DenseMatrix) -> Result<f64> {
    ensure_finite(z, "matrix")?;
    let gram = if z.nrows() >= z.ncols() {
        z.transpose() * z
    } else {
        z * z.transpose()
    };
    let n = gram.nrows();
    let chol = Cholesky::new(DenseMatrix::identity(n, n) + gram)
        .ok_or_else(|| Error::numerical("I + ZᵀZ is not numerically positive definite"))?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| (d - 1.0).ln_1p())
            .sum::<f64>())
}

/// `F(Z) + (β/2)‖Z − A‖²_F`, the function minimized by [`logdet_prox_matrix`].
pub fn prox_objective(z: &DenseMatrix, anchor: &DenseMatrix, beta: f64) -> Result<f64> {
    Ok(logdet_value(z)? + 0.5 * beta * (z - anchor).norm_squared())
}

/// `argmin_Z log det(I + ZᵀZ) + (β/2)‖Z − anchor‖²_F`.
pub fn logdet_prox_matrix(anchor: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
    ensure_finite(anchor, "prox anchor")?;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let svd = thin_svd(anchor).map_err(|e| Error::numerical(format!("LogDet prox: {e}")))?;
    // Entries of the SVD are finite and beta was validated, so construction cannot fail.
    Ok(svd.recompose_with(|s| ScalarProxProblem { target: s, beta }.solve()))
}

/// Gradient `U diag(2σᵢ/(1+σᵢ²)) Vᵀ` of `log det(I + ZᵀZ)`.
pub fn logdet_gradient(z: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_finite(z, "matrix")?;
    let svd = thin_svd(z).map_err(|e| Error::numerical(format!("LogDet gradient: {e}")))?;
    Ok(svd.recompose_with(gradient_factor))
}

/// `2σ/(1+σ²)`; always in `[0, 1]` for `σ ≥ 0`.
pub fn gradient_factor(sigma: f64) -> f64 {
    2.0 * sigma / (1.0 + sigma * sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn grid_argmin(p: &ScalarProxProblem, hi: f64, step: f64) -> f64 {
        let n = (hi / step).ceil() as usize;
        let mut best = (0.0, p.objective(0.0));
        for i in 1..=n {
            let x = (i as f64 * step).min(hi);
            let v = p.objective(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best.0
    }

    #[test]
    fn zero_target_gives_zero() {
        assert_eq!(scalar_prox(ScalarProxProblem::new(0.0, 0.3).unwrap()), 0.0);
    }

    #[test]
    fn huge_beta_keeps_target() {
        let s = scalar_prox(ScalarProxProblem::new(2.0, 1e8).unwrap());
        assert!((s - 2.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn target_three_beta_one_matches_grid() {
        let p = ScalarProxProblem::new(3.0, 1.0).unwrap();
        // Brute force over [0, 3] at step 1e-7 (3e7 evaluations).
        let oracle = grid_argmin(&p, 3.0, 1e-7);
        let got = scalar_prox(p);
        assert!((got - oracle).abs() < 1e-5, "got {got}, oracle {oracle}");
        assert!(p.stationarity(got).abs() < 1e-8);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(ScalarProxProblem::new(f64::NAN, 1.0).is_err());
        assert!(ScalarProxProblem::new(1.0, f64::INFINITY).is_err());
        assert!(ScalarProxProblem::new(-1.0, 1.0).is_err());
        assert!(ScalarProxProblem::new(1.0, 0.0).is_err());
    }

    #[test]
    fn small_beta_can_collapse_to_zero() {
        // β ≤ 1/4 with a small target: the zero candidate wins.
        let p = ScalarProxProblem::new(0.5, 0.05).unwrap();
        let got = scalar_prox(p);
        let oracle = grid_argmin(&p, 0.5, 1e-6);
        assert!((got - oracle).abs() < 1e-5);
    }

    #[test]
    fn cubic_roots_of_known_polynomials() {
        // (x-1)(x-2)(x-3) = x³ - 6x² + 11x - 6
        let r = real_cubic_roots(-6.0, 11.0, -6.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        // x³ + x + 2 = (x+1)(x² - x + 2)
        let r = real_cubic_roots(0.0, 1.0, 2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn prox_of_zero_is_zero() {
        for (m, n) in [(1, 1), (3, 2), (2, 5)] {
            let z = logdet_prox_matrix(&DenseMatrix::zeros(m, n), 1.0).unwrap();
            assert_eq!(z, DenseMatrix::zeros(m, n));
        }
    }

    #[test]
    fn prox_of_diagonal_reduces_to_scalar() {
        let a = DenseMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 0.0]));
        let z = logdet_prox_matrix(&a, 2.0).unwrap();
        let s = scalar_prox(ScalarProxProblem::new(5.0, 2.0).unwrap());
        assert!((z[(0, 0)] - s).abs() < 1e-12);
        assert!(z[(1, 1)].abs() < 1e-15 && z[(0, 1)].abs() < 1e-15 && z[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn gradient_of_zero_and_identity() {
        assert_eq!(
            logdet_gradient(&DenseMatrix::zeros(3, 2)).unwrap(),
            DenseMatrix::zeros(3, 2)
        );
        let g = logdet_gradient(&DenseMatrix::identity(2, 2)).unwrap();
        assert!((g - DenseMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn value_examples() {
        assert_eq!(logdet_value(&DenseMatrix::zeros(4, 3)).unwrap(), 0.0);
        let v = logdet_value(&DenseMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_matrices_rejected() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(1, 1)] = f64::INFINITY;
        assert!(logdet_value(&a).is_err());
        assert!(logdet_gradient(&a).is_err());
        assert!(logdet_prox_matrix(&a, 1.0).is_err());
        assert!(logdet_prox_matrix(&DenseMatrix::zeros(2, 2), -1.0).is_err());
    }
}
