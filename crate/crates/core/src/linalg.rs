//! Dense linear algebra helpers shared by the solver and the clustering stages.
//!
//! All matrices are `nalgebra::DMatrix<f64>`, which is stored column-major.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

const SVD_MAX_SWEEPS: usize = 10_000;
const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(σ) Vᵀ` with nonincreasing singular values.
///
/// Each left singular vector is oriented so that its largest-magnitude entry
/// is positive; the matching right vector is flipped with it.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub left_vectors: DenseMatrix,
    pub singular_values: DVector<f64>,
    pub right_vectors: DenseMatrix,
}

impl SpectralDecomposition {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U diag(f(σ)) Vᵀ`.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let mut scaled = self.left_vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.singular_values[j]);
        }
        scaled * self.right_vectors.transpose()
    }

    pub fn recompose(&self) -> DenseMatrix {
        self.recompose_with(|s| s)
    }
}

pub fn ensure_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// Unsorted thin factors `(U, σ, V)` with `p = min(m, n)` columns each.
///
/// nalgebra's bidiagonal QR occasionally returns inaccurate factors for
/// rank-deficient input, so its result is checked and, if the check fails,
/// recomputed with one-sided Jacobi.
fn raw_svd(a: &DenseMatrix) -> Result<(DenseMatrix, DVector<f64>, DenseMatrix)> {
    if let Some(svd) = a.clone().try_svd(true, true, f64::EPSILON, SVD_MAX_SWEEPS) {
        if let (Some(u), Some(v_t)) = (svd.u, svd.v_t) {
            let v = v_t.transpose();
            if factors_are_accurate(a, &u, &svd.singular_values, &v) {
                return Ok((u, svd.singular_values, v));
            }
        }
    }
    let (u, s, v) = if a.nrows() >= a.ncols() {
        jacobi_svd(a)
    } else {
        let (v, s, u) = jacobi_svd(&a.transpose());
        (u, s, v)
    };
    if factors_are_accurate(a, &u, &s, &v) {
        Ok((u, s, v))
    } else {
        let (m, n) = a.shape();
        Err(Error::numerical(format!(
            "SVD of {m}x{n} matrix did not converge"
        )))
    }
}

fn factors_are_accurate(
    a: &DenseMatrix,
    u: &DenseMatrix,
    s: &DVector<f64>,
    v: &DenseMatrix,
) -> bool {
    const TOL: f64 = 1e-9;
    let p = s.len();
    if u.ncols() != p || v.ncols() != p || s.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return false;
    }
    let mut us = u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= s[j];
    }
    let recon = (a - us * v.transpose()).norm();
    let eye = DenseMatrix::identity(p, p);
    recon <= TOL * a.norm()
        && (u.transpose() * u - &eye).amax() <= TOL
        && (v.transpose() * v - &eye).amax() <= TOL
}

/// One-sided (Hestenes) Jacobi SVD for `m ≥ n`.
fn jacobi_svd(a: &DenseMatrix) -> (DenseMatrix, DVector<f64>, DenseMatrix) {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n, n);
    let mut sq: Vec<f64> = w.column_iter().map(|c| c.norm_squared()).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (wi, wj) = column_pair(w.as_mut_slice(), m, i, j);
                let gamma: f64 = wi.iter().zip(wj.iter()).map(|(x, y)| x * y).sum();
                let (alpha, beta) = (sq[i], sq[j]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wi, wj, c, s);
                let (vi, vj) = column_pair(v.as_mut_slice(), n, i, j);
                rotate(vi, vj, c, s);
                sq[i] = wi.iter().map(|x| x * x).sum();
                sq[j] = wj.iter().map(|x| x * x).sum();
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma = DVector::from_iterator(n, w.column_iter().map(|c| c.norm()));
    let mut u = DenseMatrix::zeros(m, n);
    let mut missing = Vec::new();
    for j in 0..n {
        if sigma[j] > 0.0 {
            u.set_column(j, &(w.column(j) / sigma[j]));
        } else {
            missing.push(j);
        }
    }
    // Columns for zero singular values: complete to an orthonormal set.
    let mut e = 0;
    for j in missing {
        while e < m {
            let mut cand = DVector::zeros(m);
            cand[e] = 1.0;
            e += 1;
            for k in 0..n {
                let proj = u.column(k).dot(&cand);
                cand -= u.column(k) * proj;
            }
            let norm = cand.norm();
            if norm > 0.5 {
                u.set_column(j, &(cand / norm));
                break;
            }
        }
    }
    (u, sigma, v)
}

/// Mutable views of columns `i < j` of a column-major buffer with `rows` rows.
fn column_pair(data: &mut [f64], rows: usize, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    let (head, tail) = data.split_at_mut(j * rows);
    (&mut head[i * rows..(i + 1) * rows], &mut tail[..rows])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (p, q) = (*a, *b);
        *a = c * p - s * q;
        *b = s * p + c * q;
    }
}

pub fn thin_svd(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    let (m, n) = a.shape();
    let p = m.min(n);
    if p == 0 {
        return Ok(SpectralDecomposition {
            left_vectors: DenseMatrix::zeros(m, 0),
            singular_values: DVector::zeros(0),
            right_vectors: DenseMatrix::zeros(n, 0),
        });
    }
    let (u, s, v) = raw_svd(a)?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));

    let mut left = DenseMatrix::zeros(m, p);
    let mut right = DenseMatrix::zeros(n, p);
    let mut sigma = DVector::zeros(p);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = s[src].max(0.0);
        let mut ucol = u.column(src).into_owned();
        let mut vcol = v.column(src).into_owned();
        let pivot = ucol.iter().copied().fold(
            0.0_f64,
            |best, x| if x.abs() > best.abs() { x } else { best },
        );
        if pivot < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        left.set_column(dst, &ucol);
        right.set_column(dst, &vcol);
    }

    Ok(SpectralDecomposition {
        left_vectors: left,
        singular_values: sigma,
        right_vectors: right,
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &DenseMatrix) -> Result<DVector<f64>> {
    Ok(thin_svd(a)?.singular_values)
}

pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?.iter().copied().fold(0.0, f64::max))
}

pub fn nuclear_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?.sum())
}
