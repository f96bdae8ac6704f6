//! Angle-based affinity from the principal directions of a representation.
//!
//! With the skinny SVD `Z = U Σ Vᵀ`, each point is described by a row of
//! `M = U Σ^{1/2}` (or of `V Σ^{1/2}`, the columns of `N = Σ^{1/2} Vᵀ`).
//! Affinities are powered cosines `W_ij = cos(m_i, m_j)^{2α}`, so only the
//! directions of the rows matter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, thin_svd, DenseMatrix, SpectralDecomposition};

pub const DEFAULT_ALPHA: u32 = 2;
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffinitySide {
    /// Rows of `U Σ^{1/2}`.
    #[default]
    Left,
    /// Columns of `Σ^{1/2} Vᵀ`.
    Right,
}

/// Symmetric, nonnegative, unit-diagonal similarity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix(DenseMatrix);

impl AffinityMatrix {
    /// Checks the invariants (square, symmetric, entries in `[0, 1]`, unit diagonal).
    pub fn new(values: DenseMatrix) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "affinity must be square, got {:?}",
                values.shape()
            )));
        }
        ensure_finite(&values, "affinity")?;
        for i in 0..n {
            if (values[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "affinity diagonal entry {i} is {}",
                    values[(i, i)]
                )));
            }
            for j in 0..i {
                let v = values[(i, j)];
                if (v - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "affinity not symmetric at ({i}, {j})"
                    )));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "affinity entry ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// SVD truncated to the components with `σᵢ > rank_tol · σ₁`.
pub fn skinny_svd(z: &DenseMatrix, rank_tol: f64) -> Result<SpectralDecomposition> {
    ensure_finite(z, "representation")?;
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::invalid(format!(
            "rank_tol must lie in (0, 1), got {rank_tol}"
        )));
    }
    let full = thin_svd(z)?;
    let top = full.singular_values.iter().copied().next().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::DegenerateInput(
            "representation is zero; no principal directions".into(),
        ));
    }
    let cutoff = rank_tol * top;
    let r = full
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff)
        .count()
        .max(1);
    Ok(SpectralDecomposition {
        left_vectors: full.left_vectors.columns(0, r).into_owned(),
        singular_values: full.singular_values.rows(0, r).into_owned(),
        right_vectors: full.right_vectors.columns(0, r).into_owned(),
    })
}

/// Powered-cosine affinity `W_ij = (m̂ᵢᵀ m̂ⱼ)^{2α}` over the chosen feature side.
///
/// A row with zero norm gets affinity 0 to every other point (1 to itself).
pub fn build_affinity(
    decomp: &SpectralDecomposition,
    alpha: u32,
    side: AffinitySide,
) -> Result<AffinityMatrix> {
    if alpha < 1 {
        return Err(Error::invalid("alpha must be at least 1"));
    }
    let vectors = match side {
        AffinitySide::Left => &decomp.left_vectors,
        AffinitySide::Right => &decomp.right_vectors,
    };
    let mut features = vectors.clone();
    for (j, mut col) in features.column_iter_mut().enumerate() {
        col *= decomp.singular_values[j].max(0.0).sqrt();
    }
    Ok(AffinityMatrix(powered_cosine(&features, 2 * alpha)))
}

/// `(cos∠(rowᵢ, rowⱼ))^power` for every pair of rows.
pub(crate) fn powered_cosine(features: &DenseMatrix, power: u32) -> DenseMatrix {
    let n = features.nrows();
    let norms: Vec<f64> = features.row_iter().map(|r| r.norm()).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    let unit = DenseMatrix::from_fn(n, features.ncols(), |i, j| {
        if norms[i] > scale * f64::EPSILON && norms[i] > 0.0 {
            features[(i, j)] / norms[i]
        } else {
            0.0
        }
    });
    let gram = &unit * unit.transpose();
    let mut w = DenseMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = 1.0;
        for j in 0..i {
            let c = gram[(i, j)].clamp(-1.0, 1.0);
            let v = c.powi(power as i32).clamp(0.0, 1.0);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn decomp_from_rows(rows: &[[f64; 2]]) -> SpectralDecomposition {
        let n = rows.len();
        SpectralDecomposition {
            left_vectors: DenseMatrix::from_fn(n, 2, |i, j| rows[i][j]),
            singular_values: DVector::from_vec(vec![1.0, 1.0]),
            right_vectors: DenseMatrix::zeros(n, 2),
        }
    }

    #[test]
    fn skinny_svd_of_identity_keeps_everything() {
        let d = skinny_svd(&DenseMatrix::identity(3, 3), 1e-6).unwrap();
        assert_eq!(d.rank(), 3);
        assert!(d.singular_values.iter().all(|&s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn skinny_svd_truncates() {
        let z = DenseMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 1e-9, 0.0]));
        assert_eq!(skinny_svd(&z, 1e-6).unwrap().rank(), 1);
    }

    #[test]
    fn skinny_svd_rejects_zero_and_bad_tol() {
        assert!(matches!(
            skinny_svd(&DenseMatrix::zeros(3, 3), 1e-6),
            Err(Error::DegenerateInput(_))
        ));
        assert!(skinny_svd(&DenseMatrix::identity(2, 2), 0.0).is_err());
        assert!(skinny_svd(&DenseMatrix::identity(2, 2), 1.0).is_err());
    }

    #[test]
    fn parallel_orthogonal_and_diagonal_pairs() {
        let d = decomp_from_rows(&[[1.0, 0.0], [3.0, 0.0], [0.0, 2.0], [1.0, 1.0]]);
        let w = build_affinity(&d, 2, AffinitySide::Left).unwrap();
        let w = w.values();
        assert!((w[(0, 1)] - 1.0).abs() < 1e-15);
        assert!(w[(0, 2)].abs() < 1e-15);
        assert!((w[(0, 3)] - 0.25).abs() < 1e-15);
        assert!((0..4).all(|i| w[(i, i)] == 1.0));
    }

    #[test]
    fn opposite_directions_are_fully_similar() {
        let d = decomp_from_rows(&[[1.0, 0.5], [-2.0, -1.0]]);
        let w = build_affinity(&d, 1, AffinitySide::Left).unwrap();
        assert!((w.values()[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rows_are_isolated() {
        let d = decomp_from_rows(&[[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        let w = build_affinity(&d, 2, AffinitySide::Left).unwrap();
        let w = w.values();
        assert_eq!(w[(1, 1)], 1.0);
        assert_eq!(w[(1, 0)], 0.0);
        assert_eq!(w[(1, 2)], 0.0);
        assert_eq!(w[(0, 2)], 1.0);
    }

    #[test]
    fn alpha_zero_rejected() {
        let d = decomp_from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(build_affinity(&d, 0, AffinitySide::Left).is_err());
    }

    #[test]
    fn right_side_uses_v() {
        let z = DenseMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 2.0, 0.5, 0.0, 1.0]);
        let right = build_affinity(&skinny_svd(&z, 1e-6).unwrap(), 2, AffinitySide::Right).unwrap();
        let left_of_t = build_affinity(
            &skinny_svd(&z.transpose(), 1e-6).unwrap(),
            2,
            AffinitySide::Left,
        )
        .unwrap();
        assert!((right.values() - left_of_t.values()).amax() < 1e-12);
    }

    #[test]
    fn validation_rejects_asymmetric() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(AffinityMatrix::new(m).is_err());
    }
}
