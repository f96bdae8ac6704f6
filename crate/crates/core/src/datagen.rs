//! Synthetic union-of-subspaces data.
//!
//! A random orthonormal basis `U₁` is rotated repeatedly by one random
//! rotation `R` (`U_{i+1} = R Uᵢ`); points of subspace `j` are `Uⱼ Tⱼ` with
//! standard normal coefficients. A chosen fraction of the columns is then
//! corrupted by Gaussian noise whose size scales with the column norm.

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// How `noise_scale · ‖x‖` parameterizes the per-entry Gaussian noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Entry variance `noise_scale · ‖x‖`.
    #[default]
    Variance,
    /// Entry standard deviation `noise_scale · ‖x‖`.
    StdDev,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub ambient_dim: usize,
    pub num_subspaces: usize,
    pub subspace_dim: usize,
    pub points_per_subspace: usize,
    pub corruption_fraction: f64,
    pub noise_scale: f64,
    pub noise_model: NoiseModel,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            ambient_dim: 100,
            num_subspaces: 5,
            subspace_dim: 4,
            points_per_subspace: 20,
            corruption_fraction: 0.0,
            noise_scale: 0.2,
            noise_model: NoiseModel::Variance,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_corruption(mut self, fraction: f64) -> Self {
        self.corruption_fraction = fraction;
        self
    }

    pub fn num_points(&self) -> usize {
        self.num_subspaces * self.points_per_subspace
    }

    /// Number of columns that receive noise: `round(fraction · n)`.
    pub fn num_corrupted(&self) -> usize {
        ((self.corruption_fraction * self.num_points() as f64).round() as usize)
            .min(self.num_points())
    }

    pub fn validate(&self) -> Result<()> {
        if self.ambient_dim == 0
            || self.num_subspaces == 0
            || self.subspace_dim == 0
            || self.points_per_subspace == 0
        {
            return Err(Error::invalid(
                "synthetic dimensions and counts must all be at least 1",
            ));
        }
        if self.subspace_dim > self.ambient_dim {
            return Err(Error::invalid(format!(
                "subspace_dim {} exceeds ambient_dim {}",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if !(0.0..=1.0).contains(&self.corruption_fraction) {
            return Err(Error::invalid(format!(
                "corruption_fraction must lie in [0, 1], got {}",
                self.corruption_fraction
            )));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::invalid(format!(
                "noise_scale must be nonnegative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LabeledDataset {
    /// `ambient_dim × n`, one point per column.
    pub x: DenseMatrix,
    pub labels: Vec<usize>,
    /// Orthonormal basis of each subspace.
    pub bases: Vec<DenseMatrix>,
    pub rotation: DenseMatrix,
    /// Indices of the corrupted columns, ascending.
    pub corrupted: Vec<usize>,
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Orthonormal columns from the QR factor of a Gaussian matrix, with `diag(R) > 0`.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let qr = gaussian_matrix(rows, cols, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Random orthogonal matrix with determinant +1.
pub fn random_rotation(dim: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut q = random_orthonormal(dim, dim, rng);
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (d, p, m) = (
        spec.ambient_dim,
        spec.subspace_dim,
        spec.points_per_subspace,
    );
    let n = spec.num_points();

    let first = random_orthonormal(d, p, &mut rng);
    let rotation = random_rotation(d, &mut rng);
    let mut bases = Vec::with_capacity(spec.num_subspaces);
    bases.push(first);
    for i in 1..spec.num_subspaces {
        let next = &rotation * &bases[i - 1];
        bases.push(next);
    }

    let mut x = DenseMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for (j, basis) in bases.iter().enumerate() {
        let coeffs = gaussian_matrix(p, m, &mut rng);
        x.columns_mut(j * m, m).copy_from(&(basis * coeffs));
        labels.extend(std::iter::repeat_n(j, m));
    }

    let mut corrupted = sample(&mut rng, n, spec.num_corrupted()).into_vec();
    corrupted.sort_unstable();
    for &c in &corrupted {
        let norm = x.column(c).norm();
        let std = match spec.noise_model {
            NoiseModel::Variance => (spec.noise_scale * norm).sqrt(),
            NoiseModel::StdDev => spec.noise_scale * norm,
        };
        let noise: DVector<f64> = DVector::from_fn(d, |_, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            std * e
        });
        let mut col = x.column_mut(c);
        col += noise;
    }

    Ok(LabeledDataset {
        x,
        labels,
        bases,
        rotation,
        corrupted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_points_lie_in_their_subspace() {
        let ds = generate(&SyntheticSpec::default().with_seed(3)).unwrap();
        assert_eq!(ds.x.shape(), (100, 100));
        for (c, &l) in ds.labels.iter().enumerate() {
            let u = &ds.bases[l];
            let x = ds.x.column(c);
            let resid = x - u * (u.transpose() * x);
            assert!(resid.norm() <= 1e-10, "column {c}");
        }
    }

    #[test]
    fn bases_and_rotation_are_orthogonal() {
        let ds = generate(&SyntheticSpec::default().with_seed(11)).unwrap();
        for u in &ds.bases {
            assert!((u.transpose() * u - DenseMatrix::identity(4, 4)).amax() < 1e-10);
        }
        let r = &ds.rotation;
        assert!((r.transpose() * r - DenseMatrix::identity(100, 100)).amax() < 1e-10);
        assert!((r.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn corruption_count_is_exact() {
        let spec = SyntheticSpec::default().with_corruption(0.3).with_seed(5);
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.corrupted.len(), 30);
        let clean = generate(&spec.with_corruption(0.0)).unwrap();
        let changed: Vec<usize> = (0..100)
            .filter(|&c| ds.x.column(c) != clean.x.column(c))
            .collect();
        assert_eq!(changed, ds.corrupted);
    }

    #[test]
    fn labels_are_block_constant() {
        let ds = generate(&SyntheticSpec::default()).unwrap();
        for (i, &l) in ds.labels.iter().enumerate() {
            assert_eq!(l, i / 20);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            SyntheticSpec {
                subspace_dim: 101,
                ..Default::default()
            },
            SyntheticSpec {
                num_subspaces: 0,
                ..Default::default()
            },
            SyntheticSpec {
                corruption_fraction: 1.5,
                ..Default::default()
            },
            SyntheticSpec {
                noise_scale: -0.1,
                ..Default::default()
            },
        ];
        for s in bad {
            assert!(generate(&s).is_err());
        }
    }
}
