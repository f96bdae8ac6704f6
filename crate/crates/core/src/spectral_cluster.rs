//! Normalized spectral clustering of an affinity graph.
//!
//! Symmetric normalized Laplacian `L = I − D^{-1/2} W D^{-1/2}`, embedding by
//! its bottom-k eigenvectors with unit-norm rows, then k-means.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::AffinityMatrix;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const DEGREE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iters: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub k: usize,
    pub kmeans_inertia: f64,
}

/// `I − D^{-1/2} W D^{-1/2}` with degrees floored away from zero.
pub fn normalized_laplacian(w: &DenseMatrix) -> DenseMatrix {
    let n = w.nrows();
    let inv_sqrt: Vec<f64> = w
        .row_iter()
        .map(|r| 1.0 / (r.sum() + DEGREE_FLOOR).sqrt())
        .collect();
    DenseMatrix::from_fn(n, n, |i, j| {
        let off = -w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    })
}

/// Eigenvectors of the `k` smallest eigenvalues of the normalized Laplacian,
/// with each row scaled to unit length (zero rows stay zero).
pub fn spectral_embedding(w: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let n = w.nrows();
    let laplacian = normalized_laplacian(w);
    let eig = SymmetricEigen::try_new(laplacian, f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("eigendecomposition of the Laplacian did not converge"))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("Laplacian eigenvalues are not finite"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });

    let mut embedding = DenseMatrix::zeros(n, k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        // Orient each eigenvector by its largest-magnitude entry.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0_f64, |b, x| if x.abs() > b.abs() { x } else { b });
        if pivot < 0.0 {
            v.neg_mut();
        }
        embedding.set_column(dst, &v);
    }
    for mut row in embedding.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(embedding)
}

pub fn spectral_cluster(w: &AffinityMatrix, k: usize, seed: u64) -> Result<ClusteringResult> {
    spectral_cluster_with(w, k, seed, &KMeansConfig::default())
}

pub fn spectral_cluster_with(
    w: &AffinityMatrix,
    k: usize,
    seed: u64,
    kmeans_config: &KMeansConfig,
) -> Result<ClusteringResult> {
    let n = w.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!(
            "cluster count must satisfy 2 <= k <= n (k={k}, n={n})"
        )));
    }
    let embedding = spectral_embedding(w.values(), k)?;
    let km = kmeans(&embedding, k, seed, kmeans_config)?;
    Ok(ClusteringResult {
        labels: km.labels,
        k,
        kmeans_inertia: km.inertia,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: DenseMatrix,
    pub inertia: f64,
}

/// k-means on the rows of `points`: k-means++ seeding, best of `restarts` runs.
///
/// Restart `r` draws from ChaCha8 stream `r` of `seed`, so the parallel
/// result is the same as running the restarts in order.
pub fn kmeans(
    points: &DenseMatrix,
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k-means needs 1 <= k <= n (k={k}, n={n})"
        )));
    }
    if config.restarts == 0 || config.max_iters == 0 {
        return Err(Error::invalid(
            "k-means needs at least one restart and one iteration",
        ));
    }
    let runs: Vec<KMeansResult> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, k, config.max_iters, &mut rng)
        })
        .collect();
    let mut best: Option<KMeansResult> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(points: &DenseMatrix, i: usize, centroids: &DenseMatrix, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn plus_plus_init(points: &DenseMatrix, k: usize, rng: &mut impl Rng) -> DenseMatrix {
    let n = points.nrows();
    let mut centroids = DenseMatrix::zeros(k, points.ncols());
    let first = rng.random_range(0..n);
    centroids.set_row(0, &points.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in closest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &points.row(pick));
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

fn lloyd(points: &DenseMatrix, k: usize, max_iters: usize, rng: &mut impl Rng) -> KMeansResult {
    let (n, dim) = points.shape();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![usize::MAX; n];

    for _ in 0..max_iters {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let nearest = (0..k)
                .map(|c| (c, sq_dist(points, i, &centroids, c)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .unwrap();
            if *label != nearest {
                *label = nearest;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DenseMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let mut row = sums.row_mut(l);
            row += points.row(i);
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                centroids.set_row(c, &(sums.row(c) / count as f64));
            } else {
                // Empty cluster: reseed at the point farthest from its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(points, a, &centroids, labels[a])
                            .total_cmp(&sq_dist(points, b, &centroids, labels[b]))
                    })
                    .unwrap();
                centroids.set_row(c, &points.row(far));
            }
        }
    }

    let inertia = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points, i, &centroids, l))
        .sum();
    KMeansResult {
        labels,
        centroids,
        inertia,
    }
}
