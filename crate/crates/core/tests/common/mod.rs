//! Reference computations for the tests. None of these go through the
//! library's SVD or cubic solver: the matrix objective uses a Cholesky
//! log-determinant and the closed-form gradient `2Z(I + ZᵀZ)⁻¹`.
#![allow(dead_code)]

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Mat = DMatrix<f64>;

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn orthonormal(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let q = gaussian(rows, cols, rng).qr().q();
    q.columns(0, cols).into_owned()
}

/// `U diag(s) Vᵀ` with random orthonormal factors.
pub fn with_singular_values(rows: usize, cols: usize, s: &[f64], rng: &mut impl Rng) -> Mat {
    let u = orthonormal(rows, s.len(), rng);
    let v = orthonormal(cols, s.len(), rng);
    u * Mat::from_diagonal(&DVector::from_column_slice(s)) * v.transpose()
}

/// `log det(I + ZᵀZ)` through a Cholesky factor of the smaller Gram matrix.
pub fn logdet_cholesky(z: &Mat) -> f64 {
    let gram = if z.nrows() >= z.ncols() {
        z.transpose() * z
    } else {
        z * z.transpose()
    };
    let n = gram.nrows();
    let chol = Cholesky::new(Mat::identity(n, n) + gram).expect("I + ZᵀZ is positive definite");
    2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `∇ log det(I + ZᵀZ) = 2 Z (I + ZᵀZ)⁻¹`.
pub fn logdet_grad_closed_form(z: &Mat) -> Mat {
    let n = z.ncols();
    let chol = Cholesky::new(Mat::identity(n, n) + z.transpose() * z).unwrap();
    z * chol.inverse() * 2.0
}

pub fn central_difference(f: impl Fn(&Mat) -> f64, z: &Mat, h: f64) -> Mat {
    let mut g = Mat::zeros(z.nrows(), z.ncols());
    for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            let mut p = z.clone();
            let mut m = z.clone();
            p[(i, j)] += h;
            m[(i, j)] -= h;
            g[(i, j)] = (f(&p) - f(&m)) / (2.0 * h);
        }
    }
    g
}

pub fn scalar_objective(sigma: f64, target: f64, beta: f64) -> f64 {
    (sigma * sigma).ln_1p() + 0.5 * beta * (sigma - target) * (sigma - target)
}

/// Grid minimization of the scalar objective over `[0, target]`: a coarse
/// grid, then every discrete local minimum is zoomed in on until the grid
/// step is at most 1e-7.
pub fn scalar_grid_oracle(target: f64, beta: f64) -> f64 {
    if target == 0.0 {
        return 0.0;
    }
    let f = |x: f64| scalar_objective(x, target, beta);
    let coarse = 20_000usize;
    let step = target / coarse as f64;
    let vals: Vec<f64> = (0..=coarse).map(|i| f(i as f64 * step)).collect();
    let mut seeds = Vec::new();
    for i in 0..=coarse {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i == coarse {
            f64::INFINITY
        } else {
            vals[i + 1]
        };
        if vals[i] <= left && vals[i] <= right {
            seeds.push(i as f64 * step);
        }
    }
    let mut best = (0.0, f(0.0));
    for seed in seeds {
        let (mut lo, mut hi) = ((seed - step).max(0.0), (seed + step).min(target));
        let mut x = seed;
        loop {
            let sub = 200usize;
            let h = (hi - lo) / sub as f64;
            let mut local = (x, f(x));
            for k in 0..=sub {
                let c = lo + k as f64 * h;
                let v = f(c);
                if v < local.1 {
                    local = (c, v);
                }
            }
            x = local.0;
            if h <= 1e-7 {
                break;
            }
            lo = (x - h).max(0.0);
            hi = (x + h).min(target);
        }
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best.0
}

/// `F(Z) + (β/2)‖Z − A‖²` evaluated without an SVD.
pub fn prox_objective_ref(z: &Mat, anchor: &Mat, beta: f64) -> f64 {
    logdet_cholesky(z) + 0.5 * beta * (z - anchor).norm_squared()
}

fn prox_gradient_ref(z: &Mat, anchor: &Mat, beta: f64) -> Mat {
    logdet_grad_closed_form(z) + (z - anchor) * beta
}

/// BFGS with Armijo backtracking on the matrix prox objective from one start.
pub fn bfgs_prox(anchor: &Mat, beta: f64, start: Mat) -> (Mat, f64) {
    let (m, n) = anchor.shape();
    let dim = m * n;
    let flat = |z: &Mat| DVector::from_column_slice(z.as_slice());
    let unflat = |v: &DVector<f64>| Mat::from_column_slice(m, n, v.as_slice());

    let mut x = flat(&start);
    let mut fx = prox_objective_ref(&start, anchor, beta);
    let mut g = flat(&prox_gradient_ref(&start, anchor, beta));
    let mut h_inv = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..5000 {
        if g.norm() < 1e-11 {
            break;
        }
        let mut dir = -(&h_inv * &g);
        if dir.dot(&g) >= 0.0 {
            h_inv = DMatrix::identity(dim, dim);
            dir = -g.clone();
        }
        let mut t = 1.0;
        let slope = dir.dot(&g);
        let (x_new, f_new) = loop {
            let cand = &x + &dir * t;
            let fc = prox_objective_ref(&unflat(&cand), anchor, beta);
            if fc <= fx + 1e-4 * t * slope || t < 1e-16 {
                break (cand, fc);
            }
            t *= 0.5;
        };
        let g_new = flat(&prox_gradient_ref(&unflat(&x_new), anchor, beta));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(dim, dim);
            let left = &eye - &s * y.transpose() * rho;
            let right = &eye - &y * s.transpose() * rho;
            h_inv = &left * &h_inv * &right + &s * s.transpose() * rho;
        }
        let done = (fx - f_new).abs() < 1e-15 * fx.abs().max(1.0) && s.norm() < 1e-13;
        x = x_new;
        fx = f_new;
        g = g_new;
        if done {
            break;
        }
    }
    (unflat(&x), fx)
}

/// Best objective over `starts` random BFGS runs.
pub fn multistart_prox(anchor: &Mat, beta: f64, starts: usize, rng: &mut impl Rng) -> f64 {
    let scale = anchor.norm() / ((anchor.len() as f64).sqrt());
    (0..starts)
        .map(|_| {
            let start = gaussian(anchor.nrows(), anchor.ncols(), rng) * scale;
            bfgs_prox(anchor, beta, start).1
        })
        .fold(f64::INFINITY, f64::min)
}

/// Every bijection of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Error rate by trying every label bijection (labels in `0..k`).
pub fn brute_force_error(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let best = permutations(k)
        .into_iter()
        .map(|perm| {
            pred.iter()
                .zip(truth)
                .filter(|(p, t)| perm[**p] == **t)
                .count()
        })
        .max()
        .unwrap();
    (pred.len() - best) as f64 / pred.len() as f64
}
