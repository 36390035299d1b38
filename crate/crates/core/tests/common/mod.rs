//! Shared oracles for the integration suites. Everything here is an
//! independent route to a quantity the production code also computes:
//! a cyclic Jacobi eigensolver, a brute-force active-set enumerator for the
//! capped-simplex projection, a closed-form 2x2 eigenvalue, and an
//! exhaustive grid minimizer. None of it calls the production solvers.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// All eigenvalues of a symmetric matrix by cyclic Jacobi sweeps,
/// sorted in decreasing order.
pub fn jacobi_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let p = m.nrows();
    assert_eq!(p, m.ncols());
    let mut a = m.clone();
    let scale = a.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    for _ in 0..200 {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if a[(i, j)].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(j, j)] - a[(i, i)]) / (2.0 * a[(i, j)]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aik = a[(i, k)];
                    let ajk = a[(j, k)];
                    a[(i, k)] = c * aik - s * ajk;
                    a[(j, k)] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let aki = a[(k, i)];
                    let akj = a[(k, j)];
                    a[(k, i)] = c * aki - s * akj;
                    a[(k, j)] = s * aki + c * akj;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..p).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

pub fn jacobi_lambda_max(m: &Array2<f64>) -> f64 {
    jacobi_eigenvalues(m)[0]
}

/// Closed-form largest eigenvalue of [[a, b], [b, c]].
pub fn eig2x2_max(a: f64, b: f64, c: f64) -> f64 {
    0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

/// Brute-force projection onto {w : sum w = 1, 0 <= w_i <= cap} by
/// enumerating all 3^n active-set patterns (0 / free / capped) and solving
/// the equality-constrained problem for each; returns the unique
/// KKT-consistent candidate. Only intended for n <= 6.
pub fn project_capped_simplex_oracle(v: &[f64], cap: f64) -> Vec<f64> {
    let n = v.len();
    let tol = 1e-11;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pattern in 0..3usize.pow(n as u32) {
        let mut digits = Vec::with_capacity(n);
        let mut rem = pattern;
        for _ in 0..n {
            digits.push(rem % 3);
            rem /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| digits[i] == 1).collect();
        let capped: Vec<usize> = (0..n).filter(|&i| digits[i] == 2).collect();
        let zeros: Vec<usize> = (0..n).filter(|&i| digits[i] == 0).collect();

        let (theta_lo, theta_hi) = {
            let lo = zeros
                .iter()
                .map(|&i| v[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let hi = capped
                .iter()
                .map(|&i| v[i] - cap)
                .fold(f64::INFINITY, f64::min);
            (lo, hi)
        };

        let theta = if free.is_empty() {
            if (cap * capped.len() as f64 - 1.0).abs() > 1e-9 || theta_lo > theta_hi + tol {
                continue;
            }
            0.5 * (theta_lo.max(theta_hi - 1.0) + theta_hi)
        } else {
            let s: f64 = free.iter().map(|&i| v[i]).sum();
            (s + cap * capped.len() as f64 - 1.0) / free.len() as f64
        };

        let mut w = vec![0.0; n];
        let mut ok = true;
        for &i in &free {
            let wi = v[i] - theta;
            if wi < -tol || wi > cap + tol {
                ok = false;
                break;
            }
            w[i] = wi.clamp(0.0, cap);
        }
        if !ok {
            continue;
        }
        for &i in &zeros {
            if v[i] - theta > tol {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        for &i in &capped {
            if v[i] - theta < cap - tol {
                ok = false;
                break;
            }
            w[i] = cap;
        }
        if !ok {
            continue;
        }
        let dist: f64 = w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, w));
        }
    }
    best.expect("some active-set pattern must be consistent").1
}

/// Enumerates the grid {w : sum w = 1, w_i = k_i / m, w_i <= cap} for n = 4
/// and returns the minimum of `f` over it.
pub fn grid_min_capped_simplex_n4(m: usize, cap: f64, mut f: impl FnMut(&[f64; 4]) -> f64) -> f64 {
    let kcap = ((cap * m as f64) + 1e-9).floor() as usize;
    let mut best = f64::INFINITY;
    for k1 in 0..=kcap.min(m) {
        for k2 in 0..=kcap.min(m - k1) {
            for k3 in 0..=kcap.min(m - k1 - k2) {
                let k4 = m - k1 - k2 - k3;
                if k4 > kcap {
                    continue;
                }
                let w = [
                    k1 as f64 / m as f64,
                    k2 as f64 / m as f64,
                    k3 as f64 / m as f64,
                    k4 as f64 / m as f64,
                ];
                let val = f(&w);
                if val < best {
                    best = val;
                }
            }
        }
    }
    best
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Array1<f64> {
    Array1::from_iter((0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = scale * rng.sample::<f64, _>(StandardNormal);
    }
    m
}

/// Random symmetric matrix with N(0, scale^2) entries.
pub fn random_symmetric(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Array2<f64> {
    let g = random_matrix(rng, p, p, scale);
    0.5 * (&g + &g.t())
}

/// Random PSD matrix G G^T / p.
pub fn random_psd(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Array2<f64> {
    let g = random_matrix(rng, p, p, scale);
    g.dot(&g.t()) / p as f64
}

/// Random orthogonal matrix by Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, p: usize) -> Array2<f64> {
    loop {
        let g = random_matrix(rng, p, p, 1.0);
        let mut q: Vec<Array1<f64>> = Vec::with_capacity(p);
        let mut degenerate = false;
        for j in 0..p {
            let mut col = g.column(j).to_owned();
            for prev in &q {
                let proj = col.dot(prev);
                col.scaled_add(-proj, prev);
            }
            let norm = col.dot(&col).sqrt();
            if norm < 1e-8 {
                degenerate = true;
                break;
            }
            q.push(col / norm);
        }
        if degenerate {
            continue;
        }
        let mut u = Array2::zeros((p, p));
        for (j, col) in q.iter().enumerate() {
            for i in 0..p {
                u[(i, j)] = col[i];
            }
        }
        return u;
    }
}

/// Random point of the probability simplex (normalized exponentials).
pub fn random_simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n)
        .map(|_| -(rng.random_range(1e-12..1.0f64)).ln())
        .collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / sum).collect()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
