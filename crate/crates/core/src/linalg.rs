//! Dense symmetric linear algebra: weighted scatter matrices and extreme
//! eigenpairs. This is the numeric kernel behind the spectral objective.
//!
//! Eigenvalues of an indefinite symmetric matrix are obtained by power
//! iteration on S + cI with shift c = ||S||_F: the shift makes the spectrum
//! nonnegative without touching the eigenvectors, and is subtracted back out.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::types::{Dataset, WeightVector};

/// Default relative tolerance for eigenpair residuals.
pub const EIG_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric (max asymmetry {0})")]
    NotSymmetric(f64),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("power iteration did not reach tolerance (residual {residual})")]
    NoConvergence {
        /// Best eigenvalue estimate at budget exhaustion.
        value: f64,
        /// Matching unit vector.
        vector: Array1<f64>,
        residual: f64,
    },
}

/// A p-by-p symmetric matrix. Symmetry is verified at construction within
/// 1e-10 relative to the largest entry, then enforced exactly by averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: Array2<f64>,
}

impl SymMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self, LinalgError> {
        if entries.nrows() != entries.ncols() {
            return Err(LinalgError::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let scale = entries.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut max_asym = 0.0f64;
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                max_asym = max_asym.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if max_asym > 1e-10 * scale {
            return Err(LinalgError::NotSymmetric(max_asym));
        }
        let mut entries = entries;
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                let avg = 0.5 * (entries[(i, j)] + entries[(j, i)]);
                entries[(i, j)] = avg;
                entries[(j, i)] = avg;
            }
        }
        Ok(Self { entries })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            entries: Array2::zeros((p, p)),
        }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            entries: Array2::eye(p),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Array2::zeros((d.len(), d.len()));
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        Self { entries: m }
    }

    /// Scaled identity sigma^2 I.
    pub fn scaled_identity(p: usize, s: f64) -> Self {
        Self::diagonal(&vec![s; p])
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.p()).map(|i| self.entries[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        if self.p() != other.p() {
            return Err(LinalgError::DimensionMismatch(format!(
                "matrix sizes {} and {} differ",
                self.p(),
                other.p()
            )));
        }
        Ok(SymMatrix {
            entries: &self.entries - &other.entries,
        })
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        if self.p() != other.p() {
            return Err(LinalgError::DimensionMismatch(format!(
                "matrix sizes {} and {} differ",
                self.p(),
                other.p()
            )));
        }
        Ok(SymMatrix {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            entries: &self.entries * s,
        }
    }

    pub fn matvec(&self, v: &Array1<f64>) -> Array1<f64> {
        self.entries.dot(v)
    }
}

/// An eigenvalue together with a unit eigenvector.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: Array1<f64>,
}

/// Weighted scatter matrix sum_i w_i (X_i - mu)(X_i - mu)^T.
pub fn weighted_scatter(
    data: &Dataset,
    w: &WeightVector,
    mu: &Array1<f64>,
) -> Result<SymMatrix, LinalgError> {
    if w.len() != data.n() {
        return Err(LinalgError::DimensionMismatch(format!(
            "weight length {} vs n = {}",
            w.len(),
            data.n()
        )));
    }
    if mu.len() != data.p() {
        return Err(LinalgError::DimensionMismatch(format!(
            "center dimension {} vs p = {}",
            mu.len(),
            data.p()
        )));
    }
    let p = data.p();
    let mut s = Array2::zeros((p, p));
    let mut d = Array1::zeros(p);
    for (i, row) in data.points().rows().into_iter().enumerate() {
        let wi = w.weights()[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..p {
            d[j] = row[j] - mu[j];
        }
        for a in 0..p {
            let wda = wi * d[a];
            for b in a..p {
                s[(a, b)] += wda * d[b];
            }
        }
    }
    for a in 0..p {
        for b in (a + 1)..p {
            s[(b, a)] = s[(a, b)];
        }
    }
    Ok(SymMatrix { entries: s })
}

// Deterministic start vector: a ramp breaks coordinate symmetry so the
// start is never orthogonal to an axis-aligned eigenvector.
fn start_vector(p: usize, attempt: usize) -> Array1<f64> {
    let mut v = Array1::zeros(p);
    match attempt {
        0 => {
            for i in 0..p {
                v[i] = 1.0 + 0.5 * (i as f64 + 1.0) / p as f64;
            }
        }
        _ => {
            // xorshift-style scramble keyed by attempt; still deterministic
            let mut state: u64 = 0x9e37_79b9_7f4a_7c15 ^ (attempt as u64).wrapping_mul(0xff51);
            for i in 0..p {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                v[i] = (state % 2000) as f64 / 1000.0 - 1.0 + 1e-3;
            }
        }
    }
    let norm = v.dot(&v).sqrt();
    v / norm
}

fn canonicalize_sign(v: &mut Array1<f64>) {
    for &x in v.iter() {
        if x.abs() > 1e-14 {
            if x < 0.0 {
                v.mapv_inplace(|y| -y);
            }
            return;
        }
    }
}

/// Largest eigenvalue and a matching unit eigenvector, by shifted power
/// iteration from a deterministic start (optionally warm-started).
///
/// On success, |lambda - lambda_max(S)| and ||S v - lambda v|| are both below
/// tol * max(1, ||S||_F). On budget exhaustion the best iterate is returned
/// inside [`LinalgError::NoConvergence`] so callers may accept it.
pub fn top_eigenpair(s: &SymMatrix, tol: f64, max_iter: usize) -> Result<EigPair, LinalgError> {
    top_eigenpair_from(s, None, tol, max_iter)
}

pub fn top_eigenpair_from(
    s: &SymMatrix,
    warm_start: Option<&Array1<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<EigPair, LinalgError> {
    let p = s.p();
    if p == 1 {
        return Ok(EigPair {
            value: s.entries[(0, 0)],
            vector: Array1::ones(1),
        });
    }
    let fro = s.frobenius_norm();
    let scale = fro.max(1.0);
    if fro == 0.0 {
        let mut v = Array1::zeros(p);
        v[0] = 1.0;
        return Ok(EigPair {
            value: 0.0,
            vector: v,
        });
    }

    let mut best: Option<(f64, Array1<f64>, f64)> = None;
    let starts: Vec<Array1<f64>> = match warm_start {
        Some(v0) if v0.len() == p && v0.dot(v0) > 0.0 => {
            vec![v0 / v0.dot(v0).sqrt(), start_vector(p, 0), start_vector(p, 1)]
        }
        _ => vec![start_vector(p, 0), start_vector(p, 1)],
    };

    for v0 in starts {
        let mut v = v0;
        for _ in 0..max_iter {
            // one step of power iteration on S + fro * I
            let mut next = s.matvec(&v);
            next.scaled_add(fro, &v);
            let norm = next.dot(&next).sqrt();
            if norm == 0.0 {
                // v is in the kernel of the shifted matrix: eigenvalue -fro
                break;
            }
            v = next / norm;

            let sv = s.matvec(&v);
            let lambda = v.dot(&sv);
            let mut resid_vec = sv;
            resid_vec.scaled_add(-lambda, &v);
            let residual = resid_vec.dot(&resid_vec).sqrt();
            if best.as_ref().is_none_or(|b| residual < b.2) {
                best = Some((lambda, v.clone(), residual));
            }
            if residual <= tol * scale {
                let (value, mut vector, _) = best.unwrap();
                canonicalize_sign(&mut vector);
                let norm = vector.dot(&vector).sqrt();
                vector /= norm;
                return Ok(EigPair { value, vector });
            }
        }
    }

    let (value, mut vector, residual) = best.expect("at least one iteration ran");
    canonicalize_sign(&mut vector);
    Err(LinalgError::NoConvergence {
        value,
        vector,
        residual,
    })
}

/// Default iteration budget: 10 p log(1/tol).
pub fn default_eig_iters(p: usize, tol: f64) -> usize {
    let iters = 10.0 * p as f64 * (1.0 / tol).ln();
    iters.ceil().max(64.0) as usize
}

/// lambda_max(S), accepting the best iterate on budget exhaustion.
pub fn lambda_max(s: &SymMatrix, tol: f64) -> f64 {
    match top_eigenpair(s, tol, default_eig_iters(s.p(), tol)) {
        Ok(pair) => pair.value,
        Err(LinalgError::NoConvergence { value, .. }) => value,
        Err(_) => unreachable!("top_eigenpair only fails with NoConvergence"),
    }
}

/// Positive part of the largest eigenvalue: max(lambda_max(S), 0).
pub fn lambda_max_plus(s: &SymMatrix, tol: f64) -> f64 {
    lambda_max(s, tol).max(0.0)
}

/// Smallest eigenvalue, via lambda_min(S) = -lambda_max(-S).
pub fn lambda_min(s: &SymMatrix, tol: f64) -> f64 {
    -lambda_max(&s.scale(-1.0), tol)
}

/// Eigenpair of the smallest eigenvalue (used by the smallest-eigenvector
/// contamination scheme). The eigenvector sign is canonical: first
/// non-negligible coordinate nonnegative.
pub fn bottom_eigenpair(s: &SymMatrix, tol: f64, max_iter: usize) -> Result<EigPair, LinalgError> {
    let neg = s.scale(-1.0);
    let pair = top_eigenpair(&neg, tol, max_iter)?;
    Ok(EigPair {
        value: -pair.value,
        vector: pair.vector,
    })
}

/// Full eigendecomposition of a symmetric matrix by repeated extraction and
/// deflation of the leading eigenpair. Adequate for the small dimensions this
/// crate targets; eigenvalues are returned in the order extracted (decreasing
/// in absolute value of the shifted spectrum, i.e. decreasing eigenvalue).
pub fn sym_eigen(s: &SymMatrix, tol: f64) -> Vec<EigPair> {
    let p = s.p();
    let mut remaining = s.clone();
    let mut pairs = Vec::with_capacity(p);
    for _ in 0..p {
        let pair = match top_eigenpair(&remaining, tol, default_eig_iters(p, tol) * 4) {
            Ok(pair) => pair,
            Err(LinalgError::NoConvergence { value, vector, .. }) => EigPair { value, vector },
            Err(_) => unreachable!(),
        };
        // deflate: S <- S - lambda v v^T
        for a in 0..p {
            for b in 0..p {
                remaining.entries[(a, b)] -= pair.value * pair.vector[a] * pair.vector[b];
            }
        }
        pairs.push(pair);
    }
    pairs
}

/// Symmetric PSD square root. Negative eigenvalues within roundoff of zero
/// are clamped.
pub fn sym_sqrt(s: &SymMatrix, tol: f64) -> SymMatrix {
    let p = s.p();
    let mut root = Array2::zeros((p, p));
    for pair in sym_eigen(s, tol) {
        let lam = pair.value.max(0.0).sqrt();
        if lam == 0.0 {
            continue;
        }
        for a in 0..p {
            for b in 0..p {
                root[(a, b)] += lam * pair.vector[a] * pair.vector[b];
            }
        }
    }
    SymMatrix { entries: root }
}
