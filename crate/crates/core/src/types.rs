//! Domain types shared by every other module.
//!
//! All types here are immutable after construction and validate their
//! invariants in the constructor, so downstream code never re-checks them.

use ndarray::{Array1, Array2};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::SymMatrix;

/// Construction-time tolerance on the weight sum: inputs farther than this
/// from 1 are rejected rather than renormalized.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Slack allowed on the per-coordinate cap check.
pub const CAP_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("dataset must have at least one row and one column")]
    EmptyDataset,
    #[error("dataset contains a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("weight vector is empty")]
    EmptyVector,
    #[error("weight {value} at index {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    SumNotOne { sum: f64 },
    #[error("weight {value} at index {index} exceeds cap {cap}")]
    CapViolated { index: usize, value: f64, cap: f64 },
    #[error("cap {0} is outside (0, 1]")]
    InvalidCap(f64),
    #[error("inlier mask length {mask} does not match sample size {n}")]
    MaskLengthMismatch { mask: usize, n: usize },
    #[error("true mean has dimension {got}, expected {expected}")]
    MeanDimensionMismatch { got: usize, expected: usize },
    #[error("contamination fraction {0} is not in [0, 1/2)")]
    EpsilonOutOfRange(f64),
    #[error("known covariance matrix is not positive semidefinite (lambda_min = {0})")]
    CovarianceNotPsd(f64),
}

/// An n-by-p point cloud of observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
}

impl Dataset {
    pub fn new(points: Array2<f64>) -> Result<Self, TypeError> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(TypeError::EmptyDataset);
        }
        for ((i, j), v) in points.indexed_iter() {
            if !v.is_finite() {
                return Err(TypeError::NonFiniteEntry { row: i, col: j });
            }
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TypeError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(TypeError::EmptyDataset);
        }
        let n = rows.len();
        let p = rows[0].len();
        let mut points = Array2::zeros((n, p));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(TypeError::EmptyDataset);
            }
            for (j, &v) in row.iter().enumerate() {
                points[(i, j)] = v;
            }
        }
        Self::new(points)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    /// Ambient dimension.
    pub fn p(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Arithmetic mean of all rows.
    pub fn mean(&self) -> Array1<f64> {
        let mut m = Array1::zeros(self.p());
        for row in self.points.rows() {
            m += &row;
        }
        m / self.n() as f64
    }

    /// Weighted mean sum_i w_i X_i.
    pub fn weighted_mean(&self, w: &WeightVector) -> Array1<f64> {
        let mut m = Array1::zeros(self.p());
        for (i, row) in self.points.rows().into_iter().enumerate() {
            m.scaled_add(w.weights()[i], &row);
        }
        m
    }
}

/// A point of the probability simplex, optionally with a per-coordinate cap.
///
/// Inputs whose sum deviates from 1 by at most [`WEIGHT_SUM_TOL`] are rescaled
/// to exact unit sum; larger deviations are rejected outright.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    weights: Array1<f64>,
    cap: Option<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, cap: Option<f64>) -> Result<Self, TypeError> {
        if weights.is_empty() {
            return Err(TypeError::EmptyVector);
        }
        if let Some(c) = cap {
            if !(c > 0.0 && c <= 1.0) {
                return Err(TypeError::InvalidCap(c));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if w < 0.0 || w.is_nan() {
                return Err(TypeError::NegativeWeight { index: i, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(TypeError::SumNotOne { sum });
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        if let Some(c) = cap {
            for (i, &w) in weights.iter().enumerate() {
                if w > c + CAP_TOL {
                    return Err(TypeError::CapViolated {
                        index: i,
                        value: w,
                        cap: c,
                    });
                }
            }
        }
        Ok(Self {
            weights: Array1::from(weights),
            cap,
        })
    }

    /// Uniform weights on all n points.
    pub fn uniform(n: usize) -> Result<Self, TypeError> {
        Self::new(vec![1.0 / n as f64; n], None)
    }

    /// Uniform weights on a subset J of {0..n}, zero elsewhere.
    pub fn uniform_on(subset: &[usize], n: usize) -> Result<Self, TypeError> {
        if subset.is_empty() {
            return Err(TypeError::EmptyVector);
        }
        let mut w = vec![0.0; n];
        for &i in subset {
            w[i] = 1.0 / subset.len() as f64;
        }
        Self::new(w, None)
    }

    /// The sup-norm cap defining the feasible set for contamination rate
    /// `epsilon`: 1/(n - floor(n*epsilon)). Outlier budgets elsewhere use the
    /// ceiling, so both sides are conservative when n*epsilon is fractional.
    pub fn cap_for_epsilon(n: usize, epsilon: f64) -> f64 {
        let removed = (n as f64 * epsilon).floor() as usize;
        1.0 / (n - removed) as f64
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Declares what is known about the covariance of the inlier distribution.
///
/// `Known` drives the spectral objective lambda_max_+(scatter - sigma);
/// the unknown variants drop sigma from the objective and replace the
/// effective rank by the ambient dimension in the iteration count.
#[derive(Debug, Clone)]
pub enum CovarianceSpec {
    Known(SymMatrix),
    UnknownIsotropic,
    UnknownArbitrary,
}

impl CovarianceSpec {
    /// Checks positive semidefiniteness of a known covariance
    /// (eigenvalues >= -1e-10). Symmetry is already enforced by [`SymMatrix`].
    pub fn validate(&self) -> Result<(), TypeError> {
        if let CovarianceSpec::Known(sigma) = self {
            let lambda_min = crate::linalg::lambda_min(sigma, 1e-11);
            if lambda_min < -1e-10 {
                return Err(TypeError::CovarianceNotPsd(lambda_min));
            }
        }
        Ok(())
    }

    pub fn is_known(&self) -> bool {
        matches!(self, CovarianceSpec::Known(_))
    }
}

/// A dataset together with the ground truth that produced it; only available
/// in simulation, where it feeds oracle estimators and risk evaluation.
#[derive(Debug, Clone)]
pub struct ContaminatedSample {
    pub data: Dataset,
    pub inlier_mask: Vec<bool>,
    pub true_mean: Array1<f64>,
    pub epsilon_actual: f64,
}

impl ContaminatedSample {
    pub fn new(
        data: Dataset,
        inlier_mask: Vec<bool>,
        true_mean: Array1<f64>,
    ) -> Result<Self, TypeError> {
        let n = data.n();
        if inlier_mask.len() != n {
            return Err(TypeError::MaskLengthMismatch {
                mask: inlier_mask.len(),
                n,
            });
        }
        if true_mean.len() != data.p() {
            return Err(TypeError::MeanDimensionMismatch {
                got: true_mean.len(),
                expected: data.p(),
            });
        }
        let outliers = inlier_mask.iter().filter(|&&b| !b).count();
        let epsilon_actual = outliers as f64 / n as f64;
        if !(0.0..0.5).contains(&epsilon_actual) {
            return Err(TypeError::EpsilonOutOfRange(epsilon_actual));
        }
        Ok(Self {
            data,
            inlier_mask,
            true_mean,
            epsilon_actual,
        })
    }

    pub fn outlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| !b).count()
    }
}

/// One record per outer iteration of the IR loop.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    /// Objective value G achieved by the inner weight solve.
    pub objective_value: f64,
    pub weights: WeightVector,
    /// The re-centered estimate after this iteration.
    pub estimate: Vec<f64>,
    /// True when the inner solver exhausted its step budget before reaching
    /// its target gap. Not fatal; the best iterate is still used.
    pub solver_budget_exhausted: bool,
}

/// Full output of one IR run: the estimate plus the per-iteration trace.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub estimate: Vec<f64>,
    pub initial_estimate: Vec<f64>,
    pub iterations_run: usize,
    pub k_budget: usize,
    pub trace: Vec<IterationRecord>,
    pub stopped_early: bool,
}

impl EstimateReport {
    pub fn estimate_array(&self) -> Array1<f64> {
        Array1::from(self.estimate.clone())
    }

    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective_value).collect()
    }

    /// Estimates mu_hat^0 .. mu_hat^k as rows, initial estimate first.
    pub fn estimate_path(&self) -> Vec<Vec<f64>> {
        let mut path = vec![self.initial_estimate.clone()];
        path.extend(self.trace.iter().map(|r| r.estimate.clone()));
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_weights_validate() {
        let w = WeightVector::new(vec![0.5, 0.5], None).unwrap();
        assert_eq!(w.weights()[0], 0.5);
        assert!(w.cap().is_none());
    }

    #[test]
    fn sum_not_one_rejected() {
        let err = WeightVector::new(vec![0.6, 0.5], None).unwrap_err();
        assert!(matches!(err, TypeError::SumNotOne { .. }));
    }

    #[test]
    fn cap_violation_rejected() {
        let err = WeightVector::new(vec![0.6, 0.4], Some(0.5)).unwrap_err();
        assert!(matches!(err, TypeError::CapViolated { index: 0, .. }));
    }

    #[test]
    fn negative_weight_rejected() {
        let err = WeightVector::new(vec![1.1, -0.1], None).unwrap_err();
        assert!(matches!(err, TypeError::NegativeWeight { index: 1, .. }));
    }

    #[test]
    fn empty_vector_rejected() {
        assert_eq!(
            WeightVector::new(vec![], None).unwrap_err(),
            TypeError::EmptyVector
        );
    }

    #[test]
    fn near_unit_sum_is_rescaled_exactly() {
        let w = WeightVector::new(vec![0.25 + 3e-10, 0.25, 0.25, 0.25], None).unwrap();
        let sum: f64 = w.weights().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn feasible_cap_matches_floor_rule() {
        // n = 10, eps = 0.2: cap = 1/(10 - 2) = 0.125
        assert_eq!(WeightVector::cap_for_epsilon(10, 0.2), 0.125);
        // uniform on any subset of size >= 8 stays under that cap
        let w = WeightVector::uniform_on(&[0, 1, 2, 3, 4, 5, 6, 7], 10).unwrap();
        let capped = WeightVector::new(w.weights().to_vec(), Some(0.125));
        assert!(capped.is_ok());
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let err = Dataset::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, TypeError::NonFiniteEntry { row: 0, col: 1 }));
    }

    #[test]
    fn dataset_weighted_mean() {
        let d = Dataset::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let w = WeightVector::new(vec![0.25, 0.75], None).unwrap();
        let m = d.weighted_mean(&w);
        assert_eq!(m, array![0.25, 0.75]);
    }

    #[test]
    fn contaminated_sample_checks_epsilon() {
        let d = Dataset::new(array![[0.0], [1.0]]).unwrap();
        let err =
            ContaminatedSample::new(d, vec![false, false], Array1::zeros(1)).unwrap_err();
        assert!(matches!(err, TypeError::EpsilonOutOfRange(_)));
    }
}
