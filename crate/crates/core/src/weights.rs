//! The spectral objective G(w, mu), its subgradient in w, and the inner
//! convex solver over the capped simplex.
//!
//! For a known covariance sigma,
//!     G(w, mu) = lambda_max_+( sum_i w_i (X_i - mu)^{x2} - sigma ),
//! and for the unknown-covariance variants the sigma term is dropped (the
//! minimizer over w is then independent of any isotropic sigma). G is convex
//! in w as a pointwise maximum of affine functions of w; the minimization is
//! representable as a semidefinite program, but a projected subgradient
//! method over {w in simplex : w_i <= cap} is used instead. Approximate inner
//! solutions are accurate enough for the outer recursion.

use ndarray::Array1;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::project_capped_simplex;
use crate::linalg::{self, top_eigenpair_from, LinalgError, SymMatrix};
use crate::types::{CovarianceSpec, Dataset, TypeError, WeightVector};

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("subset carries zero weight mass")]
    ZeroMassSubset,
    #[error("the stopping certificate requires a known covariance")]
    UnsupportedForUnknownCovariance,
    #[error("epsilon {0} is not in [0, 1/2)")]
    EpsilonOutOfRange(f64),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Step-size rule for the projected subgradient method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepRule {
    /// step = (G(w) - target) / ||g||^2 with the running optimal-value
    /// estimate target = max(0, best - best/sqrt(t)). The slack shrinks into
    /// the best iterate, so the rule needs no prior knowledge of min G and
    /// still exploits that G is nonnegative.
    PolyakWithEstimate,
    /// step = D / (L sqrt(t)) with D = sqrt(2) (simplex diameter bound) and
    /// L = max_i ||X_i - mu||^2 (subgradient bound).
    Diminishing,
}

/// Configuration of the inner weight solver.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub max_steps: usize,
    pub step_rule: StepRule,
    /// Stop early once the step-rule optimality-gap bound falls below this.
    /// 0 disables the gap-based stop; the outer loop then substitutes
    /// [`SolverConfig::default_target_gap`].
    pub target_gap: f64,
    pub eig_tol: f64,
}

impl SolverConfig {
    /// Default target gap echoing the approximate-solve license:
    /// 0.1 (sqrt(p/n) + sqrt(eps)) scaled by the operator norm of sigma.
    pub fn default_target_gap(n: usize, p: usize, epsilon: f64, sigma_op: f64) -> f64 {
        0.1 * ((p as f64 / n as f64).sqrt() + epsilon.sqrt()) * sigma_op.max(1e-12)
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_steps: 500,
            step_rule: StepRule::Diminishing,
            target_gap: 0.0,
            eig_tol: 1e-9,
        }
    }
}

/// Result of one inner weight minimization.
#[derive(Debug, Clone)]
pub struct WeightSolve {
    pub weights: WeightVector,
    pub objective: f64,
    /// Upper bound on objective - min objective implied by the step rule;
    /// infinity when the rule gives no usable bound at exit.
    pub gap_bound: f64,
    pub steps_taken: usize,
    /// True when max_steps ran out before the gap bound reached target_gap.
    pub budget_exhausted: bool,
}

fn check_dims(data: &Dataset, w: &WeightVector, mu: &Array1<f64>) -> Result<(), WeightsError> {
    if w.len() != data.n() {
        return Err(WeightsError::DimensionMismatch(format!(
            "weight length {} vs n = {}",
            w.len(),
            data.n()
        )));
    }
    if mu.len() != data.p() {
        return Err(WeightsError::DimensionMismatch(format!(
            "center dimension {} vs p = {}",
            mu.len(),
            data.p()
        )));
    }
    Ok(())
}

fn deviation_matrix(
    data: &Dataset,
    w: &WeightVector,
    mu: &Array1<f64>,
    cov: &CovarianceSpec,
) -> Result<SymMatrix, WeightsError> {
    let scatter = linalg::weighted_scatter(data, w, mu)?;
    match cov {
        CovarianceSpec::Known(sigma) => {
            if sigma.p() != data.p() {
                return Err(WeightsError::DimensionMismatch(format!(
                    "sigma is {}x{}, data dimension is {}",
                    sigma.p(),
                    sigma.p(),
                    data.p()
                )));
            }
            Ok(scatter.sub(sigma)?)
        }
        CovarianceSpec::UnknownIsotropic | CovarianceSpec::UnknownArbitrary => Ok(scatter),
    }
}

/// The objective G(w, mu). Known covariance: lambda_max_+(scatter - sigma).
/// Unknown variants: lambda_max(scatter), which is already nonnegative.
pub fn objective_g(
    data: &Dataset,
    w: &WeightVector,
    mu: &Array1<f64>,
    cov: &CovarianceSpec,
    eig_tol: f64,
) -> Result<f64, WeightsError> {
    check_dims(data, w, mu)?;
    let m = deviation_matrix(data, w, mu, cov)?;
    Ok(linalg::lambda_max_plus(&m, eig_tol))
}

/// A subgradient of G in w: g_i = (v^T (X_i - mu))^2 with v a top eigenvector
/// of the deviation matrix. On the flat region of the known-covariance
/// objective (lambda_max < 0) the zero vector is returned.
pub fn subgradient_g(
    data: &Dataset,
    w: &WeightVector,
    mu: &Array1<f64>,
    cov: &CovarianceSpec,
    eig_tol: f64,
) -> Result<Array1<f64>, WeightsError> {
    check_dims(data, w, mu)?;
    let m = deviation_matrix(data, w, mu, cov)?;
    let pair = accept_best(top_eigenpair_from(
        &m,
        None,
        eig_tol,
        linalg::default_eig_iters(m.p(), eig_tol),
    ));
    if cov.is_known() && pair.value < 0.0 {
        return Ok(Array1::zeros(data.n()));
    }
    Ok(directional_gains(data, mu, &pair.vector))
}

fn directional_gains(data: &Dataset, mu: &Array1<f64>, v: &Array1<f64>) -> Array1<f64> {
    let mut g = Array1::zeros(data.n());
    for (i, row) in data.points().rows().into_iter().enumerate() {
        let mut dot = 0.0;
        for k in 0..data.p() {
            dot += v[k] * (row[k] - mu[k]);
        }
        g[i] = dot * dot;
    }
    g
}

fn accept_best(res: Result<linalg::EigPair, LinalgError>) -> linalg::EigPair {
    match res {
        Ok(pair) => pair,
        Err(LinalgError::NoConvergence { value, vector, .. }) => linalg::EigPair { value, vector },
        Err(e) => panic!("unexpected eigensolver failure: {e}"),
    }
}

/// Minimizes w -> G(w, mu) over W_n(eps) = {w in simplex : w_i <= cap} with
/// cap = 1/(n - floor(n eps)), by projected subgradient descent from the
/// uniform vector with best-iterate tracking. The returned objective never
/// exceeds G(uniform, mu). eps = 0 short-circuits: the feasible set is the
/// uniform singleton.
pub fn minimize_weights(
    data: &Dataset,
    mu: &Array1<f64>,
    cov: &CovarianceSpec,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<WeightSolve, WeightsError> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(WeightsError::EpsilonOutOfRange(epsilon));
    }
    let n = data.n();
    let uniform = WeightVector::uniform(n)?;
    if epsilon == 0.0 {
        let objective = objective_g(data, &uniform, mu, cov, cfg.eig_tol)?;
        return Ok(WeightSolve {
            weights: uniform,
            objective,
            gap_bound: 0.0,
            steps_taken: 0,
            budget_exhausted: false,
        });
    }
    check_dims(data, &uniform, mu)?;
    let cap = WeightVector::cap_for_epsilon(n, epsilon);

    // subgradient norm bound for the diminishing rule
    let lipschitz = data
        .points()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(mu.iter())
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let diameter = 2.0f64.sqrt();

    let mut w = uniform;
    let mut best_w = w.clone();
    let mut best_obj = f64::INFINITY;
    let mut warm: Option<Array1<f64>> = None;
    let mut reached_target = false;
    let mut steps_taken = cfg.max_steps;
    let mut gap_bound = f64::INFINITY;

    for t in 1..=cfg.max_steps {
        let m = deviation_matrix(data, &w, mu, cov)?;
        let pair = accept_best(top_eigenpair_from(
            &m,
            warm.as_ref(),
            cfg.eig_tol,
            linalg::default_eig_iters(m.p(), cfg.eig_tol),
        ));
        warm = Some(pair.vector.clone());
        // the scatter is PSD, so for the unknown variants the clamp only
        // absorbs rounding noise
        let obj = pair.value.max(0.0);
        if obj < best_obj {
            best_obj = obj;
            best_w = w.clone();
        }

        // flat region: G = 0 is the global minimum
        if obj <= 0.0 {
            gap_bound = 0.0;
            steps_taken = t;
            reached_target = true;
            break;
        }

        let g = if cov.is_known() && pair.value < 0.0 {
            Array1::zeros(n)
        } else {
            directional_gains(data, mu, &pair.vector)
        };
        let gnorm2 = g.dot(&g);
        if gnorm2 == 0.0 {
            gap_bound = 0.0;
            steps_taken = t;
            reached_target = true;
            break;
        }

        let step = match cfg.step_rule {
            StepRule::PolyakWithEstimate => {
                let target = (best_obj - best_obj.abs() / (t as f64).sqrt()).max(0.0);
                (obj - target).max(0.0) / gnorm2
            }
            StepRule::Diminishing => diameter / (lipschitz * (t as f64).sqrt()),
        };

        // standard O(1/sqrt t) bound for the diminishing rule:
        // best gap <= D L (2 + ln t) / (4 (sqrt(t+1) - 1))
        if cfg.step_rule == StepRule::Diminishing {
            let denom = 4.0 * ((t as f64 + 1.0).sqrt() - 1.0);
            if denom > 0.0 {
                gap_bound = diameter * lipschitz * (2.0 + (t as f64).ln()) / denom;
            }
            if gap_bound <= cfg.target_gap {
                steps_taken = t;
                reached_target = true;
                break;
            }
        } else if best_obj <= cfg.target_gap {
            // Polyak rule: G >= 0 makes the objective itself a gap bound
            gap_bound = best_obj;
            steps_taken = t;
            reached_target = true;
            break;
        }

        let shifted: Vec<f64> = w
            .weights()
            .iter()
            .zip(g.iter())
            .map(|(wi, gi)| wi - step * gi)
            .collect();
        w = project_capped_simplex(&shifted, cap)?;
    }

    if cfg.step_rule == StepRule::PolyakWithEstimate && gap_bound.is_infinite() {
        gap_bound = best_obj;
    }
    // Only a positive target makes budget exhaustion meaningful: with the
    // default target_gap = 0 the solver is expected to spend its full budget.
    let budget_exhausted = cfg.target_gap > 0.0 && !reached_target;

    Ok(WeightSolve {
        weights: best_w,
        objective: best_obj,
        gap_bound,
        steps_taken,
        budget_exhausted,
    })
}

/// Conditional probability of w given a subset I: weights inside I are
/// rescaled by the subset mass, weights outside are zeroed.
pub fn conditional_weights(w: &WeightVector, subset: &[usize]) -> Result<WeightVector, WeightsError> {
    let mut mass = 0.0;
    for &i in subset {
        mass += w.weights()[i];
    }
    if mass <= 0.0 {
        return Err(WeightsError::ZeroMassSubset);
    }
    let mut out = vec![0.0; w.len()];
    for &i in subset {
        out[i] = w.weights()[i] / mass;
    }
    Ok(WeightVector::new(out, None)?)
}

/// Early-stopping certificate for the known-covariance loop: true when
/// lambda_max(scatter(w, weighted mean) - sigma) <= eps. The signed largest
/// eigenvalue is used (no clamp at zero).
pub fn stopping_certificate(
    data: &Dataset,
    w: &WeightVector,
    cov: &CovarianceSpec,
    epsilon: f64,
    eig_tol: f64,
) -> Result<bool, WeightsError> {
    let CovarianceSpec::Known(sigma) = cov else {
        return Err(WeightsError::UnsupportedForUnknownCovariance);
    };
    let mean = data.weighted_mean(w);
    let scatter = linalg::weighted_scatter(data, w, &mean)?;
    let dev = scatter.sub(sigma)?;
    Ok(linalg::lambda_max(&dev, eig_tol) <= epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn two_point_data() -> Dataset {
        Dataset::new(array![[1.0, 0.0], [-1.0, 0.0]]).unwrap()
    }

    #[test]
    fn objective_zero_for_centered_point_with_identity_sigma() {
        let d = Dataset::new(array![[0.0, 0.0]]).unwrap();
        let w = WeightVector::new(vec![1.0], None).unwrap();
        let cov = CovarianceSpec::Known(SymMatrix::identity(2));
        let g = objective_g(&d, &w, &array![0.0, 0.0], &cov, 1e-10).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn objective_against_2x2_oracle() {
        // scatter = diag(1, 0); with sigma = 0 the top eigenvalue is 1
        let d = two_point_data();
        let w = WeightVector::uniform(2).unwrap();
        let zero_sigma = CovarianceSpec::Known(SymMatrix::zeros(2));
        let g = objective_g(&d, &w, &array![0.0, 0.0], &zero_sigma, 1e-11).unwrap();
        assert_abs_diff_eq!(g, 1.0, epsilon = 1e-9);
        let g2 = objective_g(
            &d,
            &w,
            &array![0.0, 0.0],
            &CovarianceSpec::UnknownArbitrary,
            1e-11,
        )
        .unwrap();
        assert_abs_diff_eq!(g2, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn subgradient_zero_on_flat_region() {
        let d = two_point_data();
        let w = WeightVector::uniform(2).unwrap();
        // scatter - sigma = diag(1, 0) - 5 I is negative definite
        let cov = CovarianceSpec::Known(SymMatrix::scaled_identity(2, 5.0));
        let g = subgradient_g(&d, &w, &array![0.0, 0.0], &cov, 1e-10).unwrap();
        assert_eq!(g, array![0.0, 0.0]);
    }

    #[test]
    fn subgradient_matches_2x2_oracle() {
        let d = two_point_data();
        let w = WeightVector::uniform(2).unwrap();
        let cov = CovarianceSpec::Known(SymMatrix::zeros(2));
        let g = subgradient_g(&d, &w, &array![0.0, 0.0], &cov, 1e-11).unwrap();
        // v = +-e1, so g_i = (X_i . e1)^2 = 1 for both points
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn subgradient_with_forced_direction() {
        let d = Dataset::new(array![[2.0, 0.0], [0.0, 0.0]]).unwrap();
        let w = WeightVector::new(vec![1.0, 0.0], None).unwrap();
        let cov = CovarianceSpec::Known(SymMatrix::zeros(2));
        let g = subgradient_g(&d, &w, &array![0.0, 0.0], &cov, 1e-11).unwrap();
        assert_abs_diff_eq!(g[0], 4.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn epsilon_zero_returns_uniform() {
        let d = two_point_data();
        let cov = CovarianceSpec::Known(SymMatrix::identity(2));
        let solve =
            minimize_weights(&d, &array![0.0, 0.0], &cov, 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(solve.weights.weights(), &array![0.5, 0.5]);
        assert_eq!(solve.steps_taken, 0);
    }

    #[test]
    fn solver_zeroes_out_far_outlier() {
        // n = 3, p = 1, points {0, 0, 100}, sigma = 1, eps = 1/3 -> cap = 1/2.
        // Putting all mass on the two zeros gives scatter - sigma = -1, G = 0.
        let d = Dataset::new(array![[0.0], [0.0], [100.0]]).unwrap();
        let cov = CovarianceSpec::Known(SymMatrix::identity(1));
        let solve = minimize_weights(
            &d,
            &array![0.0],
            &cov,
            1.0 / 3.0,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(solve.objective, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(solve.weights.weights()[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(solve.weights.weights()[1], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(solve.weights.weights()[2], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn conditional_weights_full_set_unchanged() {
        let w = WeightVector::new(vec![0.25; 4], None).unwrap();
        let c = conditional_weights(&w, &[0, 1, 2, 3]).unwrap();
        assert_eq!(c.weights(), w.weights());
    }

    #[test]
    fn conditional_weights_renormalizes() {
        let w = WeightVector::new(vec![0.25; 4], None).unwrap();
        let c = conditional_weights(&w, &[0, 1]).unwrap();
        assert_eq!(c.weights(), &array![0.5, 0.5, 0.0, 0.0]);

        let w = WeightVector::new(vec![0.1, 0.2, 0.7], None).unwrap();
        let c = conditional_weights(&w, &[1, 2]).unwrap();
        assert_abs_diff_eq!(c.weights()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.weights()[1], 2.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.weights()[2], 7.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn conditional_weights_zero_mass_rejected() {
        let w = WeightVector::new(vec![0.5, 0.5, 0.0], None).unwrap();
        assert!(matches!(
            conditional_weights(&w, &[2]),
            Err(WeightsError::ZeroMassSubset)
        ));
    }

    #[test]
    fn certificate_on_single_point() {
        let d = Dataset::new(array![[0.0, 0.0]]).unwrap();
        let w = WeightVector::new(vec![1.0], None).unwrap();
        let cov = CovarianceSpec::Known(SymMatrix::identity(2));
        assert!(stopping_certificate(&d, &w, &cov, 0.0, 1e-10).unwrap());
    }

    #[test]
    fn certificate_against_2x2_oracle() {
        let d = two_point_data();
        let w = WeightVector::uniform(2).unwrap();
        // weighted mean is 0, scatter = diag(1, 0)
        let zero_sigma = CovarianceSpec::Known(SymMatrix::zeros(2));
        assert!(!stopping_certificate(&d, &w, &zero_sigma, 0.5, 1e-11).unwrap());
        let id_sigma = CovarianceSpec::Known(SymMatrix::identity(2));
        assert!(stopping_certificate(&d, &w, &id_sigma, 0.0, 1e-11).unwrap());
    }

    #[test]
    fn certificate_needs_known_covariance() {
        let d = two_point_data();
        let w = WeightVector::uniform(2).unwrap();
        assert!(matches!(
            stopping_certificate(&d, &w, &CovarianceSpec::UnknownIsotropic, 0.1, 1e-10),
            Err(WeightsError::UnsupportedForUnknownCovariance)
        ));
    }
}
