//! The outer iteratively-reweighted loop.
//!
//! Starting from the geometric median, each of K iterations solves the inner
//! weight problem at the current center and re-centers at the weighted mean.
//! K is chosen so that the contraction factor alpha_eps drives the initial
//! error below the contamination level; beyond the rate-breakdown threshold
//! (5 - sqrt 5)/10 the factor reaches 1, K collapses to zero and the
//! estimator coincides with the geometric median.

use thiserror::Error;

use crate::geometry::geometric_median;
use crate::linalg::{self, SymMatrix};
use crate::types::{CovarianceSpec, Dataset, EstimateReport, IterationRecord, TypeError};
use crate::weights::{minimize_weights, stopping_certificate, SolverConfig, WeightsError};

/// Iteration budget and tolerance of the initial geometric-median solve.
const GM_TOL: f64 = 1e-10;
const GM_MAX_ITER: usize = 10_000;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("epsilon {0} is not in [0, 1/2)")]
    EpsilonOutOfRange(f64),
    #[error("effective rank of the zero matrix is undefined")]
    ZeroMatrix,
    #[error("effective rank {0} must be >= 1")]
    RankOutOfRange(f64),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Configuration of one IR run.
#[derive(Debug, Clone)]
pub struct IRConfig {
    pub epsilon: f64,
    pub cov: CovarianceSpec,
    pub solver: SolverConfig,
    pub use_early_stop: bool,
    /// Overrides the iteration-count formula when set (used e.g. to force 30
    /// iterations past the breakdown threshold in the sweep experiment).
    pub k_override: Option<usize>,
}

impl IRConfig {
    pub fn new(epsilon: f64, cov: CovarianceSpec) -> Result<Self, EstimatorError> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(EstimatorError::EpsilonOutOfRange(epsilon));
        }
        Ok(Self {
            epsilon,
            cov,
            solver: SolverConfig::default(),
            use_early_stop: false,
            k_override: None,
        })
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_early_stop(mut self, on: bool) -> Self {
        self.use_early_stop = on;
        self
    }

    pub fn with_k_override(mut self, k: Option<usize>) -> Self {
        self.k_override = k;
        self
    }
}

/// Contraction factor alpha_eps = sqrt(eps (1 - eps)) / (1 - 2 eps).
pub fn alpha(epsilon: f64) -> Result<f64, EstimatorError> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(EstimatorError::EpsilonOutOfRange(epsilon));
    }
    Ok((epsilon * (1.0 - epsilon)).sqrt() / (1.0 - 2.0 * epsilon))
}

/// The contamination rate at which alpha_eps reaches 1: (5 - sqrt 5)/10.
/// Equivalently, the smaller root of 5 t^2 - 5 t + 1 = 0.
pub fn breakdown_threshold() -> f64 {
    (5.0 - 5.0f64.sqrt()) / 10.0
}

/// Effective rank Tr(sigma) / lambda_max(sigma) of a nonzero PSD matrix.
pub fn effective_rank(sigma: &SymMatrix) -> Result<f64, EstimatorError> {
    let lam = linalg::lambda_max(sigma, 1e-12);
    if lam <= 0.0 {
        return Err(EstimatorError::ZeroMatrix);
    }
    Ok(sigma.trace() / lam)
}

/// Number of outer iterations
///     K = max(0, ceil( (log(4r) - 2 log(eps(1-2eps)))
///                      / (2 log(1-2eps) - log eps - log(1-eps)) )).
/// Returns 0 for eps at or past the breakdown threshold, where the recursion
/// no longer contracts and the estimator stays at the geometric median.
pub fn iteration_count(epsilon: f64, r: f64) -> Result<usize, EstimatorError> {
    if epsilon <= 0.0 || epsilon >= 0.5 {
        return Err(EstimatorError::EpsilonOutOfRange(epsilon));
    }
    if r < 1.0 {
        return Err(EstimatorError::RankOutOfRange(r));
    }
    if epsilon >= breakdown_threshold() {
        return Ok(0);
    }
    let num = (4.0 * r).ln() - 2.0 * (epsilon * (1.0 - 2.0 * epsilon)).ln();
    let den = 2.0 * (1.0 - 2.0 * epsilon).ln() - epsilon.ln() - (1.0 - epsilon).ln();
    let k = (num / den).ceil();
    Ok(k.max(0.0) as usize)
}

/// Runs the IR recursion and returns the full per-iteration trace.
///
/// The unknown-covariance variants use the same loop with the sigma term
/// dropped from the objective and the ambient dimension in place of the
/// effective rank. Inner-solver budget exhaustion is recorded per iteration
/// in the trace, never raised.
pub fn ir_mean(data: &Dataset, cfg: &IRConfig) -> Result<EstimateReport, EstimatorError> {
    if !(0.0..0.5).contains(&cfg.epsilon) {
        return Err(EstimatorError::EpsilonOutOfRange(cfg.epsilon));
    }
    cfg.cov.validate()?;

    // eps = 0: the feasible set is the uniform singleton at every iteration,
    // so every weighted mean equals the sample mean; the K formula diverges
    // and is bypassed.
    if cfg.epsilon == 0.0 {
        let mean = data.mean().to_vec();
        return Ok(EstimateReport {
            estimate: mean.clone(),
            initial_estimate: mean,
            iterations_run: 0,
            k_budget: 0,
            trace: vec![],
            stopped_early: false,
        });
    }

    let k_budget = match cfg.k_override {
        Some(k) => k,
        None => {
            let r = match &cfg.cov {
                CovarianceSpec::Known(sigma) => effective_rank(sigma)?,
                _ => data.p() as f64,
            };
            iteration_count(cfg.epsilon, r.max(1.0))?
        }
    };

    // an unset target gap gets the documented default, scaled by the
    // operator norm of a known covariance
    let mut solver = cfg.solver.clone();
    if solver.target_gap == 0.0 {
        let sigma_op = match &cfg.cov {
            CovarianceSpec::Known(sigma) => linalg::lambda_max(sigma, solver.eig_tol).max(0.0),
            _ => 1.0,
        };
        solver.target_gap =
            SolverConfig::default_target_gap(data.n(), data.p(), cfg.epsilon, sigma_op);
    }

    let gm = geometric_median(data, GM_TOL, GM_MAX_ITER);
    let mut center = gm.point.clone();
    let mut trace: Vec<IterationRecord> = Vec::with_capacity(k_budget);
    let mut stopped_early = false;

    for _ in 0..k_budget {
        let solve = minimize_weights(data, &center, &cfg.cov, cfg.epsilon, &solver)?;
        center = data.weighted_mean(&solve.weights);
        trace.push(IterationRecord {
            objective_value: solve.objective,
            weights: solve.weights.clone(),
            estimate: center.to_vec(),
            solver_budget_exhausted: solve.budget_exhausted,
        });
        if cfg.use_early_stop
            && cfg.cov.is_known()
            && stopping_certificate(data, &solve.weights, &cfg.cov, cfg.epsilon, solver.eig_tol)?
        {
            stopped_early = true;
            break;
        }
    }

    Ok(EstimateReport {
        estimate: center.to_vec(),
        initial_estimate: gm.point.to_vec(),
        iterations_run: trace.len(),
        k_budget,
        trace,
        stopped_early,
    })
}
