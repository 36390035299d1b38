//! Robust estimation of a multivariate mean under adversarial contamination.
//!
//! The central estimator is an iteratively reweighted (IR) mean: starting from
//! the geometric median, each iteration assigns a probability weight to every
//! observation by minimizing the largest eigenvalue of the weighted scatter
//! matrix's deviation from the reference covariance, then re-centers at the
//! weighted mean. Outliers end up carrying (near-)zero weight.
//!
//! Modules:
//! - [`types`]: datasets, weight vectors, covariance declarations, reports.
//! - [`linalg`]: dense symmetric kernels (weighted scatter, extreme eigenpairs).
//! - [`geometry`]: geometric median, capped-simplex projection, ball intersection.
//! - [`weights`]: the spectral objective, its subgradient, and the inner solver.
//! - [`estimator`]: the outer IR loop for known and unknown covariance.
//! - [`adaptive`]: Lepski-style adaptation when the contamination rate is unknown.
//! - [`simulate`]: contamination samplers, baseline estimators, benchmark harness.

pub mod adaptive;
pub mod estimator;
pub mod geometry;
pub mod linalg;
pub mod simulate;
pub mod types;
pub mod weights;

pub use adaptive::{adaptive_ir_mean, calibrate_a5, epsilon_grid, lepski_radius, LepskiConfig};
pub use estimator::{
    alpha, breakdown_threshold, effective_rank, ir_mean, iteration_count, IRConfig,
};
pub use geometry::{balls_intersection_point, geometric_median, project_capped_simplex};
pub use linalg::SymMatrix;
pub use simulate::{run_experiment, sample_gac, sample_sgac_bounded, ContaminationSpec};
pub use types::{ContaminatedSample, CovarianceSpec, Dataset, EstimateReport, WeightVector};
pub use weights::{minimize_weights, objective_g, SolverConfig};
