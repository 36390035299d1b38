//! Data generation under contamination, baseline estimators, and the
//! Monte-Carlo benchmark harness.
//!
//! Reproducibility: all randomness comes from the counter-based ChaCha8
//! generator. A sampler call consumes one generator seeded with
//! `seed_from_u64(seed)` on stream 0, drawing the n*p standard normals
//! row-major first and any scheme-specific uniforms afterwards, so identical
//! (parameters, seed) give bit-identical samples on every platform.
//! Replications across a seed list are embarrassingly parallel.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::estimator::{breakdown_threshold, ir_mean, EstimatorError, IRConfig};
use crate::geometry::geometric_median;
use crate::linalg::{self, SymMatrix};
use crate::types::{ContaminatedSample, CovarianceSpec, Dataset, TypeError, WeightVector};
use crate::weights::{conditional_weights, WeightsError};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("uniform outlier bounds require a <= b (got a = {a}, b = {b})")]
    BadUniformBounds { a: f64, b: f64 },
    #[error("epsilon {0} is not in [0, 1/2)")]
    EpsilonOutOfRange(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("oracle mean needs at least one inlier")]
    NoInliers,
    #[error("invalid experiment parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// How the adversary replaces observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ContaminationScheme {
    /// Replace the ceil(n eps) points most correlated with the smallest
    /// eigenvector of the sample covariance by sqrt(p) times that vector.
    SmallestEigenvector,
    /// Replace the last ceil(n eps) points by theta_i + noise with theta_i
    /// entries i.i.d. uniform on [a, b].
    UniformOutliers { a: f64, b: f64 },
    /// No replacement.
    None,
}

impl ContaminationScheme {
    pub fn label(&self) -> &'static str {
        match self {
            ContaminationScheme::SmallestEigenvector => "eigen",
            ContaminationScheme::UniformOutliers { .. } => "uniform",
            ContaminationScheme::None => "none",
        }
    }
}

/// A contamination scheme together with the nominal rate.
#[derive(Debug, Clone, Copy)]
pub struct ContaminationSpec {
    pub scheme: ContaminationScheme,
    pub epsilon: f64,
}

impl ContaminationSpec {
    pub fn new(scheme: ContaminationScheme, epsilon: f64) -> Result<Self, SimulateError> {
        if let ContaminationScheme::UniformOutliers { a, b } = scheme {
            if a > b {
                return Err(SimulateError::BadUniformBounds { a, b });
            }
        }
        if !(0.0..0.5).contains(&epsilon) {
            return Err(SimulateError::EpsilonOutOfRange(epsilon));
        }
        Ok(Self { scheme, epsilon })
    }

    pub fn none() -> Self {
        Self {
            scheme: ContaminationScheme::None,
            epsilon: 0.0,
        }
    }
}

/// Monte-Carlo risk summary over one cell of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RiskSummary {
    pub per_seed_errors: Vec<f64>,
    pub mean_error: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

impl RiskSummary {
    pub fn from_errors(per_seed_errors: Vec<f64>) -> Self {
        let mean_error = per_seed_errors.iter().sum::<f64>() / per_seed_errors.len() as f64;
        let mut sorted = per_seed_errors.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self {
            per_seed_errors,
            mean_error,
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.50),
            q75: quantile(&sorted, 0.75),
        }
    }
}

/// Linear-interpolation quantile of an already sorted slice.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Draws n rows of N(mu, sigma), consuming n*p standard normals row-major.
pub(crate) fn draw_gaussian_rows(
    n: usize,
    p: usize,
    mu: &Array1<f64>,
    sigma: &SymMatrix,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let root = covariance_root(sigma);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        rows.push(apply_root(&root, &z, mu));
    }
    rows
}

enum CovRoot {
    Diagonal(Vec<f64>),
    Dense(SymMatrix),
}

// Diagonal covariances (the common case in the experiments) get an exact
// square root; anything else goes through the spectral square root.
fn covariance_root(sigma: &SymMatrix) -> CovRoot {
    let p = sigma.p();
    let mut diagonal = true;
    'outer: for i in 0..p {
        for j in 0..p {
            if i != j && sigma.entries()[(i, j)] != 0.0 {
                diagonal = false;
                break 'outer;
            }
        }
    }
    if diagonal {
        CovRoot::Diagonal((0..p).map(|i| sigma.entries()[(i, i)].max(0.0).sqrt()).collect())
    } else {
        CovRoot::Dense(linalg::sym_sqrt(sigma, 1e-12))
    }
}

fn apply_root(root: &CovRoot, z: &[f64], mu: &Array1<f64>) -> Vec<f64> {
    match root {
        CovRoot::Diagonal(d) => z
            .iter()
            .zip(d.iter())
            .zip(mu.iter())
            .map(|((zi, di), mi)| mi + di * zi)
            .collect(),
        CovRoot::Dense(l) => {
            let lz = l.matvec(&Array1::from(z.to_vec()));
            lz.iter().zip(mu.iter()).map(|(v, m)| m + v).collect()
        }
    }
}

fn contaminate(
    mut rows: Vec<Vec<f64>>,
    mu_star: &Array1<f64>,
    spec: &ContaminationSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, Vec<bool>), SimulateError> {
    let n = rows.len();
    let p = rows[0].len();
    let m = (n as f64 * spec.epsilon).ceil() as usize;
    let mut mask = vec![true; n];
    if m == 0 {
        return Ok((rows, mask));
    }
    match spec.scheme {
        ContaminationScheme::None => {}
        ContaminationScheme::UniformOutliers { a, b } => {
            // the outlier keeps its own Gaussian noise; theta replaces the mean
            for row in rows.iter_mut().skip(n - m) {
                for (j, x) in row.iter_mut().enumerate() {
                    let theta: f64 = rng.random_range(a..=b);
                    *x = theta + (*x - mu_star[j]);
                }
            }
            for flag in mask.iter_mut().skip(n - m) {
                *flag = false;
            }
        }
        ContaminationScheme::SmallestEigenvector => {
            let mut center = vec![0.0; p];
            for row in &rows {
                for (c, &x) in center.iter_mut().zip(row.iter()) {
                    *c += x;
                }
            }
            for c in center.iter_mut() {
                *c /= n as f64;
            }
            let mut cov = ndarray::Array2::zeros((p, p));
            for row in &rows {
                for a in 0..p {
                    for b in a..p {
                        cov[(a, b)] += (row[a] - center[a]) * (row[b] - center[b]) / n as f64;
                    }
                }
            }
            for a in 0..p {
                for b in (a + 1)..p {
                    cov[(b, a)] = cov[(a, b)];
                }
            }
            let cov = SymMatrix::new(cov)
                .map_err(|e| SimulateError::DimensionMismatch(e.to_string()))?;
            let v = match linalg::bottom_eigenpair(&cov, 1e-11, linalg::default_eig_iters(p, 1e-11) * 4)
            {
                Ok(pair) => pair.vector,
                Err(linalg::LinalgError::NoConvergence { vector, .. }) => vector,
                Err(e) => return Err(SimulateError::DimensionMismatch(e.to_string())),
            };
            // centered correlation with the eigenvector; ties broken by index
            let mut scored: Vec<(usize, f64)> = (0..n)
                .map(|i| {
                    let mut dot = 0.0;
                    let mut norm2 = 0.0;
                    for j in 0..p {
                        let d = rows[i][j] - center[j];
                        dot += d * v[j];
                        norm2 += d * d;
                    }
                    let corr = if norm2 > 0.0 { dot.abs() / norm2.sqrt() } else { 0.0 };
                    (i, corr)
                })
                .collect();
            scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
            let outlier: Vec<f64> = v.iter().map(|&vj| (p as f64).sqrt() * vj).collect();
            for &(i, _) in scored.iter().take(m) {
                rows[i] = outlier.clone();
                mask[i] = false;
            }
        }
    }
    Ok((rows, mask))
}

/// Samples from the Gaussian model with adversarial contamination: n i.i.d.
/// N(mu_star, sigma) draws, then up to ceil(n eps) replacements according to
/// the scheme. Deterministic given the seed.
pub fn sample_gac(
    n: usize,
    p: usize,
    mu_star: &Array1<f64>,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
    seed: u64,
) -> Result<ContaminatedSample, SimulateError> {
    check_sample_dims(n, p, mu_star, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = draw_gaussian_rows(n, p, mu_star, sigma, &mut rng);
    finish_sample(rows, mu_star, spec, &mut rng)
}

/// Sub-Gaussian counterpart of [`sample_gac`]: inliers are
/// mu_star + sigma^{1/2} xi with xi = sqrt(p) * (uniform unit sphere), a
/// bounded isotropic law with unit covariance and O(1) variance proxy.
/// Contamination logic is shared with the Gaussian sampler.
pub fn sample_sgac_bounded(
    n: usize,
    p: usize,
    mu_star: &Array1<f64>,
    sigma: &SymMatrix,
    spec: &ContaminationSpec,
    seed: u64,
) -> Result<ContaminatedSample, SimulateError> {
    check_sample_dims(n, p, mu_star, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = covariance_root(sigma);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { (p as f64).sqrt() / norm } else { 0.0 };
        for v in z.iter_mut() {
            *v *= scale;
        }
        rows.push(apply_root(&root, &z, mu_star));
    }
    finish_sample(rows, mu_star, spec, &mut rng)
}

fn check_sample_dims(
    n: usize,
    p: usize,
    mu_star: &Array1<f64>,
    sigma: &SymMatrix,
) -> Result<(), SimulateError> {
    if n == 0 || p == 0 {
        return Err(SimulateError::InvalidParams("n and p must be positive".into()));
    }
    if mu_star.len() != p {
        return Err(SimulateError::DimensionMismatch(format!(
            "mu_star has length {}, expected {}",
            mu_star.len(),
            p
        )));
    }
    if sigma.p() != p {
        return Err(SimulateError::DimensionMismatch(format!(
            "sigma is {}x{}, expected {}x{}",
            sigma.p(),
            sigma.p(),
            p,
            p
        )));
    }
    Ok(())
}

fn finish_sample(
    rows: Vec<Vec<f64>>,
    mu_star: &Array1<f64>,
    spec: &ContaminationSpec,
    rng: &mut ChaCha8Rng,
) -> Result<ContaminatedSample, SimulateError> {
    let (rows, mask) = contaminate(rows, mu_star, spec, rng)?;
    let data = Dataset::from_rows(&rows)?;
    Ok(ContaminatedSample::new(data, mask, mu_star.clone())?)
}

/// Arithmetic mean of all observations.
pub fn baseline_sample_mean(data: &Dataset) -> Array1<f64> {
    data.mean()
}

/// Coordinatewise median, taking the lower median for even n.
pub fn baseline_coord_median(data: &Dataset) -> Array1<f64> {
    let n = data.n();
    let mut out = Array1::zeros(data.p());
    let mut col = vec![0.0; n];
    for j in 0..data.p() {
        for (i, c) in col.iter_mut().enumerate() {
            *c = data.points()[(i, j)];
        }
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out[j] = col[(n - 1) / 2];
    }
    out
}

/// Mean over the true inliers; computable only in simulation.
pub fn baseline_oracle_mean(sample: &ContaminatedSample) -> Result<Array1<f64>, SimulateError> {
    let mut count = 0usize;
    let mut sum = Array1::zeros(sample.data.p());
    for (i, &keep) in sample.inlier_mask.iter().enumerate() {
        if keep {
            sum += &sample.data.row(i);
            count += 1;
        }
    }
    if count == 0 {
        return Err(SimulateError::NoInliers);
    }
    Ok(sum / count as f64)
}

/// Evaluates both sides of the deterministic error inequality for a weighted
/// mean on a sample with known ground truth: the left side is the estimation
/// error of the weighted mean, the right side combines the scatter deviation
/// term sqrt(eps_w)/(1-eps_w) * lambda_max_+^{1/2}(scatter - sigma) with the
/// remainder driven by the inlier noise. Holds with lhs <= rhs for every
/// feasible weight vector; exercised by the test suites.
pub fn proposition_error_bound(
    sample: &ContaminatedSample,
    w: &WeightVector,
    sigma: &SymMatrix,
    eig_tol: f64,
) -> Result<(f64, f64), SimulateError> {
    let data = &sample.data;
    let n = data.n();
    let p = data.p();
    let inliers: Vec<usize> = (0..n).filter(|&i| sample.inlier_mask[i]).collect();
    let eps_w: f64 = (0..n)
        .filter(|&i| !sample.inlier_mask[i])
        .map(|i| w.weights()[i])
        .sum();

    let xbar = data.weighted_mean(w);
    let lhs = (&xbar - &sample.true_mean)
        .mapv(|v| v * v)
        .sum()
        .sqrt();

    let scatter = linalg::weighted_scatter(data, w, &xbar)?;
    let dev = scatter
        .sub(sigma)
        .map_err(|e| SimulateError::DimensionMismatch(e.to_string()))?;
    let main = eps_w.sqrt() / (1.0 - eps_w) * linalg::lambda_max_plus(&dev, eig_tol).sqrt();

    // remainder: conditional weights on the inliers, noise vectors zeta
    let w_cond = conditional_weights(w, &inliers)?;
    let mut noise_dev = ndarray::Array2::zeros((p, p));
    let mut zeta_bar = Array1::zeros(p);
    for &i in &inliers {
        let wi = w_cond.weights()[i];
        let zeta = &data.row(i) - &sample.true_mean;
        zeta_bar.scaled_add(wi, &zeta);
        for a in 0..p {
            for b in 0..p {
                noise_dev[(a, b)] += wi * (sigma.entries()[(a, b)] - zeta[a] * zeta[b]);
            }
        }
    }
    let noise_dev = SymMatrix::new(noise_dev)
        .map_err(|e| SimulateError::DimensionMismatch(e.to_string()))?;
    let sigma_op = linalg::lambda_max(sigma, eig_tol).max(0.0);
    let remainder = 2.0 * sigma_op.sqrt() * eps_w
        + (2.0 * eps_w).sqrt() * linalg::lambda_max_plus(&noise_dev, eig_tol).sqrt()
        + (1.0 + (2.0 * eps_w).sqrt()) * zeta_bar.dot(&zeta_bar).sqrt();

    Ok((lhs, main + remainder))
}

/// The three benchmark experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    /// Estimation error along the outer iterations at fixed (n, p, eps).
    Decay,
    /// Final error as a function of eps, 30 forced iterations past the
    /// breakdown threshold.
    Breakdown,
    /// IR versus sample mean, coordinatewise median, geometric median and
    /// the inlier oracle.
    Compare,
}

impl ExperimentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Decay => "decay",
            ExperimentKind::Breakdown => "breakdown",
            ExperimentKind::Compare => "compare",
        }
    }
}

/// Parameters shared by the experiments. `epsilon` drives decay/compare;
/// `epsilon_grid` drives the breakdown sweep.
#[derive(Debug, Clone)]
pub struct ExperimentParams {
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    pub epsilon_grid: Vec<f64>,
    pub scheme: ContaminationScheme,
    pub solver: crate::weights::SolverConfig,
}

impl ExperimentParams {
    pub fn new(n: usize, p: usize, epsilon: f64, scheme: ContaminationScheme) -> Self {
        Self {
            n,
            p,
            epsilon,
            epsilon_grid: Vec::new(),
            scheme,
            solver: crate::weights::SolverConfig::default(),
        }
    }

    pub fn with_epsilon_grid(mut self, grid: Vec<f64>) -> Self {
        self.epsilon_grid = grid;
        self
    }
}

/// One raw benchmark measurement (one seed, one estimator, one cell).
#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub experiment: &'static str,
    pub scheme: &'static str,
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    pub estimator: &'static str,
    pub seed: u64,
    /// Iteration index for decay traces; None for final-error rows.
    pub iteration: Option<usize>,
    pub error: f64,
}

/// Aggregated risk for one cell (an estimator at fixed parameters).
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub experiment: &'static str,
    pub scheme: &'static str,
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    pub estimator: &'static str,
    pub iteration: Option<usize>,
    pub summary: RiskSummary,
}

/// Raw rows plus per-cell summaries of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentTable {
    pub records: Vec<BenchRecord>,
    pub cells: Vec<BenchCell>,
}

fn l2_error(estimate: &[f64], truth: &Array1<f64>) -> f64 {
    estimate
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Runs one of the benchmark experiments over the seed list. Ground truth is
/// mu_star = 0 and sigma = I_p (the estimators are equivariant, so this loses
/// no generality). Seeds fan out across threads; outputs are ordered by seed
/// and bit-identical across runs.
pub fn run_experiment(
    kind: ExperimentKind,
    params: &ExperimentParams,
    seeds: &[u64],
) -> Result<ExperimentTable, SimulateError> {
    if seeds.is_empty() {
        return Err(SimulateError::InvalidParams("need at least one seed".into()));
    }
    if params.n < 2 || params.p < 1 {
        return Err(SimulateError::InvalidParams(format!(
            "bad shape n = {}, p = {}",
            params.n, params.p
        )));
    }
    match kind {
        ExperimentKind::Decay => run_decay(params, seeds),
        ExperimentKind::Breakdown => run_breakdown(params, seeds),
        ExperimentKind::Compare => run_compare(params, seeds),
    }
}

fn experiment_inputs(
    params: &ExperimentParams,
    epsilon: f64,
) -> Result<(Array1<f64>, SymMatrix, ContaminationSpec), SimulateError> {
    let mu_star = Array1::zeros(params.p);
    let sigma = SymMatrix::identity(params.p);
    let spec = ContaminationSpec::new(params.scheme, epsilon)?;
    Ok((mu_star, sigma, spec))
}

fn run_decay(params: &ExperimentParams, seeds: &[u64]) -> Result<ExperimentTable, SimulateError> {
    let (mu_star, sigma, spec) = experiment_inputs(params, params.epsilon)?;
    let per_seed: Vec<Result<Vec<f64>, SimulateError>> = seeds
        .par_iter()
        .map(|&seed| {
            let sample = sample_gac(params.n, params.p, &mu_star, &sigma, &spec, seed)?;
            let cfg = IRConfig::new(params.epsilon, CovarianceSpec::Known(sigma.clone()))?
                .with_solver(params.solver.clone());
            let report = ir_mean(&sample.data, &cfg)?;
            Ok(report
                .estimate_path()
                .iter()
                .map(|est| l2_error(est, &mu_star))
                .collect())
        })
        .collect();

    let mut records = Vec::new();
    let mut traces = Vec::with_capacity(seeds.len());
    for (seed, res) in seeds.iter().zip(per_seed) {
        let trace = res?;
        for (k, &err) in trace.iter().enumerate() {
            records.push(BenchRecord {
                experiment: "decay",
                scheme: params.scheme.label(),
                n: params.n,
                p: params.p,
                epsilon: params.epsilon,
                estimator: "ir",
                seed: *seed,
                iteration: Some(k),
                error: err,
            });
        }
        traces.push(trace);
    }
    let iterations = traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut cells = Vec::new();
    for k in 0..iterations {
        let errs: Vec<f64> = traces
            .iter()
            .filter_map(|t| t.get(k).copied())
            .collect();
        cells.push(BenchCell {
            experiment: "decay",
            scheme: params.scheme.label(),
            n: params.n,
            p: params.p,
            epsilon: params.epsilon,
            estimator: "ir",
            iteration: Some(k),
            summary: RiskSummary::from_errors(errs),
        });
    }
    Ok(ExperimentTable { records, cells })
}

fn run_breakdown(
    params: &ExperimentParams,
    seeds: &[u64],
) -> Result<ExperimentTable, SimulateError> {
    if params.epsilon_grid.is_empty() {
        return Err(SimulateError::InvalidParams(
            "breakdown needs a nonempty epsilon grid".into(),
        ));
    }
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for &eps in &params.epsilon_grid {
        let (mu_star, sigma, spec) = experiment_inputs(params, eps)?;
        // past the contraction threshold the K formula is undefined; the
        // sweep forces 30 iterations there instead
        let k_override = if eps > breakdown_threshold() { Some(30) } else { None };
        let errors: Vec<Result<f64, SimulateError>> = seeds
            .par_iter()
            .map(|&seed| {
                let sample = sample_gac(params.n, params.p, &mu_star, &sigma, &spec, seed)?;
                let cfg = IRConfig::new(eps, CovarianceSpec::Known(sigma.clone()))?
                    .with_solver(params.solver.clone())
                    .with_k_override(k_override);
                let report = ir_mean(&sample.data, &cfg)?;
                Ok(l2_error(&report.estimate, &mu_star))
            })
            .collect();
        let mut errs = Vec::with_capacity(seeds.len());
        for (seed, res) in seeds.iter().zip(errors) {
            let err = res?;
            records.push(BenchRecord {
                experiment: "breakdown",
                scheme: params.scheme.label(),
                n: params.n,
                p: params.p,
                epsilon: eps,
                estimator: "ir",
                seed: *seed,
                iteration: None,
                error: err,
            });
            errs.push(err);
        }
        cells.push(BenchCell {
            experiment: "breakdown",
            scheme: params.scheme.label(),
            n: params.n,
            p: params.p,
            epsilon: eps,
            estimator: "ir",
            iteration: None,
            summary: RiskSummary::from_errors(errs),
        });
    }
    Ok(ExperimentTable { records, cells })
}

const COMPARE_ESTIMATORS: [&str; 5] = [
    "ir",
    "sample_mean",
    "coord_median",
    "geometric_median",
    "oracle",
];

fn run_compare(params: &ExperimentParams, seeds: &[u64]) -> Result<ExperimentTable, SimulateError> {
    let (mu_star, sigma, spec) = experiment_inputs(params, params.epsilon)?;
    let per_seed: Vec<Result<[f64; 5], SimulateError>> = seeds
        .par_iter()
        .map(|&seed| {
            let sample = sample_gac(params.n, params.p, &mu_star, &sigma, &spec, seed)?;
            let cfg = IRConfig::new(params.epsilon, CovarianceSpec::Known(sigma.clone()))?
                .with_solver(params.solver.clone());
            let ir = ir_mean(&sample.data, &cfg)?;
            let gm = geometric_median(&sample.data, 1e-10, 10_000);
            let oracle = baseline_oracle_mean(&sample)?;
            Ok([
                l2_error(&ir.estimate, &mu_star),
                l2_error(baseline_sample_mean(&sample.data).as_slice().unwrap(), &mu_star),
                l2_error(baseline_coord_median(&sample.data).as_slice().unwrap(), &mu_star),
                l2_error(gm.point.as_slice().unwrap(), &mu_star),
                l2_error(oracle.as_slice().unwrap(), &mu_star),
            ])
        })
        .collect();

    let mut records = Vec::new();
    let mut by_estimator: [Vec<f64>; 5] =
        std::array::from_fn(|_| Vec::with_capacity(seeds.len()));
    for (seed, res) in seeds.iter().zip(per_seed) {
        let errs = res?;
        for (e, &err) in COMPARE_ESTIMATORS.iter().zip(errs.iter()) {
            records.push(BenchRecord {
                experiment: "compare",
                scheme: params.scheme.label(),
                n: params.n,
                p: params.p,
                epsilon: params.epsilon,
                estimator: e,
                seed: *seed,
                iteration: None,
                error: err,
            });
        }
        for (bucket, &err) in by_estimator.iter_mut().zip(errs.iter()) {
            bucket.push(err);
        }
    }
    let cells = COMPARE_ESTIMATORS
        .iter()
        .zip(by_estimator)
        .map(|(e, errs)| BenchCell {
            experiment: "compare",
            scheme: params.scheme.label(),
            n: params.n,
            p: params.p,
            epsilon: params.epsilon,
            estimator: e,
            iteration: None,
            summary: RiskSummary::from_errors(errs),
        })
        .collect();
    Ok(ExperimentTable { records, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn no_contamination_keeps_all_inliers() {
        let mu = Array1::zeros(3);
        let sigma = SymMatrix::identity(3);
        let s = sample_gac(20, 3, &mu, &sigma, &ContaminationSpec::none(), 7).unwrap();
        assert!(s.inlier_mask.iter().all(|&b| b));
        assert_eq!(s.epsilon_actual, 0.0);
    }

    #[test]
    fn degenerate_uniform_outliers_are_shifted_noise() {
        let mu = Array1::zeros(2);
        let sigma = SymMatrix::identity(2);
        let spec = ContaminationSpec::new(
            ContaminationScheme::UniformOutliers { a: 4.0, b: 4.0 },
            0.25,
        )
        .unwrap();
        let clean = sample_gac(8, 2, &mu, &sigma, &ContaminationSpec::none(), 42).unwrap();
        let dirty = sample_gac(8, 2, &mu, &sigma, &spec, 42).unwrap();
        // last ceil(8 * 0.25) = 2 points replaced by 4 * ones + own noise
        assert_eq!(dirty.outlier_count(), 2);
        for i in 0..6 {
            assert_eq!(clean.data.row(i), dirty.data.row(i));
            assert!(dirty.inlier_mask[i]);
        }
        for i in 6..8 {
            assert!(!dirty.inlier_mask[i]);
            for j in 0..2 {
                assert_abs_diff_eq!(
                    dirty.data.points()[(i, j)],
                    4.0 + clean.data.points()[(i, j)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn eigen_scheme_replaces_exact_count_with_scaled_eigenvector() {
        let mu = Array1::zeros(5);
        let sigma = SymMatrix::identity(5);
        let spec =
            ContaminationSpec::new(ContaminationScheme::SmallestEigenvector, 0.2).unwrap();
        let s = sample_gac(500, 5, &mu, &sigma, &spec, 11).unwrap();
        assert_eq!(s.outlier_count(), 100);
        // all outliers equal the same sqrt(5)-scaled vector
        let outliers: Vec<usize> = (0..500).filter(|&i| !s.inlier_mask[i]).collect();
        let first = s.data.row(outliers[0]).to_owned();
        let norm = first.dot(&first).sqrt();
        assert_abs_diff_eq!(norm, 5.0f64.sqrt(), epsilon = 1e-6);
        for &i in &outliers {
            assert_eq!(s.data.row(i), first.view());
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let mu = array![1.0, -2.0];
        let sigma = SymMatrix::diagonal(&[2.0, 0.5]);
        let spec = ContaminationSpec::new(
            ContaminationScheme::UniformOutliers { a: 1.0, b: 3.0 },
            0.3,
        )
        .unwrap();
        let s1 = sample_gac(12, 2, &mu, &sigma, &spec, 99).unwrap();
        let s2 = sample_gac(12, 2, &mu, &sigma, &spec, 99).unwrap();
        assert_eq!(s1.data.points(), s2.data.points());
        assert_eq!(s1.inlier_mask, s2.inlier_mask);
        let t1 = sample_sgac_bounded(12, 2, &mu, &sigma, &spec, 99).unwrap();
        let t2 = sample_sgac_bounded(12, 2, &mu, &sigma, &spec, 99).unwrap();
        assert_eq!(t1.data.points(), t2.data.points());
        // different law, same replacement pattern
        assert_eq!(s1.inlier_mask, t1.inlier_mask);
        assert_eq!(t1.outlier_count(), 4);
    }

    #[test]
    fn sgac_inliers_lie_on_bounded_shell() {
        let mu = array![3.0, 0.0, -1.0];
        let sigma = SymMatrix::identity(3);
        let s =
            sample_sgac_bounded(50, 3, &mu, &sigma, &ContaminationSpec::none(), 5).unwrap();
        for i in 0..50 {
            let d = (&s.data.row(i).to_owned() - &mu).mapv(|v| v * v).sum().sqrt();
            assert_abs_diff_eq!(d, 3.0f64.sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn baselines_on_tiny_examples() {
        let d = Dataset::new(array![[0.0], [10.0]]).unwrap();
        assert_eq!(baseline_sample_mean(&d), array![5.0]);
        assert_eq!(baseline_coord_median(&d), array![0.0]);

        let d = Dataset::new(array![[2.0, 1.0], [2.0, 1.0], [2.0, 1.0]]).unwrap();
        assert_eq!(baseline_sample_mean(&d), array![2.0, 1.0]);
        assert_eq!(baseline_coord_median(&d), array![2.0, 1.0]);
        let gm = geometric_median(&d, 1e-10, 100);
        assert_eq!(gm.point, array![2.0, 1.0]);
    }

    #[test]
    fn oracle_mean_uses_only_inliers() {
        let d = Dataset::new(array![[0.0, 0.0], [2.0, 0.0], [100.0, 100.0]]).unwrap();
        let s = ContaminatedSample::new(d, vec![true, true, false], Array1::zeros(2)).unwrap();
        assert_eq!(baseline_oracle_mean(&s).unwrap(), array![1.0, 0.0]);
    }

    #[test]
    fn oracle_mean_rejects_all_outliers() {
        let d = Dataset::new(array![[0.0], [1.0], [2.0]]).unwrap();
        let mut s = ContaminatedSample::new(d, vec![true, true, true], Array1::zeros(1)).unwrap();
        s.inlier_mask = vec![false, false, false];
        assert!(matches!(
            baseline_oracle_mean(&s),
            Err(SimulateError::NoInliers)
        ));
    }

    #[test]
    fn uniform_bounds_validated() {
        assert!(matches!(
            ContaminationSpec::new(ContaminationScheme::UniformOutliers { a: 2.0, b: 1.0 }, 0.1),
            Err(SimulateError::BadUniformBounds { .. })
        ));
    }

    #[test]
    fn quantiles_interpolate() {
        let s = RiskSummary::from_errors(vec![4.0, 1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(s.mean_error, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.q25, 1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q50, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q75, 3.25, epsilon = 1e-12);
    }
}
