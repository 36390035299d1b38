//! Adaptation to an unknown contamination rate by Lepski's method.
//!
//! A geometric grid of candidate rates eps_l = a^l eps_0 is scanned from the
//! largest candidate down; each candidate gets its own IR run and a
//! confidence radius R_delta(eps_l). The selected level is the longest prefix
//! of the grid whose confidence balls still share a common point, and the
//! estimate at that level is returned. Since prefix intersections are nested,
//! scanning to the first empty one is exact.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::estimator::{breakdown_threshold, ir_mean, EstimatorError, IRConfig};
use crate::geometry::balls_intersection_point;
use crate::linalg::SymMatrix;
use crate::simulate::{draw_gaussian_rows, quantile};
use crate::types::{CovarianceSpec, Dataset, EstimateReport};
use crate::weights::SolverConfig;

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("grid ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("dimension p = {p} and sample size n = {n} must satisfy 1 <= p <= n")]
    BadShape { p: usize, n: usize },
    #[error("z = {0} is outside [0, eps_0): the radius denominator vanishes")]
    ZOutOfRange(f64),
    #[error("the epsilon grid is empty (p too close to n)")]
    EmptyGrid,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Configuration of the adaptive estimator.
#[derive(Debug, Clone)]
pub struct LepskiConfig {
    /// Geometric grid ratio in (0, 1).
    pub a: f64,
    /// Tolerance level delta in (0, 1).
    pub delta: f64,
    /// The constant A_5 of the high-probability risk bound. Unknowable from
    /// theory (proof constant); set it directly or via [`calibrate_a5`].
    pub a5: f64,
    /// Known or assumed operator norm of the covariance.
    pub sigma_op: f64,
    pub cov: CovarianceSpec,
    pub solver: SolverConfig,
}

impl LepskiConfig {
    pub fn new(a: f64, delta: f64, a5: f64, sigma_op: f64, cov: CovarianceSpec) -> Result<Self, AdaptiveError> {
        if !(a > 0.0 && a < 1.0) {
            return Err(AdaptiveError::InvalidRatio(a));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AdaptiveError::InvalidRatio(delta));
        }
        if a5 <= 0.0 || a5.is_nan() {
            return Err(AdaptiveError::InvalidRatio(a5));
        }
        Ok(Self {
            a,
            delta,
            a5,
            sigma_op,
            cov,
            solver: SolverConfig::default(),
        })
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }
}

/// Everything the adaptive run produced, including per-level diagnostics.
#[derive(Debug, Clone)]
pub struct AdaptiveReport {
    pub estimate: Array1<f64>,
    pub selected_epsilon: f64,
    /// 1-based index of the selected grid level.
    pub selected_level: usize,
    pub grid: Vec<f64>,
    pub radii: Vec<f64>,
    pub per_level: Vec<EstimateReport>,
}

/// The candidate grid eps_l = a^l eps_0 for l = 1..l_max with
/// l_max = floor(0.5 log_a(p/n)). Empty when p = n.
pub fn epsilon_grid(a: f64, p: usize, n: usize) -> Result<Vec<f64>, AdaptiveError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(AdaptiveError::InvalidRatio(a));
    }
    if p < 1 || p > n {
        return Err(AdaptiveError::BadShape { p, n });
    }
    let l_max = grid_len(a, p, n);
    let eps0 = breakdown_threshold();
    Ok((1..=l_max).map(|l| a.powi(l as i32) * eps0).collect())
}

fn grid_len(a: f64, p: usize, n: usize) -> usize {
    let raw = 0.5 * (p as f64 / n as f64).ln() / a.ln();
    raw.floor().max(0.0) as usize
}

/// Confidence radius
///     R_delta(z) = A5 sqrt(sigma_op) / (1 - 2z - sqrt(z(1-z)))
///                  * ( sqrt((p + log(4 l_max / delta)) / n) + rate(z) )
/// where rate(z) = z sqrt(log(1/z)) (zero at z = 0) for Gaussian-style runs
/// and 3 sqrt(z) for the unknown-arbitrary-covariance variant, whose slower
/// rate replaces the logarithmic one behind the same interface.
pub fn lepski_radius(
    z: f64,
    cfg: &LepskiConfig,
    p: usize,
    n: usize,
    l_max: usize,
) -> Result<f64, AdaptiveError> {
    let eps0 = breakdown_threshold();
    if !(0.0..eps0).contains(&z) {
        return Err(AdaptiveError::ZOutOfRange(z));
    }
    let denom = 1.0 - 2.0 * z - (z * (1.0 - z)).sqrt();
    let base = ((p as f64 + (4.0 * l_max as f64 / cfg.delta).ln()) / n as f64).sqrt();
    let rate = if matches!(cfg.cov, CovarianceSpec::UnknownArbitrary) {
        3.0 * z.sqrt()
    } else if z == 0.0 {
        0.0
    } else {
        z * (1.0 / z).ln().sqrt()
    };
    Ok(cfg.a5 * cfg.sigma_op.sqrt() / denom * (base + rate))
}

/// The adaptively selected IR mean: one IR run per grid level, then the
/// longest feasible prefix of confidence balls picks the level.
pub fn adaptive_ir_mean(
    data: &Dataset,
    cfg: &LepskiConfig,
) -> Result<AdaptiveReport, AdaptiveError> {
    let n = data.n();
    let p = data.p();
    let grid = epsilon_grid(cfg.a, p, n)?;
    if grid.is_empty() {
        return Err(AdaptiveError::EmptyGrid);
    }
    let l_max = grid.len();

    let mut per_level = Vec::with_capacity(l_max);
    let mut centers: Vec<Array1<f64>> = Vec::with_capacity(l_max);
    let mut radii = Vec::with_capacity(l_max);
    for &eps in &grid {
        let ir_cfg = IRConfig::new(eps, cfg.cov.clone())?.with_solver(cfg.solver.clone());
        let report = ir_mean(data, &ir_cfg)?;
        centers.push(report.estimate_array());
        radii.push(lepski_radius(eps, cfg, p, n, l_max)?);
        per_level.push(report);
    }

    // A single ball is trivially nonempty, so the selected level is >= 1.
    let mut selected = 1usize;
    for l in 2..=l_max {
        let tol = 1e-6 * radii[..l].iter().cloned().fold(f64::INFINITY, f64::min);
        if balls_intersection_point(&centers[..l], &radii[..l], tol).is_some() {
            selected = l;
        } else {
            break; // prefix intersections are nested: all longer ones are empty too
        }
    }

    Ok(AdaptiveReport {
        estimate: centers[selected - 1].clone(),
        selected_epsilon: grid[selected - 1],
        selected_level: selected,
        grid,
        radii,
        per_level,
    })
}

/// Calibrates A_5 so that R_delta(0) matches the (1 - delta) empirical
/// quantile of the sample-mean error over `reps` outlier-free draws at the
/// given shape. A heuristic stand-in for the unknowable proof constant; it
/// anchors the radius scale to the actual noise level.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_a5(
    n: usize,
    p: usize,
    sigma: &SymMatrix,
    sigma_op: f64,
    delta: f64,
    a: f64,
    reps: usize,
    seed: u64,
) -> Result<f64, AdaptiveError> {
    if !(a > 0.0 && a < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(AdaptiveError::InvalidRatio(a.min(delta)));
    }
    if p < 1 || p > n {
        return Err(AdaptiveError::BadShape { p, n });
    }
    let l_max = grid_len(a, p, n).max(1);
    let mut errors = Vec::with_capacity(reps);
    let mu_star = Array1::zeros(p);
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let rows = draw_gaussian_rows(n, p, &mu_star, sigma, &mut rng);
        let mut mean = vec![0.0; p];
        for row in &rows {
            for (m, &x) in mean.iter_mut().zip(row.iter()) {
                *m += x;
            }
        }
        let err = mean
            .iter()
            .map(|m| (m / n as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        errors.push(err);
    }
    errors.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let q = quantile(&errors, 1.0 - delta);
    let base = ((p as f64 + (4.0 * l_max as f64 / delta).ln()) / n as f64).sqrt();
    Ok(q / (sigma_op.sqrt() * base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn test_cfg(a5: f64) -> LepskiConfig {
        LepskiConfig::new(
            0.9,
            0.1,
            a5,
            1.0,
            CovarianceSpec::Known(SymMatrix::identity(4)),
        )
        .unwrap()
    }

    #[test]
    fn grid_length_and_values() {
        let grid = epsilon_grid(0.9, 10, 1000).unwrap();
        assert_eq!(grid.len(), 21);
        assert_abs_diff_eq!(grid[0], 0.9 * breakdown_threshold(), epsilon = 1e-15);
        assert_abs_diff_eq!(grid[0], 0.2487538820250189, epsilon = 1e-12);
        // geometric decay
        for l in 1..grid.len() {
            assert_abs_diff_eq!(grid[l] / grid[l - 1], 0.9, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_empty_when_p_equals_n() {
        assert!(epsilon_grid(0.9, 50, 50).unwrap().is_empty());
    }

    #[test]
    fn grid_rejects_bad_ratio() {
        assert!(epsilon_grid(1.0, 10, 100).is_err());
        assert!(epsilon_grid(0.0, 10, 100).is_err());
    }

    #[test]
    fn radius_example_at_zero() {
        // delta = 4/e makes log(4 l_max / delta) = 1 with l_max = 1
        let mut cfg = test_cfg(1.0);
        cfg.delta = 4.0 / std::f64::consts::E;
        let r = lepski_radius(0.0, &cfg, 4, 100, 1).unwrap();
        assert_abs_diff_eq!(r, 0.05f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn radius_is_increasing_in_z() {
        let cfg = test_cfg(1.0);
        let r1 = lepski_radius(0.1, &cfg, 4, 100, 3).unwrap();
        let r2 = lepski_radius(0.2, &cfg, 4, 100, 3).unwrap();
        assert!(r2 > r1);
        // blow-up near the threshold
        let r3 = lepski_radius(breakdown_threshold() - 1e-9, &cfg, 4, 100, 3).unwrap();
        assert!(r3 > 1e3 * r2);
    }

    #[test]
    fn radius_rejects_z_past_threshold() {
        let cfg = test_cfg(1.0);
        assert!(lepski_radius(breakdown_threshold(), &cfg, 4, 100, 3).is_err());
        assert!(lepski_radius(0.4, &cfg, 4, 100, 3).is_err());
    }

    #[test]
    fn arbitrary_covariance_uses_sqrt_rate() {
        let known = test_cfg(1.0);
        let mut arb = test_cfg(1.0);
        arb.cov = CovarianceSpec::UnknownArbitrary;
        let z = 0.01;
        let rk = lepski_radius(z, &known, 4, 100, 3).unwrap();
        let ra = lepski_radius(z, &arb, 4, 100, 3).unwrap();
        // 3 sqrt(z) dominates z sqrt(log(1/z)) for small z
        assert!(ra > rk);
    }
}
