//! Geometric primitives: the geometric median, Euclidean projection onto the
//! capped simplex, and a feasibility search for intersections of balls.

use ndarray::Array1;
use thiserror::Error;

use crate::types::{Dataset, TypeError, WeightVector};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cap {cap} is infeasible for n = {n} (need cap * n >= 1 and cap <= 1)")]
    InfeasibleCap { cap: f64, n: usize },
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Outcome of the Weiszfeld iteration. `converged` is false when the step
/// budget ran out; `point` is then still the best iterate found.
#[derive(Debug, Clone)]
pub struct WeiszfeldResult {
    pub point: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn data_diameter(data: &Dataset) -> f64 {
    let n = data.n();
    let mut diam: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for k in 0..data.p() {
                let d = data.points()[(i, k)] - data.points()[(j, k)];
                d2 += d * d;
            }
            diam = diam.max(d2);
        }
    }
    diam.sqrt()
}

/// Geometric median via smoothed Weiszfeld iterations.
///
/// Distances are smoothed as sqrt(||X_i - mu||^2 + eta^2) with
/// eta = 1e-10 * diameter, which removes the singularity at data points while
/// perturbing the minimizer negligibly. The smoothed objective is
/// non-increasing across iterations (majorize-minimize step).
pub fn geometric_median(data: &Dataset, tol: f64, max_iter: usize) -> WeiszfeldResult {
    let n = data.n();
    let p = data.p();
    let diam = data_diameter(data);
    if diam == 0.0 {
        // all points identical
        return WeiszfeldResult {
            point: data.row(0).to_owned(),
            converged: true,
            iterations: 0,
        };
    }
    let eta2 = (1e-10 * diam) * (1e-10 * diam);

    let smoothed_objective = |mu: &Array1<f64>| -> f64 {
        let mut f = 0.0;
        for row in data.points().rows() {
            let mut d2 = eta2;
            for k in 0..p {
                let d = row[k] - mu[k];
                d2 += d * d;
            }
            f += d2.sqrt();
        }
        f
    };

    let mut mu = data.mean();
    let mut obj = smoothed_objective(&mu);
    for it in 1..=max_iter {
        let mut num = Array1::zeros(p);
        let mut den = 0.0;
        for row in data.points().rows() {
            let mut d2 = eta2;
            for k in 0..p {
                let d = row[k] - mu[k];
                d2 += d * d;
            }
            let inv = 1.0 / d2.sqrt();
            num.scaled_add(inv, &row);
            den += inv;
        }
        let next = num / den;
        let next_obj = smoothed_objective(&next);
        debug_assert!(
            next_obj <= obj + 1e-12 * obj.max(1.0),
            "Weiszfeld objective increased: {obj} -> {next_obj}"
        );
        let step: f64 = next
            .iter()
            .zip(mu.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let rel_drop = (obj - next_obj).abs() / obj.max(1e-300);
        mu = next;
        obj = next_obj;
        if step <= tol * (1.0 + diam) && rel_drop <= tol {
            return WeiszfeldResult {
                point: mu,
                converged: true,
                iterations: it,
            };
        }
        if n == 1 {
            break;
        }
    }
    WeiszfeldResult {
        point: mu,
        converged: n == 1,
        iterations: max_iter,
    }
}

/// Euclidean projection of `v` onto {w : sum w_i = 1, 0 <= w_i <= cap}.
///
/// Bisection on the dual shift theta of w_i = clamp(v_i - theta, 0, cap),
/// whose total mass is monotone in theta, followed by one exact refinement
/// of theta from the identified active sets.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Result<WeightVector, GeometryError> {
    let n = v.len();
    if n == 0 || cap <= 0.0 || cap.is_nan() || cap * (n as f64) < 1.0 - 1e-12 || cap > 1.0 + 1e-12
    {
        return Err(GeometryError::InfeasibleCap { cap, n });
    }
    let cap = cap.min(1.0);

    let mass = |theta: f64| -> f64 { v.iter().map(|&x| (x - theta).clamp(0.0, cap)).sum() };

    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = vmin - cap; // mass(lo) = n * cap >= 1
    let mut hi = vmax; // mass(hi) = 0 <= 1
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);

    // Exact refinement: with the active sets fixed, theta solves
    // |capped| * cap + sum_free (v_i - theta) = 1.
    let mut capped_mass = 0.0;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for &x in v {
        let w = x - theta;
        if w >= cap {
            capped_mass += cap;
        } else if w > 0.0 {
            free_sum += x;
            free_count += 1;
        }
    }
    let theta = if free_count > 0 {
        (free_sum + capped_mass - 1.0) / free_count as f64
    } else {
        theta
    };

    let w: Vec<f64> = v.iter().map(|&x| (x - theta).clamp(0.0, cap)).collect();
    Ok(WeightVector::new(w, Some(cap))?)
}

/// Default feasibility tolerance for [`balls_intersection_point`]:
/// 1e-7 times the largest radius.
pub fn default_balls_tol(radii: &[f64]) -> f64 {
    1e-7 * radii.iter().cloned().fold(0.0f64, f64::max)
}

/// Searches for a point lying within distance r_j of every center c_j, i.e.
/// a near-minimizer of phi(x) = max_j (||x - c_j|| - r_j).
///
/// Polyak-style subgradient steps from the centroid, 5000-step budget.
/// Returns a witness with phi <= tol if one is found. The guarantee is
/// one-sided: `None` means the search's achieved minimum exceeded tol, which
/// at the tolerances used here indicates an empty intersection.
pub fn balls_intersection_point(
    centers: &[Array1<f64>],
    radii: &[f64],
    tol: f64,
) -> Option<Array1<f64>> {
    assert!(!centers.is_empty(), "need at least one ball");
    assert_eq!(centers.len(), radii.len());
    let p = centers[0].len();
    let m = centers.len();

    let phi = |x: &Array1<f64>| -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for j in 0..m {
            let mut d2 = 0.0;
            for k in 0..p {
                let d = x[k] - centers[j][k];
                d2 += d * d;
            }
            let val = d2.sqrt() - radii[j];
            if val > best {
                best = val;
                arg = j;
            }
        }
        (best, arg)
    };

    let mut x = Array1::zeros(p);
    for c in centers {
        x += c;
    }
    x /= m as f64;

    let (mut best_val, _) = phi(&x);
    let mut best_x = x.clone();
    if best_val <= tol {
        return Some(best_x);
    }

    for _ in 0..5000 {
        let (val, j) = phi(&x);
        if val < best_val {
            best_val = val;
            best_x = x.clone();
        }
        if val <= tol {
            return Some(x);
        }
        // subgradient of the active term: unit vector from the center to x
        let mut g = &x - &centers[j];
        let gnorm = g.dot(&g).sqrt();
        if gnorm == 0.0 {
            // at the active center; phi = -r_j there, already <= tol unless r < 0
            continue;
        }
        g /= gnorm;
        // Polyak step towards the zero level of phi
        x.scaled_add(-val, &g);
    }

    if best_val <= tol {
        Some(best_x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn median_of_identical_points() {
        let d = Dataset::new(array![[2.0, -1.0], [2.0, -1.0], [2.0, -1.0]]).unwrap();
        let r = geometric_median(&d, 1e-10, 100);
        assert!(r.converged);
        assert_eq!(r.point, array![2.0, -1.0]);
    }

    #[test]
    fn median_in_one_dimension_is_the_median() {
        let d = Dataset::new(array![[0.0], [1.0], [10.0]]).unwrap();
        let r = geometric_median(&d, 1e-12, 20_000);
        assert_abs_diff_eq!(r.point[0], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn median_of_symmetric_cross_is_origin() {
        let d = Dataset::new(array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let r = geometric_median(&d, 1e-12, 1000);
        assert_abs_diff_eq!(r.point[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.point[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn projection_is_identity_on_feasible_points() {
        let w = project_capped_simplex(&[0.3, 0.3, 0.4], 0.5).unwrap();
        assert_abs_diff_eq!(w.weights()[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(w.weights()[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(w.weights()[2], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn projection_spreads_excess_mass() {
        let w = project_capped_simplex(&[1.0, 0.0, 0.0], 0.5).unwrap();
        assert_abs_diff_eq!(w.weights()[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(w.weights()[1], 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(w.weights()[2], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn projection_with_tight_cap() {
        let w = project_capped_simplex(&[10.0, 0.0, 0.0, 0.0], 1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(w.weights()[0], 1.0 / 3.0, epsilon = 1e-10);
        for i in 1..4 {
            assert_abs_diff_eq!(w.weights()[i], 2.0 / 9.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn infeasible_cap_rejected() {
        assert!(project_capped_simplex(&[0.5, 0.5], 0.3).is_err());
    }

    #[test]
    fn single_ball_returns_center() {
        let x = balls_intersection_point(&[array![3.0, 4.0]], &[0.5], 1e-9).unwrap();
        assert_eq!(x, array![3.0, 4.0]);
    }

    #[test]
    fn tangent_balls_touch_point() {
        let x = balls_intersection_point(
            &[array![0.0, 0.0], array![2.0, 0.0]],
            &[1.0, 1.0],
            1e-7,
        )
        .unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn disjoint_balls_return_none() {
        let r = balls_intersection_point(
            &[array![0.0, 0.0], array![3.0, 0.0]],
            &[1.0, 1.0],
            1e-7,
        );
        assert!(r.is_none());
    }

    #[test]
    fn overlapping_balls_find_witness() {
        let centers = vec![array![0.0, 0.0], array![1.0, 0.0], array![0.5, 0.8]];
        let radii = vec![1.0, 1.0, 1.0];
        let x = balls_intersection_point(&centers, &radii, 1e-7).unwrap();
        for (c, r) in centers.iter().zip(&radii) {
            let d = (&x - c).mapv(|v| v * v).sum().sqrt();
            assert!(d <= r + 1e-6);
        }
    }
}
