use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::{constraint_estimate, constraint_grad_estimate, inner_solve_to_tolerance};
use crate::oracle::grid_inner_min;
use crate::pair::{Vector, VectorPair};
use crate::problem::{ProblemSpec, SmoothingParams};

/// Default inner accuracy for metric evaluations.
pub const DEFAULT_INNER_TOLERANCE: f64 = 1e-8;
/// Grid resolution of the inner oracle for nonconvex inner problems.
pub const GRID_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub feasibility: f64,
    pub complementarity: f64,
    pub stationarity: f64,
    pub proximity: f64,
}

impl KktResidual {
    /// Largest of feasibility, complementarity and stationarity.
    pub fn max_core(&self) -> f64 {
        self.feasibility.max(self.complementarity).max(self.stationarity)
    }
}

/// KKT residual of the relaxed reformulation at (z, λ), with the inner problem solved to
/// `inner_tolerance`. Stationarity is dist(∇f + λ∇h̃, −N(z; Z)).
pub fn kkt_residual(
    problem: &ProblemSpec,
    params: &SmoothingParams,
    z: &VectorPair,
    lambda: f64,
    inner_tolerance: f64,
) -> Result<KktResidual> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    problem.check_pair(z)?;
    let inner = inner_solve_to_tolerance(problem, params, &z.x, &problem.set_y.center(), inner_tolerance)?;
    let h = constraint_estimate(problem, params, z, &inner);
    let gh = constraint_grad_estimate(problem, params, z, &inner);
    let mut v = problem.f_grad(&z.x, &z.y);
    v.axpy(lambda, &gh);
    let stationarity = problem.set_z().normal_cone_distance(&z.concat(), &v.concat())?;
    Ok(KktResidual {
        feasibility: h.max(0.0),
        complementarity: (lambda * h).abs(),
        stationarity,
        proximity: 0.0,
    })
}

/// As [`kkt_residual`] for a candidate pair (z, ẑ); proximity is ‖z − ẑ‖².
pub fn kkt_residual_pair(
    problem: &ProblemSpec,
    params: &SmoothingParams,
    z: &VectorPair,
    z_hat: &VectorPair,
    lambda: f64,
    inner_tolerance: f64,
) -> Result<KktResidual> {
    let mut r = kkt_residual(problem, params, z, lambda, inner_tolerance)?;
    r.proximity = z.sub(z_hat).norm_squared();
    Ok(r)
}

/// Unsmoothed inner optimal value g*(x): descent for convex inner problems, grid search otherwise.
pub fn inner_optimal_value(problem: &ProblemSpec, x: &Vector, tolerance: f64) -> Result<f64> {
    if problem.violates_inner_convexity {
        return Ok(grid_inner_min(problem, x, GRID_RESOLUTION)?.1);
    }
    let r = inner_solve_to_tolerance(problem, &SmoothingParams::unsmoothed(), x, &problem.set_y.center(), tolerance)?;
    Ok(problem.g_value(x, &r.y_hat_vector()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricField {
    OuterGap,
    InnerGap,
    DistX,
    DistY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMetrics {
    pub outer_gap: Option<f64>,
    pub inner_gap: Option<f64>,
    pub dist_x: Option<f64>,
    pub dist_y: Option<f64>,
}

impl BenchmarkMetrics {
    pub fn get(&self, field: MetricField) -> Result<f64> {
        let (v, name) = match field {
            MetricField::OuterGap => (self.outer_gap, "outer_gap (needs f_star)"),
            MetricField::InnerGap => (self.inner_gap, "inner_gap"),
            MetricField::DistX => (self.dist_x, "dist_x (needs reference point)"),
            MetricField::DistY => (self.dist_y, "dist_y (needs reference point)"),
        };
        v.ok_or(Error::MissingReference(name))
    }
}

/// Outer gap, inner gap and distances to a reference point. Fields whose reference is
/// absent are `None`; [`BenchmarkMetrics::get`] turns those into errors.
pub fn benchmark_metrics(
    problem: &ProblemSpec,
    z: &VectorPair,
    reference: Option<&VectorPair>,
    f_star: Option<f64>,
    with_inner_gap: bool,
) -> Result<BenchmarkMetrics> {
    problem.check_pair(z)?;
    let inner_gap = if with_inner_gap {
        Some(problem.g_at(z) - inner_optimal_value(problem, &z.x, DEFAULT_INNER_TOLERANCE)?)
    } else {
        None
    };
    Ok(BenchmarkMetrics {
        outer_gap: f_star.map(|fs| problem.f_at(z) - fs),
        inner_gap,
        dist_x: reference.map(|r| (&z.x - &r.x).norm()),
        dist_y: reference.map(|r| (&z.y - &r.y).norm()),
    })
}

/// Least-squares slope of log(value) against log(t).
pub fn rate_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: points.len() });
    }
    for &(t, v) in points {
        if !(v > 0.0) {
            return Err(Error::NonPositive(v));
        }
        if !(t > 0.0) {
            return Err(Error::NonPositive(t));
        }
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("rate_slope needs distinct t values".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{toy1, toy1_smoothed_inner, toy2};
    use std::f64::consts::PI;

    #[test]
    fn slope_of_inverse_square() {
        let pts: Vec<(f64, f64)> = [50.0, 100.0, 200.0, 400.0].iter().map(|&t: &f64| (t, 1.0 / (t * t))).collect();
        assert!((rate_slope(&pts).unwrap() + 2.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (1..6).map(|t| (t as f64, 3.0)).collect();
        assert!(rate_slope(&flat).unwrap().abs() < 1e-12);
        assert!(rate_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
        assert!(rate_slope(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn interior_stationary_point() {
        // f = ½‖z‖² style check through toy1 with λ = 0: stationarity is ‖∇f‖
        let p = toy1();
        let params = SmoothingParams::new(0.01, 0.01).unwrap();
        let x = 0.5;
        let z = VectorPair::new(Vector::from_element(1, x), toy1_smoothed_inner(x, 0.01));
        let r = kkt_residual(&p, &params, &z, 0.0, 1e-10).unwrap();
        assert_eq!(r.feasibility, 0.0);
        assert_eq!(r.complementarity, 0.0);
        assert!((r.stationarity - p.f_grad(&z.x, &z.y).norm()).abs() < 1e-12);
    }

    #[test]
    fn kkt_hand_values() {
        let p = toy1();
        let params = SmoothingParams::new(0.01, 0.01).unwrap();
        let z = VectorPair::from_slices(&[1.0], &[1.0, 1.0]);
        let r = kkt_residual(&p, &params, &z, 1.0, 1e-10).unwrap();
        assert_eq!(r.feasibility, 0.0);
        assert!((r.complementarity - 0.01495).abs() < 1e-5);
        // closed form: ∇f(1,(1,1)) = 0, ∇h̃ = (−y₁ + x/(1+α), (y₁ − x, 0))
        let expect = (-1.0 + 1.0 / 1.01f64).abs();
        assert!((r.stationarity - expect).abs() < 1e-8);
    }

    #[test]
    fn proximity_field() {
        let p = toy1();
        let params = SmoothingParams::new(0.01, 0.01).unwrap();
        let z = VectorPair::from_slices(&[1.0], &[1.0, 1.0]);
        let zh = VectorPair::from_slices(&[1.0], &[1.0, 3.0]);
        let r = kkt_residual_pair(&p, &params, &z, &zh, 0.0, 1e-10).unwrap();
        assert!((r.proximity - 4.0).abs() < 1e-15);
    }

    #[test]
    fn benchmark_toy1_values() {
        let p = toy1();
        let r = p.reference.clone().unwrap();
        let m = benchmark_metrics(&p, &VectorPair::from_slices(&[1.0], &[1.0, 1.0]), r.z_star.as_ref(), r.f_star, true)
            .unwrap();
        assert_eq!(m.outer_gap, Some(0.0));
        assert!(m.inner_gap.unwrap().abs() < 1e-12);
        assert_eq!((m.dist_x, m.dist_y), (Some(0.0), Some(0.0)));
        let m = benchmark_metrics(&p, &VectorPair::from_slices(&[1.0], &[0.0, 0.0]), None, None, true).unwrap();
        assert!((m.inner_gap.unwrap() - 0.5).abs() < 1e-10);
        assert!(matches!(m.get(MetricField::DistX), Err(Error::MissingReference(_))));
        assert!(matches!(m.get(MetricField::OuterGap), Err(Error::MissingReference(_))));
    }

    #[test]
    fn benchmark_toy2_at_optimum() {
        let p = toy2(0.0);
        let z = VectorPair::from_slices(&[-PI / 4.0], &[-PI / 4.0]);
        let m = benchmark_metrics(&p, &z, None, Some(PI * PI / 8.0), true).unwrap();
        assert!(m.outer_gap.unwrap().abs() < 1e-15);
        assert!(m.inner_gap.unwrap().abs() < 1e-12);
    }
}
