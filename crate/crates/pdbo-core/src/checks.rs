//! Numerical self-checks for a problem definition: finite-difference gradients and HVPs,
//! schedule identities, inner contraction and inner convexity.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inner::{inner_pgd, inner_solve_to_tolerance};
use crate::pair::{Vector, VectorPair};
use crate::problem::{ProblemSpec, SmoothingParams};
use crate::schedule::{Schedule, TheoryParams};

/// Relative error allowed between analytic and finite-difference derivatives.
pub const FD_TOLERANCE: f64 = 1e-5;
/// Slack allowed on the inner contraction bound.
pub const CONTRACTION_SLACK: f64 = 1e-9;
/// Smoothing used by the contraction check.
pub const CONTRACTION_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped(String),
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckStatus::Pass => f.write_str("PASS"),
            CheckStatus::Fail => f.write_str("FAIL"),
            CheckStatus::Skipped(why) => write!(f, "SKIPPED({why})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    /// Worst observed error (or violation) across samples.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn measured(name: &str, worst: f64, tolerance: f64) -> Self {
        let status = if worst <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        CheckOutcome { name: name.into(), status, worst, tolerance }
    }

    fn skipped(name: &str, why: &str, tolerance: f64) -> Self {
        CheckOutcome { name: name.into(), status: CheckStatus::Skipped(why.into()), worst: 0.0, tolerance }
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

/// ‖a − b‖ / max(‖a‖, ‖b‖, 1).
pub fn relative_error(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Central-difference gradient of a scalar function of (x, y).
pub fn fd_gradient(value: impl Fn(&Vector, &Vector) -> f64, z: &VectorPair) -> VectorPair {
    let mut w = z.concat();
    let p = z.x.len();
    let mut g = Vector::zeros(w.len());
    for i in 0..w.len() {
        let h = fd_step(w[i]);
        let orig = w[i];
        w[i] = orig + h;
        let up = value(&w.rows(0, p).into(), &w.rows(p, w.len() - p).into());
        w[i] = orig - h;
        let dn = value(&w.rows(0, p).into(), &w.rows(p, w.len() - p).into());
        w[i] = orig;
        g[i] = (up - dn) / (2.0 * h);
    }
    VectorPair::from_concat(&g, p).expect("same split")
}

/// Central difference of a gradient along y-direction `v`: returns
/// (∇²_yx · v, ∇²_yy · v) as (x-block, y-block).
pub fn fd_hvp_y(grad: impl Fn(&Vector, &Vector) -> VectorPair, z: &VectorPair, v: &Vector) -> VectorPair {
    let h = 1e-6 * z.y.norm().max(1.0) / v.norm().max(1e-300);
    let up = grad(&z.x, &(&z.y + v * h));
    let dn = grad(&z.x, &(&z.y - v * h));
    up.sub(&dn).scale(1.0 / (2.0 * h))
}

fn sample_points(problem: &ProblemSpec, samples: usize, seed: u64) -> Vec<VectorPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| VectorPair::new(problem.set_x.sample(&mut rng), problem.set_y.sample(&mut rng)))
        .collect()
}

fn unit_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    use rand::Rng;
    let v = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vector::from_element(dim, 1.0 / (dim as f64).sqrt())
    }
}

fn worst_over(points: &[VectorPair], mut err: impl FnMut(&VectorPair) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for z in points {
        let e = err(z)?;
        // NaN counts as a failure
        worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
    }
    Ok(worst)
}

/// Run every check on `problem` at `samples` random feasible points.
pub fn run_checks(problem: &ProblemSpec, samples: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let points = sample_points(problem, samples, seed);
    let mut dir_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let (_, d) = problem.dims();
    let dirs: Vec<Vector> = (0..samples).map(|_| unit_direction(d, &mut dir_rng)).collect();
    let mut out = Vec::new();

    let w = worst_over(&points, |z| {
        let a = problem.f_grad(&z.x, &z.y).concat();
        let fd = fd_gradient(|x, y| problem.f_value(x, y), z).concat();
        Ok(relative_error(&a, &fd))
    })?;
    out.push(CheckOutcome::measured("grad_f", w, FD_TOLERANCE));

    let w = worst_over(&points, |z| {
        let a = problem.g_grad(&z.x, &z.y).concat();
        let fd = fd_gradient(|x, y| problem.g_value(x, y), z).concat();
        Ok(relative_error(&a, &fd))
    })?;
    out.push(CheckOutcome::measured("grad_g", w, FD_TOLERANCE));

    for (name, has, which_f) in [("hvp_g", problem.has_hvp_g(), false), ("hvp_f", problem.has_hvp_f(), true)] {
        if !has {
            out.push(CheckOutcome::skipped(name, "not-provided", FD_TOLERANCE));
            continue;
        }
        let mut i = 0;
        let w = worst_over(&points, |z| {
            let v = &dirs[i];
            i += 1;
            let (yy, xy, fd) = if which_f {
                (problem.hvp_f_yy(&z.x, &z.y, v)?, problem.hvp_f_xy(&z.x, &z.y, v)?, fd_hvp_y(|x, y| problem.f_grad(x, y), z, v))
            } else {
                (problem.hvp_g_yy(&z.x, &z.y, v)?, problem.hvp_g_xy(&z.x, &z.y, v)?, fd_hvp_y(|x, y| problem.g_grad(x, y), z, v))
            };
            Ok(relative_error(&yy, &fd.y).max(relative_error(&xy, &fd.x)))
        })?;
        out.push(CheckOutcome::measured(name, w, FD_TOLERANCE));
    }

    out.push(schedule_check(problem)?);

    if problem.violates_inner_convexity {
        out.push(CheckOutcome::skipped("inner_contraction", "nonconvex-flag", CONTRACTION_SLACK));
        out.push(CheckOutcome::skipped("inner_convexity", "nonconvex-flag", FD_TOLERANCE));
    } else {
        out.push(contraction_check(problem, &points)?);
        let mut i = 0;
        let w = worst_over(&points, |z| {
            let v = &dirs[i];
            i += 1;
            let hv = fd_hvp_y(|x, y| problem.g_grad(x, y), z, v).y;
            // curvature along a unit direction, relative to ρ_g
            Ok((-hv.dot(v) / problem.constants.rho_g.max(1.0)).max(0.0))
        })?;
        out.push(CheckOutcome::measured("inner_convexity", w, FD_TOLERANCE));
    }
    Ok(out)
}

/// γ_tθ_t = γ_{t−1}, γ_tτ_t nonincreasing and γ_tη_t ≥ γ_{t+1}(η_{t+1} − μ) for t < 1000.
/// Worst relative violation is reported. Problems without strong convexity use their
/// proximal-subproblem schedule.
fn schedule_check(problem: &ProblemSpec) -> Result<CheckOutcome> {
    let smoothing = SmoothingParams::default();
    let params = if problem.constants.mu > 0.0 {
        TheoryParams::for_problem(&problem.constants, &smoothing, Some(10.0))?
    } else {
        TheoryParams::for_subproblem(&problem.constants, &smoothing, Some(10.0))?
    };
    let s = Schedule::Theory(params);
    let mut worst = 0.0f64;
    for t in 1..1000 {
        let (prev, cur, next) = (s.at(t - 1), s.at(t), s.at(t + 1));
        let rel = |a: f64, b: f64| (a - b) / a.abs().max(b.abs()).max(1e-300);
        worst = worst.max(rel(cur.gamma * cur.theta, prev.gamma).abs());
        worst = worst.max(rel(next.gamma * next.tau, cur.gamma * cur.tau).max(0.0));
        worst = worst.max(rel(next.gamma * (next.eta - params.mu), cur.gamma * cur.eta).max(0.0));
    }
    Ok(CheckOutcome::measured("schedule", worst, 1e-12))
}

/// ‖ŷ_N − ỹ*‖ ≤ (1 − α/(ρ_g+2α))^N ‖ŷ_0 − ỹ*‖ for N ≤ 50, reported relative to ‖ŷ_0 − ỹ*‖.
fn contraction_check(problem: &ProblemSpec, points: &[VectorPair]) -> Result<CheckOutcome> {
    let params = SmoothingParams::new(CONTRACTION_ALPHA, 1e-3)?;
    let q = 1.0 - params.alpha / (problem.constants.rho_g + 2.0 * params.alpha);
    let mut worst = 0.0f64;
    for z in points {
        let star = inner_solve_to_tolerance(problem, &params, &z.x, &z.y, 1e-13)?.y_hat_vector();
        let e0 = (&z.y - &star).norm();
        let mut y = z.y.clone();
        for n in 1..=50 {
            y = inner_pgd(problem, &params, &z.x, 1, &y)?.y_hat_vector();
            let err = (&y - &star).norm();
            let violation = (err - q.powi(n) * e0) / e0.max(1.0);
            worst = worst.max(violation);
        }
    }
    Ok(CheckOutcome::measured("inner_contraction", worst.max(0.0), CONTRACTION_SLACK))
}
