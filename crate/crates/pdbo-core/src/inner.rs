use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::{Vector, VectorPair};
use crate::problem::{ProblemSpec, SmoothingParams};

/// Iteration cap for high-accuracy inner solves.
pub const EXACT_ITERATION_CAP: usize = 1_000_000;

/// Estimate ŷ_N of the smoothed inner minimizer at a fixed x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveResult {
    pub y_hat: Vec<f64>,
    /// g(x, ŷ_N) + α/2‖ŷ_N‖².
    pub g_tilde_value: f64,
    pub iterations: usize,
}

impl InnerSolveResult {
    pub fn y_hat_vector(&self) -> Vector {
        Vector::from_column_slice(&self.y_hat)
    }
}

/// Stepsize of the inner projected gradient method: 2/(ρ_g + 2α), or 1/ρ_g when α = 0.
pub fn inner_stepsize(problem: &ProblemSpec, params: &SmoothingParams) -> Result<f64> {
    let rho_g = problem.constants.rho_g;
    if !(rho_g > 0.0) {
        return Err(Error::InvalidConfig("inner solve needs rho_g > 0".into()));
    }
    if params.alpha > 0.0 {
        Ok(2.0 / (rho_g + 2.0 * params.alpha))
    } else {
        Ok(1.0 / rho_g)
    }
}

pub fn smoothed_inner_value(problem: &ProblemSpec, params: &SmoothingParams, x: &Vector, y: &Vector) -> f64 {
    problem.g_value(x, y) + 0.5 * params.alpha * y.norm_squared()
}

#[inline]
fn pgd_step(problem: &ProblemSpec, params: &SmoothingParams, x: &Vector, y: &mut Vector, step: f64) -> Result<()> {
    let mut g = problem.g_grad(x, y).y;
    g.axpy(params.alpha, y, 1.0);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "inner gradient",
            x: x.as_slice().to_vec(),
            y: y.as_slice().to_vec(),
        });
    }
    y.axpy(-step, &g, 1.0);
    problem.set_y.project_in_place(y);
    Ok(())
}

/// `n_steps` of projected gradient descent on g(x,·) + α/2‖·‖² over Y.
pub fn inner_pgd(
    problem: &ProblemSpec,
    params: &SmoothingParams,
    x: &Vector,
    n_steps: usize,
    y_init: &Vector,
) -> Result<InnerSolveResult> {
    let step = inner_stepsize(problem, params)?;
    let mut y = problem.set_y.project(y_init)?;
    for _ in 0..n_steps {
        pgd_step(problem, params, x, &mut y, step)?;
    }
    Ok(InnerSolveResult {
        g_tilde_value: smoothed_inner_value(problem, params, x, &y),
        y_hat: y.as_slice().to_vec(),
        iterations: n_steps,
    })
}

/// Inner PGD run until the step norm falls to `tolerance`.
pub fn inner_solve_to_tolerance(
    problem: &ProblemSpec,
    params: &SmoothingParams,
    x: &Vector,
    y_init: &Vector,
    tolerance: f64,
) -> Result<InnerSolveResult> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be > 0".into()));
    }
    let step = inner_stepsize(problem, params)?;
    let mut y = problem.set_y.project(y_init)?;
    for n in 1..=EXACT_ITERATION_CAP {
        let prev = y.clone();
        pgd_step(problem, params, x, &mut y, step)?;
        if (&y - &prev).norm() <= tolerance {
            return Ok(InnerSolveResult {
                g_tilde_value: smoothed_inner_value(problem, params, x, &y),
                y_hat: y.as_slice().to_vec(),
                iterations: n,
            });
        }
    }
    Err(Error::IterationCap { cap: EXACT_ITERATION_CAP, tolerance })
}

/// ĥ(z) = g(x,y) − g̃(x, ŷ_N) − δ, plus the subproblem regularizer when present.
pub fn constraint_estimate(
    problem: &ProblemSpec,
    params: &SmoothingParams,
    z: &VectorPair,
    inner: &InnerSolveResult,
) -> f64 {
    let mut h = problem.g_value(&z.x, &z.y) - inner.g_tilde_value - params.delta;
    if let Some(prox) = &problem.constraint_prox {
        h += prox.value(&z.x);
    }
    h
}

/// ∇̂h̃(z) = (∇_x g(x,y) − ∇_x g(x,ŷ_N), ∇_y g(x,y)), plus the subproblem regularizer.
pub fn constraint_grad_estimate(
    problem: &ProblemSpec,
    _params: &SmoothingParams,
    z: &VectorPair,
    inner: &InnerSolveResult,
) -> VectorPair {
    let at_z = problem.g_grad(&z.x, &z.y);
    let at_hat = problem.g_grad(&z.x, &inner.y_hat_vector());
    let mut gx = at_z.x - at_hat.x;
    if let Some(prox) = &problem.constraint_prox {
        gx += prox.grad(&z.x);
    }
    VectorPair::new(gx, at_z.y)
}

/// High-accuracy h̃(z): inner solve to `tolerance`, started from the center of Y.
pub fn exact_constraint(
    problem: &ProblemSpec,
    params: &SmoothingParams,
    z: &VectorPair,
    tolerance: f64,
) -> Result<f64> {
    let inner = inner_solve_to_tolerance(problem, params, &z.x, &problem.set_y.center(), tolerance)?;
    Ok(constraint_estimate(problem, params, z, &inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{toy1, toy1_smoothed_inner, toy2};
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn origin_is_fixed_point() {
        let p = toy1();
        let r = inner_pgd(&p, &SmoothingParams::new(0.01, 0.01).unwrap(), &v(&[0.0]), 17, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(r.y_hat, vec![0.0, 0.0]);
    }

    #[test]
    fn converges_to_closed_form() {
        let p = toy1();
        let params = SmoothingParams::new(0.01, 0.01).unwrap();
        let ys = toy1_smoothed_inner(1.0, 0.01);
        let r = inner_pgd(&p, &params, &v(&[1.0]), 2000, &v(&[0.5, 0.5])).unwrap();
        assert!((r.y_hat_vector() - &ys).norm() < 1e-6, "{:?}", r.y_hat);
        assert!((r.y_hat[0] - 0.990099).abs() < 1e-6);
        // y₂ only feels the α term: it shrinks by 1 − 2α/(ρ_g + 2α) per step
        let r = inner_pgd(&p, &params, &v(&[1.0]), 200, &v(&[0.5, 0.5])).unwrap();
        let q = 1.0 - 2.0 * 0.01 / (p.constants.rho_g + 0.02);
        assert!((r.y_hat[1] - 0.5 * q.powi(200)).abs() < 1e-14);
        assert!((r.y_hat[0] - ys[0]).abs() < 1e-12);
    }

    #[test]
    fn performs_exact_step_count() {
        let p = toy1();
        let r = inner_pgd(&p, &SmoothingParams::default(), &v(&[1.0]), 7, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(r.iterations, 7);
    }

    #[test]
    fn infeasible_start_is_projected() {
        let p = toy1();
        let r = inner_pgd(&p, &SmoothingParams::default(), &v(&[1.0]), 0, &v(&[50.0, -50.0])).unwrap();
        assert_eq!(r.y_hat, vec![10.0, -10.0]);
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let set = crate::sets::FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        let p = ProblemSpec::new(
            "nan",
            set.clone(),
            set,
            |_, _| 0.0,
            |x, y| VectorPair::zeros(x.len(), y.len()),
            |_, _| 0.0,
            |x, y| VectorPair::new(Vector::zeros(x.len()), Vector::from_element(y.len(), f64::NAN)),
            toy1().constants,
        );
        let e = inner_pgd(&p, &SmoothingParams::default(), &v(&[0.3]), 3, &v(&[0.1])).unwrap_err();
        match e {
            Error::NonFinite { x, y, .. } => {
                assert_eq!(x, vec![0.3]);
                assert_eq!(y, vec![0.1]);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn constraint_estimate_hand_value() {
        let p = toy1();
        let params = SmoothingParams::new(0.01, 0.01).unwrap();
        let z = VectorPair::from_slices(&[1.0], &[1.0, 1.0]);
        let h = exact_constraint(&p, &params, &z, 1e-12).unwrap();
        let expected = -0.5 + 1.0 / (2.0 * 1.01) - 0.01;
        assert!((h - expected).abs() < 1e-10, "{h}");
        assert!((h + 0.01495).abs() < 1e-5);
    }

    #[test]
    fn constraint_against_itself_is_zero() {
        let p = toy1();
        let params = SmoothingParams::unsmoothed();
        let x = v(&[0.7]);
        let inner = inner_pgd(&p, &params, &x, 3, &v(&[0.2, -0.4])).unwrap();
        let z = VectorPair::new(x, inner.y_hat_vector());
        assert_eq!(constraint_estimate(&p, &params, &z, &inner), 0.0);
        let g = constraint_grad_estimate(&p, &params, &z, &inner);
        assert_eq!(g.x[0], 0.0);
    }

    #[test]
    fn unsmoothed_gap_at_origin_y() {
        let p = toy1();
        let h = exact_constraint(&p, &SmoothingParams::unsmoothed(), &VectorPair::from_slices(&[1.0], &[0.0, 0.0]), 1e-12)
            .unwrap();
        assert!((h - 0.5).abs() < 1e-10);
    }

    #[test]
    fn constraint_at_smoothed_argmin() {
        let p = toy1();
        let params = SmoothingParams::new(0.01, 0.01).unwrap();
        for &x in &[-3.0, 0.0, 0.4, 2.0] {
            let ys = toy1_smoothed_inner(x, 0.01);
            let z = VectorPair::new(v(&[x]), ys.clone());
            let h = exact_constraint(&p, &params, &z, 1e-13).unwrap();
            // g excludes the α term, so h̃ = −α/2‖ỹ*‖² − δ; exactly −δ at x = 0
            let expect = -0.005 * ys.norm_squared() - 0.01;
            assert!((h - expect).abs() < 1e-8, "{h} vs {expect}");
            assert!(h < 0.0);
        }
    }

    #[test]
    fn grad_estimate_hand_values() {
        let p = toy1();
        let exact_at = |z: &VectorPair, alpha: f64| {
            let params = SmoothingParams { alpha, delta: 0.0 };
            let inner = inner_solve_to_tolerance(&p, &params, &z.x, &v(&[0.0, 0.0]), 1e-13).unwrap();
            constraint_grad_estimate(&p, &params, z, &inner)
        };
        let g = exact_at(&VectorPair::from_slices(&[1.0], &[1.0, 1.0]), 0.0);
        assert!(g.norm() < 1e-10);
        let g = exact_at(&VectorPair::from_slices(&[1.0], &[0.5, 0.5]), 0.01);
        assert!((g.x[0] - 0.490099).abs() < 1e-6);
        assert!((g.y[0] + 0.5).abs() < 1e-12 && g.y[1] == 0.0);
    }

    #[test]
    fn toy2_unsmoothed_constraint_vanishes_at_optimum() {
        let p = toy2(0.0);
        let z = VectorPair::from_slices(&[-PI / 4.0], &[-PI / 4.0]);
        // start the inner solve in the right basin; global optimality is checked by the grid test
        let inner =
            inner_solve_to_tolerance(&p, &SmoothingParams::unsmoothed(), &z.x, &v(&[-0.5]), 1e-12).unwrap();
        let h = constraint_estimate(&p, &SmoothingParams::unsmoothed(), &z, &inner);
        assert!(h.abs() < 1e-12, "{h}");
    }

    #[test]
    fn iteration_cap_reported() {
        let p = toy1();
        let e = inner_solve_to_tolerance(&p, &SmoothingParams::default(), &v(&[1.0]), &v(&[0.0, 0.0]), -1.0);
        assert!(e.is_err());
    }
}
