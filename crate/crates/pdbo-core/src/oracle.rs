use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::inner::inner_solve_to_tolerance;
use crate::pair::{Vector, VectorPair};
use crate::problem::{ProblemSpec, SmoothingParams};
use crate::sets::FeasibleSet;

/// Best feasible pair found by brute force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub z: VectorPair,
    pub f: f64,
    pub points_evaluated: u64,
}

fn interval(set: &FeasibleSet, what: &str) -> Result<(f64, f64)> {
    match set {
        FeasibleSet::Box { lower, upper } if lower.len() == 1 => Ok((lower[0], upper[0])),
        _ => Err(Error::Unsupported(format!("grid oracle needs a one-dimensional box for {what}"))),
    }
}

fn grid(lo: f64, hi: f64, resolution: f64) -> Result<(usize, f64)> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidConfig("grid resolution must be > 0".into()));
    }
    let n = ((hi - lo) / resolution).round() as usize;
    let h = if n == 0 { 0.0 } else { (hi - lo) / n as f64 };
    Ok((n + 1, h))
}

/// min over the y-grid of g(x, ·), refined by a local unsmoothed descent from the best grid point.
pub fn grid_inner_min(problem: &ProblemSpec, x: &Vector, resolution: f64) -> Result<(f64, f64)> {
    let (lo, hi) = interval(&problem.set_y, "y")?;
    let (n, h) = grid(lo, hi, resolution)?;
    let mut best = (lo, f64::INFINITY);
    let mut y = Vector::zeros(1);
    for j in 0..n {
        y[0] = lo + j as f64 * h;
        let g = problem.g_value(x, &y);
        if g < best.1 {
            best = (y[0], g);
        }
    }
    if problem.constants.rho_g > 0.0 {
        let start = Vector::from_element(1, best.0);
        let local = inner_solve_to_tolerance(problem, &SmoothingParams::unsmoothed(), x, &start, 1e-13)?;
        let g = problem.g_value(x, &local.y_hat_vector());
        if g < best.1 {
            best = (local.y_hat[0], g);
        }
    }
    Ok(best)
}

/// Brute-force bilevel optimum for problems with scalar x and y.
///
/// For each grid x, pairs whose inner value is within ρ_g·h² of the grid minimum count
/// as inner-optimal; the best objective value among them wins.
pub fn grid_bilevel_optimum(problem: &ProblemSpec, resolution: f64, exec: Execution) -> Result<GridOptimum> {
    let (xlo, xhi) = interval(&problem.set_x, "x")?;
    let (ylo, yhi) = interval(&problem.set_y, "y")?;
    let (nx, hx) = grid(xlo, xhi, resolution)?;
    let (ny, hy) = grid(ylo, yhi, resolution)?;
    let slack = problem.constants.rho_g.max(1.0) * hy * hy;

    let rows = exec.map_range(nx, |i| {
        let x = Vector::from_element(1, xlo + i as f64 * hx);
        let mut y = Vector::zeros(1);
        let mut gs = Vec::with_capacity(ny);
        let mut gmin = f64::INFINITY;
        for j in 0..ny {
            y[0] = ylo + j as f64 * hy;
            let g = problem.g_value(&x, &y);
            gmin = gmin.min(g);
            gs.push(g);
        }
        let mut best = (f64::INFINITY, 0.0);
        for (j, g) in gs.iter().enumerate() {
            if *g <= gmin + slack {
                y[0] = ylo + j as f64 * hy;
                let f = problem.f_value(&x, &y);
                if f < best.0 {
                    best = (f, y[0]);
                }
            }
        }
        (best.0, x[0], best.1)
    });

    let mut best = (f64::INFINITY, 0.0, 0.0);
    for r in rows {
        if r.0 < best.0 {
            best = r;
        }
    }
    Ok(GridOptimum {
        z: VectorPair::from_slices(&[best.1], &[best.2]),
        f: best.0,
        points_evaluated: (nx * ny) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{toy1, toy2};
    use std::f64::consts::PI;

    #[test]
    fn inner_min_of_toy2() {
        let p = toy2(0.0);
        let (y, g) = grid_inner_min(&p, &Vector::from_element(1, -PI / 4.0), 1e-4).unwrap();
        assert!((g + 1.0).abs() < 1e-12);
        // −π/4 and −π/4 ± 2π are all in the box; any of them is a minimizer
        assert!(((y + PI / 4.0) / (2.0 * PI)).fract().abs() < 1e-6 || ((y + PI / 4.0) / (2.0 * PI)).round() != 0.0);
    }

    #[test]
    fn coarse_bilevel_grid_finds_toy2_optimum() {
        let r = grid_bilevel_optimum(&toy2(0.0), 1e-2, Execution::Parallel).unwrap();
        assert!((r.z.x[0] + PI / 4.0).abs() < 2e-2, "{r:?}");
        assert!((r.f - PI * PI / 8.0).abs() < 2e-2);
    }

    #[test]
    fn rejects_multidimensional_inner() {
        assert!(grid_bilevel_optimum(&toy1(), 0.1, Execution::Sequential).is_err());
    }
}
