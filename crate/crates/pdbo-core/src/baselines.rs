use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::{Vector, VectorPair};
use crate::pdbo::IterationRecord;
use crate::problem::{CallCounts, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    ItdR,
    AidFp,
    BigSamItd,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::ItdR => "itd-r",
            BaselineMethod::AidFp => "aid-fp",
            BaselineMethod::BigSamItd => "bigsam-itd",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "itd-r" => Ok(BaselineMethod::ItdR),
            "aid-fp" => Ok(BaselineMethod::AidFp),
            "bigsam-itd" => Ok(BaselineMethod::BigSamItd),
            other => Err(Error::InvalidConfig(format!("unknown baseline {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub inner_steps: usize,
    pub inner_stepsize: f64,
    pub outer_stepsize: f64,
    pub outer_steps: usize,
    pub fp_iterations: usize,
    pub averaging: f64,
    pub z_init: VectorPair,
    pub record_every: usize,
}

impl BaselineConfig {
    /// Inner/outer learning rates 0.5/0.2 with `inner_steps` steps and M = inner_steps.
    pub fn with_rates(inner_steps: usize, outer_steps: usize, z_init: VectorPair) -> Self {
        BaselineConfig {
            inner_steps,
            inner_stepsize: 0.5,
            outer_stepsize: 0.2,
            outer_steps,
            fp_iterations: inner_steps,
            averaging: 0.5,
            z_init,
            record_every: 1,
        }
    }

    pub fn validate(&self, problem: &ProblemSpec, method: BaselineMethod) -> Result<()> {
        problem.check_pair(&self.z_init)?;
        if self.inner_steps < 1 || self.record_every < 1 {
            return Err(Error::InvalidConfig("inner_steps and record_every must be >= 1".into()));
        }
        if method == BaselineMethod::AidFp && self.fp_iterations < 1 {
            return Err(Error::InvalidConfig("fp_iterations must be >= 1".into()));
        }
        if !(self.inner_stepsize > 0.0) || !(self.outer_stepsize > 0.0) {
            return Err(Error::InvalidConfig("stepsizes must be > 0".into()));
        }
        if method == BaselineMethod::BigSamItd && !(self.averaging > 0.0 && self.averaging < 1.0) {
            return Err(Error::InvalidConfig(format!("averaging must lie in (0,1), got {}", self.averaging)));
        }
        if !problem.has_hvp_g() {
            return Err(Error::MissingHvp("hvp_g_yy/hvp_g_xy"));
        }
        if method == BaselineMethod::BigSamItd && !problem.has_hvp_f() {
            return Err(Error::MissingHvp("hvp_f_yy/hvp_f_xy"));
        }
        Ok(())
    }

    /// Gradient-type calls per outer step.
    pub fn cost_per_iteration(&self, method: BaselineMethod) -> u64 {
        let k = self.inner_steps as u64;
        match method {
            BaselineMethod::ItdR => 3 * k + 1,
            BaselineMethod::AidFp => k + self.fp_iterations as u64 + 2,
            BaselineMethod::BigSamItd => 6 * k + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub z_last: VectorPair,
    pub last_hypergrad_norm: f64,
    pub trajectory: Vec<IterationRecord>,
    pub grad_calls: CallCounts,
}

/// Inner map y ← Π_Y(y − β·D(y)), D = ∇_y g, or for BigSAM avg·∇_y g + (1−avg)·∇_y f.
#[derive(Clone, Copy)]
enum InnerMap {
    Gradient,
    Averaged(f64),
}

impl InnerMap {
    fn direction(self, problem: &ProblemSpec, x: &Vector, y: &Vector, calls: &mut CallCounts) -> Vector {
        calls.g_grad += 1;
        let gy = problem.g_grad(x, y).y;
        match self {
            InnerMap::Gradient => gy,
            InnerMap::Averaged(w) => {
                calls.f_grad += 1;
                gy * w + problem.f_grad(x, y).y * (1.0 - w)
            }
        }
    }

    /// (∂D/∂y)ᵀa and (∂D/∂x)ᵀa.
    fn adjoint(self, problem: &ProblemSpec, x: &Vector, y: &Vector, a: &Vector, calls: &mut CallCounts) -> Result<(Vector, Vector)> {
        calls.hvp += 2;
        let yy = problem.hvp_g_yy(x, y, a)?;
        let xy = problem.hvp_g_xy(x, y, a)?;
        match self {
            InnerMap::Gradient => Ok((yy, xy)),
            InnerMap::Averaged(w) => {
                calls.hvp += 2;
                let fyy = problem.hvp_f_yy(x, y, a)?;
                let fxy = problem.hvp_f_xy(x, y, a)?;
                Ok((yy * w + fyy * (1.0 - w), xy * w + fxy * (1.0 - w)))
            }
        }
    }
}

fn unrolled_reverse(
    problem: &ProblemSpec,
    map: InnerMap,
    x: &Vector,
    y0: &Vector,
    k_in: usize,
    beta: f64,
    calls: &mut CallCounts,
) -> Result<(Vector, Vector)> {
    let mut ys = Vec::with_capacity(k_in + 1);
    let mut clipped = Vec::with_capacity(k_in);
    let mut y = problem.set_y.project(y0)?;
    ys.push(y.clone());
    for _ in 0..k_in {
        let free = &y - map.direction(problem, x, &y, calls) * beta;
        let mut next = free.clone();
        problem.set_y.project_in_place(&mut next);
        clipped.push(free.iter().zip(next.iter()).map(|(a, b)| a != b).collect::<Vec<bool>>());
        y = next;
        ys.push(y.clone());
    }
    calls.f_grad += 1;
    let gf = problem.f_grad(x, &y);
    let mut a = gf.y;
    let mut p = gf.x;
    for k in (0..k_in).rev() {
        for (ai, c) in a.iter_mut().zip(&clipped[k]) {
            if *c {
                *ai = 0.0;
            }
        }
        let (ayy, axy) = map.adjoint(problem, x, &ys[k], &a, calls)?;
        p.axpy(-beta, &axy, 1.0);
        a.axpy(-beta, &ayy, 1.0);
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "hypergradient", x: x.as_slice().to_vec(), y: y.as_slice().to_vec() });
    }
    Ok((p, y))
}

/// Reverse-mode hypergradient through `k_in` projected inner gradient steps.
/// Returns (∇_x of f(x, y_K(x)), y_K).
pub fn hypergrad_itd_reverse(problem: &ProblemSpec, x: &Vector, y0: &Vector, k_in: usize, beta: f64) -> Result<(Vector, Vector)> {
    if !problem.has_hvp_g() {
        return Err(Error::MissingHvp("hvp_g_yy/hvp_g_xy"));
    }
    unrolled_reverse(problem, InnerMap::Gradient, x, y0, k_in, beta, &mut CallCounts::default())
}

/// The unrolled inner iterate y_K(x) (forward map of the ITD hypergradient).
pub fn unrolled_inner(problem: &ProblemSpec, x: &Vector, y0: &Vector, k_in: usize, beta: f64) -> Result<Vector> {
    let mut calls = CallCounts::default();
    let mut y = problem.set_y.project(y0)?;
    for _ in 0..k_in {
        y = &y - InnerMap::Gradient.direction(problem, x, &y, &mut calls) * beta;
        problem.set_y.project_in_place(&mut y);
    }
    Ok(y)
}

fn aid_fp(problem: &ProblemSpec, x: &Vector, y_hat: &Vector, m: usize, beta: f64, calls: &mut CallCounts) -> Result<Vector> {
    calls.f_grad += 1;
    let gf = problem.f_grad(x, y_hat);
    let mut v = Vector::zeros(y_hat.len());
    for _ in 0..m {
        calls.hvp += 1;
        let hv = problem.hvp_g_yy(x, y_hat, &v)?;
        v.axpy(-beta, &(hv - &gf.y), 1.0);
    }
    calls.hvp += 1;
    let out = gf.x - problem.hvp_g_xy(x, y_hat, &v)?;
    if out.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what: "hypergradient", x: x.as_slice().to_vec(), y: y_hat.as_slice().to_vec() });
    }
    Ok(out)
}

/// Implicit hypergradient with an M-step fixed-point solve of ∇²_yy g · v = ∇_y f.
pub fn hypergrad_aid_fp(problem: &ProblemSpec, x: &Vector, y_hat: &Vector, m: usize, beta: f64) -> Result<Vector> {
    if !problem.has_hvp_g() {
        return Err(Error::MissingHvp("hvp_g_yy/hvp_g_xy"));
    }
    aid_fp(problem, x, y_hat, m, beta, &mut CallCounts::default())
}

/// Projected hypergradient descent on x with a warm-started inner solver.
pub fn run_baseline(problem: &ProblemSpec, method: BaselineMethod, config: &BaselineConfig) -> Result<RunResult> {
    config.validate(problem, method)?;
    let start = Instant::now();
    let mut calls = CallCounts::default();
    let mut z = problem.project_z(&config.z_init)?;
    let mut last_norm = f64::NAN;
    let mut trajectory = Vec::new();
    let beta = config.inner_stepsize;
    let k_in = config.inner_steps;

    for s in 0..config.outer_steps {
        let (grad, y_next) = match method {
            BaselineMethod::ItdR => unrolled_reverse(problem, InnerMap::Gradient, &z.x, &z.y, k_in, beta, &mut calls),
            BaselineMethod::BigSamItd => {
                unrolled_reverse(problem, InnerMap::Averaged(config.averaging), &z.x, &z.y, k_in, beta, &mut calls)
            }
            BaselineMethod::AidFp => {
                let mut y = z.y.clone();
                for _ in 0..k_in {
                    y = &y - InnerMap::Gradient.direction(problem, &z.x, &y, &mut calls) * beta;
                    problem.set_y.project_in_place(&mut y);
                }
                aid_fp(problem, &z.x, &y, config.fp_iterations, beta, &mut calls).map(|g| (g, y))
            }
        }
        .map_err(|e| e.at_iteration(s))?;

        let mut x_next = &z.x - &grad * config.outer_stepsize;
        problem.set_x.project_in_place(&mut x_next);
        last_norm = grad.norm();
        let next = VectorPair::new(x_next, y_next);

        let done = s + 1;
        if done % config.record_every == 0 || done == config.outer_steps {
            calls.f_value += 1;
            trajectory.push(IterationRecord {
                t: done,
                f_value: problem.f_at(&next),
                h_hat: None,
                lambda: None,
                step_norm: next.distance(&z),
                grad_calls_cum: calls.gradient_calls(),
                wall_time_s: start.elapsed().as_secs_f64(),
                z: next.clone(),
            });
        }
        z = next;
    }
    Ok(RunResult { z_last: z, last_hypergrad_norm: last_norm, trajectory, grad_calls: calls })
}
