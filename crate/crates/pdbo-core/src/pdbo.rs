use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::{constraint_estimate, constraint_grad_estimate, inner_pgd};
use crate::pair::{Vector, VectorPair};
use crate::problem::{CallCounts, ProblemSpec, SmoothingParams};
use crate::schedule::{ConstantSteps, Schedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdboConfig {
    pub smoothing: SmoothingParams,
    pub schedule: Schedule,
    /// Upper end B of the dual interval [0, B]. Must equal the schedule's B in theory mode.
    pub dual_bound: f64,
    pub n_inner: usize,
    pub t_max: usize,
    pub z_init: VectorPair,
    pub lambda_init: f64,
    pub inner_warm_start: bool,
    pub record_every: usize,
}

impl PdboConfig {
    /// Constant-stepsize configuration with warm starts and full recording.
    pub fn constant(
        smoothing: SmoothingParams,
        steps: ConstantSteps,
        dual_bound: f64,
        n_inner: usize,
        t_max: usize,
        z_init: VectorPair,
        lambda_init: f64,
    ) -> Self {
        PdboConfig {
            smoothing,
            schedule: Schedule::Constant(steps),
            dual_bound,
            n_inner,
            t_max,
            z_init,
            lambda_init,
            inner_warm_start: true,
            record_every: 1,
        }
    }

    pub fn validate(&self, problem: &ProblemSpec) -> Result<()> {
        self.smoothing.validate()?;
        self.schedule.validate()?;
        problem.check_pair(&self.z_init)?;
        if !(self.dual_bound > 0.0 && self.dual_bound.is_finite()) {
            return Err(Error::InvalidConfig(format!("dual bound must be > 0, got {}", self.dual_bound)));
        }
        if let Schedule::Theory(p) = &self.schedule {
            if (p.dual_bound - self.dual_bound).abs() > 1e-12 * self.dual_bound.max(1.0) {
                return Err(Error::InvalidConfig(format!(
                    "theory schedule B ({}) differs from dual bound ({})",
                    p.dual_bound, self.dual_bound
                )));
            }
        }
        if self.n_inner < 1 || self.t_max < 1 || self.record_every < 1 {
            return Err(Error::InvalidConfig("n_inner, t_max and record_every must be >= 1".into()));
        }
        if !(0.0..=self.dual_bound).contains(&self.lambda_init) {
            return Err(Error::InvalidConfig(format!(
                "lambda_init {} outside [0, {}]",
                self.lambda_init, self.dual_bound
            )));
        }
        if !(problem.constants.rho_g > 0.0) {
            return Err(Error::InvalidConfig("problem constants need rho_g > 0".into()));
        }
        Ok(())
    }
}

/// One recorded iteration. Row `t` describes the iterate after `t` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub f_value: f64,
    /// Constraint estimate that drove this update (absent for baselines).
    pub h_hat: Option<f64>,
    /// Dual variable after this update (absent for baselines).
    pub lambda: Option<f64>,
    pub step_norm: f64,
    pub grad_calls_cum: u64,
    pub wall_time_s: f64,
    pub z: VectorPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdboResult {
    /// γ-weighted average of z_1..z_T.
    pub z_bar: VectorPair,
    pub z_last: VectorPair,
    pub lambda_last: f64,
    /// Largest λ seen at any iteration (not only recorded ones).
    pub lambda_max: f64,
    pub gamma_sum: f64,
    pub trajectory: Vec<IterationRecord>,
    pub grad_calls: CallCounts,
}

/// λ_{t+1} = clamp(λ_t + ((1+θ)ĥ_t − θĥ_{t−1})/τ, 0, B).
pub fn dual_step(lambda_t: f64, h_hat_t: f64, h_hat_prev: f64, tau_t: f64, theta_t: f64, bound: f64) -> Result<f64> {
    if ![lambda_t, h_hat_t, h_hat_prev, tau_t, theta_t, bound].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput("dual_step"));
    }
    if !(tau_t > 0.0) || !(bound > 0.0) {
        return Err(Error::InvalidConfig("dual_step needs tau > 0 and B > 0".into()));
    }
    let drive = (1.0 + theta_t) * h_hat_t - theta_t * h_hat_prev;
    Ok((lambda_t + drive / tau_t).clamp(0.0, bound))
}

/// z_{t+1} = Π_Z(z_t − (∇f + λ∇̂h̃)/η).
pub fn primal_step(
    problem: &ProblemSpec,
    z_t: &VectorPair,
    grad_f: &VectorPair,
    lambda_next: f64,
    grad_h_hat: &VectorPair,
    eta_t: f64,
) -> Result<VectorPair> {
    if !(eta_t > 0.0) {
        return Err(Error::InvalidConfig("primal_step needs eta > 0".into()));
    }
    if !grad_f.is_finite() || !grad_h_hat.is_finite() || !lambda_next.is_finite() {
        return Err(Error::NonFinite {
            what: "lagrangian gradient",
            x: z_t.x.as_slice().to_vec(),
            y: z_t.y.as_slice().to_vec(),
        });
    }
    let s = 1.0 / eta_t;
    let mut z = z_t.clone();
    z.axpy(-s, grad_f);
    z.axpy(-s * lambda_next, grad_h_hat);
    problem.set_x.project_in_place(&mut z.x);
    problem.set_y.project_in_place(&mut z.y);
    Ok(z)
}

/// Primal-dual bilevel optimizer.
pub fn run_pdbo(problem: &ProblemSpec, config: &PdboConfig) -> Result<PdboResult> {
    config.validate(problem)?;
    let start = Instant::now();
    let params = &config.smoothing;
    let bound = config.dual_bound;
    let n = config.n_inner as u64;

    let mut z = problem.project_z(&config.z_init)?;
    let mut lambda = config.lambda_init;
    let mut lambda_max = lambda;
    let mut y_start: Vector = problem.set_y.center();
    let mut h_prev: Option<f64> = None;
    let mut calls = CallCounts::default();
    let (p, d) = problem.dims();
    let mut z_sum = VectorPair::zeros(p, d);
    let mut gamma_sum = 0.0;
    let mut trajectory = Vec::with_capacity(config.t_max / config.record_every + 1);

    for t in 0..config.t_max {
        let step = config.schedule.at(t);
        let inner = inner_pgd(problem, params, &z.x, config.n_inner, &y_start).map_err(|e| e.at_iteration(t))?;
        let h = constraint_estimate(problem, params, &z, &inner);
        let grad_h = constraint_grad_estimate(problem, params, &z, &inner);
        let grad_f = problem.f_grad(&z.x, &z.y);
        calls.g_grad += n + 2;
        calls.g_value += 2;
        calls.f_grad += 1;

        let prev = *h_prev.get_or_insert(h);
        let lambda_next =
            dual_step(lambda, h, prev, step.tau, step.theta, bound).map_err(|e| e.at_iteration(t))?;
        let z_next = primal_step(problem, &z, &grad_f, lambda_next, &grad_h, step.eta).map_err(|e| e.at_iteration(t))?;

        z_sum.axpy(step.gamma, &z_next);
        gamma_sum += step.gamma;
        lambda_max = lambda_max.max(lambda_next);

        let done = t + 1;
        if done % config.record_every == 0 || done == config.t_max {
            calls.f_value += 1;
            trajectory.push(IterationRecord {
                t: done,
                f_value: problem.f_at(&z_next),
                h_hat: Some(h),
                lambda: Some(lambda_next),
                step_norm: z_next.distance(&z),
                grad_calls_cum: calls.gradient_calls(),
                wall_time_s: start.elapsed().as_secs_f64(),
                z: z_next.clone(),
            });
        }

        h_prev = Some(h);
        lambda = lambda_next;
        z = z_next;
        if config.inner_warm_start {
            y_start = inner.y_hat_vector();
        }
    }

    let mut z_bar = z_sum.scale(1.0 / gamma_sum);
    // Guard against rounding drift outside Z.
    z_bar = problem.project_z(&z_bar)?;
    Ok(PdboResult {
        z_bar,
        z_last: z,
        lambda_last: lambda,
        lambda_max,
        gamma_sum,
        trajectory,
        grad_calls: calls,
    })
}

/// Gradient-type calls per PDBO iteration: one ∇f and N + 2 ∇g.
pub fn pdbo_cost_per_iteration(n_inner: usize) -> u64 {
    n_inner as u64 + 3
}
