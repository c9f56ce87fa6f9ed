use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::VectorPair;
use crate::pdbo::{run_pdbo, IterationRecord, PdboConfig};
use crate::problem::{CallCounts, ConstraintProx, ProblemSpec, SmoothingParams};
use crate::schedule::{Schedule, TheoryParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximalConfig {
    /// Per-subproblem PDBO settings; `z_init` and `lambda_init` are overwritten for each subproblem.
    pub pdbo: PdboConfig,
    pub k_max: usize,
    pub rng_seed: u64,
    pub z_tilde_init: VectorPair,
}

impl ProximalConfig {
    /// Theory-schedule configuration built from the subproblem constants of `problem`.
    /// `dual_bound` defaults to (D_f + ρ_f D_Z²)/δ + 1.
    #[allow(clippy::too_many_arguments)]
    pub fn theory(
        problem: &ProblemSpec,
        smoothing: SmoothingParams,
        dual_bound: Option<f64>,
        n_inner: usize,
        t_max: usize,
        k_max: usize,
        rng_seed: u64,
        z_tilde_init: VectorPair,
    ) -> Result<Self> {
        let params = TheoryParams::for_subproblem(&problem.constants, &smoothing, dual_bound)?;
        Ok(ProximalConfig {
            pdbo: PdboConfig {
                smoothing,
                schedule: Schedule::Theory(params),
                dual_bound: params.dual_bound,
                n_inner,
                t_max,
                z_init: z_tilde_init.clone(),
                lambda_init: 0.0,
                inner_warm_start: true,
                record_every: 1,
            },
            k_max,
            rng_seed,
            z_tilde_init,
        })
    }
}

/// What is kept from each subproblem run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSummary {
    pub k: usize,
    pub z_bar: VectorPair,
    pub z_last: VectorPair,
    pub lambda_last: f64,
    pub lambda_max: f64,
    pub grad_calls: CallCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximalResult {
    pub z_out: VectorPair,
    pub k_hat: usize,
    /// Final dual variable of subproblem k̂.
    pub lambda_out: f64,
    /// z̃_0..z̃_K.
    pub centers: Vec<VectorPair>,
    pub per_subproblem: Vec<SubproblemSummary>,
    /// All subproblem trajectories back to back; `t` counts PDBO iterations overall
    /// and `f_value` is the original objective.
    pub trajectory: Vec<IterationRecord>,
    pub grad_calls: CallCounts,
}

/// Subproblem centered at `center`: objective f + ρ_f‖z − center‖², constraint
/// regularizer ρ‖x − center.x‖² with ρ = (2αρ_g + ρ_g²)/(2α).
///
/// The returned constants keep ρ_g and L_g, set μ = ρ_f, ρ_f ← 3ρ_f and
/// D_f ← D_f + ρ_f D_Z². Schedules should come from [`TheoryParams::for_subproblem`]
/// applied to the original problem's constants.
pub fn build_subproblem(problem: &ProblemSpec, params: &SmoothingParams, center: &VectorPair) -> Result<ProblemSpec> {
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidConfig("proximal subproblems need alpha > 0".into()));
    }
    if problem.constraint_prox.is_some() {
        return Err(Error::Unsupported("nested proximal subproblems".into()));
    }
    problem.check_pair(center)?;
    let c = problem.constants;
    let w = c.rho_f;
    let (f_value, f_grad, hvp_yy, hvp_xy) = problem.objective_parts();

    let cv = center.clone();
    let value = Arc::new(move |x: &crate::pair::Vector, y: &crate::pair::Vector| {
        f_value(x, y) + w * ((x - &cv.x).norm_squared() + (y - &cv.y).norm_squared())
    });
    let cg = center.clone();
    let grad = Arc::new(move |x: &crate::pair::Vector, y: &crate::pair::Vector| {
        let mut g = f_grad(x, y);
        g.x.axpy(2.0 * w, &(x - &cg.x), 1.0);
        g.y.axpy(2.0 * w, &(y - &cg.y), 1.0);
        g
    });

    let mut sub = problem.clone().with_objective(value, grad);
    let hvp_yy = hvp_yy.map(|h| {
        Arc::new(move |x: &crate::pair::Vector, y: &crate::pair::Vector, v: &crate::pair::Vector| h(x, y, v) + v * (2.0 * w))
            as crate::problem::HvpFn
    });
    sub.set_hvp_f(hvp_yy, hvp_xy);
    sub.name = format!("{}-prox", problem.name);
    sub.constraint_prox = Some(ConstraintProx { center_x: center.x.clone(), weight: c.prox_constraint_weight(params.alpha) });
    sub.constants.mu = c.rho_f;
    sub.constants.rho_f = 3.0 * c.rho_f;
    sub.constants.d_f = c.d_f + c.rho_f * c.d_z * c.d_z;
    sub.reference = None;
    Ok(sub)
}

/// Draw k̂ uniformly from 1..=K.
pub fn draw_k_hat(k_max: usize, rng_seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(rng_seed).random_range(1..=k_max)
}

/// Proximal-PDBO: K chained strongly convex subproblems, random output index.
pub fn run_proximal_pdbo(problem: &ProblemSpec, config: &ProximalConfig) -> Result<ProximalResult> {
    if config.k_max < 1 {
        return Err(Error::InvalidConfig("k_max must be >= 1".into()));
    }
    let mut center = problem.project_z(&config.z_tilde_init)?;
    let mut centers = vec![center.clone()];
    let mut per_subproblem = Vec::with_capacity(config.k_max);
    let mut trajectory = Vec::new();
    let mut calls = CallCounts::default();
    let mut t_offset = 0;
    let mut time_offset = 0.0;

    for k in 1..=config.k_max {
        let sub = build_subproblem(problem, &config.pdbo.smoothing, &center).map_err(|e| e.at_subproblem(k))?;
        let mut cfg = config.pdbo.clone();
        cfg.z_init = center.clone();
        cfg.lambda_init = 0.0;
        let res = run_pdbo(&sub, &cfg).map_err(|e| e.at_subproblem(k))?;

        let base_calls = calls.gradient_calls();
        for rec in &res.trajectory {
            trajectory.push(IterationRecord {
                t: t_offset + rec.t,
                f_value: problem.f_at(&rec.z),
                grad_calls_cum: base_calls + rec.grad_calls_cum,
                wall_time_s: time_offset + rec.wall_time_s,
                ..rec.clone()
            });
        }
        t_offset += cfg.t_max;
        time_offset += res.trajectory.last().map(|r| r.wall_time_s).unwrap_or(0.0);
        calls.add(&res.grad_calls);

        center = res.z_bar.clone();
        centers.push(center.clone());
        per_subproblem.push(SubproblemSummary {
            k,
            z_bar: res.z_bar,
            z_last: res.z_last,
            lambda_last: res.lambda_last,
            lambda_max: res.lambda_max,
            grad_calls: res.grad_calls,
        });
    }

    let k_hat = draw_k_hat(config.k_max, config.rng_seed);
    Ok(ProximalResult {
        z_out: centers[k_hat].clone(),
        k_hat,
        lambda_out: per_subproblem[k_hat - 1].lambda_last,
        centers,
        per_subproblem,
        trajectory,
        grad_calls: calls,
    })
}
