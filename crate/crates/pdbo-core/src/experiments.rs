//! Calibrated run configurations for the built-in problems and a uniform way to run
//! any method on any problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use crate::error::{Error, Result};
use crate::pair::VectorPair;
use crate::pdbo::{pdbo_cost_per_iteration, run_pdbo, IterationRecord, PdboConfig};
use crate::problem::{CallCounts, ProblemSpec, SmoothingParams};
use crate::problems::HyperOpt;
use crate::proximal::{build_subproblem, run_proximal_pdbo, ProximalConfig};
use crate::schedule::ConstantSteps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pdbo,
    ProximalPdbo,
    ItdR,
    AidFp,
    BigsamItd,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Pdbo, Method::ProximalPdbo, Method::ItdR, Method::AidFp, Method::BigsamItd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pdbo => "pdbo",
            Method::ProximalPdbo => "proximal-pdbo",
            Method::ItdR => BaselineMethod::ItdR.name(),
            Method::AidFp => BaselineMethod::AidFp.name(),
            Method::BigsamItd => BaselineMethod::BigSamItd.name(),
        }
    }

    pub fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Method::ItdR => Some(BaselineMethod::ItdR),
            Method::AidFp => Some(BaselineMethod::AidFp),
            Method::BigsamItd => Some(BaselineMethod::BigSamItd),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// A fully specified run of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodConfig {
    Pdbo(PdboConfig),
    Proximal(ProximalConfig),
    Baseline { method: BaselineMethod, config: BaselineConfig },
}

/// Method-independent view of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutput {
    pub method: Method,
    /// The method's reported solution: z̄ for PDBO, z̃_k̂ for Proximal-PDBO, last iterate otherwise.
    pub z_final: VectorPair,
    pub lambda_final: Option<f64>,
    pub lambda_max: Option<f64>,
    pub trajectory: Vec<IterationRecord>,
    pub grad_calls: CallCounts,
}

impl MethodConfig {
    pub fn method(&self) -> Method {
        match self {
            MethodConfig::Pdbo(_) => Method::Pdbo,
            MethodConfig::Proximal(_) => Method::ProximalPdbo,
            MethodConfig::Baseline { method, .. } => match method {
                BaselineMethod::ItdR => Method::ItdR,
                BaselineMethod::AidFp => Method::AidFp,
                BaselineMethod::BigSamItd => Method::BigsamItd,
            },
        }
    }

    /// Gradient calls per outer iteration (per subproblem iteration for Proximal-PDBO).
    pub fn cost_per_iteration(&self) -> u64 {
        match self {
            MethodConfig::Pdbo(c) => pdbo_cost_per_iteration(c.n_inner),
            MethodConfig::Proximal(c) => pdbo_cost_per_iteration(c.pdbo.n_inner),
            MethodConfig::Baseline { method, config } => config.cost_per_iteration(*method),
        }
    }

    /// Iteration count that fits inside `budget` gradient calls. Proximal-PDBO keeps
    /// K fixed and shrinks T.
    pub fn set_budget(&mut self, budget: u64) -> Result<()> {
        let cost = self.cost_per_iteration();
        let fit = |per: u64| -> Result<usize> {
            let n = budget / per;
            if n == 0 {
                return Err(Error::InvalidConfig(format!("budget {budget} is below one iteration ({per} calls)")));
            }
            Ok(n as usize)
        };
        match self {
            MethodConfig::Pdbo(c) => c.t_max = fit(cost)?,
            MethodConfig::Proximal(c) => c.pdbo.t_max = fit(cost * c.k_max as u64)?,
            MethodConfig::Baseline { config, .. } => config.outer_steps = fit(cost)?,
        }
        Ok(())
    }

    pub fn set_record_every(&mut self, every: usize) {
        match self {
            MethodConfig::Pdbo(c) => c.record_every = every,
            MethodConfig::Proximal(c) => c.pdbo.record_every = every,
            MethodConfig::Baseline { config, .. } => config.record_every = every,
        }
    }

    pub fn z_init(&self) -> &VectorPair {
        match self {
            MethodConfig::Pdbo(c) => &c.z_init,
            MethodConfig::Proximal(c) => &c.z_tilde_init,
            MethodConfig::Baseline { config, .. } => &config.z_init,
        }
    }

    pub fn run(&self, problem: &ProblemSpec) -> Result<MethodOutput> {
        let method = self.method();
        match self {
            MethodConfig::Pdbo(c) => {
                let r = run_pdbo(problem, c)?;
                Ok(MethodOutput {
                    method,
                    z_final: r.z_bar,
                    lambda_final: Some(r.lambda_last),
                    lambda_max: Some(r.lambda_max),
                    trajectory: r.trajectory,
                    grad_calls: r.grad_calls,
                })
            }
            MethodConfig::Proximal(c) => {
                let r = run_proximal_pdbo(problem, c)?;
                let lambda_max = r.per_subproblem.iter().map(|s| s.lambda_max).fold(0.0, f64::max);
                Ok(MethodOutput {
                    method,
                    z_final: r.z_out,
                    lambda_final: Some(r.lambda_out),
                    lambda_max: Some(lambda_max),
                    trajectory: r.trajectory,
                    grad_calls: r.grad_calls,
                })
            }
            MethodConfig::Baseline { method: b, config } => {
                let r = run_baseline(problem, *b, config)?;
                Ok(MethodOutput {
                    method,
                    z_final: r.z_last,
                    lambda_final: None,
                    lambda_max: None,
                    trajectory: r.trajectory,
                    grad_calls: r.grad_calls,
                })
            }
        }
    }
}

pub fn toy1_start_a() -> VectorPair {
    VectorPair::from_slices(&[2.0], &[0.5, 0.5])
}

pub fn toy1_start_b() -> VectorPair {
    VectorPair::from_slices(&[0.0], &[2.0, 2.0])
}

pub fn toy2_start() -> VectorPair {
    VectorPair::from_slices(&[3.0], &[3.0])
}

/// Toy 1 PDBO: dual/primal steps 0.1/0.2, θ = 0, N = 5, λ₀ = 2, T = 1000.
pub fn toy1_pdbo(problem: &ProblemSpec, z0: VectorPair) -> PdboConfig {
    let smoothing = SmoothingParams::default();
    PdboConfig::constant(
        smoothing,
        ConstantSteps { primal_step: 0.2, dual_step: 0.1, theta: 0.0 },
        problem.constants.dual_bound(smoothing.delta),
        5,
        1000,
        z0,
        2.0,
    )
}

/// Toy 1 baselines: inner rate 0.5, outer rate 0.2, K = M = 5, 1000 outer steps.
pub fn toy1_baseline(z0: VectorPair) -> BaselineConfig {
    BaselineConfig::with_rates(5, 1000, z0)
}

/// Toy 2 PDBO.
///
/// Cold inner starts keep ŷ from carrying slack across branches of sin. The primal step
/// must stay below roughly 1/(1+λ*) with λ* ≈ 1.57/√(2δ) ≈ 78, yet steps ≤ 0.01 stall
/// on the branch through (2.36, 2.36); 0.012 sits between the two.
pub fn toy2_pdbo(problem: &ProblemSpec) -> PdboConfig {
    let smoothing = SmoothingParams { alpha: 1e-5, delta: 2e-4 };
    PdboConfig {
        inner_warm_start: false,
        record_every: 1000,
        ..PdboConfig::constant(
            smoothing,
            ConstantSteps { primal_step: 0.012, dual_step: 0.05, theta: 0.0 },
            problem.constants.dual_bound(smoothing.delta),
            5,
            1_250_000,
            toy2_start(),
            0.0,
        )
    }
}

/// Toy 2 Proximal-PDBO with the theory schedule and a small explicit dual bound.
pub fn toy2_proximal(problem: &ProblemSpec) -> Result<ProximalConfig> {
    let mut cfg = ProximalConfig::theory(
        problem,
        SmoothingParams { alpha: 0.1, delta: 2e-4 },
        Some(10.0),
        5,
        2000,
        200,
        0,
        toy2_start(),
    )?;
    cfg.pdbo.record_every = 100;
    Ok(cfg)
}

pub fn toy2_baseline(z0: VectorPair) -> BaselineConfig {
    BaselineConfig { record_every: 10, ..BaselineConfig::with_rates(5, 1000, z0) }
}

/// Proximal-PDBO on toy 1: theory schedule, α = 1, δ = 0.02, B = 2, K = 20, T = 200, N = 20.
pub fn toy1_proximal(problem: &ProblemSpec, seed: u64) -> Result<ProximalConfig> {
    let mut cfg = ProximalConfig::theory(
        problem,
        SmoothingParams { alpha: 1.0, delta: 0.02 },
        Some(2.0),
        20,
        200,
        20,
        seed,
        toy1_start_a(),
    )?;
    cfg.pdbo.record_every = 200;
    Ok(cfg)
}

/// Smoothing used for the rate study on the first toy 1 subproblem.
pub const RATE_SMOOTHING: SmoothingParams = SmoothingParams { alpha: 1.0, delta: 0.02 };

/// The first proximal subproblem of toy 1, centered at (2, (0.5, 0.5)).
pub fn toy1_rate_subproblem(problem: &ProblemSpec) -> Result<ProblemSpec> {
    build_subproblem(problem, &RATE_SMOOTHING, &toy1_start_a())
}

pub fn quadratic_start() -> VectorPair {
    VectorPair::from_slices(&[2.0], &[0.0, 0.0])
}

/// PDBO on the strongly convex quadratic. The relaxation lets y sit √(2δ) away from the
/// inner solution, so δ must be small and the dual step large.
pub fn quadratic_pdbo(problem: &ProblemSpec) -> PdboConfig {
    let smoothing = SmoothingParams { alpha: 1e-6, delta: 1e-5 };
    PdboConfig {
        record_every: 1000,
        ..PdboConfig::constant(
            smoothing,
            ConstantSteps { primal_step: 1e-3, dual_step: 100.0, theta: 0.0 },
            problem.constants.dual_bound(smoothing.delta),
            5,
            400_000,
            quadratic_start(),
            0.0,
        )
    }
}

pub fn quadratic_baseline() -> BaselineConfig {
    BaselineConfig { record_every: 10, ..BaselineConfig::with_rates(20, 1000, quadratic_start()) }
}

/// Gradient-call budget shared by the hyperparameter runs.
pub const HYPEROPT_BUDGET: u64 = 100_000;

/// Initial log-regularization for every weight.
pub const HYPEROPT_INITIAL_REG: f64 = 0.0;

pub fn hyperopt_pdbo(ho: &HyperOpt) -> PdboConfig {
    let smoothing = SmoothingParams::default();
    let mut cfg = PdboConfig::constant(
        smoothing,
        ConstantSteps { primal_step: 0.04, dual_step: 1.0, theta: 0.0 },
        ho.spec.constants.dual_bound(smoothing.delta),
        5,
        1,
        ho.initial_point(HYPEROPT_INITIAL_REG),
        0.0,
    );
    cfg.t_max = (HYPEROPT_BUDGET / pdbo_cost_per_iteration(cfg.n_inner)) as usize;
    cfg.record_every = 100;
    cfg
}

/// ITD-R with inner rate 1/ρ_g (the 0.5 used on the toys diverges here), K = 10, outer rate 1.
pub fn hyperopt_itd(ho: &HyperOpt) -> BaselineConfig {
    let mut cfg = BaselineConfig::with_rates(10, 1, ho.initial_point(HYPEROPT_INITIAL_REG));
    cfg.inner_stepsize = 1.0 / ho.spec.constants.rho_g;
    cfg.outer_stepsize = 1.0;
    cfg.outer_steps = (HYPEROPT_BUDGET / cfg.cost_per_iteration(BaselineMethod::ItdR)) as usize;
    cfg.record_every = 20;
    cfg
}

/// Default configuration of `method` on a named built-in problem.
pub fn preset(problem_name: &str, problem: &ProblemSpec, method: Method, ho: Option<&HyperOpt>) -> Result<MethodConfig> {
    let baseline = |config: BaselineConfig| MethodConfig::Baseline {
        method: method.baseline().expect("baseline method"),
        config,
    };
    let unknown = || Error::InvalidConfig(format!("unknown problem `{problem_name}`"));
    Ok(match (problem_name, method) {
        ("toy1", Method::Pdbo) => MethodConfig::Pdbo(toy1_pdbo(problem, toy1_start_a())),
        ("toy1", Method::ProximalPdbo) => MethodConfig::Proximal(toy1_proximal(problem, 0)?),
        ("toy1", _) => baseline(toy1_baseline(toy1_start_a())),
        ("toy2", Method::Pdbo) => MethodConfig::Pdbo(toy2_pdbo(problem)),
        ("toy2", Method::ProximalPdbo) => MethodConfig::Proximal(toy2_proximal(problem)?),
        ("toy2", _) => baseline(toy2_baseline(toy2_start())),
        ("quadratic", Method::Pdbo) => MethodConfig::Pdbo(quadratic_pdbo(problem)),
        ("quadratic", Method::ProximalPdbo) => MethodConfig::Proximal(ProximalConfig::theory(
            problem,
            SmoothingParams::default(),
            None,
            5,
            200,
            20,
            0,
            quadratic_start(),
        )?),
        ("quadratic", _) => baseline(quadratic_baseline()),
        ("hyperopt", m) => {
            let ho = ho.ok_or_else(|| Error::InvalidConfig("hyperopt preset needs the loaded dataset".into()))?;
            match m {
                Method::Pdbo => MethodConfig::Pdbo(hyperopt_pdbo(ho)),
                Method::ProximalPdbo => {
                    let mut cfg = ProximalConfig {
                        pdbo: hyperopt_pdbo(ho),
                        k_max: 10,
                        rng_seed: 0,
                        z_tilde_init: ho.initial_point(HYPEROPT_INITIAL_REG),
                    };
                    cfg.pdbo.t_max /= 10;
                    MethodConfig::Proximal(cfg)
                }
                _ => {
                    let mut cfg = hyperopt_itd(ho);
                    let m = method.baseline().expect("baseline method");
                    cfg.fp_iterations = cfg.inner_steps;
                    cfg.outer_steps = (HYPEROPT_BUDGET / cfg.cost_per_iteration(m)) as usize;
                    MethodConfig::Baseline { method: m, config: cfg }
                }
            }
        }
        _ => return Err(unknown()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{strongly_convex_quadratic, toy1, toy2};

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("sgd".parse::<Method>().is_err());
    }

    #[test]
    fn presets_validate() {
        let named = [("toy1", toy1()), ("toy2", toy2(0.0)), ("quadratic", strongly_convex_quadratic())];
        for (name, p) in &named {
            for m in Method::ALL {
                let cfg = preset(name, p, m, None).unwrap();
                assert_eq!(cfg.method(), m);
                match &cfg {
                    MethodConfig::Pdbo(c) => c.validate(p).unwrap(),
                    MethodConfig::Proximal(c) => assert!(c.k_max >= 1),
                    MethodConfig::Baseline { method, config } => config.validate(p, *method).unwrap(),
                }
            }
        }
        assert!(preset("nope", &named[0].1, Method::Pdbo, None).is_err());
    }

    #[test]
    fn budget_fits() {
        let p = toy1();
        for m in Method::ALL {
            let mut cfg = preset("toy1", &p, m, None).unwrap();
            cfg.set_budget(10_000).unwrap();
            let per = cfg.cost_per_iteration();
            let (iters, step) = match &cfg {
                MethodConfig::Pdbo(c) => (c.t_max as u64, 1),
                MethodConfig::Proximal(c) => ((c.pdbo.t_max * c.k_max) as u64, c.k_max as u64),
                MethodConfig::Baseline { config, .. } => (config.outer_steps as u64, 1),
            };
            assert!(iters * per <= 10_000 && (iters + step) * per > 10_000, "{m}");
            assert!(cfg.set_budget(1).is_err());
        }
    }

    #[test]
    fn budgeted_run_respects_budget() {
        let p = toy1();
        for m in Method::ALL {
            let mut cfg = preset("toy1", &p, m, None).unwrap();
            cfg.set_budget(5_000).unwrap();
            let out = cfg.run(&p).unwrap();
            assert!(out.grad_calls.gradient_calls() <= 5_000, "{m}: {}", out.grad_calls.gradient_calls());
        }
    }
}
