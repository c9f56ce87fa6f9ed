//! Named problems and the mapping from [`Settings`] onto a method preset.

use pdbo_core::experiments::{preset, Method, MethodConfig};
use pdbo_core::pdbo::PdboConfig;
use pdbo_core::problems::{load_hyperopt, strongly_convex_quadratic, toy1, toy2, HyperOpt, HyperOptOptions};
use pdbo_core::proximal::build_subproblem;
use pdbo_core::schedule::{ConstantSteps, Schedule, TheoryParams};
use pdbo_core::{ProblemSpec, SmoothingParams, Vector, VectorPair};

use crate::error::{CliError, CliResult};
use crate::settings::Settings;

pub const PROBLEM_NAMES: [&str; 4] = ["toy1", "toy2", "quadratic", "hyperopt"];

pub struct LoadedProblem {
    pub name: String,
    pub spec: ProblemSpec,
    pub hyperopt: Option<HyperOpt>,
}

impl LoadedProblem {
    /// Whether trajectories get an inner-gap column by default.
    pub fn default_inner_gap(&self) -> bool {
        self.hyperopt.is_none()
    }
}

pub fn load_problem(name: &str, settings: &Settings) -> CliResult<LoadedProblem> {
    if name != "hyperopt" && (settings.train.is_some() || settings.val.is_some()) {
        return Err(CliError::Config("--train/--val only apply to the hyperopt problem".into()));
    }
    let (spec, hyperopt) = match name {
        "toy1" => (toy1(), None),
        "toy2" => (toy2(0.0), None),
        "quadratic" => (strongly_convex_quadratic(), None),
        "hyperopt" => {
            let ho = match (&settings.train, &settings.val) {
                (Some(t), Some(v)) => {
                    let o = HyperOptOptions::default();
                    load_hyperopt(t, v, (o.reg_lo, o.reg_hi))?
                }
                (None, None) => HyperOpt::bundled(HyperOptOptions::default())?,
                _ => return Err(CliError::Config("--train and --val must be given together".into())),
            };
            (ho.spec.clone(), Some(ho))
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown problem `{other}` (expected one of {})",
                PROBLEM_NAMES.join(", ")
            )))
        }
    };
    Ok(LoadedProblem { name: name.to_string(), spec, hyperopt })
}

fn replace_start(z: &VectorPair, s: &Settings) -> VectorPair {
    VectorPair::new(
        s.x0.as_ref().map(|v| Vector::from_vec(v.clone())).unwrap_or_else(|| z.x.clone()),
        s.y0.as_ref().map(|v| Vector::from_vec(v.clone())).unwrap_or_else(|| z.y.clone()),
    )
}

fn apply_pdbo(s: &Settings, cfg: &mut PdboConfig, spec: &ProblemSpec, subproblem: bool) -> CliResult<()> {
    let smoothing_changed = s.alpha.is_some() || s.delta.is_some();
    cfg.smoothing = SmoothingParams {
        alpha: s.alpha.unwrap_or(cfg.smoothing.alpha),
        delta: s.delta.unwrap_or(cfg.smoothing.delta),
    };
    cfg.smoothing.validate()?;
    let default_bound = |d: f64| if subproblem { spec.constants.proximal_dual_bound(d) } else { spec.constants.dual_bound(d) };
    cfg.dual_bound = match (s.dual_bound, smoothing_changed) {
        (Some(b), _) => b,
        (None, true) => default_bound(cfg.smoothing.delta),
        (None, false) => cfg.dual_bound,
    };

    let step_flags = s.dual_step.is_some() || s.primal_step.is_some() || s.theta.is_some();
    let mode = match s.schedule.as_deref() {
        Some("theory") if step_flags => {
            return Err(CliError::Config("--dual-step/--primal-step/--theta need --schedule constant".into()))
        }
        Some("theory") => "theory",
        Some("constant") => "constant",
        Some(other) => return Err(CliError::Config(format!("unknown schedule `{other}` (theory or constant)"))),
        None if step_flags => "constant",
        None => match cfg.schedule {
            Schedule::Theory(_) => "theory",
            Schedule::Constant(_) => "constant",
        },
    };
    cfg.schedule = if mode == "theory" {
        let p = if subproblem {
            TheoryParams::for_subproblem(&spec.constants, &cfg.smoothing, Some(cfg.dual_bound))?
        } else {
            TheoryParams::for_problem(&spec.constants, &cfg.smoothing, Some(cfg.dual_bound))?
        };
        Schedule::Theory(p)
    } else {
        let cur = match cfg.schedule {
            Schedule::Constant(c) => Some(c),
            Schedule::Theory(_) => None,
        };
        let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
            flag.or(from).ok_or_else(|| CliError::Config(format!("constant schedule needs --{name}")))
        };
        Schedule::Constant(ConstantSteps {
            primal_step: pick(s.primal_step, cur.map(|c| c.primal_step), "primal-step")?,
            dual_step: pick(s.dual_step, cur.map(|c| c.dual_step), "dual-step")?,
            theta: s.theta.or(cur.map(|c| c.theta)).unwrap_or(0.0),
        })
    };

    if let Some(t) = s.t {
        cfg.t_max = t;
    }
    if let Some(n) = s.n {
        cfg.n_inner = n;
    }
    if let Some(l) = s.lambda0 {
        cfg.lambda_init = l;
    }
    if s.no_warm_start == Some(true) {
        cfg.inner_warm_start = false;
    }
    if let Some(r) = s.record_every {
        cfg.record_every = r;
    }
    cfg.z_init = replace_start(&cfg.z_init, s);
    Ok(())
}

/// Preset for `method` on `problem`, with every setting applied and validated.
pub fn method_config(s: &Settings, problem: &LoadedProblem, method: Method, seed: u64) -> CliResult<MethodConfig> {
    let spec = &problem.spec;
    let mut cfg = preset(&problem.name, spec, method, problem.hyperopt.as_ref())?;
    match &mut cfg {
        MethodConfig::Pdbo(c) => {
            apply_pdbo(s, c, spec, false)?;
            c.validate(spec)?;
        }
        MethodConfig::Proximal(c) => {
            apply_pdbo(s, &mut c.pdbo, spec, true)?;
            if let Some(k) = s.k {
                c.k_max = k;
            }
            c.rng_seed = seed;
            c.z_tilde_init = c.pdbo.z_init.clone();
            if c.k_max < 1 {
                return Err(CliError::Config("K must be >= 1".into()));
            }
            spec.check_pair(&c.z_tilde_init)?;
            let sub = build_subproblem(spec, &c.pdbo.smoothing, &spec.project_z(&c.z_tilde_init)?)?;
            c.pdbo.validate(&sub)?;
        }
        MethodConfig::Baseline { method: b, config } => {
            if let Some(v) = s.inner_steps {
                config.inner_steps = v;
            }
            if let Some(v) = s.inner_lr {
                config.inner_stepsize = v;
            }
            if let Some(v) = s.outer_lr {
                config.outer_stepsize = v;
            }
            if let Some(v) = s.outer_steps.or(s.t) {
                config.outer_steps = v;
            }
            if let Some(v) = s.fp_iters {
                config.fp_iterations = v;
            }
            if let Some(v) = s.averaging {
                config.averaging = v;
            }
            if let Some(v) = s.record_every {
                config.record_every = v;
            }
            config.z_init = replace_start(&config.z_init, s);
            config.validate(spec, *b)?;
        }
    }
    if let Some(b) = s.budget {
        cfg.set_budget(b)?;
    }
    Ok(cfg)
}

pub fn parse_method(name: &str) -> CliResult<Method> {
    name.parse::<Method>().map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy1_loaded() -> LoadedProblem {
        load_problem("toy1", &Settings::default()).unwrap()
    }

    #[test]
    fn step_flags_switch_to_constant() {
        let p = toy1_loaded();
        let s = Settings { primal_step: Some(0.3), ..Settings::default() };
        match method_config(&s, &p, Method::Pdbo, 0).unwrap() {
            MethodConfig::Pdbo(c) => assert_eq!(c.schedule, Schedule::Constant(ConstantSteps { primal_step: 0.3, dual_step: 0.1, theta: 0.0 })),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn theory_with_step_flags_is_rejected() {
        let p = toy1_loaded();
        let s = Settings { schedule: Some("theory".into()), dual_step: Some(0.1), ..Settings::default() };
        assert!(matches!(method_config(&s, &p, Method::Pdbo, 0), Err(CliError::Config(_))));
    }

    #[test]
    fn wrong_start_dimension_is_a_config_error() {
        let p = toy1_loaded();
        let s = Settings { y0: Some(vec![1.0]), ..Settings::default() };
        let e = method_config(&s, &p, Method::ItdR, 0).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn delta_change_recomputes_bound() {
        let p = toy1_loaded();
        let s = Settings { delta: Some(0.5), ..Settings::default() };
        match method_config(&s, &p, Method::Pdbo, 0).unwrap() {
            MethodConfig::Pdbo(c) => assert_eq!(c.dual_bound, p.spec.constants.dual_bound(0.5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_problem() {
        assert!(matches!(load_problem("toy9", &Settings::default()), Err(CliError::Config(_))));
    }
}
