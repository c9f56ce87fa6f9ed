use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ProblemConstants, SmoothingParams};

/// Constants of the strongly convex schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub mu: f64,
    pub rho_f_eff: f64,
    pub rho_h_eff: f64,
    pub l_g: f64,
    pub dual_bound: f64,
}

impl TheoryParams {
    pub fn new(mu: f64, rho_f_eff: f64, rho_h_eff: f64, l_g: f64, dual_bound: f64) -> Result<Self> {
        let p = TheoryParams { mu, rho_f_eff, rho_h_eff, l_g, dual_bound };
        p.validate()?;
        Ok(p)
    }

    /// Schedule for the problem itself; `dual_bound` defaults to D_f/δ + 1.
    pub fn for_problem(c: &ProblemConstants, s: &SmoothingParams, dual_bound: Option<f64>) -> Result<Self> {
        s.validate()?;
        Self::new(c.mu, c.rho_f, c.rho_h(s.alpha), c.l_g, dual_bound.unwrap_or_else(|| c.dual_bound(s.delta)))
    }

    /// Schedule for a proximal subproblem of a problem with constants `c`:
    /// μ = ρ_f, objective constant 3ρ_f, constraint constant 2ρ_h;
    /// `dual_bound` defaults to (D_f + ρ_f D_Z²)/δ + 1.
    pub fn for_subproblem(c: &ProblemConstants, s: &SmoothingParams, dual_bound: Option<f64>) -> Result<Self> {
        s.validate()?;
        Self::new(
            c.rho_f,
            3.0 * c.rho_f,
            2.0 * c.rho_h(s.alpha),
            c.l_g,
            dual_bound.unwrap_or_else(|| c.proximal_dual_bound(s.delta)),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig("theory schedule requires mu > 0 (strongly convex objective)".into()));
        }
        if !(self.l_g > 0.0) || !(self.dual_bound > 0.0) || self.rho_f_eff < 0.0 || self.rho_h_eff < 0.0 {
            return Err(Error::InvalidConfig(format!("invalid theory schedule constants {self:?}")));
        }
        Ok(())
    }

    /// t₀ = 2(ρ_f_eff + B·ρ_h_eff)/μ.
    pub fn t0(&self) -> f64 {
        2.0 * (self.rho_f_eff + self.dual_bound * self.rho_h_eff) / self.mu
    }

    /// γ_t(ρ_f_eff + Bρ_h_eff − η_t) + 2γ_{t+1}L_g²/τ_{t+1}.
    ///
    /// Works out to exactly μ(t+1)/2 for this schedule, so it is never ≤ 0.
    pub fn step_condition_residual(&self, t: usize) -> f64 {
        let s = Schedule::Theory(*self);
        let a = s.at(t);
        let b = s.at(t + 1);
        a.gamma * (self.rho_f_eff + self.dual_bound * self.rho_h_eff - a.eta) + 2.0 * b.gamma * self.l_g * self.l_g / b.tau
    }
}

/// Fixed stepsizes: primal 1/η, dual 1/τ, extrapolation θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSteps {
    pub primal_step: f64,
    pub dual_step: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Schedule {
    Theory(TheoryParams),
    Constant(ConstantSteps),
}

/// Per-iteration weights and stepsizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub gamma: f64,
    pub eta: f64,
    pub tau: f64,
    pub theta: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Theory(p) => p.validate(),
            Schedule::Constant(c) => {
                if !(c.primal_step > 0.0 && c.primal_step.is_finite())
                    || !(c.dual_step > 0.0 && c.dual_step.is_finite())
                    || !c.theta.is_finite()
                    || c.theta < 0.0
                {
                    return Err(Error::InvalidConfig(format!("invalid constant steps {c:?}")));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, t: usize) -> StepParams {
        match self {
            Schedule::Theory(p) => {
                let t0 = p.t0();
                let tf = t as f64;
                StepParams {
                    gamma: tf + t0 + 1.0,
                    eta: p.mu * (tf + t0 + 1.0) / 2.0,
                    // τ_0 is undefined; reuse τ_1
                    tau: 4.0 * p.l_g * p.l_g / (p.mu * tf.max(1.0)),
                    theta: (tf + t0) / (tf + t0 + 1.0),
                }
            }
            Schedule::Constant(c) => StepParams { gamma: 1.0, eta: 1.0 / c.primal_step, tau: 1.0 / c.dual_step, theta: c.theta },
        }
    }
}
