use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pair::{Vector, VectorPair};
use crate::sets::FeasibleSet;

pub type ValueFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&Vector, &Vector) -> VectorPair + Send + Sync>;
pub type HvpFn = Arc<dyn Fn(&Vector, &Vector, &Vector) -> Vector + Send + Sync>;

/// Smoothness and size constants of a bilevel problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Gradient Lipschitz constant of f.
    pub rho_f: f64,
    /// Gradient Lipschitz constant of g.
    pub rho_g: f64,
    /// sup ‖∇g‖ over Z.
    pub l_g: f64,
    /// Diameter of Z.
    pub d_z: f64,
    /// sup |f(z) − f(z')| over Z.
    pub d_f: f64,
    /// Strong-convexity modulus of f (0 if none).
    pub mu: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.rho_f, self.rho_g, self.l_g, self.d_z, self.d_f, self.mu];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(format!("constants must be finite and >= 0: {self:?}")));
        }
        if self.d_z <= 0.0 {
            return Err(Error::InvalidConfig("d_z must be positive".into()));
        }
        Ok(())
    }

    /// Gradient Lipschitz constant of the smoothed constraint, `ρ_g(2 + ρ_g/α)`.
    pub fn rho_h(&self, alpha: f64) -> f64 {
        self.rho_g * (2.0 + self.rho_g / alpha)
    }

    /// Coefficient that convexifies the constraint in a proximal subproblem.
    pub fn prox_constraint_weight(&self, alpha: f64) -> f64 {
        (2.0 * alpha * self.rho_g + self.rho_g * self.rho_g) / (2.0 * alpha)
    }

    /// Default dual bound `D_f/δ + 1`.
    pub fn dual_bound(&self, delta: f64) -> f64 {
        self.d_f / delta + 1.0
    }

    /// Dual bound for proximal subproblems, `(D_f + ρ_f D_Z²)/δ + 1`.
    pub fn proximal_dual_bound(&self, delta: f64) -> f64 {
        (self.d_f + self.rho_f * self.d_z * self.d_z) / delta + 1.0
    }
}

/// Inner regularization `alpha` and constraint slack `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub alpha: f64,
    pub delta: f64,
}

impl SmoothingParams {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        let p = SmoothingParams { alpha, delta };
        p.validate()?;
        Ok(p)
    }

    /// α = δ = 0: the unsmoothed value function, for oracles only.
    pub fn unsmoothed() -> Self {
        SmoothingParams { alpha: 0.0, delta: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha and delta must be > 0 (got alpha={}, delta={})",
                self.alpha, self.delta
            )));
        }
        Ok(())
    }
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams { alpha: 1e-3, delta: 1e-3 }
    }
}

/// Known optimum of a built-in problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub z_star: Option<VectorPair>,
    pub f_star: Option<f64>,
}

/// Constraint regularizer `weight·‖x − center‖²` carried by a proximal subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintProx {
    pub center_x: Vector,
    pub weight: f64,
}

impl ConstraintProx {
    pub fn value(&self, x: &Vector) -> f64 {
        self.weight * (x - &self.center_x).norm_squared()
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        (x - &self.center_x) * (2.0 * self.weight)
    }
}

/// Oracle call counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub f_value: u64,
    pub f_grad: u64,
    pub g_value: u64,
    pub g_grad: u64,
    pub hvp: u64,
}

impl CallCounts {
    /// Gradient-type calls, the unit of budgeted comparisons.
    pub fn gradient_calls(&self) -> u64 {
        self.f_grad + self.g_grad + self.hvp
    }

    pub fn add(&mut self, other: &CallCounts) {
        self.f_value += other.f_value;
        self.f_grad += other.f_grad;
        self.g_value += other.g_value;
        self.g_grad += other.g_grad;
        self.hvp += other.hvp;
    }
}

/// A bilevel problem `min f(x,y) s.t. y ∈ argmin_{y ∈ Y} g(x,y), x ∈ X`, given by callbacks.
///
/// Cloning is cheap: callbacks are reference counted.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub set_x: FeasibleSet,
    pub set_y: FeasibleSet,
    pub constants: ProblemConstants,
    pub violates_inner_convexity: bool,
    pub reference: Option<Reference>,
    pub constraint_prox: Option<ConstraintProx>,
    f_value: ValueFn,
    f_grad: GradFn,
    g_value: ValueFn,
    g_grad: GradFn,
    hvp_g_yy: Option<HvpFn>,
    hvp_g_xy: Option<HvpFn>,
    hvp_f_yy: Option<HvpFn>,
    hvp_f_xy: Option<HvpFn>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dims", &self.dims())
            .field("constants", &self.constants)
            .field("violates_inner_convexity", &self.violates_inner_convexity)
            .field("constraint_prox", &self.constraint_prox)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new<FV, FG, GV, GG>(
        name: impl Into<String>,
        set_x: FeasibleSet,
        set_y: FeasibleSet,
        f_value: FV,
        f_grad: FG,
        g_value: GV,
        g_grad: GG,
        constants: ProblemConstants,
    ) -> Self
    where
        FV: Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
        FG: Fn(&Vector, &Vector) -> VectorPair + Send + Sync + 'static,
        GV: Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
        GG: Fn(&Vector, &Vector) -> VectorPair + Send + Sync + 'static,
    {
        ProblemSpec {
            name: name.into(),
            set_x,
            set_y,
            constants,
            violates_inner_convexity: false,
            reference: None,
            constraint_prox: None,
            f_value: Arc::new(f_value),
            f_grad: Arc::new(f_grad),
            g_value: Arc::new(g_value),
            g_grad: Arc::new(g_grad),
            hvp_g_yy: None,
            hvp_g_xy: None,
            hvp_f_yy: None,
            hvp_f_xy: None,
        }
    }

    /// Attach `∇²_yy g · v` and `∇²_xy g · v`.
    pub fn with_hvp_g<A, B>(mut self, yy: A, xy: B) -> Self
    where
        A: Fn(&Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
        B: Fn(&Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.hvp_g_yy = Some(Arc::new(yy));
        self.hvp_g_xy = Some(Arc::new(xy));
        self
    }

    /// Attach `∇²_yy f · v` and `∇²_xy f · v` (needed by BigSAM+ITD).
    pub fn with_hvp_f<A, B>(mut self, yy: A, xy: B) -> Self
    where
        A: Fn(&Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
        B: Fn(&Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.hvp_f_yy = Some(Arc::new(yy));
        self.hvp_f_xy = Some(Arc::new(xy));
        self
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_nonconvex_inner(mut self) -> Self {
        self.violates_inner_convexity = true;
        self
    }

    pub fn with_constants(mut self, constants: ProblemConstants) -> Self {
        self.constants = constants;
        self
    }

    /// Replace the objective callbacks, keeping everything else.
    pub(crate) fn with_objective(mut self, value: ValueFn, grad: GradFn) -> Self {
        self.f_value = value;
        self.f_grad = grad;
        self
    }

    pub(crate) fn objective_parts(&self) -> (ValueFn, GradFn, Option<HvpFn>, Option<HvpFn>) {
        (self.f_value.clone(), self.f_grad.clone(), self.hvp_f_yy.clone(), self.hvp_f_xy.clone())
    }

    pub(crate) fn set_hvp_f(&mut self, yy: Option<HvpFn>, xy: Option<HvpFn>) {
        self.hvp_f_yy = yy;
        self.hvp_f_xy = xy;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.set_x.dim(), self.set_y.dim())
    }

    pub fn set_z(&self) -> FeasibleSet {
        FeasibleSet::Product(vec![self.set_x.clone(), self.set_y.clone()])
    }

    pub fn check_pair(&self, z: &VectorPair) -> Result<()> {
        let (p, d) = self.dims();
        if z.x.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: z.x.len() });
        }
        if z.y.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: z.y.len() });
        }
        Ok(())
    }

    pub fn project_z(&self, z: &VectorPair) -> Result<VectorPair> {
        Ok(VectorPair::new(self.set_x.project(&z.x)?, self.set_y.project(&z.y)?))
    }

    pub fn contains_z(&self, z: &VectorPair) -> bool {
        self.set_x.contains(&z.x) && self.set_y.contains(&z.y)
    }

    pub fn f_value(&self, x: &Vector, y: &Vector) -> f64 {
        (self.f_value)(x, y)
    }

    pub fn f_grad(&self, x: &Vector, y: &Vector) -> VectorPair {
        (self.f_grad)(x, y)
    }

    pub fn g_value(&self, x: &Vector, y: &Vector) -> f64 {
        (self.g_value)(x, y)
    }

    pub fn g_grad(&self, x: &Vector, y: &Vector) -> VectorPair {
        (self.g_grad)(x, y)
    }

    pub fn has_hvp_g(&self) -> bool {
        self.hvp_g_yy.is_some() && self.hvp_g_xy.is_some()
    }

    pub fn has_hvp_f(&self) -> bool {
        self.hvp_f_yy.is_some() && self.hvp_f_xy.is_some()
    }

    pub fn hvp_g_yy(&self, x: &Vector, y: &Vector, v: &Vector) -> Result<Vector> {
        self.hvp_g_yy.as_ref().map(|h| h(x, y, v)).ok_or(Error::MissingHvp("hvp_g_yy"))
    }

    pub fn hvp_g_xy(&self, x: &Vector, y: &Vector, v: &Vector) -> Result<Vector> {
        self.hvp_g_xy.as_ref().map(|h| h(x, y, v)).ok_or(Error::MissingHvp("hvp_g_xy"))
    }

    pub fn hvp_f_yy(&self, x: &Vector, y: &Vector, v: &Vector) -> Result<Vector> {
        self.hvp_f_yy.as_ref().map(|h| h(x, y, v)).ok_or(Error::MissingHvp("hvp_f_yy"))
    }

    pub fn hvp_f_xy(&self, x: &Vector, y: &Vector, v: &Vector) -> Result<Vector> {
        self.hvp_f_xy.as_ref().map(|h| h(x, y, v)).ok_or(Error::MissingHvp("hvp_f_xy"))
    }

    pub fn f_at(&self, z: &VectorPair) -> f64 {
        self.f_value(&z.x, &z.y)
    }

    pub fn g_at(&self, z: &VectorPair) -> f64 {
        self.g_value(&z.x, &z.y)
    }
}

/// Sample-based estimate of the problem constants.
///
/// Draws `sample_count` point pairs uniformly in Z and returns the largest observed
/// gradient-difference ratios, gradient norm and value gap, each times 1.5.
/// `mu` is returned as 0; `d_z` is the exact set diameter.
pub fn estimate_constants(
    problem: &ProblemSpec,
    sample_count: usize,
    rng_seed: u64,
    exec: Execution,
) -> Result<ProblemConstants> {
    const SAFETY: f64 = 1.5;
    if sample_count < 2 {
        return Err(Error::InvalidConfig("sample_count must be >= 2".into()));
    }
    let set_z = problem.set_z();
    let d_z = set_z.diameter();
    if d_z <= 0.0 {
        return Err(Error::DegenerateSet);
    }
    let (p, _) = problem.dims();

    let samples = exec.map_range(sample_count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(i as u64);
        let a = VectorPair::from_concat(&set_z.sample(&mut rng), p).expect("sample dims");
        let b = VectorPair::from_concat(&set_z.sample(&mut rng), p).expect("sample dims");
        let dist = a.distance(&b);
        let fa = problem.f_at(&a);
        let fb = problem.f_at(&b);
        let gfa = problem.f_grad(&a.x, &a.y);
        let gfb = problem.f_grad(&b.x, &b.y);
        let gga = problem.g_grad(&a.x, &a.y);
        let ggb = problem.g_grad(&b.x, &b.y);
        let ratio = |u: &VectorPair, v: &VectorPair| if dist > 0.0 { u.distance(v) / dist } else { 0.0 };
        [
            ratio(&gfa, &gfb),
            ratio(&gga, &ggb),
            gga.norm().max(ggb.norm()),
            (fa - fb).abs(),
        ]
    });

    let mut max = [0.0f64; 4];
    for s in &samples {
        for (m, v) in max.iter_mut().zip(s) {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput("estimate_constants"));
            }
            *m = m.max(*v);
        }
    }
    Ok(ProblemConstants {
        rho_f: SAFETY * max[0],
        rho_g: SAFETY * max[1],
        l_g: SAFETY * max[2],
        d_z,
        d_f: SAFETY * max[3],
        mu: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::toy1;

    #[test]
    fn smoothing_requires_positive() {
        assert!(SmoothingParams::new(0.0, 0.1).is_err());
        assert!(SmoothingParams::new(0.1, 0.0).is_err());
        assert!(SmoothingParams::new(0.1, 0.1).is_ok());
    }

    #[test]
    fn rho_h_formula() {
        let c = toy1().constants;
        let rg = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((c.rho_h(0.5) - rg * (2.0 + rg / 0.5)).abs() < 1e-12);
    }

    #[test]
    fn prox_weight_matches_hand_value() {
        let c = toy1().constants;
        let w = c.prox_constraint_weight(0.01);
        assert!((w - 132.5).abs() < 0.1, "{w}");
    }

    #[test]
    fn estimate_brackets_toy1_rho_g() {
        let c = estimate_constants(&toy1(), 1000, 7, Execution::Sequential).unwrap();
        let rg = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(c.rho_g >= rg && c.rho_g <= 1.5 * rg + 1e-9, "{}", c.rho_g);
    }

    #[test]
    fn estimate_of_constant_objective_is_zero() {
        let set = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        let prob = ProblemSpec::new(
            "flat",
            set.clone(),
            set,
            |_, _| 0.0,
            |x, y| VectorPair::zeros(x.len(), y.len()),
            |_, y| y[0] * y[0],
            |x, y| VectorPair::new(Vector::zeros(x.len()), y * 2.0),
            ProblemConstants { rho_f: 0.0, rho_g: 2.0, l_g: 2.0, d_z: 8f64.sqrt(), d_f: 0.0, mu: 0.0 },
        );
        let c = estimate_constants(&prob, 100, 1, Execution::Sequential).unwrap();
        assert_eq!(c.rho_f, 0.0);
        assert_eq!(c.d_f, 0.0);
    }

    #[test]
    fn estimate_is_deterministic_and_exec_independent() {
        let a = estimate_constants(&toy1(), 300, 11, Execution::Sequential).unwrap();
        let b = estimate_constants(&toy1(), 300, 11, Execution::Sequential).unwrap();
        let c = estimate_constants(&toy1(), 300, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn estimate_rejects_degenerate_set() {
        let set = FeasibleSet::cube(1, 0.0, 0.0).unwrap();
        let prob = ProblemSpec::new(
            "point",
            set.clone(),
            set,
            |_, _| 0.0,
            |x, y| VectorPair::zeros(x.len(), y.len()),
            |_, _| 0.0,
            |x, y| VectorPair::zeros(x.len(), y.len()),
            ProblemConstants { rho_f: 0.0, rho_g: 0.0, l_g: 0.0, d_z: 1.0, d_f: 0.0, mu: 0.0 },
        );
        assert!(matches!(estimate_constants(&prob, 10, 0, Execution::Sequential), Err(Error::DegenerateSet)));
        assert!(estimate_constants(&toy1(), 1, 0, Execution::Sequential).is_err());
    }
}
