use crate::pair::{Vector, VectorPair};
use crate::problem::{ProblemConstants, ProblemSpec, Reference};
use crate::sets::FeasibleSet;

/// f = ½‖y − (1,−1)‖² + ½(x − ½)², g = ½‖y − (x, x/2)‖², on [−10,10]³.
///
/// The inner problem is strongly convex with y*(x) = (x, x/2), so all hypergradient
/// methods and PDBO should agree at x* = 4/9, y* = (4/9, 2/9).
pub fn strongly_convex_quadratic() -> ProblemSpec {
    const M: [f64; 2] = [1.0, 0.5];
    const A: [f64; 2] = [1.0, -1.0];
    const B: f64 = 0.5;
    let set_x = FeasibleSet::cube(1, -10.0, 10.0).expect("valid box");
    let set_y = FeasibleSet::cube(2, -10.0, 10.0).expect("valid box");
    let mm = M[0] * M[0] + M[1] * M[1];
    let x_star = (M[0] * A[0] + M[1] * A[1] + B) / (mm + 1.0);
    let z_star = VectorPair::from_slices(&[x_star], &[M[0] * x_star, M[1] * x_star]);
    let f = |x: &Vector, y: &Vector| 0.5 * ((y[0] - A[0]).powi(2) + (y[1] - A[1]).powi(2) + (x[0] - B).powi(2));
    let f_star = f(&z_star.x, &z_star.y);
    let resid = |x: &Vector, y: &Vector| [y[0] - M[0] * x[0], y[1] - M[1] * x[0]];
    let constants = ProblemConstants {
        rho_f: 1.0,
        rho_g: 1.0 + mm,
        // ‖y − Mx‖ ≤ √200 + 10‖M‖, scaled by ‖(−Mᵀ, I)‖ = √(1 + ‖M‖²)
        l_g: (200f64.sqrt() + 10.0 * mm.sqrt()) * (1.0 + mm).sqrt(),
        d_z: 1200f64.sqrt(),
        d_f: 0.5 * (11f64.powi(2) + 11f64.powi(2) + 10.5f64.powi(2)),
        // f has identity Hessian in (x, y)
        mu: 1.0,
    };
    ProblemSpec::new(
        "quadratic",
        set_x,
        set_y,
        f,
        |x, y| VectorPair::from_slices(&[x[0] - B], &[y[0] - A[0], y[1] - A[1]]),
        move |x, y| {
            let r = resid(x, y);
            0.5 * (r[0] * r[0] + r[1] * r[1])
        },
        move |x, y| {
            let r = resid(x, y);
            VectorPair::from_slices(&[-(M[0] * r[0] + M[1] * r[1])], &r)
        },
        constants,
    )
    .with_hvp_g(|_, _, v| v.clone(), |_, _, v| Vector::from_element(1, -(M[0] * v[0] + M[1] * v[1])))
    .with_hvp_f(|_, _, v| v.clone(), |_, _, _| Vector::zeros(1))
    .with_reference(Reference { z_star: Some(z_star), f_star: Some(f_star) })
}
