use std::f64::consts::PI;

use crate::pair::{Vector, VectorPair};
use crate::problem::{ProblemConstants, ProblemSpec, Reference};
use crate::sets::FeasibleSet;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

/// f(x,y) = ½‖(1,x) − y‖², g(x,y) = ½y₁² − x·y₁, on [−10,10]³.
///
/// Every y = (x, t) minimizes g(x,·); only t = x = 1 is globally optimal for f.
pub fn toy1() -> ProblemSpec {
    let set_x = FeasibleSet::cube(1, -10.0, 10.0).expect("valid box");
    let set_y = FeasibleSet::cube(2, -10.0, 10.0).expect("valid box");
    let constants = ProblemConstants {
        rho_f: 2.0,
        rho_g: (1.0 + 5f64.sqrt()) / 2.0,
        l_g: 500f64.sqrt(),
        d_z: 1200f64.sqrt(),
        d_f: 260.5,
        mu: 0.0,
    };
    ProblemSpec::new(
        "toy1",
        set_x,
        set_y,
        |x, y| 0.5 * ((1.0 - y[0]).powi(2) + (x[0] - y[1]).powi(2)),
        |x, y| VectorPair::new(v(&[x[0] - y[1]]), v(&[y[0] - 1.0, y[1] - x[0]])),
        |x, y| 0.5 * y[0] * y[0] - x[0] * y[0],
        |x, y| VectorPair::new(v(&[-y[0]]), v(&[y[0] - x[0], 0.0])),
        constants,
    )
    .with_hvp_g(|_, _, w| v(&[w[0], 0.0]), |_, _, w| v(&[-w[0]]))
    .with_hvp_f(|_, _, w| w.clone(), |_, _, w| v(&[-w[1]]))
    .with_reference(Reference {
        z_star: Some(VectorPair::from_slices(&[1.0], &[1.0, 1.0])),
        f_star: Some(0.0),
    })
}

/// Closed-form minimizer of ½y₁² − x·y₁ + α/2‖y‖²: (x/(1+α), 0).
pub fn toy1_smoothed_inner(x: f64, alpha: f64) -> Vector {
    v(&[x / (1.0 + alpha), 0.0])
}

/// f = (x−a)² + (y−a)², g = sin(x+y), on [−10,10]²; the inner problem is nonconvex.
pub fn toy2(a: f64) -> ProblemSpec {
    let set = FeasibleSet::cube(1, -10.0, 10.0).expect("valid box");
    let constants = ProblemConstants {
        rho_f: 2.0,
        rho_g: 2.0,
        l_g: 2f64.sqrt(),
        d_z: 800f64.sqrt(),
        d_f: 2.0 * (10.0 + a.abs()).powi(2),
        mu: 2.0,
    };
    // Inner minimizers lie on x + y = −π/2 + 2πk; the closest one to (a, a) is on the diagonal.
    let k = ((a + PI / 4.0) / PI).round();
    let star = -PI / 4.0 + PI * k;
    ProblemSpec::new(
        "toy2",
        set.clone(),
        set,
        move |x, y| (x[0] - a).powi(2) + (y[0] - a).powi(2),
        move |x, y| VectorPair::new(v(&[2.0 * (x[0] - a)]), v(&[2.0 * (y[0] - a)])),
        |x, y| (x[0] + y[0]).sin(),
        |x, y| {
            let c = (x[0] + y[0]).cos();
            VectorPair::new(v(&[c]), v(&[c]))
        },
        constants,
    )
    .with_hvp_g(|x, y, w| w * -(x[0] + y[0]).sin(), |x, y, w| w * -(x[0] + y[0]).sin())
    .with_hvp_f(|_, _, w| w * 2.0, |_, _, _| v(&[0.0]))
    .with_nonconvex_inner()
    .with_reference(Reference {
        z_star: Some(VectorPair::from_slices(&[star], &[star])),
        f_star: Some(2.0 * (a - star).powi(2)),
    })
}
