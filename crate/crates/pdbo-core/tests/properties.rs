use pdbo_core::baselines::{hypergrad_aid_fp, hypergrad_itd_reverse, unrolled_inner};
use pdbo_core::checks::{fd_gradient, fd_hvp_y, relative_error};
use pdbo_core::inner::{
    constraint_estimate, constraint_grad_estimate, exact_constraint, inner_pgd, inner_solve_to_tolerance, inner_stepsize,
    smoothed_inner_value,
};
use pdbo_core::oracle::grid_bilevel_optimum;
use pdbo_core::pdbo::{dual_step, run_pdbo, PdboConfig};
use pdbo_core::problems::{strongly_convex_quadratic, toy1, toy2, HyperOpt, HyperOptOptions};
use pdbo_core::proximal::{build_subproblem, draw_k_hat};
use pdbo_core::schedule::{ConstantSteps, Schedule, TheoryParams};
use pdbo_core::{Execution, FeasibleSet, SmoothingParams, Vector, VectorPair};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn vec_in(dim: usize, r: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-r..r, dim).prop_map(Vector::from_vec)
}

fn any_set() -> impl Strategy<Value = FeasibleSet> {
    prop_oneof![
        (prop::collection::vec(-5.0..0.0f64, 3), prop::collection::vec(0.0..5.0f64, 3))
            .prop_map(|(lo, hi)| FeasibleSet::new_box(lo, hi).unwrap()),
        (prop::collection::vec(-3.0..3.0f64, 3), 0.1..4.0f64).prop_map(|(c, r)| FeasibleSet::new_ball(c, r).unwrap()),
        (-2.0..0.0f64, 0.0..2.0f64, prop::collection::vec(-1.0..1.0f64, 2), 0.5..2.0f64).prop_map(|(lo, hi, c, r)| {
            FeasibleSet::product(vec![
                FeasibleSet::cube(1, lo, hi).unwrap(),
                FeasibleSet::new_ball(c, r).unwrap(),
            ])
            .unwrap()
        }),
    ]
}

fn toy1_point() -> impl Strategy<Value = VectorPair> {
    (vec_in(1, 9.9), vec_in(2, 9.9)).prop_map(|(x, y)| VectorPair::new(x, y))
}

fn hyperopt() -> &'static HyperOpt {
    static HO: OnceLock<HyperOpt> = OnceLock::new();
    HO.get_or_init(|| HyperOpt::bundled(HyperOptOptions::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_feasible(set in any_set(), v in vec_in(3, 20.0)) {
        let p = set.project(&v).unwrap();
        prop_assert!(set.contains(&p));
        let pp = set.project(&p).unwrap();
        prop_assert!((&pp - &p).norm() <= 1e-12);
    }

    #[test]
    fn projection_is_nonexpansive(set in any_set(), a in vec_in(3, 20.0), b in vec_in(3, 20.0)) {
        let (pa, pb) = (set.project(&a).unwrap(), set.project(&b).unwrap());
        prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-12);
    }

    #[test]
    fn projection_satisfies_variational_inequality(set in any_set(), v in vec_in(3, 20.0), w in vec_in(3, 20.0)) {
        // ⟨v − P(v), u − P(v)⟩ ≤ 0 for every feasible u
        let p = set.project(&v).unwrap();
        let u = set.project(&w).unwrap();
        prop_assert!((&v - &p).dot(&(&u - &p)) <= 1e-9 * (1.0 + v.norm() * w.norm()));
    }

    #[test]
    fn normal_cone_distance_zero_iff_fixed_point(set in any_set(), v in vec_in(3, 20.0), g in vec_in(3, 5.0), step in 0.01..2.0f64) {
        // dist(g, −N(z)) = 0 exactly when z = P(z − s g)
        let z = set.project(&v).unwrap();
        let moved = set.project(&(&z - &g * step)).unwrap();
        let dist = set.normal_cone_distance(&z, &g).unwrap();
        let fixed = (&moved - &z).norm() <= 1e-12;
        if fixed {
            prop_assert!(dist <= 1e-8, "fixed point but dist {dist}");
        }
        if dist <= 1e-12 {
            prop_assert!((&moved - &z).norm() <= 1e-9);
        }
        // the projected step is bounded by the stationarity residual
        prop_assert!((&moved - &z).norm() <= step * dist + 1e-9);
    }

    #[test]
    fn toy1_gradients_match_finite_differences(z in toy1_point()) {
        let p = toy1();
        let fd = fd_gradient(|x, y| p.g_value(x, y), &z);
        prop_assert!(relative_error(&p.g_grad(&z.x, &z.y).concat(), &fd.concat()) <= 1e-5);
        let fd = fd_gradient(|x, y| p.f_value(x, y), &z);
        prop_assert!(relative_error(&p.f_grad(&z.x, &z.y).concat(), &fd.concat()) <= 1e-5);
    }

    #[test]
    fn toy1_hvps_match_finite_differences(z in toy1_point(), v in vec_in(2, 1.0)) {
        let p = toy1();
        let fd = fd_hvp_y(|x, y| p.g_grad(x, y), &z, &v);
        prop_assert!(relative_error(&p.hvp_g_yy(&z.x, &z.y, &v).unwrap(), &fd.y) <= 1e-5);
        prop_assert!(relative_error(&p.hvp_g_xy(&z.x, &z.y, &v).unwrap(), &fd.x) <= 1e-5);
        let fd = fd_hvp_y(|x, y| p.f_grad(x, y), &z, &v);
        prop_assert!(relative_error(&p.hvp_f_yy(&z.x, &z.y, &v).unwrap(), &fd.y) <= 1e-5);
        prop_assert!(relative_error(&p.hvp_f_xy(&z.x, &z.y, &v).unwrap(), &fd.x) <= 1e-5);
    }

    #[test]
    fn toy2_gradients_match_finite_differences(x in -9.9..9.9f64, y in -9.9..9.9f64, v in 0.1..1.0f64) {
        let p = toy2(0.0);
        let z = VectorPair::from_slices(&[x], &[y]);
        let fd = fd_gradient(|x, y| p.g_value(x, y), &z);
        prop_assert!(relative_error(&p.g_grad(&z.x, &z.y).concat(), &fd.concat()) <= 1e-5);
        let v = Vector::from_element(1, v);
        let fd = fd_hvp_y(|x, y| p.g_grad(x, y), &z, &v);
        prop_assert!(relative_error(&p.hvp_g_yy(&z.x, &z.y, &v).unwrap(), &fd.y) <= 1e-5);
        prop_assert!(relative_error(&p.hvp_g_xy(&z.x, &z.y, &v).unwrap(), &fd.x) <= 1e-5);
    }

    #[test]
    fn inner_pgd_descends(z in toy1_point(), alpha in 1e-3..1.0f64, n in 1usize..30) {
        let p = toy1();
        let params = SmoothingParams::new(alpha, 1e-3).unwrap();
        let mut y = z.y.clone();
        let mut prev = smoothed_inner_value(&p, &params, &z.x, &y);
        for _ in 0..n {
            y = inner_pgd(&p, &params, &z.x, 1, &y).unwrap().y_hat_vector();
            let cur = smoothed_inner_value(&p, &params, &z.x, &y);
            prop_assert!(cur <= prev + 1e-12 * prev.abs().max(1.0));
            prev = cur;
        }
    }

    #[test]
    fn inner_pgd_contracts(z in toy1_point(), alpha in 1e-3..1.0f64, n in 1usize..50) {
        let p = toy1();
        let params = SmoothingParams::new(alpha, 1e-3).unwrap();
        let star = inner_solve_to_tolerance(&p, &params, &z.x, &z.y, 1e-14).unwrap().y_hat_vector();
        let q = 1.0 - alpha / (p.constants.rho_g + 2.0 * alpha);
        let y = inner_pgd(&p, &params, &z.x, n, &z.y).unwrap().y_hat_vector();
        let bound = q.powi(n as i32) * (&z.y - &star).norm();
        prop_assert!((&y - &star).norm() <= bound + 1e-10);
    }

    #[test]
    fn constraint_estimate_underestimates(z in toy1_point(), alpha in 1e-3..1.0f64, n in 0usize..20) {
        // g̃(x, ŷ) ≥ g̃*(x) is subtracted, so ĥ ≤ h̃, and the gap shrinks with more inner steps
        let p = toy1();
        let params = SmoothingParams::new(alpha, 1e-2).unwrap();
        let inner = inner_pgd(&p, &params, &z.x, n, &p.set_y.center()).unwrap();
        let h_hat = constraint_estimate(&p, &params, &z, &inner);
        let h = exact_constraint(&p, &params, &z, 1e-13).unwrap();
        prop_assert!(h_hat <= h + 1e-9);
        let more = inner_pgd(&p, &params, &z.x, n + 5, &p.set_y.center()).unwrap();
        prop_assert!(constraint_estimate(&p, &params, &z, &more) >= h_hat - 1e-12);
    }

    #[test]
    fn constraint_gradient_error_shrinks_with_inner_error(z in toy1_point(), alpha in 1e-2..1.0f64, n in 0usize..40) {
        // ‖∇̂h̃ − ∇h̃‖ ≤ ‖∇_x g(x,ŷ) − ∇_x g(x,ỹ*)‖ ≤ L‖ŷ − ỹ*‖ with toy1's x-y coupling norm 1
        let p = toy1();
        let params = SmoothingParams::new(alpha, 1e-2).unwrap();
        let inner = inner_pgd(&p, &params, &z.x, n, &p.set_y.center()).unwrap();
        let exact = inner_solve_to_tolerance(&p, &params, &z.x, &p.set_y.center(), 1e-14).unwrap();
        let err = constraint_grad_estimate(&p, &params, &z, &inner).sub(&constraint_grad_estimate(&p, &params, &z, &exact)).norm();
        prop_assert!(err <= (inner.y_hat_vector() - exact.y_hat_vector()).norm() + 1e-10);
    }

    #[test]
    fn dual_iterate_stays_in_bounds(lambda in 0.0..10.0f64, h in -5.0..5.0f64, hp in -5.0..5.0f64,
                                    tau in 0.01..10.0f64, theta in 0.0..1.0f64, b in 0.1..10.0f64) {
        let l = dual_step(lambda.min(b), h, hp, tau, theta, b).unwrap();
        prop_assert!((0.0..=b).contains(&l));
    }

    #[test]
    fn theory_schedule_identities(mu in 0.1..5.0f64, rf in 0.0..5.0f64, rh in 0.0..5.0f64, lg in 0.1..10.0f64,
                                  b in 0.1..50.0f64, t in 1usize..10_000) {
        let s = Schedule::Theory(TheoryParams::new(mu, rf, rh, lg, b).unwrap());
        let (prev, cur, next) = (s.at(t - 1), s.at(t), s.at(t + 1));
        prop_assert!((cur.gamma * cur.theta - prev.gamma).abs() <= 1e-9 * prev.gamma);
        prop_assert!(next.gamma * next.tau <= cur.gamma * cur.tau * (1.0 + 1e-12));
        prop_assert!(cur.eta >= mu * (1.0 - 1e-12));
        prop_assert!(cur.gamma * cur.eta >= next.gamma * (next.eta - mu) * (1.0 - 1e-12));
    }

    #[test]
    fn subproblem_constraint_is_midpoint_convex(a in toy1_point(), b in toy1_point(), c in toy1_point()) {
        // weak convexity of h̃ is cancelled by the constraint regularizer
        let p = toy1();
        let params = SmoothingParams::new(0.5, 1e-2).unwrap();
        let sub = build_subproblem(&p, &params, &c).unwrap();
        let mid = a.add(&b).scale(0.5);
        let h = |z: &VectorPair| exact_constraint(&sub, &params, z, 1e-13).unwrap();
        prop_assert!(h(&mid) <= 0.5 * (h(&a) + h(&b)) + 1e-7);
    }

    #[test]
    fn hyperopt_inner_hessian_is_psd(seed in 0u64..1000, reg in -6.0..1.0f64) {
        use rand::{Rng, SeedableRng};
        let ho = hyperopt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = ho.spec.dims().1;
        let x = Vector::from_element(d, reg);
        let y = Vector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let v = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let q = ho.spec.hvp_g_yy(&x, &y, &v).unwrap().dot(&v) / v.norm_squared();
        prop_assert!(q >= -1e-10, "Rayleigh quotient {q}");
        let qf = ho.spec.hvp_f_yy(&x, &y, &v).unwrap().dot(&v) / v.norm_squared();
        prop_assert!(qf >= -1e-10);
    }

    #[test]
    fn itd_matches_finite_differences_of_unrolled_map(x in -3.0..3.0f64, y0 in vec_in(2, 3.0), k in 1usize..15) {
        let p = toy1();
        let xv = Vector::from_element(1, x);
        let (hg, _) = hypergrad_itd_reverse(&p, &xv, &y0, k, 0.5).unwrap();
        let phi = |xx: f64| {
            let xx = Vector::from_element(1, xx);
            let y = unrolled_inner(&p, &xx, &y0, k, 0.5).unwrap();
            p.f_value(&xx, &y)
        };
        let h = 1e-6;
        let fd = Vector::from_element(1, (phi(x + h) - phi(x - h)) / (2.0 * h));
        prop_assert!(relative_error(&hg, &fd) <= 1e-4, "itd {} fd {}", hg[0], fd[0]);
    }

    #[test]
    fn itd_and_aid_agree_on_strongly_convex_inner(x in -3.0..3.0f64) {
        let p = strongly_convex_quadratic();
        let xv = Vector::from_element(1, x);
        let y0 = Vector::zeros(2);
        let (itd, y) = hypergrad_itd_reverse(&p, &xv, &y0, 200, 0.5).unwrap();
        let aid = hypergrad_aid_fp(&p, &xv, &y, 200, 0.5).unwrap();
        // both approach d/dx f(x, Mx) = 2.25x − 1
        let exact = 2.25 * x - 1.0;
        prop_assert!((itd[0] - exact).abs() <= 1e-8 * exact.abs().max(1.0));
        prop_assert!((aid[0] - exact).abs() <= 1e-8 * exact.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pdbo_is_deterministic_and_dual_bounded(x0 in -5.0..5.0f64, y0 in vec_in(2, 5.0), l0 in 0.0..5.0f64) {
        let p = toy1();
        let b = 4.0;
        let cfg = PdboConfig::constant(
            SmoothingParams::default(),
            ConstantSteps { primal_step: 0.2, dual_step: 0.1, theta: 0.5 },
            b, 5, 200, VectorPair::new(Vector::from_element(1, x0), y0), l0.min(b),
        );
        let a = run_pdbo(&p, &cfg).unwrap();
        let c = run_pdbo(&p, &cfg).unwrap();
        prop_assert_eq!(&a.z_bar, &c.z_bar);
        prop_assert!(a.trajectory.iter().all(|r| r.lambda.unwrap() >= 0.0 && r.lambda.unwrap() <= b));
        prop_assert!(a.lambda_max <= b);
    }

    #[test]
    fn hyperopt_gradients_match_finite_differences(seed in 0u64..100, reg in -3.0..1.0f64) {
        use rand::{Rng, SeedableRng};
        let ho = hyperopt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = ho.spec.dims().1;
        let z = VectorPair::new(
            Vector::from_fn(d, |_, _| reg + rng.random_range(-0.5..0.0)),
            Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
        );
        let fd = fd_gradient(|x, y| ho.spec.g_value(x, y), &z);
        prop_assert!(relative_error(&ho.spec.g_grad(&z.x, &z.y).concat(), &fd.concat()) <= 1e-5);
        let fd = fd_gradient(|x, y| ho.spec.f_value(x, y), &z);
        prop_assert!(relative_error(&ho.spec.f_grad(&z.x, &z.y).concat(), &fd.concat()) <= 1e-5);
        let v = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let fd = fd_hvp_y(|x, y| ho.spec.g_grad(x, y), &z, &v);
        prop_assert!(relative_error(&ho.spec.hvp_g_yy(&z.x, &z.y, &v).unwrap(), &fd.y) <= 1e-5);
        prop_assert!(relative_error(&ho.spec.hvp_g_xy(&z.x, &z.y, &v).unwrap(), &fd.x) <= 1e-5);
    }
}

#[test]
fn inner_stepsize_cases() {
    let p = toy1();
    let s = inner_stepsize(&p, &SmoothingParams::new(0.5, 0.1).unwrap()).unwrap();
    assert!((s - 2.0 / (p.constants.rho_g + 1.0)).abs() < 1e-15);
    assert!((inner_stepsize(&p, &SmoothingParams::unsmoothed()).unwrap() - 1.0 / p.constants.rho_g).abs() < 1e-15);
}

#[test]
fn k_hat_is_uniform() {
    let k = 20;
    let n = 10_000u64;
    let mut counts = vec![0u32; k + 1];
    for s in 0..n {
        let kh = draw_k_hat(k, s);
        assert!((1..=k).contains(&kh));
        counts[kh] += 1;
    }
    for c in &counts[1..] {
        let freq = *c as f64 / n as f64;
        assert!((freq - 1.0 / k as f64).abs() <= 0.02, "{counts:?}");
    }
}

#[test]
fn toy2_grid_oracle_recovers_optimum() {
    let p = toy2(0.0);
    let opt = grid_bilevel_optimum(&p, 1e-3, Execution::default()).unwrap();
    assert!((opt.z.x[0] + PI / 4.0).abs() <= 2e-3, "{:?}", opt.z);
    assert!((opt.z.y[0] + PI / 4.0).abs() <= 2e-3, "{:?}", opt.z);
    assert!((opt.f - PI * PI / 8.0).abs() <= 1e-2, "{}", opt.f);
}

#[test]
fn aid_solution_matches_linear_solve() {
    // v solves ∇²_yy g v = ∇_y f; for the quadratic ∇²_yy g = I so v = ∇_y f
    let p = strongly_convex_quadratic();
    let x = Vector::from_element(1, 0.7);
    let y = Vector::from_vec(vec![0.7, 0.35]);
    let gf = p.f_grad(&x, &y);
    let hg = hypergrad_aid_fp(&p, &x, &y, 60, 0.5).unwrap();
    let exact = &gf.x - p.hvp_g_xy(&x, &y, &gf.y).unwrap();
    assert!((hg - exact).norm() <= 1e-12);
}
