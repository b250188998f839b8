mod common;

use common::{sg, solve};
use kiteflow::bquad::Labelling;
use kiteflow::hyper::{
    check_max_principle_hyp, convexity_certificate, edge_certificate, grad_s_hyp, grad_s_hyp_gen, minimize_s_hyp,
    minimize_s_hyp_gen, s_hyp, s_hyp_gen, HypRadiusAssignment, HypSolveOptions, VertexKind,
};
use kiteflow::kernel::{big_f_beta_theta, big_f_beta_theta_second, f_theta, phi_gen, phi_hyp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn boundary_rho(g: &kiteflow::bquad::WhiteGraph, rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<f64> {
    (0..g.n).map(|v| if g.boundary[v] { rng.random_range(lo..hi) } else { 0.0 }).collect()
}

fn minimize(g: &kiteflow::bquad::WhiteGraph, a: &Labelling, b: &[f64]) -> HypRadiusAssignment {
    let opts = HypSolveOptions { tol: 1e-12, ..Default::default() };
    minimize_s_hyp(g, a, b, &opts).unwrap().0
}

#[test]
fn gradient_matches_finite_differences() {
    let (_, _, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    for _ in 0..200 {
        let alpha = Labelling { alpha: (0..g.edges.len()).map(|_| rng.random_range(0.3..2.8)).collect() };
        let rho: Vec<f64> = (0..g.n).map(|_| rng.random_range(-3.0..-0.1)).collect();
        let grad = grad_s_hyp(&g, &alpha, &rho).unwrap();
        for (k, &v) in g.interior_vertices.iter().enumerate() {
            let mut p = rho.clone();
            p[v] += h;
            let mut m = rho.clone();
            m[v] -= h;
            let fd = (s_hyp(&g, &alpha, &p).unwrap() - s_hyp(&g, &alpha, &m).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "fd {fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn deep_patterns_see_the_euclidean_residual() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let rho: Vec<f64> = (0..g.n).map(|_| -20.0 + rng.random_range(-0.5..0.5)).collect();
    let grad = grad_s_hyp(&g, &a, &rho).unwrap();
    for (k, &v) in g.interior_vertices.iter().enumerate() {
        let s: f64 = g.neighbors(v).map(|(_, w)| f_theta(FRAC_PI_2, rho[w] - rho[v]).unwrap()).sum();
        assert!((grad[k] - (2.0 * PI - 2.0 * s)).abs() < 1e-6);
    }
    let edges = s_hyp(&g, &a, &vec![-40.0; g.n]).unwrap() - 2.0 * PI * (-40.0) * g.interior_vertices.len() as f64;
    // Difference terms cancel in pairs at equal rho; what is left is the reflected linear part.
    let per_edge = 2.0 * kiteflow::kernel::big_f_theta(FRAC_PI_2, 0.0).unwrap() + FRAC_PI_2 * 80.0;
    assert!((edges - per_edge * g.edges.len() as f64).abs() < 1e-8);
}

#[test]
fn single_vertex_matches_bisection() {
    let (_, a, g) = sg(2);
    let v0 = g.interior_vertices[0];
    for c in [-0.3, -1.0, -2.5] {
        let b: Vec<f64> = (0..g.n).map(|v| if v == v0 { 0.0 } else { c }).collect();
        let sol = minimize(&g, &a, &b);
        let oracle = bisect(-40.0, -1e-12, |x| {
            2.0 * PI - 8.0 * (f_theta(FRAC_PI_2, c - x).unwrap() - f_theta(FRAC_PI_2, c + x).unwrap())
        });
        assert!((sol.rho[v0] - oracle).abs() < 1e-9, "{} vs {oracle}", sol.rho[v0]);
    }
}

#[test]
fn minimizer_matches_coordinate_descent() {
    let (_, a, g) = sg(4);
    let b: Vec<f64> = (0..g.n).map(|v| if g.boundary[v] { -1.0 } else { 0.0 }).collect();
    let opts = HypSolveOptions { tol: 1e-12, ..Default::default() };
    let (sol, rep) = minimize_s_hyp(&g, &a, &b, &opts).unwrap();
    assert!(rep.gradient_norm <= 1e-8);
    assert!(g.interior_vertices.iter().all(|&v| sol.rho[v] < 0.0));

    let mut rho = b.clone();
    for &v in &g.interior_vertices {
        rho[v] = -1.0;
    }
    for _ in 0..2000 {
        for &v in &g.interior_vertices {
            let nb: Vec<usize> = g.neighbors(v).map(|(_, w)| w).collect();
            let r = rho.clone();
            rho[v] = bisect(-40.0, -1e-12, |x| {
                2.0 * PI
                    - 2.0
                        * nb.iter()
                            .map(|&w| f_theta(FRAC_PI_2, r[w] - x).unwrap() - f_theta(FRAC_PI_2, r[w] + x).unwrap())
                            .sum::<f64>()
            });
        }
    }
    for &v in &g.interior_vertices {
        assert!((rho[v] - sol.rho[v]).abs() < 1e-6);
    }
}

#[test]
fn deep_boundary_matches_euclidean_solve() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let b = boundary_rho(&g, &mut rng, -30.0, -29.5);
    let hyp = minimize(&g, &a, &b);
    let r = solve(&g, &a, (0..g.n).map(|v| g.boundary[v].then(|| b[v].exp())).collect());
    for &v in &g.interior_vertices {
        let rel = (hyp.rho[v].exp() / r[v] - 1.0).abs();
        assert!(rel < 1e-4, "relative {rel}");
    }
}

#[test]
fn minimizer_is_independent_of_start() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let b = boundary_rho(&g, &mut rng, -2.0, -0.5);
    let base = minimize(&g, &a, &b);
    for _ in 0..5 {
        let init: Vec<f64> = (0..g.n).map(|_| rng.random_range(-4.0..-0.05)).collect();
        let opts = HypSolveOptions { tol: 1e-12, initial_rho: Some(init), ..Default::default() };
        let sol = minimize_s_hyp(&g, &a, &b, &opts).unwrap().0;
        for &v in &g.interior_vertices {
            assert!((sol.rho[v] - base.rho[v]).abs() < 1e-9);
        }
    }
}

#[test]
fn functional_is_strictly_convex_along_segments() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..50 {
        let b = boundary_rho(&g, &mut rng, -2.0, -0.2);
        let mut x = b.clone();
        let mut y = b.clone();
        for &v in &g.interior_vertices {
            x[v] = rng.random_range(-3.0..-0.1);
            y[v] = rng.random_range(-3.0..-0.1);
        }
        let m: Vec<f64> = x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect();
        let sm = s_hyp(&g, &a, &m).unwrap();
        let avg = 0.5 * (s_hyp(&g, &a, &x).unwrap() + s_hyp(&g, &a, &y).unwrap());
        assert!(sm < avg);
    }
}

#[test]
fn angle_grows_with_neighbor_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for _ in 0..200 {
        let t = rng.random_range(0.1..3.0);
        let r0 = rng.random_range(-4.0..-0.05);
        let r1 = rng.random_range(-4.0..-0.05);
        let h = 1e-7;
        let d = (phi_hyp(t, r0, r1 + h).unwrap() - phi_hyp(t, r0, r1 - h).unwrap()) / (2.0 * h);
        assert!(d > 0.0);
    }
}

#[test]
fn hyperbolic_max_principle() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let b = boundary_rho(&g, &mut rng, -2.0, -0.5);
    let rho = minimize(&g, &a, &b);
    assert!(check_max_principle_hyp(&g, &a, &rho, &rho, false).unwrap().holds);
    let shifted: Vec<f64> = b.iter().map(|x| x + 0.1).collect();
    let star = minimize(&g, &a, &shifted);
    let rep = check_max_principle_hyp(&g, &a, &rho, &star, false).unwrap();
    assert!(rep.hypothesis && rep.holds && rep.violations.is_empty());
    for _ in 0..20 {
        let b = boundary_rho(&g, &mut rng, -2.0, -0.5);
        let bs: Vec<f64> = b.iter().map(|x| x + rng.random_range(0.0..0.3)).collect();
        let rep = check_max_principle_hyp(&g, &a, &minimize(&g, &a, &b), &minimize(&g, &a, &bs), false).unwrap();
        assert!(rep.hypothesis && rep.holds);
    }
}

#[test]
fn generalized_max_principle_is_strict() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let b = boundary_rho(&g, &mut rng, -2.0, -0.5);
    let rho = minimize(&g, &a, &b);
    let mut star = HypRadiusAssignment::ordinary(&g, b.clone());
    let v = *g.boundary_vertices.iter().find(|&&v| g.neighbors(v).any(|(_, w)| !g.boundary[w])).unwrap();
    star.kind[v] = VertexKind::Beta;
    star.beta[v] = 0.3;
    assert!(convexity_certificate(&g, &a, &star));
    let opts = HypSolveOptions { tol: 1e-12, ..Default::default() };
    let (star, rep) = minimize_s_hyp_gen(&g, &a, &star, &opts).unwrap();
    assert!(rep.gradient_norm <= 1e-8);
    let mp = check_max_principle_hyp(&g, &a, &rho, &star, true).unwrap();
    assert!(mp.hypothesis && mp.holds);
    assert!(mp.min_interior_gap > 1e-10, "gap {}", mp.min_interior_gap);
    assert!(check_max_principle_hyp(&g, &a, &rho, &star, false).is_err());
}

#[test]
fn generalized_gradient_matches_finite_differences() {
    let (_, _, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let h = 1e-6;
    for _ in 0..50 {
        let alpha = Labelling { alpha: (0..g.edges.len()).map(|_| rng.random_range(0.3..2.8)).collect() };
        let rho: Vec<f64> = (0..g.n).map(|_| rng.random_range(-3.0..-0.1)).collect();
        let mut asg = HypRadiusAssignment::ordinary(&g, rho);
        for &v in &g.boundary_vertices {
            if rng.random_bool(0.5) {
                asg.kind[v] = VertexKind::Beta;
                asg.beta[v] = rng.random_range(0.0..3.0);
            }
        }
        let grad = grad_s_hyp_gen(&g, &alpha, &asg).unwrap();
        for (k, &v) in g.interior_vertices.iter().enumerate() {
            let mut p = asg.clone();
            p.rho[v] += h;
            let mut m = asg.clone();
            m.rho[v] -= h;
            let fd = (s_hyp_gen(&g, &alpha, &p).unwrap() - s_hyp_gen(&g, &alpha, &m).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "fd {fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn boundary_potential_derivative_is_generalized_angle() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let h = 1e-6;
    for _ in 0..1000 {
        let t = rng.random_range(0.1..3.0);
        let b = rng.random_range(0.0..3.1);
        let x: f64 = rng.random_range(-4.0..-0.05);
        let fd = (big_f_beta_theta(b, t, x + h).unwrap() - big_f_beta_theta(b, t, x - h).unwrap()) / (2.0 * h);
        let phi = phi_gen(t, x, b).unwrap();
        assert!((fd + 2.0 * phi).abs() < 1e-7, "fd {fd} phi {phi}");
    }
}

#[test]
fn certificate_matches_second_derivative_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let xs: Vec<f64> = (0..=400).map(|k| -40.0 + 0.1 * k as f64).collect();
    for _ in 0..200 {
        let t = rng.random_range(0.1..3.0);
        let b = rng.random_range(0.0..3.1);
        let positive = xs.iter().all(|&x| big_f_beta_theta_second(b, t, x) > 0.0);
        assert_eq!(edge_certificate(t, b), positive, "theta {t} beta {b}");
        // closed form against a second difference of the potential
        let x = rng.random_range(-3.0..-0.2);
        let h = 1e-4;
        let f = |y| big_f_beta_theta(b, t, y).unwrap();
        let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let cf = big_f_beta_theta_second(b, t, x);
        assert!((fd - cf).abs() < 1e-4 * cf.abs().max(1.0), "fd {fd} closed {cf}");
    }
}

/// A circle of euclidean radius `a` about the origin and four circles crossing
/// the unit circle, each meeting it at angle `theta` with intersection points
/// at angles `±π/4` from their centers.
#[test]
fn constructed_generalized_pattern_is_critical() {
    let (_, _, g) = sg(2);
    let v0 = g.interior_vertices[0];
    let psi = FRAC_PI_4;
    for (reach, theta) in [(1.2, FRAC_PI_2), (1.1, 1.2), (1.3, 1.9), (1.05, 0.8), (1.5, 2.2)] {
        // scale so that the far end of the outer circle sits at `reach`
        let a = reach * f64::sin(psi + theta) / (theta.sin() + psi.sin());
        assert!(a < 1.0);
        let d = a * f64::sin(theta) / f64::sin(psi + theta);
        let big_r = a * psi.sin() / f64::sin(psi + theta);
        assert!((d - big_r).abs() < 1.0 && d + big_r > 1.0);
        let beta = ((1.0 + big_r * big_r - d * d) / (2.0 * big_r)).acos();
        let mut asg = HypRadiusAssignment::ordinary(&g, vec![-1.0; g.n]);
        asg.rho[v0] = a.ln();
        for &v in &g.boundary_vertices {
            asg.kind[v] = VertexKind::Beta;
            asg.beta[v] = beta;
        }
        let alpha = Labelling::constant(g.edges.len(), theta);
        let grad = grad_s_hyp_gen(&g, &alpha, &asg).unwrap();
        assert!(grad[0].abs() < 1e-8, "a {a} theta {theta}: {}", grad[0]);
        // a slightly larger or smaller central circle is not critical
        asg.rho[v0] = (1.05 * a).ln();
        assert!(grad_s_hyp_gen(&g, &alpha, &asg).unwrap()[0].abs() > 1e-4);
    }
}
