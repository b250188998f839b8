mod common;

use common::{boundary_of, random_boundary, sg, solve};
use kiteflow::euclid::{
    check_max_principle, inf_norm, jacobian, q_bound, residual_radii, solve_dirichlet, DirichletProblem, SolveOptions,
};
use kiteflow::network::{conductances_from_pattern, laplacian};
use kiteflow::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

#[test]
fn isoradial_grid_is_reproduced() {
    let (_, a, g) = sg(5);
    let r = solve(&g, &a, boundary_of(&g, &vec![1.0; g.n]));
    assert!(r.iter().all(|&x| (x - 1.0).abs() < 1e-10));
}

#[test]
fn degree_four_vertex_matches_bisection() {
    let (_, a, g) = sg(2);
    let interior = g.interior_vertices[0];
    let ring: Vec<usize> = (0..g.n).filter(|&v| v != interior).collect();
    let mut b = vec![None; g.n];
    for (k, &v) in ring.iter().enumerate() {
        b[v] = Some(if k < 2 { 1.0 } else { 2.0 });
    }
    let r = solve(&g, &a, b);
    let oracle = bisect(0.1, 10.0, |c: f64| (1.0 / c).atan() + (2.0 / c).atan() - std::f64::consts::FRAC_PI_2);
    assert!((oracle - 2f64.sqrt()).abs() < 1e-12);
    assert!((r[interior] - 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn scaling_boundary_scales_solution() {
    let (_, a, g) = sg(5);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = random_boundary(&g, &mut rng, 0.5, 2.0);
    let c = 3.25;
    let r1 = solve(&g, &a, b.clone());
    let r2 = solve(&g, &a, b.iter().map(|x| x.map(|y| c * y)).collect());
    for v in 0..g.n {
        assert!((r2[v] - c * r1[v]).abs() <= 1e-12 * r2[v]);
    }
}

#[test]
fn solution_is_independent_of_start() {
    let (_, a, g) = sg(5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let b = random_boundary(&g, &mut rng, 0.5, 2.0);
    let p = DirichletProblem::new(&g, &a, b).unwrap();
    let base = solve_dirichlet(&p, &SolveOptions::default()).unwrap().0.rho;
    for _ in 0..10 {
        let init: Vec<f64> = (0..g.n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let opts = SolveOptions { initial_rho: Some(init), ..Default::default() };
        let rho = solve_dirichlet(&p, &opts).unwrap().0.rho;
        let spread = rho.iter().zip(&base).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(spread <= 1e-9, "spread {spread}");
    }
}

#[test]
fn max_principle_examples() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let r = solve(&g, &a, random_boundary(&g, &mut rng, 0.5, 2.0));
    assert!(check_max_principle(&g, &a, &r, &r).unwrap().holds);
    let s: Vec<f64> = r.iter().map(|x| 2.5 * x).collect();
    assert!(check_max_principle(&g, &a, &r, &s).unwrap().holds);
    let mut bad = r.clone();
    bad[g.interior_vertices[0]] *= 1.1;
    assert!(matches!(check_max_principle(&g, &a, &bad, &r), Err(Error::NotASolution { .. })));
}

#[test]
fn raising_a_boundary_radius_raises_interior() {
    let (_, a, g) = sg(5);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let b = random_boundary(&g, &mut rng, 0.5, 2.0);
        let r1 = solve(&g, &a, b.clone());
        let mut b2 = b.clone();
        let v = g.boundary_vertices[rng.random_range(0..g.boundary_vertices.len())];
        b2[v] = b2[v].map(|x| x * 1.3);
        let r2 = solve(&g, &a, b2);
        for &w in &g.interior_vertices {
            assert!(r2[w] >= r1[w] * (1.0 - 1e-10));
        }
    }
}

#[test]
fn jacobian_is_half_the_network_laplacian() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let r = solve(&g, &a, random_boundary(&g, &mut rng, 0.5, 2.0));
    let rho: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let j = jacobian(&g, &a, &rho);
    assert!(j.is_symmetric());
    let wg = conductances_from_pattern(&g, &a, &r).unwrap();
    for (jw, &w) in g.interior_vertices.iter().enumerate() {
        let mut e = vec![0.0; g.n];
        e[w] = 1.0;
        let col = laplacian(&wg, &e);
        for (jv, &v) in g.interior_vertices.iter().enumerate() {
            assert!((j.get(jv, jw) - 0.5 * col[v]).abs() < 1e-12);
        }
    }
}

#[test]
fn q_bound_matches_conductances() {
    let (_, a, g) = sg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let r = solve(&g, &a, random_boundary(&g, &mut rng, 0.5, 2.0));
    let q = q_bound(&g, &a, &r).unwrap();
    let wg = conductances_from_pattern(&g, &a, &r).unwrap();
    let from_mu = wg.edges.iter().map(|e| e.2.max(1.0 / e.2)).fold(1.0, f64::max);
    assert!((q.q - from_mu).abs() < 1e-12);
    assert!((q_bound(&g, &a, &vec![1.0; g.n]).unwrap().q - 1.0).abs() < 1e-12);
}

#[test]
fn missing_boundary_radius_is_reported() {
    let (_, a, g) = sg(3);
    let mut b = boundary_of(&g, &vec![1.0; g.n]);
    let v = g.boundary_vertices[2];
    b[v] = None;
    assert!(matches!(DirichletProblem::new(&g, &a, b), Err(Error::MissingRadius(w)) if w == v));
    assert!(matches!(residual_radii(&g, &a, &vec![0.0; g.n]), Err(Error::MissingRadius(_))));
    let r = solve(&g, &a, boundary_of(&g, &vec![2.0; g.n]));
    assert!(inf_norm(&residual_radii(&g, &a, &r).unwrap()) <= 1e-10);
}
