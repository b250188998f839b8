#![allow(dead_code)]

use kiteflow::bquad::{build_bquad, generate_square_grid, BQuadGraph, Labelling, WhiteGraph};
use kiteflow::euclid::{solve_dirichlet, DirichletProblem, SolveOptions};
use kiteflow::layout::Point;
use rand::Rng;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

pub fn sg(n: usize) -> (BQuadGraph, Labelling, WhiteGraph) {
    let (d, a) = generate_square_grid(n, n, FRAC_PI_2).unwrap();
    let g = d.white_graph();
    (d, a, g)
}

pub fn random_boundary(g: &WhiteGraph, rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<Option<f64>> {
    (0..g.n).map(|v| g.boundary[v].then(|| rng.random_range(lo..hi))).collect()
}

pub fn solve(g: &WhiteGraph, a: &Labelling, boundary: Vec<Option<f64>>) -> Vec<f64> {
    let p = DirichletProblem::new(g, a, boundary).unwrap();
    solve_dirichlet(&p, &SolveOptions::default()).unwrap().0.radii()
}

pub fn solve_tol(g: &WhiteGraph, a: &Labelling, boundary: Vec<Option<f64>>, tol: f64) -> Vec<f64> {
    let p = DirichletProblem::new(g, a, boundary).unwrap();
    solve_dirichlet(&p, &SolveOptions { tol, ..Default::default() }).unwrap().0.radii()
}

/// Boundary radii taken from a given full radius vector.
pub fn boundary_of(g: &WhiteGraph, r: &[f64]) -> Vec<Option<f64>> {
    (0..g.n).map(|v| g.boundary[v].then_some(r[v])).collect()
}

/// Hexagonal patch of the triangular lattice: white vertices are lattice points
/// (circles of radius 1/2) and triangle centers (incircles), black vertices are
/// edge midpoints; neighboring circles meet orthogonally.
pub struct Hex {
    pub graph: BQuadGraph,
    pub alpha: Labelling,
    /// Position and exact radius per global id (white ids only).
    pub position: BTreeMap<usize, Point>,
    pub radius: BTreeMap<usize, f64>,
}

pub fn hex_patch(k: i64) -> Hex {
    // Coordinates in units of 1/6 of the lattice basis.
    let pos = |a: i64, b: i64| Point::new((a as f64 + b as f64 * 0.5) / 6.0, b as f64 * 3f64.sqrt() / 2.0 / 6.0);
    let inside = |i: i64, j: i64| i.abs() <= k && j.abs() <= k && (i + j).abs() <= k;
    let mut ids: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let id = |key: (i64, i64), ids: &mut BTreeMap<(i64, i64), usize>| {
        let n = ids.len();
        *ids.entry(key).or_insert(n)
    };
    let mut quads = Vec::new();
    let mut position = BTreeMap::new();
    let mut radius = BTreeMap::new();
    for j in -k..=k {
        for i in -k..=k {
            for tri in [[(i, j), (i + 1, j), (i, j + 1)], [(i + 1, j), (i + 1, j + 1), (i, j + 1)]] {
                if !tri.iter().all(|&(a, b)| inside(a, b)) {
                    continue;
                }
                let c = (2 * tri.iter().map(|p| p.0).sum::<i64>(), 2 * tri.iter().map(|p| p.1).sum::<i64>());
                let tc = id(c, &mut ids);
                position.insert(tc, pos(c.0, c.1));
                radius.insert(tc, 1.0 / (2.0 * 3f64.sqrt()));
                for s in 0..3 {
                    let p = tri[s];
                    let q1 = tri[(s + 1) % 3];
                    let q2 = tri[(s + 2) % 3];
                    let pk = (6 * p.0, 6 * p.1);
                    let m1 = (3 * (p.0 + q1.0), 3 * (p.1 + q1.1));
                    let m2 = (3 * (p.0 + q2.0), 3 * (p.1 + q2.1));
                    let pv = id(pk, &mut ids);
                    position.insert(pv, pos(pk.0, pk.1));
                    radius.insert(pv, 0.5);
                    let (b1, b2) = (id(m1, &mut ids), id(m2, &mut ids));
                    let ring = [pos(pk.0, pk.1), pos(m1.0, m1.1), pos(c.0, c.1), pos(m2.0, m2.1)];
                    let area: f64 = (0..4)
                        .map(|t| {
                            let (u, v) = (ring[t], ring[(t + 1) % 4]);
                            u.re * v.im - u.im * v.re
                        })
                        .sum();
                    quads.push(if area > 0.0 { [pv, b1, tc, b2] } else { [pv, b2, tc, b1] });
                }
            }
        }
    }
    let graph = build_bquad(&quads).unwrap();
    let alpha = Labelling::constant(graph.n_quads(), FRAC_PI_2);
    Hex { graph, alpha, position, radius }
}

impl Hex {
    /// Exact radii indexed by local white index.
    pub fn radii(&self) -> Vec<f64> {
        self.graph.white_ids().iter().map(|g| self.radius[g]).collect()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.graph.white_ids().iter().map(|g| self.position[g]).collect()
    }
}
