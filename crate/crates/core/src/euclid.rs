//! Euclidean Dirichlet problem for radius functions.
//!
//! At an interior white vertex `v0` the kites around it close up iff
//! `Σ f_α(ρ(v) − ρ(v0)) = π`, with `ρ = log r`. Given the boundary radii the
//! interior radii are found by damped Newton on this system.

use crate::bquad::{Labelling, WhiteGraph};
use crate::error::{Error, Result};
use crate::kernel::{f_raw, fp_raw, kite_raw};
use crate::sparse::{pcg, CsrMatrix, Triplets};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusFunction {
    /// `log r` per white vertex.
    pub rho: Vec<f64>,
}

impl RadiusFunction {
    pub fn from_radii(r: &[f64]) -> Result<Self> {
        for (v, &x) in r.iter().enumerate() {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::MissingRadius(v));
            }
        }
        Ok(RadiusFunction { rho: r.iter().map(|x| x.ln()).collect() })
    }

    pub fn radii(&self) -> Vec<f64> {
        self.rho.iter().map(|x| x.exp()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DirichletProblem<'a> {
    pub graph: &'a WhiteGraph,
    pub alpha: &'a Labelling,
    /// Radius at each boundary vertex, `None` at interior vertices.
    pub boundary: Vec<Option<f64>>,
}

impl<'a> DirichletProblem<'a> {
    pub fn new(graph: &'a WhiteGraph, alpha: &'a Labelling, boundary: Vec<Option<f64>>) -> Result<Self> {
        if boundary.len() != graph.n {
            return Err(Error::InvalidInput(format!(
                "{} boundary entries for {} white vertices",
                boundary.len(),
                graph.n
            )));
        }
        if alpha.alpha.len() != graph.n_edges() {
            return Err(Error::InvalidInput("labelling does not match the graph".into()));
        }
        for v in 0..graph.n {
            match (graph.boundary[v], boundary[v]) {
                (true, Some(r)) if r > 0.0 && r.is_finite() => {}
                (true, _) => return Err(Error::MissingRadius(v)),
                (false, Some(_)) => return Err(Error::InvalidInput(format!("radius given at interior vertex {v}"))),
                (false, None) => {}
            }
        }
        Ok(DirichletProblem { graph, alpha, boundary })
    }

    /// Boundary data taken from a full radius vector.
    pub fn from_radii(graph: &'a WhiteGraph, alpha: &'a Labelling, r: &[f64]) -> Result<Self> {
        let b = (0..graph.n).map(|v| graph.boundary[v].then(|| r[v])).collect();
        Self::new(graph, alpha, b)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting `ρ` for the interior vertices (full-length vector; boundary
    /// entries are ignored). Default: mean boundary `ρ`.
    pub initial_rho: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 100, initial_rho: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// ∞-norm of the angle residual at the returned iterate.
    pub residual: f64,
    /// Number of step halvings in each Newton iteration.
    pub damping: Vec<u32>,
    pub converged: bool,
    pub linear_iterations: usize,
    /// Largest |ρ| seen; a diverging value hints at a problem without solution.
    pub max_abs_rho: f64,
}

/// Angle residual at each interior vertex, in the order of `graph.interior_vertices`.
pub fn residual(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> Vec<f64> {
    graph
        .interior_vertices
        .iter()
        .map(|&v0| {
            graph.fans[v0].iter().map(|f| f_raw(alpha.alpha[f.edge], rho[f.neighbor] - rho[v0])).sum::<f64>() - PI
        })
        .collect()
}

/// Residual from radii, with the radius check.
pub fn residual_radii(graph: &WhiteGraph, alpha: &Labelling, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != graph.n {
        return Err(Error::InvalidInput(format!("{} radii for {} vertices", r.len(), graph.n)));
    }
    let rf = RadiusFunction::from_radii(r)?;
    Ok(residual(graph, alpha, &rf.rho))
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton Jacobian `∂res(v0)/∂ρ(v)` on the interior vertices.
pub fn jacobian(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> CsrMatrix {
    let idx = graph.interior_index();
    let mut t = Triplets::new(graph.interior_vertices.len());
    for (i, &v0) in graph.interior_vertices.iter().enumerate() {
        let mut diag = 0.0;
        for f in &graph.fans[v0] {
            let d = fp_raw(alpha.alpha[f.edge], rho[f.neighbor] - rho[v0]);
            diag -= d;
            if let Some(j) = idx[f.neighbor] {
                t.push(i, j, d);
            }
        }
        t.push(i, i, diag);
    }
    t.build()
}

/// Largest ∞-norm of a Newton update in `ρ` before step halving.
pub const MAX_STEP: f64 = 2.0;

pub fn solve_dirichlet(problem: &DirichletProblem, opts: &SolveOptions) -> Result<(RadiusFunction, SolveReport)> {
    let g = problem.graph;
    let alpha = problem.alpha;
    let mut rho = vec![0.0; g.n];
    let mut sum = 0.0;
    for &v in &g.boundary_vertices {
        rho[v] = problem.boundary[v].unwrap().ln();
        sum += rho[v];
    }
    let mean = if g.boundary_vertices.is_empty() { 0.0 } else { sum / g.boundary_vertices.len() as f64 };
    for &v in &g.interior_vertices {
        rho[v] = match &opts.initial_rho {
            Some(init) => init[v],
            None => mean,
        };
    }

    let mut report = SolveReport {
        iterations: 0,
        residual: 0.0,
        damping: Vec::new(),
        converged: false,
        linear_iterations: 0,
        max_abs_rho: inf_norm(&rho),
    };
    let mut res = residual(g, alpha, &rho);
    report.residual = inf_norm(&res);
    let n_int = g.interior_vertices.len();
    while report.residual > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: report.iterations, residual: report.residual });
        }
        let a = jacobian(g, alpha, &rho).scaled(-1.0);
        let (delta, stats) = pcg(&a, &res, 1e-13, 20 * n_int + 100);
        report.linear_iterations += stats.iterations;
        let norm0 = two_norm(&res);
        // Far from the solution f' is tiny and full steps are huge; cap them.
        let mut t = (MAX_STEP / inf_norm(&delta)).min(1.0);
        let mut halvings = 0;
        loop {
            let mut trial = rho.clone();
            for (k, &v) in g.interior_vertices.iter().enumerate() {
                trial[v] += t * delta[k];
            }
            let r_trial = residual(g, alpha, &trial);
            if two_norm(&r_trial) < norm0 {
                rho = trial;
                res = r_trial;
                break;
            }
            halvings += 1;
            t *= 0.5;
            if halvings > 30 {
                return Err(Error::NoConvergence { iterations: report.iterations, residual: report.residual });
            }
        }
        report.damping.push(halvings);
        report.iterations += 1;
        report.residual = inf_norm(&res);
        report.max_abs_rho = report.max_abs_rho.max(inf_norm(&rho));
    }
    report.converged = true;
    Ok((RadiusFunction { rho }, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub holds: bool,
    pub max_quotient: f64,
    pub min_quotient: f64,
    /// Vertices where `r/r̃` attains its maximum (relative tolerance 1e-9).
    pub argmax: Vec<usize>,
    pub argmin: Vec<usize>,
}

/// Whether max and min of `r/r̃` are attained on the boundary.
pub fn check_max_principle(
    graph: &WhiteGraph,
    alpha: &Labelling,
    r: &[f64],
    r_tilde: &[f64],
) -> Result<MaxPrincipleReport> {
    for x in [r, r_tilde] {
        let res = inf_norm(&residual_radii(graph, alpha, x)?);
        if res > 1e-8 {
            return Err(Error::NotASolution { residual: res });
        }
    }
    let u: Vec<f64> = r.iter().zip(r_tilde).map(|(a, b)| a / b).collect();
    let max = u.iter().cloned().fold(f64::MIN, f64::max);
    let min = u.iter().cloned().fold(f64::MAX, f64::min);
    let tol = 1e-9;
    let argmax: Vec<usize> = (0..graph.n).filter(|&v| u[v] >= max * (1.0 - tol)).collect();
    let argmin: Vec<usize> = (0..graph.n).filter(|&v| u[v] <= min * (1.0 + tol)).collect();
    let holds = argmax.iter().any(|&v| graph.boundary[v]) && argmin.iter().any(|&v| graph.boundary[v]);
    Ok(MaxPrincipleReport { holds, max_quotient: max, min_quotient: min, argmax, argmin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QBoundReport {
    pub q: f64,
    /// `H/L` per edge.
    pub ratios: Vec<f64>,
    pub nonconvex_edges: Vec<usize>,
}

pub fn q_bound(graph: &WhiteGraph, alpha: &Labelling, r: &[f64]) -> Result<QBoundReport> {
    RadiusFunction::from_radii(r)?;
    let mut q: f64 = 1.0;
    let mut ratios = Vec::with_capacity(graph.n_edges());
    let mut nonconvex_edges = Vec::new();
    for (e, &[a, b]) in graph.edges.iter().enumerate() {
        let k = kite_raw(alpha.alpha[e], r[a], r[b]);
        let m = k.diagonal_ratio();
        q = q.max(m).max(1.0 / m);
        ratios.push(m);
        if !k.convex {
            nonconvex_edges.push(e);
        }
    }
    Ok(QBoundReport { q, ratios, nonconvex_edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bquad::generate_square_grid;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn isoradial_residual_vanishes_and_is_scale_free() {
        let (d, a) = generate_square_grid(4, 4, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let res = residual_radii(&g, &a, &vec![1.0; g.n]).unwrap();
        assert!(inf_norm(&res) < 1e-15);
        let r: Vec<f64> = (0..g.n).map(|v| 1.0 + 0.1 * v as f64).collect();
        let s: Vec<f64> = r.iter().map(|x| 3.7 * x).collect();
        let r1 = residual_radii(&g, &a, &r).unwrap();
        let r2 = residual_radii(&g, &a, &s).unwrap();
        for (x, y) in r1.iter().zip(&r2) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn degree_four_residual_closed_form() {
        let (d, a) = generate_square_grid(2, 2, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let mut r = vec![1.0, 1.0, 1.0, 2.0, 2.0];
        r[2] = 1.0;
        let res = residual_radii(&g, &a, &r).unwrap();
        let expect = 2.0 * (1f64.atan() + 2f64.atan()) - PI;
        assert!((res[0] - expect).abs() < 1e-14);
        assert!((res[0] - 0.643_501_108_793_284_4).abs() < 1e-12);
    }

    #[test]
    fn missing_radius_is_reported() {
        let (d, a) = generate_square_grid(2, 2, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        assert!(matches!(residual_radii(&g, &a, &[1.0, 0.0, 1.0, 1.0, 1.0]), Err(Error::MissingRadius(1))));
        assert!(DirichletProblem::new(&g, &a, vec![Some(1.0); 5]).is_err());
        assert!(DirichletProblem::new(&g, &a, vec![Some(1.0), None, None, Some(1.0), Some(1.0)]).is_err());
    }

    #[test]
    fn q_bound_values() {
        let (d, a) = generate_square_grid(3, 3, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let rep = q_bound(&g, &a, &vec![1.0; g.n]).unwrap();
        assert!((rep.q - 1.0).abs() < 1e-14);
        let (d, a) = generate_square_grid(1, 1, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let rep = q_bound(&g, &a, &[1.0, 2.0]).unwrap();
        assert!((rep.ratios[0] - 0.8).abs() < 1e-14);
        assert!((rep.q - 1.25).abs() < 1e-14);
    }
}
