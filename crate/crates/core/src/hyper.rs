//! Hyperbolic circle patterns through the convex functional `S_hyp`.
//!
//! Variables are `ρ = log tanh(r_hyp / 2) < 0`. Boundary circles may also cross
//! the unit circle at an exterior angle `β`; those vertices carry `β` instead of
//! `ρ` and their edges use the potential `F_{β,θ}`.

use crate::bquad::{Labelling, WhiteGraph};
use crate::error::{Error, Result};
use crate::euclid::inf_norm;
use crate::kernel::{big_f_beta_theta, big_f_beta_theta_second, big_f_raw, f_raw, f_theta_complex, fp_raw};
use crate::sparse::{pcg, CsrMatrix, Triplets};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Upper bound enforced on interior `ρ` during minimization.
pub const RHO_CEILING: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Int,
    Bnd,
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypRadiusAssignment {
    /// `ρ` for `Int`/`Bnd` vertices (ignored for `Beta`).
    pub rho: Vec<f64>,
    pub kind: Vec<VertexKind>,
    /// Exterior angle for `Beta` vertices (ignored otherwise).
    pub beta: Vec<f64>,
}

impl HypRadiusAssignment {
    /// All boundary vertices ordinary.
    pub fn ordinary(graph: &WhiteGraph, rho: Vec<f64>) -> Self {
        let kind = (0..graph.n).map(|v| if graph.boundary[v] { VertexKind::Bnd } else { VertexKind::Int }).collect();
        HypRadiusAssignment { rho, kind, beta: vec![0.0; graph.n] }
    }

    pub fn has_beta(&self) -> bool {
        self.kind.contains(&VertexKind::Beta)
    }

    fn validate(&self, graph: &WhiteGraph) -> Result<()> {
        if self.rho.len() != graph.n || self.kind.len() != graph.n || self.beta.len() != graph.n {
            return Err(Error::InvalidInput("assignment length does not match the graph".into()));
        }
        for v in 0..graph.n {
            match (graph.boundary[v], self.kind[v]) {
                (false, VertexKind::Int) | (true, VertexKind::Bnd) => {
                    if !(self.rho[v] < 0.0 && self.rho[v].is_finite()) {
                        return Err(Error::Kernel(crate::kernel::KernelError::Domain(format!(
                            "rho({v}) = {} must be negative",
                            self.rho[v]
                        ))));
                    }
                }
                (true, VertexKind::Beta) => {
                    if !(0.0..PI).contains(&self.beta[v]) {
                        return Err(Error::Kernel(crate::kernel::KernelError::Domain(format!(
                            "beta({v}) = {} not in [0, pi)",
                            self.beta[v]
                        ))));
                    }
                }
                _ => return Err(Error::InvalidInput(format!("vertex {v} has the wrong kind"))),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypFunctionalReport {
    pub value: f64,
    /// Gradient in the order of `graph.interior_vertices`.
    pub gradient: Vec<f64>,
    pub convex_certificate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypSolveReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub clipped_steps: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct HypSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_rho: Option<Vec<f64>>,
}

impl Default for HypSolveOptions {
    fn default() -> Self {
        HypSolveOptions { tol: 1e-10, max_iter: 200, initial_rho: None }
    }
}

fn edge_terms(theta: f64, a: f64, b: f64) -> f64 {
    big_f_raw(theta, a - b) + big_f_raw(theta, b - a) + big_f_raw(theta, a + b) + big_f_raw(theta, -a - b)
}

fn check_negative(graph: &WhiteGraph, rho: &[f64]) -> Result<()> {
    if rho.len() != graph.n {
        return Err(Error::InvalidInput(format!("{} values for {} vertices", rho.len(), graph.n)));
    }
    for (v, &x) in rho.iter().enumerate() {
        if !(x < 0.0) {
            return Err(Error::Kernel(crate::kernel::KernelError::Domain(format!("rho({v}) = {x} must be negative"))));
        }
    }
    Ok(())
}

pub fn s_hyp(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> Result<f64> {
    check_negative(graph, rho)?;
    Ok(s_hyp_raw(graph, alpha, rho))
}

fn s_hyp_raw(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> f64 {
    let edges: f64 =
        graph.edges.iter().enumerate().map(|(e, &[l, r])| edge_terms(alpha.alpha[e], rho[l], rho[r])).sum();
    edges + 2.0 * PI * graph.interior_vertices.iter().map(|&v| rho[v]).sum::<f64>()
}

pub fn grad_s_hyp(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> Result<Vec<f64>> {
    check_negative(graph, rho)?;
    Ok(grad_raw(graph, alpha, rho))
}

fn grad_raw(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> Vec<f64> {
    graph
        .interior_vertices
        .iter()
        .map(|&v0| {
            let s: f64 = graph.fans[v0]
                .iter()
                .map(|f| {
                    let t = alpha.alpha[f.edge];
                    f_raw(t, rho[f.neighbor] - rho[v0]) - f_raw(t, rho[f.neighbor] + rho[v0])
                })
                .sum();
            2.0 * PI - 2.0 * s
        })
        .collect()
}

/// Hessian on the interior vertices; `beta` marks generalized neighbors.
fn hessian(graph: &WhiteGraph, alpha: &Labelling, a: &HypRadiusAssignment) -> CsrMatrix {
    let idx = graph.interior_index();
    let mut t = Triplets::new(graph.interior_vertices.len());
    for (i, &v0) in graph.interior_vertices.iter().enumerate() {
        let r0 = a.rho[v0];
        let mut diag = 0.0;
        for f in &graph.fans[v0] {
            let th = alpha.alpha[f.edge];
            let v = f.neighbor;
            if a.kind[v] == VertexKind::Beta {
                diag += big_f_beta_theta_second(a.beta[v], th, r0);
                continue;
            }
            let fa = fp_raw(th, a.rho[v] - r0);
            let fb = fp_raw(th, a.rho[v] + r0);
            diag += 2.0 * (fa + fb);
            if let Some(j) = idx[v] {
                t.push(i, j, -2.0 * (fa - fb));
            }
        }
        t.push(i, i, diag);
    }
    t.build()
}

/// Hessian of `S_hyp` (ordinary boundary) on the interior vertices.
pub fn hessian_s_hyp(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> Result<CsrMatrix> {
    check_negative(graph, rho)?;
    Ok(hessian(graph, alpha, &HypRadiusAssignment::ordinary(graph, rho.to_vec())))
}

/// `S^g_hyp`. Edges between two boundary vertices of which at least one is a
/// `β`-vertex contribute a constant and are left out.
pub fn s_hyp_gen(graph: &WhiteGraph, alpha: &Labelling, a: &HypRadiusAssignment) -> Result<f64> {
    a.validate(graph)?;
    let mut s = 0.0;
    for (e, &[l, r]) in graph.edges.iter().enumerate() {
        let th = alpha.alpha[e];
        match (a.kind[l], a.kind[r]) {
            (VertexKind::Beta, VertexKind::Int) => s += big_f_beta_theta(a.beta[l], th, a.rho[r])?,
            (VertexKind::Int, VertexKind::Beta) => s += big_f_beta_theta(a.beta[r], th, a.rho[l])?,
            (VertexKind::Beta, _) | (_, VertexKind::Beta) => {}
            _ => s += edge_terms(th, a.rho[l], a.rho[r]),
        }
    }
    Ok(s + 2.0 * PI * graph.interior_vertices.iter().map(|&v| a.rho[v]).sum::<f64>())
}

pub fn grad_s_hyp_gen(graph: &WhiteGraph, alpha: &Labelling, a: &HypRadiusAssignment) -> Result<Vec<f64>> {
    a.validate(graph)?;
    grad_gen_raw(graph, alpha, a)
}

fn grad_gen_raw(graph: &WhiteGraph, alpha: &Labelling, a: &HypRadiusAssignment) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(graph.interior_vertices.len());
    for &v0 in &graph.interior_vertices {
        let r0 = a.rho[v0];
        let mut s = 0.0;
        for f in &graph.fans[v0] {
            let t = alpha.alpha[f.edge];
            let v = f.neighbor;
            if a.kind[v] == VertexKind::Beta {
                // f(iβ − ρ0) − f(iβ + ρ0)
                let b = a.beta[v];
                s += (f_theta_complex(t, -r0, b)? - f_theta_complex(t, r0, b)?).re;
            } else {
                s += f_raw(t, a.rho[v] - r0) - f_raw(t, a.rho[v] + r0);
            }
        }
        out.push(2.0 * PI - 2.0 * s);
    }
    Ok(out)
}

/// Strict convexity of `S^g_hyp`: `cos α < cos β` with `cos β ≥ 0` on every
/// edge from an interior vertex to a `β`-vertex. Without `cos β ≥ 0` the second
/// derivative of `F_{β,α}` turns negative for large |ρ|.
pub fn convexity_certificate(graph: &WhiteGraph, alpha: &Labelling, a: &HypRadiusAssignment) -> bool {
    graph.edges.iter().enumerate().all(|(e, &[l, r])| {
        let b = match (a.kind[l], a.kind[r]) {
            (VertexKind::Beta, VertexKind::Int) => a.beta[l],
            (VertexKind::Int, VertexKind::Beta) => a.beta[r],
            _ => return true,
        };
        edge_certificate(alpha.alpha[e], b)
    })
}

/// Per-edge certificate: `F_{β,θ}` is strictly convex on the whole line.
pub fn edge_certificate(theta: f64, beta: f64) -> bool {
    theta.cos() < beta.cos() && beta.cos() >= 0.0
}

pub fn functional_report(
    graph: &WhiteGraph,
    alpha: &Labelling,
    a: &HypRadiusAssignment,
) -> Result<HypFunctionalReport> {
    Ok(HypFunctionalReport {
        value: s_hyp_gen(graph, alpha, a)?,
        gradient: grad_s_hyp_gen(graph, alpha, a)?,
        convex_certificate: convexity_certificate(graph, alpha, a),
    })
}

fn value_raw(graph: &WhiteGraph, alpha: &Labelling, a: &HypRadiusAssignment) -> f64 {
    if a.has_beta() {
        s_hyp_gen(graph, alpha, a).unwrap_or(f64::INFINITY)
    } else {
        s_hyp_raw(graph, alpha, &a.rho)
    }
}

fn newton(
    graph: &WhiteGraph,
    alpha: &Labelling,
    mut a: HypRadiusAssignment,
    opts: &HypSolveOptions,
) -> Result<(HypRadiusAssignment, HypSolveReport)> {
    let n_int = graph.interior_vertices.len();
    let grad = |a: &HypRadiusAssignment| -> Result<Vec<f64>> {
        if a.has_beta() {
            grad_gen_raw(graph, alpha, a)
        } else {
            Ok(grad_raw(graph, alpha, &a.rho))
        }
    };
    let mut g = grad(&a)?;
    let mut value = value_raw(graph, alpha, &a);
    let mut rep =
        HypSolveReport { iterations: 0, gradient_norm: inf_norm(&g), converged: false, clipped_steps: 0, value };
    while rep.gradient_norm > opts.tol {
        if rep.iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: rep.iterations, residual: rep.gradient_norm });
        }
        let h = hessian(graph, alpha, &a);
        let (delta, _) = pcg(&h, &g, 1e-13, 20 * n_int + 100);
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=40 {
            let mut trial = a.clone();
            let mut clipped = false;
            for (k, &v) in graph.interior_vertices.iter().enumerate() {
                let x = a.rho[v] - t * delta[k];
                if x > RHO_CEILING {
                    clipped = true;
                }
                trial.rho[v] = x.min(RHO_CEILING);
            }
            let tv = value_raw(graph, alpha, &trial);
            let slope: f64 =
                graph.interior_vertices.iter().enumerate().map(|(k, &v)| g[k] * (trial.rho[v] - a.rho[v])).sum();
            let tg = grad(&trial)?;
            let tgnorm = tg.iter().map(|x| x * x).sum::<f64>().sqrt();
            let flat = (tv - value).abs() <= 1e-13 * value.abs().max(1.0);
            if tv <= value + 1e-4 * slope || (flat && tgnorm < gnorm) {
                if clipped {
                    rep.clipped_steps += 1;
                }
                a = trial;
                g = tg;
                value = tv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if graph.interior_vertices.iter().any(|&v| a.rho[v] >= RHO_CEILING) {
                return Err(Error::DomainViolation(
                    "interior rho pinned at 0; boundary data admit no pattern inside the disc".into(),
                ));
            }
            return Err(Error::NoConvergence { iterations: rep.iterations, residual: rep.gradient_norm });
        }
        rep.iterations += 1;
        rep.gradient_norm = inf_norm(&g);
        rep.value = value;
    }
    if graph.interior_vertices.iter().any(|&v| a.rho[v] >= RHO_CEILING) {
        return Err(Error::DomainViolation("minimizer touches rho = 0".into()));
    }
    rep.converged = true;
    Ok((a, rep))
}

fn start(graph: &WhiteGraph, a: &mut HypRadiusAssignment, opts: &HypSolveOptions) {
    let bnd: Vec<f64> = (0..graph.n).filter(|&v| a.kind[v] == VertexKind::Bnd).map(|v| a.rho[v]).collect();
    let mean = if bnd.is_empty() { -1.0 } else { bnd.iter().sum::<f64>() / bnd.len() as f64 };
    for &v in &graph.interior_vertices {
        a.rho[v] = match &opts.initial_rho {
            Some(init) => init[v].min(RHO_CEILING),
            None => mean,
        };
    }
}

/// Minimizes `S_hyp` for fixed boundary `ρ` (entries at interior vertices are ignored).
pub fn minimize_s_hyp(
    graph: &WhiteGraph,
    alpha: &Labelling,
    boundary_rho: &[f64],
    opts: &HypSolveOptions,
) -> Result<(HypRadiusAssignment, HypSolveReport)> {
    if boundary_rho.len() != graph.n {
        return Err(Error::InvalidInput("boundary vector length does not match the graph".into()));
    }
    let mut a = HypRadiusAssignment::ordinary(graph, boundary_rho.to_vec());
    start(graph, &mut a, opts);
    a.validate(graph)?;
    newton(graph, alpha, a, opts)
}

/// Minimizes `S^g_hyp`; refuses unless the convexity certificate holds.
pub fn minimize_s_hyp_gen(
    graph: &WhiteGraph,
    alpha: &Labelling,
    boundary: &HypRadiusAssignment,
    opts: &HypSolveOptions,
) -> Result<(HypRadiusAssignment, HypSolveReport)> {
    let mut a = boundary.clone();
    start(graph, &mut a, opts);
    a.validate(graph)?;
    if !convexity_certificate(graph, alpha, &a) {
        return Err(Error::InvalidInput(
            "generalized functional is not certified convex; no minimum is claimed".into(),
        ));
    }
    newton(graph, alpha, a, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypMaxPrincipleReport {
    /// Hypothesis ⇒ conclusion.
    pub holds: bool,
    /// Every boundary vertex is a `β`-vertex of `rho_star` or has `ρ* ≥ ρ`.
    pub hypothesis: bool,
    /// Interior vertices with `ρ* < ρ`.
    pub violations: Vec<usize>,
    /// `min (ρ* − ρ)` over interior vertices.
    pub min_interior_gap: f64,
}

/// Checks the (generalized) hyperbolic maximum principle between two critical points.
pub fn check_max_principle_hyp(
    graph: &WhiteGraph,
    alpha: &Labelling,
    rho: &HypRadiusAssignment,
    rho_star: &HypRadiusAssignment,
    generalized: bool,
) -> Result<HypMaxPrincipleReport> {
    rho.validate(graph)?;
    rho_star.validate(graph)?;
    if rho.has_beta() {
        return Err(Error::InvalidInput("rho must lie inside the disc".into()));
    }
    if rho_star.has_beta() && !generalized {
        return Err(Error::InvalidInput("rho_star has beta vertices; use the generalized check".into()));
    }
    for a in [rho, rho_star] {
        let g = inf_norm(&grad_gen_raw(graph, alpha, a)?);
        if g > 1e-6 {
            return Err(Error::NotASolution { residual: g });
        }
    }
    let tol = 1e-10;
    let hypothesis = graph
        .boundary_vertices
        .iter()
        .all(|&v| rho_star.kind[v] == VertexKind::Beta || rho_star.rho[v] >= rho.rho[v] - tol);
    let violations: Vec<usize> =
        graph.interior_vertices.iter().copied().filter(|&v| rho_star.rho[v] < rho.rho[v] - tol).collect();
    let min_interior_gap =
        graph.interior_vertices.iter().map(|&v| rho_star.rho[v] - rho.rho[v]).fold(f64::INFINITY, f64::min);
    Ok(HypMaxPrincipleReport { holds: !hypothesis || violations.is_empty(), hypothesis, violations, min_interior_gap })
}
