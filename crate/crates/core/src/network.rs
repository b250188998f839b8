//! Electrical networks on the white graph: conductances from kites,
//! Laplacian, harmonic extension, effective resistance, and vertex extremal
//! length with its separating-set dual.

use crate::bquad::{Labelling, WhiteGraph};
use crate::error::{Error, Result};
use crate::euclid::RadiusFunction;
use crate::kernel::fp_raw;
use crate::layout::Point;
use crate::sparse::{pcg, Triplets};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    /// `(u, v, μ)`.
    pub edges: Vec<(usize, usize, f64)>,
    pub boundary: Vec<bool>,
    #[serde(skip)]
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>, boundary: Vec<bool>) -> Result<Self> {
        if boundary.len() != n {
            return Err(Error::InvalidInput("boundary flags do not match vertex count".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for (k, &(u, v, m)) in edges.iter().enumerate() {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidInput(format!("edge {k} ({u}, {v}) is invalid")));
            }
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidInput(format!("edge {k} has conductance {m}")));
            }
            adj[u].push((v, m));
            adj[v].push((u, m));
        }
        for a in adj.iter_mut() {
            a.sort_by_key(|x| x.0);
        }
        Ok(WeightedGraph { n, edges, boundary, adj })
    }

    /// Unit conductances.
    pub fn unit(n: usize, edges: &[(usize, usize)], boundary: Vec<bool>) -> Result<Self> {
        Self::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)).collect(), boundary)
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.edges.iter().map(|&(u, v, m)| (u, v, c * m)).collect(), self.boundary.clone())
    }

    /// `Σ_{e ∋ v} μ(e)`.
    pub fn conductance_sums(&self) -> Vec<f64> {
        self.adj.iter().map(|a| a.iter().map(|x| x.1).sum()).collect()
    }
}

/// `μ(e) = 2 f'_α(log r(v1) − log r(v0))`, the diagonal ratio `H/L` of the kite.
pub fn conductances_from_pattern(graph: &WhiteGraph, alpha: &Labelling, r: &[f64]) -> Result<WeightedGraph> {
    let rho = RadiusFunction::from_radii(r)?.rho;
    conductances_from_rho(graph, alpha, &rho)
}

pub fn conductances_from_rho(graph: &WhiteGraph, alpha: &Labelling, rho: &[f64]) -> Result<WeightedGraph> {
    let edges = graph
        .edges
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| (a, b, 2.0 * fp_raw(alpha.alpha[e], rho[b] - rho[a])))
        .collect();
    WeightedGraph::new(graph.n, edges, graph.boundary.clone())
}

/// `Δh(v0) = Σ μ([v0, v])(h(v) − h(v0))` at every vertex; only interior values
/// are meaningful for a Dirichlet problem.
pub fn laplacian(wg: &WeightedGraph, h: &[f64]) -> Vec<f64> {
    (0..wg.n).map(|v| wg.adj[v].iter().map(|&(w, m)| m * (h[w] - h[v])).sum()).collect()
}

/// Discrete Dirichlet energy `Σ μ(e)(h(x) − h(y))²`.
pub fn energy(wg: &WeightedGraph, h: &[f64]) -> f64 {
    wg.edges.iter().map(|&(u, v, m)| m * (h[u] - h[v]).powi(2)).sum()
}

fn components(wg: &WeightedGraph, allowed: &[bool]) -> Vec<Option<usize>> {
    let mut comp = vec![None; wg.n];
    let mut c = 0;
    for s in 0..wg.n {
        if !allowed[s] || comp[s].is_some() {
            continue;
        }
        comp[s] = Some(c);
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &(w, _) in &wg.adj[v] {
                if allowed[w] && comp[w].is_none() {
                    comp[w] = Some(c);
                    q.push_back(w);
                }
            }
        }
        c += 1;
    }
    comp
}

/// Harmonic extension with unknowns at `None` entries. Unknown vertices whose
/// component (among unknowns) touches no fixed vertex make the system singular.
pub fn solve_harmonic(wg: &WeightedGraph, fixed: &[Option<f64>]) -> Result<Vec<f64>> {
    solve_free(wg, fixed, true)
}

fn solve_free(wg: &WeightedGraph, fixed: &[Option<f64>], strict: bool) -> Result<Vec<f64>> {
    if fixed.len() != wg.n {
        return Err(Error::InvalidInput("value vector length does not match the graph".into()));
    }
    if fixed.iter().all(|x| x.is_none()) {
        return Err(Error::SingularSystem("no boundary values".into()));
    }
    let free: Vec<bool> = fixed.iter().map(|x| x.is_none()).collect();
    let comp = components(wg, &free);
    let n_comp = comp.iter().flatten().max().map_or(0, |c| c + 1);
    let mut anchored = vec![false; n_comp];
    for v in 0..wg.n {
        if let Some(c) = comp[v] {
            if wg.adj[v].iter().any(|&(w, _)| !free[w]) {
                anchored[c] = true;
            }
        }
    }
    let mut h: Vec<f64> = fixed.iter().map(|x| x.unwrap_or(0.0)).collect();
    let mut index = vec![usize::MAX; wg.n];
    let mut unknowns = Vec::new();
    for v in 0..wg.n {
        if let Some(c) = comp[v] {
            if anchored[c] {
                index[v] = unknowns.len();
                unknowns.push(v);
            } else if strict {
                return Err(Error::SingularSystem(format!("vertex {v} is not connected to any boundary value")));
            }
        }
    }
    if unknowns.is_empty() {
        return Ok(h);
    }
    let mut t = Triplets::new(unknowns.len());
    let mut rhs = vec![0.0; unknowns.len()];
    for (i, &v) in unknowns.iter().enumerate() {
        let mut d = 0.0;
        for &(w, m) in &wg.adj[v] {
            d += m;
            if free[w] {
                t.push(i, index[w], -m);
            } else {
                rhs[i] += m * h[w];
            }
        }
        t.push(i, i, d);
    }
    let a = t.build();
    let (x, _) = pcg(&a, &rhs, 1e-15, 50 * unknowns.len() + 200);
    for (i, &v) in unknowns.iter().enumerate() {
        h[v] = x[i];
    }
    Ok(h)
}

fn check_sets(n: usize, a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("vertex sets must be nonempty".into()));
    }
    if a.iter().chain(b).any(|&v| v >= n) {
        return Err(Error::InvalidInput("vertex out of range".into()));
    }
    if a.iter().any(|v| b.contains(v)) {
        return Err(Error::InvalidInput("vertex sets must be disjoint".into()));
    }
    Ok(())
}

/// `R_eff(A, Z) = 1 / min E(g)` over `g|_A = 0`, `g|_Z = 1`; `+∞` if no path.
pub fn effective_resistance(wg: &WeightedGraph, a: &[usize], z: &[usize]) -> Result<f64> {
    check_sets(wg.n, a, z)?;
    let mut fixed = vec![None; wg.n];
    for &v in a {
        fixed[v] = Some(0.0);
    }
    for &v in z {
        fixed[v] = Some(1.0);
    }
    let g = solve_free(wg, &fixed, false)?;
    let e = energy(wg, &g);
    Ok(if e > 0.0 { 1.0 / e } else { f64::INFINITY })
}

/// Unweighted adjacency used for path families.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        Graph { n, adj }
    }
}

impl From<&WeightedGraph> for Graph {
    fn from(wg: &WeightedGraph) -> Self {
        Graph { n: wg.n, adj: wg.adj.iter().map(|a| a.iter().map(|x| x.0).collect()).collect() }
    }
}

impl From<&WhiteGraph> for Graph {
    fn from(g: &WhiteGraph) -> Self {
        let edges: Vec<(usize, usize)> = g.edges.iter().map(|&[a, b]| (a, b)).collect();
        Graph::from_edges(g.n, &edges)
    }
}

/// Whether removing `v2` leaves no path from `v1` to `v3`.
pub fn separates(graph: &Graph, v1: &[usize], v2: &[usize], v3: &[usize]) -> bool {
    let mut blocked = vec![false; graph.n];
    for &v in v2 {
        blocked[v] = true;
    }
    let mut seen = vec![false; graph.n];
    let mut q = VecDeque::new();
    for &s in v1 {
        if !blocked[s] && !seen[s] {
            seen[s] = true;
            q.push_back(s);
        }
    }
    while let Some(v) = q.pop_front() {
        for &w in &graph.adj[v] {
            if !blocked[w] && !seen[w] {
                seen[w] = true;
                q.push_back(w);
            }
        }
    }
    !v3.iter().any(|&t| !blocked[t] && seen[t])
}

#[derive(PartialEq)]
struct State(f64, usize);
impl Eq for State {}
impl Ord for State {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}
impl PartialOrd for State {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Lightest path from `v1` to `v2` where each visited vertex costs `η(v)`.
/// Ties are broken towards smaller vertex ids.
pub fn shortest_vertex_path(graph: &Graph, eta: &[f64], v1: &[usize], v2: &[usize]) -> Option<(f64, Vec<usize>)> {
    let mut dist = vec![f64::INFINITY; graph.n];
    let mut prev = vec![usize::MAX; graph.n];
    let mut heap = BinaryHeap::new();
    let mut target = vec![false; graph.n];
    for &t in v2 {
        target[t] = true;
    }
    let mut sources = v1.to_vec();
    sources.sort_unstable();
    for s in sources {
        if eta[s] < dist[s] {
            dist[s] = eta[s];
            heap.push(State(eta[s], s));
        }
    }
    while let Some(State(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if target[v] {
            let mut path = vec![v];
            let mut c = v;
            while prev[c] != usize::MAX {
                c = prev[c];
                path.push(c);
            }
            path.reverse();
            return Some((d, path));
        }
        for &w in &graph.adj[v] {
            let nd = d + eta[w];
            if nd < dist[w] {
                dist[w] = nd;
                prev[w] = v;
                heap.push(State(nd, w));
            }
        }
    }
    None
}

/// `min Σ η²` subject to `Σ_{v∈S} η(v) ≥ 1` for every listed set `S`.
/// Dual coordinate ascent (Hildreth), then an exact solve on the active set.
pub fn min_norm_cover(n: usize, sets: &[Vec<usize>]) -> Vec<f64> {
    let mut lambda = vec![0.0; sets.len()];
    let mut eta = vec![0.0; n];
    for _sweep in 0..200_000 {
        let mut change: f64 = 0.0;
        for (i, s) in sets.iter().enumerate() {
            let sum: f64 = s.iter().map(|&v| eta[v]).sum();
            let new = (lambda[i] + (1.0 - sum) / s.len() as f64).max(0.0);
            let d = new - lambda[i];
            if d != 0.0 {
                lambda[i] = new;
                for &v in s {
                    eta[v] += d;
                }
                change = change.max(d.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    // Active-set polish: solve the Gram system on constraints with λ > 0.
    let mut active: Vec<usize> = (0..sets.len()).filter(|&i| lambda[i] > 1e-13).collect();
    for _ in 0..10 {
        if active.is_empty() {
            break;
        }
        let k = active.len();
        let mut member = vec![vec![false; n]; k];
        for (a, &i) in active.iter().enumerate() {
            for &v in &sets[i] {
                member[a][v] = true;
            }
        }
        let gram = DMatrix::from_fn(k, k, |a, b| (0..n).filter(|&v| member[a][v] && member[b][v]).count() as f64);
        let ones = DVector::from_element(k, 1.0);
        let Ok(x) = gram.svd(true, true).solve(&ones, 1e-12) else {
            break;
        };
        if let Some(neg) = (0..k).find(|&a| x[a] < -1e-14) {
            active.remove(neg);
            continue;
        }
        let mut cand = vec![0.0; n];
        for (a, &i) in active.iter().enumerate() {
            for &v in &sets[i] {
                cand[v] += x[a];
            }
        }
        let feasible = sets.iter().all(|s| s.iter().map(|&v| cand[v]).sum::<f64>() >= 1.0 - 1e-12);
        let better = cand.iter().map(|x| x * x).sum::<f64>() <= eta.iter().map(|x| x * x).sum::<f64>() + 1e-12;
        if feasible && better {
            eta = cand;
        }
        break;
    }
    eta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelOptions {
    pub tol: f64,
    pub max_rounds: usize,
}

impl Default for VelOptions {
    fn default() -> Self {
        VelOptions { tol: 1e-6, max_rounds: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelResult {
    pub modulus: f64,
    pub vel: f64,
    pub eta: Vec<f64>,
    /// Length of the lightest path under the returned η (≥ 1).
    pub min_path_length: f64,
    pub constraints: usize,
}

/// Vertex modulus of the paths from `v1` to `v2` by constraint generation.
pub fn vel(graph: &Graph, v1: &[usize], v2: &[usize], opts: &VelOptions) -> Result<VelResult> {
    check_sets(graph.n, v1, v2)?;
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut eta = vec![0.0; graph.n];
    for _ in 0..opts.max_rounds {
        let (len, path) = shortest_vertex_path(graph, &eta, v1, v2).ok_or(Error::NoPath)?;
        if len >= 1.0 - opts.tol {
            break;
        }
        let mut key = path.clone();
        key.sort_unstable();
        if sets.contains(&key) {
            break;
        }
        sets.push(key);
        eta = min_norm_cover(graph.n, &sets);
    }
    let (len, _) = shortest_vertex_path(graph, &eta, v1, v2).ok_or(Error::NoPath)?;
    if len < 1.0 {
        eta.iter_mut().for_each(|x| *x /= len);
    }
    let min_path_length = shortest_vertex_path(graph, &eta, v1, v2).map(|x| x.0).unwrap_or(f64::INFINITY);
    let modulus: f64 = eta.iter().map(|x| x * x).sum();
    Ok(VelResult { modulus, vel: 1.0 / modulus, eta, min_path_length, constraints: sets.len() })
}

/// Largest graph for which separating sets are enumerated.
pub const ENUMERATION_LIMIT: usize = 15;

/// All inclusion-minimal vertex sets meeting every path from `v1` to `v2`.
pub fn minimal_separating_sets(graph: &Graph, v1: &[usize], v2: &[usize]) -> Result<Vec<Vec<usize>>> {
    if graph.n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(graph.n));
    }
    let n = graph.n;
    let blocks = |mask: u32| {
        let set: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        separates(graph, v1, &set, v2)
    };
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if !blocks(mask) {
            continue;
        }
        let minimal = (0..n).filter(|&v| mask >> v & 1 == 1).all(|v| !blocks(mask & !(1 << v)));
        if minimal {
            out.push((0..n).filter(|&v| mask >> v & 1 == 1).collect());
        }
    }
    Ok(out)
}

/// All simple paths from `v1` to `v2` that meet `v1` and `v2` only at their ends.
pub fn simple_paths(graph: &Graph, v1: &[usize], v2: &[usize]) -> Result<Vec<Vec<usize>>> {
    if graph.n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(graph.n));
    }
    let mut out = Vec::new();
    fn dfs(
        g: &Graph,
        v: usize,
        on: &mut Vec<bool>,
        path: &mut Vec<usize>,
        v1: &[usize],
        v2: &[usize],
        out: &mut Vec<Vec<usize>>,
    ) {
        if v2.contains(&v) {
            let mut p = path.clone();
            p.sort_unstable();
            out.push(p);
            return;
        }
        for &w in &g.adj[v] {
            if !on[w] && !v1.contains(&w) {
                on[w] = true;
                path.push(w);
                dfs(g, w, on, path, v1, v2, out);
                path.pop();
                on[w] = false;
            }
        }
    }
    for &s in v1 {
        let mut on = vec![false; graph.n];
        on[s] = true;
        dfs(graph, s, &mut on, &mut vec![s], v1, v2, &mut out);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub mod_paths: f64,
    pub mod_cuts: f64,
    pub product: f64,
    pub n_cuts: usize,
    /// V1 and V2 are not connected; the product is meaningless.
    pub degenerate: bool,
    pub holds: bool,
}

pub fn vel_duality_check(graph: &Graph, v1: &[usize], v2: &[usize]) -> Result<DualityReport> {
    check_sets(graph.n, v1, v2)?;
    let cuts = minimal_separating_sets(graph, v1, v2)?;
    let mod_paths = match vel(graph, v1, v2, &VelOptions { tol: 1e-10, ..Default::default() }) {
        Ok(r) => r.modulus,
        Err(Error::NoPath) => 0.0,
        Err(e) => return Err(e),
    };
    let eta = min_norm_cover(graph.n, &cuts);
    let mod_cuts: f64 = eta.iter().map(|x| x * x).sum();
    let product = mod_paths * mod_cuts;
    let degenerate = mod_paths == 0.0;
    Ok(DualityReport {
        mod_paths,
        mod_cuts,
        product,
        n_cuts: cuts.len(),
        degenerate,
        holds: !degenerate && (product - 1.0).abs() <= 1e-3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelReffBound {
    pub vel: f64,
    pub reff: f64,
    pub c4: f64,
    pub holds: bool,
}

/// `Vel(V1, V2) ≤ 2 C4 R_eff(V1, V2)` with `C4 = max_v Σ_{e∋v} μ(e)`.
pub fn vel_reff_bound(wg: &WeightedGraph, v1: &[usize], v2: &[usize]) -> Result<VelReffBound> {
    let v = vel(&Graph::from(wg), v1, v2, &VelOptions::default())?.vel;
    let reff = effective_resistance(wg, v1, v2)?;
    let c4 = wg.conductance_sums().into_iter().fold(0.0, f64::max);
    Ok(VelReffBound { vel: v, reff, c4, holds: v <= 2.0 * c4 * reff + 1e-9 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductanceSumReport {
    pub per_vertex: Vec<f64>,
    pub max: f64,
    pub finite: bool,
}

pub fn conductance_sum_report(wg: &WeightedGraph) -> ConductanceSumReport {
    let per_vertex = wg.conductance_sums();
    let max = per_vertex.iter().cloned().fold(0.0, f64::max);
    ConductanceSumReport { finite: max.is_finite(), per_vertex, max }
}

/// `R_eff(v0, outside of the disc of radius R)` for each `R`. The inside is the
/// component of `v0` among interior vertices with centers closer than `R`;
/// everything else (including all boundary vertices) is held at potential 1.
pub fn annuli_resistance_profile(wg: &WeightedGraph, centers: &[Point], v0: usize, radii: &[f64]) -> Result<Vec<f64>> {
    if centers.len() != wg.n || v0 >= wg.n {
        return Err(Error::InvalidInput("centers do not match the graph".into()));
    }
    radii
        .iter()
        .map(|&r| {
            let inside_disc: Vec<bool> =
                (0..wg.n).map(|v| !wg.boundary[v] && (centers[v] - centers[v0]).norm() < r).collect();
            let comp = components(wg, &inside_disc);
            let outside: Vec<usize> = (0..wg.n).filter(|&v| comp[v].is_none() || comp[v] != comp[v0]).collect();
            if outside.is_empty() || outside.contains(&v0) {
                return Ok(f64::NAN);
            }
            effective_resistance(wg, &[v0], &outside)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub alpha0: f64,
    pub n_overlap: f64,
    pub c1: f64,
    pub c0: f64,
    pub c2: f64,
    pub c6: f64,
}

/// `C0 = 1/sin α0`, `C2 = 1/(48 C0² N + 16 C1² π²)`, `C6 = 9/(4 C2)` for a
/// user-supplied overlap number `N` and comparability constant `C1`.
pub fn constants(alpha0: f64, n_overlap: f64, c1: f64) -> Result<Constants> {
    if !(alpha0 > 0.0 && alpha0 < PI) || !(n_overlap > 0.0) || !(c1 > 0.0) {
        return Err(Error::InvalidInput("need alpha0 in (0, pi), N > 0, C1 > 0".into()));
    }
    let c0 = 1.0 / alpha0.sin();
    let c2 = 1.0 / (48.0 * c0 * c0 * n_overlap + 16.0 * c1 * c1 * PI * PI);
    Ok(Constants { alpha0, n_overlap, c1, c0, c2, c6: 9.0 / (4.0 * c2) })
}

/// Radius `r sin α0` of the disc `I(v)` inside the kites around a circle of radius `r`.
pub fn inner_disc_radius(r: f64, alpha0: f64) -> f64 {
    r * alpha0.sin()
}
