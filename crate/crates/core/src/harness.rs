//! End-to-end experiments: convergence of discrete conformal maps under
//! refinement, the interpolation family behind rigidity, and small
//! diagnostics on finished patterns.

use crate::bquad::{generate_square_grid, lattice_patch, Labelling, LatticePatch, WhiteGraph};
use crate::dcmap::{build_map, dilatation, sup_error, DiscreteConformalMap};
use crate::error::{Error, Result};
use crate::euclid::{q_bound, solve_dirichlet, DirichletProblem, SolveOptions};
use crate::layout::{closure_residual, layout, Anchor, CirclePattern, Point};
use crate::network::{conductances_from_rho, laplacian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

/// Environment variable overriding the seed of any spec.
pub const SEED_ENV: &str = "KITEFLOW_SEED";

pub fn effective_seed(spec_seed: u64) -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(spec_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Disc { center: (f64, f64), radius: f64 },
    Square { center: (f64, f64), side: f64 },
}

impl Domain {
    pub fn unit_disc() -> Self {
        Domain::Disc { center: (0.0, 0.0), radius: 1.0 }
    }

    pub fn center(&self) -> Point {
        match *self {
            Domain::Disc { center, .. } | Domain::Square { center, .. } => Point::new(center.0, center.1),
        }
    }

    /// Half-width of the bounding box.
    fn extent(&self) -> f64 {
        match *self {
            Domain::Disc { radius, .. } => radius,
            Domain::Square { side, .. } => side / 2.0,
        }
    }

    /// Signed distance to the boundary, positive inside. For the square this is
    /// exact inside and a lower bound outside.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let d = p - self.center();
        match *self {
            Domain::Disc { radius, .. } => radius - d.norm(),
            Domain::Square { side, .. } => (side / 2.0 - d.re.abs()).min(side / 2.0 - d.im.abs()),
        }
    }

    pub fn boundary_samples(&self, m: usize) -> Vec<Point> {
        let c = self.center();
        match *self {
            Domain::Disc { radius, .. } => {
                (0..m).map(|k| c + Point::from_polar(radius, 2.0 * PI * k as f64 / m as f64)).collect()
            }
            Domain::Square { side, .. } => {
                let s = side / 2.0;
                let corners = [Point::new(-s, -s), Point::new(s, -s), Point::new(s, s), Point::new(-s, s)];
                let per = m.div_ceil(4);
                (0..4)
                    .flat_map(|k| {
                        let (a, b) = (corners[k], corners[(k + 1) % 4]);
                        (0..per).map(move |j| c + a + (b - a) * (j as f64 / per as f64))
                    })
                    .collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Disc { radius, .. } => radius > 0.0 && radius.is_finite(),
            Domain::Square { side, .. } => side > 0.0 && side.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("domain size must be positive".into()))
        }
    }
}

/// Reference conformal maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefMap {
    Identity,
    /// `z ↦ a z + b`
    Similarity {
        a: Point,
        b: Point,
    },
    /// `z ↦ (z − a)/(1 − ā z)`
    Moebius {
        a: Point,
    },
    /// `z ↦ z²`
    Square,
}

impl RefMap {
    pub fn eval(&self, z: Point) -> Point {
        match *self {
            RefMap::Identity => z,
            RefMap::Similarity { a, b } => a * z + b,
            RefMap::Moebius { a } => (z - a) / (1.0 - a.conj() * z),
            RefMap::Square => z * z,
        }
    }

    pub fn derivative(&self, z: Point) -> Point {
        match *self {
            RefMap::Identity => Point::new(1.0, 0.0),
            RefMap::Similarity { a, .. } => a,
            RefMap::Moebius { a } => (1.0 - a.norm_sqr()) / (1.0 - a.conj() * z).powi(2),
            RefMap::Square => 2.0 * z,
        }
    }

    /// Whether the map is conformal and injective on a neighborhood of `domain`.
    fn check_domain(&self, domain: &Domain) -> Result<()> {
        let bad = match *self {
            RefMap::Identity => false,
            RefMap::Similarity { a, .. } => a.norm() == 0.0,
            RefMap::Moebius { a } => {
                a.norm() >= 1.0 || (a.norm() > 0.0 && domain.boundary_distance(1.0 / a.conj()) >= 0.0)
            }
            RefMap::Square => {
                let c = domain.center();
                domain.boundary_distance(Point::new(0.0, 0.0)) >= 0.0 || domain.extent() >= c.norm()
            }
        };
        if bad {
            Err(Error::InvalidInput(format!("map {self} is not conformal and injective on the domain")))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for RefMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefMap::Identity => write!(f, "identity"),
            RefMap::Similarity { a, b } => {
                write!(f, "similarity:{},{},{},{}", a.re, a.im, b.re, b.im)
            }
            RefMap::Moebius { a } if a.im == 0.0 => write!(f, "moebius:{}", a.re),
            RefMap::Moebius { a } => write!(f, "moebius:{},{}", a.re, a.im),
            RefMap::Square => write!(f, "square"),
        }
    }
}

impl FromStr for RefMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {x:?} in map {s:?}"))))
                .collect::<Result<_>>()?
        };
        let bad = || Error::Parse(format!("bad map {s:?}"));
        match (name, nums.as_slice()) {
            ("identity", []) => Ok(RefMap::Identity),
            ("square", []) => Ok(RefMap::Square),
            ("moebius", [a]) => Ok(RefMap::Moebius { a: Point::new(*a, 0.0) }),
            ("moebius", [a, b]) => Ok(RefMap::Moebius { a: Point::new(*a, *b) }),
            ("similarity", [ar, ai, br, bi]) => {
                Ok(RefMap::Similarity { a: Point::new(*ar, *ai), b: Point::new(*br, *bi) })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for RefMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RefMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Square-lattice patch with mesh `h` made of the cells lying inside a domain.
#[derive(Debug, Clone)]
pub struct DomainPatch {
    pub patch: LatticePatch,
    pub h: f64,
    /// Physical position of each white vertex.
    pub white_pos: Vec<Point>,
}

fn cell_corners(x: i64, y: i64) -> [(i64, i64); 4] {
    [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]
}

/// Cells of mesh `1/n` with all corners strictly inside the domain. Cells
/// meeting only at a corner are thinned out and the largest edge-connected
/// component is kept.
pub fn domain_patch(domain: &Domain, n: usize) -> Result<DomainPatch> {
    domain.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("level must be positive".into()));
    }
    let h = 1.0 / n as f64;
    let c = domain.center();
    let e = domain.extent();
    let pos = |x: i64, y: i64| Point::new(x as f64 * h, y as f64 * h);
    let (x0, x1) = (((c.re - e) / h).floor() as i64 - 1, ((c.re + e) / h).ceil() as i64 + 1);
    let (y0, y1) = (((c.im - e) / h).floor() as i64 - 1, ((c.im + e) / h).ceil() as i64 + 1);
    let mut cells: BTreeSet<(i64, i64)> = BTreeSet::new();
    for y in y0..y1 {
        for x in x0..x1 {
            if cell_corners(x, y).iter().all(|&(a, b)| domain.boundary_distance(pos(a, b)) > 1e-12) {
                cells.insert((y, x));
            }
        }
    }
    let dist = |&(y, x): &(i64, i64)| (pos(x, y) + Point::new(h / 2.0, h / 2.0) - c).norm();
    loop {
        let mut pinched = None;
        'scan: for &(y, x) in &cells {
            for (dx, dy) in [(1, 1), (-1, 1)] {
                let other = (y + dy, x + dx);
                let side_a = (y, x + dx);
                let side_b = (y + dy, x);
                if cells.contains(&other) && !cells.contains(&side_a) && !cells.contains(&side_b) {
                    let a = (y, x);
                    let drop =
                        if dist(&other) > dist(&a) || (dist(&other) == dist(&a) && other > a) { other } else { a };
                    pinched = Some(drop);
                    break 'scan;
                }
            }
        }
        match pinched {
            Some(cell) => {
                cells.remove(&cell);
            }
            None => break,
        }
    }
    let mut best: Vec<(i64, i64)> = Vec::new();
    let mut seen: BTreeSet<(i64, i64)> = BTreeSet::new();
    for &start in &cells {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = vec![start];
        seen.insert(start);
        let mut q = VecDeque::from([start]);
        while let Some((y, x)) = q.pop_front() {
            for nb in [(y + 1, x), (y - 1, x), (y, x + 1), (y, x - 1)] {
                if cells.contains(&nb) && seen.insert(nb) {
                    comp.push(nb);
                    q.push_back(nb);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    if best.is_empty() {
        return Err(Error::InvalidInput(format!("no lattice cell of mesh 1/{n} fits inside the domain")));
    }
    let cells: Vec<(i64, i64)> = best.into_iter().map(|(y, x)| (x, y)).collect();
    let patch = lattice_patch(&cells)?;
    let white_pos = patch.white_coords.iter().map(|&(x, y)| pos(x, y)).collect();
    Ok(DomainPatch { patch, h, white_pos })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub domain: Domain,
    pub map: RefMap,
    pub levels: Vec<usize>,
    /// The compact set is `{z : d(z, ∂D) ≥ margin}`.
    pub margin: f64,
    pub q_max: f64,
    /// Spacing of the sample grid on the compact set.
    pub sample_step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            domain: Domain::unit_disc(),
            map: RefMap::Moebius { a: Point::new(0.3, 0.0) },
            levels: vec![8, 16, 32],
            margin: 0.2,
            q_max: 2.0,
            sample_step: 0.02,
            tol: 1e-11,
            seed: 0,
        }
    }
}

impl ConvergenceSpec {
    fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.map.check_domain(&self.domain)?;
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[0] >= w[1]) || self.levels[0] == 0 {
            return Err(Error::InvalidInput("levels must be positive and strictly increasing".into()));
        }
        if !(self.margin > 0.0 && self.margin < self.domain.extent()) {
            return Err(Error::InvalidInput("margin must lie strictly inside the domain".into()));
        }
        if !(self.sample_step > 0.0) || !(self.q_max >= 1.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidInput("sample_step, q_max and tol must be positive (q_max ≥ 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    /// Every source radius is at most `δ_n/2`.
    pub radius_bound: bool,
    /// Largest distance from a point of `∂D` to the kite corners.
    pub boundary_gap: f64,
    pub boundary_gap_ok: bool,
    pub convex: bool,
    pub q_ok: bool,
    pub embedded: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.radius_bound && self.boundary_gap_ok && self.convex && self.q_ok && self.embedded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropernessRow {
    pub margin: f64,
    pub n_points: usize,
    /// Smallest distance from `∂D` among preimages of the shrunk target compact.
    pub min_preimage_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub n: usize,
    pub h: f64,
    pub n_white: usize,
    pub n_quads: usize,
    pub anchor: usize,
    pub delta: f64,
    pub delta_tilde: f64,
    pub q: f64,
    pub max_dilatation: f64,
    pub max_dilatation_compact: f64,
    pub sup_error: f64,
    pub n_samples: usize,
    pub solver_iterations: usize,
    pub solver_residual: f64,
    pub closure_relative: f64,
    pub u_min_compact: f64,
    pub u_max_compact: f64,
    pub hypotheses: Hypotheses,
    pub properness: PropernessRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub spec: ConvergenceSpec,
    pub rows: Vec<LevelRow>,
    pub sup_error_decreasing: bool,
    pub delta_tilde_decreasing: bool,
    pub hypotheses_ok: bool,
}

#[derive(Debug, Clone)]
pub struct LevelPatterns {
    pub n: usize,
    pub source: CirclePattern,
    pub target: CirclePattern,
}

fn grid_samples(domain: &Domain, margin: f64, step: f64) -> Vec<Point> {
    let c = domain.center();
    let k = (domain.extent() / step).ceil() as i64;
    let mut out = Vec::new();
    for j in -k..=k {
        for i in -k..=k {
            let z = c + Point::new(i as f64 * step, j as f64 * step);
            if domain.boundary_distance(z) >= margin {
                out.push(z);
            }
        }
    }
    out
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

pub fn run_convergence(spec: &ConvergenceSpec) -> Result<ConvergenceReport> {
    run_convergence_with_patterns(spec).map(|x| x.0)
}

/// Runs all levels (in parallel) and also returns the laid-out patterns.
pub fn run_convergence_with_patterns(spec: &ConvergenceSpec) -> Result<(ConvergenceReport, Vec<LevelPatterns>)> {
    spec.validate()?;
    let samples = grid_samples(&spec.domain, spec.margin, spec.sample_step);
    let results: Vec<Result<(LevelRow, LevelPatterns)>> = spec
        .levels
        .par_iter()
        .map(|&n| run_level(spec, n, &samples).map_err(|e| Error::AtLevel { level: n, source: Box::new(e) }))
        .collect();
    let mut rows = Vec::new();
    let mut patterns = Vec::new();
    for r in results {
        let (row, pats) = r?;
        rows.push(row);
        patterns.push(pats);
    }
    let errs: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
    let dts: Vec<f64> = rows.iter().map(|r| r.delta_tilde).collect();
    let report = ConvergenceReport {
        spec: spec.clone(),
        sup_error_decreasing: strictly_decreasing(&errs),
        delta_tilde_decreasing: strictly_decreasing(&dts),
        hypotheses_ok: rows.iter().all(|r| r.hypotheses.all()),
        rows,
    };
    Ok((report, patterns))
}

fn nearest_vertex(pos: &[Point], z: Point) -> usize {
    let mut best = 0;
    for (v, p) in pos.iter().enumerate() {
        if (p - z).norm() < (pos[best] - z).norm() {
            best = v;
        }
    }
    best
}

fn run_level(spec: &ConvergenceSpec, n: usize, samples: &[Point]) -> Result<(LevelRow, LevelPatterns)> {
    let dp = domain_patch(&spec.domain, n)?;
    let graph = dp.patch.graph.white_graph();
    let alpha = Labelling::constant(dp.patch.graph.n_quads(), FRAC_PI_2);
    let g = spec.map;
    let r = vec![dp.h; graph.n];

    let root = nearest_vertex(&dp.white_pos, spec.domain.center());
    let first = graph.fans[root][0].neighbor;
    let direction = (dp.white_pos[first] - dp.white_pos[root]).arg();
    let source = layout(&graph, &alpha, &r, Anchor { root, position: dp.white_pos[root], direction })?;

    let boundary: Vec<Option<f64>> =
        (0..graph.n).map(|v| graph.boundary[v].then(|| g.derivative(dp.white_pos[v]).norm() * dp.h)).collect();
    let problem = DirichletProblem::new(&graph, &alpha, boundary)?;
    let (rho, stats) = solve_dirichlet(&problem, &SolveOptions { tol: spec.tol, ..Default::default() })?;
    let r_tilde = rho.radii();
    let p0 = dp.white_pos[root];
    let target_anchor = Anchor { root, position: g.eval(p0), direction: direction + g.derivative(p0).arg() };
    let target = layout(&graph, &alpha, &r_tilde, target_anchor)?;

    let src_k = source.kite_pattern();
    let tgt_k = target.kite_pattern();
    let map = build_map(&src_k, &tgt_k)?;
    let dil = dilatation(&map)?;
    let inside = |z: Point| spec.domain.boundary_distance(z) >= spec.margin;
    let max_dilatation_compact = (0..map.n_triangles())
        .filter(|&t| src_k.triangles(t / 2)[t % 2].iter().all(|&z| inside(z)))
        .map(|t| dil.per_triangle[t])
        .fold(1.0, f64::max);
    let err = sup_error(&map, &|z| g.eval(z), samples)?;

    let delta = 2.0 * r.iter().cloned().fold(0.0, f64::max);
    let delta_tilde = 2.0 * r_tilde.iter().cloned().fold(0.0, f64::max);
    let q = q_bound(&graph, &alpha, &r_tilde)?.q;
    let corners: Vec<Point> = src_k.center.iter().chain(&src_k.black).copied().collect();
    let boundary_gap = spec
        .domain
        .boundary_samples(1024)
        .iter()
        .map(|&p| corners.iter().map(|&c| (c - p).norm()).fold(f64::MAX, f64::min))
        .fold(0.0, f64::max);
    let convex = (0..src_k.n_kites()).all(|k| src_k.is_convex(k, 1e-12) && tgt_k.is_convex(k, 1e-12));
    let hypotheses = Hypotheses {
        radius_bound: r.iter().all(|&x| x <= delta / 2.0),
        boundary_gap,
        boundary_gap_ok: boundary_gap < delta,
        convex,
        q_ok: q <= spec.q_max,
        embedded: true,
    };
    let properness = properness_probe(&map, &spec.domain, &g, spec.margin, spec.sample_step)?;
    let u: Vec<f64> = (0..graph.n).filter(|&v| inside(dp.white_pos[v])).map(|v| r_tilde[v] / r[v]).collect();
    let closure = closure_residual(&target, &graph);

    let row = LevelRow {
        n,
        h: dp.h,
        n_white: graph.n,
        n_quads: dp.patch.graph.n_quads(),
        anchor: root,
        delta,
        delta_tilde,
        q,
        max_dilatation: dil.max,
        max_dilatation_compact,
        sup_error: err,
        n_samples: samples.len(),
        solver_iterations: stats.iterations,
        solver_residual: stats.residual,
        closure_relative: closure.relative,
        u_min_compact: u.iter().cloned().fold(f64::INFINITY, f64::min),
        u_max_compact: u.iter().cloned().fold(0.0, f64::max),
        hypotheses,
        properness,
    };
    Ok((row, LevelPatterns { n, source, target }))
}

/// Pulls back the target compact `{w ∈ g(D) : d(w, g(∂D)) ≥ margin}` and
/// measures how far the preimages stay from `∂D`.
pub fn properness_probe(
    map: &DiscreteConformalMap,
    domain: &Domain,
    g: &RefMap,
    margin: f64,
    step: f64,
) -> Result<PropernessRow> {
    let inverse = map.inverse()?;
    let curve: Vec<Point> = domain.boundary_samples(2048).into_iter().map(|z| g.eval(z)).collect();
    let (lo, hi) = map.target.bbox().ok_or(Error::InvalidInput("empty target".into()))?;
    let nx = ((hi.re - lo.re) / step).ceil() as i64;
    let ny = ((hi.im - lo.im) / step).ceil() as i64;
    let mut n_points = 0;
    let mut min_margin = f64::INFINITY;
    for j in 0..=ny {
        for i in 0..=nx {
            let w = lo + Point::new(i as f64 * step, j as f64 * step);
            if curve.iter().any(|&c| (c - w).norm() < margin) {
                continue;
            }
            if let Ok(z) = inverse.eval(w) {
                n_points += 1;
                min_margin = min_margin.min(domain.boundary_distance(z));
            }
        }
    }
    Ok(PropernessRow { margin, n_points, min_preimage_margin: min_margin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigiditySpec {
    pub sizes: Vec<usize>,
    pub amplitude: f64,
    pub t_grid: Vec<f64>,
    pub step: f64,
    pub tol: f64,
    /// Radius, in lattice units around the grid center, of the core on which
    /// the spread of `h` is tracked.
    pub core_radius: f64,
    /// Independent boundary perturbations per size; spreads are averaged.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for RigiditySpec {
    fn default() -> Self {
        RigiditySpec {
            sizes: vec![8, 16, 24],
            amplitude: 0.1,
            t_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            step: 1e-4,
            tol: 1e-13,
            core_radius: 3.0,
            replicates: 8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityTRow {
    pub t: f64,
    pub max_abs_laplacian: f64,
    pub max_abs_h: f64,
    /// Means over replicates.
    pub var_h: f64,
    pub var_h_core: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityRow {
    pub size: usize,
    pub n_interior: usize,
    pub max_abs_lambda: f64,
    pub max_abs_laplacian: f64,
    pub max_abs_h: f64,
    pub n_core: usize,
    /// Mean over the t-grid and replicates of the variance of `h` on all interior vertices.
    pub var_h: f64,
    /// Same on the interior vertices of the central core.
    pub var_h_core: f64,
    pub harmonic_ok: bool,
    pub bound_ok: bool,
    pub per_t: Vec<RigidityTRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub spec: RigiditySpec,
    pub rows: Vec<RigidityRow>,
    pub harmonic_ok: bool,
    pub bound_ok: bool,
    pub var_decreasing: bool,
}

pub const HARMONICITY_TOL: f64 = 1e-5;

pub fn run_rigidity(spec: &RigiditySpec) -> Result<RigidityReport> {
    if spec.sizes.is_empty() || spec.sizes.iter().any(|&s| s < 2) {
        return Err(Error::InvalidInput("sizes must be at least 2".into()));
    }
    if !(spec.amplitude >= 0.0)
        || spec.t_grid.iter().any(|t| !(0.0..=1.0).contains(t))
        || !(spec.step > 0.0)
        || !(spec.core_radius > 0.0)
    {
        return Err(Error::InvalidInput("need amplitude ≥ 0, t in [0, 1], step > 0, core_radius > 0".into()));
    }
    let results: Vec<Result<RigidityRow>> = spec
        .sizes
        .par_iter()
        .map(|&n| rigidity_size(spec, n).map_err(|e| Error::AtLevel { level: n, source: Box::new(e) }))
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let vars: Vec<f64> = rows.iter().map(|r| r.var_h_core).collect();
    Ok(RigidityReport {
        spec: spec.clone(),
        harmonic_ok: rows.iter().all(|r| r.harmonic_ok),
        bound_ok: rows.iter().all(|r| r.bound_ok),
        var_decreasing: strictly_decreasing(&vars),
        rows,
    })
}

fn solve_rho(graph: &WhiteGraph, alpha: &Labelling, boundary_rho: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    let boundary = (0..graph.n).map(|v| graph.boundary[v].then(|| (t * boundary_rho[v]).exp())).collect();
    let problem = DirichletProblem::new(graph, alpha, boundary)?;
    Ok(solve_dirichlet(&problem, &SolveOptions { tol, ..Default::default() })?.0.rho)
}

fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

fn rigidity_size(spec: &RigiditySpec, n: usize) -> Result<RigidityRow> {
    let (d, alpha) = generate_square_grid(n, n, FRAC_PI_2)?;
    let graph = d.white_graph();
    let mid = n as f64 / 2.0;
    let core: Vec<usize> = graph
        .interior_vertices
        .iter()
        .copied()
        .filter(|&v| {
            let g = d.white_ids()[v];
            let (x, y) = ((g % (n + 1)) as f64, (g / (n + 1)) as f64);
            (x - mid).hypot(y - mid) <= spec.core_radius
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(n as u64));
    let reps = spec.replicates.max(1);
    let mut per_t: Vec<RigidityTRow> = spec
        .t_grid
        .iter()
        .map(|&t| RigidityTRow { t, max_abs_laplacian: 0.0, max_abs_h: 0.0, var_h: 0.0, var_h_core: 0.0 })
        .collect();
    let mut max_abs_lambda: f64 = 0.0;
    let mut bound_ok = true;
    for _ in 0..reps {
        // r ≡ 1, so λ = log r̃ and the family has boundary values e^{λ t}.
        let mut lambda = vec![0.0; graph.n];
        for v in 0..graph.n {
            if graph.boundary[v] {
                lambda[v] = spec.amplitude * rng.random_range(-1.0..=1.0);
            }
        }
        let solved = solve_rho(&graph, &alpha, &lambda, 1.0, spec.tol)?;
        let lam_max = solved.iter().map(|x| x.abs()).fold(0.0, f64::max);
        max_abs_lambda = max_abs_lambda.max(lam_max);
        for row in per_t.iter_mut() {
            let t = row.t;
            let rho_t = solve_rho(&graph, &alpha, &lambda, t, spec.tol)?;
            let plus = solve_rho(&graph, &alpha, &lambda, t + spec.step, spec.tol)?;
            let minus = solve_rho(&graph, &alpha, &lambda, t - spec.step, spec.tol)?;
            let h: Vec<f64> = (0..graph.n)
                .map(|v| if graph.boundary[v] { lambda[v] } else { (plus[v] - minus[v]) / (2.0 * spec.step) })
                .collect();
            let wg = conductances_from_rho(&graph, &alpha, &rho_t)?;
            let lap = laplacian(&wg, &h);
            let interior_h: Vec<f64> = graph.interior_vertices.iter().map(|&v| h[v]).collect();
            let core_h: Vec<f64> = core.iter().map(|&v| h[v]).collect();
            let h_max = h.iter().map(|x| x.abs()).fold(0.0, f64::max);
            bound_ok &= h_max <= lam_max + 1e-6;
            row.max_abs_laplacian =
                graph.interior_vertices.iter().map(|&v| lap[v].abs()).fold(row.max_abs_laplacian, f64::max);
            row.max_abs_h = row.max_abs_h.max(h_max);
            row.var_h += variance(&interior_h) / reps as f64;
            row.var_h_core += variance(&core_h) / reps as f64;
        }
    }
    let max_abs_laplacian = per_t.iter().map(|r| r.max_abs_laplacian).fold(0.0, f64::max);
    let max_abs_h = per_t.iter().map(|r| r.max_abs_h).fold(0.0, f64::max);
    let mean = |f: fn(&RigidityTRow) -> f64| {
        if per_t.is_empty() {
            0.0
        } else {
            per_t.iter().map(f).sum::<f64>() / per_t.len() as f64
        }
    };
    let var_h = mean(|r| r.var_h);
    let var_h_core = mean(|r| r.var_h_core);
    Ok(RigidityRow {
        size: n,
        n_interior: graph.interior_vertices.len(),
        max_abs_lambda,
        max_abs_laplacian,
        max_abs_h,
        n_core: core.len(),
        var_h,
        var_h_core,
        harmonic_ok: max_abs_laplacian <= HARMONICITY_TOL,
        bound_ok,
        per_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    /// `r(v)/d(origin, B(v))`; `+∞` (serialized as null) when the origin lies in the closed disc.
    pub tau: Vec<f64>,
    /// Largest value over the boundary vertices.
    pub max_outer: f64,
}

pub fn tau_diagnostic(pattern: &CirclePattern, boundary: &[bool], origin: Point) -> Result<TauReport> {
    if boundary.len() != pattern.center.len() {
        return Err(Error::InvalidInput("boundary flags do not match the pattern".into()));
    }
    let tau: Vec<f64> = pattern
        .center
        .iter()
        .zip(&pattern.radius)
        .map(|(&c, &r)| {
            let d = (c - origin).norm() - r;
            if d > 0.0 {
                r / d
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let max_outer = tau.iter().zip(boundary).filter(|x| *x.1).map(|x| *x.0).fold(0.0, f64::max);
    Ok(TauReport { tau, max_outer })
}
