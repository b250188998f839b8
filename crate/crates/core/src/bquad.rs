//! B-quad-graphs: bipartite quadrilateral cell complexes, their white graphs,
//! intersection-angle labellings and square-grid generators.
//!
//! Vertex ids in files and in `build_bquad` are global and dense. Internally
//! white and black vertices are numbered separately by ascending global id;
//! every per-vertex array in the crate (radii, conductances, centers) is
//! indexed by these local white (or black) indices.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;

/// Tolerance on the angle sum at an interior black vertex.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Color {
    White,
    Black,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BQuadGraph {
    white_ids: Vec<usize>,
    black_ids: Vec<usize>,
    /// `[w0, b0, w1, b1]` in local indices, counterclockwise.
    quads: Vec<[usize; 4]>,
    white_boundary: Vec<bool>,
    black_boundary: Vec<bool>,
    quad_boundary: Vec<bool>,
    /// Incident quads around each vertex in counterclockwise order. For
    /// boundary vertices the fan starts at a boundary edge.
    white_fans: Vec<Vec<usize>>,
    black_fans: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labelling {
    pub alpha: Vec<f64>,
}

impl Labelling {
    pub fn constant(n_quads: usize, alpha: f64) -> Self {
        Labelling { alpha: vec![alpha; n_quads] }
    }

    pub fn validate(&self) -> Result<()> {
        for (q, &a) in self.alpha.iter().enumerate() {
            if !(a > 0.0 && a < PI) {
                return Err(Error::AngleOutOfRange { quad: q, alpha: a });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// `(global black id, angle sum)` for each interior black vertex whose
    /// angles do not add up to 2π.
    pub violations: Vec<(usize, f64)>,
}

/// One step of the counterclockwise fan around a white vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FanEntry {
    /// Edge of G, which is also the quad id.
    pub edge: usize,
    pub neighbor: usize,
    /// Black corner following the white vertex in the quad (clockwise side of the edge).
    pub succ: usize,
    /// Black corner preceding it (counterclockwise side).
    pub pred: usize,
}

/// The graph G of circle centers. Edge `e` corresponds to quad `quad_of_edge[e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteGraph {
    pub n: usize,
    pub n_black: usize,
    pub edges: Vec<[usize; 2]>,
    /// Black corners `[b0, b1]` of the quad behind each edge.
    pub edge_blacks: Vec<[usize; 2]>,
    pub quad_of_edge: Vec<usize>,
    pub edge_of_quad: Vec<usize>,
    pub boundary: Vec<bool>,
    pub interior_vertices: Vec<usize>,
    pub boundary_vertices: Vec<usize>,
    pub fans: Vec<Vec<FanEntry>>,
}

impl WhiteGraph {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_interior(&self, v: usize) -> bool {
        !self.boundary[v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.fans[v].iter().map(|f| (f.edge, f.neighbor))
    }

    /// Position of every vertex in the list of interior vertices.
    pub fn interior_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.n];
        for (k, &v) in self.interior_vertices.iter().enumerate() {
            idx[v] = Some(k);
        }
        idx
    }
}

fn color_of_position(k: usize) -> Color {
    if k.is_multiple_of(2) {
        Color::White
    } else {
        Color::Black
    }
}

/// Orders the quads around one vertex. `corner` lists `(quad, succ, pred)` with
/// succ/pred as global ids. Returns the fan and whether it closes up.
fn order_fan(v: usize, corners: &[(usize, usize, usize)]) -> Result<(Vec<usize>, bool)> {
    let by_succ: HashMap<usize, usize> = corners.iter().enumerate().map(|(k, c)| (c.1, k)).collect();
    let preds: HashMap<usize, usize> = corners.iter().enumerate().map(|(k, c)| (c.2, k)).collect();
    // Quads whose clockwise edge is not shared with another quad at v.
    let starts: Vec<usize> = (0..corners.len()).filter(|&k| !preds.contains_key(&corners[k].1)).collect();
    let (start, closed) = match starts.len() {
        0 => ((0..corners.len()).min_by_key(|&k| corners[k].0).unwrap(), true),
        1 => (starts[0], false),
        _ => {
            return Err(Error::NotStronglyRegular(format!(
                "vertex {v} is a pinch point ({} separate fans)",
                starts.len()
            )))
        }
    };
    let mut fan = vec![corners[start].0];
    let mut cur = start;
    while let Some(&next) = by_succ.get(&corners[cur].2) {
        if next == start {
            break;
        }
        fan.push(corners[next].0);
        cur = next;
        if fan.len() > corners.len() {
            break;
        }
    }
    if fan.len() != corners.len() {
        return Err(Error::NotStronglyRegular(format!("vertex {v} has a disconnected link")));
    }
    Ok((fan, closed))
}

/// Validates corner tuples `(w, b, w, b)` (global ids, counterclockwise).
pub fn build_bquad(quads: &[[usize; 4]]) -> Result<BQuadGraph> {
    if quads.is_empty() {
        return Err(Error::InvalidInput("no quads".into()));
    }
    let n = quads.iter().flat_map(|q| q.iter()).max().unwrap() + 1;
    let mut color: Vec<Option<Color>> = vec![None; n];
    for (qi, q) in quads.iter().enumerate() {
        if q[0] == q[2] || q[1] == q[3] {
            return Err(Error::NotStronglyRegular(format!("quad {qi} has a repeated corner")));
        }
        for (k, &v) in q.iter().enumerate() {
            let c = color_of_position(k);
            match color[v] {
                Some(old) if old != c => {
                    return Err(Error::NonBipartite(format!("vertex {v} is used as both white and black (quad {qi})")))
                }
                _ => color[v] = Some(c),
            }
        }
    }
    if let Some(v) = color.iter().position(|c| c.is_none()) {
        return Err(Error::DanglingEdge(format!("vertex {v} belongs to no quad")));
    }

    // Undirected edge -> list of (quad, traversed forward from smaller id).
    let mut edge_use: BTreeMap<(usize, usize), Vec<(usize, bool)>> = BTreeMap::new();
    for (qi, q) in quads.iter().enumerate() {
        for k in 0..4 {
            let (a, b) = (q[k], q[(k + 1) % 4]);
            edge_use.entry((a.min(b), a.max(b))).or_default().push((qi, a < b));
        }
    }
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    for (&(a, b), uses) in &edge_use {
        match uses.as_slice() {
            [_] => {}
            [(q1, d1), (q2, d2)] => {
                if d1 == d2 {
                    return Err(Error::OrientationMismatch(format!(
                        "quads {q1} and {q2} traverse edge ({a}, {b}) in the same direction"
                    )));
                }
                let key = ((*q1).min(*q2), (*q1).max(*q2));
                let c = shared.entry(key).or_default();
                *c += 1;
                if *c > 1 {
                    return Err(Error::NotStronglyRegular(format!(
                        "quads {} and {} share more than one edge",
                        key.0, key.1
                    )));
                }
            }
            _ => return Err(Error::NotStronglyRegular(format!("edge ({a}, {b}) belongs to {} quads", uses.len()))),
        }
    }
    let mut diagonals: HashMap<(usize, usize), usize> = HashMap::new();
    for (qi, q) in quads.iter().enumerate() {
        let key = (q[0].min(q[2]), q[0].max(q[2]));
        if let Some(other) = diagonals.insert(key, qi) {
            return Err(Error::NotStronglyRegular(format!(
                "quads {other} and {qi} join the same white vertices {} and {}",
                key.0, key.1
            )));
        }
    }

    let white_ids: Vec<usize> = (0..n).filter(|&v| color[v] == Some(Color::White)).collect();
    let black_ids: Vec<usize> = (0..n).filter(|&v| color[v] == Some(Color::Black)).collect();
    let mut local = vec![0usize; n];
    for (k, &v) in white_ids.iter().enumerate() {
        local[v] = k;
    }
    for (k, &v) in black_ids.iter().enumerate() {
        local[v] = k;
    }

    let mut corners: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
    for (qi, q) in quads.iter().enumerate() {
        for k in 0..4 {
            corners[q[k]].push((qi, q[(k + 1) % 4], q[(k + 3) % 4]));
        }
    }
    let mut fans = Vec::with_capacity(n);
    let mut closed = Vec::with_capacity(n);
    for (v, c) in corners.iter().enumerate() {
        let (f, cl) = order_fan(v, c)?;
        fans.push(f);
        closed.push(cl);
    }
    let quad_boundary = quads
        .iter()
        .map(|q| {
            (0..4).any(|k| {
                let (a, b) = (q[k], q[(k + 1) % 4]);
                edge_use[&(a.min(b), a.max(b))].len() == 1
            })
        })
        .collect();
    let pick = |ids: &[usize]| -> (Vec<bool>, Vec<Vec<usize>>) {
        (ids.iter().map(|&v| !closed[v]).collect(), ids.iter().map(|&v| fans[v].clone()).collect())
    };
    let (white_boundary, white_fans) = pick(&white_ids);
    let (black_boundary, black_fans) = pick(&black_ids);
    let quads = quads.iter().map(|q| [local[q[0]], local[q[1]], local[q[2]], local[q[3]]]).collect();
    Ok(BQuadGraph {
        white_ids,
        black_ids,
        quads,
        white_boundary,
        black_boundary,
        quad_boundary,
        white_fans,
        black_fans,
    })
}

impl BQuadGraph {
    pub fn n_white(&self) -> usize {
        self.white_ids.len()
    }

    pub fn n_black(&self) -> usize {
        self.black_ids.len()
    }

    pub fn n_quads(&self) -> usize {
        self.quads.len()
    }

    /// Local corners `[w0, b0, w1, b1]`.
    pub fn quads(&self) -> &[[usize; 4]] {
        &self.quads
    }

    pub fn white_ids(&self) -> &[usize] {
        &self.white_ids
    }

    pub fn black_ids(&self) -> &[usize] {
        &self.black_ids
    }

    /// Corner tuples with global ids.
    pub fn global_quads(&self) -> Vec<[usize; 4]> {
        self.quads
            .iter()
            .map(|q| [self.white_ids[q[0]], self.black_ids[q[1]], self.white_ids[q[2]], self.black_ids[q[3]]])
            .collect()
    }

    pub fn white_boundary(&self) -> &[bool] {
        &self.white_boundary
    }

    pub fn black_boundary(&self) -> &[bool] {
        &self.black_boundary
    }

    pub fn quad_boundary(&self) -> &[bool] {
        &self.quad_boundary
    }

    pub fn black_fan(&self, b: usize) -> &[usize] {
        &self.black_fans[b]
    }

    pub fn white_graph(&self) -> WhiteGraph {
        derive_white_graph(self)
    }
}

pub fn derive_white_graph(d: &BQuadGraph) -> WhiteGraph {
    let n = d.n_white();
    let edges: Vec<[usize; 2]> = d.quads.iter().map(|q| [q[0], q[2]]).collect();
    let edge_blacks = d.quads.iter().map(|q| [q[1], q[3]]).collect();
    let fans = (0..n)
        .map(|w| {
            d.white_fans[w]
                .iter()
                .map(|&qi| {
                    let q = d.quads[qi];
                    if q[0] == w {
                        FanEntry { edge: qi, neighbor: q[2], succ: q[1], pred: q[3] }
                    } else {
                        FanEntry { edge: qi, neighbor: q[0], succ: q[3], pred: q[1] }
                    }
                })
                .collect()
        })
        .collect();
    let ids: Vec<usize> = (0..d.n_quads()).collect();
    WhiteGraph {
        n,
        n_black: d.n_black(),
        edges,
        edge_blacks,
        quad_of_edge: ids.clone(),
        edge_of_quad: ids,
        boundary: d.white_boundary.clone(),
        interior_vertices: (0..n).filter(|&v| !d.white_boundary[v]).collect(),
        boundary_vertices: (0..n).filter(|&v| d.white_boundary[v]).collect(),
        fans,
    }
}

pub fn check_admissible(d: &BQuadGraph, alpha: &Labelling) -> Result<AdmissibilityReport> {
    if alpha.alpha.len() != d.n_quads() {
        return Err(Error::InvalidInput(format!(
            "labelling has {} angles for {} quads",
            alpha.alpha.len(),
            d.n_quads()
        )));
    }
    alpha.validate()?;
    let mut violations = Vec::new();
    for b in 0..d.n_black() {
        if d.black_boundary[b] {
            continue;
        }
        let sum: f64 = d.black_fans[b].iter().map(|&q| alpha.alpha[q]).sum();
        if (sum - 2.0 * PI).abs() > ADMISSIBILITY_TOL {
            violations.push((d.black_ids[b], sum));
        }
    }
    Ok(AdmissibilityReport { admissible: violations.is_empty(), violations })
}

/// Square-lattice patch built from unit cells `(x, y)` (lower-left corners).
/// Lattice point `(x, y)` is white iff `x + y` is even. Global ids number the
/// used lattice points row by row (ascending `y`, then `x`).
#[derive(Debug, Clone)]
pub struct LatticePatch {
    pub graph: BQuadGraph,
    /// Lattice coordinates of each white vertex (local index).
    pub white_coords: Vec<(i64, i64)>,
    pub black_coords: Vec<(i64, i64)>,
}

pub fn lattice_patch(cells: &[(i64, i64)]) -> Result<LatticePatch> {
    let mut points: Vec<(i64, i64)> =
        cells.iter().flat_map(|&(x, y)| [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]).collect();
    points.sort_by_key(|&(x, y)| (y, x));
    points.dedup();
    let id: HashMap<(i64, i64), usize> = points.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let mut cells = cells.to_vec();
    cells.sort_by_key(|&(x, y)| (y, x));
    cells.dedup();
    let quads: Vec<[usize; 4]> = cells
        .iter()
        .map(|&(x, y)| {
            let ring = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
            let s = if (x + y).rem_euclid(2) == 0 { 0 } else { 1 };
            [0, 1, 2, 3].map(|k| id[&ring[(s + k) % 4]])
        })
        .collect();
    let graph = build_bquad(&quads)?;
    let white_coords = graph.white_ids.iter().map(|&g| points[g]).collect();
    let black_coords = graph.black_ids.iter().map(|&g| points[g]).collect();
    Ok(LatticePatch { graph, white_coords, black_coords })
}

/// `n` rows by `m` columns of unit squares; lattice point `(row i, column j)`
/// gets id `i (m + 1) + j`.
pub fn generate_square_grid(n: usize, m: usize, alpha0: f64) -> Result<(BQuadGraph, Labelling)> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("grid dimensions must be at least 1".into()));
    }
    let cells: Vec<(i64, i64)> = (0..n as i64).flat_map(|y| (0..m as i64).map(move |x| (x, y))).collect();
    let p = lattice_patch(&cells)?;
    let l = Labelling::constant(p.graph.n_quads(), alpha0);
    l.validate()?;
    Ok((p.graph, l))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    white: Vec<usize>,
    black: Vec<usize>,
    quads: Vec<[usize; 4]>,
    alpha: Vec<f64>,
}

pub fn bquad_to_json(d: &BQuadGraph, alpha: &Labelling) -> String {
    let f = GraphFile {
        white: d.white_ids.clone(),
        black: d.black_ids.clone(),
        quads: d.global_quads(),
        alpha: alpha.alpha.clone(),
    };
    serde_json::to_string(&f).expect("graph serialization")
}

pub fn bquad_from_json(text: &str) -> Result<(BQuadGraph, Labelling)> {
    let f: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut color: HashMap<usize, Color> = HashMap::new();
    for (field, list, c) in [("white", &f.white, Color::White), ("black", &f.black, Color::Black)] {
        for (k, &v) in list.iter().enumerate() {
            if color.insert(v, c).is_some() {
                return Err(Error::Parse(format!("{field}[{k}]: vertex {v} listed twice")));
            }
        }
    }
    for (qi, q) in f.quads.iter().enumerate() {
        for (k, v) in q.iter().enumerate() {
            match color.get(v) {
                None => return Err(Error::Parse(format!("quads[{qi}][{k}]: unknown vertex {v}"))),
                Some(&c) if c != color_of_position(k) => {
                    return Err(Error::NonBipartite(format!("quads[{qi}][{k}]: vertex {v} has the wrong color")))
                }
                _ => {}
            }
        }
    }
    if f.alpha.len() != f.quads.len() {
        return Err(Error::Parse(format!("alpha: {} angles for {} quads", f.alpha.len(), f.quads.len())));
    }
    let labelling = Labelling { alpha: f.alpha };
    labelling.validate()?;
    let d = build_bquad(&f.quads)?;
    if d.n_white() + d.n_black() != color.len() {
        return Err(Error::DanglingEdge("a listed vertex belongs to no quad".into()));
    }
    Ok((d, labelling))
}

pub fn save_bquad(path: &Path, d: &BQuadGraph, alpha: &Labelling) -> Result<()> {
    std::fs::write(path, bquad_to_json(d, alpha))?;
    Ok(())
}

pub fn load_bquad(path: &Path) -> Result<(BQuadGraph, Labelling)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    bquad_from_json(&text)
}
