//! Planar realization of a radius function: circle centers, intersection
//! points and kites, plus embeddedness checks and SVG output.

use crate::bquad::{Labelling, WhiteGraph};
use crate::error::{Error, Result};
use crate::euclid::{inf_norm, residual_radii};
use crate::kernel::{f_raw, kite_raw};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

pub type Point = Complex64;

/// Residual bound required before laying out.
pub const LAYOUT_RESIDUAL_TOL: f64 = 1e-8;

/// Root vertex, its center, and the direction of the first edge of its fan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub root: usize,
    pub position: Point,
    pub direction: f64,
}

impl Default for Anchor {
    fn default() -> Self {
        Anchor { root: 0, position: Point::new(0.0, 0.0), direction: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CirclePattern {
    pub center: Vec<Point>,
    pub radius: Vec<f64>,
    pub black: Vec<Point>,
    pub anchor: Anchor,
    /// White corners `[w0, b0, w1, b1]` per quad (local indices).
    pub quads: Vec<[usize; 4]>,
    pub alpha: Vec<f64>,
    /// Per edge: distance between the placed neighbor center and the one
    /// predicted across the edge (0 on BFS tree edges).
    pub edge_mismatch: Vec<f64>,
    /// Largest disagreement between constructions of the same black point.
    pub black_mismatch: f64,
}

/// Kites with shared combinatorics, the input of discrete conformal maps.
#[derive(Debug, Clone, PartialEq)]
pub struct KitePattern {
    pub center: Vec<Point>,
    pub black: Vec<Point>,
    pub quads: Vec<[usize; 4]>,
    pub alpha: Vec<f64>,
}

impl KitePattern {
    pub fn corners(&self, q: usize) -> [Point; 4] {
        let [w0, b0, w1, b1] = self.quads[q];
        [self.center[w0], self.black[b0], self.center[w1], self.black[b1]]
    }

    pub fn n_kites(&self) -> usize {
        self.quads.len()
    }

    /// The two triangles of kite `q` split along the white diagonal, both
    /// counterclockwise: `(w0, b0, w1)` and `(w1, b1, w0)`.
    pub fn triangles(&self, q: usize) -> [[Point; 3]; 2] {
        let [a, b, c, d] = self.corners(q);
        [[a, b, c], [c, d, a]]
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> KitePattern {
        KitePattern {
            center: self.center.iter().map(|&z| f(z)).collect(),
            black: self.black.iter().map(|&z| f(z)).collect(),
            quads: self.quads.clone(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn bbox(&self) -> Option<(Point, Point)> {
        bbox(self.center.iter().chain(self.black.iter()).copied())
    }

    /// Kite convexity from the corner positions.
    pub fn is_convex(&self, q: usize, tol: f64) -> bool {
        let c = self.corners(q);
        (0..4).all(|k| cross(c[(k + 1) % 4] - c[k], c[(k + 2) % 4] - c[(k + 1) % 4]) >= -tol)
    }
}

fn bbox(points: impl Iterator<Item = Point>) -> Option<(Point, Point)> {
    let mut it = points.peekable();
    it.peek()?;
    let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
    for p in it {
        lo = Point::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Point::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    Some((lo, hi))
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a.re * b.im - a.im * b.re
}

impl CirclePattern {
    pub fn kite_pattern(&self) -> KitePattern {
        KitePattern {
            center: self.center.clone(),
            black: self.black.clone(),
            quads: self.quads.clone(),
            alpha: self.alpha.clone(),
        }
    }

    /// Diagonal of the bounding box of all circles.
    pub fn diameter(&self) -> f64 {
        let pts =
            self.center.iter().zip(&self.radius).flat_map(|(&c, &r)| [c - Point::new(r, r), c + Point::new(r, r)]);
        match bbox(pts.chain(self.black.iter().copied())) {
            Some((lo, hi)) => (hi - lo).norm(),
            None => 0.0,
        }
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point, scale: f64) -> CirclePattern {
        let mut p = self.clone();
        p.center.iter_mut().for_each(|z| *z = f(*z));
        p.black.iter_mut().for_each(|z| *z = f(*z));
        p.radius.iter_mut().for_each(|r| *r *= scale);
        p
    }
}

pub fn layout(graph: &WhiteGraph, alpha: &Labelling, r: &[f64], anchor: Anchor) -> Result<CirclePattern> {
    let res = inf_norm(&residual_radii(graph, alpha, r)?);
    if res > LAYOUT_RESIDUAL_TOL {
        return Err(Error::NotASolution { residual: res });
    }
    layout_unchecked(graph, alpha, r, anchor)
}

/// Layout without the residual precondition; closure errors show up in
/// `edge_mismatch`.
pub fn layout_unchecked(graph: &WhiteGraph, alpha: &Labelling, r: &[f64], anchor: Anchor) -> Result<CirclePattern> {
    let n = graph.n;
    if anchor.root >= n {
        return Err(Error::InvalidInput(format!("anchor vertex {} out of range", anchor.root)));
    }
    let rho: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let mut center: Vec<Option<Point>> = vec![None; n];
    // (fan index, direction) of the edge through which each vertex was reached.
    let mut reference: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut black: Vec<Option<Point>> = vec![None; graph.n_black];
    let mut black_mismatch: f64 = 0.0;
    let mut edge_mismatch = vec![0.0; graph.n_edges()];
    let mut edge_done = vec![false; graph.n_edges()];

    center[anchor.root] = Some(anchor.position);
    reference[anchor.root] = Some((0, anchor.direction));
    let mut queue = VecDeque::from([anchor.root]);
    while let Some(w) = queue.pop_front() {
        let cw = center[w].unwrap();
        let fan = &graph.fans[w];
        let half: Vec<f64> = fan.iter().map(|f| f_raw(alpha.alpha[f.edge], rho[f.neighbor] - rho[w])).collect();
        let (k0, d0) = reference[w].unwrap();
        let mut dir = vec![0.0; fan.len()];
        dir[k0] = d0;
        for j in k0 + 1..fan.len() {
            dir[j] = dir[j - 1] + half[j - 1] + half[j];
        }
        for j in (0..k0).rev() {
            dir[j] = dir[j + 1] - half[j + 1] - half[j];
        }
        for (j, f) in fan.iter().enumerate() {
            let ray = |a: f64| Point::from_polar(1.0, a);
            for (b, a) in [(f.succ, dir[j] - half[j]), (f.pred, dir[j] + half[j])] {
                let p = cw + r[w] * ray(a);
                match black[b] {
                    Some(q) => black_mismatch = black_mismatch.max((p - q).norm()),
                    None => black[b] = Some(p),
                }
            }
        }
        let mut order: Vec<usize> = (0..fan.len()).collect();
        order.sort_by_key(|&j| fan[j].neighbor);
        for j in order {
            let f = fan[j];
            let l = kite_raw(alpha.alpha[f.edge], r[w], r[f.neighbor]).l;
            let predicted = cw + Point::from_polar(l, dir[j]);
            match center[f.neighbor] {
                None => {
                    center[f.neighbor] = Some(predicted);
                    let back = graph.fans[f.neighbor].iter().position(|g| g.edge == f.edge).unwrap();
                    reference[f.neighbor] = Some((back, dir[j] + PI));
                    edge_done[f.edge] = true;
                    queue.push_back(f.neighbor);
                }
                Some(c) => {
                    if !edge_done[f.edge] {
                        edge_mismatch[f.edge] = (predicted - c).norm();
                        edge_done[f.edge] = true;
                    }
                }
            }
        }
    }
    if let Some(v) = center.iter().position(|c| c.is_none()) {
        return Err(Error::InvalidInput(format!("white graph is disconnected (vertex {v} unreachable)")));
    }
    Ok(CirclePattern {
        center: center.into_iter().map(|c| c.unwrap()).collect(),
        radius: r.to_vec(),
        black: black.into_iter().map(|b| b.unwrap_or(Point::new(f64::NAN, f64::NAN))).collect(),
        anchor,
        quads: graph.edges.iter().zip(&graph.edge_blacks).map(|(&[a, b], &[c, d])| [a, c, b, d]).collect(),
        alpha: alpha.alpha.clone(),
        edge_mismatch,
        black_mismatch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub max: f64,
    pub relative: f64,
    /// Non-tree edges with their mismatch.
    pub per_edge: Vec<(usize, f64)>,
}

pub fn closure_residual(pattern: &CirclePattern, graph: &WhiteGraph) -> ClosureReport {
    debug_assert_eq!(pattern.edge_mismatch.len(), graph.n_edges());
    let per_edge: Vec<(usize, f64)> =
        pattern.edge_mismatch.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(e, &m)| (e, m)).collect();
    let max = pattern.edge_mismatch.iter().cloned().fold(0.0, f64::max);
    let d = pattern.diameter();
    ClosureReport { max, relative: if d > 0.0 { max / d } else { 0.0 }, per_edge }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub embedded: bool,
    pub first_overlap: Option<(usize, usize)>,
    pub negatively_oriented: Vec<usize>,
}

fn overlap_open(t: &[Point; 3], s: &[Point; 3], tol: f64) -> bool {
    for poly in [t, s] {
        for k in 0..3 {
            let e = poly[(k + 1) % 3] - poly[k];
            let nrm = Point::new(-e.im, e.re);
            let len = nrm.norm();
            if len == 0.0 {
                continue;
            }
            let proj = |p: &Point| (p.re * nrm.re + p.im * nrm.im) / len;
            let (a0, a1) = t.iter().map(proj).fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
            let (b0, b1) = s.iter().map(proj).fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
            if a1 <= b0 + tol || b1 <= a0 + tol {
                return false;
            }
        }
    }
    true
}

/// Pairwise disjointness of open kites; sweep over x-extents as prefilter.
pub fn check_embedded(pattern: &KitePattern) -> EmbeddingReport {
    let scale = pattern.bbox().map(|(lo, hi)| (hi - lo).norm()).unwrap_or(0.0);
    let tol = 1e-9 * scale;
    let mut tris: Vec<(usize, [Point; 3], f64, f64, f64, f64)> = Vec::new();
    let mut negatively_oriented = Vec::new();
    for q in 0..pattern.n_kites() {
        for t in pattern.triangles(q) {
            if cross(t[1] - t[0], t[2] - t[0]) <= 0.0 && !negatively_oriented.contains(&q) {
                negatively_oriented.push(q);
            }
            let xs = t.iter().map(|p| p.re);
            let ys = t.iter().map(|p| p.im);
            tris.push((
                q,
                t,
                xs.clone().fold(f64::MAX, f64::min),
                xs.fold(f64::MIN, f64::max),
                ys.clone().fold(f64::MAX, f64::min),
                ys.fold(f64::MIN, f64::max),
            ));
        }
    }
    tris.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let mut first: Option<(usize, usize)> = None;
    for i in 0..tris.len() {
        for j in i + 1..tris.len() {
            if tris[j].2 >= tris[i].3 - tol {
                break;
            }
            let (a, b) = (&tris[i], &tris[j]);
            if a.0 == b.0 || a.5 <= b.4 + tol || b.5 <= a.4 + tol {
                continue;
            }
            if overlap_open(&a.1, &b.1, tol) {
                let pair = (a.0.min(b.0), a.0.max(b.0));
                if first.is_none_or(|f| pair < f) {
                    first = Some(pair);
                }
            }
        }
    }
    EmbeddingReport {
        embedded: first.is_none() && negatively_oriented.is_empty(),
        first_overlap: first,
        negatively_oriented,
    }
}

#[derive(Debug, Clone)]
pub struct SvgOptions {
    pub width: f64,
    pub circles: bool,
    pub kites: bool,
    pub vertices: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { width: 800.0, circles: true, kites: true, vertices: true }
    }
}

/// SVG 1.1 document with y pointing up. Numbers use a fixed number of decimals
/// so the output bytes depend only on the input.
pub fn to_svg(pattern: &CirclePattern, opts: &SvgOptions) -> String {
    let mut s = String::new();
    let pts = pattern
        .center
        .iter()
        .zip(&pattern.radius)
        .flat_map(|(&c, &r)| [c - Point::new(r, r), c + Point::new(r, r)])
        .chain(pattern.black.iter().copied());
    let Some((lo, hi)) = bbox(pts) else {
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="1" height="1" viewBox="0 0 1 1"/>"#
        );
        return s;
    };
    let span = (hi - lo).re.max((hi - lo).im).max(1e-300);
    let pad = 0.02 * span;
    let (w, h) = ((hi - lo).re + 2.0 * pad, (hi - lo).im + 2.0 * pad);
    let px = opts.width;
    let py = opts.width * h / w;
    let stroke = span * 1e-3;
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{px:.0}" height="{py:.0}" viewBox="{:.9} {:.9} {:.9} {:.9}">"#,
        lo.re - pad,
        -hi.im - pad,
        w,
        h
    );
    let _ = writeln!(s, r#"<g fill="none" stroke-width="{stroke:.9}">"#);
    if opts.kites {
        for q in &pattern.quads {
            let c = [pattern.center[q[0]], pattern.black[q[1]], pattern.center[q[2]], pattern.black[q[3]]];
            let _ = writeln!(
                s,
                r##"<path d="M {:.9} {:.9} L {:.9} {:.9} L {:.9} {:.9} L {:.9} {:.9} Z" stroke="#4a6fa5" fill="#dfe8f5"/>"##,
                c[0].re, -c[0].im, c[1].re, -c[1].im, c[2].re, -c[2].im, c[3].re, -c[3].im
            );
        }
    }
    if opts.circles {
        for (c, r) in pattern.center.iter().zip(&pattern.radius) {
            let _ = writeln!(s, r##"<circle cx="{:.9}" cy="{:.9}" r="{:.9}" stroke="#222222"/>"##, c.re, -c.im, r);
        }
    }
    let _ = writeln!(s, "</g>");
    if opts.vertices {
        let dot = 3.0 * stroke;
        for c in &pattern.center {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.9}" cy="{:.9}" r="{dot:.9}" fill="#ffffff" stroke="#000000" stroke-width="{:.9}"/>"##,
                c.re, -c.im, stroke
            );
        }
        for b in &pattern.black {
            let _ = writeln!(s, r##"<circle cx="{:.9}" cy="{:.9}" r="{dot:.9}" fill="#000000"/>"##, b.re, -b.im);
        }
    }
    s.push_str("</svg>\n");
    // values that round to zero print without a sign
    s.replace("-0.000000000", "0.000000000")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct PatternFile {
    pub center: Vec<[f64; 2]>,
    pub radius: Vec<f64>,
    pub black: Vec<[f64; 2]>,
    pub quads: Vec<[usize; 4]>,
    pub alpha: Vec<f64>,
    pub anchor: AnchorFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct AnchorFile {
    pub root: usize,
    pub position: [f64; 2],
    pub direction: f64,
}

fn xy(p: Point) -> [f64; 2] {
    [p.re, p.im]
}

fn pt(a: [f64; 2]) -> Point {
    Point::new(a[0], a[1])
}

/// Pattern JSON: `center`, `radius`, `black`, plus the local quads (`[w, b, w, b]`
/// indexing `center` and `black`), `alpha` and the anchor.
pub fn pattern_to_json(p: &CirclePattern) -> String {
    let f = PatternFile {
        center: p.center.iter().map(|&z| xy(z)).collect(),
        radius: p.radius.clone(),
        black: p.black.iter().map(|&z| xy(z)).collect(),
        quads: p.quads.clone(),
        alpha: p.alpha.clone(),
        anchor: AnchorFile { root: p.anchor.root, position: xy(p.anchor.position), direction: p.anchor.direction },
    };
    serde_json::to_string(&f).expect("pattern serialization")
}

pub fn pattern_from_json(text: &str) -> Result<CirclePattern> {
    let f: PatternFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if f.radius.len() != f.center.len() {
        return Err(Error::Parse("radius: length differs from center".into()));
    }
    if f.alpha.len() != f.quads.len() {
        return Err(Error::Parse("alpha: length differs from quads".into()));
    }
    for (qi, q) in f.quads.iter().enumerate() {
        if q[0] >= f.center.len() || q[2] >= f.center.len() || q[1] >= f.black.len() || q[3] >= f.black.len() {
            return Err(Error::Parse(format!("quads[{qi}]: index out of range")));
        }
    }
    Ok(CirclePattern {
        center: f.center.into_iter().map(pt).collect(),
        radius: f.radius,
        black: f.black.into_iter().map(pt).collect(),
        anchor: Anchor { root: f.anchor.root, position: pt(f.anchor.position), direction: f.anchor.direction },
        edge_mismatch: vec![0.0; f.quads.len()],
        quads: f.quads,
        alpha: f.alpha,
        black_mismatch: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bquad::generate_square_grid;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    #[test]
    fn single_right_kite() {
        let (d, a) = generate_square_grid(1, 1, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let p = layout(&g, &a, &[1.0, 1.0], Anchor::default()).unwrap();
        assert!((p.center[0] - Point::new(0.0, 0.0)).norm() < 1e-15);
        assert!((p.center[1] - Point::new(SQRT_2, 0.0)).norm() < 1e-15);
        let h = SQRT_2 / 2.0;
        let mut bs: Vec<(f64, f64)> = p.black.iter().map(|b| (b.re, b.im)).collect();
        bs.sort_by(|x, y| x.1.total_cmp(&y.1));
        assert!((bs[0].0 - h).abs() < 1e-15 && (bs[0].1 + h).abs() < 1e-15);
        assert!((bs[1].0 - h).abs() < 1e-15 && (bs[1].1 - h).abs() < 1e-15);
        // Quad (w0, b0, w1, b1) is counterclockwise, so b0 lies below the axis.
        let k = p.kite_pattern();
        let c = k.corners(0);
        assert!(c[1].im < 0.0 && c[3].im > 0.0);
        assert!(check_embedded(&k).embedded);
        assert_eq!(closure_residual(&p, &g).max, 0.0);
    }

    #[test]
    fn overlapping_kites_are_reported() {
        let (d, a) = generate_square_grid(1, 2, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let p = layout(&g, &a, &vec![1.0; g.n], Anchor::default()).unwrap();
        let mut k = p.kite_pattern();
        assert!(check_embedded(&k).embedded);
        // Move one kite onto the other.
        let shift = k.center[k.quads[1][0]] - k.center[k.quads[0][0]];
        let mut k2 = k.clone();
        for z in k2.center.iter_mut().chain(k2.black.iter_mut()) {
            *z -= 0.3 * shift;
        }
        k.center.extend(k2.center.iter().copied());
        let nc = p.center.len();
        let nb = p.black.len();
        k.black.extend(k2.black.iter().copied());
        let q = k2.quads[1];
        k.quads.push([q[0] + nc, q[1] + nb, q[2] + nc, q[3] + nb]);
        k.alpha.push(FRAC_PI_2);
        let rep = check_embedded(&k);
        assert!(!rep.embedded);
        assert!(rep.first_overlap.is_some());
    }

    #[test]
    fn empty_and_single_svg() {
        let empty = CirclePattern {
            center: vec![],
            radius: vec![],
            black: vec![],
            anchor: Anchor::default(),
            quads: vec![],
            alpha: vec![],
            edge_mismatch: vec![],
            black_mismatch: 0.0,
        };
        let s = to_svg(&empty, &SvgOptions::default());
        assert!(s.contains("<svg") && s.trim_end().ends_with("/>"));
        let (d, a) = generate_square_grid(1, 1, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let p = layout(&g, &a, &[1.0, 1.0], Anchor::default()).unwrap();
        let opts = SvgOptions { vertices: false, ..Default::default() };
        let s = to_svg(&p, &opts);
        assert_eq!(s.matches("<circle").count(), 2);
        assert_eq!(s.matches("<path").count(), 1);
    }

    #[test]
    fn pattern_json_round_trip() {
        let (d, a) = generate_square_grid(3, 3, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        let p = layout(&g, &a, &vec![1.0; g.n], Anchor { root: 2, position: Point::new(0.5, -1.0), direction: 0.3 })
            .unwrap();
        let q = pattern_from_json(&pattern_to_json(&p)).unwrap();
        assert_eq!(p.center, q.center);
        assert_eq!(p.black, q.black);
        assert_eq!(p.anchor, q.anchor);
        assert_eq!(p.quads, q.quads);
    }
}
