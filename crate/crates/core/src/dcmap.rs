//! Piecewise affine maps between two kite patterns with the same
//! combinatorics. Each kite is cut along its white diagonal; the two triangles
//! are mapped affinely onto their counterparts.

use crate::error::{Error, Result};
use crate::layout::{check_embedded, cross, KitePattern, Point};
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

/// Relative tolerance for points on or just outside the kite union.
pub const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub linear: Matrix2<f64>,
    pub offset: Point,
}

impl Affine {
    /// The affine map taking triangle `p` onto triangle `q`.
    pub fn from_triangles(p: &[Point; 3], q: &[Point; 3]) -> Option<Affine> {
        let src = Matrix2::new(p[1].re - p[0].re, p[2].re - p[0].re, p[1].im - p[0].im, p[2].im - p[0].im);
        let dst = Matrix2::new(q[1].re - q[0].re, q[2].re - q[0].re, q[1].im - q[0].im, q[2].im - q[0].im);
        let linear = dst * src.try_inverse()?;
        let offset = q[0] - apply(&linear, p[0]);
        Some(Affine { linear, offset })
    }

    pub fn apply(&self, z: Point) -> Point {
        apply(&self.linear, z) + self.offset
    }

    /// Singular values `(σ1, σ2)`, `σ1 ≥ σ2`.
    pub fn singular_values(&self) -> (f64, f64) {
        let s = self.linear.singular_values();
        (s[0].max(s[1]), s[0].min(s[1]))
    }
}

fn apply(m: &Matrix2<f64>, z: Point) -> Point {
    Point::new(m[(0, 0)] * z.re + m[(0, 1)] * z.im, m[(1, 0)] * z.re + m[(1, 1)] * z.im)
}

/// Uniform grid over the source bounding box listing the triangles whose
/// (slightly enlarged) bounding boxes meet each cell.
#[derive(Debug, Clone)]
struct Locator {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Locator {
    fn new(tris: &[[Point; 3]], lo: Point, hi: Point, pad: f64) -> Locator {
        let n = (tris.len() as f64).sqrt().ceil().max(1.0);
        let span = (hi - lo).re.max((hi - lo).im).max(1e-300);
        let cell = span / n;
        let nx = (((hi - lo).re / cell).floor() as usize + 1).max(1);
        let ny = (((hi - lo).im / cell).floor() as usize + 1).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        let mut loc = Locator { lo, cell, nx, ny, cells: Vec::new() };
        for (t, tri) in tris.iter().enumerate() {
            let (x0, y0) = loc.index(Point::new(
                tri.iter().map(|p| p.re).fold(f64::MAX, f64::min) - pad,
                tri.iter().map(|p| p.im).fold(f64::MAX, f64::min) - pad,
            ));
            let (x1, y1) = loc.index(Point::new(
                tri.iter().map(|p| p.re).fold(f64::MIN, f64::max) + pad,
                tri.iter().map(|p| p.im).fold(f64::MIN, f64::max) + pad,
            ));
            for y in y0..=y1 {
                for x in x0..=x1 {
                    cells[y * nx + x].push(t);
                }
            }
        }
        loc.cells = cells;
        loc
    }

    fn index(&self, z: Point) -> (usize, usize) {
        let fx = ((z.re - self.lo.re) / self.cell).floor().max(0.0) as usize;
        let fy = ((z.im - self.lo.im) / self.cell).floor().max(0.0) as usize;
        (fx.min(self.nx - 1), fy.min(self.ny - 1))
    }

    fn candidates(&self, z: Point) -> &[usize] {
        let (x, y) = self.index(z);
        &self.cells[y * self.nx + x]
    }
}

fn segment_distance(z: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    let t = if len2 == 0.0 { 0.0 } else { (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0) };
    (z - (a + ab * t)).norm()
}

/// Distance from `z` to the closed triangle (0 inside).
fn triangle_distance(z: Point, t: &[Point; 3]) -> f64 {
    let inside = (0..3).all(|k| cross(t[(k + 1) % 3] - t[k], z - t[k]) >= 0.0);
    if inside {
        0.0
    } else {
        (0..3).map(|k| segment_distance(z, t[k], t[(k + 1) % 3])).fold(f64::MAX, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteConformalMap {
    pub source: KitePattern,
    pub target: KitePattern,
    /// Triangle `2q` is `(w0, b0, w1)` of kite `q`, triangle `2q + 1` is `(w1, b1, w0)`.
    pub affine: Vec<Affine>,
    source_triangles: Vec<[Point; 3]>,
    locator: Locator,
    snap: f64,
}

pub fn build_map(source: &KitePattern, target: &KitePattern) -> Result<DiscreteConformalMap> {
    if source.quads != target.quads
        || source.center.len() != target.center.len()
        || source.black.len() != target.black.len()
    {
        return Err(Error::CombinatoricsMismatch("source and target quads differ".into()));
    }
    for q in 0..source.n_kites() {
        if (source.alpha[q] - target.alpha[q]).abs() > 1e-12 {
            return Err(Error::AngleMismatch(q));
        }
    }
    for p in [source, target] {
        let rep = check_embedded(p);
        if !rep.embedded {
            let (a, b) = rep.first_overlap.unwrap_or_else(|| {
                let q = rep.negatively_oriented[0];
                (q, q)
            });
            return Err(Error::NotEmbedded(a, b));
        }
    }
    let mut source_triangles = Vec::with_capacity(2 * source.n_kites());
    let mut affine = Vec::with_capacity(2 * source.n_kites());
    for q in 0..source.n_kites() {
        for (s, t) in source.triangles(q).iter().zip(target.triangles(q).iter()) {
            let a = Affine::from_triangles(s, t).ok_or(Error::DegenerateTriangle(source_triangles.len()))?;
            source_triangles.push(*s);
            affine.push(a);
        }
    }
    let (lo, hi) = source.bbox().unwrap_or((Point::new(0.0, 0.0), Point::new(1.0, 1.0)));
    let snap = SNAP_TOL * (hi - lo).norm();
    let locator = Locator::new(&source_triangles, lo, hi, snap);
    Ok(DiscreteConformalMap { source: source.clone(), target: target.clone(), affine, source_triangles, locator, snap })
}

impl DiscreteConformalMap {
    /// Source triangle containing `z`, preferring exact containment and then the
    /// lowest index.
    pub fn locate(&self, z: Point) -> Option<usize> {
        let best = |ids: &mut dyn Iterator<Item = usize>| {
            let mut best: Option<(f64, usize)> = None;
            for t in ids {
                let d = triangle_distance(z, &self.source_triangles[t]);
                if d <= self.snap && best.is_none_or(|(bd, bt)| d < bd || (d == bd && t < bt)) {
                    best = Some((d, t));
                }
            }
            best.map(|b| b.1)
        };
        best(&mut self.locator.candidates(z).iter().copied()).or_else(|| best(&mut (0..self.source_triangles.len())))
    }

    pub fn eval(&self, z: Point) -> Result<Point> {
        let t = self.locate(z).ok_or(Error::OutsideDomain(z.re, z.im))?;
        Ok(self.affine[t].apply(z))
    }

    /// The map in the opposite direction.
    pub fn inverse(&self) -> Result<DiscreteConformalMap> {
        build_map(&self.target, &self.source)
    }

    pub fn n_triangles(&self) -> usize {
        self.affine.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilatationReport {
    /// `K = σ1/σ2` per triangle.
    pub per_triangle: Vec<f64>,
    pub singular_values: Vec<(f64, f64)>,
    pub max: f64,
}

pub fn dilatation(map: &DiscreteConformalMap) -> Result<DilatationReport> {
    let mut per_triangle = Vec::with_capacity(map.n_triangles());
    let mut singular_values = Vec::with_capacity(map.n_triangles());
    for (t, a) in map.affine.iter().enumerate() {
        let (s1, s2) = a.singular_values();
        if !(s2 > 0.0) || a.linear.determinant() <= 0.0 {
            return Err(Error::DegenerateTriangle(t));
        }
        per_triangle.push(s1 / s2);
        singular_values.push((s1, s2));
    }
    let max = per_triangle.iter().cloned().fold(1.0, f64::max);
    Ok(DilatationReport { per_triangle, singular_values, max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFunction {
    pub u: Vec<f64>,
}

pub fn ratio_function(source_r: &[f64], target_r: &[f64]) -> Result<RatioFunction> {
    if source_r.len() != target_r.len() {
        return Err(Error::InvalidInput("radius vectors differ in length".into()));
    }
    Ok(RatioFunction { u: source_r.iter().zip(target_r).map(|(r, t)| t / r).collect() })
}

/// `max |f(z) − reference(z)|` over the samples. Similarity normalization is
/// the caller's job (lay out the target with the matching anchor).
pub fn sup_error(map: &DiscreteConformalMap, reference: &dyn Fn(Point) -> Point, samples: &[Point]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &z in samples {
        m = m.max((map.eval(z)? - reference(z)).norm());
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bquad::generate_square_grid;
    use crate::layout::{layout, Anchor};
    use std::f64::consts::FRAC_PI_2;

    fn grid(n: usize) -> KitePattern {
        let (d, a) = generate_square_grid(n, n, FRAC_PI_2).unwrap();
        let g = d.white_graph();
        layout(&g, &a, &vec![1.0; g.n], Anchor::default()).unwrap().kite_pattern()
    }

    #[test]
    fn identity_and_vertices() {
        let k = grid(3);
        let m = build_map(&k, &k).unwrap();
        for &c in &k.center {
            assert!((m.eval(c).unwrap() - c).norm() < 1e-12);
        }
        let rep = dilatation(&m).unwrap();
        assert!(rep.per_triangle.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(m.eval(Point::new(100.0, 0.0)).is_err());
    }

    #[test]
    fn barycenter_maps_to_image_barycenter() {
        let k = grid(2);
        let t = k.map_points(|z| Point::new(2.0 * z.re + 0.1 * z.im, z.im + 0.3));
        let m = build_map(&k, &t).unwrap();
        let tri = k.triangles(1)[0];
        let z = (tri[0] + tri[1] + tri[2]) / 3.0;
        let img = t.triangles(1)[0];
        let expect = (img[0] + img[1] + img[2]) / 3.0;
        assert!((m.eval(z).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn mismatches_are_rejected() {
        let k = grid(2);
        let mut t = k.clone();
        t.alpha[0] = 1.0;
        assert!(matches!(build_map(&k, &t), Err(Error::AngleMismatch(0))));
        let mut t = k.clone();
        t.quads.swap(0, 1);
        assert!(matches!(build_map(&k, &t), Err(Error::CombinatoricsMismatch(_))));
        let flipped = k.map_points(|z| z.conj());
        assert!(matches!(build_map(&k, &flipped), Err(Error::NotEmbedded(..))));
    }

    #[test]
    fn ratio_values() {
        let u = ratio_function(&[1.0, 2.0], &[3.0, 6.0]).unwrap();
        assert_eq!(u.u, vec![3.0, 3.0]);
    }
}
