//! Convex hulls of small point sets and their simplicial subdivision.
//!
//! The point sets met here have at most a dozen points (inside vertices,
//! sphere crossings and arc midpoints of one element). The 3D hull is built
//! incrementally from an initial tetrahedron; every visibility decision is
//! made once per point and facet, so the boundary stays closed and
//! consistently oriented even when several points share a face of the parent
//! element.

use super::{GeometryError, Point, Simplex};

/// A convex polytope given by its vertices and outward-oriented boundary facets.
///
/// In 2D facets are edges (`[a, b, _]`, counter-clockwise), in 3D triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub facets: Vec<[usize; 3]>,
}

impl Polytope {
    pub fn centroid(&self) -> Point {
        let s: Point = self.vertices.iter().sum();
        s / self.vertices.len() as f64
    }

    /// Volume from the facet flux (divergence theorem).
    pub fn volume(&self) -> f64 {
        let c = self.centroid();
        self.facets
            .iter()
            .map(|f| match self.dim {
                2 => {
                    let a = self.vertices[f[0]] - c;
                    let b = self.vertices[f[1]] - c;
                    0.5 * (a.x * b.y - a.y * b.x)
                }
                _ => {
                    let a = self.vertices[f[0]] - c;
                    let b = self.vertices[f[1]] - c;
                    let d = self.vertices[f[2]] - c;
                    a.cross(&b).dot(&d) / 6.0
                }
            })
            .sum()
    }
}

fn bbox_scale(points: &[Point]) -> f64 {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

fn dedup(points: &[Point], tol: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| (q - p).norm() <= tol) {
            out.push(*p);
        }
    }
    out
}

/// Counter-clockwise hull of 2D points (monotone chain), collinear points dropped.
fn hull_2d_indices(pts: &[(f64, f64)], tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a].0.partial_cmp(&pts[b].0).unwrap().then(pts[a].1.partial_cmp(&pts[b].1).unwrap())
    });
    let cross = |o: usize, a: usize, b: usize| {
        (pts[a].0 - pts[o].0) * (pts[b].1 - pts[o].1) - (pts[a].1 - pts[o].1) * (pts[b].0 - pts[o].0)
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= tol {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= tol {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn hull_2d(points: Vec<Point>, scale: f64) -> Result<Polytope, GeometryError> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    let ring = hull_2d_indices(&pts, 1e-12 * scale * scale);
    if ring.len() < 3 {
        return Err(GeometryError::DegenerateHull);
    }
    let vertices: Vec<Point> = ring.iter().map(|&i| points[i]).collect();
    let n = vertices.len();
    let facets = (0..n).map(|k| [k, (k + 1) % n, usize::MAX]).collect();
    let poly = Polytope { dim: 2, vertices, facets };
    if poly.volume() <= 1e-14 * scale * scale {
        return Err(GeometryError::DegenerateHull);
    }
    Ok(poly)
}

fn hull_3d(points: Vec<Point>, scale: f64) -> Result<Polytope, GeometryError> {
    let n = points.len();
    if n < 4 {
        return Err(GeometryError::DegenerateHull);
    }
    let eps = 1e-12 * scale.powi(3);
    let orient = |f: &[usize; 3], p: usize| {
        let a = points[f[0]];
        (points[f[1]] - a).cross(&(points[f[2]] - a)).dot(&(points[p] - a))
    };
    let argmax = |key: &dyn Fn(usize) -> f64| (0..n).max_by(|&i, &j| key(i).total_cmp(&key(j))).unwrap();
    let i0 = 0;
    let i1 = argmax(&|i| (points[i] - points[i0]).norm_squared());
    let i2 = argmax(&|i| (points[i1] - points[i0]).cross(&(points[i] - points[i0])).norm_squared());
    let i3 = argmax(&|i| orient(&[i0, i1, i2], i).abs());
    if orient(&[i0, i1, i2], i3).abs() <= eps {
        return Err(GeometryError::DegenerateHull);
    }
    let mut facets: Vec<[usize; 3]> = Vec::new();
    for (f, opposite) in [([i0, i1, i2], i3), ([i0, i1, i3], i2), ([i1, i2, i3], i0), ([i2, i0, i3], i1)] {
        facets.push(if orient(&f, opposite) > 0.0 { [f[0], f[2], f[1]] } else { f });
    }
    // Incremental construction: each new point replaces the facets it sees
    // by a cone over their horizon.
    for p in 0..n {
        if [i0, i1, i2, i3].contains(&p) {
            continue;
        }
        let visible: Vec<bool> = facets.iter().map(|f| orient(f, p) > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (f, _) in facets.iter().zip(&visible).filter(|(_, &v)| v) {
            edges.extend([(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]);
        }
        let horizon: Vec<(usize, usize)> =
            edges.iter().copied().filter(|&(u, v)| !edges.contains(&(v, u))).collect();
        let mut kept: Vec<[usize; 3]> =
            facets.iter().zip(&visible).filter(|(_, &v)| !v).map(|(f, _)| *f).collect();
        kept.extend(horizon.into_iter().map(|(u, v)| [u, v, p]));
        facets = kept;
    }
    let mut used = vec![usize::MAX; n];
    let mut vertices = Vec::new();
    for f in facets.iter_mut() {
        for m in f.iter_mut() {
            if used[*m] == usize::MAX {
                used[*m] = vertices.len();
                vertices.push(points[*m]);
            }
            *m = used[*m];
        }
    }
    let poly = Polytope { dim: 3, vertices, facets };
    if poly.volume() <= 1e-14 * scale.powi(3) {
        return Err(GeometryError::DegenerateHull);
    }
    Ok(poly)
}

/// Convex hull of a small point set in dimension `dim`.
pub fn convex_hull(dim: usize, points: &[Point]) -> Result<Polytope, GeometryError> {
    if points.len() < dim + 1 {
        return Err(GeometryError::DegenerateHull);
    }
    let scale = bbox_scale(points);
    if scale == 0.0 {
        return Err(GeometryError::DegenerateHull);
    }
    let pts = dedup(points, 1e-12 * scale);
    match dim {
        2 => hull_2d(pts, scale),
        3 => hull_3d(pts, scale),
        d => Err(GeometryError::UnsupportedDimension(d)),
    }
}

/// Interior-disjoint simplices covering the polytope: the polytope itself when
/// it is a simplex, otherwise a fan from the vertex centroid over the facets.
pub fn triangulate_polytope(p: &Polytope) -> Vec<Simplex> {
    let v = &p.vertices;
    if v.len() == p.dim + 1 {
        return vec![Simplex::new(p.dim, v).expect("dimension checked by convex_hull")];
    }
    let c = p.centroid();
    p.facets
        .iter()
        .map(|f| match p.dim {
            2 => Simplex::triangle(c, v[f[0]], v[f[1]]),
            _ => Simplex::tetrahedron(c, v[f[0]], v[f[1]], v[f[2]]),
        })
        .filter(|s| s.volume() > 0.0)
        .collect()
}
