//! Geometric predicates and constructions for simplex–ball interaction.
//!
//! Points are always stored as 3-vectors; two-dimensional geometry keeps the
//! `z` component at zero. Simplices carry their dimension and `dim + 1`
//! vertices.

mod decompose;
mod distance;
mod hull;

pub use decompose::{arc_midpoints, inner_pieces, outer_pieces, PieceList};
pub use distance::{closest_point_segment, closest_point_triangle, distance_point_simplex};
pub use hull::{convex_hull, triangulate_polytope, Polytope};

use nalgebra::Vector3;
use thiserror::Error;

pub type Point = Vector3<f64>;

/// Relative tolerance for on-sphere tests, scaled by the ball radius.
pub const EPS_GEO_REL: f64 = 1e-10;

/// Relative tolerance for degenerate simplices, scaled by `h^n`.
pub const DEGENERACY_REL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("ball radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("simplex is degenerate (volume {volume:e} below tolerance {tolerance:e})")]
    DegenerateSimplex { volume: f64, tolerance: f64 },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("edge crossing precondition violated: {0}")]
    PreconditionViolated(&'static str),
    #[error("simplex does not straddle the sphere")]
    NotStraddling,
    #[error("point set is affinely degenerate")]
    DegenerateHull,
}

/// An open Euclidean ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Self { center, radius })
    }

    /// Tolerance used for on-sphere decisions.
    #[inline]
    pub fn eps(&self) -> f64 {
        EPS_GEO_REL * self.radius
    }

    /// Strict membership in the open ball.
    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        (p - self.center).norm_squared() < self.radius * self.radius
    }

    /// Membership with the on-sphere band counted as outside.
    #[inline]
    pub fn contains_strictly(&self, p: &Point) -> bool {
        let r = self.radius - self.eps();
        (p - self.center).norm_squared() < r * r
    }

    /// Volume (area in 2D) of the ball in dimension `dim`.
    pub fn measure(&self, dim: usize) -> f64 {
        ball_measure(dim, self.radius)
    }
}

pub fn ball_measure(dim: usize, radius: f64) -> f64 {
    match dim {
        2 => std::f64::consts::PI * radius * radius,
        3 => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
        _ => f64::NAN,
    }
}

/// A 2- or 3-simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    dim: usize,
    verts: [Point; 4],
}

impl Simplex {
    pub fn new(dim: usize, vertices: &[Point]) -> Result<Self, GeometryError> {
        if !(dim == 2 || dim == 3) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        assert_eq!(vertices.len(), dim + 1, "a {dim}-simplex needs {} vertices", dim + 1);
        let mut verts = [Point::zeros(); 4];
        verts[..=dim].copy_from_slice(vertices);
        Ok(Self { dim, verts })
    }

    pub fn triangle(a: Point, b: Point, c: Point) -> Self {
        Self { dim: 2, verts: [a, b, c, Point::zeros()] }
    }

    pub fn tetrahedron(a: Point, b: Point, c: Point, d: Point) -> Self {
        Self { dim: 3, verts: [a, b, c, d] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vertices(&self) -> &[Point] {
        &self.verts[..=self.dim]
    }

    pub fn signed_volume(&self) -> f64 {
        let v = &self.verts;
        match self.dim {
            2 => {
                let a = v[1] - v[0];
                let b = v[2] - v[0];
                0.5 * (a.x * b.y - a.y * b.x)
            }
            _ => (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])) / 6.0,
        }
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.signed_volume().abs()
    }

    pub fn barycenter(&self) -> Point {
        let s: Point = self.vertices().iter().sum();
        s / (self.dim + 1) as f64
    }

    pub fn max_edge(&self) -> f64 {
        let vs = self.vertices();
        let mut h: f64 = 0.0;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                h = h.max((vs[i] - vs[j]).norm());
            }
        }
        h
    }

    pub fn check_nondegenerate(&self) -> Result<(), GeometryError> {
        let tolerance = DEGENERACY_REL * self.max_edge().powi(self.dim as i32);
        let volume = self.volume();
        if volume > tolerance {
            Ok(())
        } else {
            Err(GeometryError::DegenerateSimplex { volume, tolerance })
        }
    }

    /// Barycentric coordinates of `p` (only the first `dim + 1` are meaningful).
    pub fn barycentric(&self, p: &Point) -> [f64; 4] {
        let v = &self.verts;
        let mut out = [0.0; 4];
        match self.dim {
            2 => {
                let det = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y);
                let l1 = ((p.x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (p.y - v[0].y)) / det;
                let l2 = ((v[1].x - v[0].x) * (p.y - v[0].y) - (p.x - v[0].x) * (v[1].y - v[0].y)) / det;
                out[0] = 1.0 - l1 - l2;
                out[1] = l1;
                out[2] = l2;
            }
            _ => {
                let e1 = v[1] - v[0];
                let e2 = v[2] - v[0];
                let e3 = v[3] - v[0];
                let d = p - v[0];
                let det = e1.cross(&e2).dot(&e3);
                let l1 = d.cross(&e2).dot(&e3) / det;
                let l2 = e1.cross(&d).dot(&e3) / det;
                let l3 = e1.cross(&e2).dot(&d) / det;
                out[0] = 1.0 - l1 - l2 - l3;
                out[1] = l1;
                out[2] = l2;
                out[3] = l3;
            }
        }
        out
    }

    /// Whether `p` lies in the closed simplex, allowing barycentric slack `tol`.
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.barycentric(p)[..=self.dim].iter().all(|&l| l >= -tol)
    }

    /// Point with the given barycentric coordinates.
    pub fn point_at(&self, bary: &[f64]) -> Point {
        let mut p = Point::zeros();
        for (l, v) in bary.iter().zip(self.vertices()) {
            p += *l * v;
        }
        p
    }

    pub fn translated(&self, shift: &Point) -> Self {
        let mut s = *self;
        for v in s.verts[..=s.dim].iter_mut() {
            *v += shift;
        }
        s
    }
}

/// Position of a simplex relative to a ball, decided from its vertices only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Inside,
    Outside,
    /// `m` vertices strictly inside, the rest outside.
    Straddle(usize),
}

/// Inside/outside mask of the simplex vertices (bit `k` set = vertex `k` inside).
pub fn inside_mask(s: &Simplex, b: &Ball) -> u8 {
    let mut mask = 0u8;
    for (k, v) in s.vertices().iter().enumerate() {
        if b.contains_strictly(v) {
            mask |= 1 << k;
        }
    }
    mask
}

pub fn classification_from_mask(dim: usize, mask: u8) -> Classification {
    let m = mask.count_ones() as usize;
    if m == dim + 1 {
        Classification::Inside
    } else if m == 0 {
        Classification::Outside
    } else {
        Classification::Straddle(m)
    }
}

pub fn classify_simplex(s: &Simplex, b: &Ball) -> Result<Classification, GeometryError> {
    s.check_nondegenerate()?;
    Ok(classification_from_mask(s.dim(), inside_mask(s, b)))
}

/// Parameter `t` of the crossing of segment `a + t (b - a)` with the sphere,
/// for `a` inside. Clamped to `[0, 1]`.
fn crossing_parameter(a: &Point, b: &Point, ball: &Ball) -> f64 {
    let d = b - a;
    let f = a - ball.center;
    let qa = d.norm_squared();
    let qb = f.dot(&d);
    let qc = f.norm_squared() - ball.radius * ball.radius;
    let disc = (qb * qb - qa * qc).max(0.0).sqrt();
    // qc < 0, so the positive root never suffers cancellation in this form.
    let t = if qb >= 0.0 { -qc / (qb + disc) } else { (disc - qb) / qa };
    t.clamp(0.0, 1.0)
}

/// Intersection of the segment from inside point `a` to outside point `b` with the sphere.
pub fn edge_sphere_crossing(a: &Point, b: &Point, ball: &Ball) -> Result<Point, GeometryError> {
    let r2 = ball.radius * ball.radius;
    if (a - ball.center).norm_squared() >= r2 {
        return Err(GeometryError::PreconditionViolated("first endpoint is not inside the ball"));
    }
    let lim = ball.radius - ball.eps();
    if (b - ball.center).norm_squared() < lim * lim {
        return Err(GeometryError::PreconditionViolated("second endpoint is not outside the ball"));
    }
    let t = crossing_parameter(a, b, ball);
    Ok(a + t * (b - a))
}

/// An edge–sphere crossing together with the local vertex indices of its edge
/// (`edge.0` inside, `edge.1` outside).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub point: Point,
    pub edge: (usize, usize),
}

pub(crate) fn crossings_from_mask(s: &Simplex, b: &Ball, mask: u8) -> smallvec::SmallVec<[Crossing; 4]> {
    let vs = s.vertices();
    let mut out = smallvec::SmallVec::new();
    for i in 0..vs.len() {
        if mask & (1 << i) == 0 {
            continue;
        }
        for j in 0..vs.len() {
            if mask & (1 << j) != 0 {
                continue;
            }
            let t = crossing_parameter(&vs[i], &vs[j], b);
            out.push(Crossing { point: vs[i] + t * (vs[j] - vs[i]), edge: (i, j) });
        }
    }
    out
}

/// All `m (n + 1 - m)` crossings of a straddling simplex with the sphere.
pub fn crossing_points(s: &Simplex, b: &Ball) -> Result<Vec<Crossing>, GeometryError> {
    match classify_simplex(s, b)? {
        Classification::Straddle(_) => Ok(crossings_from_mask(s, b, inside_mask(s, b)).into_vec()),
        _ => Err(GeometryError::NotStraddling),
    }
}

/// `(∪ outer) ∩ ball`: the part of element `parent` left over by its
/// inscribed pieces, handled by Monte Carlo with a point-in-ball test.
#[derive(Debug, Clone, PartialEq)]
pub struct FullcapRegion {
    pub outer: PieceList,
    pub ball: Ball,
    pub parent: usize,
}

impl FullcapRegion {
    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        self.ball.contains(p)
    }

    pub fn outer_volume(&self) -> f64 {
        self.outer.iter().map(|s| s.volume()).sum()
    }
}

#[inline]
pub fn simplex_volume(s: &Simplex) -> f64 {
    s.volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64Mcg;

    fn unit_tet() -> Simplex {
        Simplex::tetrahedron(
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
        )
    }

    #[test]
    fn classify_examples() {
        let t = unit_tet();
        let big = Ball::new(Point::zeros(), 10.0).unwrap();
        assert_eq!(classify_simplex(&t, &big).unwrap(), Classification::Inside);
        let far = Ball::new(Point::new(100.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(classify_simplex(&t, &far).unwrap(), Classification::Outside);
        let half = Ball::new(Point::zeros(), 0.5).unwrap();
        assert_eq!(classify_simplex(&t, &half).unwrap(), Classification::Straddle(1));
    }

    #[test]
    fn degenerate_simplex_rejected() {
        let flat = Simplex::tetrahedron(
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
        );
        let b = Ball::new(Point::zeros(), 1.0).unwrap();
        assert!(matches!(classify_simplex(&flat, &b), Err(GeometryError::DegenerateSimplex { .. })));
        assert!(Ball::new(Point::zeros(), 0.0).is_err());
    }

    #[test]
    fn boundary_vertex_counts_as_outside() {
        let t = unit_tet();
        let b = Ball::new(Point::zeros(), 1.0).unwrap();
        // Three vertices sit exactly on the sphere.
        assert_eq!(classify_simplex(&t, &b).unwrap(), Classification::Straddle(1));
    }

    #[test]
    fn crossing_examples() {
        let b = Ball::new(Point::zeros(), 1.0).unwrap();
        let p = edge_sphere_crossing(&Point::zeros(), &Point::new(2.0, 0.0, 0.0), &b).unwrap();
        assert!((p - Point::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let p = edge_sphere_crossing(&Point::zeros(), &Point::new(0.0, 3.0, 4.0), &b).unwrap();
        assert!((p - Point::new(0.0, 0.6, 0.8)).norm() < 1e-15);
        assert!(edge_sphere_crossing(&Point::new(2.0, 0.0, 0.0), &Point::zeros(), &b).is_err());
        assert!(edge_sphere_crossing(&Point::zeros(), &Point::new(0.5, 0.0, 0.0), &b).is_err());
    }

    fn bisection(a: &Point, b: &Point, ball: &Ball) -> Point {
        let f = |t: f64| (a + t * (b - a) - ball.center).norm() - ball.radius;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        a + 0.5 * (lo + hi) * (b - a)
    }

    #[test]
    fn crossing_matches_bisection() {
        let mut rng = Pcg64Mcg::seed_from_u64(7);
        for _ in 0..1000 {
            let c = Point::new(rng.gen(), rng.gen(), rng.gen());
            let r = rng.gen_range(0.05..2.0);
            let ball = Ball::new(c, r).unwrap();
            let dir = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                .normalize();
            let a = c + dir * r * rng.gen_range(0.0..0.99);
            let dir2 = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                .normalize();
            let b = c + dir2 * r * rng.gen_range(1.0..3.0);
            let p = edge_sphere_crossing(&a, &b, &ball).unwrap();
            let q = bisection(&a, &b, &ball);
            assert!((p - q).norm() < 1e-10 * r.max(1.0));
            assert!(((p - c).norm() - r).abs() <= 1e-12 * r);
        }
    }

    #[test]
    fn crossing_counts() {
        let t = unit_tet();
        let b1 = Ball::new(Point::zeros(), 0.5).unwrap();
        assert_eq!(crossing_points(&t, &b1).unwrap().len(), 3);
        let b2 = Ball::new(Point::new(0.5, 0.0, 0.0), 0.6).unwrap();
        assert_eq!(classify_simplex(&t, &b2).unwrap(), Classification::Straddle(2));
        assert_eq!(crossing_points(&t, &b2).unwrap().len(), 4);
        let tri = Simplex::triangle(Point::zeros(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0));
        assert_eq!(crossing_points(&tri, &b1).unwrap().len(), 2);
        let far = Ball::new(Point::new(9.0, 9.0, 9.0), 0.5).unwrap();
        assert_eq!(crossing_points(&t, &far), Err(GeometryError::NotStraddling));
    }

    #[test]
    fn volumes_and_barycentric() {
        let t = unit_tet();
        assert!((t.volume() - 1.0 / 6.0).abs() < 1e-15);
        let l = t.barycentric(&t.barycenter());
        for k in 0..4 {
            assert!((l[k] - 0.25).abs() < 1e-15);
        }
        let tri = Simplex::triangle(Point::zeros(), Point::new(2.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0));
        assert!((tri.volume() - 1.0).abs() < 1e-15);
        let p = Point::new(0.5, 0.25, 0.0);
        assert!((tri.point_at(&tri.barycentric(&p)[..3]) - p).norm() < 1e-15);
    }

    #[test]
    fn classification_translation_invariant() {
        let mut rng = Pcg64Mcg::seed_from_u64(11);
        for _ in 0..500 {
            let t = unit_tet();
            let c = Point::new(rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5));
            let b = Ball::new(c, rng.gen_range(0.1..1.5)).unwrap();
            let shift = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let b2 = Ball::new(c + shift, b.radius).unwrap();
            let t2 = t.translated(&shift);
            assert_eq!(classify_simplex(&t, &b).unwrap(), classify_simplex(&t2, &b2).unwrap());
            if let Ok(ps) = crossing_points(&t, &b) {
                let ps2 = crossing_points(&t2, &b2).unwrap();
                for (p, q) in ps.iter().zip(&ps2) {
                    assert!((p.point + shift - q.point).norm() < 1e-12 * 8.0);
                }
            }
        }
    }
}
