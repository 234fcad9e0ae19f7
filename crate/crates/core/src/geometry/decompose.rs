//! Direct subdivision of a straddling simplex into the part inscribed in the
//! ball (convex hull of the inside vertices and the edge crossings) and its
//! complement in the simplex.
//!
//! Every region that occurs is a triangle, a quadrilateral, a tetrahedron or a
//! (possibly twisted) triangular prism, so the pieces are written down as cones
//! from one vertex instead of going through a general hull computation.

use smallvec::SmallVec;

use super::{crossing_parameter, Ball, Point, Simplex};

pub type PieceList = SmallVec<[Simplex; 4]>;

fn split_mask(dim: usize, mask: u8) -> (SmallVec<[usize; 4]>, SmallVec<[usize; 4]>) {
    let mut inside = SmallVec::new();
    let mut outside = SmallVec::new();
    for k in 0..=dim {
        if mask & (1 << k) != 0 {
            inside.push(k);
        } else {
            outside.push(k);
        }
    }
    (inside, outside)
}

fn crossing(s: &Simplex, ball: &Ball, i: usize, o: usize) -> Point {
    let v = s.vertices();
    let t = crossing_parameter(&v[i], &v[o], ball);
    v[i] + t * (v[o] - v[i])
}

fn orient(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

/// Whether the diagonal `p0`-`q1` of the skew quadrilateral `p0 p1 q1 q0`
/// bounds the convex hull on the side away from `inner`.
fn diagonal_is_convex(p0: &Point, p1: &Point, q0: &Point, q1: &Point, inner: &Point) -> bool {
    let s_other = orient(p0, p1, q1, q0);
    let s_inner = orient(p0, p1, q1, inner);
    s_other * s_inner >= 0.0
}

/// Pieces of the inscribed polytope `hull(I ∪ P)` for the inside-vertex mask `mask`.
/// An all-inside mask returns the simplex itself, an empty mask nothing.
pub fn inner_pieces(s: &Simplex, ball: &Ball, mask: u8) -> PieceList {
    let n = s.dim();
    let v = s.vertices();
    let (ins, outs) = split_mask(n, mask);
    let mut out = PieceList::new();
    if outs.is_empty() {
        out.push(*s);
        return out;
    }
    if ins.is_empty() {
        return out;
    }
    let x = |i: usize, o: usize| crossing(s, ball, i, o);
    match (n, ins.len()) {
        (2, 1) => {
            let (u, a, b) = (ins[0], outs[0], outs[1]);
            out.push(Simplex::triangle(v[u], x(u, a), x(u, b)));
        }
        (2, _) => {
            let (u, w, a) = (ins[0], ins[1], outs[0]);
            let (pua, pwa) = (x(u, a), x(w, a));
            out.push(Simplex::triangle(v[u], v[w], pwa));
            out.push(Simplex::triangle(v[u], pwa, pua));
        }
        (_, 1) => {
            let u = ins[0];
            out.push(Simplex::tetrahedron(v[u], x(u, outs[0]), x(u, outs[1]), x(u, outs[2])));
        }
        (_, 2) => {
            let (u, w, a, b) = (ins[0], ins[1], outs[0], outs[1]);
            let (pua, pub_, pwa, pwb) = (x(u, a), x(u, b), x(w, a), x(w, b));
            // Prism (u, pua, pub | w, pwa, pwb) with a skew sphere-side quad.
            if diagonal_is_convex(&pua, &pub_, &pwa, &pwb, &v[u]) {
                out.push(Simplex::tetrahedron(v[u], pua, pub_, pwb));
                out.push(Simplex::tetrahedron(v[u], pua, pwb, pwa));
            } else {
                out.push(Simplex::tetrahedron(v[u], pua, pub_, pwa));
                out.push(Simplex::tetrahedron(v[u], pub_, pwa, pwb));
            }
            out.push(Simplex::tetrahedron(v[u], v[w], pwa, pwb));
        }
        _ => {
            let (u, w, z, a) = (ins[0], ins[1], ins[2], outs[0]);
            let (pua, pwa, pza) = (x(u, a), x(w, a), x(z, a));
            out.push(Simplex::tetrahedron(v[u], pua, pwa, pza));
            out.push(Simplex::tetrahedron(v[u], v[w], v[z], pza));
            out.push(Simplex::tetrahedron(v[u], v[w], pza, pwa));
        }
    }
    out
}

/// Pieces of the complement of [`inner_pieces`] in the simplex. Together the
/// two lists tile the simplex without overlap.
pub fn outer_pieces(s: &Simplex, ball: &Ball, mask: u8) -> PieceList {
    let n = s.dim();
    let v = s.vertices();
    let (ins, outs) = split_mask(n, mask);
    let mut out = PieceList::new();
    if outs.is_empty() {
        return out;
    }
    if ins.is_empty() {
        out.push(*s);
        return out;
    }
    let x = |i: usize, o: usize| crossing(s, ball, i, o);
    match (n, ins.len()) {
        (2, 1) => {
            let (u, a, b) = (ins[0], outs[0], outs[1]);
            let (pua, pub_) = (x(u, a), x(u, b));
            out.push(Simplex::triangle(v[a], v[b], pub_));
            out.push(Simplex::triangle(v[a], pub_, pua));
        }
        (2, _) => {
            let (u, w, a) = (ins[0], ins[1], outs[0]);
            out.push(Simplex::triangle(x(u, a), x(w, a), v[a]));
        }
        (_, 1) => {
            let (u, a, b, c) = (ins[0], outs[0], outs[1], outs[2]);
            let (pua, pub_, puc) = (x(u, a), x(u, b), x(u, c));
            out.push(Simplex::tetrahedron(v[a], pua, pub_, puc));
            out.push(Simplex::tetrahedron(v[a], pub_, puc, v[c]));
            out.push(Simplex::tetrahedron(v[a], pub_, v[c], v[b]));
        }
        (_, 2) => {
            let (u, w, a, b) = (ins[0], ins[1], outs[0], outs[1]);
            let (pua, pub_, pwa, pwb) = (x(u, a), x(u, b), x(w, a), x(w, b));
            // Same diagonal as the inner prism so the two sides match up.
            if diagonal_is_convex(&pua, &pub_, &pwa, &pwb, &v[u]) {
                out.push(Simplex::tetrahedron(v[a], pua, pwa, pwb));
                out.push(Simplex::tetrahedron(v[a], pua, pwb, pub_));
            } else {
                out.push(Simplex::tetrahedron(v[a], pua, pwa, pub_));
                out.push(Simplex::tetrahedron(v[a], pwa, pub_, pwb));
            }
            out.push(Simplex::tetrahedron(v[a], v[b], pub_, pwb));
        }
        _ => {
            let (u, w, z, a) = (ins[0], ins[1], ins[2], outs[0]);
            out.push(Simplex::tetrahedron(x(u, a), x(w, a), x(z, a), v[a]));
        }
    }
    out
}

/// Points on the sphere halfway along the arcs cut out of the element faces,
/// one per pair of crossings that share a face. Midpoints that leave the
/// element are dropped.
pub fn arc_midpoints(s: &Simplex, ball: &Ball, mask: u8) -> SmallVec<[Point; 4]> {
    let n = s.dim();
    let v = s.vertices();
    let (ins, outs) = split_mask(n, mask);
    let mut out = SmallVec::new();
    if ins.is_empty() || outs.is_empty() {
        return out;
    }
    let mut cross: SmallVec<[(usize, usize, Point); 4]> = SmallVec::new();
    for &i in &ins {
        for &o in &outs {
            cross.push((i, o, crossing(s, ball, i, o)));
        }
    }
    let c = ball.center;
    for k in 0..cross.len() {
        for l in k + 1..cross.len() {
            let (i0, o0, p0) = cross[k];
            let (i1, o1, p1) = cross[l];
            let mut verts: SmallVec<[usize; 4]> = SmallVec::from_slice(&[i0, o0, i1, o1]);
            verts.sort_unstable();
            verts.dedup();
            if n == 3 && verts.len() > 3 {
                continue;
            }
            let mid = 0.5 * (p0 + p1);
            let q = if n == 2 {
                let d = mid - c;
                if d.norm() == 0.0 {
                    continue;
                }
                c + ball.radius * d.normalize()
            } else {
                // Circle in the plane of the shared face.
                let nrm = (v[verts[1]] - v[verts[0]]).cross(&(v[verts[2]] - v[verts[0]])).normalize();
                let foot = c + nrm * nrm.dot(&(v[verts[0]] - c));
                let r2 = ball.radius * ball.radius - (foot - c).norm_squared();
                let d = mid - foot;
                if r2 <= 0.0 || d.norm() == 0.0 {
                    continue;
                }
                foot + r2.sqrt() * d.normalize()
            };
            if s.contains(&q, 1e-12) {
                out.push(q);
            }
        }
    }
    out
}
