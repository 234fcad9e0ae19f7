use super::{Point, Simplex};

pub fn closest_point_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / denom).clamp(0.0, 1.0);
    a + t * ab
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + v * ab;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + w * ac;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Euclidean distance from `p` to the closed simplex `s` (zero inside).
pub fn distance_point_simplex(p: &Point, s: &Simplex) -> f64 {
    let v = s.vertices();
    let l = s.barycentric(p);
    if l[..=s.dim()].iter().all(|&x| x >= 0.0) {
        return 0.0;
    }
    match s.dim() {
        2 => (closest_point_triangle(p, &v[0], &v[1], &v[2]) - p).norm(),
        _ => {
            // Only faces whose opposite barycentric coordinate is negative can be nearest.
            let mut best = f64::INFINITY;
            for k in 0..4 {
                if l[k] >= 0.0 {
                    continue;
                }
                let (a, b, c) = match k {
                    0 => (v[1], v[2], v[3]),
                    1 => (v[0], v[2], v[3]),
                    2 => (v[0], v[1], v[3]),
                    _ => (v[0], v[1], v[2]),
                };
                best = best.min((closest_point_triangle(p, &a, &b, &c) - p).norm_squared());
            }
            best.sqrt()
        }
    }
}
