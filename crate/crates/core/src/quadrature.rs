//! Quadrature rules on simplices and Monte Carlo integration over fullcaps.

use std::sync::OnceLock;

use rand::Rng;
use rand_pcg::Pcg64Mcg;
use thiserror::Error;

use crate::geometry::{FullcapRegion, Point, Simplex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuadratureError {
    #[error("no quadrature rule for dimension {0}")]
    UnsupportedDimension(usize),
}

/// Barycentric points with weights normalised to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and volume-scaled weights on `s`.
    pub fn map<'a>(&'a self, s: &'a Simplex) -> impl Iterator<Item = (Point, f64)> + 'a {
        let vol = s.volume();
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(l, w)| (s.point_at(&l[..=s.dim()]), w * vol))
    }
}

fn edge_midpoint_rule() -> QuadratureRule {
    QuadratureRule {
        dim: 2,
        points: vec![[0.5, 0.5, 0.0, 0.0], [0.0, 0.5, 0.5, 0.0], [0.5, 0.0, 0.5, 0.0]],
        weights: vec![1.0 / 3.0; 3],
    }
}

fn tet_four_point_rule() -> QuadratureRule {
    let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
    let b = (5.0 - 5f64.sqrt()) / 20.0;
    QuadratureRule {
        dim: 3,
        points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
        weights: vec![0.25; 4],
    }
}

/// Degree-2 rule: three edge midpoints on triangles, the symmetric
/// four-point rule on tetrahedra.
pub fn gauss_rule(dim: usize) -> Result<&'static QuadratureRule, QuadratureError> {
    static TRI: OnceLock<QuadratureRule> = OnceLock::new();
    static TET: OnceLock<QuadratureRule> = OnceLock::new();
    match dim {
        2 => Ok(TRI.get_or_init(edge_midpoint_rule)),
        3 => Ok(TET.get_or_init(tet_four_point_rule)),
        d => Err(QuadratureError::UnsupportedDimension(d)),
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Collapsed tensor Gauss-Legendre rule with `q` points per direction; exact
/// for total degree `2q - 1 - (dim - 1)` and above.
pub fn collapsed_rule(dim: usize, q: usize) -> Result<QuadratureRule, QuadratureError> {
    let (x, w) = gauss_legendre(q);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        2 => {
            for i in 0..q {
                for j in 0..q {
                    let u = x[i];
                    let v = x[j] * (1.0 - u);
                    points.push([1.0 - u - v, u, v, 0.0]);
                    weights.push(2.0 * w[i] * w[j] * (1.0 - u));
                }
            }
        }
        3 => {
            for i in 0..q {
                for j in 0..q {
                    for k in 0..q {
                        let u = x[i];
                        let v = x[j] * (1.0 - u);
                        let t = x[k] * (1.0 - u - v);
                        points.push([1.0 - u - v - t, u, v, t]);
                        weights.push(6.0 * w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - x[j]));
                    }
                }
            }
        }
        d => return Err(QuadratureError::UnsupportedDimension(d)),
    }
    Ok(QuadratureRule { dim, points, weights })
}

/// Rule used for error norms (exact to degree 7 in both dimensions).
pub fn error_rule(dim: usize) -> Result<&'static QuadratureRule, QuadratureError> {
    static TRI: OnceLock<QuadratureRule> = OnceLock::new();
    static TET: OnceLock<QuadratureRule> = OnceLock::new();
    match dim {
        2 => Ok(TRI.get_or_init(|| collapsed_rule(2, 5).unwrap())),
        3 => Ok(TET.get_or_init(|| collapsed_rule(3, 5).unwrap())),
        d => Err(QuadratureError::UnsupportedDimension(d)),
    }
}

pub fn integrate_with(rule: &QuadratureRule, s: &Simplex, mut f: impl FnMut(&Point) -> f64) -> f64 {
    rule.map(s).map(|(p, w)| w * f(&p)).sum()
}

/// Degree-2 quadrature of `f` over `s`.
pub fn integrate_simplex(s: &Simplex, f: impl FnMut(&Point) -> f64) -> f64 {
    let rule = gauss_rule(s.dim()).expect("simplices are 2D or 3D");
    integrate_with(rule, s, f)
}

/// A uniformly distributed point of `s`, from sorted-uniform spacings.
pub fn mc_sample_simplex<R: Rng + ?Sized>(s: &Simplex, rng: &mut R) -> Point {
    let n = s.dim();
    let mut u = [0.0f64; 5];
    for k in 1..=n {
        u[k] = rng.gen::<f64>();
    }
    u[n + 1] = 1.0;
    u[1..=n].sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let mut l = [0.0; 4];
    for k in 0..=n {
        l[k] = u[k + 1] - u[k];
    }
    s.point_at(&l[..=n])
}

/// Monte Carlo settings: samples per outer simplex and the global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 200, seed: 0 }
    }
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the sample stream for one (element, quadrature point, piece) task.
pub fn task_seed(global: u64, element: usize, qp: usize, piece: usize) -> u64 {
    let mut h = splitmix(global);
    for x in [element as u64, qp as u64, piece as u64] {
        h = splitmix(h ^ x);
    }
    h
}

impl McConfig {
    pub fn rng(&self, element: usize, qp: usize, piece: usize) -> Pcg64Mcg {
        Pcg64Mcg::new(u128::from(task_seed(self.seed, element, qp, piece)) | 1 << 64)
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub hits: usize,
}

/// Calls `visit(p, w)` for every sample `p` that lands in the region, with
/// `w = vol(T) / N` for the outer simplex `T` it was drawn from. Returns the
/// number of hits.
pub fn for_each_fullcap_sample<R: Rng + ?Sized>(
    r: &FullcapRegion,
    samples: usize,
    rng: &mut R,
    mut visit: impl FnMut(&Point, f64),
) -> usize {
    let mut hits = 0;
    for t in &r.outer {
        let w = t.volume() / samples as f64;
        for _ in 0..samples {
            let p = mc_sample_simplex(t, rng);
            if r.contains(&p) {
                hits += 1;
                visit(&p, w);
            }
        }
    }
    hits
}

/// Unbiased estimate of `∫_{(∪ outer) ∩ ball} f`.
pub fn mc_integrate_fullcap<R: Rng + ?Sized>(
    r: &FullcapRegion,
    mut f: impl FnMut(&Point) -> f64,
    samples: usize,
    rng: &mut R,
) -> McEstimate {
    let mut value = 0.0;
    let mut var = 0.0;
    let mut hits = 0;
    for t in &r.outer {
        let vol = t.volume();
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let p = mc_sample_simplex(t, rng);
            if r.contains(&p) {
                hits += 1;
                let y = f(&p);
                s1 += y;
                s2 += y * y;
            }
        }
        let n = samples as f64;
        let mean = s1 / n;
        value += vol * mean;
        if samples > 1 {
            let sample_var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
            var += vol * vol * sample_var / n;
        }
    }
    McEstimate { value, std_error: var.sqrt(), samples: samples * r.outer.len(), hits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, PieceList};
    use rand::SeedableRng;

    fn factorial(k: u32) -> f64 {
        (1..=k).map(f64::from).product()
    }

    fn reference(dim: usize) -> Simplex {
        let mut v = vec![Point::zeros(), Point::x(), Point::y()];
        if dim == 3 {
            v.push(Point::z());
        }
        Simplex::new(dim, &v).unwrap()
    }

    fn monomial(p: &Point, e: [u32; 3]) -> f64 {
        p.x.powi(e[0] as i32) * p.y.powi(e[1] as i32) * p.z.powi(e[2] as i32)
    }

    #[test]
    fn reference_examples() {
        let t = reference(3);
        assert!((integrate_simplex(&t, |_| 1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((integrate_simplex(&t, |p| p.x * p.x) - 1.0 / 60.0).abs() < 1e-15);
        let tri = reference(2);
        assert!((integrate_simplex(&tri, |p| p.x * p.y) - 1.0 / 24.0).abs() < 1e-15);
        assert!(gauss_rule(4).is_err());
    }

    #[test]
    fn rules_exact_on_reference_monomials() {
        for dim in [2usize, 3] {
            let s = reference(dim);
            let zmax = if dim == 3 { 7 } else { 0 };
            for a in 0..=7u32 {
                for b in 0..=7 - a {
                    for c in 0..=zmax.min(7 - a - b) {
                        let exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + dim as u32);
                        let deg = a + b + c;
                        if deg <= 2 {
                            let got = integrate_simplex(&s, |p| monomial(p, [a, b, c]));
                            assert!((got - exact).abs() <= 1e-15, "{dim}D x^{a}y^{b}z^{c}");
                        }
                        let got = integrate_with(error_rule(dim).unwrap(), &s, |p| monomial(p, [a, b, c]));
                        assert!((got - exact).abs() <= 1e-14 * exact.max(1e-3), "{dim}D x^{a}y^{b}z^{c}: {got} vs {exact}");
                    }
                }
            }
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for dim in [2, 3] {
            let s: f64 = error_rule(dim).unwrap().weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            let s: f64 = gauss_rule(dim).unwrap().weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_mean_is_centroid() {
        let t = reference(3);
        let mut rng = Pcg64Mcg::seed_from_u64(1);
        let n = 1_000_000;
        let mut mean = Point::zeros();
        for _ in 0..n {
            mean += mc_sample_simplex(&t, &mut rng);
        }
        mean /= n as f64;
        // Each coordinate of a uniform point in the reference tet has variance 3/80.
        let sigma = (3.0f64 / 80.0 / n as f64).sqrt();
        for k in 0..3 {
            assert!((mean[k] - 0.25).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn sub_simplex_hit_frequencies() {
        // The reference triangle split at the midpoint of its hypotenuse.
        let t = reference(2);
        let m = Point::new(0.5, 0.5, 0.0);
        let halves = [Simplex::triangle(Point::zeros(), Point::x(), m), Simplex::triangle(Point::zeros(), m, Point::y())];
        let corner = Simplex::triangle(Point::zeros(), Point::new(0.5, 0.0, 0.0), Point::new(0.0, 0.5, 0.0));
        let mut rng = Pcg64Mcg::seed_from_u64(2);
        let n = 200_000;
        let (mut h0, mut hc) = (0usize, 0usize);
        for _ in 0..n {
            let p = mc_sample_simplex(&t, &mut rng);
            if halves[0].contains(&p, 0.0) {
                h0 += 1;
            }
            if corner.contains(&p, 0.0) {
                hc += 1;
            }
        }
        for (count, frac) in [(h0, 0.5), (hc, 0.25)] {
            let sigma = (frac * (1.0 - frac) / n as f64).sqrt();
            assert!((count as f64 / n as f64 - frac).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let cfg = McConfig { samples: 10, seed: 99 };
        let t = reference(3);
        let a: Vec<Point> = (0..20).map({
            let mut r = cfg.rng(3, 1, 2);
            move |_| mc_sample_simplex(&t, &mut r)
        }).collect();
        let b: Vec<Point> = (0..20).map({
            let mut r = cfg.rng(3, 1, 2);
            move |_| mc_sample_simplex(&t, &mut r)
        }).collect();
        assert_eq!(a, b);
        assert_ne!(task_seed(99, 3, 1, 2), task_seed(99, 3, 2, 1));
    }

    #[test]
    fn fullcap_trivial_cases() {
        let t = reference(3);
        let mut rng = Pcg64Mcg::seed_from_u64(5);
        let mut outer = PieceList::new();
        outer.push(t);
        let inside = FullcapRegion { outer: outer.clone(), ball: Ball::new(Point::zeros(), 5.0).unwrap(), parent: 0 };
        let est = mc_integrate_fullcap(&inside, |_| 1.0, 1000, &mut rng);
        assert!((est.value - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(est.std_error, 0.0);
        let far = FullcapRegion { outer, ball: Ball::new(Point::new(9.0, 0.0, 0.0), 1.0).unwrap(), parent: 0 };
        assert_eq!(mc_integrate_fullcap(&far, |_| 1.0, 1000, &mut rng).value, 0.0);
    }
}
