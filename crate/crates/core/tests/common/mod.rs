#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nlfem::assembly::Kernel;
use nlfem::ball_approx::{ApproxBall, IntegrationPiece, Strategy};
use nlfem::cmap::{facet_slots, CMap, Region};
use nlfem::geometry::{
    classification_from_mask, distance_point_simplex, inner_pieces, inside_mask, Ball, Classification, FullcapRegion, Point,
    Simplex,
};
use nlfem::harness::mesh::{generate_mesh, Mesh};
use nlfem::harness::problem::Polynomial;
use nlfem::quadrature::{gauss_legendre, gauss_rule, integrate_simplex, integrate_with, QuadratureRule};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

fn simplex_of(mesh: &Mesh, c: usize) -> Simplex {
    let v: Vec<Point> = mesh.cells[c].iter().map(|&k| mesh.vertices[k]).collect();
    Simplex::new(mesh.dim, &v).unwrap()
}

/// Hat function of global vertex `v` at `y`, with `y` known to lie in cell `c`.
fn hat(mesh: &Mesh, c: usize, v: usize, y: &Point) -> f64 {
    match mesh.cells[c].iter().position(|&k| k == v) {
        Some(slot) => simplex_of(mesh, c).barycentric(y)[slot],
        None => 0.0,
    }
}

/// Pieces of cell `c` standing in for its intersection with the ball.
fn reference_pieces(mesh: &Mesh, c: usize, ball: &Ball, strategy: Strategy) -> Vec<Simplex> {
    let s = simplex_of(mesh, c);
    if distance_point_simplex(&ball.center, &s) >= ball.radius - ball.eps() {
        return Vec::new();
    }
    let mask = inside_mask(&s, ball);
    let class = classification_from_mask(mesh.dim, mask);
    match strategy {
        Strategy::Overlap => vec![s],
        Strategy::Inside => {
            if class == Classification::Inside {
                vec![s]
            } else {
                Vec::new()
            }
        }
        Strategy::Barycenter => {
            if ball.contains(&s.barycenter()) {
                vec![s]
            } else {
                Vec::new()
            }
        }
        Strategy::Nocaps => match class {
            Classification::Inside => vec![s],
            Classification::Straddle(_) => inner_pieces(&s, ball, mask).into_iter().collect(),
            Classification::Outside => Vec::new(),
        },
        other => panic!("no reference for {other}"),
    }
}

/// Dense system over all vertices, from a direct double loop over every
/// (outer cell, inner cell) pair and every basis pair of the two cells.
pub struct Reference {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub free: Vec<bool>,
}

pub fn reference_system(
    mesh: &Mesh,
    kernel: &Kernel,
    f: impl Fn(&Point) -> f64,
    g: impl Fn(&Point) -> f64,
    strategy: Strategy,
) -> Reference {
    let nv = mesh.vertices.len();
    let mut free = vec![true; nv];
    let mut used = vec![false; nv];
    for (c, tag) in mesh.cells.iter().zip(&mesh.tags) {
        for &v in c {
            used[v] = true;
            if *tag == Region::Interaction {
                free[v] = false;
            }
        }
    }
    for v in 0..nv {
        free[v] &= used[v];
    }
    let mut a = vec![vec![0.0; nv]; nv];
    let mut b = vec![0.0; nv];
    let c = kernel.constant;
    let rule = gauss_rule(mesh.dim).unwrap();
    for e in 0..mesh.cells.len() {
        if mesh.tags[e] != Region::Interior {
            continue;
        }
        let se = simplex_of(mesh, e);
        for (p, w) in rule.map(&se) {
            let ball = Ball::new(p, kernel.delta).unwrap();
            for &i in &mesh.cells[e] {
                if free[i] {
                    b[i] += w * hat(mesh, e, i, &p) * f(&p);
                }
            }
            for m in 0..mesh.cells.len() {
                for piece in reference_pieces(mesh, m, &ball, strategy) {
                    if mesh.tags[m] == Region::Interior {
                        let mut pair: Vec<usize> = mesh.cells[e].iter().chain(&mesh.cells[m]).copied().collect();
                        pair.sort_unstable();
                        pair.dedup();
                        for &i in &pair {
                            if !free[i] {
                                continue;
                            }
                            for &j in &pair {
                                let val = w * c * integrate_simplex(&piece, |y| {
                                    (hat(mesh, m, j, y) - hat(mesh, e, j, &p)) * (hat(mesh, m, i, y) - hat(mesh, e, i, &p))
                                });
                                if free[j] {
                                    a[i][j] += val;
                                } else {
                                    b[i] -= val * g(&mesh.vertices[j]);
                                }
                            }
                        }
                    } else {
                        let vol = piece.volume();
                        let gint = integrate_simplex(&piece, &g);
                        for &i in &mesh.cells[e] {
                            if !free[i] {
                                continue;
                            }
                            let pi = hat(mesh, e, i, &p);
                            b[i] += w * pi * 2.0 * c * gint;
                            for &j in &mesh.cells[e] {
                                let val = w * 2.0 * c * pi * hat(mesh, e, j, &p) * vol;
                                if free[j] {
                                    a[i][j] += val;
                                } else {
                                    b[i] -= val * g(&mesh.vertices[j]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Reference { a, b, free }
}

/// Equilateral-based tetrahedron (or triangle) holding the cap of `ball`
/// beyond the plane at distance `d` from its centre along `normal`, with no
/// other part of the ball inside.
pub fn cap_container(dim: usize, ball: &Ball, normal: &Point, d: f64) -> Simplex {
    let r = ball.radius;
    let height = r - d;
    let a = (r * r - d * d).sqrt();
    let foot = ball.center + d * normal;
    // Two unit vectors spanning the plane.
    let helper = if normal.x.abs() < 0.9 { Point::x() } else { Point::y() };
    let u = (helper - normal.dot(&helper) * normal).normalize();
    let v = normal.cross(&u);
    if dim == 2 {
        // Base segment of half-length 3a on the line, apex at 3·height.
        Simplex::triangle(foot + 3.0 * a * u, foot - 3.0 * a * u, foot + 3.0 * height * normal)
    } else {
        let rho = 3.0 * a;
        let corners: Vec<Point> = (0..3)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                foot + 2.0 * rho * (th.cos() * u + th.sin() * v)
            })
            .collect();
        Simplex::tetrahedron(corners[0], corners[1], corners[2], foot + 3.0 * height * normal)
    }
}

/// Area of a circular segment or volume of a spherical cap of height `r − d`.
pub fn cap_measure(dim: usize, r: f64, d: f64) -> f64 {
    if dim == 2 {
        r * r * (d / r).acos() - d * (r * r - d * d).sqrt()
    } else {
        let h = r - d;
        std::f64::consts::PI * h * h * (3.0 * r - h) / 3.0
    }
}

/// A structured mesh with jittered coordinates, shuffled vertex and cell
/// numbering and rotated vertex lists.
pub fn scrambled_mesh(rng: &mut Pcg64Mcg) -> Mesh {
    let dim = if rng.gen_bool(0.5) { 2 } else { 3 };
    let mesh = if dim == 2 {
        let res = rng.gen_range(2..=9);
        generate_mesh(2, res, rng.gen_range(0.05..0.3)).unwrap()
    } else {
        generate_mesh(3, rng.gen_range(1..=2), 0.3).unwrap()
    };
    let h = 0.05;
    let nv = mesh.vertices.len();
    let mut perm: Vec<usize> = (0..nv).collect();
    perm.shuffle(rng);
    let mut vertices = vec![Point::zeros(); nv];
    for (old, &new) in perm.iter().enumerate() {
        let mut p = mesh.vertices[old];
        for k in 0..dim {
            p[k] += rng.gen_range(-0.1..0.1) * h;
        }
        vertices[new] = p;
    }
    let mut order: Vec<usize> = (0..mesh.cells.len()).collect();
    order.shuffle(rng);
    let mut cells = Vec::new();
    let mut tags = Vec::new();
    for &c in &order {
        let mut cell: Vec<usize> = mesh.cells[c].iter().map(|&v| perm[v]).collect();
        let r = rng.gen_range(0..cell.len());
        cell.rotate_left(r);
        cells.push(cell);
        tags.push(mesh.tags[c]);
    }
    assert!(cells.len() <= 500);
    Mesh { dim, vertices, cells, tags }
}

/// Global vertex set of the `i`-cell a dart belongs to, read from the
/// oriented element arrays and the dart layout.
pub fn dart_cell_key(m: &CMap, d: u32, i: usize) -> Vec<u32> {
    let n = m.dim();
    let per = if n == 2 { 3 } else { 12 };
    let t = d as usize / per;
    let local = d as usize % per;
    let v = m.element_vertices(t);
    let (a, b, face) = if n == 2 {
        (v[local], v[(local + 1) % 3], v.to_vec())
    } else {
        let f = facet_slots(3, local / 3);
        let k = local % 3;
        (v[f[k]], v[f[(k + 1) % 3]], f.iter().map(|&s| v[s]).collect())
    };
    let mut key = match i {
        0 => vec![a],
        1 => vec![a, b],
        _ if i == n => v.to_vec(),
        _ => face,
    };
    key.sort_unstable();
    key
}

pub fn brute_orbit(m: &CMap, d: u32, i: usize) -> Vec<u32> {
    let key = dart_cell_key(m, d, i);
    (0..m.dart_count() as u32).filter(|&e| dart_cell_key(m, e, i) == key).collect()
}

pub fn brute_neighbors(m: &CMap, t: usize) -> BTreeSet<usize> {
    let mine: BTreeSet<u32> = m.element_vertices(t).iter().copied().collect();
    (0..m.element_count())
        .filter(|&u| u != t && m.element_vertices(u).iter().filter(|v| mine.contains(v)).count() == m.dim())
        .collect()
}


pub struct Case {
    pub map: CMap,
    pub dim: usize,
    pub delta: f64,
    pub hmax: f64,
}

pub fn cases() -> Vec<Case> {
    [(2, 8, 0.3), (2, 12, 0.2), (2, 16, 0.15), (2, 20, 0.25), (3, 8, 0.3), (3, 10, 0.25)]
        .into_iter()
        .map(|(dim, res, delta)| {
            let map = generate_mesh(dim, res, delta).unwrap().to_cmap().unwrap();
            let hmax = (0..map.element_count()).map(|t| map.simplex(t).max_edge()).fold(0.0, f64::max);
            assert!(hmax < delta);
            Case { map, dim, delta, hmax }
        })
        .collect()
}

pub fn random_point(dim: usize, rng: &mut Pcg64Mcg) -> Point {
    let mut p = Point::zeros();
    for k in 0..dim {
        p[k] = rng.gen_range(0.0..1.0);
    }
    p
}

/// Uniform point of the ball of radius `r` around `c`.
pub fn in_ball(dim: usize, c: &Point, r: f64, rng: &mut Pcg64Mcg) -> Point {
    loop {
        let mut y = Point::zeros();
        for k in 0..dim {
            y[k] = rng.gen_range(-1.0..1.0);
        }
        if y.norm_squared() < 1.0 {
            return c + r * y;
        }
    }
}

pub fn covers(map: &CMap, b: &ApproxBall, y: &Point) -> bool {
    b.pieces.iter().any(|piece| match piece {
        IntegrationPiece::WholeElement(t) => map.simplex(*t).contains(y, 1e-12),
        IntegrationPiece::SubSimplex(s, _) => s.contains(y, 1e-12),
        IntegrationPiece::Fullcap(r) => r.ball.contains(y) && r.outer.iter().any(|s| s.contains(y, 1e-12)),
    })
}

pub fn piece_points(map: &CMap, b: &ApproxBall) -> Vec<Point> {
    let mut out = Vec::new();
    for piece in &b.pieces {
        match piece {
            IntegrationPiece::WholeElement(t) => out.extend_from_slice(map.simplex(*t).vertices()),
            IntegrationPiece::SubSimplex(s, _) => out.extend_from_slice(s.vertices()),
            IntegrationPiece::Fullcap(r) => r.outer.iter().for_each(|s| out.extend_from_slice(s.vertices())),
        }
    }
    out
}


/// Sum of all degree-`k` monomials in `vals`.
pub fn complete_homogeneous(vals: &[f64], k: u32) -> f64 {
    match vals {
        [] => f64::from(u8::from(k == 0)),
        [first, rest @ ..] => (0..=k).map(|j| first.powi(j as i32) * complete_homogeneous(rest, k - j)).sum(),
    }
}

pub fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Exact integral of `ℓ^k` over `s` for an affine `ℓ`, from its vertex values.
pub fn power_of_affine(s: &Simplex, ell: impl Fn(&Point) -> f64, k: u32) -> f64 {
    let n = s.dim() as u32;
    let vals: Vec<f64> = s.vertices().iter().map(&ell).collect();
    s.volume() * factorial(k) * factorial(n) / factorial(k + n) * complete_homogeneous(&vals, k)
}

pub fn random_simplex(dim: usize, rng: &mut Pcg64Mcg) -> Simplex {
    loop {
        let v: Vec<Point> = (0..=dim)
            .map(|_| {
                let mut p = Point::zeros();
                for k in 0..dim {
                    p[k] = rng.gen_range(-2.0..2.0);
                }
                p
            })
            .collect();
        let s = Simplex::new(dim, &v).unwrap();
        if s.volume() > 1e-2 {
            return s;
        }
    }
}

pub fn max_exactness_error(rule: &QuadratureRule, degree: u32, trials: usize, seed: u64) -> f64 {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let s = random_simplex(rule.dim, &mut rng);
        let a = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let b: f64 = rng.gen_range(-1.0..1.0);
        let ell = |p: &Point| {
            let mut x = b;
            for k in 0..rule.dim {
                x += a[k] * p[k];
            }
            x
        };
        for k in 0..=degree {
            let exact = power_of_affine(&s, ell, k);
            let got = integrate_with(rule, &s, |p| ell(p).powi(k as i32));
            let scale = s.volume() * s.vertices().iter().map(|v| ell(v).abs()).fold(1.0, f64::max).powi(k as i32);
            worst = worst.max((got - exact).abs() / scale);
        }
    }
    worst
}

pub fn random_cap(dim: usize, rng: &mut Pcg64Mcg) -> (FullcapRegion, f64) {
    let r = rng.gen_range(0.1..1.0);
    let center = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), if dim == 3 { rng.gen_range(-1.0..1.0) } else { 0.0 });
    let mut normal = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), if dim == 3 { rng.gen_range(-1.0..1.0) } else { 0.0 });
    normal /= normal.norm();
    let d = rng.gen_range(0.2..0.9) * r;
    let ball = Ball::new(center, r).unwrap();
    let outer = std::iter::once(cap_container(dim, &ball, &normal, d)).collect();
    (FullcapRegion { outer, ball, parent: 0 }, cap_measure(dim, r, d))
}


/// `2 C ∫_{B_δ(x)} (u(y) − u(x)) dy` by Gauss–Legendre in polar or spherical
/// coordinates; exact for polynomials of moderate degree.
pub fn spherical_oracle(u: &Polynomial, k: &Kernel, x: &Point) -> f64 {
    let (r, wr) = gauss_legendre(12);
    let (t, wt) = gauss_legendre(24);
    let ux = u.eval(x);
    let mut sum = 0.0;
    if k.dim == 2 {
        for (ri, wri) in r.iter().zip(&wr) {
            let rho = ri * k.delta;
            for (ti, wti) in t.iter().zip(&wt) {
                let th = 2.0 * PI * ti;
                let y = x + Point::new(rho * th.cos(), rho * th.sin(), 0.0);
                sum += wri * wti * (u.eval(&y) - ux) * rho * k.delta * 2.0 * PI;
            }
        }
    } else {
        for (ri, wri) in r.iter().zip(&wr) {
            let rho = ri * k.delta;
            for (pi, wpi) in t.iter().zip(&wt) {
                let ph = PI * pi;
                for (ti, wti) in t.iter().zip(&wt) {
                    let th = 2.0 * PI * ti;
                    let z = Point::new(ph.sin() * th.cos(), ph.sin() * th.sin(), ph.cos());
                    let jac = rho * rho * ph.sin() * k.delta * PI * 2.0 * PI;
                    sum += wri * wpi * wti * (u.eval(&(x + rho * z)) - ux) * jac;
                }
            }
        }
    }
    2.0 * k.constant * sum
}

/// Exact integral of the monomial `x^a y^b z^c` (total degree at most two)
/// over `s`, from vertex coordinates.
pub fn low_monomial_integral(s: &Simplex, alpha: [u32; 3]) -> f64 {
    let v = s.vertices();
    let n = s.dim() as f64;
    let axes: Vec<usize> = (0..3).flat_map(|k| std::iter::repeat_n(k, alpha[k] as usize)).collect();
    match axes[..] {
        [] => s.volume(),
        [i] => s.volume() * v.iter().map(|p| p[i]).sum::<f64>() / (n + 1.0),
        [i, j] => {
            let diag: f64 = v.iter().map(|p| p[i] * p[j]).sum();
            let si: f64 = v.iter().map(|p| p[i]).sum();
            let sj: f64 = v.iter().map(|p| p[j]).sum();
            s.volume() * (diag + si * sj) / ((n + 1.0) * (n + 2.0))
        }
        _ => panic!("degree above two"),
    }
}

/// Largest relative error of `rule` on every monomial of degree at most two
/// over `trials` random simplices.
pub fn monomial_exactness_error(rule: &QuadratureRule, trials: usize, seed: u64) -> f64 {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let dim = rule.dim;
    let mut alphas = Vec::new();
    for a in 0..=2u32 {
        for b in 0..=2 - a {
            for c in 0..=2 - a - b {
                if dim == 3 || c == 0 {
                    alphas.push([a, b, c]);
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let s = random_simplex(dim, &mut rng);
        for &alpha in &alphas {
            let exact = low_monomial_integral(&s, alpha);
            let got = integrate_with(rule, &s, |p| p.x.powi(alpha[0] as i32) * p.y.powi(alpha[1] as i32) * p.z.powi(alpha[2] as i32));
            worst = worst.max((got - exact).abs() / exact.abs().max(1e-3 * s.volume()));
        }
    }
    worst
}
