//! Approximate interaction balls assembled from mesh elements.
//!
//! A breadth-first walk over facet neighbours collects every element that
//! meets `B_δ(p)`; the chosen [`Strategy`] decides which part of each element
//! stands in for its intersection with the ball.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmap::{facet_slots, CMap};
use crate::geometry::{
    arc_midpoints, classification_from_mask, closest_point_segment, crossings_from_mask, closest_point_triangle, convex_hull,
    distance_point_simplex, inner_pieces, inside_mask, outer_pieces, triangulate_polytope, Ball, Classification,
    FullcapRegion, GeometryError, Point, Simplex,
};
use crate::quadrature::{mc_integrate_fullcap, mc_sample_simplex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Inside,
    Overlap,
    Barycenter,
    Nocaps,
    Approxcaps,
    Fullcaps,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Inside,
        Strategy::Overlap,
        Strategy::Barycenter,
        Strategy::Nocaps,
        Strategy::Approxcaps,
        Strategy::Fullcaps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Inside => "inside",
            Strategy::Overlap => "overlap",
            Strategy::Barycenter => "barycenter",
            Strategy::Nocaps => "nocaps",
            Strategy::Approxcaps => "approxcaps",
            Strategy::Fullcaps => "fullcaps",
        }
    }

    /// Whether pieces are produced deterministically (no Monte Carlo).
    pub fn is_deterministic(self) -> bool {
        self != Strategy::Fullcaps
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BallError {
    #[error("point {0:?} is not in the seed element")]
    SeedMismatch([f64; 3]),
    #[error("ball around {center:?} leaves the mesh at element {element} (interaction layer thinner than the horizon)")]
    BallExitsMesh { center: [f64; 3], element: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One integration region of an approximate ball, tied to its parent element.
#[derive(Debug, Clone, PartialEq)]
pub enum IntegrationPiece {
    WholeElement(usize),
    SubSimplex(Simplex, usize),
    Fullcap(FullcapRegion),
}

impl IntegrationPiece {
    pub fn parent(&self) -> usize {
        match self {
            IntegrationPiece::WholeElement(t) => *t,
            IntegrationPiece::SubSimplex(_, t) => *t,
            IntegrationPiece::Fullcap(r) => r.parent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxBall {
    pub center: Point,
    pub radius: f64,
    pub strategy: Strategy,
    pub pieces: Vec<IntegrationPiece>,
}

impl ApproxBall {
    pub fn new(strategy: Strategy) -> Self {
        Self { center: Point::zeros(), radius: 0.0, strategy, pieces: Vec::new() }
    }
}

/// Reusable search state; one per worker thread.
#[derive(Debug, Clone)]
pub struct BallBuilder {
    stamp: Vec<u32>,
    epoch: u32,
    queue: VecDeque<(usize, Simplex)>,
}

impl BallBuilder {
    pub fn new(element_count: usize) -> Self {
        Self { stamp: vec![0; element_count], epoch: 0, queue: VecDeque::new() }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Fills `out` with the approximate ball `B_{δ,h}(p)` grown from `seed`.
    pub fn build(
        &mut self,
        map: &CMap,
        seed: usize,
        p: &Point,
        delta: f64,
        out: &mut ApproxBall,
    ) -> Result<(), BallError> {
        let ball = Ball::new(*p, delta)?;
        let seed_simplex = map.simplex(seed);
        if !seed_simplex.contains(p, 1e-10) {
            return Err(BallError::SeedMismatch([p.x, p.y, p.z]));
        }
        out.center = *p;
        out.radius = delta;
        out.pieces.clear();
        let dim = map.dim();
        let reach = delta - ball.eps();
        self.next_epoch();
        self.queue.clear();
        self.queue.push_back((seed, seed_simplex));
        self.stamp[seed] = self.epoch;
        while let Some((t, s)) = self.queue.pop_front() {
            emit(out, &s, t, &ball)?;
            let nb = map.facet_neighbors(t);
            for f in 0..=dim {
                let u = nb[f];
                if u == u32::MAX {
                    if facet_distance(&s, f, p) < reach {
                        return Err(BallError::BallExitsMesh { center: [p.x, p.y, p.z], element: t });
                    }
                    continue;
                }
                let u = u as usize;
                if self.stamp[u] == self.epoch {
                    continue;
                }
                self.stamp[u] = self.epoch;
                let su = map.simplex(u);
                if meets_ball(p, reach, &su) {
                    self.queue.push_back((u, su));
                }
            }
        }
        Ok(())
    }
}

/// `dist(p, s) < reach`, with cheap vertex and bounding-sphere tests first.
#[inline]
fn meets_ball(p: &Point, reach: f64, s: &Simplex) -> bool {
    let v = s.vertices();
    if v.iter().any(|x| (x - p).norm_squared() < reach * reach) {
        return true;
    }
    let c = s.barycenter();
    let rad = v.iter().map(|x| (x - c).norm()).fold(0.0, f64::max);
    if (p - c).norm() - rad >= reach {
        return false;
    }
    distance_point_simplex(p, s) < reach
}

fn facet_distance(s: &Simplex, f: usize, p: &Point) -> f64 {
    let v = s.vertices();
    let slots = facet_slots(s.dim(), f);
    let q = if slots.len() == 2 {
        closest_point_segment(p, &v[slots[0]], &v[slots[1]])
    } else {
        closest_point_triangle(p, &v[slots[0]], &v[slots[1]], &v[slots[2]])
    };
    (q - p).norm()
}

/// Pieces contributed by one element that meets the ball.
fn emit(out: &mut ApproxBall, s: &Simplex, t: usize, ball: &Ball) -> Result<(), BallError> {
    let dim = s.dim();
    let mask = inside_mask(s, ball);
    let class = classification_from_mask(dim, mask);
    let pieces = &mut out.pieces;
    match out.strategy {
        Strategy::Inside => {
            if class == Classification::Inside {
                pieces.push(IntegrationPiece::WholeElement(t));
            }
        }
        Strategy::Overlap => pieces.push(IntegrationPiece::WholeElement(t)),
        Strategy::Barycenter => {
            if ball.contains(&s.barycenter()) {
                pieces.push(IntegrationPiece::WholeElement(t));
            }
        }
        Strategy::Nocaps | Strategy::Approxcaps | Strategy::Fullcaps => match class {
            Classification::Inside => pieces.push(IntegrationPiece::WholeElement(t)),
            Classification::Straddle(_) => {
                let mids = if out.strategy == Strategy::Approxcaps {
                    arc_midpoints(s, ball, mask)
                } else {
                    Default::default()
                };
                if mids.is_empty() {
                    for q in inner_pieces(s, ball, mask) {
                        pieces.push(IntegrationPiece::SubSimplex(q, t));
                    }
                } else {
                    let v = s.vertices();
                    let mut pts: Vec<Point> = (0..=dim).filter(|k| mask & (1 << k) != 0).map(|k| v[k]).collect();
                    pts.extend(crossings_from_mask(s, ball, mask).iter().map(|c| c.point));
                    pts.extend(mids);
                    match convex_hull(dim, &pts) {
                        Ok(h) => {
                            for q in triangulate_polytope(&h) {
                                pieces.push(IntegrationPiece::SubSimplex(q, t));
                            }
                        }
                        Err(_) => {
                            for q in inner_pieces(s, ball, mask) {
                                pieces.push(IntegrationPiece::SubSimplex(q, t));
                            }
                        }
                    }
                }
                if out.strategy == Strategy::Fullcaps {
                    pieces.push(IntegrationPiece::Fullcap(FullcapRegion {
                        outer: outer_pieces(s, ball, mask),
                        ball: *ball,
                        parent: t,
                    }));
                }
            }
            Classification::Outside => {
                if out.strategy == Strategy::Fullcaps {
                    let mut outer = crate::geometry::PieceList::new();
                    outer.push(*s);
                    pieces.push(IntegrationPiece::Fullcap(FullcapRegion { outer, ball: *ball, parent: t }));
                }
            }
        },
    }
    Ok(())
}

/// One-shot form of [`BallBuilder::build`].
pub fn build_approx_ball(
    map: &CMap,
    seed: usize,
    p: &Point,
    delta: f64,
    strategy: Strategy,
) -> Result<ApproxBall, BallError> {
    let mut out = ApproxBall::new(strategy);
    BallBuilder::new(map.element_count()).build(map, seed, p, delta, &mut out)?;
    Ok(out)
}

/// Geometry of a piece that is not a fullcap.
pub fn piece_simplex(map: &CMap, piece: &IntegrationPiece) -> Option<Simplex> {
    match piece {
        IntegrationPiece::WholeElement(t) => Some(map.simplex(*t)),
        IntegrationPiece::SubSimplex(s, _) => Some(*s),
        IntegrationPiece::Fullcap(_) => None,
    }
}

/// Total measure of the pieces; fullcaps are estimated with `samples` draws
/// per outer simplex.
pub fn piece_volume_sum<R: Rng + ?Sized>(map: &CMap, b: &ApproxBall, samples: usize, rng: &mut R) -> f64 {
    b.pieces
        .iter()
        .map(|piece| match piece {
            IntegrationPiece::Fullcap(r) => mc_integrate_fullcap(r, |_| 1.0, samples, rng).value,
            other => piece_simplex(map, other).unwrap().volume(),
        })
        .sum()
}

/// Elements containing `p` (first match).
pub fn locate(map: &CMap, p: &Point) -> Option<usize> {
    (0..map.element_count()).find(|&t| map.simplex(t).contains(p, 1e-12))
}

/// Monte Carlo estimate of `|B_δ(p) Δ B_{δ,h}(p)|`.
///
/// The pieces have disjoint interiors, so the measure equals
/// `Σ|piece| - 2 Σ|piece ∩ B| + |B|`. Pieces inside the closed ball or outside
/// it contribute exactly; the others share `n_mc` samples in proportion to
/// their volume. For fullcaps only the inscribed pieces are measured.
pub fn estimate_symmetric_difference<R: Rng + ?Sized>(
    map: &CMap,
    seed: usize,
    p: &Point,
    delta: f64,
    strategy: Strategy,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64, BallError> {
    let b = build_approx_ball(map, seed, p, delta, strategy)?;
    let ball = Ball::new(*p, delta)?;
    let mut total = 0.0;
    let mut inside = 0.0;
    let mut uncertain: Vec<Simplex> = Vec::new();
    for piece in &b.pieces {
        let Some(s) = piece_simplex(map, piece) else { continue };
        let vol = s.volume();
        total += vol;
        if s.vertices().iter().all(|v| (v - p).norm() <= delta) {
            inside += vol;
        } else if distance_point_simplex(p, &s) < delta {
            uncertain.push(s);
        }
    }
    let uvol: f64 = uncertain.iter().map(|s| s.volume()).sum();
    for s in &uncertain {
        let n = ((n_mc as f64) * s.volume() / uvol).ceil().max(1.0) as usize;
        let hits = (0..n).filter(|_| ball.contains(&mc_sample_simplex(s, rng))).count();
        inside += s.volume() * hits as f64 / n as f64;
    }
    Ok(total - 2.0 * inside + ball.measure(map.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::mesh::generate_mesh;
    use crate::geometry::ball_measure;
    use rand::SeedableRng;
    use rand_pcg::Pcg64Mcg;

    fn square(res: usize, delta: f64) -> CMap {
        generate_mesh(2, res, delta).unwrap().to_cmap().unwrap()
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("exactcaps".parse::<Strategy>().is_err());
    }

    #[test]
    fn tiny_ball_overlap_is_seed_only() {
        let m = square(4, 0.3);
        let p = Point::new(0.3, 0.35, 0.0);
        let seed = locate(&m, &p).unwrap();
        let b = build_approx_ball(&m, seed, &p, 0.01, Strategy::Overlap).unwrap();
        assert_eq!(b.pieces, vec![IntegrationPiece::WholeElement(seed)]);
    }

    #[test]
    fn seed_mismatch_and_thin_layer() {
        let m = square(4, 0.3);
        let p = Point::new(0.5, 0.5, 0.0);
        let seed = locate(&m, &p).unwrap();
        let other = locate(&m, &Point::new(0.1, 0.1, 0.0)).unwrap();
        assert!(matches!(build_approx_ball(&m, other, &p, 0.1, Strategy::Nocaps), Err(BallError::SeedMismatch(_))));
        assert!(matches!(build_approx_ball(&m, seed, &p, 1.5, Strategy::Nocaps), Err(BallError::BallExitsMesh { .. })));
    }

    #[test]
    fn nocaps_area_bounds_at_a_node() {
        let (res, delta) = (20, 0.2);
        let h = 1.0 / res as f64;
        let m = square(res, delta);
        let p = Point::new(0.5, 0.5, 0.0);
        let seed = locate(&m, &p).unwrap();
        let b = build_approx_ball(&m, seed, &p, delta, Strategy::Nocaps).unwrap();
        let mut rng = Pcg64Mcg::seed_from_u64(0);
        let area = piece_volume_sum(&m, &b, 0, &mut rng);
        let hmax = h * 2f64.sqrt();
        assert!(area <= ball_measure(2, delta) + 1e-12);
        assert!(area >= ball_measure(2, delta - hmax));
    }

    #[test]
    fn every_strategy_keeps_pieces_in_their_parent() {
        let m = square(10, 0.25);
        let p = Point::new(0.43, 0.61, 0.0);
        let seed = locate(&m, &p).unwrap();
        for strategy in Strategy::ALL {
            let b = build_approx_ball(&m, seed, &p, 0.25, strategy).unwrap();
            assert!(!b.pieces.is_empty());
            let mut parents: Vec<(usize, bool)> = Vec::new();
            for piece in &b.pieces {
                let parent = m.simplex(piece.parent());
                match piece {
                    IntegrationPiece::SubSimplex(s, _) => {
                        assert!(parent.contains(&s.barycenter(), 1e-12));
                        for v in s.vertices() {
                            assert!((v - p).norm() <= 0.25 * (1.0 + 1e-10));
                        }
                    }
                    IntegrationPiece::Fullcap(r) => {
                        for s in &r.outer {
                            assert!(parent.contains(&s.barycenter(), 1e-12));
                        }
                    }
                    IntegrationPiece::WholeElement(_) => {
                        parents.push((piece.parent(), true));
                    }
                }
            }
            parents.sort_unstable();
            let n = parents.len();
            parents.dedup();
            assert_eq!(parents.len(), n, "{strategy}: an element was emitted twice");
        }
    }
}
