//! Stiffness matrix and load vector of the nonlocal problem.
//!
//! Every interior element is visited once; at each of its quadrature points
//! the approximate ball is built and its pieces are integrated. Elements are
//! grouped in fixed chunks that workers claim from an atomic counter. Each
//! chunk sums its entries in emission order, and chunks are merged in index
//! order, so the result does not depend on the number of threads.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix3, Vector2};
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::ball_approx::{ApproxBall, BallBuilder, BallError, IntegrationPiece, Strategy};
use crate::cmap::{CMap, Region};
use crate::geometry::{ball_measure, Point, Simplex};
use crate::quadrature::{for_each_fullcap_sample, gauss_rule, integrate_simplex, McConfig, QuadratureRule};
use crate::sparse::{merge_into_rows, CsrMatrix, Triplet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("interaction layer is thinner than the horizon (ball around {center:?} leaves the mesh)")]
    LayerTooThin { center: [f64; 3] },
    #[error("point {point:?} is outside element {element}")]
    OutsideElement { element: usize, point: [f64; 3] },
    #[error("the mesh has no free degrees of freedom")]
    NoFreeDofs,
    #[error(transparent)]
    Ball(BallError),
}

impl From<BallError> for AssemblyError {
    fn from(e: BallError) -> Self {
        match e {
            BallError::BallExitsMesh { center, .. } => AssemblyError::LayerTooThin { center },
            other => AssemblyError::Ball(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `∫_{B_δ} γ = n`.
    #[default]
    Mass,
    /// `∫_{B_δ} γ |z|² = n`.
    SecondMoment,
}

/// Constant kernel `γ(x, y) = C·1[|x − y| < δ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub dim: usize,
    pub delta: f64,
    pub constant: f64,
    pub normalization: Normalization,
}

impl Kernel {
    pub fn new(dim: usize, delta: f64) -> Result<Self, AssemblyError> {
        Self::with_normalization(dim, delta, Normalization::Mass)
    }

    pub fn with_normalization(dim: usize, delta: f64, normalization: Normalization) -> Result<Self, AssemblyError> {
        if dim != 2 && dim != 3 {
            return Err(AssemblyError::BadDimension(dim));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(AssemblyError::BadHorizon(delta));
        }
        let n = dim as f64;
        let constant = match normalization {
            Normalization::Mass => n / ball_measure(dim, delta),
            // ∫_{B_δ} |z|² dz = n/(n+2) · δ² · |B_δ|
            Normalization::SecondMoment => (n + 2.0) / (delta * delta * ball_measure(dim, delta)),
        };
        Ok(Self { dim, delta, constant, normalization })
    }

    pub fn value(&self, x: &Point, y: &Point) -> f64 {
        if (x - y).norm() < self.delta {
            self.constant
        } else {
            0.0
        }
    }
}

/// Vertex numbering: free vertices (strictly inside Ω) first, then the
/// constrained ones (on ∂Ω or in Ω_I).
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    index: Vec<u32>,
    vertex: Vec<u32>,
    on_boundary: Vec<bool>,
    free: usize,
}

impl DofMap {
    pub fn new(map: &CMap) -> Self {
        let nv = map.vertex_count();
        let mut in_omega = vec![false; nv];
        let mut in_layer = vec![false; nv];
        for t in 0..map.element_count() {
            let flag = if map.region(t) == Region::Interior { &mut in_omega } else { &mut in_layer };
            for &v in map.element_vertices(t) {
                flag[v as usize] = true;
            }
        }
        let on_boundary: Vec<bool> = (0..nv).map(|v| in_omega[v] && in_layer[v]).collect();
        let mut vertex: Vec<u32> = (0..nv as u32).filter(|&v| in_omega[v as usize] && !in_layer[v as usize]).collect();
        let free = vertex.len();
        vertex.extend((0..nv as u32).filter(|&v| !(in_omega[v as usize] && !in_layer[v as usize])));
        let mut index = vec![0; nv];
        for (k, &v) in vertex.iter().enumerate() {
            index[v as usize] = k as u32;
        }
        Self { index, vertex, on_boundary, free }
    }

    /// Number of free degrees of freedom, `J_Ω`.
    pub fn free_count(&self) -> usize {
        self.free
    }

    pub fn len(&self) -> usize {
        self.vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty()
    }

    #[inline]
    pub fn index(&self, vertex: usize) -> usize {
        self.index[vertex] as usize
    }

    #[inline]
    pub fn is_free(&self, vertex: usize) -> bool {
        (self.index[vertex] as usize) < self.free
    }

    pub fn is_on_boundary(&self, vertex: usize) -> bool {
        self.on_boundary[vertex]
    }

    /// Vertex carrying dof `k`.
    pub fn vertex(&self, k: usize) -> usize {
        self.vertex[k] as usize
    }
}

/// Value and gradient of the hat function of local vertex `slot` of
/// `element` at `x`, from barycentric coordinates in global coordinates.
pub fn basis_eval(map: &CMap, element: usize, slot: usize, x: &Point) -> Result<(f64, Point), AssemblyError> {
    let s = map.simplex(element);
    let l = s.barycentric(x);
    let outside = || AssemblyError::OutsideElement { element, point: [x.x, x.y, x.z] };
    if slot > s.dim() || l[..=s.dim()].iter().any(|&v| v < -1e-10) {
        return Err(outside());
    }
    let v = s.vertices();
    let mut grads = [Point::zeros(); 4];
    if s.dim() == 2 {
        let e = Matrix2::from_columns(&[(v[1] - v[0]).xy(), (v[2] - v[0]).xy()]);
        let inv = e.try_inverse().ok_or_else(outside)?;
        for k in 1..=2 {
            let r: Vector2<f64> = inv.row(k - 1).transpose();
            grads[k] = Point::new(r.x, r.y, 0.0);
        }
    } else {
        let e = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
        let inv = e.try_inverse().ok_or_else(outside)?;
        for k in 1..=3 {
            grads[k] = inv.row(k - 1).transpose();
        }
    }
    grads[0] = -(1..=s.dim()).map(|k| grads[k]).sum::<Point>();
    Ok((l[slot], grads[slot]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyConfig {
    pub strategy: Strategy,
    pub threads: usize,
    pub mc: McConfig,
    /// Interior elements per work unit.
    pub chunk: usize,
}

impl AssemblyConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, threads: 1, mc: McConfig::default(), chunk: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AssemblyStats {
    pub elapsed: Duration,
    pub balls: usize,
    pub pieces: usize,
    pub mc_hits: usize,
}

/// `A u = b` over the free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    pub stats: AssemblyStats,
}

struct Context<'a, F, G> {
    map: &'a CMap,
    kernel: &'a Kernel,
    dofs: &'a DofMap,
    f: &'a F,
    g: &'a G,
    cfg: &'a AssemblyConfig,
    rule: &'static QuadratureRule,
    elements: Vec<usize>,
    volume: Vec<f64>,
    affine: Vec<Affine>,
    /// `g` at every vertex.
    g_vertex: Vec<f64>,
    /// `∫_E g` for interaction elements, zero for interior ones.
    g_element: Vec<f64>,
}

/// Inverse of an element's affine map, for fast barycentric coordinates.
#[derive(Clone, Copy)]
struct Affine {
    origin: Point,
    rows: [Point; 3],
}

impl Affine {
    fn new(s: &Simplex) -> Self {
        let v = s.vertices();
        let mut rows = [Point::zeros(); 3];
        if s.dim() == 2 {
            let e = Matrix2::from_columns(&[(v[1] - v[0]).xy(), (v[2] - v[0]).xy()]);
            let inv = e.try_inverse().unwrap_or_else(Matrix2::zeros);
            for k in 0..2 {
                rows[k] = Point::new(inv[(k, 0)], inv[(k, 1)], 0.0);
            }
        } else {
            let e = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
            let inv = e.try_inverse().unwrap_or_else(Matrix3::zeros);
            for k in 0..3 {
                rows[k] = inv.row(k).transpose();
            }
        }
        Self { origin: v[0], rows }
    }

    #[inline]
    fn barycentric(&self, dim: usize, y: &Point) -> [f64; 4] {
        let d = y - self.origin;
        let mut l = [0.0; 4];
        l[0] = 1.0;
        for k in 1..=dim {
            l[k] = self.rows[k - 1].dot(&d);
            l[0] -= l[k];
        }
        l
    }
}

struct ChunkResult {
    triplets: Vec<Triplet>,
    rhs: Vec<(u32, f64)>,
    stats: AssemblyStats,
}

/// Packed index of the pair `a <= b` among `n + 1` local vertices.
const PAIR: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 4, 5, 6], [2, 5, 7, 8], [3, 6, 8, 9]];

/// Sparse accumulator over vertices with a touched list.
struct Accum<T> {
    val: Vec<T>,
    mark: Vec<bool>,
    touched: Vec<u32>,
}

impl<T: Copy + Default> Accum<T> {
    fn new(n: usize) -> Self {
        Self { val: vec![T::default(); n], mark: vec![false; n], touched: Vec::new() }
    }

    #[inline]
    fn slot(&mut self, k: usize) -> &mut T {
        if !self.mark[k] {
            self.mark[k] = true;
            self.touched.push(k as u32);
        }
        &mut self.val[k]
    }

    fn drain(&mut self, mut visit: impl FnMut(usize, T)) {
        for &k in &self.touched {
            let k = k as usize;
            visit(k, self.val[k]);
            self.val[k] = T::default();
            self.mark[k] = false;
        }
        self.touched.clear();
    }
}

struct Worker<'c, 'a, F, G> {
    ctx: &'c Context<'a, F, G>,
    builder: BallBuilder,
    ball: ApproxBall,
    /// `∫ φ_a φ_b` per interior element, packed.
    cells: Accum<[f64; 10]>,
    /// `C ∫ φ_j` over the current ball, per vertex.
    first: Accum<f64>,
    /// `Σ_p w φ_a(p) C ∫ φ_j` over the current outer element, per vertex `j`.
    cross: Accum<[f64; 4]>,
    /// Matrix entries of the current chunk, summed in emission order.
    entries: FxHashMap<u64, f64>,
    rhs: Vec<(u32, f64)>,
    stats: AssemblyStats,
}

impl<'c, 'a, F, G> Worker<'c, 'a, F, G>
where
    F: Fn(&Point) -> f64,
    G: Fn(&Point) -> f64,
{
    fn new(ctx: &'c Context<'a, F, G>) -> Self {
        let nv = ctx.map.vertex_count();
        Self {
            ctx,
            builder: BallBuilder::new(ctx.map.element_count()),
            ball: ApproxBall::new(ctx.cfg.strategy),
            cells: Accum::new(ctx.map.element_count()),
            first: Accum::new(nv),
            cross: Accum::new(nv),
            entries: FxHashMap::default(),
            rhs: Vec::new(),
            stats: AssemblyStats::default(),
        }
    }

    /// Routes a contribution to `(row vi, column vj)` by dof class.
    #[inline]
    fn emit(&mut self, vi: usize, vj: usize, v: f64) {
        let dofs = self.ctx.dofs;
        if !dofs.is_free(vi) {
            return;
        }
        let i = dofs.index(vi);
        if dofs.is_free(vj) {
            *self.entries.entry((i as u64) << 32 | dofs.index(vj) as u64).or_insert(0.0) += v;
        } else {
            self.rhs.push((i as u32, -v * self.ctx.g_vertex[vj]));
        }
    }

    fn run_chunk(&mut self, chunk: usize) -> Result<ChunkResult, AssemblyError> {
        self.stats = AssemblyStats::default();
        let size = self.ctx.cfg.chunk;
        let start = chunk * size;
        let end = (start + size).min(self.ctx.elements.len());
        for k in start..end {
            let t = self.ctx.elements[k];
            if let Err(e) = self.element(t) {
                self.reset();
                return Err(e);
            }
        }
        let n = self.ctx.map.dim();
        let mut cells = std::mem::replace(&mut self.cells, Accum::new(0));
        cells.drain(|m, acc| {
            let verts = self.ctx.map.element_vertices(m);
            for a in 0..=n {
                for b in a..=n {
                    let v = acc[PAIR[a][b]];
                    let (va, vb) = (verts[a] as usize, verts[b] as usize);
                    self.emit(va, vb, v);
                    if a != b {
                        self.emit(vb, va, v);
                    }
                }
            }
        });
        self.cells = cells;
        let mut triplets: Vec<Triplet> = self
            .entries
            .drain()
            .map(|(k, v)| Triplet { i: (k >> 32) as u32, j: k as u32, v })
            .collect();
        triplets.sort_unstable_by_key(|t| (t.i, t.j));
        let mut rhs = std::mem::take(&mut self.rhs);
        rhs.sort_by_key(|e| e.0);
        rhs.dedup_by(|cur, prev| {
            if cur.0 == prev.0 {
                prev.1 += cur.1;
                true
            } else {
                false
            }
        });
        Ok(ChunkResult { triplets, rhs, stats: self.stats })
    }

    fn reset(&mut self) {
        self.cells.drain(|_, _| {});
        self.first.drain(|_, _| {});
        self.cross.drain(|_, _| {});
        self.entries.clear();
        self.rhs.clear();
    }

    /// Contributions of one interior outer element.
    fn element(&mut self, t: usize) -> Result<(), AssemblyError> {
        let ctx = self.ctx;
        let map = ctx.map;
        let n = map.dim();
        let c = ctx.kernel.constant;
        let delta = ctx.kernel.delta;
        let samples = ctx.cfg.mc.samples;
        let s = map.simplex(t);
        let mut diag = [0.0; 10];
        let mut load = [0.0; 4];
        let denom = ((n + 1) * (n + 2)) as f64;
        for (q, (p, w)) in ctx.rule.map(&s).enumerate() {
            self.builder.build(map, t, &p, delta, &mut self.ball)?;
            self.stats.balls += 1;
            self.stats.pieces += self.ball.pieces.len();
            let phi_p = s.barycentric(&p);
            let (mut vol_in, mut vol_out, mut g_out) = (0.0, 0.0, 0.0);
            let pieces = std::mem::take(&mut self.ball.pieces);
            for (k, piece) in pieces.iter().enumerate() {
                let m = piece.parent();
                let inner = map.region(m) == Region::Interior;
                let verts = map.element_vertices(m);
                match piece {
                    IntegrationPiece::WholeElement(_) | IntegrationPiece::SubSimplex(..) => {
                        let (vol, sub) = match piece {
                            IntegrationPiece::SubSimplex(sub, _) => (sub.volume(), Some(sub)),
                            _ => (ctx.volume[m], None),
                        };
                        if !inner {
                            vol_out += vol;
                            g_out += match sub {
                                Some(sub) => integrate_simplex(sub, ctx.g),
                                None => ctx.g_element[m],
                            };
                            continue;
                        }
                        vol_in += vol;
                        // Values of the parent's hat functions at the piece's vertices.
                        let mut phi = [[0.0; 4]; 4];
                        match sub {
                            None => {
                                for (a, row) in phi.iter_mut().enumerate().take(n + 1) {
                                    row[a] = 1.0;
                                }
                            }
                            Some(sub) => {
                                let parent = &ctx.affine[m];
                                for (row, y) in phi.iter_mut().zip(sub.vertices()) {
                                    *row = parent.barycentric(n, y);
                                }
                            }
                        }
                        let mut sum = [0.0; 4];
                        for row in phi.iter().take(n + 1) {
                            for a in 0..=n {
                                sum[a] += row[a];
                            }
                        }
                        let acc = self.cells.slot(m);
                        let scale = w * c * vol / denom;
                        for a in 0..=n {
                            for b in a..=n {
                                let mut dot = sum[a] * sum[b];
                                for row in phi.iter().take(n + 1) {
                                    dot += row[a] * row[b];
                                }
                                acc[PAIR[a][b]] += scale * dot;
                            }
                        }
                        for a in 0..=n {
                            *self.first.slot(verts[a] as usize) += c * vol * sum[a] / (n + 1) as f64;
                        }
                    }
                    IntegrationPiece::Fullcap(region) => {
                        let mut rng = ctx.cfg.mc.rng(t, q, k);
                        let hits = if inner {
                            let parent = &ctx.affine[m];
                            let (cells, first) = (&mut self.cells, &mut self.first);
                            for_each_fullcap_sample(region, samples, &mut rng, |y, wt| {
                                let l = parent.barycentric(n, y);
                                vol_in += wt;
                                let acc = cells.slot(m);
                                for a in 0..=n {
                                    for b in a..=n {
                                        acc[PAIR[a][b]] += w * c * wt * l[a] * l[b];
                                    }
                                }
                                for a in 0..=n {
                                    *first.slot(verts[a] as usize) += c * wt * l[a];
                                }
                            })
                        } else {
                            for_each_fullcap_sample(region, samples, &mut rng, |y, wt| {
                                vol_out += wt;
                                g_out += wt * (ctx.g)(y);
                            })
                        };
                        self.stats.mc_hits += hits;
                    }
                }
            }
            self.ball.pieces = pieces;
            let cross = &mut self.cross;
            self.first.drain(|j, sj| {
                let r = cross.slot(j);
                for a in 0..=n {
                    r[a] += w * phi_p[a] * sj;
                }
            });
            let vol_term = w * c * (vol_in + 2.0 * vol_out);
            for a in 0..=n {
                for b in a..=n {
                    diag[PAIR[a][b]] += vol_term * phi_p[a] * phi_p[b];
                }
                load[a] += w * phi_p[a] * ((ctx.f)(&p) + 2.0 * c * g_out);
            }
        }
        let verts = map.element_vertices(t);
        let mut cross = std::mem::replace(&mut self.cross, Accum::new(0));
        cross.drain(|j, r| {
            for a in 0..=n {
                let va = verts[a] as usize;
                self.emit(va, j, -r[a]);
                self.emit(j, va, -r[a]);
            }
        });
        self.cross = cross;
        for a in 0..=n {
            let va = verts[a] as usize;
            for b in a..=n {
                let vb = verts[b] as usize;
                self.emit(va, vb, diag[PAIR[a][b]]);
                if a != b {
                    self.emit(vb, va, diag[PAIR[a][b]]);
                }
            }
            if ctx.dofs.is_free(va) {
                self.rhs.push((ctx.dofs.index(va) as u32, load[a]));
            }
        }
        Ok(())
    }
}

/// Assembles the linear system for source `f` and volume constraint `g`.
pub fn assemble<F, G>(
    map: &CMap,
    kernel: &Kernel,
    f: F,
    g: G,
    cfg: &AssemblyConfig,
) -> Result<LinearSystem, AssemblyError>
where
    F: Fn(&Point) -> f64 + Sync,
    G: Fn(&Point) -> f64 + Sync,
{
    let started = Instant::now();
    if kernel.dim != map.dim() {
        return Err(AssemblyError::BadDimension(kernel.dim));
    }
    let dofs = DofMap::new(map);
    let n_free = dofs.free_count();
    if n_free == 0 {
        return Err(AssemblyError::NoFreeDofs);
    }
    let elements: Vec<usize> = (0..map.element_count()).filter(|&t| map.region(t) == Region::Interior).collect();
    let cfg = AssemblyConfig { chunk: cfg.chunk.max(1), threads: cfg.threads.max(1), ..*cfg };
    let ctx = Context {
        map,
        kernel,
        dofs: &dofs,
        f: &f,
        g: &g,
        cfg: &cfg,
        rule: gauss_rule(map.dim()).map_err(|_| AssemblyError::BadDimension(map.dim()))?,
        elements,
        volume: (0..map.element_count()).map(|t| map.simplex(t).volume()).collect(),
        affine: (0..map.element_count()).map(|t| Affine::new(&map.simplex(t))).collect(),
        g_vertex: map.coords().iter().map(&g).collect(),
        g_element: (0..map.element_count())
            .map(|t| if map.region(t) == Region::Interior { 0.0 } else { integrate_simplex(&map.simplex(t), &g) })
            .collect(),
    };
    let n_chunks = ctx.elements.len().div_ceil(cfg.chunk);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_free];
    let mut rhs = vec![0.0; n_free];
    let mut stats = AssemblyStats::default();
    let mut failure = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..cfg.threads.min(n_chunks.max(1)) {
            let tx = tx.clone();
            let (ctx, next, abort) = (&ctx, &next, &abort);
            scope.spawn(move || {
                let mut worker = Worker::new(ctx);
                while !abort.load(Ordering::Relaxed) {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    if k >= n_chunks {
                        break;
                    }
                    let r = worker.run_chunk(k);
                    if r.is_err() {
                        abort.store(true, Ordering::Relaxed);
                    }
                    if tx.send((k, r)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (k, r) in rx {
            pending.insert(k, r);
            while let Some(r) = pending.remove(&expected) {
                expected += 1;
                if failure.is_some() {
                    continue;
                }
                match r {
                    Ok(chunk) => {
                        merge_into_rows(&mut rows, &chunk.triplets);
                        for (i, v) in chunk.rhs {
                            rhs[i as usize] += v;
                        }
                        stats.balls += chunk.stats.balls;
                        stats.pieces += chunk.stats.pieces;
                        stats.mc_hits += chunk.stats.mc_hits;
                    }
                    Err(e) => failure = Some(e),
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    stats.elapsed = started.elapsed();
    Ok(LinearSystem { matrix: CsrMatrix::from_rows(rows), rhs, dofs, stats })
}
