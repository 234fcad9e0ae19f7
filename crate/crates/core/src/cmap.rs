//! Combinatorial maps over simplicial meshes in two and three dimensions.
//!
//! Darts follow the usual simplex layout. A triangle owns three darts, one per
//! edge, running counter-clockwise with respect to the propagated orientation.
//! A tetrahedron owns twelve: three per face, each face traversed so that its
//! normal points out of the tetrahedron. Darts are numbered `3t + k` in 2D
//! and `12t + 3f + k` in 3D.
//!
//! `β1` steps to the next dart of the same face, `β2` (3D) to the dart of the
//! neighbouring face of the same tetrahedron that shares the edge, and `βn`
//! to the matching dart of the adjacent element, or [`NULL`] on the boundary.

use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::geometry::{Point, Simplex};

pub type DartId = u32;

/// Stands for the empty dart ε.
pub const NULL: DartId = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub dim: u8,
    pub index: u32,
}

impl CellId {
    pub fn new(dim: usize, index: usize) -> Self {
        Self { dim: dim as u8, index: index as u32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Interior = 0,
    Interaction = 1,
}

impl Region {
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Region::Interior),
            1 => Some(Region::Interaction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CMapError {
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("simplex {simplex} references vertex {index}, but there are only {count} vertices")]
    BadIndex { simplex: usize, index: usize, count: usize },
    #[error("simplex {simplex} repeats a vertex")]
    RepeatedVertex { simplex: usize },
    #[error("{expected} region tags expected, got {got}")]
    TagCount { expected: usize, got: usize },
    #[error("facet {facet:?} is shared by more than two simplices")]
    NonManifold { facet: Vec<u32> },
    #[error("vertex {0} is not referenced by any simplex")]
    DanglingVertex(usize),
    #[error("mesh is not orientable (conflict at simplex {simplex})")]
    NonOrientable { simplex: usize },
    #[error("the null dart has no orbit")]
    NullDart,
    #[error("expected a {expected}-cell, got a {got}-cell")]
    WrongDimension { expected: usize, got: usize },
}

/// Generator sets for [`CMap::orbit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generators {
    /// `{βi ∘ βj : i < j}`: the darts of a vertex.
    Vertex,
    /// All `βj` with `j != i`: the darts of an `i`-cell, `i >= 1`.
    Cell(usize),
}

/// One broken law found by [`CMap::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub law: Law,
    pub dart: Option<DartId>,
    pub cell: Option<CellId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    /// `β1` is not a permutation of the darts.
    Beta1Permutation,
    /// `βi`, `2 <= i < n`, is undefined at a dart.
    Undefined,
    /// `βi(βi(d)) != d`.
    Involution,
    /// `βi(d) == d`.
    FixedPoint,
    /// `βn(d)` is null although the facet is interior, or the other way round.
    BoundaryMismatch,
    /// `cell[i - 1]` is not a face of `cell[i]`.
    FaceRelation,
    /// Linked darts disagree on a cell they should share.
    LinkedCells,
    /// The representative dart of a cell does not belong to it.
    Representative,
    /// A facet is incident to more than two top cells.
    NonManifold,
}

// Outward faces of a positively ordered tetrahedron; face f is opposite vertex f.
const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// `β2` inside one tetrahedron, as local dart indices `3f + k`.
fn tet_beta2_table() -> [usize; 12] {
    let mut table = [0; 12];
    for f in 0..4 {
        for k in 0..3 {
            let a = TET_FACES[f][k];
            let b = TET_FACES[f][(k + 1) % 3];
            'search: for g in 0..4 {
                if g == f {
                    continue;
                }
                for l in 0..3 {
                    if TET_FACES[g][l] == b && TET_FACES[g][(l + 1) % 3] == a {
                        table[3 * f + k] = 3 * g + l;
                        break 'search;
                    }
                }
            }
        }
    }
    table
}

/// Local vertex slots of facet `f` of an oriented simplex.
pub fn facet_slots(dim: usize, f: usize) -> &'static [usize] {
    const TRI_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];
    if dim == 2 {
        &TRI_EDGES[f]
    } else {
        &TET_FACES[f]
    }
}

/// Facets of an oriented simplex, in dart order.
fn facets(dim: usize, v: &[u32; 4]) -> SmallVec<[[u32; 3]; 4]> {
    let mut out = SmallVec::new();
    if dim == 2 {
        for k in 0..3 {
            out.push([v[k], v[(k + 1) % 3], u32::MAX]);
        }
    } else {
        for f in TET_FACES {
            out.push([v[f[0]], v[f[1]], v[f[2]]]);
        }
    }
    out
}

fn sorted_key(dim: usize, f: &[u32; 3]) -> [u32; 3] {
    let mut k = *f;
    k[..dim].sort_unstable();
    k
}

/// Parity of the permutation sorting the first `len` entries.
fn parity(f: &[u32; 3], len: usize) -> bool {
    let mut p = false;
    for i in 0..len {
        for j in i + 1..len {
            if f[i] > f[j] {
                p = !p;
            }
        }
    }
    p
}

/// For every element and local facet, the adjacent element and its local facet.
fn facet_adjacency(dim: usize, elements: &[[u32; 4]]) -> Result<Vec<[(u32, u8); 4]>, CMapError> {
    let mut facet_of: FxHashMap<[u32; 3], (u32, u8, u32, u8)> = FxHashMap::default();
    facet_of.reserve(elements.len() * (dim + 1));
    for (t, e) in elements.iter().enumerate() {
        for (f, fv) in facets(dim, e).iter().enumerate() {
            let key = sorted_key(dim, fv);
            match facet_of.get_mut(&key) {
                None => {
                    facet_of.insert(key, (t as u32, f as u8, u32::MAX, 0));
                }
                Some(entry) if entry.2 == u32::MAX => {
                    entry.2 = t as u32;
                    entry.3 = f as u8;
                }
                Some(_) => return Err(CMapError::NonManifold { facet: key[..dim].to_vec() }),
            }
        }
    }
    let mut adjacent = vec![[(u32::MAX, 0u8); 4]; elements.len()];
    for &(t1, f1, t2, f2) in facet_of.values() {
        if t2 != u32::MAX {
            adjacent[t1 as usize][f1 as usize] = (t2, f2);
            adjacent[t2 as usize][f2 as usize] = (t1, f1);
        }
    }
    Ok(adjacent)
}

/// A combinatorial map of a simplicial mesh with vertex coordinates and
/// element region tags.
#[derive(Debug, Clone, PartialEq)]
pub struct CMap {
    dim: usize,
    /// `beta[i - 1][d]` for `i = 1..=n`.
    beta: Vec<Vec<DartId>>,
    beta1_inv: Vec<DartId>,
    /// `cell[i][d]` for `i = 0..=n`.
    cell: Vec<Vec<u32>>,
    /// Representative dart per cell, per dimension.
    rep: Vec<Vec<DartId>>,
    coords: Vec<Point>,
    /// Oriented vertex lists of the top cells.
    elements: Vec<[u32; 4]>,
    edges: Vec<[u32; 2]>,
    faces: Vec<[u32; 3]>,
    tags: Vec<Region>,
    interior_count: usize,
}

/// Builds the combinatorial map of a simplicial mesh.
pub fn build_cmap<S: AsRef<[usize]>>(
    dim: usize,
    vertices: &[Point],
    simplices: &[S],
    region_tags: &[Region],
) -> Result<CMap, CMapError> {
    if dim != 2 && dim != 3 {
        return Err(CMapError::BadDimension(dim));
    }
    if region_tags.len() != simplices.len() {
        return Err(CMapError::TagCount { expected: simplices.len(), got: region_tags.len() });
    }
    let nv = vertices.len();
    let mut used = vec![false; nv];
    let mut elements: Vec<[u32; 4]> = Vec::with_capacity(simplices.len());
    for (t, s) in simplices.iter().enumerate() {
        let s = s.as_ref();
        if s.len() != dim + 1 {
            return Err(CMapError::BadDimension(s.len().saturating_sub(1)));
        }
        let mut e = [u32::MAX; 4];
        for (k, &i) in s.iter().enumerate() {
            if i >= nv {
                return Err(CMapError::BadIndex { simplex: t, index: i, count: nv });
            }
            used[i] = true;
            e[k] = i as u32;
        }
        for a in 0..=dim {
            for b in a + 1..=dim {
                if e[a] == e[b] {
                    return Err(CMapError::RepeatedVertex { simplex: t });
                }
            }
        }
        elements.push(e);
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(CMapError::DanglingVertex(v));
    }

    let nf = dim + 1;
    let adjacent = facet_adjacency(dim, &elements)?;

    // Propagate orientation: neighbours must induce opposite facet orders.
    // Flipping an element (swapping its last two vertices) flips the parity of
    // every facet.
    let base: Vec<SmallVec<[bool; 4]>> = elements
        .iter()
        .map(|e| facets(dim, e).iter().map(|f| parity(f, dim)).collect())
        .collect();
    let mut flip: Vec<Option<bool>> = vec![None; elements.len()];
    let mut queue = std::collections::VecDeque::new();
    for start in 0..elements.len() {
        if flip[start].is_some() {
            continue;
        }
        flip[start] = Some(false);
        queue.push_back(start);
        while let Some(t) = queue.pop_front() {
            let st = flip[t].unwrap();
            for f in 0..nf {
                let (u, g) = adjacent[t][f];
                if u == u32::MAX {
                    continue;
                }
                let u = u as usize;
                let need = !(base[t][f] ^ st) ^ base[u][g as usize];
                match flip[u] {
                    None => {
                        flip[u] = Some(need);
                        queue.push_back(u);
                    }
                    Some(s) if s != need => return Err(CMapError::NonOrientable { simplex: u }),
                    Some(_) => {}
                }
            }
        }
    }
    for (e, f) in elements.iter_mut().zip(&flip) {
        if f.unwrap() {
            e.swap(dim - 1, dim);
        }
    }
    let adjacent = facet_adjacency(dim, &elements)?;

    let per = if dim == 2 { 3 } else { 12 };
    let nd = elements.len() * per;
    let mut beta = vec![vec![NULL; nd]; dim];
    let mut beta1_inv = vec![NULL; nd];
    let mut cell = vec![vec![u32::MAX; nd]; dim + 1];
    let mut rep: Vec<Vec<DartId>> = vec![vec![NULL; nv]];
    let mut edges: Vec<[u32; 2]> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut edge_id: FxHashMap<(u32, u32), u32> = FxHashMap::default();
    let mut face_id: FxHashMap<[u32; 3], u32> = FxHashMap::default();
    let mut edge_rep = Vec::new();
    let mut face_rep = Vec::new();
    let beta2_local = tet_beta2_table();

    for (t, e) in elements.iter().enumerate() {
        let fs = facets(dim, e);
        for (f, fv) in fs.iter().enumerate() {
            let nk = if dim == 2 { 1 } else { 3 };
            for k in 0..nk {
                let local = if dim == 2 { f } else { 3 * f + k };
                let d = (per * t + local) as DartId;
                let (a, b) = if dim == 2 { (fv[0], fv[1]) } else { (fv[k], fv[(k + 1) % 3]) };
                let next = if dim == 2 { (f + 1) % 3 } else { 3 * f + (k + 1) % 3 };
                let prev = if dim == 2 { (f + 2) % 3 } else { 3 * f + (k + 2) % 3 };
                beta[0][d as usize] = (per * t + next) as DartId;
                beta1_inv[d as usize] = (per * t + prev) as DartId;
                if dim == 3 {
                    beta[1][d as usize] = (per * t + beta2_local[local]) as DartId;
                }
                cell[0][d as usize] = a;
                if rep[0][a as usize] == NULL {
                    rep[0][a as usize] = d;
                }
                let ekey = (a.min(b), a.max(b));
                let eid = *edge_id.entry(ekey).or_insert_with(|| {
                    edges.push([ekey.0, ekey.1]);
                    edge_rep.push(d);
                    (edges.len() - 1) as u32
                });
                cell[1][d as usize] = eid;
                if dim == 3 {
                    let fkey = sorted_key(3, fv);
                    let fid = *face_id.entry(fkey).or_insert_with(|| {
                        faces.push(fkey);
                        face_rep.push(d);
                        (faces.len() - 1) as u32
                    });
                    cell[2][d as usize] = fid;
                }
                cell[dim][d as usize] = t as u32;
            }
        }
    }
    // βn across shared facets.
    for (t, e) in elements.iter().enumerate() {
        let fs = facets(dim, e);
        for f in 0..nf {
            let (u, g) = adjacent[t][f];
            if u == u32::MAX {
                continue;
            }
            let (u, g) = (u as usize, g as usize);
            let other = facets(dim, &elements[u])[g];
            let nk = if dim == 2 { 1 } else { 3 };
            for k in 0..nk {
                let (a, b) = if dim == 2 { (fs[f][0], fs[f][1]) } else { (fs[f][k], fs[f][(k + 1) % 3]) };
                for l in 0..nk {
                    let (c, dd) = if dim == 2 { (other[0], other[1]) } else { (other[l], other[(l + 1) % 3]) };
                    if c == b && dd == a {
                        let d1 = per * t + if dim == 2 { f } else { 3 * f + k };
                        let d2 = per * u + if dim == 2 { g } else { 3 * g + l };
                        beta[dim - 1][d1] = d2 as DartId;
                    }
                }
            }
        }
    }
    rep.push(edge_rep);
    if dim == 3 {
        rep.push(face_rep);
    }
    rep.push((0..elements.len()).map(|t| (per * t) as DartId).collect());

    let interior_count = region_tags.iter().filter(|r| **r == Region::Interior).count();
    Ok(CMap {
        dim,
        beta,
        beta1_inv,
        cell,
        rep,
        coords: vertices.to_vec(),
        elements,
        edges,
        faces,
        tags: region_tags.to_vec(),
        interior_count,
    })
}

impl CMap {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dart_count(&self) -> usize {
        self.cell[0].len()
    }

    /// Number of `i`-cells.
    pub fn cell_count(&self, i: usize) -> usize {
        self.rep[i].len()
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn interior_element_count(&self) -> usize {
        self.interior_count
    }

    /// `βi(d)`, or [`NULL`].
    #[inline]
    pub fn beta(&self, i: usize, d: DartId) -> DartId {
        if d == NULL {
            return NULL;
        }
        self.beta[i - 1][d as usize]
    }

    #[inline]
    pub fn beta1_inv(&self, d: DartId) -> DartId {
        if d == NULL {
            return NULL;
        }
        self.beta1_inv[d as usize]
    }

    /// Overwrites one β link without maintaining any invariant.
    pub fn set_beta(&mut self, i: usize, d: DartId, target: DartId) {
        self.beta[i - 1][d as usize] = target;
        if i == 1 && target != NULL {
            self.beta1_inv[target as usize] = d;
        }
    }

    /// The `i`-cell containing dart `d`.
    #[inline]
    pub fn cell_of(&self, i: usize, d: DartId) -> CellId {
        CellId { dim: i as u8, index: self.cell[i][d as usize] }
    }

    /// Representative dart `D([c])`.
    pub fn dart_of(&self, c: CellId) -> DartId {
        self.rep[c.dim as usize][c.index as usize]
    }

    #[inline]
    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    #[inline]
    pub fn element_vertices(&self, t: usize) -> &[u32] {
        &self.elements[t][..=self.dim]
    }

    #[inline]
    pub fn region(&self, t: usize) -> Region {
        self.tags[t]
    }

    pub fn regions(&self) -> &[Region] {
        &self.tags
    }

    pub fn simplex(&self, t: usize) -> Simplex {
        let e = &self.elements[t];
        let mut v = [Point::zeros(); 4];
        for k in 0..=self.dim {
            v[k] = self.coords[e[k] as usize];
        }
        Simplex::new(self.dim, &v[..=self.dim]).expect("dimension checked at build")
    }

    /// Vertex indices of an `i`-cell.
    pub fn cell_vertices(&self, c: CellId) -> SmallVec<[u32; 4]> {
        let i = c.index as usize;
        match c.dim as usize {
            0 => SmallVec::from_slice(&[c.index]),
            1 => SmallVec::from_slice(&self.edges[i]),
            d if d == self.dim => SmallVec::from_slice(self.element_vertices(i)),
            _ => SmallVec::from_slice(&self.faces[i]),
        }
    }

    fn apply(&self, g: usize, d: DartId, inverse: bool) -> DartId {
        if g == 1 && inverse {
            self.beta1_inv(d)
        } else {
            self.beta(g, d)
        }
    }

    /// Closure of `{d}` under the generators and their inverses.
    pub fn orbit(&self, d: DartId, generators: Generators) -> Result<Vec<DartId>, CMapError> {
        if d == NULL || d as usize >= self.dart_count() {
            return Err(CMapError::NullDart);
        }
        // Each generator is a word of β indices applied right to left.
        let mut words: SmallVec<[SmallVec<[usize; 2]>; 6]> = SmallVec::new();
        match generators {
            Generators::Vertex => {
                for i in 1..=self.dim {
                    for j in i + 1..=self.dim {
                        words.push(SmallVec::from_slice(&[i, j]));
                    }
                }
            }
            Generators::Cell(c) => {
                if c == 0 || c > self.dim {
                    return Err(CMapError::WrongDimension { expected: 1, got: c });
                }
                for j in (1..=self.dim).filter(|&j| j != c) {
                    words.push(SmallVec::from_slice(&[j]));
                }
            }
        }
        let mut seen = FxHashMap::default();
        seen.insert(d, ());
        let mut stack = vec![d];
        let mut out = vec![d];
        while let Some(x) = stack.pop() {
            for w in &words {
                // Forward: apply the last letter first.
                let mut y = x;
                for &g in w.iter().rev() {
                    y = self.apply(g, y, false);
                }
                // Inverse: first letter inverted first.
                let mut z = x;
                for &g in w.iter() {
                    z = self.apply(g, z, true);
                }
                for cand in [y, z] {
                    if cand != NULL && seen.insert(cand, ()).is_none() {
                        out.push(cand);
                        stack.push(cand);
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Top cells sharing a facet with `t`, by walking the darts of one facet.
    pub fn neighbor_ncells(&self, t: CellId) -> Result<impl Iterator<Item = CellId> + '_, CMapError> {
        if t.dim as usize != self.dim {
            return Err(CMapError::WrongDimension { expected: self.dim, got: t.dim as usize });
        }
        let n = self.dim;
        let mut out: SmallVec<[CellId; 4]> = SmallVec::new();
        let d0 = self.dart_of(t);
        let mut d = d0;
        if n == 3 {
            let across = self.beta(3, d0);
            if across != NULL {
                out.push(self.cell_of(3, across));
            }
        }
        loop {
            let across = if n == 3 { self.beta(3, self.beta(2, d)) } else { self.beta(2, d) };
            if across != NULL {
                out.push(self.cell_of(n, across));
            }
            d = self.beta(1, d);
            if d == d0 || d == NULL {
                break;
            }
        }
        Ok(out.into_iter())
    }

    /// Neighbour across each local facet (`u32::MAX` on the boundary), read
    /// straight from the `βn` links of one dart per facet.
    #[inline]
    pub fn facet_neighbors(&self, t: usize) -> [u32; 4] {
        let n = self.dim;
        let mut out = [u32::MAX; 4];
        let beta_n = &self.beta[n - 1];
        for (f, slot) in out.iter_mut().enumerate().take(n + 1) {
            let d = if n == 2 { 3 * t + f } else { 12 * t + 3 * f };
            let a = beta_n[d];
            if a != NULL {
                *slot = self.cell[n][a as usize];
            }
        }
        out
    }

    /// Checks every structural law; an empty list means the map is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.dim;
        let nd = self.dart_count();
        let mut out = Vec::new();
        let mut push = |law, dart: Option<DartId>, cell: Option<CellId>| out.push(Violation { law, dart, cell });

        // β1: a permutation with consistent inverse.
        let mut hit = vec![false; nd];
        for d in 0..nd as DartId {
            let e = self.beta(1, d);
            if e == NULL || e as usize >= nd || hit[e as usize] || self.beta1_inv(e) != d {
                push(Law::Beta1Permutation, Some(d), None);
                continue;
            }
            hit[e as usize] = true;
        }

        // Inner involutions.
        for i in 2..n {
            for d in 0..nd as DartId {
                let e = self.beta(i, d);
                if e == NULL {
                    push(Law::Undefined, Some(d), None);
                } else if e == d {
                    push(Law::FixedPoint, Some(d), None);
                } else if self.beta(i, e) != d {
                    push(Law::Involution, Some(d), None);
                }
            }
        }

        // βn: mutual where defined, null exactly on the boundary.
        let mut facet_use: FxHashMap<SmallVec<[u32; 3]>, u32> = FxHashMap::default();
        for t in 0..self.element_count() {
            for f in facets(n, &self.elements[t]).iter() {
                let key = sorted_key(n, f);
                *facet_use.entry(SmallVec::from_slice(&key[..n])).or_insert(0) += 1;
            }
        }
        for c in facet_use.values() {
            if *c > 2 {
                push(Law::NonManifold, None, None);
            }
        }
        for d in 0..nd as DartId {
            let e = self.beta(n, d);
            let fv = self.facet_of_dart(d);
            let shared = facet_use.get(&fv).copied().unwrap_or(0) == 2;
            if e == NULL {
                if shared {
                    push(Law::BoundaryMismatch, Some(d), None);
                }
                continue;
            }
            if e == d {
                push(Law::FixedPoint, Some(d), None);
            } else if self.beta(n, e) != d {
                push(Law::Involution, Some(d), None);
            } else if !shared {
                push(Law::BoundaryMismatch, Some(d), None);
            } else if self.facet_of_dart(e) != fv || self.cell[0][e as usize] != self.cell[0][self.beta(1, d) as usize] {
                push(Law::LinkedCells, Some(d), None);
            }
        }

        // Face relations along each dart's cell tuple.
        for d in 0..nd as DartId {
            for i in 1..=n {
                let lower = self.cell_vertices(self.cell_of(i - 1, d));
                let upper = self.cell_vertices(self.cell_of(i, d));
                if !lower.iter().all(|v| upper.contains(v)) {
                    push(Law::FaceRelation, Some(d), Some(self.cell_of(i, d)));
                }
            }
        }

        // Representatives.
        for i in 0..=n {
            for (c, &d) in self.rep[i].iter().enumerate() {
                if d == NULL || d as usize >= nd || self.cell[i][d as usize] as usize != c {
                    push(Law::Representative, None, Some(CellId::new(i, c)));
                }
            }
        }
        out
    }

    /// Sorted vertex indices of the facet a dart lies in.
    fn facet_of_dart(&self, d: DartId) -> SmallVec<[u32; 3]> {
        let n = self.dim;
        let per = if n == 2 { 3 } else { 12 };
        let t = d as usize / per;
        let local = d as usize % per;
        let f = if n == 2 { local } else { local / 3 };
        let fv = facets(n, &self.elements[t])[f];
        SmallVec::from_slice(&sorted_key(n, &fv)[..n])
    }
}

/// Free-function form of [`CMap::validate`].
pub fn validate_cmap(m: &CMap) -> Vec<Violation> {
    m.validate()
}
