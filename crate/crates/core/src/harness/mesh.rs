//! Structured meshes of `(0, 1)^n` with an interaction layer, and a plain-text
//! mesh file format.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use crate::cmap::{build_cmap, CMap, CMapError, Region};
use crate::geometry::Point;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("bad resolution {0}: need at least one cell per unit length")]
    BadResolution(usize),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Topology(#[from] CMapError),
}

/// Plain mesh arrays: coordinates, simplices (`dim + 1` vertex indices each)
/// and region tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub tags: Vec<Region>,
}

/// Number of layer cells needed to cover a horizon `delta` at resolution `res`.
pub fn layer_cells(res: usize, delta: f64) -> usize {
    (delta * res as f64 - 1e-9).ceil().max(1.0) as usize
}

/// Structured mesh of `(0,1)^n` with `res` cells per unit length (two
/// triangles per square, six Kuhn tetrahedra per cube), surrounded by
/// interaction-layer cells at least `delta` wide.
pub fn generate_mesh(dim: usize, res: usize, delta: f64) -> Result<Mesh, MeshError> {
    if res == 0 {
        return Err(MeshError::BadResolution(res));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(MeshError::BadHorizon(delta));
    }
    if dim != 2 && dim != 3 {
        return Err(MeshError::BadDimension(dim));
    }
    let layer = layer_cells(res, delta) as i64;
    let inside = |i: i64| i >= 0 && i < res as i64;
    Ok(lattice(dim, -layer, res as i64 + layer, 1.0 / res as f64, &Point::zeros(), |c| {
        if c[..dim].iter().all(|&i| inside(i)) {
            Region::Interior
        } else {
            Region::Interaction
        }
    }))
}

/// Structured mesh of the cube `origin + [0, cells·h]^n`, every cell tagged
/// interior.
pub fn structured_box(dim: usize, origin: &Point, h: f64, cells: usize) -> Result<Mesh, MeshError> {
    if cells == 0 {
        return Err(MeshError::BadResolution(cells));
    }
    if dim != 2 && dim != 3 {
        return Err(MeshError::BadDimension(dim));
    }
    Ok(lattice(dim, 0, cells as i64, h, origin, |_| Region::Interior))
}

/// Lattice cells with integer corners in `[lo, hi]^n`, tagged by their lower corner.
fn lattice(dim: usize, lo: i64, hi: i64, h: f64, origin: &Point, tag: impl Fn([i64; 3]) -> Region) -> Mesh {
    let m = (hi - lo + 1) as usize;
    let coord = |i: i64| i as f64 * h;
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut tags = Vec::new();
    if dim == 2 {
        let id = |i: i64, j: i64| ((j - lo) as usize) * m + (i - lo) as usize;
        for j in lo..=hi {
            for i in lo..=hi {
                vertices.push(origin + Point::new(coord(i), coord(j), 0.0));
            }
        }
        for j in lo..hi {
            for i in lo..hi {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                let t = tag([i, j, 0]);
                cells.push(vec![a, b, c]);
                cells.push(vec![a, c, d]);
                tags.push(t);
                tags.push(t);
            }
        }
    } else {
        let id = |i: i64, j: i64, k: i64| (((k - lo) as usize) * m + (j - lo) as usize) * m + (i - lo) as usize;
        for k in lo..=hi {
            for j in lo..=hi {
                for i in lo..=hi {
                    vertices.push(origin + Point::new(coord(i), coord(j), coord(k)));
                }
            }
        }
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for k in lo..hi {
            for j in lo..hi {
                for i in lo..hi {
                    let t = tag([i, j, k]);
                    for p in PERMS {
                        let mut x = [i, j, k];
                        let mut tet = vec![id(x[0], x[1], x[2])];
                        for axis in p {
                            x[axis] += 1;
                            tet.push(id(x[0], x[1], x[2]));
                        }
                        cells.push(tet);
                        tags.push(t);
                    }
                }
            }
        }
    }
    Mesh { dim, vertices, cells, tags }
}

impl Mesh {
    pub fn to_cmap(&self) -> Result<CMap, CMapError> {
        build_cmap(self.dim, &self.vertices, &self.cells, &self.tags)
    }

    pub fn interior_count(&self) -> usize {
        self.tags.iter().filter(|t| **t == Region::Interior).count()
    }

    /// Mean and minimum length of the distinct edges of interior cells.
    pub fn edge_stats(&self) -> (f64, f64) {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (c, t) in self.cells.iter().zip(&self.tags) {
            if *t != Region::Interior {
                continue;
            }
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    edges.push((c[a].min(c[b]), c[a].max(c[b])));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for (a, b) in &edges {
            let l = (self.vertices[*a] - self.vertices[*b]).norm();
            sum += l;
            min = min.min(l);
        }
        (sum / edges.len() as f64, min)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), MeshError> {
        let mut s = String::new();
        writeln!(s, "nlfem-mesh v1 dim={}", self.dim).unwrap();
        writeln!(s, "vertices {}", self.vertices.len()).unwrap();
        for v in &self.vertices {
            let c: Vec<String> = v.iter().take(self.dim).map(|x| format!("{x:?}")).collect();
            writeln!(s, "{}", c.join(" ")).unwrap();
        }
        writeln!(s, "cells {}", self.cells.len()).unwrap();
        for (c, t) in self.cells.iter().zip(&self.tags) {
            let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            writeln!(s, "{} {}", ids.join(" "), *t as u8).unwrap();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, MeshError> {
        let mut lines = BufReader::new(r).lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let mut next = |what: &str| -> Result<(usize, String), MeshError> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(MeshError::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") }),
            }
        };
        let perr = |line: usize, msg: String| MeshError::Parse { line, msg };

        let (ln, header) = next("header")?;
        let dim = header
            .strip_prefix("nlfem-mesh v1 dim=")
            .and_then(|d| d.trim().parse::<usize>().ok())
            .ok_or_else(|| perr(ln, format!("bad header {header:?}")))?;
        if dim != 2 && dim != 3 {
            return Err(MeshError::BadDimension(dim));
        }
        let count = |ln: usize, line: &str, key: &str| -> Result<usize, MeshError> {
            line.strip_prefix(key)
                .and_then(|n| n.trim().parse().ok())
                .ok_or_else(|| perr(ln, format!("expected \"{key}<count>\", got {line:?}")))
        };
        let (ln, l) = next("vertex count")?;
        let nv = count(ln, &l, "vertices ")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = next("vertex")?;
            let x: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| perr(ln, e.to_string()))?;
            if x.len() != dim || x.iter().any(|c| !c.is_finite()) {
                return Err(perr(ln, format!("expected {dim} finite coordinates")));
            }
            vertices.push(Point::new(x[0], x[1], if dim == 3 { x[2] } else { 0.0 }));
        }
        let (ln, l) = next("cell count")?;
        let nc = count(ln, &l, "cells ")?;
        let mut cells = Vec::with_capacity(nc);
        let mut tags = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (ln, l) = next("cell")?;
            let x: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| perr(ln, e.to_string()))?;
            if x.len() != dim + 2 {
                return Err(perr(ln, format!("expected {} vertex indices and a tag", dim + 1)));
            }
            let tag = Region::from_tag(x[dim + 1] as u8)
                .filter(|_| x[dim + 1] <= 1)
                .ok_or_else(|| perr(ln, format!("bad region tag {}", x[dim + 1])))?;
            if let Some(&bad) = x[..=dim].iter().find(|&&i| i >= nv) {
                return Err(perr(ln, format!("vertex index {bad} out of range")));
            }
            cells.push(x[..=dim].to_vec());
            tags.push(tag);
        }
        Ok(Mesh { dim, vertices, cells, tags })
    }
}
