//! Coordinate triplets and compressed-row matrices.

/// One `(row, column, value)` contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub i: u32,
    pub j: u32,
    pub v: f64,
}

impl Triplet {
    #[inline]
    pub fn new(i: usize, j: usize, v: f64) -> Self {
        Self { i: i as u32, j: j as u32, v }
    }
}

/// Stable sort by `(i, j)` followed by summation of equal keys, in place.
/// Contributions to one key are added in their original order.
pub fn sort_reduce(buf: &mut Vec<Triplet>) {
    buf.sort_by_key(|t| (t.i, t.j));
    let mut w = 0;
    for r in 0..buf.len() {
        if w > 0 && buf[w - 1].i == buf[r].i && buf[w - 1].j == buf[r].j {
            buf[w - 1].v += buf[r].v;
        } else {
            buf[w] = buf[r];
            w += 1;
        }
    }
    buf.truncate(w);
}

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n = rows.len();
        let nnz = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    /// Builds a matrix from sorted, reduced triplets.
    pub fn from_sorted(n: usize, triplets: &[Triplet]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for t in triplets {
            rows[t.i as usize].push((t.j, t.v));
        }
        Self::from_rows(rows)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Applies a symmetric permutation: entry `(i, j)` moves to `(p[i], p[j])`.
    pub fn permuted(&self, p: &[usize]) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[p[i]].push((p[j] as u32, v));
            }
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
        }
        Self::from_rows(rows)
    }
}

/// Adds a sorted, reduced run of triplets into per-row sorted accumulators.
/// Existing values come first in each sum.
pub fn merge_into_rows(rows: &mut [Vec<(u32, f64)>], sorted: &[Triplet]) {
    let mut k = 0;
    while k < sorted.len() {
        let i = sorted[k].i as usize;
        let mut end = k;
        while end < sorted.len() && sorted[end].i as usize == i {
            end += 1;
        }
        let run = &sorted[k..end];
        let old = std::mem::take(&mut rows[i]);
        let mut merged = Vec::with_capacity(old.len() + run.len());
        let (mut a, mut b) = (0, 0);
        while a < old.len() || b < run.len() {
            if b == run.len() || (a < old.len() && old[a].0 < run[b].j) {
                merged.push(old[a]);
                a += 1;
            } else if a == old.len() || run[b].j < old[a].0 {
                merged.push((run[b].j, run[b].v));
                b += 1;
            } else {
                merged.push((old[a].0, old[a].1 + run[b].v));
                a += 1;
                b += 1;
            }
        }
        rows[i] = merged;
        k = end;
    }
}

/// Merges worker buffers into one matrix: the buffers are concatenated in
/// order, sorted stably by key and reduced.
pub fn merge_triplets(n: usize, buffers: Vec<Vec<Triplet>>) -> CsrMatrix {
    let mut all: Vec<Triplet> = buffers.into_iter().flatten().collect();
    sort_reduce(&mut all);
    CsrMatrix::from_sorted(n, &all)
}
