//! Uniform-grid bucket index for exact k-nearest measured-pixel queries.

use crate::image::{Dims, PixelLocation};
use crate::measurement::MeasurementSet;

/// A measured pixel returned by a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Linear index of the measured pixel.
    pub index: usize,
    /// Squared grid distance to the query, exact.
    pub dist2: u64,
    pub value: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        (self.dist2 as f64).sqrt()
    }

    /// Sort key: distance first, then lower linear index.
    #[inline]
    pub(crate) fn key(&self) -> (u64, usize) {
        (self.dist2, self.index)
    }
}

/// Inserts `cand` into an ascending top-`limit` list. Returns true when the
/// list changed.
#[inline]
pub(crate) fn insert_bounded(best: &mut Vec<Neighbor>, cand: Neighbor, limit: usize) -> bool {
    let key = cand.key();
    let mut pos = best.len();
    if pos == limit {
        if key >= best[pos - 1].key() {
            return false;
        }
        pos -= 1;
    } else {
        best.push(cand);
    }
    while pos > 0 && best[pos - 1].key() > key {
        best[pos] = best[pos - 1];
        pos -= 1;
    }
    best[pos] = cand;
    true
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    row: u32,
    col: u32,
    index: usize,
    value: f64,
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    dims: Dims,
    cell: usize,
    cell_rows: usize,
    cell_cols: usize,
    buckets: Vec<Vec<Entry>>,
    len: usize,
}

impl GridIndex {
    /// Builds an index over every measurement in `set`, sizing cells so that
    /// roughly a quarter of `neighbor_hint` points land in each.
    pub fn new(set: &MeasurementSet, neighbor_hint: usize) -> Self {
        let dims = set.dims();
        let k = set.len().max(1) as f64;
        let per_cell = neighbor_hint.max(1) as f64 / 4.0;
        let side = (per_cell * dims.len() as f64 / k).sqrt().round() as usize;
        let cell = side.clamp(1, dims.width.max(dims.height));
        let mut index = Self::with_cell_size(dims, cell);
        for m in set.entries() {
            index.insert(m.location, m.value);
        }
        index
    }

    pub fn with_cell_size(dims: Dims, cell: usize) -> Self {
        let cell = cell.max(1);
        let cell_rows = dims.height.div_ceil(cell);
        let cell_cols = dims.width.div_ceil(cell);
        GridIndex {
            dims,
            cell,
            cell_rows,
            cell_cols,
            buckets: vec![Vec::new(); cell_rows * cell_cols],
            len: 0,
        }
    }

    pub fn insert(&mut self, loc: PixelLocation, value: f64) {
        let b = (loc.row / self.cell) * self.cell_cols + loc.col / self.cell;
        self.buckets[b].push(Entry {
            row: loc.row as u32,
            col: loc.col as u32,
            index: self.dims.index(loc),
            value,
        });
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The `min(limit, len)` nearest points to `q`, ascending by
    /// `(distance, linear index)`.
    pub fn nearest(&self, q: PixelLocation, limit: usize) -> Vec<Neighbor> {
        let mut best = Vec::with_capacity(limit + 1);
        self.nearest_into(q, limit, &mut best);
        best
    }

    pub fn nearest_into(&self, q: PixelLocation, limit: usize, best: &mut Vec<Neighbor>) {
        best.clear();
        if limit == 0 || self.len == 0 {
            return;
        }
        let want = limit.min(self.len);
        let cr = (q.row / self.cell) as isize;
        let cc = (q.col / self.cell) as isize;
        let max_ring = self.cell_rows.max(self.cell_cols) as isize;
        for ring in 0..=max_ring {
            let r0 = cr - ring;
            let r1 = cr + ring;
            let c0 = cc - ring;
            let c1 = cc + ring;
            let cols = self.cell_cols as isize;
            for r in r0.max(0)..=r1.min(self.cell_rows as isize - 1) {
                if r == r0 || r == r1 {
                    for c in c0.max(0)..=c1.min(cols - 1) {
                        self.scan_bucket(r as usize, c as usize, q, limit, best);
                    }
                } else {
                    if c0 >= 0 {
                        self.scan_bucket(r as usize, c0 as usize, q, limit, best);
                    }
                    if c1 < cols && c1 != c0 {
                        self.scan_bucket(r as usize, c1 as usize, q, limit, best);
                    }
                }
            }
            if best.len() == want {
                match self.unscanned_gap(q, cr, cc, ring) {
                    None => break,
                    Some(gap) if best[want - 1].dist2 < gap * gap => break,
                    Some(_) => {}
                }
            }
        }
    }

    /// Smallest per-axis distance from `q` to a cell outside the scanned
    /// square of `ring` rings, or `None` when no such cell exists.
    fn unscanned_gap(&self, q: PixelLocation, cr: isize, cc: isize, ring: isize) -> Option<u64> {
        let cell = self.cell as isize;
        let (qr, qc) = (q.row as isize, q.col as isize);
        [
            (cr - ring > 0).then(|| qr - (cr - ring) * cell + 1),
            (cr + ring + 1 < self.cell_rows as isize).then(|| (cr + ring + 1) * cell - qr),
            (cc - ring > 0).then(|| qc - (cc - ring) * cell + 1),
            (cc + ring + 1 < self.cell_cols as isize).then(|| (cc + ring + 1) * cell - qc),
        ]
        .into_iter()
        .flatten()
        .min()
        .map(|g| g as u64)
    }

    #[inline]
    fn scan_bucket(
        &self,
        r: usize,
        c: usize,
        q: PixelLocation,
        limit: usize,
        best: &mut Vec<Neighbor>,
    ) {
        let (qr, qc) = (q.row as u32, q.col as u32);
        for e in &self.buckets[r * self.cell_cols + c] {
            let dr = u64::from(e.row.abs_diff(qr));
            let dc = u64::from(e.col.abs_diff(qc));
            let n = Neighbor {
                index: e.index,
                dist2: dr * dr + dc * dc,
                value: e.value,
            };
            insert_bounded(best, n, limit);
        }
    }
}
