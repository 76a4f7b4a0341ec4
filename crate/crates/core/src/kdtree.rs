//! KD-tree over splat centers for inclusive radius queries.

use crate::error::{Error, Result};

/// Immutable spatial index answering `{i : |pos_i - p| <= r}` queries.
#[derive(Debug)]
pub struct SpatialIndex {
    positions: Vec<[f64; 3]>,
    /// Indices into `positions`, laid out as an implicit balanced tree:
    /// each node region is split at its median along the depth axis.
    order: Vec<u32>,
}

impl SpatialIndex {
    pub fn build(positions: &[[f64; 3]]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Input("spatial index over empty input".into()));
        }
        if positions
            .iter()
            .any(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Input("non-finite position".into()));
        }
        let mut order: Vec<u32> = (0..positions.len() as u32).collect();
        let positions = positions.to_vec();
        build_recursive(&positions, &mut order, 0);
        Ok(SpatialIndex { positions, order })
    }

    /// All point indices within `radius` (inclusive) of `query`.
    pub fn query(&self, query: &[f64; 3], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_into(query, radius, &mut out);
        out
    }

    pub fn query_into(&self, query: &[f64; 3], radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let r2 = radius * radius;
        self.search(0, self.order.len(), 0, query, radius, r2, out);
        out.sort_unstable();
    }

    fn search(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        query: &[f64; 3],
        radius: f64,
        r2: f64,
        out: &mut Vec<usize>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.positions[idx];
        let d2: f64 = (0..3).map(|a| (p[a] - query[a]) * (p[a] - query[a])).sum();
        if d2 <= r2 {
            out.push(idx);
        }
        let next = (axis + 1) % 3;
        let delta = query[axis] - p[axis];
        if delta <= radius {
            self.search(lo, mid, next, query, radius, r2, out);
        }
        if delta >= -radius {
            self.search(mid + 1, hi, next, query, radius, r2, out);
        }
    }
}

fn build_recursive(positions: &[[f64; 3]], order: &mut [u32], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        positions[a as usize][axis]
            .partial_cmp(&positions[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    let next = (axis + 1) % 3;
    build_recursive(positions, left, next);
    build_recursive(positions, &mut rest[1..], next);
}
