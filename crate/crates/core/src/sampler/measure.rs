use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::point::distance;

use super::Trajectory;

#[derive(Debug, Clone)]
enum SpatialIndex {
    /// Coordinates sorted ascending with prefix sums of raw weights.
    Sorted { values: Vec<f64>, prefix: Vec<f64> },
    /// Uniform buckets of side `cell`.
    Buckets {
        cell: f64,
        buckets: HashMap<(i64, i64), Vec<usize>>,
    },
    Linear,
}

/// Weighted point cloud approximating an invariant measure.
///
/// Each point carries a raw weight (1 for chaos-game points) and the
/// normalized weight is `raw / total`, so merging clouds never rescales
/// anything.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
    raw: Vec<f64>,
    total: f64,
    index: SpatialIndex,
}

impl PartialEq for EmpiricalMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coords == other.coords && self.raw == other.raw
    }
}

impl EmpiricalMeasure {
    /// Every `thinning`-th point of each trajectory, each with raw weight 1.
    pub fn from_trajectories(trajectories: &[Trajectory], thinning: usize) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or(Error::EmptyInput("no trajectories"))?;
        if thinning == 0 {
            return Err(Error::InvalidArgument("thinning must be at least 1".into()));
        }
        let dim = first.dim;
        let mut coords = Vec::new();
        for t in trajectories {
            if t.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.dim,
                });
            }
            for p in t.points().step_by(thinning) {
                coords.extend_from_slice(p);
            }
        }
        let n = coords.len() / dim;
        EmpiricalMeasure::from_weighted(dim, coords, vec![1.0; n])
    }

    pub fn from_points(dim: usize, coords: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { coords.len() / dim };
        EmpiricalMeasure::from_weighted(dim, coords, vec![1.0; n])
    }

    /// Points (flattened, `dim` coordinates each) with nonnegative raw weights.
    pub fn from_weighted(dim: usize, coords: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if coords.len() != dim * raw.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates for {} points of dimension {dim}",
                coords.len(),
                raw.len()
            )));
        }
        if raw.is_empty() {
            return Err(Error::EmptyInput("no points"));
        }
        if let Some(bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinitePoint(vec![*bad]));
        }
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("total weight is zero".into()));
        }
        let index = build_index(dim, &coords, &raw, None);
        Ok(EmpiricalMeasure {
            dim,
            coords,
            raw,
            total,
            index,
        })
    }

    /// Concatenation of the two clouds (points of `self` first).
    pub fn merge(&self, other: &EmpiricalMeasure) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut raw = self.raw.clone();
        raw.extend_from_slice(&other.raw);
        EmpiricalMeasure::from_weighted(self.dim, coords, raw)
    }

    /// Rebuilds the two-dimensional bucket grid with the given cell side
    /// (for example the median query radius). No effect in other dimensions.
    pub fn with_cell_size(mut self, cell: f64) -> Self {
        if self.dim == 2 && cell.is_finite() && cell > 0.0 {
            self.index = build_index(2, &self.coords, &self.raw, Some(cell));
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn raw_weights(&self) -> &[f64] {
        &self.raw
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.raw[i] / self.total
    }

    /// Normalized weights, summing to one.
    pub fn weights(&self) -> Vec<f64> {
        self.raw.iter().map(|w| w / self.total).collect()
    }

    /// `(point, normalized weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(&self.raw)
            .map(move |(p, w)| (p, w / self.total))
    }

    /// `∫ f dν` over the cloud.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.coords.chunks_exact(self.dim) {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        distance(&lo, &hi)
    }

    /// Indices of the points with `d(p, x) <= r`.
    pub fn ball_indices(&self, x: &[f64], r: f64) -> Vec<usize> {
        match &self.index {
            SpatialIndex::Buckets { cell, buckets } => {
                let mut out = Vec::new();
                self.for_each_bucket_candidate(*cell, buckets, x, r, |i| {
                    if distance(self.point(i), x) <= r {
                        out.push(i);
                    }
                });
                out.sort_unstable();
                out
            }
            _ => (0..self.len())
                .filter(|&i| distance(self.point(i), x) <= r)
                .collect(),
        }
    }

    /// `ν(B(x, r))` for the closed ball.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        self.ball_raw(x, r) / self.total
    }

    /// Number of points in the closed ball.
    pub fn ball_count(&self, x: &[f64], r: f64) -> usize {
        match &self.index {
            SpatialIndex::Sorted { values, .. } => {
                let (lo, hi) = sorted_range(values, x[0], r);
                hi - lo
            }
            SpatialIndex::Buckets { cell, buckets } => {
                let mut n = 0;
                self.for_each_bucket_candidate(*cell, buckets, x, r, |i| {
                    if distance(self.point(i), x) <= r {
                        n += 1;
                    }
                });
                n
            }
            SpatialIndex::Linear => self
                .coords
                .chunks_exact(self.dim)
                .filter(|p| distance(p, x) <= r)
                .count(),
        }
    }

    fn ball_raw(&self, x: &[f64], r: f64) -> f64 {
        match &self.index {
            SpatialIndex::Sorted { values, prefix } => {
                let (lo, hi) = sorted_range(values, x[0], r);
                prefix[hi] - prefix[lo]
            }
            SpatialIndex::Buckets { cell, buckets } => {
                let mut m = 0.0;
                self.for_each_bucket_candidate(*cell, buckets, x, r, |i| {
                    if distance(self.point(i), x) <= r {
                        m += self.raw[i];
                    }
                });
                m
            }
            SpatialIndex::Linear => self
                .coords
                .chunks_exact(self.dim)
                .zip(&self.raw)
                .filter(|(p, _)| distance(p, x) <= r)
                .map(|(_, w)| w)
                .sum(),
        }
    }

    fn for_each_bucket_candidate(
        &self,
        cell: f64,
        buckets: &HashMap<(i64, i64), Vec<usize>>,
        x: &[f64],
        r: f64,
        mut visit: impl FnMut(usize),
    ) {
        let lo = (bucket_of(x[0] - r, cell), bucket_of(x[1] - r, cell));
        let hi = (bucket_of(x[0] + r, cell), bucket_of(x[1] + r, cell));
        let span = (hi.0 - lo.0 + 1) as f64 * (hi.1 - lo.1 + 1) as f64;
        if span > buckets.len() as f64 {
            for (key, ids) in buckets {
                if key.0 >= lo.0 && key.0 <= hi.0 && key.1 >= lo.1 && key.1 <= hi.1 {
                    ids.iter().for_each(|&i| visit(i));
                }
            }
        } else {
            for bx in lo.0..=hi.0 {
                for by in lo.1..=hi.1 {
                    if let Some(ids) = buckets.get(&(bx, by)) {
                        ids.iter().for_each(|&i| visit(i));
                    }
                }
            }
        }
    }
}

fn bucket_of(v: f64, cell: f64) -> i64 {
    (v / cell).floor() as i64
}

/// Index range of sorted values with `|v - x| <= r`. The bracket from
/// `x -+ r` is corrected with the exact predicate, which is monotone on
/// either side of `x`.
fn sorted_range(values: &[f64], x: f64, r: f64) -> (usize, usize) {
    let within = |v: f64| (v - x).abs() <= r;
    let mut lo = values.partition_point(|v| *v < x - r);
    while lo > 0 && within(values[lo - 1]) {
        lo -= 1;
    }
    while lo < values.len() && values[lo] < x && !within(values[lo]) {
        lo += 1;
    }
    let mut hi = values.partition_point(|v| *v <= x + r);
    while hi < values.len() && within(values[hi]) {
        hi += 1;
    }
    while hi > lo && values[hi - 1] > x && !within(values[hi - 1]) {
        hi -= 1;
    }
    (lo, hi.max(lo))
}

fn build_index(dim: usize, coords: &[f64], raw: &[f64], cell: Option<f64>) -> SpatialIndex {
    match dim {
        1 => {
            let mut order: Vec<usize> = (0..raw.len()).collect();
            order.sort_by(|a, b| coords[*a].total_cmp(&coords[*b]));
            let values: Vec<f64> = order.iter().map(|&i| coords[i]).collect();
            let mut prefix = Vec::with_capacity(raw.len() + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &i in &order {
                acc += raw[i];
                prefix.push(acc);
            }
            SpatialIndex::Sorted { values, prefix }
        }
        2 => {
            let n = raw.len();
            let cell = cell.unwrap_or_else(|| {
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for p in coords.chunks_exact(2) {
                    for a in 0..2 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
                let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
                // About four points per occupied cell for a filled square.
                let c = extent / (n as f64 / 4.0).sqrt().max(1.0);
                if c > 0.0 {
                    c
                } else {
                    1.0
                }
            });
            let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
            for (i, p) in coords.chunks_exact(2).enumerate() {
                buckets
                    .entry((bucket_of(p[0], cell), bucket_of(p[1], cell)))
                    .or_default()
                    .push(i);
            }
            SpatialIndex::Buckets { cell, buckets }
        }
        _ => SpatialIndex::Linear,
    }
}
