//! Radius neighbor search on a uniform grid and grouping of neighbor features.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Point;
use crate::sampling::PointCloud;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeighborError {
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("nquery must be at least 1")]
    ZeroNquery,
    #[error("cannot query an empty cloud")]
    EmptyCloud,
    #[error("{radii} radii but {nquery} nquery values")]
    LengthMismatch { radii: usize, nquery: usize },
    #[error("radii must be strictly increasing: {0:?}")]
    RadiiNotIncreasing(Vec<f64>),
    #[error("group index does not match the cloud or centers: {0}")]
    Inconsistent(String),
}

/// Keeps the dense grid roughly proportional to the point count.
const MAX_CELLS_PER_POINT: usize = 4;

/// Uniform grid over the bounding volume of a cloud, stored as compressed buckets.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    /// `starts[c]..starts[c + 1]` indexes `order` for cell `c`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl SpatialIndex {
    /// Builds a grid whose cell edge is at least `radius`.
    pub fn build(points: &[Point], radius: f64) -> Result<Self, NeighborError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(NeighborError::InvalidRadius(radius));
        }
        if points.is_empty() {
            return Err(NeighborError::EmptyCloud);
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for (a, v) in p.to_array().into_iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        let budget = MAX_CELLS_PER_POINT * points.len() + 64;
        let mut cell = radius;
        let dims = loop {
            let d: [usize; 3] =
                std::array::from_fn(|a| ((hi[a] - lo[a]) / cell).floor() as usize + 1);
            if d.iter()
                .try_fold(1usize, |acc, &x| acc.checked_mul(x))
                .is_some_and(|n| n <= budget)
            {
                break d;
            }
            cell *= 2.0;
        };
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut idx = Self {
            origin: lo,
            cell,
            dims,
            starts: vec![0; n_cells + 1],
            order: vec![0; points.len()],
        };
        let cells: Vec<usize> = points.iter().map(|p| idx.flat(idx.coord(p))).collect();
        for &c in &cells {
            idx.starts[c + 1] += 1;
        }
        for c in 0..n_cells {
            idx.starts[c + 1] += idx.starts[c];
        }
        let mut fill = idx.starts.clone();
        for (i, &c) in cells.iter().enumerate() {
            idx.order[fill[c]] = i;
            fill[c] += 1;
        }
        Ok(idx)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn n_cells(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn bucket(&self, cell: usize) -> &[usize] {
        &self.order[self.starts[cell]..self.starts[cell + 1]]
    }

    fn coord(&self, p: &Point) -> [usize; 3] {
        let v = p.to_array();
        std::array::from_fn(|a| {
            (((v[a] - self.origin[a]) / self.cell).floor().max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    /// Indices within `radius` of `center`, sorted by distance then index.
    /// `radius` must not exceed the cell size.
    pub fn within(&self, points: &[Point], center: Point, radius: f64) -> Vec<(f64, usize)> {
        let r2 = radius * radius;
        let v = center.to_array();
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            let lo = ((v[a] - radius - self.origin[a]) / self.cell).floor();
            let hi = ((v[a] + radius - self.origin[a]) / self.cell).floor();
            if hi < 0.0 || lo > (self.dims[a] - 1) as f64 {
                return Vec::new();
            }
            range[a] = (lo.max(0.0) as usize, (hi as usize).min(self.dims[a] - 1));
        }
        let mut hits = Vec::new();
        for i in range[0].0..=range[0].1 {
            for j in range[1].0..=range[1].1 {
                for k in range[2].0..=range[2].1 {
                    for &p in self.bucket(self.flat([i, j, k])) {
                        let d2 = points[p].dist_sq(center);
                        if d2 <= r2 {
                            hits.push((d2, p));
                        }
                    }
                }
            }
        }
        hits.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        hits
    }
}

/// Fixed-width neighbor lists, one row of `nquery` entries per center.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupIndex {
    nquery: usize,
    indices: Vec<usize>,
    valid: Vec<bool>,
    counts: Vec<usize>,
}

impl GroupIndex {
    pub fn n_centers(&self) -> usize {
        self.counts.len()
    }

    pub fn nquery(&self) -> usize {
        self.nquery
    }

    pub fn group(&self, c: usize) -> &[usize] {
        &self.indices[c * self.nquery..(c + 1) * self.nquery]
    }

    pub fn validity(&self, c: usize) -> &[bool] {
        &self.valid[c * self.nquery..(c + 1) * self.nquery]
    }

    /// Number of in-radius neighbors found, before truncation to `nquery`.
    pub fn found(&self, c: usize) -> usize {
        self.counts[c]
    }

    pub fn is_empty_group(&self, c: usize) -> bool {
        self.counts[c] == 0
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

fn nearest(points: &[Point], center: Point) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in points.iter().enumerate() {
        let d = p.dist_sq(center);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

pub fn ball_query(
    cloud: &PointCloud,
    centers: &[Point],
    radius: f64,
    nquery: usize,
) -> Result<GroupIndex, NeighborError> {
    if nquery == 0 {
        return Err(NeighborError::ZeroNquery);
    }
    let points = cloud.points();
    let index = SpatialIndex::build(points, radius)?;
    let rows: Vec<(Vec<usize>, Vec<bool>, usize)> = centers
        .par_iter()
        .map(|&c| {
            let hits = index.within(points, c, radius);
            let found = hits.len();
            let first = hits
                .first()
                .map(|h| h.1)
                .unwrap_or_else(|| nearest(points, c));
            let mut idx = vec![first; nquery];
            let mut ok = vec![false; nquery];
            for (slot, h) in hits.iter().take(nquery).enumerate() {
                idx[slot] = h.1;
                ok[slot] = true;
            }
            (idx, ok, found)
        })
        .collect();
    let mut g = GroupIndex {
        nquery,
        indices: Vec::with_capacity(centers.len() * nquery),
        valid: Vec::with_capacity(centers.len() * nquery),
        counts: Vec::with_capacity(centers.len()),
    };
    for (idx, ok, found) in rows {
        g.indices.extend(idx);
        g.valid.extend(ok);
        g.counts.push(found);
    }
    Ok(g)
}

/// Neighbor features laid out as `(m * nquery) x width`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedBlock {
    pub m: usize,
    pub nquery: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl GroupedBlock {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.m, self.nquery, self.width)
    }

    pub fn entry(&self, center: usize, slot: usize) -> &[f64] {
        let r = center * self.nquery + slot;
        &self.data[r * self.width..(r + 1) * self.width]
    }
}

pub fn group_and_canonicalize(
    cloud: &PointCloud,
    centers: &[Point],
    groups: &GroupIndex,
) -> Result<GroupedBlock, NeighborError> {
    if groups.n_centers() != centers.len() {
        return Err(NeighborError::Inconsistent(format!(
            "{} groups for {} centers",
            groups.n_centers(),
            centers.len()
        )));
    }
    if let Some(&bad) = groups.indices.iter().find(|&&i| i >= cloud.len()) {
        return Err(NeighborError::Inconsistent(format!(
            "index {bad} out of range for {} points",
            cloud.len()
        )));
    }
    let feats = cloud.features();
    let d = feats.map_or(0, |f| f.dim());
    let width = 3 + d;
    let mut data = Vec::with_capacity(centers.len() * groups.nquery * width);
    for (c, &center) in centers.iter().enumerate() {
        for &i in groups.group(c) {
            let rel = cloud.points()[i] - center;
            data.extend_from_slice(&rel.to_array());
            if let Some(f) = feats {
                data.extend_from_slice(f.row(i));
            }
        }
    }
    Ok(GroupedBlock {
        m: centers.len(),
        nquery: groups.nquery,
        width,
        data,
    })
}

pub fn multi_scale_group(
    cloud: &PointCloud,
    centers: &[Point],
    radii: &[f64],
    nquery: &[usize],
) -> Result<Vec<(GroupIndex, GroupedBlock)>, NeighborError> {
    if radii.len() != nquery.len() {
        return Err(NeighborError::LengthMismatch {
            radii: radii.len(),
            nquery: nquery.len(),
        });
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NeighborError::RadiiNotIncreasing(radii.to_vec()));
    }
    radii
        .iter()
        .zip(nquery)
        .map(|(&r, &q)| {
            let g = ball_query(cloud, centers, r, q)?;
            let b = group_and_canonicalize(cloud, centers, &g)?;
            Ok((g, b))
        })
        .collect()
}
