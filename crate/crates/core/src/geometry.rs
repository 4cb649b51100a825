//! Point clouds in R^d and the Hausdorff-Pompeiu metric.
//!
//! Finite clouds stand in for compact sets. All distances are Euclidean.
//! The brute-force kernels (`*_brute`) are the reference implementation; the
//! default entry points answer the same queries through a kd-tree and return
//! bitwise identical values.

use rayon::prelude::*;

use crate::kdtree::KdTree;
use crate::{Error, Result};

/// Queries against clouds smaller than this use the brute-force kernel directly.
const BRUTE_FORCE_LIMIT: usize = 64;

/// A point of R^d with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { coords })
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        squared_distance(&self.coords, &other.coords).sqrt()
    }
}

/// Finite nonempty set of points of uniform dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from flat row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if coords.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<I, P>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut dim = None;
        let mut coords = Vec::new();
        for p in points {
            let p = p.as_ref();
            match dim {
                None => dim = Some(p.len()),
                Some(d) if d != p.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: p.len(),
                    })
                }
                Some(_) => {}
            }
            coords.extend_from_slice(p);
        }
        match dim {
            None => Err(Error::EmptyCloud),
            Some(d) => Self::new(d, coords),
        }
    }

    pub fn singleton(point: &Point) -> Self {
        Self {
            dim: point.dim(),
            coords: point.coords().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false; clouds are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Points sorted lexicographically, for set comparisons in tests and tools.
    pub fn sorted_points(&self) -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = self.points().map(<[f64]>::to_vec).collect();
        pts.sort_by(|a, b| lex_cmp(a, b));
        pts
    }

    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && !coords.is_empty() && coords.len().is_multiple_of(dim));
        Self { dim, coords }
    }
}

/// Decimation length scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution(f64);

impl Resolution {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho > 0.0 {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidParameter(format!(
                "resolution must be positive and finite, got {rho}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

const MIN_DISTANCE_CHUNK: usize = 512;

fn check_dims(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(())
}

/// Nearest squared distance from every point of `a` to the cloud `b`.
fn nearest_squared(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    if b.len() <= BRUTE_FORCE_LIMIT {
        return a
            .points()
            .map(|p| {
                b.points()
                    .map(|q| squared_distance(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
    }
    let tree = KdTree::build(b);
    a.coords
        .par_chunks_exact(a.dim)
        .map(|p| tree.nearest_squared(p))
        .collect()
}

/// `sup_{x in A} d(x, B)`.
pub fn directed_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_dims(a, b)?;
    Ok(nearest_squared(a, b)
        .into_iter()
        .fold(0.0, f64::max)
        .sqrt())
}

/// Symmetric Hausdorff-Pompeiu distance.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(directed_distance(a, b)?.max(directed_distance(b, a)?))
}

/// Smallest pairwise distance between the two clouds.
pub fn min_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_dims(a, b)?;
    // query with the smaller cloud against a tree over the larger one
    let (q, t) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if t.len() <= BRUTE_FORCE_LIMIT {
        return Ok(nearest_squared(q, t)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .sqrt());
    }
    let tree = KdTree::build(t);
    // each chunk carries its running minimum as a pruning bound
    let best = q
        .coords
        .par_chunks(q.dim * MIN_DISTANCE_CHUNK)
        .map(|chunk| {
            chunk
                .chunks_exact(q.dim)
                .fold(f64::INFINITY, |best, p| tree.nearest_squared_below(p, best))
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best.sqrt())
}

pub fn directed_distance_brute(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_dims(a, b)?;
    let mut worst = 0.0f64;
    for p in a.points() {
        let mut best = f64::INFINITY;
        for q in b.points() {
            best = best.min(squared_distance(p, q));
        }
        worst = worst.max(best);
    }
    Ok(worst.sqrt())
}

pub fn hausdorff_distance_brute(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(directed_distance_brute(a, b)?.max(directed_distance_brute(b, a)?))
}

pub fn min_distance_brute(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_dims(a, b)?;
    let mut best = f64::INFINITY;
    for p in a.points() {
        for q in b.points() {
            best = best.min(squared_distance(p, q));
        }
    }
    Ok(best.sqrt())
}

/// Snaps `a` onto an origin-anchored grid whose cells have diameter at most
/// `rho`, keeping the lexicographically smallest input point of each occupied
/// cell. The result lists cells in lexicographic key order, so it depends only
/// on the set of input points and `rho`.
pub fn decimate(a: &PointCloud, rho: Resolution) -> PointCloud {
    let dim = a.dim;
    // shrink slightly so floor() rounding cannot push a cell diameter past rho
    let side = rho.value() / (dim as f64).sqrt() * (1.0 - 1e-9);
    let mut keyed: Vec<(Vec<i64>, usize)> = a
        .coords
        .par_chunks_exact(dim)
        .enumerate()
        .map(|(i, p)| (p.iter().map(|&x| cell_index(x, side)).collect(), i))
        .collect();
    keyed.par_sort_unstable_by(|(ka, ia), (kb, ib)| {
        ka.cmp(kb).then_with(|| lex_cmp(a.point(*ia), a.point(*ib)))
    });
    keyed.dedup_by(|next, kept| next.0 == kept.0);
    let mut coords = Vec::with_capacity(keyed.len() * dim);
    for (_, i) in &keyed {
        coords.extend_from_slice(a.point(*i));
    }
    PointCloud::from_raw(dim, coords)
}

fn cell_index(x: f64, side: f64) -> i64 {
    // saturating float-to-int conversion keeps absurd coordinates well defined
    (x / side).floor() as i64
}
