//! Affine contractions, the Hutchinson set map and certified attractor
//! approximation.
//!
//! The attractor is approached by deterministic fixed-point iteration of the
//! Hutchinson map with per-step decimation. Starting from `C_0 = {x_1*}` (the
//! fixed point of the first map) the error recursion
//! `e_{k+1} <= lambda * e_k + rho` together with the collage bound
//! `e_0 <= h(C_0, F(C_0)) / (1 - lambda)` yields the certified radius
//!
//! ```text
//! r_k = lambda^k * h(C_0, F(C_0)) / (1 - lambda) + rho * (1 - lambda^k) / (1 - lambda)
//! ```

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::geometry::{decimate, hausdorff_distance, norm, squared_distance, Point, PointCloud, Resolution};
use crate::operators::{operator_norm, OperatorMatrix, NORM_TOLERANCE};
use crate::{Error, Result};

/// Fixed points must satisfy `‖f(x) - x‖ <= FIXED_POINT_TOLERANCE * max(1, ‖x‖)`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

pub const DEFAULT_ITERATION_BUDGET: u64 = 100_000;

/// `x -> matrix * x + offset` with a certified Lipschitz factor below one.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineContraction {
    matrix: OperatorMatrix,
    offset: Point,
    lip: f64,
}

impl AffineContraction {
    /// The Lipschitz factor is the operator norm inflated by its tolerance.
    pub fn new(matrix: OperatorMatrix, offset: Point) -> Result<Self> {
        let lip = operator_norm(&matrix) + NORM_TOLERANCE;
        Self::with_lip(matrix, offset, lip)
    }

    fn with_lip(matrix: OperatorMatrix, offset: Point, lip: f64) -> Result<Self> {
        if matrix.dim() != offset.dim() {
            return Err(Error::DimensionMismatch {
                expected: matrix.dim(),
                found: offset.dim(),
            });
        }
        if lip >= 1.0 {
            return Err(Error::NotContraction { norm: lip });
        }
        Ok(Self { matrix, offset, lip })
    }

    /// Linear map `x -> matrix * x`.
    pub fn linear(matrix: OperatorMatrix) -> Result<Self> {
        let offset = Point::origin(matrix.dim())?;
        Self::new(matrix, offset)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn offset(&self) -> &Point {
        &self.offset
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        out
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.matrix.as_matrix();
        let b = self.offset.coords();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = b[i];
            for (j, xj) in x.iter().enumerate() {
                acc += m[(i, j)] * xj;
            }
            *o = acc;
        }
    }

    /// `self^[m]`: matrix `A^m`, offset `sum_{k<m} A^k b`. The Lipschitz
    /// factor is the smaller of `lip^m` and the certified norm of `A^m`.
    pub fn iterate(&self, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("iteration count must be positive".into()));
        }
        let mut result = self.clone();
        for _ in 1..m {
            result = self.compose_after(&result)?;
        }
        let direct = operator_norm(&result.matrix) + NORM_TOLERANCE;
        let lip = self.lip.powi(m as i32).min(direct);
        Self::with_lip(result.matrix, result.offset, lip)
    }

    /// `self ∘ inner`.
    fn compose_after(&self, inner: &AffineContraction) -> Result<Self> {
        let matrix = self.matrix.mul(&inner.matrix);
        let offset = Point::new(self.apply(inner.offset.coords()))?;
        Self::with_lip(matrix, offset, self.lip * inner.lip)
    }
}

/// Ordered family of affine contractions on a common R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSystem {
    maps: Vec<AffineContraction>,
    lambda: f64,
}

impl IfsSystem {
    pub fn new(maps: Vec<AffineContraction>) -> Result<Self> {
        let first = maps.first().ok_or(Error::MapCount {
            expected: 1,
            found: 0,
        })?;
        let dim = first.dim();
        if let Some(bad) = maps.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        let lambda = maps.iter().map(|f| f.lip).fold(0.0, f64::max);
        Ok(Self { maps, lambda })
    }

    pub fn maps(&self) -> &[AffineContraction] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    /// Contraction factor of the Hutchinson map.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Point cloud with a certified Hausdorff radius to the true attractor.
#[derive(Debug, Clone)]
pub struct AttractorApprox {
    pub cloud: PointCloud,
    pub radius: f64,
    pub iterations: u64,
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn apply_map(f: &AffineContraction, cloud: &PointCloud) -> Result<PointCloud> {
    check_dim(f.dim(), cloud.dim())?;
    let dim = f.dim();
    let mut out = vec![0.0; cloud.as_flat().len()];
    out.par_chunks_exact_mut(dim)
        .zip(cloud.as_flat().par_chunks_exact(dim))
        .for_each(|(o, x)| f.apply_into(x, o));
    PointCloud::new(dim, out)
}

/// Union of the images of `cloud` under every map, in map order.
pub fn hutchinson(sys: &IfsSystem, cloud: &PointCloud) -> Result<PointCloud> {
    check_dim(sys.dim(), cloud.dim())?;
    let mut coords = Vec::with_capacity(cloud.as_flat().len() * sys.len());
    for f in &sys.maps {
        coords.extend_from_slice(apply_map(f, cloud)?.as_flat());
    }
    PointCloud::new(sys.dim(), coords)
}

/// Unique fixed point, from `(I - A) x = b`.
pub fn fixed_point(f: &AffineContraction) -> Result<Point> {
    let d = f.dim();
    let system = DMatrix::<f64>::identity(d, d) - f.matrix.as_matrix();
    let rhs = DVector::from_column_slice(f.offset.coords());
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::SolverFailure { residual: f64::INFINITY })?;
    let x = x.as_slice().to_vec();
    let residual = squared_distance(&f.apply(&x), &x).sqrt();
    if !(residual <= FIXED_POINT_TOLERANCE * norm(&x).max(1.0)) {
        return Err(Error::SolverFailure { residual });
    }
    Point::new(x)
}

/// Radius `R` of an origin-centred ball mapped into itself by every member,
/// hence containing the attractor.
pub fn bounding_radius(sys: &IfsSystem) -> f64 {
    let offset = sys
        .maps
        .iter()
        .map(|f| f.offset.norm())
        .fold(0.0, f64::max);
    offset / (1.0 - sys.lambda)
}

/// Decimation step used when the caller does not fix one: half of the target
/// radius goes to the decimation floor `rho / (1 - lambda)`.
pub fn auto_resolution(sys: &IfsSystem, target_r: f64) -> Result<Resolution> {
    Resolution::new(target_r * (1.0 - sys.lambda) / 2.0)
}

/// Certified attractor approximation with radius at most `target_r`.
pub fn attractor(sys: &IfsSystem, target_r: f64, rho: Option<Resolution>) -> Result<AttractorApprox> {
    attractor_with_budget(sys, target_r, rho, DEFAULT_ITERATION_BUDGET)
}

pub fn attractor_with_budget(
    sys: &IfsSystem,
    target_r: f64,
    rho: Option<Resolution>,
    budget: u64,
) -> Result<AttractorApprox> {
    if !(target_r.is_finite() && target_r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target radius must be positive, got {target_r}"
        )));
    }
    let lambda = sys.lambda;
    let rho = match rho {
        Some(r) => r,
        None => auto_resolution(sys, target_r)?,
    };
    let floor = rho.value() / (1.0 - lambda);
    if !(target_r > floor) {
        return Err(Error::InfeasibleTarget { target_r, floor });
    }

    let seed = PointCloud::singleton(&fixed_point(&sys.maps[0])?);
    let collage = hausdorff_distance(&seed, &hutchinson(sys, &seed)?)?;
    let tail_budget = target_r - floor;
    let tail = |k: u64| lambda.powi(k.min(i32::MAX as u64) as i32) * collage / (1.0 - lambda);

    let mut iterations = 0u64;
    while tail(iterations) > tail_budget {
        iterations += 1;
        if iterations > budget {
            let needed = ((tail_budget / tail(0)).ln() / lambda.ln()).ceil() as u64;
            return Err(Error::IterationBudget { needed, budget });
        }
    }

    let mut cloud = seed;
    for _ in 0..iterations {
        cloud = decimate(&hutchinson(sys, &cloud)?, rho);
    }
    let lambda_k = lambda.powi(iterations.min(i32::MAX as u64) as i32);
    let radius = tail(iterations) + rho.value() * (1.0 - lambda_k) / (1.0 - lambda);
    Ok(AttractorApprox {
        cloud,
        radius,
        iterations,
    })
}
