//! The two-map family `S_w = (x -> Sx, x -> Tx + w)`.
//!
//! This module holds the constructive pieces built around that family:
//!
//! - two intersection-witness constructions that produce, for a given
//!   contraction `U`, a partner `T` and a translation `w` for which
//!   `(Ux, Tx + w)` has an exactly verifiable point in `f(A) ∩ f_2(A)`;
//! - the exceptional subspaces `X_n = (T - I)(T^n - I)^{-1}(X' - T^n X')` with
//!   `X' = range(S)`, outside whose union the attractor is disconnected;
//! - grid sweeps over `w` that cross-tabulate geometric verdicts against the
//!   distance to that union.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::connectivity::{classify, AttractorMember, IntersectionWitness, Verdict};
use crate::geometry::{norm, Point, Resolution};
use crate::ifs::{attractor, AffineContraction, IfsSystem};
use crate::io::format_f64;
use crate::operators::{
    high_defect_contraction, low_defect_contraction, operator_norm, range_basis, CertifiedContraction,
    OperatorMatrix,
};
use crate::{Error, Result};

/// Singular values of `S` at or below this are treated as zero when forming `range(S)`.
pub const RANGE_THRESHOLD: f64 = 1e-10;

pub const DEFAULT_N_MAX: u32 = 8;

const IDENTITY_TOLERANCE: f64 = 1e-10;

pub const LOW_DEFECT_TAG: &str = "low-defect";
pub const HIGH_DEFECT_TAG: &str = "high-defect";

#[derive(Debug, Clone)]
pub struct SwConfig {
    s: OperatorMatrix,
    t: OperatorMatrix,
    w: Point,
}

impl SwConfig {
    pub fn new(s: OperatorMatrix, t: OperatorMatrix, w: Point) -> Result<Self> {
        for found in [t.dim(), w.dim()] {
            if found != s.dim() {
                return Err(Error::DimensionMismatch {
                    expected: s.dim(),
                    found,
                });
            }
        }
        for m in [&s, &t] {
            let norm = operator_norm(m);
            if norm >= 1.0 {
                return Err(Error::NotContraction { norm });
            }
        }
        Ok(Self { s, t, w })
    }

    pub fn s(&self) -> &OperatorMatrix {
        &self.s
    }

    pub fn t(&self) -> &OperatorMatrix {
        &self.t
    }

    pub fn w(&self) -> &Point {
        &self.w
    }
}

/// `(Sx, Tx + w)`.
pub fn build_ifs(cfg: &SwConfig) -> Result<IfsSystem> {
    IfsSystem::new(vec![
        AffineContraction::linear(cfg.s.clone())?,
        AffineContraction::new(cfg.t.clone(), cfg.w.clone())?,
    ])
}

fn identity_residual(residual: f64, scale: f64) -> Result<f64> {
    if residual <= IDENTITY_TOLERANCE * scale.max(1.0) {
        Ok(residual)
    } else {
        Err(Error::WitnessResidual { residual })
    }
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

fn solve_complement(t: &OperatorMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = t.dim();
    let complement = DMatrix::<f64>::identity(d, d) - t.as_matrix();
    complement
        .lu()
        .solve(&DVector::from_column_slice(rhs))
        .map(|x| x.as_slice().to_vec())
        .ok_or(Error::Singular { smallest: 0.0 })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Low-defect construction: `T = (I - U) P`, `w = U P h`, and the fixed
/// point `e` of `x -> Tx + w` satisfies `U e = w` and `e = P h`.
#[derive(Debug, Clone)]
pub struct LowDefectWitness {
    pub contraction: CertifiedContraction,
    pub w: Point,
    pub e: Point,
    /// Largest of `‖U e - w‖` and `‖e - P h‖`.
    pub residual: f64,
}

impl LowDefectWitness {
    pub fn t(&self) -> &OperatorMatrix {
        &self.contraction.operator
    }

    /// `f(e) = f_2(0) = w`, with `e` the fixed point of `f_2` and `0` that of `f`.
    pub fn intersection_witness(&self) -> IntersectionWitness {
        IntersectionWitness {
            tag: LOW_DEFECT_TAG.into(),
            left: AttractorMember::fixed_point_of(self.e.clone(), 1),
            right: AttractorMember::fixed_point_of(Point::origin(self.e.dim()).expect("positive dimension"), 0),
        }
    }
}

pub fn connectivity_witness(u: &OperatorMatrix, eps: f64, h: &Point) -> Result<LowDefectWitness> {
    if h.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: h.dim(),
        });
    }
    let contraction = low_defect_contraction(u, eps)?;
    if contraction.rank() == 0 {
        return Err(Error::TrivialProjection);
    }
    let ph = mat_vec(&contraction.projection.projection, h.coords());
    let w = u.apply(&ph);
    let e = solve_complement(&contraction.operator, &w)?;
    let scale = h.norm();
    let residual = identity_residual(distance(&u.apply(&e), &w), scale)?
        .max(identity_residual(distance(&e, &ph), scale)?);
    Ok(LowDefectWitness {
        contraction,
        w: Point::new(w)?,
        e: Point::new(e)?,
        residual,
    })
}

/// High-defect construction: `T = (I - U)^{-1} R`, `w = (I - T) P~ u`; with
/// `e` the fixed point of `x -> Tx + w`, `T U e + w = 0`.
#[derive(Debug, Clone)]
pub struct HighDefectWitness {
    pub contraction: CertifiedContraction,
    pub w: Point,
    pub e: Point,
    /// `‖T U e + w‖`.
    pub residual: f64,
    u_e: Point,
}

impl HighDefectWitness {
    pub fn t(&self) -> &OperatorMatrix {
        &self.contraction.operator
    }

    /// `f(0) = f_2(f(e)) = 0`.
    pub fn intersection_witness(&self) -> IntersectionWitness {
        IntersectionWitness {
            tag: HIGH_DEFECT_TAG.into(),
            left: AttractorMember::fixed_point_of(Point::origin(self.e.dim()).expect("positive dimension"), 0),
            right: AttractorMember {
                point: self.u_e.clone(),
                origin: 1,
                chain: vec![0],
            },
        }
    }
}

pub fn annihilation_witness(u: &OperatorMatrix, eps: f64, v: &Point) -> Result<HighDefectWitness> {
    if v.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let contraction = high_defect_contraction(u, eps)?;
    if contraction.rank() == 0 {
        return Err(Error::TrivialProjection);
    }
    let pv = mat_vec(&contraction.projection.projection, v.coords());
    let t = &contraction.operator;
    let tpv = t.apply(&pv);
    let w: Vec<f64> = pv.iter().zip(&tpv).map(|(a, b)| a - b).collect();
    let e = solve_complement(t, &w)?;
    let u_e = u.apply(&e);
    let image: Vec<f64> = t.apply(&u_e).iter().zip(&w).map(|(a, b)| a + b).collect();
    let residual = identity_residual(norm(&image), v.norm())?;
    Ok(HighDefectWitness {
        contraction,
        w: Point::new(w)?,
        e: Point::new(e)?,
        residual,
        u_e: Point::new(u_e)?,
    })
}

/// Orthonormal basis of `X_n`.
#[derive(Debug, Clone)]
pub struct ExceptionalSubspace {
    pub n: u32,
    pub basis: DMatrix<f64>,
}

impl ExceptionalSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Length of the component of `w` orthogonal to the subspace.
    pub fn distance(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let coeffs = self.basis.tr_mul(&w);
        (&w - &self.basis * coeffs).norm()
    }
}

/// Columns of `u` from a thin SVD, all of them, in singular value order.
fn column_space(m: &DMatrix<f64>, keep: usize) -> DMatrix<f64> {
    if keep == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    u.columns(0, keep).into_owned()
}

fn relative_range(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let top = m.singular_values().iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    range_basis(m, RANGE_THRESHOLD * top)
}

pub fn exceptional_subspace(s: &OperatorMatrix, t: &OperatorMatrix, n: u32) -> Result<ExceptionalSubspace> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: t.dim(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let norm_t = operator_norm(t);
    if norm_t >= 1.0 {
        return Err(Error::NotContraction { norm: norm_t });
    }
    let d = s.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let range_s = range_basis(s.as_matrix(), RANGE_THRESHOLD);
    let tn = t.pow(n).into_matrix();
    let shifted = relative_range(&(&tn * &range_s));

    // X' - T^n X' is the subspace sum range(S) + T^n range(S)
    let mut stacked = DMatrix::zeros(d, range_s.ncols() + shifted.ncols());
    stacked.columns_mut(0, range_s.ncols()).copy_from(&range_s);
    stacked
        .columns_mut(range_s.ncols(), shifted.ncols())
        .copy_from(&shifted);
    let sum = range_basis(&stacked, RANGE_THRESHOLD);

    let inverse = (&tn - &id)
        .try_inverse()
        .ok_or(Error::Singular { smallest: 0.0 })?;
    let transform = (t.as_matrix() - &id) * inverse;
    let basis = column_space(&(transform * &sum), sum.ncols());
    Ok(ExceptionalSubspace { n, basis })
}

pub fn exceptional_subspaces(s: &OperatorMatrix, t: &OperatorMatrix, n_max: u32) -> Result<Vec<ExceptionalSubspace>> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be positive".into()));
    }
    (1..=n_max).map(|n| exceptional_subspace(s, t, n)).collect()
}

fn union_distance(subspaces: &[ExceptionalSubspace], w: &[f64]) -> f64 {
    subspaces
        .iter()
        .map(|x| x.distance(w))
        .fold(f64::INFINITY, f64::min)
}

/// `min_{n <= n_max} dist(w, X_n)`.
pub fn distance_to_exceptional_union(
    s: &OperatorMatrix,
    t: &OperatorMatrix,
    w: &Point,
    n_max: u32,
) -> Result<f64> {
    if w.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: w.dim(),
        });
    }
    Ok(union_distance(&exceptional_subspaces(s, t, n_max)?, w.coords()))
}

/// One axis of an affine grid: `count` evenly spaced coordinates from `start`
/// to `end` along `direction`.
#[derive(Debug, Clone)]
pub struct GridAxis {
    pub direction: Vec<f64>,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn coordinate(&self, i: usize) -> f64 {
        if self.count <= 1 {
            self.start
        } else {
            self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64
        }
    }
}

/// 1D or 2D affine slice of `w`-space: `origin + s * axes[0] + t * axes[1]`.
#[derive(Debug, Clone)]
pub struct WGrid {
    pub origin: Vec<f64>,
    pub axes: Vec<GridAxis>,
}

impl WGrid {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "grid must have 1 or 2 axes, got {}",
                self.axes.len()
            )));
        }
        for v in std::iter::once(&self.origin).chain(self.axes.iter().map(|a| &a.direction)) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        for a in &self.axes {
            if !(a.start.is_finite() && a.end.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Grid indices in row-major order, first axis fastest.
    fn indices(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.cell_count());
        for flat in 0..self.cell_count() {
            let mut rem = flat;
            let idx = self
                .axes
                .iter()
                .map(|a| {
                    let i = rem % a.count;
                    rem /= a.count;
                    i
                })
                .collect();
            out.push(idx);
        }
        out
    }

    fn point(&self, index: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let coords: Vec<f64> = self
            .axes
            .iter()
            .zip(index)
            .map(|(a, &i)| a.coordinate(i))
            .collect();
        let mut w = self.origin.clone();
        for (a, c) in self.axes.iter().zip(&coords) {
            for (wk, dk) in w.iter_mut().zip(&a.direction) {
                *wk += c * dk;
            }
        }
        (coords, w)
    }
}

#[derive(Debug, Clone)]
pub struct SweepParams {
    pub target_r: f64,
    pub rho: Option<Resolution>,
    pub n_max: u32,
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub index: Vec<usize>,
    pub coords: Vec<f64>,
    pub w: Vec<f64>,
    /// Verdict, or the message of the error that prevented one.
    pub outcome: std::result::Result<Verdict, String>,
    pub exceptional_distance: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub grid: WGrid,
    pub n_max: u32,
    pub cells: Vec<SweepCell>,
}

pub fn sweep(s: &OperatorMatrix, t: &OperatorMatrix, grid: &WGrid, params: &SweepParams) -> Result<SweepReport> {
    let d = s.dim();
    if t.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: t.dim(),
        });
    }
    grid.validate(d)?;
    let subspaces = exceptional_subspaces(s, t, params.n_max)?;
    let cells = grid
        .indices()
        .into_par_iter()
        .map(|index| {
            let (coords, w) = grid.point(&index);
            let exceptional_distance = union_distance(&subspaces, &w);
            let outcome = classify_cell(s, t, &w, params).map_err(|e| e.to_string());
            SweepCell {
                index,
                coords,
                w,
                outcome,
                exceptional_distance,
            }
        })
        .collect();
    Ok(SweepReport {
        grid: grid.clone(),
        n_max: params.n_max,
        cells,
    })
}

fn classify_cell(s: &OperatorMatrix, t: &OperatorMatrix, w: &[f64], params: &SweepParams) -> Result<Verdict> {
    let cfg = SwConfig::new(s.clone(), t.clone(), Point::new(w.to_vec())?)?;
    let sys = build_ifs(&cfg)?;
    let approx = attractor(&sys, params.target_r, params.rho)?;
    classify(&sys, &approx)
}

impl SweepReport {
    /// CSV with one row per cell: grid indices, slice coordinates, `w`, verdict
    /// kind, gap or mingap, exceptional distance, and an error note.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# exceptional union truncated at n_max={}", self.n_max)?;
        let axes = self.grid.axes.len();
        let dim = self.grid.origin.len();
        let mut header: Vec<String> = Vec::new();
        header.extend((0..axes).map(|k| format!("i{k}")));
        header.extend((0..axes).map(|k| format!("s{k}")));
        header.extend((0..dim).map(|k| format!("w{k}")));
        header.extend(["verdict", "value", "exceptional_distance", "note"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for cell in &self.cells {
            let mut row: Vec<String> = Vec::new();
            row.extend(cell.index.iter().map(|i| i.to_string()));
            row.extend(cell.coords.iter().map(|&c| format_f64(c)));
            row.extend(cell.w.iter().map(|&c| format_f64(c)));
            let (kind, value, note) = match &cell.outcome {
                Ok(v @ Verdict::ProvablyDisconnected { gap }) => (v.kind(), format_f64(*gap), String::new()),
                Ok(v @ Verdict::Undecided { min_gap }) => (v.kind(), format_f64(*min_gap), String::new()),
                Ok(v @ Verdict::ProvablyConnected { witness }) => (v.kind(), String::new(), witness.clone()),
                Err(msg) => ("ERROR", String::new(), msg.replace(',', ";")),
            };
            row.push(kind.to_string());
            row.push(value);
            row.push(format_f64(cell.exceptional_distance));
            row.push(note);
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Binary PGM raster of verdicts for 2D grids: disconnected 0, undecided
    /// (and failed cells) 128, connected 255. Row `j` of the image is the
    /// `j`-th coordinate of the second axis.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        if self.grid.axes.len() != 2 {
            return Err(Error::InvalidParameter("PGM output needs a 2D grid".into()));
        }
        let width = self.grid.axes[0].count;
        let height = self.grid.axes[1].count;
        write!(out, "P5\n{width} {height}\n255\n")?;
        let pixels: Vec<u8> = self
            .cells
            .iter()
            .map(|c| match &c.outcome {
                Ok(Verdict::ProvablyDisconnected { .. }) => 0,
                Ok(Verdict::ProvablyConnected { .. }) => 255,
                _ => 128,
            })
            .collect();
        out.write_all(&pixels)?;
        Ok(())
    }
}
