//! Dense real operator toolkit.
//!
//! Everything here works on small square matrices (d up to a few dozen).
//! The symmetric eigensolver is a cyclic Jacobi iteration; norms, spectral
//! projections, square roots and polar factors are all derived from it.
//! Numerical ranks and column-space bases go through a full SVD.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Off-diagonal Frobenius norm at which the Jacobi sweep stops, relative to
/// the Frobenius norm of the input.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Absolute tolerance attached to [`operator_norm`].
pub const NORM_TOLERANCE: f64 = 1e-12;

pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Interval endpoints closer than this to an eigenvalue are rejected.
pub const BOUNDARY_GAP: f64 = 1e-9;

pub const SINGULAR_THRESHOLD: f64 = 1e-9;

const PSD_CLAMP: f64 = 1e-12;

const POLAR_NEWTON_STEPS: usize = 4;

/// Slack allowed on top of the analytic contraction bounds.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// A square real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<f64>);

impl OperatorMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::ZeroDimension);
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Row-major constructor.
    pub fn from_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    pub fn mul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self(&self.0 * &other.0)
    }

    pub fn pow(&self, m: u32) -> OperatorMatrix {
        let mut acc = DMatrix::identity(self.dim(), self.dim());
        for _ in 0..m {
            acc = &acc * &self.0;
        }
        Self(acc)
    }
}

impl From<OperatorMatrix> for DMatrix<f64> {
    fn from(m: OperatorMatrix) -> Self {
        m.0
    }
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(g(lambda)) V^T`.
    pub fn map_eigenvalues(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * g(self.eigenvalues[j]));
        scaled * v.transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map_eigenvalues(|x| x)
    }
}

/// Open real interval, either end possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Interval {
    pub fn below(upper: f64) -> Self {
        Self {
            lower: None,
            upper: Some(upper),
        }
    }

    pub fn above(lower: f64) -> Self {
        Self {
            lower: Some(lower),
            upper: None,
        }
    }

    pub fn between(lower: f64, upper: f64) -> Self {
        Self {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn everything() -> Self {
        Self {
            lower: None,
            upper: None,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_none_or(|l| x > l) && self.upper.is_none_or(|u| x < u)
    }

    /// Image under `x -> 1 - x`, which relates the spectra of `N` and `I - N`.
    pub fn reflect_about_half(&self) -> Self {
        Self {
            lower: self.upper.map(|u| 1.0 - u),
            upper: self.lower.map(|l| 1.0 - l),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralProjection {
    pub projection: DMatrix<f64>,
    pub rank: usize,
    pub interval: Interval,
    /// Orthonormal eigenvectors spanning the range, one per column.
    pub basis: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub unitary: DMatrix<f64>,
    pub positive: DMatrix<f64>,
}

/// A contraction together with its measured norm and analytic bound.
#[derive(Debug, Clone)]
pub struct CertifiedContraction {
    pub operator: OperatorMatrix,
    pub norm: f64,
    pub bound: f64,
    /// Spectral projection the contraction was built from.
    pub projection: SpectralProjection,
}

impl CertifiedContraction {
    pub fn rank(&self) -> usize {
        self.projection.rank
    }
}

pub fn adjoint(a: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix(a.0.transpose())
}

/// Largest singular value, as the square root of the top eigenvalue of `A^T A`.
pub fn operator_norm(a: &OperatorMatrix) -> f64 {
    matrix_norm(&a.0)
}

pub(crate) fn matrix_norm(a: &DMatrix<f64>) -> f64 {
    let gram = symmetrize(&a.tr_mul(a));
    let spectrum = jacobi(&gram);
    spectrum.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetric_eigen(n: &OperatorMatrix) -> Result<SymmetricSpectrum> {
    let asymmetry = (&n.0 - n.0.transpose()).abs().max();
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::NonSymmetric { asymmetry });
    }
    Ok(jacobi(&symmetrize(&n.0)))
}

/// Cyclic Jacobi eigenvalue iteration on a symmetric matrix.
fn jacobi(input: &DMatrix<f64>) -> SymmetricSpectrum {
    let d = input.nrows();
    let mut a = input.clone();
    let mut v = DMatrix::<f64>::identity(d, d);
    let scale = input.norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOLERANCE * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        let mut vec = v.column(i).clone_owned();
        if let Some(first) = vec.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                vec.neg_mut();
            }
        }
        eigenvectors.set_column(col, &vec);
    }
    SymmetricSpectrum {
        eigenvalues,
        eigenvectors,
    }
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let mut sum = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Orthogonal projection onto the eigenvectors whose eigenvalues lie in the
/// open `interval`.
pub fn spectral_projection(spectrum: &SymmetricSpectrum, interval: Interval) -> Result<SpectralProjection> {
    for &lambda in &spectrum.eigenvalues {
        for endpoint in [interval.lower, interval.upper].into_iter().flatten() {
            if (lambda - endpoint).abs() <= BOUNDARY_GAP {
                return Err(Error::BoundaryEigenvalue {
                    eigenvalue: lambda,
                    endpoint,
                });
            }
        }
    }
    let d = spectrum.dim();
    let selected: Vec<usize> = (0..d)
        .filter(|&i| interval.contains(spectrum.eigenvalues[i]))
        .collect();
    let mut basis = DMatrix::zeros(d, selected.len());
    for (col, &i) in selected.iter().enumerate() {
        basis.set_column(col, &spectrum.eigenvectors.column(i));
    }
    let projection = &basis * basis.transpose();
    Ok(SpectralProjection {
        projection,
        rank: selected.len(),
        interval,
        basis,
    })
}

/// Principal square root of a positive semidefinite spectrum.
fn psd_sqrt_eigenvalues(spectrum: &SymmetricSpectrum) -> Result<Vec<f64>> {
    let scale = spectrum
        .eigenvalues
        .iter()
        .fold(1.0f64, |m, x| m.max(x.abs()));
    spectrum.eigenvalues
        .iter()
        .map(|&x| {
            if x >= 0.0 {
                Ok(x.sqrt())
            } else if x >= -PSD_CLAMP * scale {
                Ok(0.0)
            } else {
                Err(Error::NegativeEigenvalue { eigenvalue: x })
            }
        })
        .collect()
}

/// `A = U P` with `U` orthogonal and `P = sqrt(A^T A)`.
pub fn polar_decompose(a: &OperatorMatrix) -> Result<PolarFactors> {
    let gram = OperatorMatrix(symmetrize(&a.0.tr_mul(&a.0)));
    let spectrum = symmetric_eigen(&gram)?;
    let roots = psd_sqrt_eigenvalues(&spectrum)?;
    let smallest = roots.iter().copied().fold(f64::INFINITY, f64::min);
    if smallest <= SINGULAR_THRESHOLD {
        return Err(Error::Singular { smallest });
    }
    let v = &spectrum.eigenvectors;
    let d = a.dim();
    let root_diag = DMatrix::from_diagonal(&DVector::from_vec(roots.clone()));
    let inv_diag = DMatrix::from_diagonal(&DVector::from_iterator(d, roots.iter().map(|r| 1.0 / r)));
    let positive = symmetrize(&(v * root_diag * v.transpose()));
    let unitary = refine_unitary(&a.0 * v * inv_diag * v.transpose());
    Ok(PolarFactors { unitary, positive })
}

/// Newton iteration `U <- (U + U^{-T}) / 2`. Squaring `A` to form `A^T A`
/// costs accuracy in the directions of small singular values; a couple of
/// steps restore orthogonality to working precision.
fn refine_unitary(mut u: DMatrix<f64>) -> DMatrix<f64> {
    let d = u.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    for _ in 0..POLAR_NEWTON_STEPS {
        if (u.tr_mul(&u) - &id).norm() <= 4.0 * f64::EPSILON * d as f64 {
            break;
        }
        match u.clone().try_inverse() {
            Some(inv) => u = (&u + inv.transpose()) * 0.5,
            None => break,
        }
    }
    u
}

/// `‖(I - A A^T) - U (I - A^T A) U^T‖` for the polar unitary `U` of `A`.
pub fn flip_identity_residual(a: &OperatorMatrix) -> Result<f64> {
    let polar = polar_decompose(a)?;
    let d = a.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let left = &id - &a.0 * a.0.transpose();
    let inner = &id - a.0.tr_mul(&a.0);
    let right = &polar.unitary * inner * polar.unitary.transpose();
    Ok(matrix_norm(&(left - right)))
}

/// Same identity rewritten for `A = I - S`:
/// `‖(S + S^T - S S^T) - U (S + S^T - S^T S) U^T‖`.
pub fn complement_flip_residual(s: &OperatorMatrix) -> Result<f64> {
    let norm = operator_norm(s);
    if norm >= 1.0 {
        return Err(Error::NotContraction { norm });
    }
    let d = s.dim();
    let a = OperatorMatrix(DMatrix::identity(d, d) - &s.0);
    let polar = polar_decompose(&a)?;
    let sym = &s.0 + s.0.transpose();
    let left = &sym - &s.0 * s.0.transpose();
    let inner = &sym - s.0.tr_mul(&s.0);
    let right = &polar.unitary * inner * polar.unitary.transpose();
    Ok(matrix_norm(&(left - right)))
}

/// `N = (I - U)^T (I - U)`.
pub fn defect_operator(u: &OperatorMatrix) -> OperatorMatrix {
    let d = u.dim();
    let complement = DMatrix::identity(d, d) - &u.0;
    OperatorMatrix(symmetrize(&complement.tr_mul(&complement)))
}

fn require_contraction(u: &OperatorMatrix) -> Result<()> {
    let norm = operator_norm(u);
    if norm >= 1.0 {
        return Err(Error::NotContraction { norm });
    }
    Ok(())
}

fn certify(operator: DMatrix<f64>, bound: f64, projection: SpectralProjection) -> Result<CertifiedContraction> {
    let norm = matrix_norm(&operator);
    if norm > bound + CERTIFICATE_SLACK {
        return Err(Error::CertificateFailure { norm, bound });
    }
    Ok(CertifiedContraction {
        operator: OperatorMatrix(operator),
        norm,
        bound,
        projection,
    })
}

/// `T = (I - U) P` where `P` projects onto the defect spectrum below `1 - eps`.
/// Certified `‖T‖ <= sqrt(1 - eps)`.
pub fn low_defect_contraction(u: &OperatorMatrix, eps: f64) -> Result<CertifiedContraction> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    require_contraction(u)?;
    let spectrum = symmetric_eigen(&defect_operator(u))?;
    let projection = spectral_projection(&spectrum, Interval::below(1.0 - eps))?;
    let d = u.dim();
    let t = (DMatrix::identity(d, d) - &u.0) * &projection.projection;
    certify(t, (1.0 - eps).sqrt(), projection)
}

/// `T = (I - U)^{-1} R` where `R` projects onto `(I - U) P~(H)` and `P~`
/// selects the defect spectrum above `1 + eps`. Certified
/// `‖T‖ <= 1 / sqrt(1 + eps)`.
pub fn high_defect_contraction(u: &OperatorMatrix, eps: f64) -> Result<CertifiedContraction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    require_contraction(u)?;
    let spectrum = symmetric_eigen(&defect_operator(u))?;
    let projection = spectral_projection(&spectrum, Interval::above(1.0 + eps))?;
    let d = u.dim();
    let complement = DMatrix::identity(d, d) - &u.0;
    let image = &complement * &projection.basis;
    let q = orthonormalize(&image);
    let r = &q * q.transpose();
    let t = complement
        .lu()
        .solve(&r)
        .ok_or(Error::Singular { smallest: 0.0 })?;
    certify(t, 1.0 / (1.0 + eps).sqrt(), projection)
}

/// Modified Gram-Schmidt with one reorthogonalisation pass. Columns must be
/// linearly independent.
pub(crate) fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let n = q.column(j).norm();
        q.column_mut(j).unscale_mut(n);
    }
    q
}

/// Number of singular values strictly above `tau`.
pub fn numerical_rank(a: &OperatorMatrix, tau: f64) -> Result<usize> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rank threshold must be positive, got {tau}"
        )));
    }
    Ok(a.0
        .singular_values()
        .iter()
        .filter(|&&s| s > tau)
        .count())
}

/// Orthonormal basis (as columns) of the column space of `m`, keeping left
/// singular vectors whose singular value exceeds `tau`.
pub fn range_basis(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tau)
        .collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        basis.set_column(col, &u.column(i));
    }
    basis
}
