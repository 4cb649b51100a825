mod common;

use common::{random_matrix, random_vector, random_with_norm};
use ifs_core::operators::{
    adjoint, complement_flip_residual, defect_operator, flip_identity_residual, high_defect_contraction,
    low_defect_contraction, operator_norm, polar_decompose, spectral_projection, symmetric_eigen, Interval,
    OperatorMatrix,
};
use ifs_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_symmetric(rng: &mut StdRng, d: usize) -> OperatorMatrix {
    let m = random_matrix(rng, d);
    OperatorMatrix::new(&m + m.transpose()).unwrap()
}

fn random_psd(rng: &mut StdRng, d: usize) -> DMatrix<f64> {
    let b = random_matrix(rng, d);
    b.tr_mul(&b)
}

#[test]
fn norm_bounds_every_image() {
    let mut rng = StdRng::seed_from_u64(10);
    for _ in 0..50 {
        let d = rng.gen_range(1..=8);
        let a = OperatorMatrix::new(random_matrix(&mut rng, d)).unwrap();
        let n = operator_norm(&a);
        for _ in 0..1000 {
            let x = DVector::from_vec(random_vector(&mut rng, d, 1.0));
            assert!((a.as_matrix() * &x).norm() <= (n + 1e-9) * x.norm());
        }
    }
}

#[test]
fn norm_agrees_with_svd() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let d = rng.gen_range(1..=8);
        let m = random_matrix(&mut rng, d);
        let top = m.singular_values().max();
        let n = operator_norm(&OperatorMatrix::new(m).unwrap());
        assert!((n - top).abs() <= 1e-12 * top.max(1.0));
    }
}

#[test]
fn adjoint_inner_product_identity() {
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..200 {
        let d = rng.gen_range(1..=8);
        let a = OperatorMatrix::new(random_matrix(&mut rng, d)).unwrap();
        let at = adjoint(&a);
        let x = DVector::from_vec(random_vector(&mut rng, d, 1.0));
        let y = DVector::from_vec(random_vector(&mut rng, d, 1.0));
        let lhs = (a.as_matrix() * &x).dot(&y);
        let rhs = x.dot(&(at.as_matrix() * &y));
        assert!((lhs - rhs).abs() <= 1e-12);
    }
}

#[test]
fn eigen_invariants() {
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..300 {
        let d = rng.gen_range(1..=16);
        let n = random_symmetric(&mut rng, d);
        let spectrum = symmetric_eigen(&n).unwrap();
        let v = &spectrum.eigenvectors;
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(spectrum.eigenvalues.clone()));
        let scale = operator_norm(&n).max(1e-300);
        assert!((n.as_matrix() * v - v * &lambda).norm() <= 1e-10 * scale);
        assert!((v.tr_mul(v) - DMatrix::identity(d, d)).norm() <= 1e-12);
        assert!(spectrum.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        for j in 0..d {
            let first = v.column(j).iter().copied().find(|x| x.abs() > 1e-12).unwrap();
            assert!(first > 0.0);
        }
    }
}

#[test]
fn projections_are_orthogonal_and_respect_the_spectrum() {
    let mut rng = StdRng::seed_from_u64(14);
    let mut checked = 0;
    while checked < 300 {
        let d = rng.gen_range(1..=8);
        let n = OperatorMatrix::new(random_psd(&mut rng, d)).unwrap();
        let spectrum = symmetric_eigen(&n).unwrap();
        let level = rng.gen_range(0.0..4.0);
        let (lower, upper) = match (
            spectral_projection(&spectrum, Interval::below(level)),
            spectral_projection(&spectrum, Interval::above(level)),
        ) {
            (Ok(l), Ok(u)) => (l, u),
            (Err(Error::BoundaryEigenvalue { .. }), _) | (_, Err(Error::BoundaryEigenvalue { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => panic!("{e}"),
        };
        checked += 1;
        let nm = n.as_matrix();
        let scale = operator_norm(&n).max(1.0);
        for p in [&lower, &upper] {
            let pm = &p.projection;
            assert!((pm * pm - pm).norm() <= 1e-12);
            assert!((pm - pm.transpose()).norm() <= 1e-12);
            assert_eq!(p.rank, pm.trace().round() as usize);
            assert!((nm * pm - pm * nm).norm() <= 1e-10 * scale);
        }
        assert_eq!(lower.rank + upper.rank, d);
        for _ in 0..20 {
            let x = DVector::from_vec(random_vector(&mut rng, d, 1.0));
            let lx = &lower.projection * &x;
            let ux = &upper.projection * &x;
            assert!((nm * &lx).dot(&lx) <= level * lx.norm_squared() + 1e-10 * scale);
            assert!((nm * &ux).dot(&ux) >= level * ux.norm_squared() - 1e-10 * scale);
        }
    }
}

#[test]
fn norm_is_monotone_on_psd_order() {
    let mut rng = StdRng::seed_from_u64(15);
    for _ in 0..300 {
        let d = rng.gen_range(1..=8);
        let n1 = random_psd(&mut rng, d);
        let n2 = &n1 + random_psd(&mut rng, d);
        let a = operator_norm(&OperatorMatrix::new(n1).unwrap());
        let b = operator_norm(&OperatorMatrix::new(n2).unwrap());
        assert!(a <= b + 1e-10);
    }
}

#[test]
fn polar_invariants() {
    let mut rng = StdRng::seed_from_u64(16);
    for _ in 0..300 {
        let d = rng.gen_range(1..=8);
        let a = OperatorMatrix::new(random_matrix(&mut rng, d) + DMatrix::identity(d, d) * 2.0).unwrap();
        let f = match polar_decompose(&a) {
            Ok(f) => f,
            Err(Error::Singular { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let scale = operator_norm(&a).powi(2).max(1.0);
        assert!((&f.unitary * &f.positive - a.as_matrix()).norm() <= 1e-10 * scale);
        assert!((&f.positive * &f.positive - a.as_matrix().tr_mul(a.as_matrix())).norm() <= 1e-10 * scale);
        assert!((f.unitary.tr_mul(&f.unitary) - DMatrix::identity(d, d)).norm() <= 1e-10);
    }
}

#[test]
fn flip_identities_hold() {
    let mut rng = StdRng::seed_from_u64(17);
    let mut done = 0;
    while done < 1000 {
        let d = rng.gen_range(1..=8);
        let a = OperatorMatrix::new(random_matrix(&mut rng, d)).unwrap();
        match flip_identity_residual(&a) {
            Ok(r) => assert!(r <= 1e-10, "flip residual {r}"),
            Err(Error::Singular { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
        let target = rng.gen_range(0.0..0.9);
        let s = random_with_norm(&mut rng, d, target);
        let r = complement_flip_residual(&s).unwrap();
        assert!(r <= 1e-10, "complement residual {r}");
        done += 1;
    }
}

#[test]
fn symmetric_s_gives_zero_complement_residual() {
    let mut rng = StdRng::seed_from_u64(18);
    for _ in 0..100 {
        let d = rng.gen_range(1..=6);
        let m = random_matrix(&mut rng, d);
        let sym = OperatorMatrix::new(&m + m.transpose()).unwrap();
        let s = sym.scaled(0.8 / operator_norm(&sym));
        assert!(complement_flip_residual(&s).unwrap() <= 1e-12);
    }
}

#[test]
fn defect_spectrum_bounds() {
    let mut rng = StdRng::seed_from_u64(19);
    for _ in 0..300 {
        let d = rng.gen_range(1..=8);
        let u = OperatorMatrix::new(random_matrix(&mut rng, d)).unwrap();
        let nu = operator_norm(&u);
        let spectrum = symmetric_eigen(&defect_operator(&u)).unwrap();
        let (lo, hi) = ((1.0 - nu).max(0.0).powi(2), (1.0 + nu).powi(2));
        let tol = 1e-12 * hi;
        for &l in &spectrum.eigenvalues {
            if nu <= 1.0 {
                assert!(l >= lo - tol);
            }
            assert!(l <= hi + tol && l >= -tol);
        }
    }
}

/// Both certificates plus `sqrt(1 + eps) ‖P~ x‖ <= ‖(I - U) P~ x‖`.
#[test]
fn contraction_certificates() {
    let mut rng = StdRng::seed_from_u64(20);
    let mut samples = 0;
    while samples < 1000 {
        let d = rng.gen_range(1..=8);
        let target = rng.gen_range(0.0..0.95);
        let u = random_with_norm(&mut rng, d, target);
        let eps = if samples % 2 == 0 { 0.1 } else { 0.5 };
        let (low, high) = match (low_defect_contraction(&u, eps), high_defect_contraction(&u, eps)) {
            (Ok(l), Ok(h)) => (l, h),
            (Err(Error::BoundaryEigenvalue { .. }), _) | (_, Err(Error::BoundaryEigenvalue { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => panic!("{e}"),
        };
        samples += 1;
        assert!(low.norm <= (1.0 - eps).sqrt() + 1e-9);
        assert!(high.norm <= 1.0 / (1.0 + eps).sqrt() + 1e-9);
        let complement = DMatrix::identity(d, d) - u.as_matrix();
        let p = &high.projection.projection;
        for _ in 0..20 {
            let x = DVector::from_vec(random_vector(&mut rng, d, 1.0));
            let px = p * &x;
            assert!((1.0 + eps).sqrt() * px.norm() <= (&complement * &px).norm() + 1e-12);
        }
    }
}
