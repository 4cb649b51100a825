mod common;

use common::{random_matrix, random_vector, random_with_norm};
use ifs_core::connectivity::{attach_witness, classify, classify_with_witness, Verdict};
use ifs_core::geometry::Point;
use ifs_core::ifs::attractor;
use ifs_core::operators::{operator_norm, OperatorMatrix};
use ifs_core::sw_family::{
    annihilation_witness, build_ifs, connectivity_witness, distance_to_exceptional_union,
    exceptional_subspace, sweep, GridAxis, SweepParams, SwConfig, WGrid, HIGH_DEFECT_TAG,
    LOW_DEFECT_TAG,
};
use ifs_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const EPS: [f64; 2] = [0.1, 0.5];

fn unit_ball_point(rng: &mut StdRng, d: usize) -> Point {
    let v = random_vector(rng, d, 1.0);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Point::new(v.iter().map(|x| x / n.max(1.0)).collect()).unwrap()
}

fn degenerate(err: &Error) -> bool {
    matches!(err, Error::TrivialProjection | Error::BoundaryEigenvalue { .. })
}

fn dvec(p: &Point) -> DVector<f64> {
    DVector::from_column_slice(p.coords())
}

/// `(I - T)^{-1} w` computed with a fresh LU, independent of the library path.
fn oracle_fixed_point(t: &OperatorMatrix, w: &Point) -> DVector<f64> {
    let d = t.dim();
    (DMatrix::identity(d, d) - t.as_matrix())
        .lu()
        .solve(&dvec(w))
        .unwrap()
}

#[test]
fn low_defect_residuals() {
    let mut rng = StdRng::seed_from_u64(31);
    let mut accepted = 0;
    while accepted < 200 {
        let d = rng.gen_range(1..=8);
        let norm = rng.gen_range(0.05..0.95);
        let u = random_with_norm(&mut rng, d, norm);
        let eps = EPS[accepted % 2];
        let h = unit_ball_point(&mut rng, d);
        let wit = match connectivity_witness(&u, eps, &h) {
            Ok(w) => w,
            Err(e) if degenerate(&e) => continue,
            Err(e) => panic!("{e}"),
        };
        assert!(wit.residual <= 1e-10, "residual {}", wit.residual);
        assert!(operator_norm(wit.t()) <= (1.0 - eps).sqrt() + 1e-9);

        let e = oracle_fixed_point(wit.t(), &wit.w);
        let ue = u.as_matrix() * &e;
        assert!((ue - dvec(&wit.w)).norm() <= 1e-10);
        let ph = &wit.contraction.projection.projection * dvec(&h);
        assert!((e - ph).norm() <= 1e-10);
        accepted += 1;
    }
}

#[test]
fn high_defect_residuals() {
    let mut rng = StdRng::seed_from_u64(32);
    let mut accepted = 0;
    while accepted < 200 {
        let d = rng.gen_range(1..=8);
        let norm = rng.gen_range(0.05..0.95);
        let u = random_with_norm(&mut rng, d, norm);
        let eps = EPS[accepted % 2];
        let v = unit_ball_point(&mut rng, d);
        let wit = match annihilation_witness(&u, eps, &v) {
            Ok(w) => w,
            Err(e) if degenerate(&e) => continue,
            Err(e) => panic!("{e}"),
        };
        assert!(wit.residual <= 1e-10, "residual {}", wit.residual);
        assert!(operator_norm(wit.t()) <= 1.0 / (1.0 + eps).sqrt() + 1e-9);

        let e = oracle_fixed_point(wit.t(), &wit.w);
        let image = wit.t().as_matrix() * (u.as_matrix() * e) + dvec(&wit.w);
        assert!(image.norm() <= 1e-10);
        accepted += 1;
    }
}

/// Witnessed systems are kept small enough for a fine attractor to be cheap:
/// `d <= 3`, moderate norms, `eps = 0.5` and a short seed vector.
#[test]
fn witness_coherence_with_lift() {
    let mut rng = StdRng::seed_from_u64(33);
    let mut accepted = 0;
    while accepted < 100 {
        let d = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3u32);
        let norm = rng.gen_range(0.2..0.6);
        let s = random_with_norm(&mut rng, d, norm);
        let u = s.pow(m);
        let scale = rng.gen_range(0.05..0.5);
        let x = unit_ball_point(&mut rng, d);
        let x = Point::new(x.coords().iter().map(|c| c * scale).collect()).unwrap();
        let low = accepted % 2 == 0;
        let built = if low {
            connectivity_witness(&u, 0.5, &x)
                .map(|w| (w.t().clone(), w.w.clone(), w.intersection_witness()))
        } else {
            annihilation_witness(&u, 0.5, &x)
                .map(|w| (w.t().clone(), w.w.clone(), w.intersection_witness()))
        };
        let (t, w, witness) = match built {
            Ok(b) => b,
            Err(e) if degenerate(&e) => continue,
            Err(e) => panic!("{e}"),
        };
        let sys = build_ifs(&SwConfig::new(s, t, w).unwrap()).unwrap();
        let expected_tag = if low { LOW_DEFECT_TAG } else { HIGH_DEFECT_TAG };
        assert_eq!(
            attach_witness(&sys, &witness, m).unwrap(),
            Verdict::ProvablyConnected {
                witness: expected_tag.into()
            }
        );
        for target in [1e-1, 1e-2, 1e-3] {
            let approx = attractor(&sys, target, None).unwrap();
            let verdict = classify(&sys, &approx).unwrap();
            assert!(!verdict.is_disconnected(), "{verdict} at {target}");
            classify_with_witness(&sys, &approx, &witness, m).unwrap();
        }
        accepted += 1;
    }
}

#[test]
fn lift_with_wrong_power_is_rejected() {
    let mut rng = StdRng::seed_from_u64(34);
    let mut checked = 0;
    while checked < 20 {
        let d = rng.gen_range(2..=4);
        let s = random_with_norm(&mut rng, d, 0.6);
        let u = s.pow(2);
        let h = unit_ball_point(&mut rng, d);
        let wit = match connectivity_witness(&u, 0.5, &h) {
            Ok(w) => w,
            Err(e) if degenerate(&e) => continue,
            Err(e) => panic!("{e}"),
        };
        if wit.w.norm() < 1e-3 {
            continue;
        }
        let sys = build_ifs(&SwConfig::new(s, wit.t().clone(), wit.w.clone()).unwrap()).unwrap();
        assert!(attach_witness(&sys, &wit.intersection_witness(), 2).is_ok());
        assert!(matches!(
            attach_witness(&sys, &wit.intersection_witness(), 1),
            Err(Error::WitnessResidual { .. })
        ));
        checked += 1;
    }
}

/// Random `d x d` matrix of rank at most `r`.
fn low_rank(rng: &mut StdRng, d: usize, r: usize, norm: f64) -> OperatorMatrix {
    let a = DMatrix::from_fn(d, r, |_, _| rng.gen_range(-1.0..1.0));
    let b = DMatrix::from_fn(r, d, |_, _| rng.gen_range(-1.0..1.0));
    let m = OperatorMatrix::new(a * b).unwrap();
    let n = operator_norm(&m);
    if n == 0.0 {
        m
    } else {
        m.scaled(norm / n)
    }
}

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&x| x > 1e-9 * top.max(1.0)).count()
}

#[test]
fn exceptional_subspaces_are_subspaces() {
    let mut rng = StdRng::seed_from_u64(35);
    for trial in 0..100 {
        let d = rng.gen_range(1..=6);
        let r = rng.gen_range(0..=d);
        let s = low_rank(&mut rng, d, r.max(1), 0.5);
        let s = if r == 0 { s.scaled(0.0) } else { s };
        let t_norm = rng.gen_range(0.1..0.9);
        let t = random_with_norm(&mut rng, d, t_norm);
        let n = rng.gen_range(1..=8u32);
        let x = exceptional_subspace(&s, &t, n).unwrap();
        assert_eq!(x.ambient_dim(), d);
        assert!(x.dim() <= d);
        let gram = x.basis.transpose() * &x.basis;
        assert!((gram - DMatrix::identity(x.dim(), x.dim())).norm() <= 1e-12, "trial {trial}");

        // random combinations of basis vectors stay inside
        for _ in 0..10 {
            let coeffs = DVector::from_fn(x.dim(), |_, _| rng.gen_range(-3.0..3.0));
            let v = &x.basis * &coeffs;
            assert!(x.distance(v.as_slice()) <= 1e-12 * v.norm().max(1.0));
        }

        // dimension equals rank of range(S) + T^n range(S) since the
        // transformation applied afterwards is invertible
        let sm = s.as_matrix();
        let tn = t.pow(n).into_matrix();
        let mut stacked = DMatrix::zeros(d, 2 * d);
        stacked.columns_mut(0, d).copy_from(sm);
        stacked.columns_mut(d, d).copy_from(&(&tn * sm));
        let expected = numeric_rank(&stacked);
        assert_eq!(x.dim(), expected, "trial {trial} d={d} r={r} n={n}");
        if expected < d {
            assert!(x.dim() < d);
            // a generic vector then lies off the subspace
            let probe = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            assert!(x.distance(probe.as_slice()) > 0.0);
        }
    }
}

#[test]
fn rank_one_s_leaves_dimension_deficiency() {
    let mut rng = StdRng::seed_from_u64(36);
    for _ in 0..50 {
        let d = rng.gen_range(3..=6);
        let s = low_rank(&mut rng, d, 1, 0.5);
        let t_norm = rng.gen_range(0.1..0.9);
        let t = random_with_norm(&mut rng, d, t_norm);
        for n in 1..=8 {
            assert!(exceptional_subspace(&s, &t, n).unwrap().dim() <= 2);
        }
    }
}

#[test]
fn union_distance_is_min_over_n() {
    let mut rng = StdRng::seed_from_u64(37);
    for _ in 0..50 {
        let d = rng.gen_range(2..=5);
        let s = low_rank(&mut rng, d, 1, 0.5);
        let t = OperatorMatrix::new(random_matrix(&mut rng, d)).unwrap();
        let t = t.scaled(0.5 / operator_norm(&t));
        let w = Point::new(random_vector(&mut rng, d, 2.0)).unwrap();
        let union = distance_to_exceptional_union(&s, &t, &w, 5).unwrap();
        let each: Vec<f64> = (1..=5)
            .map(|n| exceptional_subspace(&s, &t, n).unwrap().distance(w.coords()))
            .collect();
        assert_eq!(union, each.iter().copied().fold(f64::INFINITY, f64::min));
        assert!(union <= w.norm() + 1e-12);
    }
}

/// Rank-one S and a quarter turn T in three dimensions, sliced along e3.
#[test]
fn far_from_exceptional_union_is_disconnected() {
    let s = OperatorMatrix::diagonal(&[0.5, 0.0, 0.0]).unwrap();
    let t = OperatorMatrix::from_rows(3, &[0.0, -0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
    let grid = WGrid {
        origin: vec![0.3, 0.0, 0.0],
        axes: vec![GridAxis {
            direction: vec![0.0, 0.0, 1.0],
            start: -1.0,
            end: 1.0,
            count: 11,
        }],
    };
    let params = SweepParams {
        target_r: 1e-3,
        rho: None,
        n_max: 8,
    };
    let report = sweep(&s, &t, &grid, &params).unwrap();
    assert_eq!(report.cells.len(), 11);
    let mut far = 0;
    for cell in &report.cells {
        if cell.exceptional_distance > 0.1 {
            far += 1;
            let verdict = cell.outcome.as_ref().unwrap();
            assert!(verdict.is_disconnected(), "{:?} {verdict}", cell.w);
        }
    }
    assert!(far >= 8);
}
