#![allow(dead_code)]

use ifs_core::geometry::{Point, PointCloud};
use ifs_core::ifs::{AffineContraction, IfsSystem};
use ifs_core::operators::{operator_norm, OperatorMatrix};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::Rng;

pub fn random_matrix(rng: &mut StdRng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random matrix rescaled to operator norm `target`.
pub fn random_with_norm(rng: &mut StdRng, d: usize, target: f64) -> OperatorMatrix {
    loop {
        let m = OperatorMatrix::new(random_matrix(rng, d)).unwrap();
        let n = operator_norm(&m);
        if n > 1e-3 {
            return m.scaled(target / n);
        }
    }
}

pub fn random_vector(rng: &mut StdRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_cloud(rng: &mut StdRng, d: usize, n: usize) -> PointCloud {
    PointCloud::new(d, random_vector(rng, d * n, 1.0)).unwrap()
}

pub fn random_system(rng: &mut StdRng, d: usize, maps: usize, max_norm: f64) -> IfsSystem {
    let maps = (0..maps)
        .map(|_| {
            let norm = rng.gen_range(0.05..max_norm);
            AffineContraction::new(
                random_with_norm(rng, d, norm),
                Point::new(random_vector(rng, d, 1.0)).unwrap(),
            )
            .unwrap()
        })
        .collect();
    IfsSystem::new(maps).unwrap()
}

pub fn scalar_map(a: f64, b: f64) -> AffineContraction {
    AffineContraction::new(
        OperatorMatrix::from_rows(1, &[a]).unwrap(),
        Point::new(vec![b]).unwrap(),
    )
    .unwrap()
}

pub fn cantor() -> IfsSystem {
    IfsSystem::new(vec![scalar_map(1.0 / 3.0, 0.0), scalar_map(1.0 / 3.0, 2.0 / 3.0)]).unwrap()
}

pub fn unit_interval() -> IfsSystem {
    IfsSystem::new(vec![scalar_map(0.5, 0.0), scalar_map(0.5, 0.5)]).unwrap()
}

/// Left endpoints of the `2^depth` intervals of the middle-thirds construction,
/// built from ternary digit strings over {0, 2}.
pub fn ternary_cantor(depth: u32) -> PointCloud {
    let mut xs = Vec::with_capacity(1 << depth);
    for bits in 0u64..(1 << depth) {
        let mut x = 0.0;
        let mut scale = 1.0;
        for i in 0..depth {
            scale /= 3.0;
            if bits >> (depth - 1 - i) & 1 == 1 {
                x += 2.0 * scale;
            }
        }
        xs.push(x);
    }
    // right endpoint of the last interval so that 1 is represented too
    xs.push(1.0);
    PointCloud::new(1, xs).unwrap()
}
