#![allow(dead_code)]

use dichotomy::system::{Projection, ProjectionFamily, SystemDescription};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RandomSystem {
    pub sys: SystemDescription,
    pub proj: ProjectionFamily,
    pub matrices: Vec<DMatrix<f64>>,
    pub rank: usize,
}

fn block(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            rng.gen_range(lo..hi)
        } else {
            rng.gen_range(-0.15..0.15)
        }
    })
}

/// `A(n) = T·diag(B_n, C_n)·T⁻¹` with contracting `B_n`, expanding `C_n`
/// and `P = T·diag(I, 0)·T⁻¹`, so the family is compatible by construction.
pub fn random_dichotomic(seed: u64, dim: usize, n_max: usize) -> RandomSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = rng.gen_range(1..dim);
    let t = DMatrix::from_fn(dim, dim, |i, j| {
        rng.gen_range(-0.5..0.5) + if i == j { 1.5 } else { 0.0 }
    });
    let t_inv = t.clone().try_inverse().expect("diagonally dominant");
    let mut matrices = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        let b = block(&mut rng, rank, 0.2, 0.6);
        let c = block(&mut rng, dim - rank, 1.8, 3.0);
        let mut core = DMatrix::zeros(dim, dim);
        core.view_mut((0, 0), (rank, rank)).copy_from(&b);
        core.view_mut((rank, rank), (dim - rank, dim - rank)).copy_from(&c);
        matrices.push(&t * core * &t_inv);
    }
    let mut p = DMatrix::zeros(dim, dim);
    for i in 0..rank {
        p[(i, i)] = 1.0;
    }
    let p = &t * p * &t_inv;
    RandomSystem {
        sys: SystemDescription::explicit(matrices.clone()).unwrap(),
        proj: ProjectionFamily::constant(Projection::Matrix(p)).unwrap(),
        matrices,
        rank,
    }
}

/// Unstructured random matrices with entries in `[-1, 1]`.
pub fn random_dense(seed: u64, dim: usize, n_max: usize) -> (SystemDescription, Vec<DMatrix<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrices: Vec<_> = (0..=n_max)
        .map(|_| DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    (SystemDescription::explicit(matrices.clone()).unwrap(), matrices)
}

/// `A(m)···A(n+1)` by plain multiplication.
pub fn naive_product(matrices: &[DMatrix<f64>], m: usize, n: usize) -> DMatrix<f64> {
    let dim = matrices[0].nrows();
    let mut out = DMatrix::identity(dim, dim);
    for k in n + 1..=m {
        out = &matrices[k] * out;
    }
    out
}

pub fn rel_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
    (a - b).norm() <= tol * scale
}
