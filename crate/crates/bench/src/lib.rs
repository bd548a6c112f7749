//! Fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rkls::{one_hot_targets, KernelSpec, SampleMatrix, ThetaOperator, DEFAULT_GAMMA};

/// Unit-norm random samples of dimension `m`.
pub fn unit_samples(n: usize, m: usize, seed: u64) -> SampleMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * m);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        data.extend(row.into_iter().map(|v| v / norm));
    }
    SampleMatrix::from_vec(n, m, data).expect("consistent shape")
}

/// Polynomial-kernel system over `n` samples of dimension `m` with `k`
/// classes, plus its one-hot targets.
pub fn poly_system<T: rkls::Real>(n: usize, m: usize, k: usize, seed: u64) -> (ThetaOperator<T>, DMatrix<T>) {
    let x = unit_samples(n, m, seed);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let z = one_hot_targets(&labels, k).expect("valid labels").cast::<T>();
    let op = ThetaOperator::from_f64_samples(&x, KernelSpec::default(), DEFAULT_GAMMA).expect("valid kernel");
    (op, z)
}

pub fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}
