use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;

use rkls::linalg::pinv;
use rkls::solvers::{kaczmarz_step, mp_step};
use rkls::BlockSampler;
use rkls_bench::{poly_system, random_matrix};

fn theta_block(c: &mut Criterion) {
    let mut group = c.benchmark_group("theta_block");
    let (op, _) = poly_system::<f32>(4000, 784, 10, 1);
    for j in [100usize, 400] {
        let mut sampler = BlockSampler::new(4001, j, 2).unwrap();
        let rows = sampler.next_block().to_vec();
        group.bench_with_input(BenchmarkId::new("col_block_f32_m784", j), &j, |b, _| {
            b.iter(|| op.theta_block(&(0..4001).collect::<Vec<_>>(), &rows).unwrap())
        });
    }
    group.finish();
}

fn pseudo_inverse(c: &mut Criterion) {
    let mut group = c.benchmark_group("pinv");
    group.sample_size(20);
    for (m, n) in [(400usize, 100usize), (2000, 200)] {
        let a = random_matrix(m, n, 3);
        group.bench_function(format!("{m}x{n}"), |b| b.iter(|| pinv(&a).unwrap()));
    }
    group.finish();
}

fn solver_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("steps");
    group.sample_size(20);
    let (op, z) = poly_system::<f64>(1000, 64, 10, 4);
    let mut sampler = BlockSampler::new(1001, 100, 5).unwrap();
    group.bench_function("mp_step_n1000_j100", |b| {
        let mut w = DMatrix::zeros(1001, 10);
        let mut r = z.clone();
        b.iter(|| mp_step(&op, &mut w, &mut r, sampler.next_block()).unwrap())
    });
    group.bench_function("kaczmarz_step_n1000_j100", |b| {
        let mut w = DMatrix::zeros(1001, 10);
        b.iter(|| kaczmarz_step(&op, &mut w, &z, sampler.next_block()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, theta_block, pseudo_inverse, solver_steps);
criterion_main!(benches);
