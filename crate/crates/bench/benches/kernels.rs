use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hydromodes::evolution::{Rk4, TrajectoryState};
use hydromodes::operators::{assemble_tensor, TensorOptions};
use hydromodes::stability::{StabilityOptions, WavevectorProblem};
use hydromodes_bench::{basis, initial, system};

fn rhs(c: &mut Criterion) {
    let sys = system(16, 16);
    let x = initial(&sys);
    let mut out = vec![0.0; sys.dim()];
    let mut scratch = vec![0.0; sys.dim()];
    c.bench_function("rhs_320", |b| b.iter(|| sys.dynamics.rhs(black_box(&x), &mut out, &mut scratch)));
    let mut rk = Rk4::new(sys.dim());
    let mut s = TrajectoryState::new(x.clone(), 1e-3, 1).unwrap();
    c.bench_function("rk4_step_320", |b| b.iter(|| rk.step(&sys, &mut s).unwrap()));
}

fn tensor(c: &mut Criterion) {
    let b = basis(8, 8);
    let active: Vec<usize> = (0..b.len()).collect();
    let mut g = c.benchmark_group("tensor");
    g.sample_size(10);
    g.bench_function("assemble_160", |bn| bn.iter(|| assemble_tensor(&b, &active, TensorOptions::default()).unwrap()));
    g.finish();
}

fn eigen(c: &mut Criterion) {
    let opts = StabilityOptions { n_roots: 64, ..Default::default() };
    let p = WavevectorProblem::new(1.02, 0.0, 0.0, &opts).unwrap();
    let mut g = c.benchmark_group("stability");
    g.sample_size(20);
    g.bench_function("block_eigen_64", |b| b.iter(|| p.max_growth(black_box(5772.0)).unwrap()));
    g.finish();
}

criterion_group!(benches, rhs, tensor, eigen);
criterion_main!(benches);
