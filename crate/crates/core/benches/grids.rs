use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eta_forge::bcyl::{eta_cocycle_integral, make_indicial, Grid2d};
use eta_forge::eta::{eta_quadrature, EtaQuadrature};
use eta_forge::exec::Exec;
use eta_forge::zoo::{random_boundary_pair, random_invertible, random_model, random_model_of_dim};

fn policies() -> [(&'static str, Exec); 2] {
    [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)]
}

fn cocycle_grid(c: &mut Criterion) {
    let model = random_model_of_dim(1, 4);
    let (d, cp) = random_boundary_pair(&model, 1, 0.5, 0.1);
    let ind = make_indicial(&d, &cp, None, &model).unwrap();
    let mut group = c.benchmark_group("cocycle_2d");
    group.sample_size(10);
    for (name, exec) in policies() {
        group.bench_with_input(BenchmarkId::new(name, "64x64"), &exec, |b, &exec| {
            b.iter(|| eta_cocycle_integral(&ind, &model, Grid2d { t: 64, lambda: 64 }, exec).unwrap())
        });
    }
    group.finish();
}

fn eta_batch(c: &mut Criterion) {
    let cases: Vec<_> = (0..64u64)
        .map(|s| {
            let m = random_model(s, 32);
            let d = random_invertible(&m, s, 1.0, 0.02);
            (m, d)
        })
        .collect();
    let q = EtaQuadrature::default();
    let mut group = c.benchmark_group("eta_batch");
    for (name, exec) in policies() {
        group.bench_with_input(BenchmarkId::new(name, cases.len()), &exec, |b, &exec| {
            b.iter(|| {
                let vals = exec.map(&cases, |(m, d)| eta_quadrature(d, m, &q).unwrap().value);
                black_box(vals)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, cocycle_grid, eta_batch);
criterion_main!(benches);
