use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use psphere::geomcheck::{self, GeomCheckConfig};
use psphere::instances;
use psphere::optimizer::{multistart, SolverConfig};
use psphere::par::Execution;
use psphere::SpherePNorm;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn geometry(c: &mut Criterion) {
    let mut group = c.benchmark_group("geomcheck");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = GeomCheckConfig { trials: 20, exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| black_box(geomcheck::run(cfg)))
        });
    }
    group.finish();
}

fn nnpca_multistart(c: &mut Criterion) {
    let n = 40;
    let inst = instances::nnpca_instance(n, 0).unwrap();
    let s = SpherePNorm::new(n, 4.0).unwrap();
    let starts = instances::positive_starts(&s, 16, 0);
    let cfg = SolverConfig { max_iters: 500, ..Default::default() };
    let mut group = c.benchmark_group("nnpca_multistart");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(multistart(&inst.problem(), &s, &starts, &cfg, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, geometry, nnpca_multistart);
criterion_main!(benches);
