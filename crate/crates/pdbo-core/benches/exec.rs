//! Sequential vs parallel execution of the data-parallel workloads.
//! Without the `parallel` feature both variants run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pdbo_core::experiments::toy1_proximal;
use pdbo_core::oracle::grid_bilevel_optimum;
use pdbo_core::problem::estimate_constants;
use pdbo_core::problems::{toy1, toy2};
use pdbo_core::proximal::run_proximal_pdbo;
use pdbo_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid_oracle(c: &mut Criterion) {
    let p = toy2(0.0);
    let mut group = c.benchmark_group("grid_bilevel_optimum");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "toy2@1e-2"), |b| {
            b.iter(|| grid_bilevel_optimum(black_box(&p), 1e-2, exec).unwrap())
        });
    }
    group.finish();
}

fn constants(c: &mut Criterion) {
    let p = toy1();
    let mut group = c.benchmark_group("estimate_constants");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "toy1x2000"), |b| {
            b.iter(|| estimate_constants(black_box(&p), 2000, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let p = toy1();
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("proximal_seed_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "toy1x8"), |b| {
            b.iter(|| {
                exec.map(&seeds, |&s| {
                    let mut cfg = toy1_proximal(&p, s).unwrap();
                    cfg.pdbo.t_max = 50;
                    run_proximal_pdbo(&p, &cfg).unwrap().z_out
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, grid_oracle, constants, seed_sweep);
criterion_main!(benches);
