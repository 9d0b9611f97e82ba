//! Sequential vs parallel policy on the three data-parallel hot loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use heatbound::grid::{log_space, Grid};
use heatbound::kernel::{build_generator, spectrum};
use heatbound::montecarlo::{simulate, SimConfig};
use heatbound::potentials::Potential;
use heatbound::spi::empirical::{empirical_curve, EmpiricalProblem, PgaSettings};
use heatbound::spi::Weight;
use heatbound::Execution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let p = Potential::power_exponential(3.0, 1).unwrap();
    let cfg = SimConfig { n_paths: 8192, dt: 1e-3, t_final: 0.1, x0: 0.0, seed: 1, box_radius: 3.2 };
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| simulate(&p, black_box(&cfg), exec).unwrap()));
    }
    g.finish();
}

fn empirical(c: &mut Criterion) {
    let p = Potential::quadratic(1.0, 1).unwrap();
    let grid = Grid::symmetric(200, 6.0).unwrap();
    let problem = EmpiricalProblem::new(&p, &grid, &|_| 1.0, &Weight { beta: 0.0 }).unwrap();
    let settings = PgaSettings { restarts: 4, max_iter: 2000, ..PgaSettings::default() };
    let s = log_space(1e-3, 1e-1, 6);
    let mut g = c.benchmark_group("empirical_curve");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| empirical_curve(&problem, black_box(&s), &settings, exec)));
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let p = Potential::quadratic(1.0, 1).unwrap();
    let spec = spectrum(&build_generator(&p, 300, 6.0, 1e-6).unwrap());
    let ts = log_space(0.05, 1.0, 8);
    let mut g = c.benchmark_group("heat_kernels");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| spec.heat_kernels(black_box(&ts), exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, empirical, kernels);
criterion_main!(benches);
