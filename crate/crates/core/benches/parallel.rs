//! Sequential vs rayon execution of the three sweep-shaped workloads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qtherm::cavity::{converged_steady_state, CavitySpec, DEFAULT_C_TOL};
use qtherm::diamond::{
    bath_betas, bell_basis, build_diamond, concurrence_vs_numeric, rates_from_betas,
};
use qtherm::exec::{map_indexed, Execution};
use qtherm::lindblad::steady_state;
use qtherm::trajectories::{run_ensemble, TrajectoryModel};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn diamond_grid(c: &mut Criterion) {
    let n = 40;
    let mut group = c.benchmark_group("diamond_grid_40x40");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_indexed(n * n, exec, |k| {
                    let ba = -4.0 + 8.0 * (k / n) as f64 / (n - 1) as f64;
                    let bs = -4.0 + 8.0 * (k % n) as f64 / (n - 1) as f64;
                    black_box(concurrence_vs_numeric(ba, bs).unwrap())
                })
            })
        });
    }
    group.finish();
}

fn cavity_scan(c: &mut Criterion) {
    let g = 1e-3;
    let kappas: Vec<f64> = (0..24)
        .map(|i| 10f64.powf(-1.0 + 3.0 * i as f64 / 23.0))
        .collect();
    let mut group = c.benchmark_group("cavity_kappa_scan_24");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_indexed(kappas.len(), exec, |i| {
                    let spec = CavitySpec::resonant(g, kappas[i] * g, 5e-3 * g, 1e-3 * g, 2);
                    black_box(converged_steady_state(&spec, DEFAULT_C_TOL).map(|s| s.concurrence))
                })
            })
        });
    }
    group.finish();
}

fn trajectory_ensemble(c: &mut Criterion) {
    let spec = rates_from_betas(-1.0, 2.0, 1.0).unwrap();
    let sys = build_diamond(&spec);
    let rho = steady_state(&sys).unwrap().rho;
    let model =
        TrajectoryModel::exact(&sys, &rho, &bath_betas(&spec), Some(&bell_basis())).unwrap();
    let mut group = c.benchmark_group("trajectories_2000x20");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(run_ensemble(&model, 2000, 20.0, 1, exec).unwrap().len()))
        });
    }
    group.finish();
}

criterion_group!(benches, diamond_grid, cavity_scan, trajectory_ensemble);
criterion_main!(benches);
