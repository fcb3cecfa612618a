//! Sequential vs rayon execution for the hot loops: per-feature differences,
//! random-model calibration, and Monte Carlo trials.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sfit::engine::{calibrate_beta, log_grid, sfit_first_order, SfitConfig};
use sfit::model::{Mlp, MlpConfig};
use sfit::par::ExecMode;
use sfit::sim::{gen_main_dgp, run_power_study, StudyConfig};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn first_order(c: &mut Criterion) {
    let d2 = gen_main_dgp(10_000, 1).unwrap();
    let model = Mlp::new(MlpConfig::regression(8, vec![150, 50]), 2).unwrap();
    let mut group = c.benchmark_group("first_order");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = SfitConfig { exec, ..SfitConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sfit_first_order(&model, &d2, &cfg).unwrap())
        });
    }
    group.finish();
}

fn calibration(c: &mut Criterion) {
    let dv = gen_main_dgp(2_000, 3).unwrap();
    let model = Mlp::new(MlpConfig::regression(8, vec![150, 50]), 4).unwrap();
    let grid = log_grid(1e-6, 1e-1, 6);
    let mut group = c.benchmark_group("calibration");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = SfitConfig { exec, ..SfitConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| calibrate_beta(&model, &dv, &cfg, &grid, 8, 5).unwrap())
        });
    }
    group.finish();
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("power_trials");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = StudyConfig::main(2_000, 4);
        cfg.train.hidden = vec![32, 16];
        cfg.train.adam.max_epochs = 5;
        cfg.n_inference = 2_000;
        cfg.cells[0].n2 = 2_000;
        cfg.exec = exec;
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_power_study(&cfg, 6).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, first_order, calibration, trials);
criterion_main!(benches);
