//! Sequential vs rayon execution for the ensemble and Monte-Carlo loops,
//! plus direct vs FFT periodic convolution.
//!
//! `CHAOSKIT_THREADS` caps the worker pool as it does for the binary.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use chaoskit::crn::parse_network;
use chaoskit::field::DensityField;
use chaoskit::kernels::Kernel;
use chaoskit::ldp::{center_function, exp_moment_estimate, PairStatistic};
use chaoskit::meanfield::{periodic_convolve, ConvolutionMethod};
use chaoskit::par::{configure_threads_from_env, Execution};
use chaoskit::particle::{ensemble, DiffusionSpec, SimulationConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn ensemble_bench(c: &mut Criterion) {
    configure_threads_from_env();
    let net = parse_network("kernel k = tophat(radius=0.2, rate=3)\nS1 + S2 -> S2 + S2 @ k\n").unwrap();
    let rho0 = DensityField::uniform(1, 32, &[0.5, 0.5]);
    let mut config = SimulationConfig::new(net, DiffusionSpec::uniform(2, 0.05), rho0, 1024);
    config.t_final = 0.05;
    config.hist_bins = Some(32);
    let mut group = c.benchmark_group("ensemble_16x1024");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(ensemble(&config, 16, exec).unwrap())));
    }
    group.finish();
}

fn exp_moment_bench(c: &mut Criterion) {
    configure_threads_from_env();
    let p = 64;
    let rho = vec![1.0 / p as f64; p];
    let f = PairStatistic::cos_product(p);
    let f = center_function(&f.scaled(1.0 / f.linf()), &rho).unwrap();
    let mut group = c.benchmark_group("exp_moment_n256_20k");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(exp_moment_estimate(&f, &rho, 256, 1.0, 20_000, 7, exec).unwrap()))
        });
    }
    group.finish();
}

fn convolution_bench(c: &mut Criterion) {
    let kernel = Kernel::tophat(0.2, 3.0).unwrap();
    let mut group = c.benchmark_group("convolution_1d");
    for m in [64usize, 256, 1024] {
        let u: Vec<f64> = (0..m).map(|i| 1.0 + (i as f64 / m as f64 * 6.0).sin()).collect();
        for (name, method) in [("direct", ConvolutionMethod::Direct), ("fft", ConvolutionMethod::Fft)] {
            group.bench_with_input(BenchmarkId::new(name, m), &u, |b, u| {
                b.iter(|| black_box(periodic_convolve(&kernel, u, 1, m, method)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, ensemble_bench, exp_moment_bench, convolution_bench);
criterion_main!(benches);
