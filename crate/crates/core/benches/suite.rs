use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use multisecant::problems::default_suite;
use multisecant::solver::{Method, SolverConfig};
use multisecant::run_suite;

fn suite_runner(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let suite = default_suite();
    let mut group = c.benchmark_group("default_suite");
    group.sample_size(10);
    // parallelism 1 takes the sequential path; 0 uses every available thread
    for (label, jobs) in [("sequential", 1), ("parallel", 0)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &jobs, |b, &jobs| {
            b.iter(|| run_suite(&Method::ALL, &suite, &cfg, jobs).expect("valid suite"))
        });
    }
    group.finish();
}

fn single_method(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let suite = default_suite();
    let mut group = c.benchmark_group("method");
    group.sample_size(10);
    for method in Method::ALL {
        group.bench_function(method.name(), |b| {
            b.iter(|| run_suite(&[method], &suite, &cfg, 1).expect("valid suite"))
        });
    }
    group.finish();
}

criterion_group!(benches, suite_runner, single_method);
criterion_main!(benches);
