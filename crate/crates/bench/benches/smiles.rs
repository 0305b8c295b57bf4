use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fxsmile_core::arbitrage::{scan_report, ScanRange};
use fxsmile_core::pricing::variance_swap_replication;
use fxsmile_core::smiles::{fit_delta_polynomial, DeltaKind, StrikeSolverMethod, VolTransform};
use fxsmile_core::{calibrate, load_fixture, ModelSpec, SmileQuoteSet, SmileSection};

const MODELS: [&str; 5] = ["exp-poly-bar-forward", "spline-logm-var-natural", "svi", "sabr", "xssvi"];

fn quotes() -> SmileQuoteSet {
    load_fixture("eurusd-1y-dense").unwrap().standard_pillars().unwrap()
}

fn calibration(c: &mut Criterion) {
    let q = quotes();
    let mut group = c.benchmark_group("calibrate");
    group.sample_size(10);
    for model in MODELS {
        let spec: ModelSpec = model.parse().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(model), &spec, |b, spec| {
            b.iter(|| calibrate(black_box(&q), spec).unwrap())
        });
    }
    group.finish();
}

fn strike_lookup(c: &mut Criterion) {
    let q = load_fixture("usdaed-9m").unwrap();
    let p = fit_delta_polynomial(&q, DeltaKind::BarForward, VolTransform::ExpLog, 4).unwrap();
    let mut group = c.benchmark_group("delta-polynomial lookup");
    for (label, method) in [("newton", StrikeSolverMethod::NEWTON), ("brent", StrikeSolverMethod::BRENT)] {
        group.bench_function(label, |b| b.iter(|| p.lookup_vol(black_box(3.7), method).unwrap()));
    }
    group.finish();
}

fn diagnostics(c: &mut Criterion) {
    let q = quotes();
    let mut group = c.benchmark_group("scan");
    group.sample_size(20);
    for model in MODELS {
        let s = calibrate(&q, &model.parse().unwrap()).unwrap();
        let range = ScanRange::standard(&s).unwrap();
        group.bench_function(model, |b| b.iter(|| scan_report(black_box(&s), range).unwrap()));
    }
    group.finish();
}

fn variance_swap(c: &mut Criterion) {
    let q = quotes();
    let b = q.domestic_discount();
    let mut group = c.benchmark_group("variance swap");
    group.sample_size(10);
    for model in MODELS {
        let s = calibrate(&q, &model.parse().unwrap()).unwrap();
        group.bench_function(model, |bench| {
            bench.iter(|| variance_swap_replication(black_box(&s) as &dyn SmileSection, b).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, calibration, strike_lookup, diagnostics, variance_swap);
criterion_main!(benches);
