use std::hint::black_box;

use capgrowth_core::analysis::{derive_panels, synthetic_panel};
use capgrowth_core::*;
use criterion::{criterion_group, criterion_main, Criterion};

/// Roughly the size of the full WID panel: 92 countries over 1980-2022.
fn wid_sized_panel() -> Panel {
    synthetic_panel(WorldKind::Thrift, 92, 0.05, 42).unwrap()
}

fn pipeline(c: &mut Criterion) {
    let panel = wid_sized_panel();
    let config = AnalysisConfig::default();
    let derived = derive_panels(&panel, config.convention);

    c.bench_function("derive_panels/92", |b| b.iter(|| derive_panels(black_box(&panel), config.convention)));
    c.bench_function("pooled_summary/92", |b| {
        b.iter(|| pooled_summary(black_box(&derived), &config, 0.01).unwrap())
    });
    c.bench_function("ladder_sweep/92", |b| b.iter(|| ladder_sweep(black_box(&derived), &config)));
    c.bench_function("snapshot_build/92", |b| {
        b.iter(|| AnalysisSnapshot::build(black_box(&panel), &config).unwrap())
    });

    let snapshot = AnalysisSnapshot::build(&panel, &config).unwrap();
    let figure = FigureSpec::new(Quantity::Theta, 0.01);
    c.bench_function("render_figure/theta", |b| b.iter(|| render_figure(black_box(&snapshot), &figure).unwrap()));
}

fn kernels(c: &mut Criterion) {
    let samples: Vec<WeightedSample> = (0..4000)
        .map(|i| {
            let x = (i as f64 * 0.618).fract() * 0.2 - 0.05;
            WeightedSample::new(x, 0.5 * x + ((i * 7919) % 101) as f64 * 1e-4, 1.0 + (i % 13) as f64)
        })
        .collect();
    c.bench_function("weighted_ols/4000", |b| b.iter(|| weighted_ols(black_box(&samples)).unwrap()));

    let points: Vec<(f64, f64, f64)> = (1980..=2022)
        .map(|y| (y as f64, ((y * 37) % 17) as f64 / 17.0, 1.0))
        .collect();
    c.bench_function("loess/43", |b| b.iter(|| loess(black_box(&points), 0.75, 2).unwrap()));
}

criterion_group!(benches, pipeline, kernels);
criterion_main!(benches);
