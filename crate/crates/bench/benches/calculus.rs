use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mms_core::calculus::{heat_flow, NeighborGraph, ScalarField};
use mms_core::space::{generate_space, GeneratorSpec, MetricMeasureSpace};
use mms_core::splitting::{busemann_field, gradient_flow_map, BusemannOptions, LineSpec};
use std::hint::black_box;

fn grid(side: usize) -> MetricMeasureSpace {
    generate_space(&GeneratorSpec::EuclideanGrid { dims: vec![side, side], h: 0.1 }).unwrap()
}

fn bench_heat_flow(c: &mut Criterion) {
    let mut group = c.benchmark_group("heat_flow");
    group.sample_size(10);
    for &side in &[11usize, 21] {
        let space = grid(side);
        let graph = NeighborGraph::lattice_axis(&space).unwrap();
        let f = ScalarField::from_fn(&space, |i| (i as f64 * 0.37).sin()).unwrap();
        // pay the one-time eigendecomposition before timing the apply path
        heat_flow(&graph, &f, 0.01).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(side * side), &side, |b, _| {
            b.iter(|| heat_flow(black_box(&graph), black_box(&f), black_box(0.05)).unwrap())
        });
    }
    group.finish();
}

fn bench_flow_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient_flow_map");
    group.sample_size(10);
    for &(base, levels) in &[(5usize, 21usize), (9, 41)] {
        let h = 0.1;
        let spec = GeneratorSpec::Product {
            base: Box::new(GeneratorSpec::EuclideanGrid { dims: vec![base], h }),
            interval: [-(levels as f64 - 1.0) * h / 2.0, (levels as f64 - 1.0) * h / 2.0],
            h,
        };
        let space = generate_space(&spec).unwrap();
        let indices: Vec<usize> = (0..levels).collect();
        let times: Vec<f64> =
            (0..levels).map(|k| -(levels as f64 - 1.0) * h / 2.0 + h * k as f64).collect();
        let line = LineSpec::new(&space, indices, times, 1e-9).unwrap();
        let b = busemann_field(&space, &line, &BusemannOptions::default()).unwrap().b();
        group.bench_with_input(
            BenchmarkId::from_parameter(space.n()),
            &space.n(),
            |bch, _| {
                bch.iter(|| {
                    gradient_flow_map(black_box(&space), black_box(&b), 2.0 * h, Some(&line), None)
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_heat_flow, bench_flow_map);
criterion_main!(benches);
