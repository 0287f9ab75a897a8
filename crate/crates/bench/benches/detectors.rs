use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use graphscan::electrical::UstSampler;
use graphscan::models::stream_rng;
use graphscan::{g_dual, less, max_flow, resistance_table, LessOptions};
use graphscan_bench::{layered_network, torus_instance};

fn flow(c: &mut Criterion) {
    let net = layered_network(8, 16);
    c.bench_function("max_flow layered 8x16", |b| {
        b.iter(|| max_flow(black_box(&net)))
    });
}

fn dual(c: &mut Criterion) {
    let inst = torus_instance(15, 15, 4.0, 7);
    c.bench_function("g_dual torus(15)", |b| {
        b.iter(|| g_dual(&inst.graph, black_box(&inst.y), 0.5, 0.1).unwrap())
    });
}

fn scan(c: &mut Criterion) {
    let inst = torus_instance(15, 15, 4.0, 7);
    let mut group = c.benchmark_group("less torus(15)");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            less(
                &inst.graph,
                black_box(&inst.y),
                inst.rho,
                &LessOptions::default(),
            )
            .unwrap()
        })
    });
    let parallel = LessOptions {
        parallel: true,
        ..LessOptions::default()
    };
    group.bench_function("parallel", |b| {
        b.iter(|| less(&inst.graph, black_box(&inst.y), inst.rho, &parallel).unwrap())
    });
    group.finish();
}

fn electrical(c: &mut Criterion) {
    let inst = torus_instance(15, 15, 4.0, 7);
    c.bench_function("resistance_table torus(15)", |b| {
        b.iter(|| resistance_table(black_box(&inst.graph)).unwrap())
    });
    let sampler = UstSampler::new(&inst.graph).unwrap();
    let mut rng = stream_rng(7, 1, 0);
    c.bench_function("wilson torus(15)", |b| b.iter(|| sampler.sample(&mut rng)));
}

criterion_group!(benches, flow, dual, scan, electrical);
criterion_main!(benches);
