use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lgin::lorentz::{exp_map, log_map, origin, parallel_transport};
use lgin::model::ForwardCtx;
use lgin::{Curvature, GraphBatch, LorentzPoint, TangentVector};
use ndarray::Array1;

fn manifold_maps(c: &mut Criterion) {
    let cv = Curvature::new(4.0).unwrap();
    let dim = 512;
    let xs = Array1::from_shape_fn(dim, |i| ((i as f64) * 0.37).sin() * 0.1);
    let p = LorentzPoint::from_spatial(xs.view(), cv).unwrap();
    let o = origin(dim, cv);
    let u = Array1::from_shape_fn(dim, |i| ((i as f64) * 0.91).cos() * 0.05);
    let v = TangentVector::at_origin(u.view(), cv);
    let mut g = c.benchmark_group("manifold_512");
    g.bench_function("exp_map", |b| b.iter(|| exp_map(black_box(&o), black_box(&v), cv).unwrap()));
    g.bench_function("log_map", |b| b.iter(|| log_map(black_box(&o), black_box(&p), cv).unwrap()));
    g.bench_function("parallel_transport", |b| {
        b.iter(|| parallel_transport(black_box(&o), black_box(&p), black_box(&v), cv).unwrap())
    });
    g.finish();
}

fn training_step(c: &mut Criterion) {
    let ds = lgin_bench::mutag();
    let graphs: Vec<_> = ds.graphs.iter().take(32).collect();
    let batch = GraphBatch::new(&graphs).unwrap();
    let mut model = lgin_bench::default_model(&ds);
    let mut g = c.benchmark_group("mutag_batch_32");
    g.sample_size(10);
    g.bench_function("forward", |b| b.iter(|| model.evaluate(black_box(&batch)).unwrap()));
    g.bench_function("forward_backward", |b| b.iter(|| model.loss_and_grad(black_box(&batch), ForwardCtx::train(0)).unwrap()));
    g.finish();
}

fn wl_refinement(c: &mut Criterion) {
    let ds = lgin_bench::mutag();
    c.bench_function("wl_distinguishes_mutag_pairs", |b| {
        b.iter(|| {
            ds.graphs
                .windows(2)
                .filter(|w| lgin::wl::wl_distinguishes(&w[0], &w[1]))
                .count()
        })
    });
}

criterion_group!(benches, manifold_maps, training_step, wl_refinement);
criterion_main!(benches);
