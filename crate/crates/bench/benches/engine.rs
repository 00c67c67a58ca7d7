//! Benchmarks over the hot paths: power application with refinement, stage
//! verification, return-spectrum recursion, and the truncated metric.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rankone::arith::{rat, rat_zero};
use rankone::sidon::{verify_sidon_stage, SamplePlan};
use rankone::{image_measure, r_truncated, return_spectrum, CellSet, Int};
use rankone_bench::{generated, three_stage};

fn bench_image_measure(c: &mut Criterion) {
    let cons = three_stage();
    let tower = CellSet::tower(&cons, 1).unwrap();
    let m = Int::from(97);
    c.bench_function("image_measure tower1 m=97 depth 4", |b| {
        b.iter(|| {
            let est = image_measure(&cons, black_box(&m), &tower, &tower, 4).unwrap();
            black_box(est.resolved)
        })
    });
}

fn bench_verify_stage(c: &mut Criterion) {
    let cons = generated();
    c.bench_function("verify_sidon_stage stage 2 of 4", |b| {
        b.iter(|| {
            let cert = verify_sidon_stage(&cons, black_box(2), 3, &rat_zero()).unwrap();
            black_box(cert.verdict.is_verified())
        })
    });
}

fn bench_return_spectrum(c: &mut Criterion) {
    let cons = three_stage();
    c.bench_function("return_spectrum stage 1 depth 4", |b| {
        b.iter(|| {
            let spec = return_spectrum(&cons, black_box(1), 4).unwrap();
            black_box(spec.entries.len())
        })
    });
}

fn bench_metric(c: &mut Criterion) {
    let a = three_stage();
    let b_cons = generated();
    let plan = SamplePlan::new(16, 1);
    let tol = rat(1_000_000, 1);
    c.bench_function("r_truncated K=3 exh:16", |b| {
        b.iter(|| {
            let report = r_truncated(&a, &b_cons, black_box(3), &plan, &tol).unwrap();
            black_box(report.r_hat)
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_image_measure, bench_verify_stage, bench_return_spectrum, bench_metric
}
criterion_main!(benches);
