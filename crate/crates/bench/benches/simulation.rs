use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use poolsim_core::validation::{full_allocation_config, sweep_config};
use poolsim_core::{anticipation, anticipation_with_guarantor, run, GuarantorTerms, RateSet, ReceivableSchedule};

fn pricing(c: &mut Criterion) {
    let schedule = ReceivableSchedule::equal(100.0, 12).unwrap();
    let rates = RateSet::new(0.008, 0.02).unwrap();
    let terms = GuarantorTerms::quote(50.0, 0.05, 0.002, 0.008, 12).unwrap();
    c.bench_function("anticipation/12", |b| {
        b.iter(|| anticipation(black_box(&schedule), black_box(0.02), &rates).unwrap())
    });
    c.bench_function("anticipation_with_guarantor/12", |b| {
        b.iter(|| anticipation_with_guarantor(black_box(&schedule), black_box(0.02), &rates, &terms).unwrap())
    });
}

fn runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    group.sample_size(20);
    let riskless = full_allocation_config();
    group.bench_function("full_allocation/36", |b| b.iter(|| run(black_box(&riskless), 1).unwrap()));
    let market = sweep_config();
    group.bench_function("price_sensitive/36", |b| b.iter(|| run(black_box(&market), 1).unwrap()));
    group.finish();
}

criterion_group!(benches, pricing, runs);
criterion_main!(benches);
