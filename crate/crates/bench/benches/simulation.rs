use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use neuroage_core::analysis::{measure, MeasureOptions};
use neuroage_core::devices::mosfet_eval;
use neuroage_core::{
    build_ah, build_vif, probit_series, sample_vth_offsets, transient_from, AhParams,
    InitialState, MismatchParams, MosfetParams, TransientConfig, VifParams,
};

fn device(c: &mut Criterion) {
    let p = MosfetParams::nmos();
    c.bench_function("mosfet_eval", |b| {
        b.iter(|| mosfet_eval(black_box(&p), black_box(0.7), black_box(0.4), black_box(0.0)))
    });
}

fn transients(c: &mut Criterion) {
    let cfg = TransientConfig {
        t_stop: 10e-6,
        ..Default::default()
    };
    let ah = build_ah(&AhParams::default()).unwrap();
    let vif = build_vif(&VifParams::default()).unwrap();
    let mut g = c.benchmark_group("transient_10us");
    g.sample_size(10);
    g.bench_function("ah", |b| {
        b.iter(|| transient_from(&ah, &cfg, &InitialState::Quiescent).unwrap())
    });
    g.bench_function("vif", |b| {
        b.iter(|| transient_from(&vif, &cfg, &InitialState::Quiescent).unwrap())
    });
    g.finish();
}

fn spike_measurement(c: &mut Criterion) {
    let n = build_ah(&AhParams {
        i_inj: 10e-6,
        ..Default::default()
    })
    .unwrap();
    let opts = MeasureOptions {
        target_spikes: 10,
        ..Default::default()
    };
    let mut g = c.benchmark_group("measure");
    g.sample_size(10);
    g.bench_function("ah_10_spikes", |b| {
        b.iter(|| measure(&n, &TransientConfig::default(), &opts, None).unwrap())
    });
    g.finish();
}

fn mismatch(c: &mut Criterion) {
    let n = build_vif(&VifParams::default()).unwrap();
    let p = MismatchParams::default();
    c.bench_function("sample_vth_offsets_vif", |b| {
        let mut run = 0u64;
        b.iter(|| {
            run += 1;
            sample_vth_offsets(&n, &p, run)
        })
    });
    let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.618).fract()).collect();
    c.bench_function("probit_series_1000", |b| b.iter(|| probit_series(black_box(&x)).unwrap()));
}

criterion_group!(benches, device, transients, spike_measurement, mismatch);
criterion_main!(benches);
