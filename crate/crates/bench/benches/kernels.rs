use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use swflow_bench::planar_state;
use swflow_core::{curvature, gradients, step_imex, step_rk4, sw_energy_k, GaugePhase, RhsKind, SwParams};

fn energy_and_gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradients");
    for n in [16, 32, 64] {
        let st = planar_state(n, 1);
        for k in 0..=2 {
            let p = SwParams::new(k, -1.0);
            group.bench_with_input(BenchmarkId::new(format!("k{k}"), n), &st, |b, st| {
                b.iter(|| gradients(black_box(&st.a), black_box(&st.phi), &p).unwrap())
            });
        }
    }
    group.finish();

    let st = planar_state(32, 2);
    c.bench_function("energy k1 n32", |b| {
        b.iter(|| sw_energy_k(black_box(&st.a), black_box(&st.phi), &SwParams::new(1, -1.0)).unwrap())
    });
    c.bench_function("curvature n64", |b| {
        let st = planar_state(64, 3);
        b.iter(|| curvature(black_box(&st.a)).unwrap())
    });
}

fn steppers(c: &mut Criterion) {
    let p = SwParams::new(1, -1.0);
    let mut st = planar_state(32, 4);
    st.theta = Some(GaugePhase::zeros(st.grid()));
    c.bench_function("imex step n32", |b| b.iter(|| step_imex(black_box(&st), 1e-4, &p).unwrap()));
    c.bench_function("rk4 step n32", |b| {
        b.iter(|| step_rk4(black_box(&st), RhsKind::Direct, 1e-5, &p).unwrap())
    });
}

criterion_group!(benches, energy_and_gradients, steppers);
criterion_main!(benches);
