use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gtn_bench::{binary_states, random_states};
use gtn_core::fit::{fit_quadratic, CurveMeta, CurveSeries, Pairing, Split};
use gtn_core::train::{nll, nll_gradient, train, TrainConfig};
use gtn_core::Mps;

fn bench_epoch(c: &mut Criterion) {
    for (m, chi, n) in [(64usize, 8usize, 64usize), (144, 16, 128)] {
        let states = binary_states(m, n, 5);
        let initial = Mps::random(m, 2, chi, 1).unwrap();
        let cfg = TrainConfig {
            eta: 0.02,
            epochs: 1,
            early_stop_delta: 0.0,
            ..TrainConfig::default()
        };
        c.bench_function(&format!("train epoch M={m} chi={chi} N={n}"), |bench| {
            bench.iter(|| train(black_box(&initial), black_box(&states), None, &cfg).unwrap())
        });
    }
}

fn bench_nll(c: &mut Criterion) {
    let m = 256;
    let psi = Mps::random(m, 2, 16, 2).unwrap();
    let states = random_states(m, 128, 6);
    c.bench_function("nll M=256 chi=16 N=128", |bench| {
        bench.iter(|| nll(black_box(&psi), black_box(&states)).unwrap())
    });
    c.bench_function("nll_gradient mid-site M=256 chi=16 N=128", |bench| {
        bench.iter(|| nll_gradient(black_box(&psi), black_box(&states), 128).unwrap())
    });
}

fn bench_fits(c: &mut Criterion) {
    let meta = CurveMeta {
        chi: Some(16),
        n: Some(256),
        split: Split::Train,
        pairing: Pairing::Intra,
        dataset: "bench".into(),
        theta: 1.0,
        h: 1,
    };
    let points: Vec<(f64, f64)> = (1..=50)
        .map(|i| {
            let m = (i * 16) as f64;
            (m, 0.07 * m - 3e-5 * m * m + 1.0 + (i as f64 * 0.37).sin() * 0.01)
        })
        .collect();
    let series = CurveSeries::new(points, meta).unwrap();
    c.bench_function("fit_quadratic 50 points", |bench| {
        bench.iter(|| fit_quadratic(black_box(&series)).unwrap())
    });
}

criterion_group!(benches, bench_epoch, bench_nll, bench_fits);
criterion_main!(benches);
