use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gtn_bench::{binary_states, random_states};
use gtn_core::Mps;

fn bench_overlap(c: &mut Criterion) {
    for (m, chi) in [(64usize, 8usize), (256, 8), (256, 32)] {
        let a = Mps::random(m, 2, chi, 1).unwrap();
        let b = Mps::random(m, 2, chi, 2).unwrap();
        c.bench_function(&format!("log_overlap M={m} chi={chi}"), |bench| {
            bench.iter(|| black_box(&a).log_overlap(black_box(&b)).unwrap())
        });
    }
}

fn bench_amplitude(c: &mut Criterion) {
    let m = 256;
    let psi = Mps::random(m, 2, 16, 3).unwrap();
    let states = random_states(m, 32, 10);
    c.bench_function("log_amplitude M=256 chi=16 x32", |bench| {
        bench.iter(|| {
            for x in &states {
                black_box(psi.log_amplitude(black_box(x)).unwrap());
            }
        })
    });
}

fn bench_superposition(c: &mut Criterion) {
    let states = binary_states(32, 64, 7);
    c.bench_function("superposition N=64 M=32", |bench| {
        bench.iter(|| Mps::superposition(black_box(&states)).unwrap())
    });
}

criterion_group!(benches, bench_overlap, bench_amplitude, bench_superposition);
criterion_main!(benches);
