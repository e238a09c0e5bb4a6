use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qkdnet_core::channel::{simulate_pulses, EveConfig, Preset};
use qkdnet_core::distill::{cascade_reconcile, toeplitz_hash, CascadeParams, HashPath};
use qkdnet_core::rng::splitmix64;

fn bits(n: usize, seed: u64) -> Vec<u8> {
    (0..n as u64).map(|i| (splitmix64(seed ^ i) & 1) as u8).collect()
}

fn toeplitz(c: &mut Criterion) {
    let mut g = c.benchmark_group("toeplitz");
    for n in [1 << 12, 1 << 14, 1 << 16] {
        let input = bits(n, 1);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("naive", n), &input, |b, x| {
            b.iter(|| toeplitz_hash(black_box(x), 7, n / 2, HashPath::Naive).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("ntt", n), &input, |b, x| {
            b.iter(|| toeplitz_hash(black_box(x), 7, n / 2, HashPath::Ntt).unwrap())
        });
    }
    let n = 1 << 20;
    let input = bits(n, 2);
    g.sample_size(10);
    g.throughput(Throughput::Elements(n as u64));
    g.bench_with_input(BenchmarkId::new("ntt", n), &input, |b, x| {
        b.iter(|| toeplitz_hash(black_box(x), 7, n / 4, HashPath::Ntt).unwrap())
    });
    g.finish();
}

fn cascade(c: &mut Criterion) {
    let mut g = c.benchmark_group("cascade");
    g.sample_size(20);
    let n = 100_000;
    for q in [0.01, 0.03, 0.05] {
        let alice = bits(n, 3);
        let mut bob = alice.clone();
        let step = (1.0 / q) as usize;
        for i in (0..n).step_by(step) {
            bob[(splitmix64(i as u64) as usize) % n] ^= 1;
        }
        g.throughput(Throughput::Elements(n as u64));
        g.bench_function(BenchmarkId::new("100k", q), |b| {
            b.iter(|| cascade_reconcile(&alice, &bob, q, &CascadeParams { passes: 4, seed: 5 }).unwrap())
        });
    }
    g.finish();
}

fn pulses(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_pulses");
    g.sample_size(10);
    let n = 10_000_000;
    for name in ["mitsubishi", "nec", "vienna"] {
        let link = Preset::builtin(name).unwrap().link().unwrap();
        g.throughput(Throughput::Elements(n));
        g.bench_function(BenchmarkId::new(name, n), |b| {
            b.iter(|| simulate_pulses(&link, n, &EveConfig::none(), 11).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, toeplitz, cascade, pulses);
criterion_main!(benches);
