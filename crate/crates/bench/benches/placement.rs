use chbl_bench::{hash_modes, steady_state};
use chbl_core::SchemeKind;
use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

const M: u64 = 1000;
const CAPACITY: u64 = 8;

fn schemes() -> [(SchemeKind, f64); 3] {
    [
        (SchemeKind::Single, 0.25),
        (SchemeKind::Uniform, 0.5),
        (SchemeKind::Geometric, 0.25),
    ]
}

fn ball_updates(c: &mut Criterion) {
    let mut group = c.benchmark_group("insert_delete_ball");
    for (kind, eps) in schemes() {
        for hash in hash_modes() {
            let mut state = steady_state(kind, hash, eps, CAPACITY, M);
            let id = BenchmarkId::new(kind.name(), hash.name());
            let mut next = u64::MAX >> 2;
            group.bench_function(id, |b| {
                b.iter(|| {
                    next += 1;
                    state.insert_ball(next).unwrap();
                    state.delete_ball(next).unwrap();
                })
            });
        }
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("search_ball");
    for (kind, eps) in schemes() {
        for hash in hash_modes() {
            let state = steady_state(kind, hash, eps, CAPACITY, M);
            let balls: Vec<u64> = state.ball_ids().collect();
            let mut i = 0;
            group.bench_function(BenchmarkId::new(kind.name(), hash.name()), |b| {
                b.iter(|| {
                    i = (i + 1) % balls.len();
                    state.search_ball(balls[i])
                })
            });
        }
    }
    group.finish();
}

fn bin_updates(c: &mut Criterion) {
    let mut group = c.benchmark_group("insert_delete_bin");
    group.sample_size(20);
    for (kind, eps) in schemes() {
        let state = steady_state(kind, hash_modes()[0], eps, CAPACITY, M);
        group.bench_function(kind.name(), |b| {
            b.iter_batched_ref(
                || state.clone(),
                |s| {
                    s.insert_bin(u64::MAX).unwrap();
                    s.delete_bin(u64::MAX).unwrap();
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, ball_updates, search, bin_updates);
criterion_main!(benches);
