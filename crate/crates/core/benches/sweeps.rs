//! Sequential vs parallel timings for the batch workloads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use localsign_core::arith::primes_in;
use localsign_core::classnum::{ensure_table, HurwitzTable};
use localsign_core::murmur::{scan_wq, Beta, FamilySpec};
use localsign_core::verify::{delta_grid, equidist_sweep};
use localsign_core::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn hurwitz_table(c: &mut Criterion) {
    let mut g = c.benchmark_group("hurwitz_table");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 200_000), &exec, |b, &exec| {
            b.iter(|| HurwitzTable::build(black_box(200_000), exec).unwrap())
        });
    }
    g.finish();
}

fn delta_sweep(c: &mut Criterion) {
    let grid = delta_grid(2, 8, 60, 60);
    let mut g = c.benchmark_group("equidist_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, grid.len()), &exec, |b, &exec| b.iter(|| equidist_sweep(&grid, exec)));
    }
    g.finish();
}

fn murmuration_scan(c: &mut Criterion) {
    ensure_table(200_000, Exec::Parallel).unwrap();
    let spec = FamilySpec::TypeI { m: 1, omega: None };
    let ells = primes_in(2, 200);
    let mut g = c.benchmark_group("scan_wq");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 300), &exec, |b, &exec| {
            b.iter(|| scan_wq(&spec, 2, &ells, 300, Beta::TWO, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, hurwitz_table, delta_sweep, murmuration_scan);
criterion_main!(benches);
