use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use heavy_atom::bound_integrals::{compute_reduced_integrals, moment_parts, monte_carlo_reduced};
use heavy_atom::exchange_hole::{hole_radius, TabulatedDensity};
use heavy_atom::tf_atom::{solve_universal_with, UniversalGridSpec};
use heavy_atom::{build_atom, default_shape, BoundContext};

const DELTA: f64 = 5.0 / 9.0;
const KAPPA: f64 = 0.5;

fn tf(c: &mut Criterion) {
    c.bench_function("tf_universal_solve", |b| {
        b.iter(|| solve_universal_with(black_box(UniversalGridSpec::default())).unwrap())
    });
    let universal = Arc::new(solve_universal_with(UniversalGridSpec::default()).unwrap());
    c.bench_function("tf_atom_build_z100", |b| {
        b.iter(|| build_atom(black_box(100.0), universal.clone()).unwrap())
    });
}

fn hole(c: &mut Criterion) {
    let universal = Arc::new(solve_universal_with(UniversalGridSpec::default()).unwrap());
    let atom = build_atom(100.0, universal).unwrap();
    let density = TabulatedDensity::new(atom.density().clone());
    c.bench_function("hole_radius_z100", |b| {
        b.iter(|| hole_radius(&density, black_box(0.05)).unwrap())
    });
}

fn bounds(c: &mut Criterion) {
    let universal = Arc::new(solve_universal_with(UniversalGridSpec::default()).unwrap());
    let ctx = BoundContext::new(universal).unwrap();
    let shape = default_shape();
    c.bench_function("moment_parts_z1000", |b| {
        b.iter(|| moment_parts(&ctx, black_box(1000.0), DELTA, KAPPA).unwrap())
    });
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("reduced_integrals", |b| {
        b.iter(|| compute_reduced_integrals(&shape, black_box(1000.0)).unwrap())
    });
    group.bench_function("mc_chunk_z10", |b| {
        b.iter(|| monte_carlo_reduced(&ctx, 10.0, DELTA, KAPPA, black_box(1 << 14), 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, tf, hole, bounds);
criterion_main!(benches);
