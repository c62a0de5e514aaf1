//! Benchmarks for the paths that dominate a device-scale design run: grid
//! construction, gain-map evaluation, the quantized phase ascent, activation
//! enumeration, beam re-pairing, and a small end-to-end design.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use subchain_bench::bench_efield;
use subchain_core::{
    cyclic_phase_ascent, design_fullchain_kmeans, fibonacci_grid, gain_map,
    max_benefit_assignment, solve_over_activations, weighted_objective, ActivationPattern,
    BeamWeights, DesignConfig,
};

fn whole_sphere_beam(l: usize, l_active: usize, bits: u32) -> BeamWeights {
    let mut indices = vec![None; 2 * l];
    for e in 0..l_active {
        indices[e] = Some((e as u32) % (1 << bits));
        indices[l + e] = Some(0);
    }
    BeamWeights::from_phase_indices(&indices, bits).expect("valid fixture beam")
}

fn grid_construction(c: &mut Criterion) {
    c.bench_function("fibonacci_grid_10001", |b| {
        b.iter(|| fibonacci_grid(black_box(10_001)).unwrap())
    });
}

fn gain_map_device_scale(c: &mut Criterion) {
    let ef = bench_efield(10_001, 5);
    let w = whole_sphere_beam(5, 4, 5);
    c.bench_function("gain_map_10001x5", |b| {
        b.iter(|| gain_map(black_box(&ef), black_box(&w)).unwrap())
    });
}

fn phase_ascent(c: &mut Criterion) {
    let ef = bench_efield(2_001, 5);
    let obj = weighted_objective(&ef, &vec![1.0; 2_001]).unwrap();
    let pattern = ActivationPattern::new(vec![0, 1, 2, 4], vec![0, 2, 3, 4]).unwrap();
    c.bench_function("cyclic_phase_ascent_l5_la4_b5_r16", |b| {
        b.iter(|| cyclic_phase_ascent(black_box(&obj), &pattern, 5, 16, 99).unwrap())
    });
}

fn activation_enumeration(c: &mut Criterion) {
    let ef = bench_efield(2_001, 5);
    let obj = weighted_objective(&ef, &vec![1.0; 2_001]).unwrap();
    c.bench_function("solve_over_activations_l5_la3_b5_r4", |b| {
        b.iter(|| solve_over_activations(black_box(&obj), 5, 3, 5, 4, 99).unwrap())
    });
}

fn beam_repairing(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let benefit: Vec<Vec<i64>> = (0..14)
        .map(|_| (0..14).map(|_| rng.random_range(0..2000i64)).collect())
        .collect();
    c.bench_function("max_benefit_assignment_14x14", |b| {
        b.iter(|| max_benefit_assignment(black_box(&benefit)).unwrap())
    });
}

fn small_design(c: &mut Criterion) {
    let ef = bench_efield(501, 3);
    let cfg = DesignConfig::new(3, 3, 3, 4, 9);
    c.bench_function("design_fullchain_kmeans_501x3_k3", |b| {
        b.iter(|| design_fullchain_kmeans(black_box(&ef), &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = grid_construction, gain_map_device_scale, phase_ascent,
              activation_enumeration, beam_repairing, small_design
}
criterion_main!(benches);
