//! Shared fixtures for the benchmark targets: synthetic device data at the
//! sizes the benchmarks exercise. No library API of its own.

use subchain_core::{
    fibonacci_grid, synthesize_array, ArrayLayout, Direction, EFieldSet, ElementModel,
};

/// One patch-element line array on a Fibonacci grid, the standard bench
/// subject: `l` dual-polarized elements at half-wavelength pitch.
pub fn bench_efield(n_points: usize, l: usize) -> EFieldSet {
    let grid = fibonacci_grid(n_points).expect("valid grid size");
    let layout = ArrayLayout::line(l, 0.5, [0.0, 1.0, 0.0]).expect("valid layout");
    let boresight = Direction::from_degrees(90.0, 0.0).expect("valid boresight");
    synthesize_array(&layout, &grid, ElementModel::PatchCosine, boresight, 7, true)
}
