//! Sub-chain beam codebook design and evaluation for quantized mmWave
//! phased arrays.
//!
//! Phones with dual-polarized mmWave arrays steer with on/off magnitudes and
//! coarse phase shifters, and may switch off part of each antenna chain to
//! save power. This crate designs beam codebooks for such *sub-chain*
//! operation and measures what the de-activation costs:
//!
//! * [`sphere`] — directions, near-uniform unit-sphere grids;
//! * [`efield`] — per-element complex E-field responses, synthetic array
//!   models, JSON/CSV interchange;
//! * [`beam`] — quantized beam weights, codebooks, composite patterns;
//! * [`solver`] — quadratic-form maximization over the quantized weight
//!   lattice (coordinate ascent with restarts, exhaustive oracle);
//! * [`design`] — full-chain K-Means and the three sub-chain designers
//!   (similarity-, coverage-, and region-restricted-coverage-maximizing);
//! * [`metrics`] — best-beam matching rates, Hungarian re-pairing,
//!   spherical-coverage CDFs, similarity matrices.
//!
//! Everything is deterministic given the configured seeds: reruns produce
//! byte-identical artifacts.

pub mod beam;
pub mod design;
pub mod efield;
pub mod error;
pub mod metrics;
pub mod solver;
pub mod sphere;

pub use beam::{
    beam_gain, composite_pattern, composite_pattern_multi, gain_map, partition_coverage,
    quantize_phase, root_of_unity, BeamWeights, BestBeamMap, Codebook, CodebookFamily,
};
pub use design::{
    default_candidate_pool, design_bcscmax, design_fullchain_kmeans,
    design_fullchain_kmeans_from_init, design_fullchain_kmeans_traced, design_scmax,
    design_scmax_traced, design_simmax,
    greedy_init, greedy_init_traced, mean_composite_gain, region_objective, similarity_score,
    similarity_score_patterns, weighted_objective, DesignConfig,
};
pub use efield::{
    load_efield, save_efield, synthesize_array, ArrayLayout, EFieldFormat, EFieldSet,
    ElementModel, ResponseMatrix,
};
pub use error::{Error, Result};
pub use metrics::{
    benefit_matrix, coverage_cdf, coverage_cdf_multi, dominance_sets, matching_rate,
    matching_rate_maps, max_benefit_assignment, repair_pairing, repair_pairing_maps,
    similarity_matrix, to_dbi, write_similarity_csv, CoverageCdf, MatchingReport, DBI_FLOOR,
};
pub use solver::{
    cyclic_phase_ascent, cyclic_phase_ascent_traced, enumerate_activations, exhaustive_oracle,
    solve_over_activations, split_seed, ActivationPattern, AscentTrace, QuadraticObjective,
};
pub use sphere::{fibonacci_grid, Direction, DirectionGrid};
