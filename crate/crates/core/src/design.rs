//! Codebook designers.
//!
//! The full-chain codebook comes from K-Means over the sphere (greedy
//! initialization, then alternate assign/update). Sub-chain codebooks come in
//! three flavors that trade beam-shape fidelity against coverage:
//!
//! * per-beam similarity maximization: each full-chain beam is approximated by
//!   a sub-chain beam maximizing the gain-weighted quadratic form, keeping row
//!   alignment;
//! * spherical-coverage maximization: K-Means at the sub-chain constraint,
//!   maximizing mean composite gain with no alignment guarantee;
//! * region-restricted coverage maximization: the full-chain coverage regions
//!   are frozen and each sub-chain beam maximizes mean gain over its own
//!   region, keeping row alignment.
//!
//! Every random draw is seeded through [`split_seed`] from the master seed in
//! [`DesignConfig`] with fixed per-purpose stream tags, so identical inputs
//! give identical codebooks regardless of evaluation order.

use serde::{Deserialize, Serialize};

use crate::beam::{
    composite_of_maps, gain_map, partition_of_map, per_beam_gain_maps, BeamWeights, Codebook,
};
use crate::efield::EFieldSet;
use crate::error::{Error, Result};
use crate::solver::{solve_over_activations, split_seed, QuadraticObjective};

/// Method tag written into codebooks produced by [`design_fullchain_kmeans`].
pub const TAG_FULLCHAIN: &str = "fullchain-kmeans";
/// Method tag for [`design_simmax`].
pub const TAG_SIMMAX: &str = "sim-max";
/// Method tag for [`design_scmax`].
pub const TAG_SCMAX: &str = "sc-max";
/// Method tag for [`design_bcscmax`].
pub const TAG_BCSCMAX: &str = "bc-sc-max";

// Stream tags for seed splitting; fixed so that reruns and parallel schedules
// derive identical sub-seeds.
const STREAM_POOL: u64 = 1;
const STREAM_KMEANS_UPDATE: u64 = 3;
const STREAM_KMEANS_REPAIR: u64 = 4;
const STREAM_ROW: u64 = 5;

fn default_restarts() -> usize {
    16
}
fn default_kmeans_iters() -> usize {
    100
}
fn default_kmeans_tol() -> f64 {
    1e-6
}

/// Knobs shared by all designers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Codebook size (beams per array).
    pub k: usize,
    /// Array size: dual-polarized elements per array.
    pub l: usize,
    /// Active elements per polarization in designed beams.
    pub l_active: usize,
    /// Phase-shifter resolution in bits.
    pub phase_bits: u32,
    /// Random restarts per quadratic subproblem.
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    /// Master seed; every stochastic step derives from it.
    #[serde(default)]
    pub seed: u64,
    /// K-Means iteration cap.
    #[serde(default = "default_kmeans_iters")]
    pub kmeans_max_iters: usize,
    /// Relative mean-gain improvement below which K-Means stops.
    #[serde(default = "default_kmeans_tol")]
    pub kmeans_tol: f64,
}

impl DesignConfig {
    pub fn new(k: usize, l: usize, l_active: usize, phase_bits: u32, seed: u64) -> Self {
        Self {
            k,
            l,
            l_active,
            phase_bits,
            n_restarts: default_restarts(),
            seed,
            kmeans_max_iters: default_kmeans_iters(),
            kmeans_tol: default_kmeans_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("codebook size K must be at least 1".into()));
        }
        if self.l == 0 {
            return Err(Error::InvalidArgument("array must have at least one element".into()));
        }
        if self.l_active == 0 || self.l_active > self.l {
            return Err(Error::InvalidArgument(format!(
                "activation level must satisfy 1 <= L_A <= L, got L_A={}, L={}",
                self.l_active, self.l
            )));
        }
        if self.phase_bits == 0 || self.phase_bits > crate::beam::MAX_PHASE_BITS {
            return Err(Error::InvalidArgument(format!(
                "phase_bits must be in 1..={}, got {}",
                crate::beam::MAX_PHASE_BITS,
                self.phase_bits
            )));
        }
        if self.n_restarts == 0 || self.kmeans_max_iters == 0 {
            return Err(Error::InvalidArgument(
                "n_restarts and kmeans_max_iters must be at least 1".into(),
            ));
        }
        if !self.kmeans_tol.is_finite() || self.kmeans_tol < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kmeans_tol must be finite and non-negative, got {}",
                self.kmeans_tol
            )));
        }
        Ok(())
    }

    fn check_against(&self, ef: &EFieldSet) -> Result<()> {
        self.validate()?;
        if ef.n_antennas() != 2 * self.l {
            return Err(Error::DimensionMismatch(format!(
                "config says L={} but the e-field set has {} antenna ports",
                self.l,
                ef.n_antennas()
            )));
        }
        Ok(())
    }

    fn at_level(&self, l_active: usize) -> Self {
        Self { l_active, ..self.clone() }
    }
}

/// `Q = Σ_n weights[n] · M_n` accumulated over the whole grid.
pub fn weighted_objective(ef: &EFieldSet, weights: &[f64]) -> Result<QuadraticObjective> {
    if weights.len() != ef.grid().n_points() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} grid points",
            weights.len(),
            ef.grid().n_points()
        )));
    }
    let mut q = QuadraticObjective::zero(ef.n_antennas());
    for (n, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            q.add_direction(ef, n, w)?;
        }
    }
    Ok(q)
}

/// `Q = Σ_{n ∈ region} M_n`, the unweighted accumulation over a direction set.
pub fn region_objective(ef: &EFieldSet, region: &[usize]) -> Result<QuadraticObjective> {
    let mut q = QuadraticObjective::zero(ef.n_antennas());
    for &n in region {
        q.add_direction(ef, n, 1.0)?;
    }
    Ok(q)
}

/// Mean over grid directions of the codebook's composite (best-beam) gain —
/// the objective the coverage designers maximize.
pub fn mean_composite_gain(ef: &EFieldSet, cb: &Codebook) -> Result<f64> {
    let maps = per_beam_gain_maps(ef, cb)?;
    Ok(mean_of_composite(&maps))
}

fn mean_of_composite(maps: &[Vec<f64>]) -> f64 {
    let n = maps[0].len();
    let mut sum = 0.0;
    for i in 0..n {
        let mut best = f64::NEG_INFINITY;
        for m in maps {
            if m[i] > best {
                best = m[i];
            }
        }
        sum += best;
    }
    sum / n as f64
}

/// Default greedy-initialization candidates: for every 8th grid direction,
/// the best beam for that single direction (one restart), deduplicated
/// exactly. A steering-style pool like this covers the sphere coarsely while
/// staying cheap.
pub fn default_candidate_pool(ef: &EFieldSet, cfg: &DesignConfig) -> Result<Vec<BeamWeights>> {
    cfg.check_against(ef)?;
    let pool_seed = split_seed(cfg.seed, STREAM_POOL);
    let mut pool = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut n = 0;
    while n < ef.grid().n_points() {
        let mut q = QuadraticObjective::zero(ef.n_antennas());
        q.add_direction(ef, n, 1.0)?;
        let (beam, _) = solve_over_activations(
            &q,
            cfg.l,
            cfg.l_active,
            cfg.phase_bits,
            1,
            split_seed(pool_seed, n as u64),
        )?;
        if seen.insert(beam.phase_indices()) {
            pool.push(beam);
        }
        n += 8;
    }
    Ok(pool)
}

/// Greedily picks `K` pool candidates, each maximizing the increase in mean
/// composite gain given the beams already chosen (without replacement; pool
/// order breaks ties). Returns the codebook and the objective after each
/// addition.
pub fn greedy_init_traced(
    ef: &EFieldSet,
    cfg: &DesignConfig,
    pool: &[BeamWeights],
) -> Result<(Codebook, Vec<f64>)> {
    cfg.check_against(ef)?;
    let mut candidates: Vec<&BeamWeights> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for b in pool {
        if b.n_elements_per_pol() != cfg.l {
            return Err(Error::DimensionMismatch(
                "pool candidate does not match the configured array size".into(),
            ));
        }
        if seen.insert(b.phase_indices()) {
            candidates.push(b);
        }
    }
    if candidates.len() < cfg.k {
        return Err(Error::InvalidArgument(format!(
            "candidate pool holds {} distinct beams, fewer than K={}",
            candidates.len(),
            cfg.k
        )));
    }
    let n = ef.grid().n_points();
    let maps: Vec<Vec<f64>> =
        candidates.iter().map(|b| gain_map(ef, b)).collect::<Result<_>>()?;
    let mut covered = vec![0.0f64; n];
    let mut picked: Vec<usize> = Vec::with_capacity(cfg.k);
    let mut used = vec![false; candidates.len()];
    let mut trace = Vec::with_capacity(cfg.k);
    for _ in 0..cfg.k {
        let mut best_c = None;
        let mut best_gain_sum = f64::NEG_INFINITY;
        for (c, m) in maps.iter().enumerate() {
            if used[c] {
                continue;
            }
            let mut s = 0.0;
            for i in 0..n {
                s += covered[i].max(m[i]);
            }
            if s > best_gain_sum {
                best_gain_sum = s;
                best_c = Some(c);
            }
        }
        let c = best_c.expect("pool larger than K");
        used[c] = true;
        picked.push(c);
        for i in 0..n {
            covered[i] = covered[i].max(maps[c][i]);
        }
        trace.push(best_gain_sum / n as f64);
    }
    let beams: Vec<BeamWeights> = picked.iter().map(|&c| candidates[c].clone()).collect();
    let cb = Codebook::new(beams, cfg.l_active, TAG_FULLCHAIN, cfg.seed)?;
    Ok((cb, trace))
}

/// [`greedy_init_traced`] without the trace.
pub fn greedy_init(ef: &EFieldSet, cfg: &DesignConfig, pool: &[BeamWeights]) -> Result<Codebook> {
    greedy_init_traced(ef, cfg, pool).map(|(cb, _)| cb)
}

/// Shared K-Means loop: alternate (assign directions to their best beam,
/// repair empty clusters, re-solve each cluster's quadratic subproblem at the
/// given activation level). The update keeps the incumbent beam unless the
/// solver's candidate is strictly better on the same cluster objective, which
/// makes the mean composite gain non-decreasing in exact arithmetic.
fn kmeans_refine(
    ef: &EFieldSet,
    init: &Codebook,
    cfg: &DesignConfig,
    method_tag: &str,
) -> Result<(Codebook, Vec<f64>)> {
    let k = init.k();
    let n = ef.grid().n_points();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "K={k} exceeds the number of grid directions {n}"
        )));
    }
    let update_seed = split_seed(cfg.seed, STREAM_KMEANS_UPDATE);
    let repair_seed = split_seed(cfg.seed, STREAM_KMEANS_REPAIR);
    let mut beams: Vec<BeamWeights> = init.beams().to_vec();
    let mut maps: Vec<Vec<f64>> =
        beams.iter().map(|b| gain_map(ef, b)).collect::<Result<_>>()?;
    let mut trace = vec![mean_of_composite(&maps)];
    let mut prev_assignment: Option<Vec<usize>> = None;
    for iter in 0..cfg.kmeans_max_iters {
        let mut comp = composite_of_maps(&maps)?;
        // Empty-cluster repair: point the orphaned beam at the worst-served
        // direction. The orphan wins nowhere, so replacing it never lowers
        // the composite.
        let mut claimed = std::collections::HashSet::new();
        for k_empty in 0..k {
            if comp.index.iter().any(|&b| b == k_empty) {
                continue;
            }
            let mut worst = None;
            let mut worst_gain = f64::INFINITY;
            for (i, &g) in comp.gains.iter().enumerate() {
                if g < worst_gain && !claimed.contains(&i) {
                    worst_gain = g;
                    worst = Some(i);
                }
            }
            let target = match worst {
                Some(t) => t,
                None => break,
            };
            claimed.insert(target);
            let mut q = QuadraticObjective::zero(ef.n_antennas());
            q.add_direction(ef, target, 1.0)?;
            let (beam, _) = solve_over_activations(
                &q,
                cfg.l,
                cfg.l_active,
                cfg.phase_bits,
                cfg.n_restarts,
                split_seed(repair_seed, (iter * k + k_empty) as u64),
            )?;
            maps[k_empty] = gain_map(ef, &beam)?;
            beams[k_empty] = beam;
            comp = composite_of_maps(&maps)?;
        }
        let assignment = comp.index;
        if prev_assignment.as_ref() == Some(&assignment) {
            break;
        }
        let regions = {
            let map = crate::beam::BestBeamMap { index: assignment.clone(), gains: comp.gains };
            partition_of_map(&map, k)
        };
        for (kk, region) in regions.iter().enumerate() {
            if region.is_empty() {
                continue;
            }
            let q = region_objective(ef, region)?;
            let (candidate, value) = solve_over_activations(
                &q,
                cfg.l,
                cfg.l_active,
                cfg.phase_bits,
                cfg.n_restarts,
                split_seed(update_seed, (iter * k + kk) as u64),
            )?;
            let incumbent = q.quadratic_form(beams[kk].weights())?;
            if value > incumbent {
                maps[kk] = gain_map(ef, &candidate)?;
                beams[kk] = candidate;
            }
        }
        let obj = mean_of_composite(&maps);
        let prev = *trace.last().expect("trace is seeded");
        trace.push(obj);
        prev_assignment = Some(assignment);
        if obj - prev < cfg.kmeans_tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let cb = Codebook::new(beams, cfg.l_active, method_tag, cfg.seed)?;
    Ok((cb, trace))
}

/// K-Means refinement of an explicit full-chain initialization (all elements
/// active). For callers that need to keep or report the initialization
/// itself; [`design_fullchain_kmeans`] builds the greedy init internally.
pub fn design_fullchain_kmeans_from_init(
    ef: &EFieldSet,
    cfg: &DesignConfig,
    init: &Codebook,
) -> Result<(Codebook, Vec<f64>)> {
    cfg.check_against(ef)?;
    if init.k() != cfg.k {
        return Err(Error::InvalidArgument(format!(
            "init codebook has K={}, config says K={}",
            init.k(),
            cfg.k
        )));
    }
    if init.l_active() != cfg.l || init.n_elements_per_pol() != cfg.l {
        return Err(Error::InvalidArgument(
            "full-chain init must activate every element of the configured array".into(),
        ));
    }
    kmeans_refine(ef, init, &cfg.at_level(cfg.l), TAG_FULLCHAIN)
}

/// Designs the full-chain codebook (all elements active) by greedy-initialized
/// K-Means, returning the per-iteration mean-gain trace.
pub fn design_fullchain_kmeans_traced(
    ef: &EFieldSet,
    cfg: &DesignConfig,
) -> Result<(Codebook, Vec<f64>)> {
    cfg.check_against(ef)?;
    if cfg.k > ef.grid().n_points() {
        return Err(Error::InvalidArgument(format!(
            "K={} exceeds the number of grid directions {}",
            cfg.k,
            ef.grid().n_points()
        )));
    }
    let full_cfg = cfg.at_level(cfg.l);
    let pool = default_candidate_pool(ef, &full_cfg)?;
    let (init, _) = greedy_init_traced(ef, &full_cfg, &pool)?;
    design_fullchain_kmeans_from_init(ef, cfg, &init)
}

/// [`design_fullchain_kmeans_traced`] without the trace.
pub fn design_fullchain_kmeans(ef: &EFieldSet, cfg: &DesignConfig) -> Result<Codebook> {
    design_fullchain_kmeans_traced(ef, cfg).map(|(cb, _)| cb)
}

/// Sub-chain design by coverage maximization: K-Means at `cfg.l_active`
/// starting from `init` (typically a greedy pick over a sub-chain pool).
/// No row alignment with any full-chain codebook is implied.
pub fn design_scmax_traced(
    ef: &EFieldSet,
    cfg: &DesignConfig,
    init: &Codebook,
) -> Result<(Codebook, Vec<f64>)> {
    cfg.check_against(ef)?;
    if init.k() != cfg.k {
        return Err(Error::InvalidArgument(format!(
            "init codebook has K={}, config says K={}",
            init.k(),
            cfg.k
        )));
    }
    if init.l_active() != cfg.l_active || init.n_elements_per_pol() != cfg.l {
        return Err(Error::InvalidArgument(
            "init codebook does not match the configured array size or activation level".into(),
        ));
    }
    kmeans_refine(ef, init, cfg, TAG_SCMAX)
}

/// [`design_scmax_traced`] without the trace.
pub fn design_scmax(ef: &EFieldSet, cfg: &DesignConfig, init: &Codebook) -> Result<Codebook> {
    design_scmax_traced(ef, cfg, init).map(|(cb, _)| cb)
}

fn check_fullchain(ef: &EFieldSet, fullchain: &Codebook, cfg: &DesignConfig) -> Result<()> {
    cfg.check_against(ef)?;
    if fullchain.k() != cfg.k {
        return Err(Error::InvalidArgument(format!(
            "full-chain codebook has K={}, config says K={}",
            fullchain.k(),
            cfg.k
        )));
    }
    if fullchain.n_elements_per_pol() != cfg.l {
        return Err(Error::DimensionMismatch(
            "full-chain codebook does not match the configured array size".into(),
        ));
    }
    Ok(())
}

/// Sub-chain design by similarity maximization: beam `i` maximizes
/// `wᴴ(Σ_n G_i(n)·M_n)w` where `G_i` is full-chain beam `i`'s gain pattern.
/// Output row `i` corresponds to full-chain row `i`.
pub fn design_simmax(ef: &EFieldSet, fullchain: &Codebook, cfg: &DesignConfig) -> Result<Codebook> {
    check_fullchain(ef, fullchain, cfg)?;
    let row_seed = split_seed(cfg.seed, STREAM_ROW);
    let mut beams = Vec::with_capacity(fullchain.k());
    for (i, reference) in fullchain.beams().iter().enumerate() {
        let weights = gain_map(ef, reference)?;
        let q = weighted_objective(ef, &weights)?;
        let (beam, _) = solve_over_activations(
            &q,
            cfg.l,
            cfg.l_active,
            cfg.phase_bits,
            cfg.n_restarts,
            split_seed(row_seed, i as u64),
        )?;
        beams.push(beam);
    }
    Codebook::new(beams, cfg.l_active, TAG_SIMMAX, cfg.seed)
}

/// Sub-chain design by region-restricted coverage maximization: the sphere is
/// partitioned into the full-chain beams' coverage regions, then beam `k`
/// maximizes the unweighted gain sum over region `k`. Row-aligned with the
/// full-chain codebook. An empty region falls back to the worst-served single
/// direction under the full-chain composite.
pub fn design_bcscmax(
    ef: &EFieldSet,
    fullchain: &Codebook,
    cfg: &DesignConfig,
) -> Result<Codebook> {
    check_fullchain(ef, fullchain, cfg)?;
    let row_seed = split_seed(cfg.seed, STREAM_ROW);
    let comp = crate::beam::composite_pattern(ef, fullchain)?;
    let regions = partition_of_map(&comp, fullchain.k());
    let mut claimed = std::collections::HashSet::new();
    let mut beams = Vec::with_capacity(fullchain.k());
    for (k, region) in regions.iter().enumerate() {
        let q = if region.is_empty() {
            let mut worst = 0usize;
            let mut worst_gain = f64::INFINITY;
            for (i, &g) in comp.gains.iter().enumerate() {
                if g < worst_gain && !claimed.contains(&i) {
                    worst_gain = g;
                    worst = i;
                }
            }
            claimed.insert(worst);
            region_objective(ef, &[worst])?
        } else {
            region_objective(ef, region)?
        };
        let (beam, _) = solve_over_activations(
            &q,
            cfg.l,
            cfg.l_active,
            cfg.phase_bits,
            cfg.n_restarts,
            split_seed(row_seed, k as u64),
        )?;
        beams.push(beam);
    }
    Codebook::new(beams, cfg.l_active, TAG_BCSCMAX, cfg.seed)
}

/// Similarity of `candidate`'s pattern to `reference`'s on the shared grid:
/// `Σ_n G(n)·B(n) / Σ_n G(n)²` with linear power gains. The score of a beam
/// against itself is exactly one.
pub fn similarity_score(
    ef: &EFieldSet,
    reference: &BeamWeights,
    candidate: &BeamWeights,
) -> Result<f64> {
    let g = gain_map(ef, reference)?;
    let b = gain_map(ef, candidate)?;
    similarity_score_patterns(&g, &b)
}

/// [`similarity_score`] on precomputed linear gain patterns. Exposed so tests
/// can score synthetic patterns that no feasible beam produces.
pub fn similarity_score_patterns(reference: &[f64], candidate: &[f64]) -> Result<f64> {
    if reference.len() != candidate.len() || reference.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "pattern lengths differ: {} vs {}",
            reference.len(),
            candidate.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, b) in reference.iter().zip(candidate) {
        num += g * b;
        den += g * g;
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "reference pattern is identically zero; similarity is undefined".into(),
        ));
    }
    Ok(num / den)
}
