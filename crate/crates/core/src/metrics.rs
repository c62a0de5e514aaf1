//! Evaluation metrics for codebook families.
//!
//! Three views of how well sub-chain codebooks track their full-chain parent:
//!
//! * the best-beam matching rate — how often two activation levels pick the
//!   same beam index for a direction;
//! * re-pairing — the assignment between two codebooks' beams that maximizes
//!   the matching rate, found exactly with the Hungarian algorithm over the
//!   coverage-overlap benefit matrix;
//! * the spherical-coverage CDF — the distribution of composite gain over the
//!   grid, in dBi.
//!
//! Multi-array phones are handled by evaluating best-beam maps in the
//!   concatenated beam index space (array 0's beams first).

use std::io::Write;

use crate::beam::{composite_pattern, composite_pattern_multi, BestBeamMap, Codebook};
use crate::beam::{partition_of_map, CodebookFamily};
use crate::design::similarity_score;
use crate::efield::EFieldSet;
use crate::error::{Error, Result};

/// Linear gains at or below zero map to this floor when converted to dBi.
pub const DBI_FLOOR: f64 = -60.0;

/// `10·log10(linear)`, clamped below at [`DBI_FLOOR`].
pub fn to_dbi(linear: f64) -> f64 {
    if linear <= 0.0 {
        DBI_FLOOR
    } else {
        (10.0 * linear.log10()).max(DBI_FLOOR)
    }
}

/// Fraction of directions on which two best-beam maps agree.
pub fn matching_rate_maps(a: &BestBeamMap, b: &BestBeamMap) -> Result<f64> {
    if a.n_points() != b.n_points() || a.n_points() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "best-beam maps cover {} vs {} directions",
            a.n_points(),
            b.n_points()
        )));
    }
    let same = a.index.iter().zip(&b.index).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.n_points() as f64)
}

/// Matching rate between two activation levels of a single-array family.
pub fn matching_rate(ef: &EFieldSet, fam: &CodebookFamily, l1: usize, l2: usize) -> Result<f64> {
    let cb1 = fam
        .get(l1)
        .ok_or_else(|| Error::InvalidArgument(format!("family has no level {l1}")))?;
    let cb2 = fam
        .get(l2)
        .ok_or_else(|| Error::InvalidArgument(format!("family has no level {l2}")))?;
    let m1 = composite_pattern(ef, cb1)?;
    let m2 = composite_pattern(ef, cb2)?;
    matching_rate_maps(&m1, &m2)
}

/// Coverage regions of each beam (identical to the partition of the composite
/// pattern; exposed here because the re-pairing benefit is their overlap).
pub fn dominance_sets(ef: &EFieldSet, cb: &Codebook) -> Result<Vec<Vec<usize>>> {
    crate::beam::partition_coverage(ef, cb)
}

/// Benefit matrix for re-pairing: entry `(i,j)` counts directions where map
/// `a` picks beam `i` and map `b` picks beam `j`.
pub fn benefit_matrix(a: &BestBeamMap, b: &BestBeamMap, k: usize) -> Result<Vec<Vec<i64>>> {
    if a.n_points() != b.n_points() {
        return Err(Error::DimensionMismatch(format!(
            "best-beam maps cover {} vs {} directions",
            a.n_points(),
            b.n_points()
        )));
    }
    let mut m = vec![vec![0i64; k]; k];
    for (&i, &j) in a.index.iter().zip(&b.index) {
        if i >= k || j >= k {
            return Err(Error::InvalidArgument(format!(
                "beam index ({i},{j}) out of range for K={k}"
            )));
        }
        m[i][j] += 1;
    }
    Ok(m)
}

/// Exact minimum-cost assignment on a square matrix (potentials method).
/// Returns column per row and the total cost.
fn hungarian_min_cost(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // row matched to each column, 1-based
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    let mut total = 0i64;
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
            total += cost[p[j] - 1][j - 1];
        }
    }
    (assign, total)
}

/// Maximum-total-benefit assignment. Among all optimal assignments, returns
/// the lexicographically smallest permutation (row 0's column first), plus the
/// optimal total.
pub fn max_benefit_assignment(benefit: &[Vec<i64>]) -> Result<(Vec<usize>, i64)> {
    let n = benefit.len();
    if n == 0 || benefit.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch("benefit matrix must be square and non-empty".into()));
    }
    let top = benefit.iter().flatten().copied().max().unwrap_or(0);
    let cost: Vec<Vec<i64>> =
        benefit.iter().map(|row| row.iter().map(|&b| top - b).collect()).collect();
    let (_, min_cost) = hungarian_min_cost(&cost);
    let best_total = n as i64 * top - min_cost;

    // Force rows to their smallest viable column one at a time; viability is
    // checked by re-solving the remaining subproblem exactly. n stays small
    // (K beams), so the extra solves are cheap.
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut pi = vec![0usize; n];
    let mut prefix = 0i64;
    for i in 0..n {
        let mut chosen = None;
        for (slot, &c) in remaining.iter().enumerate() {
            let forced = benefit[i][c];
            let rest = if i + 1 == n {
                0
            } else {
                let cols: Vec<usize> =
                    remaining.iter().copied().filter(|&x| x != c).collect();
                let sub: Vec<Vec<i64>> = (i + 1..n)
                    .map(|r| cols.iter().map(|&cc| top - benefit[r][cc]).collect())
                    .collect();
                let (_, sub_cost) = hungarian_min_cost(&sub);
                (n - i - 1) as i64 * top - sub_cost
            };
            if prefix + forced + rest == best_total {
                chosen = Some((slot, c, forced));
                break;
            }
        }
        let (slot, c, forced) =
            chosen.expect("some remaining column must extend an optimal assignment");
        pi[i] = c;
        prefix += forced;
        remaining.remove(slot);
    }
    Ok((pi, best_total))
}

/// Re-pairing between two best-beam maps sharing a `K`-beam index space:
/// the permutation maximizing total coverage overlap, and the matching rate
/// after relabeling map `b` by it.
pub fn repair_pairing_maps(
    a: &BestBeamMap,
    b: &BestBeamMap,
    k: usize,
) -> Result<(Vec<usize>, f64)> {
    let benefit = benefit_matrix(a, b, k)?;
    let (pi, total) = max_benefit_assignment(&benefit)?;
    Ok((pi, total as f64 / a.n_points() as f64))
}

/// Re-pairing between two codebooks on one array (equal `K` required).
pub fn repair_pairing(
    ef: &EFieldSet,
    cb1: &Codebook,
    cb2: &Codebook,
) -> Result<(Vec<usize>, f64)> {
    if cb1.k() != cb2.k() {
        return Err(Error::DimensionMismatch(format!(
            "codebooks have K={} and K={}",
            cb1.k(),
            cb2.k()
        )));
    }
    let m1 = composite_pattern(ef, cb1)?;
    let m2 = composite_pattern(ef, cb2)?;
    repair_pairing_maps(&m1, &m2, cb1.k())
}

/// Spherical-coverage distribution: composite gains over the grid, sorted, in
/// dBi with equal per-direction weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCdf {
    sorted_dbi: Vec<f64>,
}

impl CoverageCdf {
    pub fn from_map(map: &BestBeamMap) -> Result<Self> {
        if map.n_points() == 0 {
            return Err(Error::InvalidArgument("empty best-beam map".into()));
        }
        let mut v: Vec<f64> = map.gains.iter().map(|&g| to_dbi(g)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("dBi values are never NaN"));
        Ok(Self { sorted_dbi: v })
    }

    pub fn n_points(&self) -> usize {
        self.sorted_dbi.len()
    }

    /// Sorted per-direction gains in dBi, ascending.
    pub fn values_dbi(&self) -> &[f64] {
        &self.sorted_dbi
    }

    /// Gain (dBi) at the given percentile in `(0, 100]`: the smallest value
    /// `x` with at least `p`% of directions at or below `x`.
    pub fn percentile(&self, p: f64) -> f64 {
        let n = self.sorted_dbi.len();
        let raw = (p / 100.0 * n as f64).ceil() as isize - 1;
        let idx = raw.clamp(0, n as isize - 1) as usize;
        self.sorted_dbi[idx]
    }

    pub fn median(&self) -> f64 {
        self.percentile(50.0)
    }

    /// CSV rows `percentile,gain_dbi` for integer percentiles 1..=100.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["percentile", "gain_dbi"])?;
        for p in 1..=100u32 {
            w.write_record([p.to_string(), self.percentile(f64::from(p)).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coverage CDF of a codebook on one array.
pub fn coverage_cdf(ef: &EFieldSet, cb: &Codebook) -> Result<CoverageCdf> {
    CoverageCdf::from_map(&composite_pattern(ef, cb)?)
}

/// Coverage CDF of a multi-array phone (concatenated beam space).
pub fn coverage_cdf_multi(efs: &[&EFieldSet], cbs: &[&Codebook]) -> Result<CoverageCdf> {
    CoverageCdf::from_map(&composite_pattern_multi(efs, cbs)?)
}

/// Pairwise similarity scores: entry `(i,j)` scores candidate beam `j`
/// against reference beam `i`.
pub fn similarity_matrix(
    ef: &EFieldSet,
    cb_ref: &Codebook,
    cb_cand: &Codebook,
) -> Result<Vec<Vec<f64>>> {
    let mut m = Vec::with_capacity(cb_ref.k());
    for i in 0..cb_ref.k() {
        let mut row = Vec::with_capacity(cb_cand.k());
        for j in 0..cb_cand.k() {
            let s = similarity_score(ef, cb_ref.beam(i), cb_cand.beam(j)).map_err(|e| {
                Error::InvalidArgument(format!("reference beam {i}: {e}"))
            })?;
            row.push(s);
        }
        m.push(row);
    }
    Ok(m)
}

/// CSV export of a similarity matrix: `reference_beam,candidate_beam,score`.
pub fn write_similarity_csv<W: Write>(matrix: &[Vec<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["reference_beam", "candidate_beam", "score"])?;
    for (i, row) in matrix.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            w.write_record([i.to_string(), j.to_string(), s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Matching rates between every ordered pair of activation levels of a
/// family (or of per-array families over a phone), identity pairing and after
/// Hungarian re-pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingReport {
    levels: Vec<usize>,
    identity: Vec<Vec<f64>>,
    repaired: Vec<Vec<f64>>,
    permutations: Vec<Vec<Vec<usize>>>,
}

impl MatchingReport {
    /// Evaluates all level pairs over one or more arrays sharing a grid. Each
    /// family must expose the same levels; beams are indexed in concatenated
    /// array-major order.
    pub fn compute(efs: &[&EFieldSet], fams: &[&CodebookFamily]) -> Result<Self> {
        if efs.is_empty() || efs.len() != fams.len() {
            return Err(Error::InvalidArgument(format!(
                "need one family per array: {} arrays, {} families",
                efs.len(),
                fams.len()
            )));
        }
        let levels = fams[0].level_keys();
        for f in fams {
            if f.level_keys() != levels {
                return Err(Error::InvalidArgument(
                    "families expose different activation levels".into(),
                ));
            }
        }
        let k_total: usize = fams.iter().map(|f| f.k()).sum();
        let mut maps = Vec::with_capacity(levels.len());
        for &level in &levels {
            let cbs: Vec<&Codebook> = fams
                .iter()
                .map(|f| f.get(level).expect("level key comes from the family"))
                .collect();
            maps.push(composite_pattern_multi(efs, &cbs)?);
        }
        let n_levels = levels.len();
        let mut identity = vec![vec![0.0; n_levels]; n_levels];
        let mut repaired = vec![vec![0.0; n_levels]; n_levels];
        let mut permutations = vec![vec![Vec::new(); n_levels]; n_levels];
        for i in 0..n_levels {
            for j in 0..n_levels {
                identity[i][j] = matching_rate_maps(&maps[i], &maps[j])?;
                let (pi, rate) = repair_pairing_maps(&maps[i], &maps[j], k_total)?;
                repaired[i][j] = rate;
                permutations[i][j] = pi;
            }
        }
        Ok(Self { levels, identity, repaired, permutations })
    }

    /// Activation levels, descending.
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    fn pos(&self, level: usize) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }

    /// Identity-pairing matching rate `p(l1, l2)`.
    pub fn rate(&self, l1: usize, l2: usize) -> Option<f64> {
        Some(self.identity[self.pos(l1)?][self.pos(l2)?])
    }

    /// Matching rate after optimal re-pairing of the second level's beams.
    pub fn repaired_rate(&self, l1: usize, l2: usize) -> Option<f64> {
        Some(self.repaired[self.pos(l1)?][self.pos(l2)?])
    }

    /// The re-pairing permutation for a level pair.
    pub fn permutation(&self, l1: usize, l2: usize) -> Option<&[usize]> {
        Some(self.permutations[self.pos(l1)?][self.pos(l2)?].as_slice())
    }

    /// CSV rows `level_1,level_2,matching_rate,repaired_rate` for all ordered
    /// level pairs, outer level first, both descending.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["level_1", "level_2", "matching_rate", "repaired_rate"])?;
        for (i, l1) in self.levels.iter().enumerate() {
            for (j, l2) in self.levels.iter().enumerate() {
                w.write_record([
                    l1.to_string(),
                    l2.to_string(),
                    self.identity[i][j].to_string(),
                    self.repaired[i][j].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Convenience: dominance sets straight from a best-beam map.
pub fn dominance_sets_from_map(map: &BestBeamMap, k: usize) -> Vec<Vec<usize>> {
    partition_of_map(map, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::BeamWeights;
    use crate::efield::{synthesize_array, ArrayLayout, ElementModel};
    use crate::sphere::{fibonacci_grid, Direction};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;
    use std::f64::consts::FRAC_PI_2;

    fn test_efield(l: usize, n: usize, seed: u64) -> EFieldSet {
        let layout = ArrayLayout::line(l, 0.5, [0.0, 1.0, 0.0]).unwrap();
        let grid = fibonacci_grid(n).unwrap();
        let bs = Direction::new(FRAC_PI_2, 0.0).unwrap();
        synthesize_array(&layout, &grid, ElementModel::PatchCosine, bs, seed, true)
    }

    fn random_beam(l: usize, l_a: usize, bits: u32, rng: &mut ChaCha8Rng) -> BeamWeights {
        let n = 1u32 << bits;
        let mut idx = vec![None; 2 * l];
        for off in [0, l] {
            let mut picked = 0;
            while picked < l_a {
                let i = off + rng.random_range(0..l);
                if idx[i].is_none() {
                    idx[i] = Some(rng.random_range(0..n));
                    picked += 1;
                }
            }
        }
        BeamWeights::from_phase_indices(&idx, bits).unwrap()
    }

    fn random_codebook(l: usize, l_a: usize, k: usize, rng: &mut ChaCha8Rng) -> Codebook {
        let beams = (0..k).map(|_| random_beam(l, l_a, 4, rng)).collect();
        Codebook::new(beams, l_a, "test", 0).unwrap()
    }

    #[test]
    fn dbi_conversion_clamps_at_floor() {
        assert_eq!(to_dbi(0.0), DBI_FLOOR);
        assert_eq!(to_dbi(-1.0), DBI_FLOOR);
        assert_eq!(to_dbi(1e-9), DBI_FLOOR);
        assert!((to_dbi(1.0) - 0.0).abs() < 1e-15);
        assert!((to_dbi(10.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn matching_rate_is_one_on_identical_maps_and_symmetric() {
        let ef = test_efield(4, 301, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cb1 = random_codebook(4, 2, 3, &mut rng);
        let cb2 = random_codebook(4, 2, 3, &mut rng);
        let m1 = composite_pattern(&ef, &cb1).unwrap();
        let m2 = composite_pattern(&ef, &cb2).unwrap();
        assert_eq!(matching_rate_maps(&m1, &m1).unwrap(), 1.0);
        let ab = matching_rate_maps(&m1, &m2).unwrap();
        let ba = matching_rate_maps(&m2, &m1).unwrap();
        assert_eq!(ab, ba);
        assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn family_matching_rate_diagonal_is_exactly_one() {
        let ef = test_efield(4, 201, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut levels = BTreeMap::new();
        for l_a in [2usize, 3, 4] {
            levels.insert(l_a, random_codebook(4, l_a, 3, &mut rng));
        }
        let fam = CodebookFamily::new(levels).unwrap();
        for l in [2usize, 3, 4] {
            assert_eq!(matching_rate(&ef, &fam, l, l).unwrap(), 1.0);
        }
        assert!(matching_rate(&ef, &fam, 4, 1).is_err());
    }

    #[test]
    fn hungarian_matches_brute_force_on_small_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 2..=6usize {
            for _ in 0..20 {
                let benefit: Vec<Vec<i64>> = (0..k)
                    .map(|_| (0..k).map(|_| rng.random_range(0..1000)).collect())
                    .collect();
                let (pi, total) = max_benefit_assignment(&benefit).unwrap();
                // Brute force over all permutations.
                let mut perm: Vec<usize> = (0..k).collect();
                let mut best = i64::MIN;
                loop {
                    let t: i64 = perm.iter().enumerate().map(|(i, &j)| benefit[i][j]).sum();
                    best = best.max(t);
                    if !next_permutation(&mut perm) {
                        break;
                    }
                }
                assert_eq!(total, best);
                let check: i64 = pi.iter().enumerate().map(|(i, &j)| benefit[i][j]).sum();
                assert_eq!(check, best);
            }
        }
    }

    fn next_permutation(p: &mut [usize]) -> bool {
        let n = p.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && p[i - 1] >= p[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 1] {
            j -= 1;
        }
        p.swap(i - 1, j);
        p[i..].reverse();
        true
    }

    #[test]
    fn all_equal_benefits_give_lexicographically_smallest_permutation() {
        let benefit = vec![vec![7i64; 5]; 5];
        let (pi, total) = max_benefit_assignment(&benefit).unwrap();
        assert_eq!(pi, vec![0, 1, 2, 3, 4]);
        assert_eq!(total, 35);
    }

    #[test]
    fn repair_recovers_a_cyclic_shift() {
        // Isotropic elements: no dead back hemisphere, so beams never tie at
        // exactly zero gain and the relabeled maps stay permuted copies.
        let layout = ArrayLayout::line(4, 0.5, [0.0, 1.0, 0.0]).unwrap();
        let grid = fibonacci_grid(301).unwrap();
        let bs = Direction::new(FRAC_PI_2, 0.0).unwrap();
        let ef = synthesize_array(&layout, &grid, ElementModel::Isotropic, bs, 6, true);
        // The shift is only recoverable uniquely when every beam wins
        // somewhere; scan seeds until the random codebook has no empty
        // dominance set.
        let cb1 = (7u64..)
            .map(|s| random_codebook(4, 2, 4, &mut ChaCha8Rng::seed_from_u64(s)))
            .find(|cb| {
                dominance_sets(&ef, cb).unwrap().iter().all(|set| !set.is_empty())
            })
            .unwrap();
        let mut shifted = cb1.beams().to_vec();
        shifted.rotate_left(1);
        let cb2 = Codebook::new(shifted, 2, "test", 0).unwrap();
        let (pi, rate) = repair_pairing(&ef, &cb1, &cb2).unwrap();
        // Beam i of cb1 sits at position i-1 of cb2 (beam 0 moved to the end).
        let expected: Vec<usize> = (0..4).map(|i| (i + 3) % 4).collect();
        assert_eq!(pi, expected);
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn repaired_rate_never_drops_below_identity() {
        let ef = test_efield(4, 201, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let cb1 = random_codebook(4, 2, 4, &mut rng);
            let cb2 = random_codebook(4, 3, 4, &mut rng);
            let m1 = composite_pattern(&ef, &cb1).unwrap();
            let m2 = composite_pattern(&ef, &cb2).unwrap();
            let identity = matching_rate_maps(&m1, &m2).unwrap();
            let (_, repaired) = repair_pairing(&ef, &cb1, &cb2).unwrap();
            assert!(repaired >= identity - 1e-15);
        }
    }

    #[test]
    fn dominance_sets_equal_partition_and_cover_grid() {
        let ef = test_efield(4, 401, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cb = random_codebook(4, 2, 5, &mut rng);
        let sets = dominance_sets(&ef, &cb).unwrap();
        let parts = crate::beam::partition_coverage(&ef, &cb).unwrap();
        assert_eq!(sets, parts);
        assert_eq!(sets.iter().map(Vec::len).sum::<usize>(), 401);
        // A duplicated beam loses every tie to its first copy.
        let dup = Codebook::new(
            vec![cb.beam(0).clone(), cb.beam(0).clone()],
            2,
            "test",
            0,
        )
        .unwrap();
        let dup_sets = dominance_sets(&ef, &dup).unwrap();
        assert_eq!(dup_sets[0].len(), 401);
        assert!(dup_sets[1].is_empty());
    }

    #[test]
    fn constant_gain_codebook_yields_step_cdf() {
        // A single element per polarization on an isotropic array radiates the
        // same power everywhere, so the CDF collapses to a step.
        let layout = ArrayLayout::line(3, 0.5, [0.0, 1.0, 0.0]).unwrap();
        let grid = fibonacci_grid(101).unwrap();
        let bs = Direction::new(FRAC_PI_2, 0.0).unwrap();
        let ef = synthesize_array(&layout, &grid, ElementModel::Isotropic, bs, 0, false);
        let mut idx = vec![None; 6];
        idx[0] = Some(0);
        idx[3] = Some(0);
        let beam = BeamWeights::from_phase_indices(&idx, 4).unwrap();
        let cb = Codebook::new(vec![beam], 1, "test", 0).unwrap();
        let cdf = coverage_cdf(&ef, &cb).unwrap();
        let lo = cdf.values_dbi()[0];
        let hi = cdf.values_dbi()[cdf.n_points() - 1];
        assert!((hi - lo).abs() < 1e-9, "CDF spans {lo}..{hi}");
    }

    #[test]
    fn adding_a_beam_never_lowers_the_cdf() {
        let ef = test_efield(4, 301, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cb_small = random_codebook(4, 2, 3, &mut rng);
        let mut beams = cb_small.beams().to_vec();
        beams.push(random_beam(4, 2, 4, &mut rng));
        let cb_big = Codebook::new(beams, 2, "test", 0).unwrap();
        let small = coverage_cdf(&ef, &cb_small).unwrap();
        let big = coverage_cdf(&ef, &cb_big).unwrap();
        for (s, b) in small.values_dbi().iter().zip(big.values_dbi()) {
            assert!(b >= s, "sorted gains dropped: {b} < {s}");
        }
    }

    #[test]
    fn cdf_median_matches_direct_recomputation() {
        let ef = test_efield(4, 301, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let cb = random_codebook(4, 3, 3, &mut rng);
        let cdf = coverage_cdf(&ef, &cb).unwrap();
        let mut gains: Vec<f64> = composite_pattern(&ef, &cb).unwrap().gains;
        gains.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // ceil(0.5 * 301) - 1 = 150 (0-based).
        let expected = to_dbi(gains[150]);
        assert_eq!(cdf.median(), expected);
    }

    #[test]
    fn cdf_is_invariant_to_beam_order() {
        let ef = test_efield(4, 201, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cb = random_codebook(4, 2, 4, &mut rng);
        let mut reversed = cb.beams().to_vec();
        reversed.reverse();
        let cb_rev = Codebook::new(reversed, 2, "test", 0).unwrap();
        let a = coverage_cdf(&ef, &cb).unwrap();
        let b = coverage_cdf(&ef, &cb_rev).unwrap();
        assert_eq!(a.values_dbi(), b.values_dbi());
    }

    #[test]
    fn percentile_lookup_uses_ceiling_rank() {
        let map = BestBeamMap { index: vec![0; 4], gains: vec![1.0, 10.0, 100.0, 1000.0] };
        let cdf = CoverageCdf::from_map(&map).unwrap();
        assert_eq!(cdf.percentile(25.0), 0.0); // 10*log10(1)
        assert_eq!(cdf.percentile(26.0), 10.0);
        assert_eq!(cdf.percentile(100.0), 30.0);
        assert_eq!(cdf.percentile(0.0), 0.0); // clamped to the first point
    }

    #[test]
    fn similarity_matrix_diagonal_is_one_and_errors_name_rows() {
        let ef = test_efield(4, 201, 18);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cb = random_codebook(4, 2, 3, &mut rng);
        let m = similarity_matrix(&ef, &cb, &cb).unwrap();
        for (i, row) in m.iter().enumerate() {
            assert!((row[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matching_report_covers_all_pairs_and_round_trips_csv() {
        let ef = test_efield(4, 201, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut levels = BTreeMap::new();
        for l_a in [2usize, 3, 4] {
            levels.insert(l_a, random_codebook(4, l_a, 3, &mut rng));
        }
        let fam = CodebookFamily::new(levels).unwrap();
        let report = MatchingReport::compute(&[&ef], &[&fam]).unwrap();
        assert_eq!(report.levels(), &[4, 3, 2]);
        assert_eq!(report.rate(4, 4), Some(1.0));
        assert_eq!(report.rate(4, 3), report.rate(3, 4));
        assert!(report.repaired_rate(4, 2).unwrap() >= report.rate(4, 2).unwrap() - 1e-15);
        assert_eq!(report.permutation(4, 4).unwrap(), &[0, 1, 2]);

        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "level_1,level_2,matching_rate,repaired_rate");
        assert_eq!(lines.count(), 9); // 3 levels squared
    }

    #[test]
    fn multi_array_report_uses_concatenated_beam_space() {
        let ef0 = test_efield(3, 201, 22);
        let ef1 = test_efield(3, 201, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mk_fam = |rng: &mut ChaCha8Rng| {
            let mut levels = BTreeMap::new();
            for l_a in [2usize, 3] {
                let beams = (0..2).map(|_| random_beam(3, l_a, 4, rng)).collect();
                levels.insert(l_a, Codebook::new(beams, l_a, "test", 0).unwrap());
            }
            CodebookFamily::new(levels).unwrap()
        };
        let fam0 = mk_fam(&mut rng);
        let fam1 = mk_fam(&mut rng);
        let report = MatchingReport::compute(&[&ef0, &ef1], &[&fam0, &fam1]).unwrap();
        assert_eq!(report.rate(3, 3), Some(1.0));
        // Permutations act on the concatenated 4-beam space.
        assert_eq!(report.permutation(3, 3).unwrap().len(), 4);
        // Cross-check one off-diagonal rate against a direct recount.
        let cbs3: Vec<&Codebook> = vec![fam0.get(3).unwrap(), fam1.get(3).unwrap()];
        let cbs2: Vec<&Codebook> = vec![fam0.get(2).unwrap(), fam1.get(2).unwrap()];
        let m3 = composite_pattern_multi(&[&ef0, &ef1], &cbs3).unwrap();
        let m2 = composite_pattern_multi(&[&ef0, &ef1], &cbs2).unwrap();
        let direct = m3.index.iter().zip(&m2.index).filter(|(a, b)| a == b).count() as f64
            / m3.n_points() as f64;
        assert_eq!(report.rate(3, 2), Some(direct));
    }

    #[test]
    fn cdf_csv_has_hundred_percentile_rows() {
        let ef = test_efield(4, 101, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let cb = random_codebook(4, 2, 2, &mut rng);
        let cdf = coverage_cdf(&ef, &cb).unwrap();
        let mut buf = Vec::new();
        cdf.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 101);
        assert_eq!(lines[0], "percentile,gain_dbi");
    }
}
