//! Quadratic-form maximization over quantized on/off weight vectors.
//!
//! The design problems all reduce to `max_w wᴴQw` where `Q` is a Hermitian PSD
//! accumulation of per-direction response matrices and `w` ranges over vectors
//! whose active entries are `2^b`-th roots of unity on a prescribed activation
//! pattern. Three tools cover this: a cyclic coordinate ascent with seeded
//! random restarts (the workhorse), an exhaustive oracle for tiny instances
//! (testing), and an enumerator over activation patterns.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beam::BeamWeights;
use crate::efield::EFieldSet;
use crate::error::{Error, Result};

/// Upper bound on total phase bits (`2·b·L_A`) for the exhaustive oracle.
pub const ORACLE_BIT_GUARD: u32 = 24;

/// Safety cap on ascent sweeps. Each accepted coordinate move strictly
/// increases the float objective, so in practice runs stop after a handful of
/// sweeps; the cap only guards against pathological float cycling.
const MAX_SWEEPS: usize = 10_000;

/// Derives a decorrelated child seed from a master seed and a stream index.
///
/// This is the fixed, documented hash used everywhere sub-seeds are needed
/// (restarts, activation patterns, design rows): the splitmix64 finalizer
/// applied to `master ^ (stream · 0x9E3779B97F4A7C15)`. Results are identical
/// regardless of evaluation order, which is what makes parallel and sequential
/// schedules agree.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A Hermitian objective matrix `Q` for `max wᴴQw`, stored dense row-major
/// over the `2L` antenna ports.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    q: Vec<Complex64>,
    dim: usize,
}

impl QuadraticObjective {
    /// Wraps a row-major matrix, rejecting it if it deviates from Hermitian
    /// symmetry by more than `1e-10` relative to the largest entry.
    pub fn new(q: Vec<Complex64>, dim: usize) -> Result<Self> {
        if q.len() != dim * dim || dim == 0 {
            return Err(Error::DimensionMismatch(format!(
                "objective storage holds {} entries, expected {dim}x{dim}",
                q.len()
            )));
        }
        let scale = q.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        for l in 0..dim {
            for m in l..dim {
                let dev = (q[l * dim + m] - q[m * dim + l].conj()).norm();
                if dev > 1e-10 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "objective is not Hermitian: entries ({l},{m})/({m},{l}) disagree by {dev}"
                    )));
                }
            }
        }
        Ok(Self { q, dim })
    }

    /// Wraps a nearly-Hermitian matrix by averaging it with its conjugate
    /// transpose. Use when `Q` was accumulated in float and symmetry drifted.
    pub fn new_symmetrized(q: Vec<Complex64>, dim: usize) -> Result<Self> {
        if q.len() != dim * dim || dim == 0 {
            return Err(Error::DimensionMismatch(format!(
                "objective storage holds {} entries, expected {dim}x{dim}",
                q.len()
            )));
        }
        let mut s = q.clone();
        for l in 0..dim {
            for m in 0..dim {
                s[l * dim + m] = (q[l * dim + m] + q[m * dim + l].conj()) * 0.5;
            }
        }
        Ok(Self { q: s, dim })
    }

    /// The all-zero objective of the given dimension.
    pub fn zero(dim: usize) -> Self {
        Self { q: vec![Complex64::new(0.0, 0.0); dim * dim], dim }
    }

    /// The identity objective (useful as a feasibility smoke test: any valid
    /// beam scores exactly the number of active ports).
    pub fn identity(dim: usize) -> Self {
        let mut q = vec![Complex64::new(0.0, 0.0); dim * dim];
        for l in 0..dim {
            q[l * dim + l] = Complex64::new(1.0, 0.0);
        }
        Self { q, dim }
    }

    /// Adds `weight · M_n` where `M_n` is direction `n`'s rank-≤2 response
    /// matrix. The matrix itself is formed from the two response columns, so
    /// callers never materialize `M_n` separately.
    pub fn add_direction(&mut self, ef: &EFieldSet, direction: usize, weight: f64) -> Result<()> {
        if ef.n_antennas() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "e-field set has {} antennas, objective is {}x{}",
                ef.n_antennas(),
                self.dim,
                self.dim
            )));
        }
        if direction >= ef.grid().n_points() {
            return Err(Error::InvalidArgument(format!(
                "direction index {direction} out of range"
            )));
        }
        let row = ef.direction_row(direction);
        for l in 0..self.dim {
            let (tl, pl) = (row[2 * l], row[2 * l + 1]);
            for m in 0..self.dim {
                let (tm, pm) = (row[2 * m], row[2 * m + 1]);
                self.q[l * self.dim + m] += (tl * tm.conj() + pl * pm.conj()) * weight;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, l: usize, m: usize) -> Complex64 {
        self.q[l * self.dim + m]
    }

    /// Evaluates `Re(wᴴQw)` for a full-length weight vector.
    pub fn quadratic_form(&self, w: &[Complex64]) -> Result<f64> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "weight vector has {} entries, objective is {}x{}",
                w.len(),
                self.dim,
                self.dim
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..self.dim {
            if w[l].norm_sqr() == 0.0 {
                continue;
            }
            let mut row_sum = Complex64::new(0.0, 0.0);
            for m in 0..self.dim {
                if w[m].norm_sqr() != 0.0 {
                    row_sum += self.q[l * self.dim + m] * w[m];
                }
            }
            acc += w[l].conj() * row_sum;
        }
        Ok(acc.re)
    }
}

/// Which elements are switched on, per polarization (0-based element indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    h: Vec<usize>,
    v: Vec<usize>,
}

impl ActivationPattern {
    /// Validates equal-size, duplicate-free masks (order is normalized to
    /// ascending).
    pub fn new(mut h: Vec<usize>, mut v: Vec<usize>) -> Result<Self> {
        if h.is_empty() || h.len() != v.len() {
            return Err(Error::Constraint(format!(
                "activation masks must be non-empty and equal-sized, got {} H / {} V",
                h.len(),
                v.len()
            )));
        }
        h.sort_unstable();
        v.sort_unstable();
        if h.windows(2).any(|p| p[0] == p[1]) || v.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::Constraint("activation masks contain duplicate elements".into()));
        }
        Ok(Self { h, v })
    }

    /// All elements on for an `L`-element array.
    pub fn full(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidArgument("array must have at least one element".into()));
        }
        let all: Vec<usize> = (0..l).collect();
        Self::new(all.clone(), all)
    }

    pub fn h(&self) -> &[usize] {
        &self.h
    }

    pub fn v(&self) -> &[usize] {
        &self.v
    }

    /// Active ports per polarization.
    pub fn l_active(&self) -> usize {
        self.h.len()
    }

    /// Flattens to port indices for an `L`-element array: H elements map to
    /// ports `0..L`, V elements to `L..2L`.
    pub fn ports(&self, l: usize) -> Result<Vec<usize>> {
        let max = self.h.last().max(self.v.last()).copied().unwrap_or(0);
        if max >= l {
            return Err(Error::InvalidArgument(format!(
                "activation references element {max} of an {l}-element array"
            )));
        }
        let mut ports: Vec<usize> = self.h.clone();
        ports.extend(self.v.iter().map(|&e| l + e));
        Ok(ports)
    }
}

fn combinations(l: usize, k: usize) -> Vec<Vec<usize>> {
    // Standard lexicographic k-subset enumeration of {0..l-1}.
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        while i > 0 {
            i -= 1;
            if c[i] != i + l - k {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return out;
            }
        }
    }
}

/// All `C(L,L_A)²` activation patterns in lexicographic order (H mask outer,
/// V mask inner).
pub fn enumerate_activations(l: usize, l_active: usize) -> Result<Vec<ActivationPattern>> {
    if l_active == 0 || l_active > l {
        return Err(Error::InvalidArgument(format!(
            "activation level must satisfy 1 <= L_A <= L, got L_A={l_active}, L={l}"
        )));
    }
    let subsets = combinations(l, l_active);
    let mut out = Vec::with_capacity(subsets.len() * subsets.len());
    for h in &subsets {
        for v in &subsets {
            out.push(ActivationPattern { h: h.clone(), v: v.clone() });
        }
    }
    Ok(out)
}

/// Per-restart objective values after each sweep of the ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentTrace {
    /// `restarts[r][s]` = objective after sweep `s` of restart `r`; entry 0 is
    /// the post-initialization value.
    pub restarts: Vec<Vec<f64>>,
}

struct ActiveState<'a> {
    obj: &'a QuadraticObjective,
    ports: &'a [usize],
    roots: Vec<Complex64>,
}

impl ActiveState<'_> {
    /// `c_ℓ = Σ_{m≠ℓ} Q_{ℓm} w_m` over the active ports.
    fn coupling(&self, pos: usize, w: &[Complex64]) -> Complex64 {
        let l = self.ports[pos];
        let mut c = Complex64::new(0.0, 0.0);
        for (j, &m) in self.ports.iter().enumerate() {
            if j != pos {
                c += self.obj.entry(l, m) * w[j];
            }
        }
        c
    }

    fn objective(&self, w: &[Complex64]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &l) in self.ports.iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (j, &m) in self.ports.iter().enumerate() {
                row += self.obj.entry(l, m) * w[j];
            }
            acc += w[i].conj() * row;
        }
        acc.re
    }
}

fn ascent_single_restart(
    state: &ActiveState,
    rng: &mut ChaCha8Rng,
) -> (Vec<u32>, f64, Vec<f64>) {
    let n_roots = state.roots.len() as u32;
    let n_active = state.ports.len();
    let mut idx: Vec<u32> = (0..n_active).map(|_| rng.random_range(0..n_roots)).collect();
    let mut w: Vec<Complex64> = idx.iter().map(|&i| state.roots[i as usize]).collect();
    let mut value = state.objective(&w);
    let mut trace = vec![value];
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for pos in 0..n_active {
            let c = state.coupling(pos, &w);
            // The objective splits as 2·Re(w_ℓ*·c_ℓ) + const, so the update is
            // an argmax of Re(ρ*·c_ℓ) over the 2^b roots ρ. The entry moves
            // only on strict float improvement; ties keep the incumbent, and
            // among strictly better candidates the smallest phase index wins.
            let cur = (w[pos].conj() * c).re;
            let mut best_score = cur;
            let mut best: Option<u32> = None;
            for (r, root) in state.roots.iter().enumerate() {
                let s = (root.conj() * c).re;
                if s > best_score {
                    best_score = s;
                    best = Some(r as u32);
                }
            }
            if let Some(r) = best {
                idx[pos] = r;
                w[pos] = state.roots[r as usize];
                value += 2.0 * (best_score - cur);
                changed = true;
            }
        }
        trace.push(value);
        if !changed {
            break;
        }
    }
    // Wash out incremental accumulation error before restarts are compared.
    let exact = state.objective(&w);
    (idx, exact, trace)
}

fn beam_from_active(
    dim: usize,
    ports: &[usize],
    idx: &[u32],
    phase_bits: u32,
) -> Result<BeamWeights> {
    let mut entries: Vec<Option<u32>> = vec![None; dim];
    for (pos, &p) in ports.iter().enumerate() {
        entries[p] = Some(idx[pos]);
    }
    BeamWeights::from_phase_indices(&entries, phase_bits)
}

/// Maximizes `wᴴQw` over quantized weights on a fixed activation pattern by
/// seeded random-restart cyclic coordinate ascent. Returns the best beam and
/// its exact objective value. Restart `r` draws its initial phases from a
/// generator seeded with [`split_seed`]`(seed, r)`; the best restart wins,
/// earliest restart on exact ties.
pub fn cyclic_phase_ascent(
    obj: &QuadraticObjective,
    pattern: &ActivationPattern,
    phase_bits: u32,
    n_restarts: usize,
    seed: u64,
) -> Result<(BeamWeights, f64)> {
    let (w, v, _) = cyclic_phase_ascent_traced(obj, pattern, phase_bits, n_restarts, seed)?;
    Ok((w, v))
}

/// [`cyclic_phase_ascent`] with the per-sweep objective trace of every restart
/// attached (for convergence dumps and monotonicity checks).
pub fn cyclic_phase_ascent_traced(
    obj: &QuadraticObjective,
    pattern: &ActivationPattern,
    phase_bits: u32,
    n_restarts: usize,
    seed: u64,
) -> Result<(BeamWeights, f64, AscentTrace)> {
    if n_restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    if obj.dim() % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "objective dimension {} is not an even port count",
            obj.dim()
        )));
    }
    let l = obj.dim() / 2;
    let ports = pattern.ports(l)?;
    let n = 1u32
        .checked_shl(phase_bits)
        .filter(|_| phase_bits >= 1 && phase_bits <= crate::beam::MAX_PHASE_BITS)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("unsupported phase_bits {phase_bits}"))
        })?;
    let roots: Vec<Complex64> = (0..n)
        .map(|r| Complex64::from_polar(1.0, TAU * f64::from(r) / f64::from(n)))
        .collect();
    let state = ActiveState { obj, ports: &ports, roots };

    let mut best_idx: Option<Vec<u32>> = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut traces = Vec::with_capacity(n_restarts);
    for r in 0..n_restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, r as u64));
        let (idx, value, trace) = ascent_single_restart(&state, &mut rng);
        traces.push(trace);
        if value > best_value {
            best_value = value;
            best_idx = Some(idx);
        }
    }
    let idx = best_idx.expect("at least one restart ran");
    let beam = beam_from_active(obj.dim(), &ports, &idx, phase_bits)?;
    Ok((beam, best_value, AscentTrace { restarts: traces }))
}

/// True optimum over every quantized phase assignment on the pattern's active
/// ports, for tiny instances only (`2·b·L_A ≤ 24`). The first active port's
/// phase is fixed to index 0, which loses nothing because the gain is
/// invariant to a global phase.
pub fn exhaustive_oracle(
    obj: &QuadraticObjective,
    pattern: &ActivationPattern,
    phase_bits: u32,
) -> Result<(BeamWeights, f64)> {
    if obj.dim() % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "objective dimension {} is not an even port count",
            obj.dim()
        )));
    }
    let total_bits = 2 * phase_bits * pattern.l_active() as u32;
    if total_bits > ORACLE_BIT_GUARD {
        return Err(Error::GuardExceeded(format!(
            "exhaustive search needs 2^{total_bits} candidates; the guard allows at most 2^{ORACLE_BIT_GUARD}"
        )));
    }
    let l = obj.dim() / 2;
    let ports = pattern.ports(l)?;
    let n = 1u32 << phase_bits;
    let roots: Vec<Complex64> = (0..n)
        .map(|r| Complex64::from_polar(1.0, TAU * f64::from(r) / f64::from(n)))
        .collect();
    // Dense sub-matrix over the active ports keeps the inner loop tight.
    let na = ports.len();
    let mut sub = vec![Complex64::new(0.0, 0.0); na * na];
    for (i, &pl) in ports.iter().enumerate() {
        for (j, &pm) in ports.iter().enumerate() {
            sub[i * na + j] = obj.entry(pl, pm);
        }
    }
    let eval = |idx: &[u32]| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..na {
            let wi = roots[idx[i] as usize];
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..na {
                row += sub[i * na + j] * roots[idx[j] as usize];
            }
            acc += wi.conj() * row;
        }
        acc.re
    };

    let mut idx = vec![0u32; na];
    let mut best_idx = idx.clone();
    let mut best_value = eval(&idx);
    // Mixed-radix counter over positions 1..na (position 0 stays fixed).
    loop {
        let mut pos = na - 1;
        loop {
            if pos == 0 {
                let beam = beam_from_active(obj.dim(), &ports, &best_idx, phase_bits)?;
                return Ok((beam, best_value));
            }
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
            pos -= 1;
        }
        let v = eval(&idx);
        if v > best_value {
            best_value = v;
            best_idx = idx.clone();
        }
    }
}

/// Runs the ascent once per activation pattern of `C(L,L_A)²` and returns the
/// overall best beam. Pattern `p` uses master seed [`split_seed`]`(seed, p)`,
/// so results are independent of evaluation order; exact value ties resolve
/// to the lexicographically earliest pattern.
pub fn solve_over_activations(
    obj: &QuadraticObjective,
    l: usize,
    l_active: usize,
    phase_bits: u32,
    n_restarts: usize,
    seed: u64,
) -> Result<(BeamWeights, f64)> {
    if obj.dim() != 2 * l {
        return Err(Error::DimensionMismatch(format!(
            "objective is {}x{} but the array has {l} elements per polarization",
            obj.dim(),
            obj.dim()
        )));
    }
    let patterns = enumerate_activations(l, l_active)?;
    let mut best: Option<(BeamWeights, f64)> = None;
    for (p, pattern) in patterns.iter().enumerate() {
        let (beam, value) =
            cyclic_phase_ascent(obj, pattern, phase_bits, n_restarts, split_seed(seed, p as u64))?;
        match &best {
            Some((_, bv)) if value <= *bv => {}
            _ => best = Some((beam, value)),
        }
    }
    Ok(best.expect("at least one pattern enumerated"))
}
