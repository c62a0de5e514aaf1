//! Quantized beam weights, codebooks, and pattern evaluation.
//!
//! A beam is a length-`2L` complex vector `w` over the antenna ports (H ports
//! `0..L`, then V ports `L..2L`). Magnitudes are on/off — every entry is either
//! zero or a `2^b`-th root of unity — and both polarizations activate the same
//! number of ports. The beam gain in a direction is
//! `|wᴴe_θ|² + |wᴴe_φ|²`, i.e. the quadratic form of the direction's response
//! matrix without materializing it.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::efield::EFieldSet;
use crate::error::{Error, Result};

/// Largest supported phase-shifter resolution. Root tables and exhaustive
/// searches grow as `2^b`; 16 bits is already far beyond hardware practice.
pub const MAX_PHASE_BITS: u32 = 16;

/// The `index`-th of the `2^b` roots of unity, `exp(j·2π·index/2^b)`.
pub fn root_of_unity(phase_bits: u32, index: u32) -> Complex64 {
    let n = 1u32 << phase_bits;
    Complex64::from_polar(1.0, TAU * f64::from(index % n) / f64::from(n))
}

fn check_phase_bits(phase_bits: u32) -> Result<()> {
    if phase_bits == 0 || phase_bits > MAX_PHASE_BITS {
        return Err(Error::InvalidArgument(format!(
            "phase_bits must be in 1..={MAX_PHASE_BITS}, got {phase_bits}"
        )));
    }
    Ok(())
}

/// Rounds `z/|z|` to the nearest `2^b`-th root of unity by angular distance.
/// Exact ties go to the root with the smaller angle in `[0, 2π)`.
pub fn quantize_phase(z: Complex64, phase_bits: u32) -> Result<Complex64> {
    check_phase_bits(phase_bits)?;
    if z.norm() == 0.0 {
        return Err(Error::InvalidArgument("cannot quantize the phase of zero".into()));
    }
    let n = 1u32 << phase_bits;
    let step = TAU / f64::from(n);
    let mut a = z.arg();
    if a < 0.0 {
        a += TAU;
    }
    let t = a / step;
    let k = t.floor();
    let frac = t - k;
    let k = (k as u32) % n;
    let next = (k + 1) % n;
    // The 1e-9 slack (in units of the step) absorbs atan2 round-off so that
    // analytically exact ties take the documented branch.
    let idx = if (frac - 0.5).abs() <= 1e-9 {
        // Tie: keep the candidate whose own angle is smaller; `next` only wins
        // when the interval wraps past 2π and `next` is root 0.
        if next < k { next } else { k }
    } else if frac < 0.5 {
        k
    } else {
        next
    };
    Ok(root_of_unity(phase_bits, idx))
}

/// A quantized on/off beamforming vector over `2L` antenna ports.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    w: Vec<Complex64>,
    phase_bits: u32,
}

impl BeamWeights {
    /// Validates and wraps a weight vector: even length, every entry zero or a
    /// `2^b`-th root of unity (within 1e-9), equal activation per polarization.
    pub fn new(w: Vec<Complex64>, phase_bits: u32) -> Result<Self> {
        check_phase_bits(phase_bits)?;
        if w.is_empty() || w.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "weight vector length must be even and positive, got {}",
                w.len()
            )));
        }
        let n = 1u32 << phase_bits;
        let step = TAU / f64::from(n);
        for (i, z) in w.iter().enumerate() {
            let mag = z.norm();
            if mag <= 1e-9 {
                if mag != 0.0 {
                    return Err(Error::Constraint(format!(
                        "entry {i} has magnitude {mag}, expected exactly 0 or 1"
                    )));
                }
                continue;
            }
            if (mag - 1.0).abs() > 1e-9 {
                return Err(Error::Constraint(format!(
                    "entry {i} has magnitude {mag}, expected 0 or 1"
                )));
            }
            let t = z.arg() / step;
            let dist = (t - t.round()).abs() * step;
            if dist > 1e-9 {
                return Err(Error::Constraint(format!(
                    "entry {i} is not a 2^{phase_bits}-th root of unity (phase off by {dist} rad)"
                )));
            }
        }
        let l = w.len() / 2;
        let h_active = w[..l].iter().filter(|z| z.norm() > 1e-9).count();
        let v_active = w[l..].iter().filter(|z| z.norm() > 1e-9).count();
        if h_active != v_active {
            return Err(Error::Constraint(format!(
                "unequal activation: {h_active} H ports vs {v_active} V ports"
            )));
        }
        Ok(Self { w, phase_bits })
    }

    /// Builds a beam from per-port phase indices (`None` = port off). This is
    /// the exact on-disk representation.
    pub fn from_phase_indices(indices: &[Option<u32>], phase_bits: u32) -> Result<Self> {
        check_phase_bits(phase_bits)?;
        let n = 1u32 << phase_bits;
        let mut w = Vec::with_capacity(indices.len());
        for (i, idx) in indices.iter().enumerate() {
            match idx {
                None => w.push(Complex64::new(0.0, 0.0)),
                Some(p) => {
                    if *p >= n {
                        return Err(Error::InvalidArgument(format!(
                            "entry {i}: phase index {p} out of range for {phase_bits} bits"
                        )));
                    }
                    w.push(root_of_unity(phase_bits, *p));
                }
            }
        }
        Self::new(w, phase_bits)
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.w
    }

    pub fn phase_bits(&self) -> u32 {
        self.phase_bits
    }

    /// Number of ports, `2L`.
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Number of dual-polarization elements `L`.
    pub fn n_elements_per_pol(&self) -> usize {
        self.w.len() / 2
    }

    /// Activated ports per polarization.
    pub fn l_active(&self) -> usize {
        let l = self.w.len() / 2;
        self.w[..l].iter().filter(|z| z.norm() > 1e-9).count()
    }

    /// Indices of all activated ports, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        self.w
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 1e-9)
            .map(|(i, _)| i)
            .collect()
    }

    /// Per-port phase indices (`None` = off). Inverse of
    /// [`BeamWeights::from_phase_indices`]; exact because stored weights are
    /// constructed from roots of unity.
    pub fn phase_indices(&self) -> Vec<Option<u32>> {
        let n = 1u32 << self.phase_bits;
        let step = TAU / f64::from(n);
        self.w
            .iter()
            .map(|z| {
                if z.norm() <= 1e-9 {
                    None
                } else {
                    let mut a = z.arg();
                    if a < 0.0 {
                        a += TAU;
                    }
                    Some((a / step).round() as u32 % n)
                }
            })
            .collect()
    }
}

/// An ordered list of `K` beams sharing an activation budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    beams: Vec<BeamWeights>,
    l_active: usize,
    method_tag: String,
    seed: u64,
}

impl Codebook {
    pub fn new(
        beams: Vec<BeamWeights>,
        l_active: usize,
        method_tag: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if beams.is_empty() {
            return Err(Error::InvalidArgument("codebook must contain at least one beam".into()));
        }
        if l_active == 0 {
            return Err(Error::Constraint("codebook activation level must be at least 1".into()));
        }
        let len = beams[0].len();
        let bits = beams[0].phase_bits();
        for (k, b) in beams.iter().enumerate() {
            if b.len() != len {
                return Err(Error::DimensionMismatch(format!(
                    "beam {k} has {} ports, expected {len}",
                    b.len()
                )));
            }
            if b.phase_bits() != bits {
                return Err(Error::Constraint(format!(
                    "beam {k} has {} phase bits, expected {bits}",
                    b.phase_bits()
                )));
            }
            if b.l_active() != l_active {
                return Err(Error::Constraint(format!(
                    "beam {k} activates {} ports per polarization, expected {l_active}",
                    b.l_active()
                )));
            }
        }
        Ok(Self { beams, l_active, method_tag: method_tag.into(), seed })
    }

    pub fn k(&self) -> usize {
        self.beams.len()
    }

    pub fn beams(&self) -> &[BeamWeights] {
        &self.beams
    }

    pub fn beam(&self, k: usize) -> &BeamWeights {
        &self.beams[k]
    }

    pub fn l_active(&self) -> usize {
        self.l_active
    }

    pub fn method_tag(&self) -> &str {
        &self.method_tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phase_bits(&self) -> u32 {
        self.beams[0].phase_bits()
    }

    pub fn n_elements_per_pol(&self) -> usize {
        self.beams[0].n_elements_per_pol()
    }

    /// Serializes to the documented codebook JSON schema
    /// (`{method, L, L_A, K, phase_bits, beams}` with per-port phase indices).
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let raw = CodebookJson {
            method: self.method_tag.clone(),
            l: self.n_elements_per_pol(),
            l_a: self.l_active,
            k: self.k(),
            phase_bits: self.phase_bits(),
            beams: self.beams.iter().map(|b| b.phase_indices()).collect(),
        };
        serde_json::to_writer_pretty(writer, &raw)?;
        Ok(())
    }

    /// Reads the codebook JSON schema. The design seed is not part of the
    /// schema (it lives in the run manifest), so loaded codebooks carry seed 0.
    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let raw: CodebookJson = serde_json::from_reader(reader)?;
        if raw.beams.len() != raw.k {
            return Err(Error::Data(format!(
                "codebook declares K={} but lists {} beams",
                raw.k,
                raw.beams.len()
            )));
        }
        let mut beams = Vec::with_capacity(raw.beams.len());
        for (i, entry) in raw.beams.iter().enumerate() {
            if entry.len() != 2 * raw.l {
                return Err(Error::Data(format!(
                    "beam {i} lists {} ports, expected {}",
                    entry.len(),
                    2 * raw.l
                )));
            }
            beams.push(
                BeamWeights::from_phase_indices(entry, raw.phase_bits)
                    .map_err(|e| Error::Data(format!("beam {i}: {e}")))?,
            );
        }
        Self::new(beams, raw.l_a, raw.method, 0).map_err(|e| Error::Data(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct CodebookJson {
    method: String,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "L_A")]
    l_a: usize,
    #[serde(rename = "K")]
    k: usize,
    phase_bits: u32,
    beams: Vec<Vec<Option<u32>>>,
}

/// Aligned codebooks across activation levels: row `k` of every level is the
/// same logical beam at a different number of active antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookFamily {
    levels: BTreeMap<usize, Codebook>,
}

impl CodebookFamily {
    pub fn new(levels: BTreeMap<usize, Codebook>) -> Result<Self> {
        let mut iter = levels.iter();
        let (first_level, first) = iter
            .next()
            .ok_or_else(|| Error::InvalidArgument("family must contain at least one level".into()))?;
        if *first_level != first.l_active() {
            return Err(Error::Constraint(format!(
                "level key {first_level} does not match codebook activation {}",
                first.l_active()
            )));
        }
        for (level, cb) in iter.clone() {
            if *level != cb.l_active() {
                return Err(Error::Constraint(format!(
                    "level key {level} does not match codebook activation {}",
                    cb.l_active()
                )));
            }
        }
        for (level, cb) in levels.iter() {
            if cb.k() != first.k() {
                return Err(Error::Constraint(format!(
                    "level {level} has K={}, expected {}",
                    cb.k(),
                    first.k()
                )));
            }
            if cb.n_elements_per_pol() != first.n_elements_per_pol()
                || cb.phase_bits() != first.phase_bits()
            {
                return Err(Error::Constraint(format!(
                    "level {level} disagrees on array size or phase bits"
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> impl Iterator<Item = (usize, &Codebook)> {
        self.levels.iter().map(|(l, cb)| (*l, cb))
    }

    /// Activation levels, descending (full chain first).
    pub fn level_keys(&self) -> Vec<usize> {
        self.levels.keys().rev().copied().collect()
    }

    pub fn get(&self, level: usize) -> Option<&Codebook> {
        self.levels.get(&level)
    }

    pub fn k(&self) -> usize {
        self.levels.values().next().map(Codebook::k).unwrap_or(0)
    }

    /// Family CSV: one row per beam, one column per activation level
    /// (descending). Each cell lists the per-port phase indices, `-` for off,
    /// H ports then `|` then V ports, e.g. `0 3 - - 17 | 2 - 0 0 -`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let levels = self.level_keys();
        let mut header = vec!["beam".to_string()];
        header.extend(levels.iter().map(|l| format!("level_{l}")));
        w.write_record(&header)?;
        for k in 0..self.k() {
            let mut row = vec![k.to_string()];
            for level in &levels {
                row.push(beam_cell(self.levels[level].beam(k)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn beam_cell(beam: &BeamWeights) -> String {
    let idx = beam.phase_indices();
    let l = beam.n_elements_per_pol();
    let fmt = |slice: &[Option<u32>]| {
        slice
            .iter()
            .map(|e| e.map_or("-".to_string(), |p| p.to_string()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!("{} | {}", fmt(&idx[..l]), fmt(&idx[l..]))
}

/// Per-direction composite gain and best-beam index (0-based) of a codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct BestBeamMap {
    /// Index of the argmax beam per direction; ties go to the lowest index.
    pub index: Vec<usize>,
    /// Composite (maximum) linear gain per direction.
    pub gains: Vec<f64>,
}

impl BestBeamMap {
    pub fn n_points(&self) -> usize {
        self.index.len()
    }
}

fn check_beam_dims(ef: &EFieldSet, w: &BeamWeights) -> Result<()> {
    if w.len() != ef.n_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "beam has {} ports but the e-field set has {} antennas",
            w.len(),
            ef.n_antennas()
        )));
    }
    Ok(())
}

/// Linear power gain of `w` at one grid direction: `|wᴴe_θ|² + |wᴴe_φ|²`.
pub fn beam_gain(ef: &EFieldSet, w: &BeamWeights, direction: usize) -> Result<f64> {
    check_beam_dims(ef, w)?;
    if direction >= ef.grid().n_points() {
        return Err(Error::InvalidArgument(format!(
            "direction index {direction} out of range"
        )));
    }
    let active: Vec<(usize, Complex64)> = w
        .active_indices()
        .into_iter()
        .map(|i| (i, w.weights()[i].conj()))
        .collect();
    Ok(gain_at(ef, &active, direction))
}

#[inline]
fn gain_at(ef: &EFieldSet, active_conj: &[(usize, Complex64)], direction: usize) -> f64 {
    let row = ef.direction_row(direction);
    let mut s_theta = Complex64::new(0.0, 0.0);
    let mut s_phi = Complex64::new(0.0, 0.0);
    for &(a, wc) in active_conj {
        s_theta += wc * row[2 * a];
        s_phi += wc * row[2 * a + 1];
    }
    s_theta.norm_sqr() + s_phi.norm_sqr()
}

/// Linear gain of `w` at every grid direction, in grid order.
pub fn gain_map(ef: &EFieldSet, w: &BeamWeights) -> Result<Vec<f64>> {
    check_beam_dims(ef, w)?;
    let active: Vec<(usize, Complex64)> = w
        .active_indices()
        .into_iter()
        .map(|i| (i, w.weights()[i].conj()))
        .collect();
    Ok((0..ef.grid().n_points())
        .map(|n| gain_at(ef, &active, n))
        .collect())
}

/// Per-direction maximum gain over the codebook and the argmax beam index.
/// Deterministic tie-break: the lowest beam index wins.
pub fn composite_pattern(ef: &EFieldSet, cb: &Codebook) -> Result<BestBeamMap> {
    composite_of_maps(&per_beam_gain_maps(ef, cb)?)
}

pub(crate) fn per_beam_gain_maps(ef: &EFieldSet, cb: &Codebook) -> Result<Vec<Vec<f64>>> {
    cb.beams().iter().map(|b| gain_map(ef, b)).collect()
}

pub(crate) fn composite_of_maps(maps: &[Vec<f64>]) -> Result<BestBeamMap> {
    let k = maps.len();
    if k == 0 {
        return Err(Error::InvalidArgument("composite of an empty codebook".into()));
    }
    let n = maps[0].len();
    let mut index = vec![0usize; n];
    let mut gains = maps[0].clone();
    for (b, m) in maps.iter().enumerate().skip(1) {
        for i in 0..n {
            if m[i] > gains[i] {
                gains[i] = m[i];
                index[i] = b;
            }
        }
    }
    Ok(BestBeamMap { index, gains })
}

/// Composite over several arrays at once: beams are indexed in array-major
/// concatenated order (`arrays[0]`'s beams first). All arrays must share the
/// grid and the per-array codebooks must have equal `K`.
pub fn composite_pattern_multi(efs: &[&EFieldSet], cbs: &[&Codebook]) -> Result<BestBeamMap> {
    if efs.is_empty() || efs.len() != cbs.len() {
        return Err(Error::InvalidArgument(format!(
            "need one codebook per array: {} arrays, {} codebooks",
            efs.len(),
            cbs.len()
        )));
    }
    let grid = efs[0].grid();
    let k = cbs[0].k();
    let mut maps = Vec::new();
    for (ef, cb) in efs.iter().zip(cbs) {
        if ef.grid() != grid {
            return Err(Error::DimensionMismatch("arrays do not share a direction grid".into()));
        }
        if cb.k() != k {
            return Err(Error::DimensionMismatch(
                "per-array codebooks must have equal beam counts".into(),
            ));
        }
        maps.extend(per_beam_gain_maps(ef, cb)?);
    }
    composite_of_maps(&maps)
}

/// Splits the grid into the coverage regions of the codebook's beams: region
/// `k` holds the direction indices whose argmax beam is `k`. Regions are
/// disjoint, cover the whole grid, and may be empty.
pub fn partition_coverage(ef: &EFieldSet, cb: &Codebook) -> Result<Vec<Vec<usize>>> {
    let map = composite_pattern(ef, cb)?;
    Ok(partition_of_map(&map, cb.k()))
}

pub(crate) fn partition_of_map(map: &BestBeamMap, k: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); k];
    for (n, &b) in map.index.iter().enumerate() {
        sets[b].push(n);
    }
    sets
}
