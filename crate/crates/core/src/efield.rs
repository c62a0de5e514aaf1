//! Per-element complex E-field responses.
//!
//! An [`EFieldSet`] stores, for every grid direction and every antenna port,
//! the complex far-field response pair `(E_θ, E_φ)`. Antenna ports are ordered
//! H-polarization first: indices `0..L` are the H ports and `L..2L` the V
//! ports of the same `L` physical dual-polarization elements. The per-direction
//! response matrix `M = E·Eᴴ` (with `E` the `2L×2` stacked response matrix) is
//! Hermitian PSD of rank ≤ 2; it is never materialized per direction in bulk —
//! beam gains use `|wᴴe_θ|² + |wᴴe_φ|²` directly, which is the same quantity.
//!
//! Data is either synthesized from a parametric array model or ingested from
//! CSV/JSON files (schemas in `docs/formats.md`).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{Direction, DirectionGrid};

/// Physical placement of the `L` dual-polarization elements, in units of the
/// carrier wavelength. Antenna ports `ell` and `L + ell` share position `ell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    positions: Vec<[f64; 3]>,
}

impl ArrayLayout {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("array layout needs at least one element".into()));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite element position at index {i}"
                )));
            }
        }
        Ok(Self { positions })
    }

    /// A centered uniform line array: element `i` at
    /// `(i - (L-1)/2) * spacing_wl * axiŝ`.
    pub fn line(n_elements: usize, spacing_wl: f64, axis: [f64; 3]) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidArgument("line array needs at least one element".into()));
        }
        if !spacing_wl.is_finite() || spacing_wl < 0.0 {
            return Err(Error::InvalidArgument(format!("bad element spacing {spacing_wl}")));
        }
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidArgument("line array axis must be a nonzero vector".into()));
        }
        let axis = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let mid = (n_elements as f64 - 1.0) / 2.0;
        let positions = (0..n_elements)
            .map(|i| {
                let t = (i as f64 - mid) * spacing_wl;
                [t * axis[0], t * axis[1], t * axis[2]]
            })
            .collect();
        Self::new(positions)
    }

    pub fn n_elements_per_pol(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }
}

/// Amplitude pattern of a single element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementModel {
    /// Unit amplitude in every direction.
    Isotropic,
    /// `max(0, cos γ)` where `γ` is the angle from the element boresight;
    /// a simple one-sided patch-like pattern.
    PatchCosine,
}

/// Per-antenna, per-direction complex responses on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EFieldSet {
    grid: DirectionGrid,
    layout: ArrayLayout,
    // responses[(n * 2L + a) * 2 + c]; c = 0 is E_theta, c = 1 is E_phi.
    responses: Vec<Complex64>,
}

impl EFieldSet {
    pub fn new(grid: DirectionGrid, layout: ArrayLayout, responses: Vec<Complex64>) -> Result<Self> {
        let n = grid.n_points();
        let na = 2 * layout.n_elements_per_pol();
        if responses.len() != n * na * 2 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} response entries ({} directions x {} antennas x 2 components), got {}",
                n * na * 2,
                n,
                na,
                responses.len()
            )));
        }
        for (i, z) in responses.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                let antenna = (i / 2) % na;
                let direction = i / (2 * na);
                let comp = if i % 2 == 0 { "E_theta" } else { "E_phi" };
                return Err(Error::Data(format!(
                    "non-finite {comp} at antenna {antenna}, direction {direction}"
                )));
            }
        }
        Ok(Self { grid, layout, responses })
    }

    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn layout(&self) -> &ArrayLayout {
        &self.layout
    }

    /// Number of dual-polarization elements `L`.
    pub fn n_elements_per_pol(&self) -> usize {
        self.layout.n_elements_per_pol()
    }

    /// Number of antenna ports `2L`.
    pub fn n_antennas(&self) -> usize {
        2 * self.n_elements_per_pol()
    }

    /// `(E_θ, E_φ)` of antenna port `antenna` in grid direction `direction`.
    pub fn response(&self, direction: usize, antenna: usize) -> (Complex64, Complex64) {
        let base = (direction * self.n_antennas() + antenna) * 2;
        (self.responses[base], self.responses[base + 1])
    }

    /// All responses of one direction as `[e_θ(0), e_φ(0), e_θ(1), e_φ(1), …]`.
    pub(crate) fn direction_row(&self, direction: usize) -> &[Complex64] {
        let w = self.n_antennas() * 2;
        &self.responses[direction * w..(direction + 1) * w]
    }

    /// Dense `2L×2L` response matrix `M = E·Eᴴ` for one direction.
    pub fn response_matrix(&self, direction: usize) -> Result<ResponseMatrix> {
        if direction >= self.grid.n_points() {
            return Err(Error::InvalidArgument(format!(
                "direction index {direction} out of range (grid has {} points)",
                self.grid.n_points()
            )));
        }
        let na = self.n_antennas();
        let mut m = vec![Complex64::new(0.0, 0.0); na * na];
        for i in 0..na {
            let (ei_t, ei_p) = self.response(direction, i);
            for j in 0..na {
                let (ej_t, ej_p) = self.response(direction, j);
                m[i * na + j] = ei_t * ej_t.conj() + ei_p * ej_p.conj();
            }
        }
        Ok(ResponseMatrix { m, dim: na })
    }
}

/// Hermitian PSD matrix `M(θ,φ)` for a single direction; rank ≤ 2 because it
/// is an outer product of a `2L×2` matrix with itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    m: Vec<Complex64>,
    dim: usize,
}

impl ResponseMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.m[i * self.dim + j]
    }

    /// `Re(wᴴ M w)`; real and nonnegative up to round-off for any `w`.
    pub fn quadratic_form(&self, w: &[Complex64]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += w[i].conj() * self.m[i * self.dim + j] * w[j];
            }
        }
        acc.re
    }
}

/// Synthesizes per-element responses for a parametric array.
///
/// Element `ell` at position `p` contributes the geometric phase
/// `exp(j·2π·⟨p, u⟩)` (`u` the unit direction vector) times the element
/// amplitude `g(θ,φ)` given by `model` around `boresight`. H ports radiate
/// into `E_φ` and V ports into `E_θ` — an orthogonal-polarization convention
/// that keeps `M` meaningfully rank 2 with zero cross-pol leakage.
///
/// With `ripple` enabled, each of the `2L` ports gets a fixed random gain
/// offset in ±1 dB and phase offset in ±10°, drawn from `seed`, to emulate
/// housing irregularity. Deterministic for equal
/// `(layout, grid, model, boresight, seed, ripple)`.
pub fn synthesize_array(
    layout: &ArrayLayout,
    grid: &DirectionGrid,
    model: ElementModel,
    boresight: Direction,
    seed: u64,
    ripple: bool,
) -> EFieldSet {
    let l = layout.n_elements_per_pol();
    let na = 2 * l;
    let n = grid.n_points();
    let bs = boresight.cartesian();

    let port_factors: Vec<Complex64> = if ripple {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..na)
            .map(|_| {
                let gain_db: f64 = rng.random_range(-1.0..=1.0);
                let phase_deg: f64 = rng.random_range(-10.0..=10.0);
                Complex64::from_polar(10f64.powf(gain_db / 20.0), phase_deg.to_radians())
            })
            .collect()
    } else {
        vec![Complex64::new(1.0, 0.0); na]
    };

    let mut responses = vec![Complex64::new(0.0, 0.0); n * na * 2];
    for (di, d) in grid.points().iter().enumerate() {
        let u = d.cartesian();
        let g = match model {
            ElementModel::Isotropic => 1.0,
            ElementModel::PatchCosine => {
                (u[0] * bs[0] + u[1] * bs[1] + u[2] * bs[2]).max(0.0)
            }
        };
        for (ell, p) in layout.positions().iter().enumerate() {
            let dot = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
            let amp = Complex64::from_polar(g, std::f64::consts::TAU * dot);
            let base = (di * na + ell) * 2;
            // H port: energy in E_phi only.
            responses[base + 1] = amp * port_factors[ell];
            // V port: energy in E_theta only.
            let vbase = (di * na + l + ell) * 2;
            responses[vbase] = amp * port_factors[l + ell];
        }
    }
    EFieldSet::new(grid.clone(), layout.clone(), responses)
        .expect("synthesized responses are finite and correctly sized")
}

/// On-disk encodings for E-field data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EFieldFormat {
    /// Single JSON file bundling layout, grid, and responses.
    Json,
    /// Response CSV plus a `<stem>.grid.csv` companion for the direction list.
    Csv,
}

#[derive(Serialize, Deserialize)]
struct EFieldJson {
    n_pol_elements: usize,
    phase_bits: Option<u32>,
    element_positions_wl: Vec<[f64; 3]>,
    grid: Vec<[f64; 2]>,
    /// responses[direction][antenna] = [e_theta_re, e_theta_im, e_phi_re, e_phi_im]
    responses: Vec<Vec<[f64; 4]>>,
}

/// Loads an [`EFieldSet`], validating the documented schema. Schema problems,
/// non-finite entries (reported with antenna and direction index), and
/// direction-count mismatches are hard errors.
pub fn load_efield(path: &Path, format: EFieldFormat) -> Result<EFieldSet> {
    match format {
        EFieldFormat::Json => load_json(path),
        EFieldFormat::Csv => load_csv(path),
    }
}

/// Writes an [`EFieldSet`] in the requested format (JSON bundle, or response
/// CSV plus grid companion CSV).
pub fn save_efield(ef: &EFieldSet, path: &Path, format: EFieldFormat) -> Result<()> {
    match format {
        EFieldFormat::Json => save_json(ef, path),
        EFieldFormat::Csv => save_csv(ef, path),
    }
}

fn load_json(path: &Path) -> Result<EFieldSet> {
    let file = File::open(path)?;
    let raw: EFieldJson = serde_json::from_reader(BufReader::new(file))?;
    let l = raw.n_pol_elements;
    if l == 0 {
        return Err(Error::Data("n_pol_elements must be at least 1".into()));
    }
    if raw.element_positions_wl.len() != l {
        return Err(Error::Data(format!(
            "element_positions_wl has {} entries, expected {l}",
            raw.element_positions_wl.len()
        )));
    }
    let layout = ArrayLayout::new(raw.element_positions_wl)
        .map_err(|e| Error::Data(e.to_string()))?;
    let mut points = Vec::with_capacity(raw.grid.len());
    for (i, [theta, phi]) in raw.grid.iter().enumerate() {
        points.push(
            Direction::new(*theta, *phi)
                .map_err(|e| Error::Data(format!("grid entry {i}: {e}")))?,
        );
    }
    let grid = DirectionGrid::new(points).map_err(|e| Error::Data(e.to_string()))?;
    if raw.responses.len() != grid.n_points() {
        return Err(Error::Data(format!(
            "responses cover {} directions but the grid declares {}",
            raw.responses.len(),
            grid.n_points()
        )));
    }
    let na = 2 * l;
    let mut responses = Vec::with_capacity(grid.n_points() * na * 2);
    for (di, row) in raw.responses.iter().enumerate() {
        if row.len() != na {
            return Err(Error::Data(format!(
                "direction {di}: expected {na} antenna entries, got {}",
                row.len()
            )));
        }
        for quad in row {
            responses.push(Complex64::new(quad[0], quad[1]));
            responses.push(Complex64::new(quad[2], quad[3]));
        }
    }
    EFieldSet::new(grid, layout, responses)
}

fn save_json(ef: &EFieldSet, path: &Path) -> Result<()> {
    let na = ef.n_antennas();
    let raw = EFieldJson {
        n_pol_elements: ef.n_elements_per_pol(),
        phase_bits: None,
        element_positions_wl: ef.layout.positions().to_vec(),
        grid: ef.grid.points().iter().map(|d| [d.theta, d.phi]).collect(),
        responses: (0..ef.grid.n_points())
            .map(|di| {
                (0..na)
                    .map(|a| {
                        let (t, p) = ef.response(di, a);
                        [t.re, t.im, p.re, p.im]
                    })
                    .collect()
            })
            .collect(),
    };
    let file = File::create(path)?;
    serde_json::to_writer(BufWriter::new(file), &raw)?;
    Ok(())
}

/// Companion grid path for CSV-format data: `foo.csv` ↔ `foo.grid.csv`.
pub fn csv_grid_companion(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("efield");
    path.with_file_name(format!("{stem}.grid.csv"))
}

const CSV_HEADER: [&str; 6] = [
    "antenna_index",
    "direction_index",
    "e_theta_re",
    "e_theta_im",
    "e_phi_re",
    "e_phi_im",
];

fn load_csv(path: &Path) -> Result<EFieldSet> {
    let grid_path = csv_grid_companion(path);
    let grid_file = File::open(&grid_path).map_err(|e| {
        Error::Data(format!("missing grid companion {}: {e}", grid_path.display()))
    })?;
    let grid = DirectionGrid::read_csv(BufReader::new(grid_file))?;

    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Data(format!(
            "e-field csv header must be {}, got {headers:?}",
            CSV_HEADER.join(",")
        )));
    }

    let n = grid.n_points();
    let mut cells: Vec<Option<(Complex64, Complex64)>> = Vec::new();
    let mut n_antennas = 0usize;
    let mut rows: Vec<(usize, usize, Complex64, Complex64)> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize, name: &str| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Data(format!("e-field csv row {line}: bad {name}")))
        };
        let a = rec
            .get(0)
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Data(format!("e-field csv row {line}: bad antenna_index")))?;
        let d = rec
            .get(1)
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Data(format!("e-field csv row {line}: bad direction_index")))?;
        let et = Complex64::new(field(2, "e_theta_re")?, field(3, "e_theta_im")?);
        let ep = Complex64::new(field(4, "e_phi_re")?, field(5, "e_phi_im")?);
        if !et.re.is_finite() || !et.im.is_finite() || !ep.re.is_finite() || !ep.im.is_finite() {
            return Err(Error::Data(format!(
                "non-finite entry at antenna {a}, direction {d}"
            )));
        }
        n_antennas = n_antennas.max(a + 1);
        rows.push((a, d, et, ep));
    }
    if n_antennas == 0 || n_antennas % 2 != 0 {
        return Err(Error::Data(format!(
            "antenna count must be a positive even number (H ports then V ports), got {n_antennas}"
        )));
    }
    cells.resize(n * n_antennas, None);
    for (a, d, et, ep) in rows {
        if d >= n {
            return Err(Error::Data(format!(
                "direction index {d} out of range: grid companion declares {n} points"
            )));
        }
        let slot = &mut cells[d * n_antennas + a];
        if slot.is_some() {
            return Err(Error::Data(format!(
                "duplicate entry for antenna {a}, direction {d}"
            )));
        }
        *slot = Some((et, ep));
    }
    let mut responses = Vec::with_capacity(n * n_antennas * 2);
    for d in 0..n {
        for a in 0..n_antennas {
            let (et, ep) = cells[d * n_antennas + a].ok_or_else(|| {
                Error::Data(format!("missing entry for antenna {a}, direction {d}"))
            })?;
            responses.push(et);
            responses.push(ep);
        }
    }
    // CSV carries no element geometry; positions are irrelevant once responses
    // are tabulated (the geometry lives in the response phases), so place all
    // elements at the origin.
    let layout = ArrayLayout::new(vec![[0.0; 3]; n_antennas / 2])?;
    EFieldSet::new(grid, layout, responses)
}

fn save_csv(ef: &EFieldSet, path: &Path) -> Result<()> {
    let grid_path = csv_grid_companion(path);
    let grid_file = File::create(&grid_path)?;
    ef.grid.write_csv(BufWriter::new(grid_file))?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(CSV_HEADER)?;
    for a in 0..ef.n_antennas() {
        for d in 0..ef.grid.n_points() {
            let (et, ep) = ef.response(d, a);
            w.write_record([
                a.to_string(),
                d.to_string(),
                et.re.to_string(),
                et.im.to_string(),
                ep.re.to_string(),
                ep.im.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
