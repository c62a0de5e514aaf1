//! The JSON configuration schema the CLI consumes, plus loading, override
//! handling, and validation. A run manifest produced by a previous run is
//! accepted anywhere a config is: its embedded `config` object is extracted,
//! which is what makes rerun-from-manifest reproduction possible.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subchain_core::{ArrayLayout, DesignConfig, Direction, EFieldFormat, ElementModel};

use crate::error::{config_err, CliError, CliResult};

fn default_true() -> bool {
    true
}
fn default_spacing() -> f64 {
    0.5
}
fn default_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}
fn default_format() -> EFieldFormat {
    EFieldFormat::Json
}
fn default_restarts() -> usize {
    16
}
fn default_kmeans_iters() -> usize {
    100
}
fn default_kmeans_tol() -> f64 {
    1e-6
}

/// Which designer fills the sub-chain levels of the family. The full-chain
/// level is always designed by greedy-initialized K-Means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Per-beam similarity maximization against the full-chain pattern.
    SimMax,
    /// Coverage-maximizing K-Means rerun at the sub-chain level.
    ScMax,
    /// Coverage maximization restricted to each full-chain beam's region.
    BcScMax,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::SimMax => "sim-max",
            Method::ScMax => "sc-max",
            Method::BcScMax => "bc-sc-max",
        }
    }
}

/// Where per-element E-field data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EFieldSource {
    /// Synthesize a parametric antenna setup on a Fibonacci sphere grid.
    Synthetic(SynthSpec),
    /// Load measured or precomputed data, one file per array.
    Files(FileSpec),
}

/// Synthetic-source parameters. All arrays share one direction grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Number of grid directions on the sphere.
    pub n_points: usize,
    /// Per-element amplitude model.
    #[serde(default = "default_element_model")]
    pub element_model: ElementModel,
    /// Apply fixed per-port gain/phase ripple drawn from `seed`.
    #[serde(default = "default_true")]
    pub ripple: bool,
    /// Seed for the ripple draw; independent of the design seed.
    #[serde(default)]
    pub seed: u64,
    /// The arrays of the device, all with the same element count.
    pub arrays: Vec<ArraySpec>,
}

fn default_element_model() -> ElementModel {
    ElementModel::PatchCosine
}

/// One linear array of dual-polarized elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    /// Dual-polarized elements in the line (so 2x this many ports).
    pub n_elements: usize,
    /// Element pitch in wavelengths.
    #[serde(default = "default_spacing")]
    pub spacing_wl: f64,
    /// Direction the line of elements runs along.
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    /// Element boresight as `[theta_deg, phi_deg]`.
    pub boresight_deg: [f64; 2],
}

/// File-source parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSpec {
    /// One E-field file per array; all must share the direction grid.
    pub paths: Vec<PathBuf>,
    /// On-disk encoding of the files.
    #[serde(default = "default_format")]
    pub format: EFieldFormat,
}

/// Designer knobs shared by every level of the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSection {
    /// Beams per array.
    pub k: usize,
    /// Phase-shifter resolution in bits.
    pub phase_bits: u32,
    /// Random restarts per quadratic subproblem.
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    /// Master design seed; per-array and per-stage streams derive from it.
    #[serde(default)]
    pub seed: u64,
    /// K-Means iteration cap.
    #[serde(default = "default_kmeans_iters")]
    pub kmeans_max_iters: usize,
    /// Relative mean-gain improvement below which K-Means stops.
    #[serde(default = "default_kmeans_tol")]
    pub kmeans_tol: f64,
}

impl DesignSection {
    /// Expands to a core config for an `l`-element array at activation
    /// level `l_active`.
    pub fn to_core(&self, l: usize, l_active: usize) -> DesignConfig {
        DesignConfig {
            k: self.k,
            l,
            l_active,
            phase_bits: self.phase_bits,
            n_restarts: self.n_restarts,
            seed: self.seed,
            kmeans_max_iters: self.kmeans_max_iters,
            kmeans_tol: self.kmeans_tol,
        }
    }
}

/// Which artifact groups a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmitFlags {
    /// Codebook JSON files plus the per-array family CSV.
    #[serde(default = "default_true")]
    pub codebooks: bool,
    /// Matching-rate, coverage-CDF, and similarity CSVs.
    #[serde(default = "default_true")]
    pub metrics: bool,
    /// Per-stage objective traces as JSON lines.
    #[serde(default)]
    pub traces: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            codebooks: true,
            metrics: true,
            traces: false,
        }
    }
}

/// Everything a design run needs apart from the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub efield: EFieldSource,
    pub design: DesignSection,
    pub method: Method,
    /// Activation levels of the family, strictly descending; the first
    /// entry must equal the array element count (the full chain).
    pub levels: Vec<usize>,
    #[serde(default)]
    pub emit: EmitFlags,
}

impl PipelineConfig {
    /// Checks everything that can be checked without looking at data files.
    pub fn validate(&self) -> CliResult<()> {
        if self.levels.is_empty() {
            return Err(CliError::Config("levels must not be empty".into()));
        }
        for w in self.levels.windows(2) {
            if w[1] >= w[0] {
                return Err(CliError::Config(format!(
                    "levels must be strictly descending, got {:?}",
                    self.levels
                )));
            }
        }
        match &self.efield {
            EFieldSource::Synthetic(s) => {
                s.validate()?;
                let l = s.arrays[0].n_elements;
                if self.levels[0] != l {
                    return Err(CliError::Config(format!(
                        "levels must start at the full chain: arrays have {l} \
                         elements but levels begin at {}",
                        self.levels[0]
                    )));
                }
                if self.design.k > s.n_points {
                    return Err(CliError::Config(format!(
                        "K={} beams need at least that many grid directions, \
                         n_points is only {}",
                        self.design.k, s.n_points
                    )));
                }
                for &lvl in &self.levels {
                    self.design.to_core(l, lvl).validate().map_err(config_err)?;
                }
            }
            EFieldSource::Files(f) => {
                if f.paths.is_empty() {
                    return Err(CliError::Config(
                        "efield.files.paths must list at least one file".into(),
                    ));
                }
                // The element count is only known after loading; validate the
                // level-independent knobs assuming the declared full chain.
                for &lvl in &self.levels {
                    self.design
                        .to_core(self.levels[0], lvl)
                        .validate()
                        .map_err(config_err)?;
                }
            }
        }
        Ok(())
    }
}

impl SynthSpec {
    fn validate(&self) -> CliResult<()> {
        if self.arrays.is_empty() {
            return Err(CliError::Config(
                "efield.synthetic.arrays must list at least one array".into(),
            ));
        }
        if self.n_points == 0 {
            return Err(CliError::Config("n_points must be at least 1".into()));
        }
        let l0 = self.arrays[0].n_elements;
        for (i, a) in self.arrays.iter().enumerate() {
            if a.n_elements != l0 {
                return Err(CliError::Config(format!(
                    "all arrays must have the same element count; array {i} \
                     has {} but array 0 has {l0}",
                    a.n_elements
                )));
            }
            ArrayLayout::line(a.n_elements, a.spacing_wl, a.axis)
                .map_err(|e| CliError::Config(format!("array {i}: {e}")))?;
            Direction::from_degrees(a.boresight_deg[0], a.boresight_deg[1])
                .map_err(|e| CliError::Config(format!("array {i} boresight: {e}")))?;
        }
        Ok(())
    }
}

/// Command-line overrides layered on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub levels: Option<Vec<usize>>,
    pub method: Option<Method>,
    pub emit_traces: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(seed) = self.seed {
            cfg.design.seed = seed;
        }
        if let Some(levels) = &self.levels {
            cfg.levels = levels.clone();
        }
        if let Some(method) = self.method {
            cfg.method = method;
        }
        if self.emit_traces {
            cfg.emit.traces = true;
        }
    }
}

/// Loads a pipeline config, accepting either a bare config or a run
/// manifest (recognized by its `tool` + `config` keys).
pub fn load_pipeline_config(path: &Path) -> CliResult<PipelineConfig> {
    let file = File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let cfg_value = match (value.get("tool"), value.get("config")) {
        (Some(_), Some(cfg)) => cfg.clone(),
        _ => value,
    };
    serde_json::from_value(cfg_value)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}
