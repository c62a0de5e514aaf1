//! End-to-end pipelines: synthesize or load E-fields, design a codebook
//! family per array, evaluate metrics, and lay everything out on disk.
//!
//! Every design run writes `run_manifest.json` capturing the effective
//! configuration; feeding that manifest back to `design` reproduces each
//! artifact byte for byte. On failure, partially written outputs are removed
//! and a machine-readable `error.json` is left in their place.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subchain_core::{
    coverage_cdf_multi, default_candidate_pool, design_bcscmax, design_fullchain_kmeans_from_init,
    design_scmax_traced, design_simmax, fibonacci_grid, greedy_init_traced, load_efield,
    save_efield, similarity_matrix, split_seed, synthesize_array, write_similarity_csv,
    ArrayLayout, Codebook, CodebookFamily, CoverageCdf, Direction, EFieldFormat, EFieldSet,
    MatchingReport,
};

use crate::config::{EFieldSource, Method, PipelineConfig};
use crate::error::{config_err, data_err, internal_err, CliError, CliResult};

/// Manifest file name; rerunning `design` on it reproduces the run.
pub const MANIFEST_FILE: &str = "run_manifest.json";
/// Machine-readable failure record left behind when a run aborts.
pub const ERROR_FILE: &str = "error.json";
/// Matching-rate matrix over all level pairs.
pub const MATCHING_FILE: &str = "matching.csv";
/// Objective traces as JSON lines, when enabled.
pub const TRACES_FILE: &str = "traces.jsonl";

/// Codebook JSON for one array at one activation level.
pub fn codebook_file(array: usize, level: usize) -> String {
    format!("codebook_a{array}_l{level}.json")
}

/// Compact per-array family table (one row per beam, one column per level).
pub fn family_file(array: usize) -> String {
    format!("family_a{array}.csv")
}

/// Device-wide coverage CDF at one activation level.
pub fn cdf_file(level: usize) -> String {
    format!("cdf_l{level}.csv")
}

/// Similarity of one array's sub-chain codebook to its full chain.
pub fn similarity_file(array: usize, level: usize) -> String {
    format!("similarity_a{array}_l{level}.csv")
}

/// Synthesized E-field bundle for one array.
pub fn efield_file(array: usize, format: EFieldFormat) -> String {
    match format {
        EFieldFormat::Json => format!("efield_a{array}.json"),
        EFieldFormat::Csv => format!("efield_a{array}.csv"),
    }
}

/// Tracks files written into the output directory so a failed run can take
/// its partial outputs with it.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, fill: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush().map_err(internal_err)
    }

    /// Marks an externally written file (e.g. a CSV grid companion) as ours.
    fn adopt(&mut self, name: String) {
        self.written.push(name);
    }

    fn paths(&self) -> Vec<PathBuf> {
        self.written.iter().map(|n| self.dir.join(n)).collect()
    }

    fn cleanup(&self) {
        for name in &self.written {
            let _ = fs::remove_file(self.dir.join(name));
        }
    }
}

fn write_error_record(dir: &Path, err: &CliError) {
    #[derive(Serialize)]
    struct Record<'a> {
        error: &'a str,
        message: &'a str,
    }
    let record = Record {
        error: err.kind(),
        message: err.message(),
    };
    if let Ok(file) = File::create(dir.join(ERROR_FILE)) {
        let mut w = BufWriter::new(file);
        let _ = serde_json::to_writer_pretty(&mut w, &record);
        let _ = writeln!(w);
    }
}

/// Runs `body` against a fresh output tracker; on failure removes whatever
/// was written and leaves an `error.json` in the directory instead.
fn with_outputs<T>(
    out_dir: &Path,
    body: impl FnOnce(&mut Outputs) -> CliResult<T>,
) -> CliResult<T> {
    let mut outs = Outputs::create(out_dir)?;
    match body(&mut outs) {
        Ok(v) => Ok(v),
        Err(e) => {
            outs.cleanup();
            write_error_record(&outs.dir, &e);
            Err(e)
        }
    }
}

/// Builds or loads one E-field set per array, as the config directs.
pub fn build_efields(cfg: &PipelineConfig) -> CliResult<Vec<EFieldSet>> {
    match &cfg.efield {
        EFieldSource::Synthetic(s) => {
            let grid = fibonacci_grid(s.n_points).map_err(config_err)?;
            s.arrays
                .iter()
                .enumerate()
                .map(|(ai, a)| {
                    let layout = ArrayLayout::line(a.n_elements, a.spacing_wl, a.axis)
                        .map_err(config_err)?;
                    let boresight = Direction::from_degrees(a.boresight_deg[0], a.boresight_deg[1])
                        .map_err(config_err)?;
                    Ok(synthesize_array(
                        &layout,
                        &grid,
                        s.element_model,
                        boresight,
                        split_seed(s.seed, ai as u64),
                        s.ripple,
                    ))
                })
                .collect()
        }
        EFieldSource::Files(f) => f
            .paths
            .iter()
            .map(|p| load_efield(p, f.format).map_err(data_err))
            .collect(),
    }
}

/// Cross-checks loaded data against the config; returns the element count.
fn check_data(cfg: &PipelineConfig, efs: &[EFieldSet]) -> CliResult<usize> {
    let l = efs[0].n_elements_per_pol();
    for (i, ef) in efs.iter().enumerate().skip(1) {
        if ef.n_elements_per_pol() != l {
            return Err(CliError::Data(format!(
                "arrays must have the same element count; array {i} has {} \
                 but array 0 has {l}",
                ef.n_elements_per_pol()
            )));
        }
        if ef.grid() != efs[0].grid() {
            return Err(CliError::Data(format!(
                "arrays must share one direction grid; array {i} differs from array 0"
            )));
        }
    }
    if cfg.levels[0] != l {
        return Err(CliError::Data(format!(
            "levels must start at the full chain: data has {l} elements per \
             array but levels begin at {}",
            cfg.levels[0]
        )));
    }
    if cfg.design.k > efs[0].grid().n_points() {
        return Err(CliError::Data(format!(
            "K={} beams need at least that many grid directions, the grid has {}",
            cfg.design.k,
            efs[0].grid().n_points()
        )));
    }
    Ok(l)
}

/// One labeled objective trajectory destined for `traces.jsonl`.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    /// `greedy-init` or `kmeans`.
    pub stage: &'static str,
    pub array: usize,
    pub level: usize,
    /// Mean composite gain after each step of the stage.
    pub objective: Vec<f64>,
}

/// Designs the whole family for one array: full chain by greedy-initialized
/// K-Means, sub-levels by the configured method. Returns the family, the
/// greedy full-chain init (recorded in the manifest), and stage traces.
fn design_family(
    cfg: &PipelineConfig,
    ef: &EFieldSet,
    array: usize,
) -> CliResult<(CodebookFamily, Codebook, Vec<TraceRecord>)> {
    let l = ef.n_elements_per_pol();
    // Per-array seed stream, so adding an array never reshuffles another.
    let mut base = cfg.design.to_core(l, l);
    base.seed = split_seed(cfg.design.seed, array as u64);

    let mut traces = Vec::new();
    let pool = default_candidate_pool(ef, &base).map_err(internal_err)?;
    let (init, greedy_trace) = greedy_init_traced(ef, &base, &pool).map_err(internal_err)?;
    let (full, kmeans_trace) =
        design_fullchain_kmeans_from_init(ef, &base, &init).map_err(internal_err)?;
    traces.push(TraceRecord {
        stage: "greedy-init",
        array,
        level: l,
        objective: greedy_trace,
    });
    traces.push(TraceRecord {
        stage: "kmeans",
        array,
        level: l,
        objective: kmeans_trace,
    });

    let mut levels = BTreeMap::new();
    for &lvl in &cfg.levels {
        if lvl == l {
            levels.insert(l, full.clone());
            continue;
        }
        let sub = subchain_core::DesignConfig {
            l_active: lvl,
            ..base.clone()
        };
        let cb = match cfg.method {
            Method::SimMax => design_simmax(ef, &full, &sub).map_err(internal_err)?,
            Method::BcScMax => design_bcscmax(ef, &full, &sub).map_err(internal_err)?,
            Method::ScMax => {
                let sub_pool = default_candidate_pool(ef, &sub).map_err(internal_err)?;
                let (sub_init, g_trace) =
                    greedy_init_traced(ef, &sub, &sub_pool).map_err(internal_err)?;
                let (cb, k_trace) =
                    design_scmax_traced(ef, &sub, &sub_init).map_err(internal_err)?;
                traces.push(TraceRecord {
                    stage: "greedy-init",
                    array,
                    level: lvl,
                    objective: g_trace,
                });
                traces.push(TraceRecord {
                    stage: "kmeans",
                    array,
                    level: lvl,
                    objective: k_trace,
                });
                cb
            }
        };
        levels.insert(lvl, cb);
    }
    let family = CodebookFamily::new(levels).map_err(internal_err)?;
    Ok((family, init, traces))
}

/// Everything a design run computes, independent of what it wrote.
#[derive(Debug)]
pub struct RunArtifacts {
    /// One family per array, in array order.
    pub families: Vec<CodebookFamily>,
    /// Matching rates over all ordered level pairs, device-wide.
    pub report: MatchingReport,
    /// Device-wide coverage CDF per activation level.
    pub cdfs: BTreeMap<usize, CoverageCdf>,
    /// Absolute paths of every file the run wrote.
    pub files: Vec<PathBuf>,
}

struct MetricsBundle {
    report: MatchingReport,
    cdfs: BTreeMap<usize, CoverageCdf>,
    /// `(array, level, matrix)` similarity of each sub-level codebook to its
    /// array's full chain.
    similarities: Vec<(usize, usize, Vec<Vec<f64>>)>,
}

fn compute_metrics(
    cfg: &PipelineConfig,
    efs: &[EFieldSet],
    families: &[CodebookFamily],
) -> CliResult<MetricsBundle> {
    let ef_refs: Vec<&EFieldSet> = efs.iter().collect();
    let fam_refs: Vec<&CodebookFamily> = families.iter().collect();
    let report = MatchingReport::compute(&ef_refs, &fam_refs).map_err(internal_err)?;

    let full_level = cfg.levels[0];
    let mut cdfs = BTreeMap::new();
    for &lvl in &cfg.levels {
        let cbs: Vec<&Codebook> = families
            .iter()
            .map(|f| f.get(lvl).expect("family covers every configured level"))
            .collect();
        cdfs.insert(lvl, coverage_cdf_multi(&ef_refs, &cbs).map_err(internal_err)?);
    }

    let mut similarities = Vec::new();
    for (ai, fam) in families.iter().enumerate() {
        let full = fam.get(full_level).expect("family covers the full chain");
        for &lvl in &cfg.levels[1..] {
            let cand = fam.get(lvl).expect("family covers every configured level");
            let m = similarity_matrix(&efs[ai], full, cand).map_err(internal_err)?;
            similarities.push((ai, lvl, m));
        }
    }
    Ok(MetricsBundle {
        report,
        cdfs,
        similarities,
    })
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

/// Run facts that `compare` needs without re-deriving them from the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryInfo {
    pub n_arrays: usize,
    pub l: usize,
    pub k: usize,
    pub levels: Vec<usize>,
    pub method: String,
    pub n_points: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: ToolInfo,
    config: &'a PipelineConfig,
    summary: RunSummaryInfo,
    /// Greedy full-chain initialization per array, before K-Means refinement,
    /// for init-sensitivity studies.
    init_codebooks: Vec<serde_json::Value>,
    /// Artifact files this run wrote (the manifest itself is implied).
    outputs: Vec<String>,
}

fn codebook_value(cb: &Codebook) -> CliResult<serde_json::Value> {
    let mut buf = Vec::new();
    cb.write_json(&mut buf).map_err(internal_err)?;
    serde_json::from_slice(&buf).map_err(internal_err)
}

fn emit_metrics_files(outs: &mut Outputs, bundle: &MetricsBundle) -> CliResult<()> {
    outs.write(MATCHING_FILE, |w| {
        bundle.report.write_csv(w).map_err(internal_err)
    })?;
    for (lvl, cdf) in &bundle.cdfs {
        outs.write(&cdf_file(*lvl), |w| cdf.write_csv(w).map_err(internal_err))?;
    }
    for (ai, lvl, m) in &bundle.similarities {
        outs.write(&similarity_file(*ai, *lvl), |w| {
            write_similarity_csv(m, w).map_err(internal_err)
        })?;
    }
    Ok(())
}

/// Runs the whole design pipeline into `out_dir`.
pub fn run_design_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> CliResult<RunArtifacts> {
    with_outputs(out_dir, |outs| {
        cfg.validate()?;
        let efs = build_efields(cfg)?;
        let l = check_data(cfg, &efs)?;

        let mut families = Vec::with_capacity(efs.len());
        let mut inits = Vec::with_capacity(efs.len());
        let mut traces = Vec::new();
        for (ai, ef) in efs.iter().enumerate() {
            let (family, init, tr) = design_family(cfg, ef, ai)?;
            families.push(family);
            inits.push(init);
            traces.extend(tr);
        }

        let bundle = compute_metrics(cfg, &efs, &families)?;

        if cfg.emit.codebooks {
            for (ai, family) in families.iter().enumerate() {
                for (lvl, cb) in family.levels() {
                    outs.write(&codebook_file(ai, lvl), |w| {
                        cb.write_json(w).map_err(internal_err)
                    })?;
                }
                outs.write(&family_file(ai), |w| {
                    family.write_csv(w).map_err(internal_err)
                })?;
            }
        }
        if cfg.emit.metrics {
            emit_metrics_files(outs, &bundle)?;
        }
        if cfg.emit.traces {
            outs.write(TRACES_FILE, |w| {
                for t in &traces {
                    serde_json::to_writer(&mut *w, t).map_err(internal_err)?;
                    writeln!(w).map_err(internal_err)?;
                }
                Ok(())
            })?;
        }

        let manifest = RunManifest {
            tool: ToolInfo {
                name: "subchain",
                version: env!("CARGO_PKG_VERSION"),
            },
            config: cfg,
            summary: RunSummaryInfo {
                n_arrays: efs.len(),
                l,
                k: cfg.design.k,
                levels: cfg.levels.clone(),
                method: cfg.method.tag().to_string(),
                n_points: efs[0].grid().n_points(),
            },
            init_codebooks: inits
                .iter()
                .map(codebook_value)
                .collect::<CliResult<_>>()?,
            outputs: outs.written.clone(),
        };
        outs.write(MANIFEST_FILE, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).map_err(internal_err)?;
            writeln!(w).map_err(internal_err)
        })?;

        Ok(RunArtifacts {
            families,
            report: bundle.report,
            cdfs: bundle.cdfs,
            files: outs.paths(),
        })
    })
}

/// Reads the codebook family for one array back from a design run's output
/// directory, checking it against the config.
fn load_family(
    cfg: &PipelineConfig,
    dir: &Path,
    array: usize,
    l: usize,
) -> CliResult<CodebookFamily> {
    let mut levels = BTreeMap::new();
    for &lvl in &cfg.levels {
        let path = dir.join(codebook_file(array, lvl));
        let file = File::open(&path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        let cb = Codebook::read_json(BufReader::new(file))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if cb.n_elements_per_pol() != l
            || cb.l_active() != lvl
            || cb.k() != cfg.design.k
            || cb.phase_bits() != cfg.design.phase_bits
        {
            return Err(CliError::Data(format!(
                "{}: codebook (K={}, L={}, L_A={}, b={}) does not match the \
                 config (K={}, L={l}, L_A={lvl}, b={})",
                path.display(),
                cb.k(),
                cb.n_elements_per_pol(),
                cb.l_active(),
                cb.phase_bits(),
                cfg.design.k,
                cfg.design.phase_bits,
            )));
        }
        levels.insert(lvl, cb);
    }
    CodebookFamily::new(levels).map_err(data_err)
}

/// Recomputes the metric files for previously designed codebooks. Writes the
/// same matching/CDF/similarity CSVs a design run would, byte for byte.
pub fn run_metrics_pipeline(
    cfg: &PipelineConfig,
    codebook_dir: &Path,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    with_outputs(out_dir, |outs| {
        cfg.validate()?;
        let efs = build_efields(cfg)?;
        let l = check_data(cfg, &efs)?;
        let families = (0..efs.len())
            .map(|ai| load_family(cfg, codebook_dir, ai, l))
            .collect::<CliResult<Vec<_>>>()?;
        let bundle = compute_metrics(cfg, &efs, &families)?;
        emit_metrics_files(outs, &bundle)?;
        Ok(outs.paths())
    })
}

/// Synthesizes the configured E-field data and writes one file per array.
pub fn run_synth(
    cfg: &PipelineConfig,
    out_dir: &Path,
    format: EFieldFormat,
) -> CliResult<Vec<PathBuf>> {
    with_outputs(out_dir, |outs| {
        cfg.validate()?;
        let efs = build_efields(cfg)?;
        check_data(cfg, &efs)?;
        for (ai, ef) in efs.iter().enumerate() {
            let name = efield_file(ai, format);
            let path = outs.dir.join(&name);
            outs.adopt(name);
            if format == EFieldFormat::Csv {
                // save_efield writes the grid companion next to the data file.
                let companion = subchain_core::efield::csv_grid_companion(&path);
                if let Some(n) = companion.file_name().and_then(|n| n.to_str()) {
                    outs.adopt(n.to_string());
                }
            }
            save_efield(ef, &path, format).map_err(internal_err)?;
        }
        Ok(outs.paths())
    })
}

/// Checks an E-field file against its schema; returns a one-line summary.
pub fn validate_efield_file(path: &Path, format: EFieldFormat) -> CliResult<String> {
    let ef = load_efield(path, format).map_err(data_err)?;
    Ok(format!(
        "valid e-field set: {} dual-pol elements ({} ports), {} directions",
        ef.n_elements_per_pol(),
        ef.n_antennas(),
        ef.grid().n_points()
    ))
}

/// Checks a codebook JSON file against its schema; returns a one-line summary.
pub fn validate_codebook_file(path: &Path) -> CliResult<String> {
    let file =
        File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let cb = Codebook::read_json(BufReader::new(file)).map_err(data_err)?;
    Ok(format!(
        "valid codebook: method {}, K={} beams, L={} elements per pol, L_A={}, {}-bit phases",
        cb.method_tag(),
        cb.k(),
        cb.n_elements_per_pol(),
        cb.l_active(),
        cb.phase_bits()
    ))
}
