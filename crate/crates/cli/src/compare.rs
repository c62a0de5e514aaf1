//! Cross-run comparison: juxtaposes matching rates and coverage percentiles
//! from several completed design runs (typically the same setup under
//! different methods) and reports deltas against the first run.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::pipeline::{cdf_file, RunSummaryInfo, MANIFEST_FILE, MATCHING_FILE};

/// Merged matching-rate table across runs.
pub const COMPARE_MATCHING_FILE: &str = "compare_matching.csv";
/// Merged coverage-percentile table across runs.
pub const COMPARE_CDF_FILE: &str = "compare_cdf.csv";
/// Record of what was compared.
pub const COMPARE_MANIFEST_FILE: &str = "compare_manifest.json";

fn read_summary(dir: &Path) -> CliResult<RunSummaryInfo> {
    let path = dir.join(MANIFEST_FILE);
    let file = File::open(&path).map_err(|e| {
        CliError::Data(format!(
            "{} is not a run directory (cannot open {}: {e})",
            dir.display(),
            path.display()
        ))
    })?;
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value["summary"].clone())
        .map_err(|e| CliError::Data(format!("{}: bad summary section: {e}", path.display())))
}

/// `(level_1, level_2) -> (matching_rate, repaired_rate)` from matching.csv.
type MatchingTable = Vec<((usize, usize), (f64, f64))>;

fn read_matching(dir: &Path) -> CliResult<MatchingTable> {
    let path = dir.join(MATCHING_FILE);
    let file = File::open(&path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let field = |i: usize| -> CliResult<&str> {
            rec.get(i)
                .ok_or_else(|| CliError::Data(format!("{}: short row", path.display())))
        };
        let l1: usize = field(0)?
            .parse()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let l2: usize = field(1)?
            .parse()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let rate: f64 = field(2)?
            .parse()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let repaired: f64 = field(3)?
            .parse()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        rows.push(((l1, l2), (rate, repaired)));
    }
    Ok(rows)
}

/// `(percentile, gain_dbi)` rows of one run's CDF file.
fn read_cdf(dir: &Path, level: usize) -> CliResult<Vec<(u32, f64)>> {
    let path = dir.join(cdf_file(level));
    let file = File::open(&path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let p: u32 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Data(format!("{}: bad percentile", path.display())))?;
        let g: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Data(format!("{}: bad gain", path.display())))?;
        rows.push((p, g));
    }
    Ok(rows)
}

fn check_compatible(dirs: &[PathBuf], summaries: &[RunSummaryInfo]) -> CliResult<()> {
    let base = &summaries[0];
    for (dir, s) in dirs.iter().zip(summaries).skip(1) {
        if s.l != base.l
            || s.k != base.k
            || s.n_arrays != base.n_arrays
            || s.levels != base.levels
            || s.n_points != base.n_points
        {
            return Err(CliError::Data(format!(
                "{} is not comparable with {}: runs must share the grid size, \
                 array count, K, and levels",
                dir.display(),
                dirs[0].display()
            )));
        }
    }
    Ok(())
}

/// Merges the metric tables of two or more runs into comparison CSVs in
/// `out_dir`. Deltas are taken against the first run; comparing a run with
/// itself therefore yields all-zero delta columns.
pub fn run_compare(run_dirs: &[PathBuf], out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    if run_dirs.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two run directories".into(),
        ));
    }
    let summaries = run_dirs
        .iter()
        .map(|d| read_summary(d))
        .collect::<CliResult<Vec<_>>>()?;
    check_compatible(run_dirs, &summaries)?;

    let matchings = run_dirs
        .iter()
        .map(|d| read_matching(d))
        .collect::<CliResult<Vec<_>>>()?;
    let base_matching = &matchings[0];
    for (dir, m) in run_dirs.iter().zip(&matchings).skip(1) {
        let keys: Vec<_> = m.iter().map(|(k, _)| *k).collect();
        let base_keys: Vec<_> = base_matching.iter().map(|(k, _)| *k).collect();
        if keys != base_keys {
            return Err(CliError::Data(format!(
                "{}: matching table covers different level pairs than {}",
                dir.display(),
                run_dirs[0].display()
            )));
        }
    }

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut written = Vec::new();

    let matching_path = out_dir.join(COMPARE_MATCHING_FILE);
    {
        let file = File::create(&matching_path)
            .map_err(|e| CliError::Internal(format!("{}: {e}", matching_path.display())))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record([
            "run",
            "method",
            "level_1",
            "level_2",
            "matching_rate",
            "repaired_rate",
            "matching_rate_delta",
            "repaired_rate_delta",
        ])
        .map_err(|e| CliError::Internal(e.to_string()))?;
        for (ri, rows) in matchings.iter().enumerate() {
            for (i, ((l1, l2), (rate, repaired))) in rows.iter().enumerate() {
                let (base_rate, base_rep) = base_matching[i].1;
                w.write_record([
                    ri.to_string(),
                    summaries[ri].method.clone(),
                    l1.to_string(),
                    l2.to_string(),
                    rate.to_string(),
                    repaired.to_string(),
                    (rate - base_rate).to_string(),
                    (repaired - base_rep).to_string(),
                ])
                .map_err(|e| CliError::Internal(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    written.push(matching_path);

    let cdf_path = out_dir.join(COMPARE_CDF_FILE);
    {
        let file = File::create(&cdf_path)
            .map_err(|e| CliError::Internal(format!("{}: {e}", cdf_path.display())))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record([
            "run",
            "method",
            "level",
            "percentile",
            "gain_dbi",
            "gain_dbi_delta",
        ])
        .map_err(|e| CliError::Internal(e.to_string()))?;
        for &lvl in &summaries[0].levels {
            let base_rows = read_cdf(&run_dirs[0], lvl)?;
            for (ri, dir) in run_dirs.iter().enumerate() {
                let rows = if ri == 0 {
                    base_rows.clone()
                } else {
                    read_cdf(dir, lvl)?
                };
                if rows.len() != base_rows.len() {
                    return Err(CliError::Data(format!(
                        "{}: CDF for level {lvl} has a different number of rows than {}",
                        dir.display(),
                        run_dirs[0].display()
                    )));
                }
                for ((p, g), (_, base_g)) in rows.iter().zip(&base_rows) {
                    w.write_record([
                        ri.to_string(),
                        summaries[ri].method.clone(),
                        lvl.to_string(),
                        p.to_string(),
                        g.to_string(),
                        (g - base_g).to_string(),
                    ])
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                }
            }
        }
        w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    written.push(cdf_path);

    #[derive(Serialize)]
    struct CompareManifest<'a> {
        runs: Vec<String>,
        methods: Vec<&'a str>,
        levels: &'a [usize],
        k: usize,
    }
    let manifest_path = out_dir.join(COMPARE_MANIFEST_FILE);
    {
        let manifest = CompareManifest {
            runs: run_dirs.iter().map(|d| d.display().to_string()).collect(),
            methods: summaries.iter().map(|s| s.method.as_str()).collect(),
            levels: &summaries[0].levels,
            k: summaries[0].k,
        };
        let file = File::create(&manifest_path)
            .map_err(|e| CliError::Internal(format!("{}: {e}", manifest_path.display())))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &manifest)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(w).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    written.push(manifest_path);

    Ok(written)
}
