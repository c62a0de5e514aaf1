//! Library half of the `subchain` binary: the run configuration schema, the
//! design/metrics/synthesis pipelines with their on-disk artifact layout,
//! and cross-run comparison. The binary in `main.rs` is a thin argument
//! parser over these functions, so tests can drive complete runs in-process.

pub mod compare;
pub mod config;
pub mod error;
pub mod pipeline;

pub use compare::{run_compare, COMPARE_CDF_FILE, COMPARE_MANIFEST_FILE, COMPARE_MATCHING_FILE};
pub use config::{
    load_pipeline_config, ArraySpec, DesignSection, EFieldSource, EmitFlags, FileSpec, Method,
    Overrides, PipelineConfig, SynthSpec,
};
pub use error::{CliError, CliResult};
pub use pipeline::{
    build_efields, cdf_file, codebook_file, efield_file, family_file, run_design_pipeline,
    run_metrics_pipeline, run_synth, similarity_file, validate_codebook_file,
    validate_efield_file, RunArtifacts, RunSummaryInfo, ERROR_FILE, MANIFEST_FILE, MATCHING_FILE,
    TRACES_FILE,
};
